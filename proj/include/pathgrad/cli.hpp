// Command-line front end: config-driven, reproducible runs over all
// analysis modules. Every command writes its resolved configuration next
// to its artifacts so any result can be re-derived.
#pragma once

#include <filesystem>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pathgrad/evalharness.hpp"
#include "pathgrad/io.hpp"
#include "pathgrad/linearity.hpp"
#include "pathgrad/pruneobj.hpp"

namespace pathgrad::cli {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string output_dir = "out";
    uint64_t seed = 0;
    int jobs = 1;
};

inline void write_config(const fs::path& dir, const nlohmann::ordered_json& cfg) {
    fs::create_directories(dir);
    std::ofstream f(dir / "config.json", std::ios::binary);
    f << cfg.dump(2) << "\n";
}

// Index-deterministic parallel map: results land in preallocated slots, so
// output is identical for any worker count.
template <typename Fn>
inline void parallel_for(size_t n, int jobs, Fn&& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < jobs; ++t)
        workers.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

// Dataset spec: "xor:n=200" | "two-moons:n=200" |
// "informative-pixels:n=200,h=4,w=4,k=2" | "idx:<images>,<labels>"
inline Dataset parse_dataset(const std::string& spec, uint64_t seed) {
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "idx") {
        auto comma = rest.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("idx spec needs '<images>,<labels>'");
        return load_idx(rest.substr(0, comma), rest.substr(comma + 1));
    }
    int n = 200;
    SyntheticOptions opt;
    std::istringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("bad dataset option '" + item + "'");
        std::string key = item.substr(0, eq);
        int value = std::stoi(item.substr(eq + 1));
        if (key == "n") n = value;
        else if (key == "h") opt.image_h = value;
        else if (key == "w") opt.image_w = value;
        else if (key == "k") opt.informative_count = value;
        else throw std::invalid_argument("unknown dataset option '" + key + "'");
    }
    return gen_synthetic(synthetic_kind_from_name(kind), n, seed, opt);
}

// Architecture spec: '-'-separated tokens applied to the dataset's input
// shape, e.g. "dense16-dense8" or "conv4x3-pool2-dense16". A linear head
// to the class count is appended automatically.
inline Network parse_arch(const std::string& spec, TensorShape input, int classes) {
    Network net;
    TensorShape cur = input;
    std::istringstream ss(spec);
    std::string token;
    auto ensure_flat = [&] {
        if (cur.c != 1 || cur.h != 1) {
            net.push_back(flatten_layer(cur));
            cur = {1, 1, cur.size()};
        }
    };
    while (std::getline(ss, token, '-')) {
        if (token.rfind("dense", 0) == 0) {
            int units = std::stoi(token.substr(5));
            ensure_flat();
            Layer l = dense_layer(cur.size(), units, true);
            net.push_back(std::move(l));
            cur = {1, 1, units};
        } else if (token.rfind("conv", 0) == 0) {
            auto xpos = token.find('x');
            if (xpos == std::string::npos)
                throw std::invalid_argument("conv token needs '<channels>x<kernel>'");
            int oc = std::stoi(token.substr(4, xpos - 4));
            int k = std::stoi(token.substr(xpos + 1));
            Layer l = conv_layer(cur, oc, k, k, 1, k / 2, true);
            cur = l.out_shape;
            net.push_back(std::move(l));
        } else if (token.rfind("pool", 0) == 0) {
            int p = std::stoi(token.substr(4));
            Layer l = avgpool_layer(cur, p, p);
            cur = l.out_shape;
            net.push_back(std::move(l));
        } else {
            throw std::invalid_argument("unknown architecture token '" + token + "'");
        }
    }
    ensure_flat();
    net.push_back(dense_layer(cur.size(), classes, false));
    return net;
}

struct AttributorSpec {
    std::string method = "neuronintgrad";
    double sparsity = 0.9;
    int steps = 50;
    bool smooth = false;
};

inline Attributor make_attributor(const AttributorSpec& spec) {
    auto apply_smooth = [smooth = spec.smooth](AttributionMap map) {
        if (smooth) {
            int k = std::min({3, map.shape.h, map.shape.w});
            if (k % 2 == 0) --k;
            if (k >= 3) map = smooth_opening(map, k);
        }
        return map;
    };
    if (spec.method == "neuronintgrad" || spec.method == "pathway-gradient")
        return [spec, apply_smooth](const Network& net, const Vec& x, int cls) {
            return apply_smooth(pathway_gradient(net, x, cls, ContributionMethod::NeuronIntGrad,
                                                 spec.sparsity, spec.steps));
        };
    if (spec.method == "neuronmct" || spec.method == "pathway-gradient-mct")
        return [spec, apply_smooth](const Network& net, const Vec& x, int cls) {
            return apply_smooth(pathway_gradient(net, x, cls, ContributionMethod::NeuronMCT,
                                                 spec.sparsity));
        };
    BaselineMethod base = baseline_method_from_name(spec.method);
    BaselineOptions opt;
    opt.intgrad_steps = spec.steps;
    return [base, opt, apply_smooth](const Network& net, const Vec& x, int cls) {
        return apply_smooth(baseline_attribution(net, x, cls, base, opt));
    };
}

inline PathwayMask compute_pathway(const Network& net, const Vec& x, int cls,
                                   const std::string& method, double sparsity, int steps,
                                   uint64_t seed) {
    if (method == "neuronmct")
        return select_pathway(net, neuron_mct(net, x, cls), sparsity);
    if (method == "neuronintgrad")
        return select_pathway(net, neuron_intgrad(net, x, cls, steps), sparsity);
    if (method == "greedy") return greedy_prune(net, x, cls, sparsity).pathway;
    if (method == "dgr") {
        DgrConfig cfg;
        cfg.seed = seed;
        return dgr_optimize(net, x, cls, sparsity, cfg).pathway;
    }
    if (method == "dgr-random") {
        DgrConfig cfg;
        cfg.init = GateInit::UniformRandom;
        cfg.seed = seed;
        return dgr_optimize(net, x, cls, sparsity, cfg).pathway;
    }
    if (method == "active")
        return active_subnet(net, forward_record(net, x, cls));
    throw std::invalid_argument("unknown pathway method '" + method + "'");
}

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

inline std::vector<double> split_doubles(const std::string& csv) {
    std::vector<double> out;
    for (const auto& s : split_list(csv)) out.push_back(std::stod(s));
    return out;
}

inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"critical-pathway analysis toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--out", common.output_dir, "output directory")->capture_default_str();
    app.add_option("--seed", common.seed, "master random seed")->capture_default_str();
    app.add_option("--jobs", common.jobs, "worker parallelism bound")->capture_default_str();

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "train a network and save its manifest");
    std::string tr_dataset = "xor:n=200", tr_arch = "dense8";
    TrainConfig tr_cfg;
    std::string tr_loss = "ce";
    cmd_train->add_option("--dataset", tr_dataset, "dataset spec");
    cmd_train->add_option("--arch", tr_arch, "architecture spec");
    cmd_train->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    cmd_train->add_option("--momentum", tr_cfg.momentum, "momentum");
    cmd_train->add_option("--epochs", tr_cfg.epochs, "epochs");
    cmd_train->add_option("--batch", tr_cfg.batch_size, "batch size");
    cmd_train->add_option("--loss", tr_loss, "loss: ce | mse");

    // ---- contrib ----
    auto* cmd_contrib = app.add_subcommand("contrib", "neuron contribution scores");
    std::string co_model, co_dataset = "xor:n=200", co_method = "neuronintgrad";
    int co_index = 0, co_steps = 50;
    cmd_contrib->add_option("--model", co_model, "model manifest")->required();
    cmd_contrib->add_option("--dataset", co_dataset, "dataset spec");
    cmd_contrib->add_option("--index", co_index, "input index");
    cmd_contrib->add_option("--method", co_method, "neuronmct | neuronintgrad");
    cmd_contrib->add_option("--steps", co_steps, "integration steps");

    // ---- select-path ----
    auto* cmd_select = app.add_subcommand("select-path", "pathway from contributions");
    std::string se_model, se_dataset = "xor:n=200", se_method = "neuronintgrad";
    int se_index = 0, se_steps = 50;
    double se_sparsity = 0.9;
    cmd_select->add_option("--model", se_model, "model manifest")->required();
    cmd_select->add_option("--dataset", se_dataset, "dataset spec");
    cmd_select->add_option("--index", se_index, "input index");
    cmd_select->add_option("--method", se_method, "pathway method");
    cmd_select->add_option("--steps", se_steps, "integration steps");
    cmd_select->add_option("--sparsity", se_sparsity, "fraction excluded");

    // ---- greedy-prune ----
    auto* cmd_greedy = app.add_subcommand("greedy-prune", "pathological greedy pruning");
    std::string gp_model, gp_dataset = "xor:n=200";
    int gp_index = 0, gp_chunk = 0;
    double gp_sparsity = 0.9;
    cmd_greedy->add_option("--model", gp_model, "model manifest")->required();
    cmd_greedy->add_option("--dataset", gp_dataset, "dataset spec");
    cmd_greedy->add_option("--index", gp_index, "input index");
    cmd_greedy->add_option("--sparsity", gp_sparsity, "fraction excluded");
    cmd_greedy->add_option("--chunk", gp_chunk, "neurons removed per rescoring pass");

    // ---- dgr ----
    auto* cmd_dgr = app.add_subcommand("dgr", "distillation guided routing gates");
    std::string dg_model, dg_dataset = "xor:n=200", dg_init = "ones";
    int dg_index = 0;
    double dg_sparsity = 0.9;
    DgrConfig dg_cfg;
    cmd_dgr->add_option("--model", dg_model, "model manifest")->required();
    cmd_dgr->add_option("--dataset", dg_dataset, "dataset spec");
    cmd_dgr->add_option("--index", dg_index, "input index");
    cmd_dgr->add_option("--sparsity", dg_sparsity, "fraction excluded");
    cmd_dgr->add_option("--gamma", dg_cfg.gamma, "l1 penalty weight");
    cmd_dgr->add_option("--lr", dg_cfg.learning_rate, "learning rate");
    cmd_dgr->add_option("--iterations", dg_cfg.iterations, "gradient steps");
    cmd_dgr->add_option("--init", dg_init, "gate init: ones | random");

    // ---- pathway-stats ----
    auto* cmd_stats = app.add_subcommand("pathway-stats",
                                         "dead-fraction and Jaccard tables");
    std::string ps_model, ps_dataset = "informative-pixels:n=64";
    std::string ps_methods = "neuronintgrad,greedy", ps_sparsities = "0.8,0.9,0.99";
    int ps_count = 16, ps_steps = 50;
    cmd_stats->add_option("--model", ps_model, "model manifest")->required();
    cmd_stats->add_option("--dataset", ps_dataset, "dataset spec");
    cmd_stats->add_option("--methods", ps_methods, "comma list of pathway methods");
    cmd_stats->add_option("--sparsity", ps_sparsities, "comma list of sparsities");
    cmd_stats->add_option("--count", ps_count, "number of inputs");
    cmd_stats->add_option("--steps", ps_steps, "integration steps");

    // ---- linearity ----
    auto* cmd_lin = app.add_subcommand("linearity", "linear-region certification");
    std::string li_model, li_dataset = "informative-pixels:n=64", li_method = "neuronintgrad";
    int li_count = 8, li_steps = 50, li_samples = 64;
    double li_sparsity = 0.9, li_delta = 0.01;
    cmd_lin->add_option("--model", li_model, "model manifest")->required();
    cmd_lin->add_option("--dataset", li_dataset, "dataset spec");
    cmd_lin->add_option("--method", li_method, "neuronmct | neuronintgrad");
    cmd_lin->add_option("--count", li_count, "number of inputs");
    cmd_lin->add_option("--sparsity", li_sparsity, "fraction excluded");
    cmd_lin->add_option("--steps", li_steps, "integration steps");
    cmd_lin->add_option("--samples", li_samples, "ball samples");
    cmd_lin->add_option("--delta", li_delta, "radius shrink factor");

    // ---- attribute ----
    auto* cmd_attr = app.add_subcommand("attribute", "input attribution maps");
    std::string at_model, at_dataset = "informative-pixels:n=64";
    AttributorSpec at_spec;
    int at_index = 0;
    cmd_attr->add_option("--model", at_model, "model manifest")->required();
    cmd_attr->add_option("--dataset", at_dataset, "dataset spec");
    cmd_attr->add_option("--index", at_index, "input index");
    cmd_attr->add_option("--method", at_spec.method, "attribution method");
    cmd_attr->add_option("--sparsity", at_spec.sparsity, "pathway sparsity");
    cmd_attr->add_option("--steps", at_spec.steps, "integration steps");
    cmd_attr->add_flag("--smooth", at_spec.smooth, "morphological opening");

    // ---- eval-lerf ----
    auto* cmd_lerf = app.add_subcommand("eval-lerf", "LeRF input degradation curves");
    std::string lf_model, lf_dataset = "informative-pixels:n=200";
    std::string lf_methods = "neuronintgrad,inputintgrad";
    std::string lf_fill = "mean";
    int lf_steps = 50;
    double lf_sparsity = 0.9;
    cmd_lerf->add_option("--model", lf_model, "model manifest")->required();
    cmd_lerf->add_option("--dataset", lf_dataset, "dataset spec");
    cmd_lerf->add_option("--methods", lf_methods, "comma list of attribution methods");
    cmd_lerf->add_option("--sparsity", lf_sparsity, "pathway sparsity");
    cmd_lerf->add_option("--steps", lf_steps, "integration steps");
    cmd_lerf->add_option("--fill", lf_fill, "replacement value: mean | zero");

    // ---- eval-roar ----
    auto* cmd_roar = app.add_subcommand("eval-roar", "remove-and-retrain benchmark");
    std::string ro_model, ro_dataset = "informative-pixels:n=256";
    std::string ro_test_dataset, ro_arch = "dense16", ro_method = "neuronintgrad";
    std::string ro_percentiles = "10,30,50,70,90";
    int ro_seeds = 3, ro_steps = 50, ro_epochs = 60;
    double ro_sparsity = 0.9, ro_lr = 0.1;
    cmd_roar->add_option("--model", ro_model, "reference model manifest")->required();
    cmd_roar->add_option("--dataset", ro_dataset, "train dataset spec");
    cmd_roar->add_option("--test-dataset", ro_test_dataset, "test dataset spec");
    cmd_roar->add_option("--arch", ro_arch, "retraining architecture");
    cmd_roar->add_option("--method", ro_method, "attribution method");
    cmd_roar->add_option("--sparsity", ro_sparsity, "pathway sparsity");
    cmd_roar->add_option("--steps", ro_steps, "integration steps");
    cmd_roar->add_option("--percentiles", ro_percentiles, "comma list of percentiles");
    cmd_roar->add_option("--retrain-seeds", ro_seeds, "retraining seeds per percentile");
    cmd_roar->add_option("--epochs", ro_epochs, "retraining epochs");
    cmd_roar->add_option("--lr", ro_lr, "retraining learning rate");

    // ---- sanity-check ----
    auto* cmd_sanity = app.add_subcommand("sanity-check",
                                          "parameter randomization sanity check");
    std::string sa_model, sa_dataset = "informative-pixels:n=64", sa_method = "neuronintgrad";
    int sa_count = 16, sa_steps = 50;
    double sa_sparsity = 0.9;
    cmd_sanity->add_option("--model", sa_model, "model manifest")->required();
    cmd_sanity->add_option("--dataset", sa_dataset, "dataset spec");
    cmd_sanity->add_option("--method", sa_method, "attribution method");
    cmd_sanity->add_option("--count", sa_count, "number of inputs");
    cmd_sanity->add_option("--sparsity", sa_sparsity, "pathway sparsity");
    cmd_sanity->add_option("--steps", sa_steps, "integration steps");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    fs::path out(common.output_dir);
    try {
        if (*cmd_train) {
            if (tr_loss != "ce" && tr_loss != "mse")
                throw std::invalid_argument("loss must be 'ce' or 'mse'");
            tr_cfg.loss = tr_loss == "ce" ? LossKind::SoftmaxCrossEntropy
                                          : LossKind::MeanSquaredError;
            tr_cfg.seed = common.seed;
            Dataset ds = parse_dataset(tr_dataset, common.seed);
            Network spec = parse_arch(tr_arch, ds.shape, ds.class_count);
            TrainResult result = train(spec, ds, tr_cfg);
            write_config(out, {{"command", "train"},
                               {"dataset", tr_dataset},
                               {"arch", tr_arch},
                               {"lr", tr_cfg.learning_rate},
                               {"momentum", tr_cfg.momentum},
                               {"epochs", tr_cfg.epochs},
                               {"batch", tr_cfg.batch_size},
                               {"loss", tr_loss},
                               {"seed", common.seed}});
            save_manifest_file(result.net, (out / "model.json").string());
            CsvWriter csv((out / "metrics.csv").string());
            csv.row({"epoch", "loss", "accuracy"});
            for (const auto& m : result.trace)
                csv.row({std::to_string(m.epoch), format_double(m.loss),
                         format_double(m.accuracy)});
            std::printf("trained: final accuracy %s\n",
                        format_double(result.trace.back().accuracy).c_str());
        } else if (*cmd_contrib) {
            Network net = load_manifest_file(co_model);
            Dataset ds = parse_dataset(co_dataset, common.seed);
            const Vec& x = ds.inputs.at(co_index);
            int cls = predict(net, x);
            ContributionMap c = co_method == "neuronmct"
                                    ? neuron_mct(net, x, cls)
                                    : neuron_intgrad(net, x, cls, co_steps);
            write_config(out, {{"command", "contrib"},
                               {"model", co_model},
                               {"dataset", co_dataset},
                               {"index", co_index},
                               {"method", co_method},
                               {"steps", co_steps},
                               {"class", cls},
                               {"seed", common.seed}});
            write_contribution_csv(net, c, (out / "contrib.csv").string());
        } else if (*cmd_select) {
            Network net = load_manifest_file(se_model);
            Dataset ds = parse_dataset(se_dataset, common.seed);
            const Vec& x = ds.inputs.at(se_index);
            int cls = predict(net, x);
            PathwayMask mask =
                compute_pathway(net, x, cls, se_method, se_sparsity, se_steps, common.seed);
            write_config(out, {{"command", "select-path"},
                               {"model", se_model},
                               {"dataset", se_dataset},
                               {"index", se_index},
                               {"method", se_method},
                               {"steps", se_steps},
                               {"sparsity", se_sparsity},
                               {"seed", common.seed}});
            save_pathway_mask(net, mask, (out / "pathway.txt").string());
            if (mask.threshold_zero)
                std::fprintf(stderr, "warning: realized threshold is 0; "
                                     "local-linearity precondition violated\n");
        } else if (*cmd_greedy) {
            Network net = load_manifest_file(gp_model);
            Dataset ds = parse_dataset(gp_dataset, common.seed);
            const Vec& x = ds.inputs.at(gp_index);
            int cls = predict(net, x);
            GreedyPruneResult result = greedy_prune(net, x, cls, gp_sparsity, gp_chunk);
            write_config(out, {{"command", "greedy-prune"},
                               {"model", gp_model},
                               {"dataset", gp_dataset},
                               {"index", gp_index},
                               {"sparsity", gp_sparsity},
                               {"chunk", gp_chunk},
                               {"seed", common.seed}});
            save_pathway_mask(net, result.pathway, (out / "pathway.txt").string());
            CsvWriter csv((out / "prune-trace.csv").string());
            csv.row({"pass", "kept", "drift"});
            for (size_t i = 0; i < result.state.kept_history.size(); ++i)
                csv.row({std::to_string(i), std::to_string(result.state.kept_history[i]),
                         format_double(result.state.drift_trace[i])});
            if (result.state.early_stop)
                std::fprintf(stderr, "warning: ran out of prunable neurons before "
                                     "target sparsity\n");
        } else if (*cmd_dgr) {
            Network net = load_manifest_file(dg_model);
            Dataset ds = parse_dataset(dg_dataset, common.seed);
            const Vec& x = ds.inputs.at(dg_index);
            int cls = predict(net, x);
            dg_cfg.seed = common.seed;
            dg_cfg.init = dg_init == "random" ? GateInit::UniformRandom : GateInit::Ones;
            DgrResult result = dgr_optimize(net, x, cls, dg_sparsity, dg_cfg);
            write_config(out, {{"command", "dgr"},
                               {"model", dg_model},
                               {"dataset", dg_dataset},
                               {"index", dg_index},
                               {"sparsity", dg_sparsity},
                               {"gamma", dg_cfg.gamma},
                               {"lr", dg_cfg.learning_rate},
                               {"iterations", dg_cfg.iterations},
                               {"init", dg_init},
                               {"seed", common.seed}});
            save_pathway_mask(net, result.pathway, (out / "pathway.txt").string());
            CsvWriter csv((out / "objective.csv").string());
            csv.row({"iteration", "objective"});
            for (size_t i = 0; i < result.gates.objective_trace.size(); ++i)
                csv.row({std::to_string(i), format_double(result.gates.objective_trace[i])});
        } else if (*cmd_stats) {
            Network net = load_manifest_file(ps_model);
            Dataset ds = parse_dataset(ps_dataset, common.seed);
            auto methods = split_list(ps_methods);
            auto sparsities = split_doubles(ps_sparsities);
            size_t count = std::min<size_t>(ps_count, ds.size());
            write_config(out, {{"command", "pathway-stats"},
                               {"model", ps_model},
                               {"dataset", ps_dataset},
                               {"methods", ps_methods},
                               {"sparsity", ps_sparsities},
                               {"count", count},
                               {"steps", ps_steps},
                               {"seed", common.seed}});

            struct Row {
                std::string method;
                double sparsity;
                double dead = 0.0, dead_active = 0.0, jaccard_ref = 0.0;
            };
            std::vector<Row> rows;
            for (const auto& method : methods)
                for (double sp : sparsities) rows.push_back({method, sp});
            std::vector<std::vector<PathwayMask>> ref_masks(sparsities.size());
            for (size_t si = 0; si < sparsities.size(); ++si) {
                ref_masks[si].resize(count);
                for (size_t i = 0; i < count; ++i) {
                    const Vec& x = ds.inputs[i];
                    ref_masks[si][i] = compute_pathway(net, x, predict(net, x),
                                                       "neuronintgrad", sparsities[si],
                                                       ps_steps, common.seed);
                }
            }
            parallel_for(rows.size(), common.jobs, [&](size_t r) {
                Row& row = rows[r];
                size_t si = 0;
                while (sparsities[si] != row.sparsity) ++si;
                for (size_t i = 0; i < count; ++i) {
                    const Vec& x = ds.inputs[i];
                    int cls = predict(net, x);
                    PathwayMask mask = compute_pathway(net, x, cls, row.method,
                                                       row.sparsity, ps_steps, common.seed);
                    ActivationRecord original = forward_record(net, x, cls);
                    ActivationRecord current = masked_record(net, x, mask, cls);
                    DeadFractions df = dead_fraction(net, mask, original, &current);
                    row.dead += df.originally_dead;
                    row.dead_active += df.originally_dead_now_active;
                    row.jaccard_ref += jaccard_global(mask, ref_masks[si][i]);
                }
                row.dead /= count;
                row.dead_active /= count;
                row.jaccard_ref /= count;
            });
            CsvWriter csv((out / "pathway-stats.csv").string());
            csv.row({"method", "sparsity", "frac_originally_dead",
                     "frac_originally_dead_now_active", "jaccard_vs_neuronintgrad"});
            for (const auto& row : rows)
                csv.row({row.method, format_double(row.sparsity), format_double(row.dead),
                         format_double(row.dead_active), format_double(row.jaccard_ref)});
        } else if (*cmd_lin) {
            Network net = load_manifest_file(li_model);
            Dataset ds = parse_dataset(li_dataset, common.seed);
            size_t count = std::min<size_t>(li_count, ds.size());
            write_config(out, {{"command", "linearity"},
                               {"model", li_model},
                               {"dataset", li_dataset},
                               {"method", li_method},
                               {"count", count},
                               {"sparsity", li_sparsity},
                               {"steps", li_steps},
                               {"samples", li_samples},
                               {"delta", li_delta},
                               {"seed", common.seed}});
            CsvWriter csv((out / "linearity.csv").string());
            csv.row({"index", "radius", "argmin_layer", "argmin_unit",
                     "excluded_zero_grad", "pass", "max_deviation"});
            ContributionMethod cm = li_method == "neuronmct"
                                        ? ContributionMethod::NeuronMCT
                                        : ContributionMethod::NeuronIntGrad;
            for (size_t i = 0; i < count; ++i) {
                const Vec& x = ds.inputs[i];
                int cls = predict(net, x);
                ContributionMap c = cm == ContributionMethod::NeuronMCT
                                        ? neuron_mct(net, x, cls)
                                        : neuron_intgrad(net, x, cls, li_steps);
                PathwayMask mask = select_pathway(net, c, li_sparsity);
                ActivationRecord rec = forward_record(net, x, cls);
                FrozenNetwork frozen = build_frozen(net, rec, mask);
                LinearRegionReport report = linear_region_radius(frozen, x);
                LinearRegionVerification v = verify_linear_region(
                    frozen, x, report, li_samples, li_delta, common.seed + i);
                csv.row({std::to_string(i), format_double(report.radius),
                         report.argmin ? std::to_string(report.argmin->layer) : "-",
                         report.argmin ? std::to_string(report.argmin->unit) : "-",
                         std::to_string(report.excluded_zero_grad),
                         v.pass ? "pass" : "fail", format_double(v.max_deviation)});
            }
        } else if (*cmd_attr) {
            Network net = load_manifest_file(at_model);
            Dataset ds = parse_dataset(at_dataset, common.seed);
            const Vec& x = ds.inputs.at(at_index);
            int cls = predict(net, x);
            AttributionMap map = make_attributor(at_spec)(net, x, cls);
            write_config(out, {{"command", "attribute"},
                               {"model", at_model},
                               {"dataset", at_dataset},
                               {"index", at_index},
                               {"method", at_spec.method},
                               {"sparsity", at_spec.sparsity},
                               {"steps", at_spec.steps},
                               {"smooth", at_spec.smooth},
                               {"seed", common.seed}});
            write_pgm(map, (out / "attribution.pgm").string());
            CsvWriter csv((out / "attribution.csv").string());
            csv.row({"pixel", "reduced", "raw_c0"});
            for (size_t p = 0; p < map.reduced.size(); ++p)
                csv.row({std::to_string(p), format_double(map.reduced[p]),
                         format_double(map.raw[p])});
            if (map.threshold_zero)
                std::fprintf(stderr, "warning: realized threshold is 0\n");
        } else if (*cmd_lerf) {
            Network net = load_manifest_file(lf_model);
            Dataset ds = parse_dataset(lf_dataset, common.seed);
            auto methods = split_list(lf_methods);
            Vec fill = ds.channel_means;
            if (lf_fill == "zero") fill.assign(ds.shape.c, 0.0);
            else if (lf_fill != "mean") throw std::invalid_argument("fill must be mean|zero");
            write_config(out, {{"command", "eval-lerf"},
                               {"model", lf_model},
                               {"dataset", lf_dataset},
                               {"methods", lf_methods},
                               {"sparsity", lf_sparsity},
                               {"steps", lf_steps},
                               {"fill", lf_fill},
                               {"seed", common.seed}});
            CsvWriter csv((out / "lerf.csv").string());
            csv.row({"method", "fraction", "mean_abs_fractional_change"});
            nlohmann::ordered_json summary;
            summary["model"] = manifest_hash(net);
            std::vector<DegradationCurve> curves(methods.size());
            parallel_for(methods.size(), common.jobs, [&](size_t m) {
                AttributorSpec spec;
                spec.method = methods[m];
                spec.sparsity = lf_sparsity;
                spec.steps = lf_steps;
                curves[m] = lerf_curve(net, ds, make_attributor(spec), &fill);
            });
            for (size_t m = 0; m < methods.size(); ++m) {
                for (size_t k = 0; k < curves[m].fractions.size(); ++k)
                    csv.row({methods[m], format_double(curves[m].fractions[k]),
                             format_double(curves[m].values[k])});
                summary["auc"][methods[m]] = curves[m].area;
            }
            std::ofstream jf(out / "lerf-summary.json", std::ios::binary);
            jf << summary.dump(2) << "\n";
        } else if (*cmd_roar) {
            Network reference = load_manifest_file(ro_model);
            Dataset train_ds = parse_dataset(ro_dataset, common.seed);
            Dataset test_ds = ro_test_dataset.empty()
                                  ? parse_dataset(ro_dataset, common.seed + 1)
                                  : parse_dataset(ro_test_dataset, common.seed + 1);
            test_ds.split = "test";
            Network spec = parse_arch(ro_arch, train_ds.shape, train_ds.class_count);
            RoarConfig cfg;
            cfg.seeds = ro_seeds;
            cfg.train.epochs = ro_epochs;
            cfg.train.learning_rate = ro_lr;
            cfg.train.seed = common.seed;
            cfg.percentiles.clear();
            for (double p : split_doubles(ro_percentiles))
                cfg.percentiles.push_back(static_cast<int>(p));
            AttributorSpec aspec;
            aspec.method = ro_method;
            aspec.sparsity = ro_sparsity;
            aspec.steps = ro_steps;
            write_config(out, {{"command", "eval-roar"},
                               {"model", ro_model},
                               {"dataset", ro_dataset},
                               {"test_dataset", ro_test_dataset},
                               {"arch", ro_arch},
                               {"method", ro_method},
                               {"sparsity", ro_sparsity},
                               {"steps", ro_steps},
                               {"percentiles", ro_percentiles},
                               {"retrain_seeds", ro_seeds},
                               {"epochs", ro_epochs},
                               {"lr", ro_lr},
                               {"seed", common.seed}});
            RoarResult result =
                roar_run(reference, spec, train_ds, test_ds, make_attributor(aspec), cfg);
            CsvWriter csv((out / "roar.csv").string());
            csv.row({"percentile", "mean_accuracy", "std_accuracy", "diverged"});
            for (size_t i = 0; i < result.percentiles.size(); ++i)
                csv.row({std::to_string(result.percentiles[i]),
                         format_double(result.cells[i].mean_accuracy),
                         format_double(result.cells[i].std_accuracy),
                         result.cells[i].diverged ? "1" : "0"});
            nlohmann::ordered_json summary;
            summary["model"] = manifest_hash(reference);
            summary["method"] = ro_method;
            summary["auc"] = result.area;
            std::ofstream jf(out / "roar-summary.json", std::ios::binary);
            jf << summary.dump(2) << "\n";
        } else if (*cmd_sanity) {
            Network net = load_manifest_file(sa_model);
            Dataset ds = parse_dataset(sa_dataset, common.seed);
            ds.inputs.resize(std::min<size_t>(sa_count, ds.size()));
            ds.labels.resize(ds.inputs.size());
            AttributorSpec aspec;
            aspec.method = sa_method;
            aspec.sparsity = sa_sparsity;
            aspec.steps = sa_steps;
            write_config(out, {{"command", "sanity-check"},
                               {"model", sa_model},
                               {"dataset", sa_dataset},
                               {"method", sa_method},
                               {"count", ds.inputs.size()},
                               {"sparsity", sa_sparsity},
                               {"steps", sa_steps},
                               {"seed", common.seed}});
            SanityTrace trace =
                randomization_sanity(net, ds, make_attributor(aspec), common.seed);
            CsvWriter csv((out / "sanity.csv").string());
            csv.row({"checkpoint", "ssim", "spearman"});
            for (size_t i = 0; i < trace.ssim_trace.size(); ++i)
                csv.row({std::to_string(i), format_double(trace.ssim_trace[i]),
                         format_double(trace.spearman_trace[i])});
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace pathgrad::cli
