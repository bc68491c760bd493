#include "enko/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "enko/csv.hpp"
#include "enko/experiments.hpp"
#include "enko/generators.hpp"

namespace enko {

namespace {

namespace fs = std::filesystem;

struct KeySpec {
    const char* key;
    const char* def;  // nullptr = required
};

Config resolve(const Config& in, const std::vector<KeySpec>& spec) {
    std::vector<std::string> allowed;
    allowed.reserve(spec.size());
    for (const auto& s : spec) allowed.push_back(s.key);
    in.require_known(allowed);
    Config out;
    for (const auto& s : spec) {
        if (in.has(s.key))
            out.set(s.key, in.str(s.key));
        else if (s.def != nullptr)
            out.set(s.key, s.def);
        else
            throw ConfigError("missing required config key: " + std::string(s.key));
    }
    return out;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write file: " + path);
    os << content;
}

// echo embedded inside data/checkpoint artifacts; omits the output location
// so the same seed yields byte-identical files anywhere
std::string artifact_echo(const Config& cfg) {
    Config c = cfg;
    Config stripped;
    for (const auto& [k, v] : c.entries())
        if (k != "output.dir") stripped.set(k, v);
    return stripped.echo();
}

std::string out_dir(const Config& cfg) {
    std::string dir = cfg.str("output.dir");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " +
                                     ec.message());
    return dir;
}

int default_threads(const Config& cfg) {
    int t = cfg.int_or("train.threads", 0);
    if (t > 0) return t;
    if (const char* env = std::getenv("ENKO_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

const std::vector<KeySpec> kObjectiveKeys = {
    {"objective.kind", "enko"},
    {"objective.n_particles", "16"},
    {"inflation.method", "none"},
    {"inflation.alpha", "0.1"},
    {"inflation.rtps_anomaly", "false"},
    {"filter.resampling", "multinomial"},
    {"filter.trigger", "every_step"},
    {"filter.jitter", "1e-6"},
    {"enko.transition_on_proposed", "false"},
};

ObjectiveConfig parse_objective(const Config& cfg) {
    ObjectiveConfig oc;
    oc.kind = objective_from_string(cfg.str_or("objective.kind", "enko"));
    oc.n_particles = cfg.int_or("objective.n_particles", 16);
    if (oc.n_particles < 2) throw ConfigError("objective.n_particles must be >= 2");

    std::string infl = cfg.str_or("inflation.method", "none");
    if (infl == "none")
        oc.inflation.method = InflationConfig::Method::none;
    else if (infl == "rtpp")
        oc.inflation.method = InflationConfig::Method::rtpp;
    else if (infl == "rtps")
        oc.inflation.method = InflationConfig::Method::rtps;
    else
        throw ConfigError("inflation.method must be none|rtpp|rtps, got " + infl);
    oc.inflation.alpha = cfg.double_or("inflation.alpha", 0.1);
    if (oc.inflation.alpha < 0.0 || oc.inflation.alpha > 1.0)
        throw ConfigError("inflation.alpha must be in [0,1]");
    oc.inflation.rtps_anomaly = cfg.bool_or("inflation.rtps_anomaly", false);

    std::string rs = cfg.str_or("filter.resampling", "multinomial");
    if (rs == "multinomial")
        oc.filter.resampling = FilterConfig::Resampling::multinomial;
    else if (rs == "systematic")
        oc.filter.resampling = FilterConfig::Resampling::systematic;
    else
        throw ConfigError("filter.resampling must be multinomial|systematic, got " + rs);

    std::string tr = cfg.str_or("filter.trigger", "every_step");
    if (tr == "every_step")
        oc.filter.trigger = FilterConfig::Trigger::every_step;
    else if (tr == "ess_below_half")
        oc.filter.trigger = FilterConfig::Trigger::ess_below_half;
    else
        throw ConfigError("filter.trigger must be every_step|ess_below_half, got " + tr);

    oc.filter.jitter = cfg.double_or("filter.jitter", 1e-6);
    if (oc.filter.jitter <= 0.0) throw ConfigError("filter.jitter must be positive");
    oc.transition_on_proposed = cfg.bool_or("enko.transition_on_proposed", false);
    return oc;
}

std::unique_ptr<SsmModel> build_model(const std::string& kind, int dz, int dx, int hidden,
                                      std::uint64_t seed) {
    std::unique_ptr<SsmModel> model = make_model(kind, dz, dx, hidden);
    Rng init = Rng(seed).split(7);
    if (auto* lg = dynamic_cast<LinearGaussianSsm*>(model.get())) lg->init_benchmark(init);
    if (auto* nl = dynamic_cast<NonlinearStudentSsm*>(model.get())) nl->init_benchmark(init);
    if (auto* nn = dynamic_cast<NeuralSsm*>(model.get())) nn->init_weights(init);
    return model;
}

void append(std::vector<KeySpec>& dst, const std::vector<KeySpec>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

void cmd_generate(const Config& in) {
    std::vector<KeySpec> spec = {
        {"generator", nullptr},  {"seed", "0"},      {"output.dir", nullptr},
        {"n_samples", "-1"},     {"n_train", "-1"},  {"n_valid", "-1"},
        {"seq_len", "-1"},       {"dt", "-1"},       {"obs_std", "-1"},
        {"scaling", "default"},  {"model.dz", "2"},  {"model.dx", "2"},
    };
    Config cfg = resolve(in, spec);
    const std::string gen = cfg.str("generator");
    const std::uint64_t seed = cfg.u64_or("seed", 0);
    const std::string dir = out_dir(cfg);

    Dataset ds;
    if (gen == "fhn") {
        FhnConfig fc;
        if (cfg.int_or("n_samples", -1) > 0) fc.n_samples = cfg.int_or("n_samples", -1);
        if (cfg.int_or("n_train", -1) > 0) fc.n_train = cfg.int_or("n_train", -1);
        if (cfg.int_or("n_valid", -1) > 0) fc.n_valid = cfg.int_or("n_valid", -1);
        if (cfg.int_or("seq_len", -1) > 0) fc.t_len = cfg.int_or("seq_len", -1);
        if (cfg.double_or("dt", -1) > 0) fc.dt = cfg.double_or("dt", -1);
        if (cfg.double_or("obs_std", -1) > 0) fc.obs_std = cfg.double_or("obs_std", -1);
        fc.abs_div_scaling = cfg.str_or("scaling", "default") != "none";
        if (fc.n_train + fc.n_valid > fc.n_samples)
            throw ConfigError("generate: splits exceed n_samples");
        ds = fhn_generate(fc, Rng(seed));
        cfg.set("n_samples", std::to_string(fc.n_samples));
        cfg.set("n_train", std::to_string(fc.n_train));
        cfg.set("n_valid", std::to_string(fc.n_valid));
        cfg.set("seq_len", std::to_string(fc.t_len));
        cfg.set("dt", csv::fmt(fc.dt));
        cfg.set("obs_std", csv::fmt(fc.obs_std));
        cfg.set("scaling", fc.abs_div_scaling ? "abs_div" : "none");
    } else if (gen == "lorenz") {
        LorenzConfig lc;
        if (cfg.int_or("n_samples", -1) > 0) lc.n_samples = cfg.int_or("n_samples", -1);
        if (cfg.int_or("n_train", -1) > 0) lc.n_train = cfg.int_or("n_train", -1);
        if (cfg.int_or("n_valid", -1) > 0) lc.n_valid = cfg.int_or("n_valid", -1);
        if (cfg.int_or("seq_len", -1) > 0) lc.t_len = cfg.int_or("seq_len", -1);
        if (cfg.double_or("dt", -1) > 0) lc.dt = cfg.double_or("dt", -1);
        if (cfg.double_or("obs_std", -1) > 0) lc.obs_std = cfg.double_or("obs_std", -1);
        lc.abs_div_scaling = cfg.str_or("scaling", "default") != "none";
        if (lc.n_train + lc.n_valid > lc.n_samples)
            throw ConfigError("generate: splits exceed n_samples");
        ds = lorenz_generate(lc, Rng(seed));
        cfg.set("n_samples", std::to_string(lc.n_samples));
        cfg.set("n_train", std::to_string(lc.n_train));
        cfg.set("n_valid", std::to_string(lc.n_valid));
        cfg.set("seq_len", std::to_string(lc.t_len));
        cfg.set("dt", csv::fmt(lc.dt));
        cfg.set("obs_std", csv::fmt(lc.obs_std));
        cfg.set("scaling", lc.abs_div_scaling ? "abs_div" : "none");
    } else if (gen == "lgssm" || gen == "nonlinear_student") {
        int dz = cfg.int_or("model.dz", 2);
        int dx = cfg.int_or("model.dx", 2);
        int n = cfg.int_or("n_samples", -1) > 0 ? cfg.int_or("n_samples", -1) : 100;
        int t_len = cfg.int_or("seq_len", -1) > 0 ? cfg.int_or("seq_len", -1) : 40;
        int n_train = cfg.int_or("n_train", -1) > 0 ? cfg.int_or("n_train", -1) : (8 * n) / 10;
        int n_valid =
            cfg.int_or("n_valid", -1) > 0 ? cfg.int_or("n_valid", -1) : (n - n_train) / 2;
        if (n_train + n_valid > n) throw ConfigError("generate: splits exceed n_samples");
        std::unique_ptr<SsmModel> model = build_model(gen, dz, dx, 32, seed);
        ds = simulate(*model, t_len, n, Rng(seed).split(9), n_train, n_valid);
        cfg.set("n_samples", std::to_string(n));
        cfg.set("n_train", std::to_string(n_train));
        cfg.set("n_valid", std::to_string(n_valid));
        cfg.set("seq_len", std::to_string(t_len));
        cfg.set("scaling", "none");
    } else {
        throw ConfigError("generator must be fhn|lorenz|lgssm|nonlinear_student, got " + gen);
    }

    ds.seed = seed;
    ds.config_echo = artifact_echo(cfg);
    save_dataset(ds, dir + "/dataset.bin");
    write_text(dir + "/summary.txt", dataset_summary(ds));
    export_sequences_csv(ds, dir + "/sequences.csv");
    write_text(dir + "/config.resolved", cfg.echo());
    std::cout << "wrote " << dir << "/dataset.bin (" << ds.b() << " sequences)\n";
}

void cmd_train(const Config& in) {
    std::vector<KeySpec> spec = {
        {"data.path", nullptr},     {"output.dir", nullptr},
        {"model.kind", "neural"},   {"model.dz", "2"},
        {"model.hidden", "32"},     {"train.lr", "0.001"},
        {"train.epochs", "500"},    {"train.batch_size", "16"},
        {"train.grad_clip_norm", "0"}, {"train.seeds", "0"},
        {"train.threads", "0"},
    };
    append(spec, kObjectiveKeys);
    Config cfg = resolve(in, spec);

    ObjectiveConfig oc = parse_objective(cfg);
    if (oc.kind == ObjectiveName::fivor)
        throw ConfigError("train: objective.kind must be enko|fivo|iwae");

    Dataset data = load_dataset(cfg.str("data.path"));
    const std::string kind = cfg.str_or("model.kind", "neural");
    const int dz = cfg.int_or("model.dz", 2);
    const int hidden = cfg.int_or("model.hidden", 32);
    if (dz < 1) throw ConfigError("model.dz must be >= 1");

    TrainConfig tc;
    tc.learning_rate = cfg.double_or("train.lr", 1e-3);
    tc.epochs = cfg.int_or("train.epochs", 500);
    tc.batch_size = cfg.int_or("train.batch_size", 16);
    tc.grad_clip_norm = cfg.double_or("train.grad_clip_norm", 0.0);
    tc.objective = oc;
    tc.threads = default_threads(cfg);
    if (tc.learning_rate <= 0.0) throw ConfigError("train.lr must be positive");
    if (tc.epochs < 0) throw ConfigError("train.epochs must be >= 0");

    std::vector<int> seeds = cfg.int_list_or("train.seeds", {0});
    if (seeds.empty()) throw ConfigError("train.seeds must be nonempty");

    const std::string dir = out_dir(cfg);
    const std::string echo = artifact_echo(cfg);

    double best_overall = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::string>> summary;
    for (int seed : seeds) {
        std::unique_ptr<SsmModel> model =
            build_model(kind, dz, data.dx(), hidden, static_cast<std::uint64_t>(seed));
        tc.seed = static_cast<std::uint64_t>(seed);
        TrainResult res = train(*model, data, tc);

        std::vector<std::vector<std::string>> rows;
        for (const auto& r : res.history)
            rows.push_back({std::to_string(r.epoch), csv::fmt(r.train_objective),
                            csv::fmt(r.valid_objective), std::to_string(r.skipped_batches)});
        csv::write(dir + "/history_seed" + std::to_string(seed) + ".csv",
                   {"epoch", "train_objective", "valid_objective", "skipped_batches"}, rows);
        save_checkpoint(dir + "/checkpoint_seed" + std::to_string(seed) + ".bin", *model, echo);

        double final_train =
            res.history.empty() ? 0.0 : res.history.back().train_objective;
        summary.push_back({std::to_string(seed), std::to_string(res.best_epoch),
                           csv::fmt(res.best_valid), csv::fmt(final_train)});
        if (res.best_valid > best_overall) {
            best_overall = res.best_valid;
            save_checkpoint(dir + "/checkpoint_best.bin", *model, echo);
        }
        for (const auto& d : res.diagnostics) std::cerr << "[train seed " << seed << "] " << d
                                                        << "\n";
    }
    // averaged summary row over seeds
    double mean_best = 0.0, mean_final = 0.0;
    for (const auto& row : summary) {
        mean_best += std::stod(row[2]);
        mean_final += std::stod(row[3]);
    }
    mean_best /= static_cast<double>(summary.size());
    mean_final /= static_cast<double>(summary.size());
    summary.push_back({"mean", "", csv::fmt(mean_best), csv::fmt(mean_final)});
    csv::write(dir + "/summary.csv", {"seed", "best_epoch", "best_valid", "final_train"},
               summary);
    write_text(dir + "/config.resolved", cfg.echo());
    std::cout << "trained " << seeds.size() << " seed(s); mean best valid objective "
              << mean_best << "\n";
}

void cmd_evaluate(const Config& in) {
    std::vector<KeySpec> spec = {
        {"checkpoint", nullptr},   {"data.path", nullptr}, {"output.dir", nullptr},
        {"eval.split", "test"},    {"eval.context_len", "10"},
        {"eval.horizons", "1-20"}, {"seed", "0"},
    };
    append(spec, kObjectiveKeys);
    Config cfg = resolve(in, spec);

    ObjectiveConfig oc = parse_objective(cfg);
    Dataset data = load_dataset(cfg.str("data.path"));
    Checkpoint cp = load_checkpoint(cfg.str("checkpoint"));
    if (cp.model->dx() != data.dx())
        throw ConfigError("evaluate: checkpoint dx " + std::to_string(cp.model->dx()) +
                          " does not match dataset dx " + std::to_string(data.dx()));

    Split split;
    const std::string sp = cfg.str_or("eval.split", "test");
    if (sp == "train")
        split = Split::train;
    else if (sp == "valid")
        split = Split::valid;
    else if (sp == "test")
        split = Split::test;
    else
        throw ConfigError("eval.split must be train|valid|test, got " + sp);

    const int context = cfg.int_or("eval.context_len", 10);
    std::vector<int> horizons = cfg.int_list_or("eval.horizons", parse_int_list("1-20"));
    if (horizons.empty()) throw ConfigError("eval.horizons must be nonempty");
    int max_h = 0;
    for (int h : horizons) max_h = std::max(max_h, h);
    if (context < 1 || context + max_h > data.t())
        throw ConfigError("evaluate: context_len + max horizon exceeds sequence length");

    MseReport rep = predict_mse(*cp.model, data, split, oc, context, horizons,
                                Rng(cfg.u64_or("seed", 0)));

    const std::string dir = out_dir(cfg);
    std::vector<std::vector<std::string>> rows;
    for (size_t k = 0; k < rep.horizons.size(); ++k)
        rows.push_back({std::to_string(rep.horizons[k]), csv::fmt(rep.mse[k]),
                        csv::fmt(rep.stderr_[k])});
    csv::write(dir + "/mse.csv", {"horizon", "mse", "stderr"}, rows);
    write_text(dir + "/config.resolved", cfg.echo());
    std::cout << "wrote " << dir << "/mse.csv (" << rows.size() << " horizons)\n";
}

void cmd_gradvar(const Config& in) {
    std::vector<KeySpec> spec = {
        {"output.dir", nullptr},
        {"seed", "0"},
        {"gradvar.model_kind", "lgssm"},
        {"gradvar.dims", "2:2"},
        {"gradvar.t_len", "100"},
        {"gradvar.n_particles", "16"},
        {"gradvar.batch", "10"},
        {"gradvar.n_simulations", "100"},
        {"gradvar.estimators", "enko,fivo,fivor,iwae"},
    };
    append(spec, kObjectiveKeys);
    Config cfg = resolve(in, spec);

    ObjectiveConfig oc = parse_objective(cfg);
    GradVarSpec gv;
    gv.model_kind = cfg.str_or("gradvar.model_kind", "lgssm");
    if (gv.model_kind != "lgssm" && gv.model_kind != "nonlinear_student")
        throw ConfigError("gradvar.model_kind must be lgssm|nonlinear_student");
    gv.t_len = cfg.int_or("gradvar.t_len", 100);
    gv.n_particles = cfg.int_or("gradvar.n_particles", 16);
    gv.batch = cfg.int_or("gradvar.batch", 10);
    gv.n_simulations = cfg.int_or("gradvar.n_simulations", 100);
    gv.seed = cfg.u64_or("seed", 0);
    gv.filter = oc.filter;
    gv.inflation = oc.inflation;
    gv.transition_on_proposed = oc.transition_on_proposed;

    std::vector<ObjectiveName> estimators;
    {
        std::stringstream ss(cfg.str_or("gradvar.estimators", "enko,fivo,fivor,iwae"));
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) estimators.push_back(objective_from_string(item));
    }
    if (estimators.empty()) throw ConfigError("gradvar.estimators must be nonempty");

    std::vector<std::pair<int, int>> dims;
    {
        std::stringstream ss(cfg.str_or("gradvar.dims", "2:2"));
        std::string item;
        while (std::getline(ss, item, ',')) {
            size_t colon = item.find(':');
            if (colon == std::string::npos)
                throw ConfigError("gradvar.dims entries must be dx:dz, got " + item);
            dims.emplace_back(std::stoi(item.substr(0, colon)),
                              std::stoi(item.substr(colon + 1)));
        }
    }
    if (dims.empty()) throw ConfigError("gradvar.dims must be nonempty");

    std::vector<std::vector<std::string>> rows;
    for (auto [dx, dz] : dims) {
        gv.dx = dx;
        gv.dz = dz;
        std::vector<VarianceReport> reports = grad_variance_experiment(gv, estimators);
        const VarianceReport* fivo_rep = nullptr;
        for (const auto& r : reports)
            if (r.estimator == "fivo") fivo_rep = &r;
        for (const auto& r : reports) {
            for (const auto& [group, var] : r.groups) {
                double log_rel = std::numeric_limits<double>::quiet_NaN();
                if (fivo_rep != nullptr) {
                    double denom = fivo_rep->group(group);
                    if (denom > 0.0 && var > 0.0) log_rel = std::log(var / denom);
                    if (&r == fivo_rep) log_rel = 0.0;
                }
                rows.push_back({r.estimator, std::to_string(dx), std::to_string(dz), group,
                                csv::fmt(var), csv::fmt(log_rel)});
            }
        }
    }

    const std::string dir = out_dir(cfg);
    csv::write(dir + "/gradvar.csv",
               {"estimator", "d_x", "d_z", "parameter_group", "variance",
                "log_rel_var_vs_fivo"},
               rows);
    write_text(dir + "/config.resolved", cfg.echo());
    std::cout << "wrote " << dir << "/gradvar.csv (" << rows.size() << " rows)\n";
}

void cmd_sweep(const Config& in) {
    std::vector<KeySpec> spec = {
        {"data.path", nullptr},     {"output.dir", nullptr},
        {"sweep.axis", nullptr},    {"sweep.values", nullptr},
        {"model.kind", "neural"},   {"model.dz", "2"},
        {"model.hidden", "32"},     {"train.lr", "0.001"},
        {"train.epochs", "500"},    {"train.batch_size", "16"},
        {"train.grad_clip_norm", "0"}, {"train.seeds", "0"},
        {"train.threads", "0"},     {"eval.context_len", "10"},
        {"eval.horizons", "1,5,10"},
    };
    append(spec, kObjectiveKeys);
    Config cfg = resolve(in, spec);

    const std::string axis_s = cfg.str("sweep.axis");
    SweepAxis axis;
    if (axis_s == "n_particles")
        axis = SweepAxis::n_particles;
    else if (axis_s == "inflation_factor")
        axis = SweepAxis::inflation_factor;
    else
        throw ConfigError("sweep.axis must be n_particles|inflation_factor, got " + axis_s);

    std::vector<double> values = cfg.list_or("sweep.values", {});
    if (values.empty()) throw ConfigError("sweep.values must be a nonempty list");

    ObjectiveConfig oc = parse_objective(cfg);
    if (oc.kind == ObjectiveName::fivor)
        throw ConfigError("sweep: objective.kind must be enko|fivo|iwae");
    Dataset data = load_dataset(cfg.str("data.path"));

    TrainConfig tc;
    tc.learning_rate = cfg.double_or("train.lr", 1e-3);
    tc.epochs = cfg.int_or("train.epochs", 500);
    tc.batch_size = cfg.int_or("train.batch_size", 16);
    tc.grad_clip_norm = cfg.double_or("train.grad_clip_norm", 0.0);
    tc.objective = oc;
    tc.threads = default_threads(cfg);
    std::vector<int> seeds = cfg.int_list_or("train.seeds", {0});
    tc.seed = seeds.empty() ? 0 : static_cast<std::uint64_t>(seeds[0]);

    SweepEvalConfig ec;
    ec.context_len = cfg.int_or("eval.context_len", 10);
    ec.horizons = cfg.int_list_or("eval.horizons", {1, 5, 10});

    std::unique_ptr<SsmModel> prototype =
        build_model(cfg.str_or("model.kind", "neural"), cfg.int_or("model.dz", 2), data.dx(),
                    cfg.int_or("model.hidden", 32), tc.seed);

    SweepResult res = sweep(axis, values, *prototype, data, tc, ec);

    const std::string dir = out_dir(cfg);
    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : res.cells) {
        if (cell.failed) {
            rows.push_back({csv::fmt(cell.value), "", "", "failed: " + cell.error});
            continue;
        }
        for (size_t k = 0; k < res.horizons.size(); ++k)
            rows.push_back({csv::fmt(cell.value), std::to_string(res.horizons[k]),
                            csv::fmt(cell.val_mse[k]), "ok"});
    }
    csv::write(dir + "/sweep.csv", {"value", "horizon", "val_mse", "status"}, rows);
    std::string sel = res.selected >= 0 ? csv::fmt(res.cells[res.selected].value) : "none";
    write_text(dir + "/selected.txt", sel + "\n");
    write_text(dir + "/config.resolved", cfg.echo());
    std::cout << "sweep selected " << axis_s << " = " << sel << "\n";
}

int run_cli(const std::vector<std::string>& args) {
    try {
        if (args.empty()) {
            std::cerr << "usage: enko <generate|train|evaluate|gradvar|sweep>"
                         " [--config file] [--key value ...]\n";
            return kExitConfig;
        }
        const std::string command = args[0];
        Config cfg;
        size_t i = 1;
        while (i < args.size()) {
            const std::string& a = args[i];
            if (a == "--config") {
                if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
                Config file_cfg = Config::from_file(args[i + 1]);
                // file entries first; command-line overrides win
                for (const auto& [k, v] : file_cfg.entries())
                    if (!cfg.has(k)) cfg.set(k, v);
                i += 2;
            } else if (a.rfind("--", 0) == 0 && a.size() > 2) {
                if (i + 1 >= args.size()) throw ConfigError("flag " + a + " needs a value");
                cfg.set(a.substr(2), args[i + 1]);
                i += 2;
            } else {
                throw ConfigError("unexpected argument: " + a);
            }
        }
        if (command == "generate")
            cmd_generate(cfg);
        else if (command == "train")
            cmd_train(cfg);
        else if (command == "evaluate")
            cmd_evaluate(cfg);
        else if (command == "gradvar")
            cmd_gradvar(cfg);
        else if (command == "sweep")
            cmd_sweep(cfg);
        else
            throw ConfigError("unknown command: " + command);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace enko
