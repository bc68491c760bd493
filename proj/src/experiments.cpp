#include "enko/experiments.hpp"

#include <cmath>

#include "enko/generators.hpp"

namespace enko {

double VarianceReport::group(const std::string& name) const {
    for (const auto& [n, v] : groups)
        if (n == name) return v;
    throw std::invalid_argument("no variance group named " + name);
}

std::vector<std::pair<std::string, double>> aggregate_variances(const ParamLayout& layout,
                                                                const Tensor& per_element) {
    check(per_element.size() == layout.total(), "aggregate_variances: size mismatch");
    std::vector<std::pair<std::string, double>> out;
    for (const ParamEntry& e : layout.entries()) {
        const bool square = e.shape.size() == 2 && e.shape[0] == e.shape[1] && e.shape[0] > 1;
        if (square) {
            const int d = e.shape[0];
            double diag = 0.0, off = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double v = per_element.at(e.offset + static_cast<long>(i) * d + j);
                    (i == j ? diag : off) += v;
                }
            out.emplace_back(e.name + ".diag", diag / d);
            out.emplace_back(e.name + ".offdiag", off / (static_cast<double>(d) * (d - 1)));
        } else {
            double s = 0.0;
            for (long i = 0; i < e.count(); ++i) s += per_element.at(e.offset + i);
            out.emplace_back(e.name, s / static_cast<double>(e.count()));
        }
    }
    return out;
}

std::vector<VarianceReport> grad_variance_experiment(
    const GradVarSpec& spec, const std::vector<ObjectiveName>& estimators) {
    check(spec.n_simulations >= 2, "grad_variance: need at least 2 simulations");
    Rng root(spec.seed);

    std::unique_ptr<SsmModel> model;
    if (spec.model_kind == "lgssm") {
        auto m = std::make_unique<LinearGaussianSsm>(spec.dz, spec.dx);
        Rng init = root.split(1);
        m->init_benchmark(init);
        model = std::move(m);
    } else if (spec.model_kind == "nonlinear_student") {
        auto m = std::make_unique<NonlinearStudentSsm>(spec.dz, spec.dx);
        Rng init = root.split(1);
        m->init_benchmark(init);
        model = std::move(m);
    } else {
        throw std::invalid_argument("grad_variance: unknown model kind " + spec.model_kind);
    }

    // one dataset, fixed across estimators and simulations
    Dataset data = simulate(*model, spec.t_len, spec.batch, root.split(2), spec.batch, 0);
    std::vector<int> all_idx = data.train_indices();

    // sigma values for converting log-sigma gradients to sigma gradients
    Tensor sigma_scale = Tensor::full({model->layout().total()}, 1.0);
    for (const ParamEntry& e : model->layout().entries()) {
        if (!e.log_scale) continue;
        for (long i = 0; i < e.count(); ++i)
            sigma_scale.at(e.offset + i) = std::exp(model->params().at(e.offset + i));
    }

    std::vector<VarianceReport> reports;
    for (ObjectiveName est : estimators) {
        ObjectiveConfig cfg;
        cfg.kind = est;
        cfg.n_particles = spec.n_particles;
        cfg.filter = spec.filter;
        cfg.inflation = spec.inflation;
        cfg.transition_on_proposed = spec.transition_on_proposed;

        const long p = model->layout().total();
        Tensor mean = Tensor::zeros({static_cast<int>(p)});
        Tensor m2 = Tensor::zeros({static_cast<int>(p)});
        const std::uint64_t est_tag = 10 + static_cast<std::uint64_t>(est);
        for (int sim = 0; sim < spec.n_simulations; ++sim) {
            BatchEval ev = batch_objective(*model, data, all_idx, cfg,
                                           root.split(est_tag, static_cast<std::uint64_t>(sim)),
                                           true, 1);
            // gradient w.r.t. sigma = gradient w.r.t. log sigma / sigma
            Tensor grad = ev.grad;
            for (long i = 0; i < p; ++i) grad.at(i) /= sigma_scale.at(i);
            // Welford accumulation
            for (long i = 0; i < p; ++i) {
                const double delta = grad.at(i) - mean.at(i);
                mean.at(i) += delta / (sim + 1);
                m2.at(i) += delta * (grad.at(i) - mean.at(i));
            }
        }
        Tensor var = m2;
        for (long i = 0; i < p; ++i) var.at(i) /= (spec.n_simulations - 1);

        VarianceReport rep;
        rep.estimator = to_string(est);
        rep.groups = aggregate_variances(model->layout(), var);
        reports.push_back(std::move(rep));
    }
    return reports;
}

SweepResult sweep(SweepAxis axis, const std::vector<double>& values,
                  const SsmModel& prototype, const Dataset& data, const TrainConfig& base,
                  const SweepEvalConfig& eval_cfg) {
    check(!values.empty(), "sweep: empty value list");
    SweepResult out;
    out.axis = axis;
    out.horizons = eval_cfg.horizons;

    for (double v : values) {
        SweepCell cell;
        cell.value = v;
        try {
            TrainConfig cfg = base;
            if (axis == SweepAxis::n_particles) {
                cfg.objective.n_particles = static_cast<int>(v);
                check(cfg.objective.n_particles >= 2, "sweep: n_particles must be >= 2");
            } else {
                check(v >= 0.0 && v <= 1.0, "sweep: inflation factor must be in [0,1]");
                cfg.objective.inflation.alpha = v;
                if (cfg.objective.inflation.method == InflationConfig::Method::none)
                    cfg.objective.inflation.method = InflationConfig::Method::rtps;
            }
            std::unique_ptr<SsmModel> model = prototype.clone();
            train(*model, data, cfg);
            MseReport rep = predict_mse(*model, data, Split::valid, cfg.objective,
                                        eval_cfg.context_len, eval_cfg.horizons,
                                        Rng(base.seed).split(31337));
            cell.val_mse = rep.mse;
            for (double m : rep.mse) cell.mean_mse += m;
            cell.mean_mse /= static_cast<double>(rep.mse.size());
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
        out.cells.push_back(std::move(cell));
    }

    for (size_t i = 0; i < out.cells.size(); ++i) {
        if (out.cells[i].failed) continue;
        if (out.selected < 0 || out.cells[i].mean_mse < out.cells[out.selected].mean_mse)
            out.selected = static_cast<int>(i);
    }
    return out;
}

}  // namespace enko
