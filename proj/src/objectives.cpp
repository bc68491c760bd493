#include "enko/objectives.hpp"

#include <cmath>
#include <thread>

namespace enko {

namespace {

// rng stream tags per role; keeps noise aligned across estimators
constexpr std::uint64_t kProposalStream = 1;
constexpr std::uint64_t kFilterStream = 2;
constexpr std::uint64_t kResampleStream = 3;

Tensor row_of(const Tensor& x, int s) {
    Tensor v = Tensor::zeros({x.cols()});
    for (int j = 0; j < x.cols(); ++j) v(j) = x(s, j);
    return v;
}

}  // namespace

std::string to_string(ObjectiveName k) {
    switch (k) {
        case ObjectiveName::enko: return "enko";
        case ObjectiveName::fivo: return "fivo";
        case ObjectiveName::fivor: return "fivor";
        case ObjectiveName::iwae: return "iwae";
    }
    return "?";
}

ObjectiveName objective_from_string(const std::string& s) {
    if (s == "enko") return ObjectiveName::enko;
    if (s == "fivo") return ObjectiveName::fivo;
    if (s == "fivor") return ObjectiveName::fivor;
    if (s == "iwae") return ObjectiveName::iwae;
    throw std::invalid_argument("unknown objective: " + s);
}

ad::Node step_log_weights(const Dist& transition, const Dist& emission, const Dist& proposal,
                          const ad::Node& z, const Tensor& x_t) {
    ad::Tape& tape = *z.tape;
    const int n = z.rows();
    Tensor xrep = Tensor::zeros({n, x_t.dim(0)});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < x_t.dim(0); ++j) xrep(i, j) = x_t(j);
    ad::Node x_obs = tape.constant(std::move(xrep));
    return ad::sub(ad::add(logpdf(emission, x_obs), logpdf(transition, z)),
                   logpdf(proposal, z));
}

namespace {

struct FivorEvent {
    ad::Node log_prob;  // log P(ancestor draw | weights)
    int term_index;     // objective terms recorded up to and including the event
};

ObjectiveResult run_objective(const SsmModel& model, const Tensor& x,
                              const ObjectiveConfig& cfg, ad::Tape& tape,
                              const ad::Node& params, Rng& rng) {
    const ObjectiveName kind = cfg.kind;
    const int n = cfg.n_particles;
    const int t_len = x.rows();
    check(t_len >= 1, "objective: empty sequence");
    check(n >= (kind == ObjectiveName::iwae ? 1 : 2), "objective: too few particles");
    check(x.cols() == model.dx(), "objective: observation dim mismatch");
    if (kind == ObjectiveName::fivor)
        check(cfg.filter.resampling == FilterConfig::Resampling::multinomial,
              "fivor requires multinomial resampling");

    auto bound = model.bind(tape, params);
    ObjectiveResult res;
    res.per_step_ess = Tensor::zeros({t_len});
    res.diversity = Tensor::zeros({t_len});

    const double log_n = std::log(static_cast<double>(n));
    const bool filtered = kind == ObjectiveName::enko;
    const bool smc = kind == ObjectiveName::fivo || kind == ObjectiveName::fivor;

    Dist q0 = bound->proposal_initial(x, n);
    Rng rp0 = rng.split(kProposalStream, 0);
    ad::Node z = rsample(q0, rp0);
    Dist g = bound->emission_dist(z);
    ad::Node lw = step_log_weights(bound->initial_dist(n), g, q0, z, row_of(x, 0));

    ad::Node cum = lw;  // enko/iwae: since t=1; fivo: since last resample
    std::vector<ad::Node> terms;
    std::vector<FivorEvent> events;
    int steps_since_resample = 1;

    for (int s = 0; s < t_len; ++s) {
        res.per_step_ess(s) = ess(cum.value());
        ad::Node carried = z;

        if (filtered) {
            Rng rf = rng.split(kFilterStream, s);
            EnsembleState st{z, cum, z};
            st = enkf_update(st, row_of(x, s), g, cfg.filter, cfg.inflation, rf);
            carried = st.particles;
        } else if (smc) {
            const bool fire = cfg.filter.trigger == FilterConfig::Trigger::every_step ||
                              res.per_step_ess(s) < 0.5 * n;
            if (fire) {
                ad::Node lse = ad::logsumexp(cum);
                terms.push_back(ad::add_const(lse, -log_n));
                std::vector<std::int32_t> anc;
                if (cfg.forced_ancestors != nullptr) {
                    check(res.ancestors.size() < cfg.forced_ancestors->size(),
                          "forced_ancestors: not enough events supplied");
                    anc = (*cfg.forced_ancestors)[res.ancestors.size()];
                } else {
                    Rng rr = rng.split(kResampleStream, s);
                    anc = cfg.filter.resampling == FilterConfig::Resampling::multinomial
                              ? multinomial_resample(cum.value(), rr)
                              : systematic_resample(cum.value(), rr);
                }
                if (kind == ObjectiveName::fivor) {
                    ad::Node picked =
                        ad::sum(ad::gather_rows(ad::reshape(cum, {n, 1}), anc));
                    ad::Node log_prob =
                        ad::sub(picked, ad::mul_const(lse, static_cast<double>(n)));
                    events.push_back({log_prob, static_cast<int>(terms.size())});
                }
                res.ancestors.push_back(anc);
                carried = ad::gather_rows(z, anc);
                cum = tape.constant(Tensor::zeros({n}));
                steps_since_resample = 0;
            }
        }

        res.diversity(s) = mean_pairwise_distance(carried.value());

        if (s + 1 < t_len) {
            Tensor x_next = row_of(x, s + 1);
            Dist q = bound->proposal_dist(carried, x_next);
            Rng rp = rng.split(kProposalStream, s + 1);
            ad::Node z_next = rsample(q, rp);
            const ad::Node& hist =
                (filtered && cfg.transition_on_proposed) ? z : carried;
            Dist f = bound->transition_dist(hist);
            g = bound->emission_dist(z_next);
            lw = step_log_weights(f, g, q, z_next, x_next);
            cum = ad::add(cum, lw);
            z = z_next;
            ++steps_since_resample;
        } else {
            res.final_particles = carried.value();
        }
    }

    if (smc) {
        if (steps_since_resample > 0) terms.push_back(ad::add_const(ad::logsumexp(cum), -log_n));
        ad::Node value = terms[0];
        for (size_t i = 1; i < terms.size(); ++i) value = ad::add(value, terms[i]);
        res.value = value;
        res.surrogate = value;
        if (kind == ObjectiveName::fivor) {
            const double total = value.value().scalar_value();
            for (const FivorEvent& e : events) {
                double before = 0.0;
                for (int i = 0; i < e.term_index; ++i) before += terms[i].value().scalar_value();
                const double downstream = total - before;
                res.surrogate =
                    ad::add(res.surrogate, ad::mul_const(e.log_prob, downstream));
            }
        }
    } else {
        res.value = ad::add_const(ad::logsumexp(cum), -log_n);
        res.surrogate = res.value;
    }
    res.log_p_hat = res.value.value().scalar_value();
    return res;
}

}  // namespace

ObjectiveResult evaluate_objective(const SsmModel& model, const Tensor& x,
                                   const ObjectiveConfig& cfg, ad::Tape& tape,
                                   const ad::Node& params, Rng rng) {
    return run_objective(model, x, cfg, tape, params, rng);
}

ObjectiveResult objective_value(const SsmModel& model, const Tensor& x,
                                const ObjectiveConfig& cfg, Rng rng) {
    ad::Tape tape;
    tape.grad_enabled = false;
    auto [leaf, _] = model.bind_fresh(tape, false);
    (void)_;
    ObjectiveResult res = run_objective(model, x, cfg, tape, leaf, rng);
    // the local tape dies here; hand back only tape-independent fields
    res.value = ad::Node{};
    res.surrogate = ad::Node{};
    return res;
}

BatchEval batch_objective(const SsmModel& model, const Dataset& data,
                          const std::vector<int>& seq_indices, const ObjectiveConfig& cfg,
                          const Rng& rng, bool with_grad, int threads) {
    const int count = static_cast<int>(seq_indices.size());
    check(count > 0, "batch_objective: empty batch");
    std::vector<double> values(count, 0.0);
    std::vector<Tensor> grads(count);
    std::vector<double> min_ess(count, 0.0);

    auto work = [&](int lo, int hi) {
        for (int k = lo; k < hi; ++k) {
            const int seq = seq_indices[k];
            Tensor x = data.sequence(seq);
            ad::Tape tape;
            tape.grad_enabled = with_grad;
            auto [leaf, bound] = model.bind_fresh(tape, with_grad);
            (void)bound;
            ObjectiveResult r = evaluate_objective(model, x, cfg, tape, leaf,
                                                   rng.split(static_cast<std::uint64_t>(seq)));
            values[k] = r.value.value().scalar_value();
            double me = r.per_step_ess.size() > 0 ? r.per_step_ess(0) : 0.0;
            for (long i = 0; i < r.per_step_ess.size(); ++i)
                me = std::min(me, r.per_step_ess.at(i));
            min_ess[k] = me;
            if (with_grad) {
                tape.backward(r.surrogate);
                grads[k] = tape.grad_or_zero(leaf);
            }
        }
    };

    if (threads <= 1 || count == 1) {
        work(0, count);
    } else {
        const int n_threads = std::min(threads, count);
        std::vector<std::thread> pool;
        const int chunk = (count + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            int lo = t * chunk, hi = std::min(count, lo + chunk);
            if (lo < hi) pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    BatchEval out;
    for (int k = 0; k < count; ++k) out.value += values[k];
    out.value /= count;
    out.min_ess = min_ess[0];
    for (int k = 0; k < count; ++k) out.min_ess = std::min(out.min_ess, min_ess[k]);
    if (with_grad) {
        out.grad = Tensor::zeros({model.layout().total()});
        for (int k = 0; k < count; ++k)
            for (long i = 0; i < out.grad.size(); ++i) out.grad.at(i) += grads[k].at(i);
        for (long i = 0; i < out.grad.size(); ++i) out.grad.at(i) /= count;
        out.finite = out.grad.all_finite();
    }
    out.finite = out.finite && std::isfinite(out.value);
    return out;
}

}  // namespace enko
