#include "enko/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace enko {

void adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr) {
    check(params.same_shape(grad), "adam_step: shape mismatch");
    if (state.m.empty()) {
        state.m = Tensor::zeros(params.shape());
        state.v = Tensor::zeros(params.shape());
    }
    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (long i = 0; i < params.size(); ++i) {
        const double g = grad.at(i);
        state.m.at(i) = b1 * state.m.at(i) + (1.0 - b1) * g;
        state.v.at(i) = b2 * state.v.at(i) + (1.0 - b2) * g * g;
        const double mhat = state.m.at(i) / bc1;
        const double vhat = state.v.at(i) / bc2;
        params.at(i) -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

std::vector<int> split_indices(const Dataset& data, Split split) {
    switch (split) {
        case Split::train: return data.train_indices();
        case Split::valid: return data.valid_indices();
        case Split::test: return data.test_indices();
    }
    return {};
}

namespace {

double mean_objective(const SsmModel& model, const Dataset& data, const std::vector<int>& idx,
                      const ObjectiveConfig& cfg, const Rng& rng, int threads) {
    if (idx.empty()) return 0.0;
    return batch_objective(model, data, idx, cfg, rng, false, threads).value;
}

}  // namespace

TrainResult train(SsmModel& model, const Dataset& data, const TrainConfig& cfg) {
    check(cfg.learning_rate > 0.0, "train: learning rate must be positive");
    check(cfg.batch_size >= 1, "train: batch size must be >= 1");
    check(data.n_train >= 1, "train: dataset has no training split");
    check(data.dx() == model.dx(), "train: dataset dx does not match model");

    Rng root(cfg.seed);
    Rng shuffle_rng = root.split(101);
    Rng valid_rng = root.split(202);  // fixed: comparable across epochs

    std::vector<int> train_idx = data.train_indices();
    std::vector<int> valid_idx = data.valid_indices();

    TrainResult out;
    AdamState adam;
    out.best_params = model.params();
    out.best_valid = -std::numeric_limits<double>::infinity();

    auto eval_valid = [&] {
        return valid_idx.empty()
                   ? mean_objective(model, data, train_idx, cfg.objective, valid_rng, cfg.threads)
                   : mean_objective(model, data, valid_idx, cfg.objective, valid_rng, cfg.threads);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = root.split(1000 + static_cast<std::uint64_t>(epoch));
        // Fisher-Yates with the epoch stream
        std::vector<int> order = train_idx;
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            int j = static_cast<int>(erng.uniform() * (i + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_obj = 0.0;
        int n_batches = 0;
        int skipped = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<int> batch(order.begin() + start, order.begin() + stop);
            BatchEval ev = batch_objective(model, data, batch, cfg.objective,
                                           erng.split(9000 + start), true, cfg.threads);
            if (!ev.finite) {
                ++skipped;
                std::ostringstream os;
                os << "epoch " << epoch << ": non-finite objective/gradient on batch at "
                   << start << " (min ESS " << ev.min_ess << "), update skipped";
                out.diagnostics.push_back(os.str());
                continue;
            }
            if (cfg.grad_clip_norm > 0.0) {
                double norm = 0.0;
                for (long i = 0; i < ev.grad.size(); ++i) norm += ev.grad.at(i) * ev.grad.at(i);
                norm = std::sqrt(norm);
                if (norm > cfg.grad_clip_norm) {
                    const double s = cfg.grad_clip_norm / norm;
                    for (long i = 0; i < ev.grad.size(); ++i) ev.grad.at(i) *= s;
                }
            }
            // ascent: descend the negated gradient
            Tensor neg = ev.grad;
            for (long i = 0; i < neg.size(); ++i) neg.at(i) = -neg.at(i);
            adam_step(model.params(), neg, adam, cfg.learning_rate);
            epoch_obj += ev.value;
            ++n_batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_objective = n_batches > 0 ? epoch_obj / n_batches
                                            : -std::numeric_limits<double>::infinity();
        rec.valid_objective = eval_valid();
        rec.skipped_batches = skipped;
        out.history.push_back(rec);

        if (rec.valid_objective > out.best_valid && std::isfinite(rec.valid_objective)) {
            out.best_valid = rec.valid_objective;
            out.best_epoch = epoch;
            out.best_params = model.params();
        }
    }

    if (cfg.epochs > 0 && out.best_epoch >= 0) model.params() = out.best_params;
    if (cfg.epochs == 0) {
        out.best_params = model.params();
        out.best_valid = eval_valid();
    }
    return out;
}

MseReport predict_mse(const SsmModel& model, const Dataset& data, Split split,
                      const ObjectiveConfig& cfg, int context_len,
                      const std::vector<int>& horizons, Rng rng) {
    check(context_len >= 1, "predict_mse: context_len must be >= 1");
    check(!horizons.empty(), "predict_mse: need at least one horizon");
    int max_h = 0;
    for (int h : horizons) {
        check(h >= 1, "predict_mse: horizons must be >= 1");
        max_h = std::max(max_h, h);
    }
    check(context_len + max_h <= data.t(),
          "predict_mse: context_len + max horizon exceeds sequence length");
    std::vector<int> idx = split_indices(data, split);
    check(!idx.empty(), "predict_mse: empty split");

    const int dx = data.dx();
    MseReport rep;
    rep.context_len = context_len;
    rep.horizons = horizons;
    rep.mse.assign(horizons.size(), 0.0);
    rep.stderr_.assign(horizons.size(), 0.0);
    // per-sequence accumulators for the stderr
    std::vector<std::vector<double>> per_seq(horizons.size());

    // per-sequence streams keyed by content, so sequence order cannot matter
    auto content_key = [](const Tensor& x) {
        std::uint64_t h = 1469598103934665603ULL;
        for (long i = 0; i < x.size(); ++i) {
            std::uint64_t bits;
            double v = x.at(i);
            __builtin_memcpy(&bits, &v, 8);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xFF;
                h *= 1099511628211ULL;
            }
        }
        return h;
    };

    for (int seq : idx) {
        Tensor x = data.sequence(seq);
        Tensor prefix = Tensor::zeros({context_len, dx});
        for (int s = 0; s < context_len; ++s)
            for (int j = 0; j < dx; ++j) prefix(s, j) = x(s, j);

        const std::uint64_t key = content_key(x);
        ObjectiveResult filt = objective_value(model, prefix, cfg, rng.split(key));

        ad::Tape tape;
        tape.grad_enabled = false;
        auto [leaf, bound] = model.bind_fresh(tape, false);
        (void)leaf;
        ad::Node z = tape.constant(filt.final_particles);
        Rng roll = rng.split(777, key);
        for (int h = 1; h <= max_h; ++h) {
            z = rsample(bound->transition_dist(z), roll);
            Tensor pred = ad::col_mean(bound->emission_dist(z).mean).value();
            for (size_t k = 0; k < horizons.size(); ++k) {
                if (horizons[k] != h) continue;
                double se = 0.0;
                for (int j = 0; j < dx; ++j) {
                    double diff = pred(j) - x(context_len + h - 1, j);
                    se += diff * diff;
                }
                per_seq[k].push_back(se / dx);
            }
        }
    }

    for (size_t k = 0; k < horizons.size(); ++k) {
        const auto& v = per_seq[k];
        double m = 0.0;
        for (double e : v) m += e;
        m /= static_cast<double>(v.size());
        rep.mse[k] = m;
        double var = 0.0;
        for (double e : v) var += (e - m) * (e - m);
        if (v.size() > 1) var /= static_cast<double>(v.size() - 1);
        rep.stderr_[k] = std::sqrt(var / static_cast<double>(v.size()));
    }
    return rep;
}

}  // namespace enko
