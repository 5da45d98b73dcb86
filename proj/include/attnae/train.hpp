#pragma once

// Mini-batch training with Adam, global-norm gradient clipping, per-epoch
// shuffling and early stopping on validation MSE, plus the random-grid
// hyperparameter tuner.

#include <algorithm>
#include <chrono>
#include <numeric>
#include <vector>

#include "attnae/adam.hpp"
#include "attnae/errors.hpp"
#include "attnae/model.hpp"
#include "attnae/pipeline.hpp"

namespace attnae {

struct TrainReport {
    Vec train_mse;  // one entry per epoch actually run
    Vec val_mse;
    double initial_val_mse = 0.0;
    std::size_t best_epoch = 0;  // index into the arrays
    double wall_seconds = 0.0;   // not serialized into deterministic outputs
};

struct TrainOutput {
    ModelParams model;
    TrainReport report;
};

namespace detail {
inline std::vector<Matrix*> collect_tensors(ModelParams& p) {
    std::vector<Matrix*> out;
    p.for_each_tensor([&](const std::string&, Matrix& m) { out.push_back(&m); });
    return out;
}
}  // namespace detail

inline double evaluate_mse(const ModelParams& p, const WindowBatch& wb) {
    Rng unused(0);
    double acc = 0.0;
    for (const auto& w : wb.windows) {
        const auto r = forward(w, p, Mode::Infer, unused, false);
        acc += mse_loss(r.recon, w);
    }
    return acc / static_cast<double>(wb.count());
}

inline TrainOutput train(const WindowBatch& train_wb, const WindowBatch& val_wb,
                         const Hyperparams& hp) {
    if (train_wb.empty() || val_wb.empty())
        throw std::domain_error("train: empty training or validation batch");
    if (train_wb.window_len != hp.window || val_wb.window_len != hp.window)
        throw std::domain_error("train: window length does not match hyperparams");
    if (train_wb.features != val_wb.features)
        throw std::domain_error("train: train/val feature counts differ");

    const auto t0 = std::chrono::steady_clock::now();
    const ModelShape shape = ModelShape::from_hyperparams(hp, train_wb.features);
    Rng root(hp.seed);
    Rng init_rng = root.derive(1);
    Rng shuffle_rng = root.derive(2);
    Rng dropout_rng = root.derive(3);

    TrainOutput out;
    out.model = ModelParams::init(shape, hp.dropout, init_rng);
    auto tensors = detail::collect_tensors(out.model);
    std::vector<AdamState> adam;
    adam.reserve(tensors.size());
    for (const Matrix* m : tensors) adam.emplace_back(m->rows(), m->cols(), hp.lr);

    out.report.initial_val_mse = evaluate_mse(out.model, val_wb);

    ModelParams best = out.model;
    double best_val = out.report.initial_val_mse;
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_wb.count());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t n = std::min(hp.batch, order.size() - done);
            ModelParams gacc = ModelParams::zeros(shape, hp.dropout);
            auto gacc_tensors = detail::collect_tensors(gacc);
            for (std::size_t b = 0; b < n; ++b) {
                const Matrix& w = train_wb.windows[order[done + b]];
                auto fr = forward(w, out.model, Mode::Train, dropout_rng, true);
                const double loss = mse_loss(fr.recon, w);
                if (!std::isfinite(loss)) throw numeric_error("train: non-finite loss");
                epoch_loss += loss;
                ModelParams g = backward(fr.cache, out.model, w);
                auto g_tensors = detail::collect_tensors(g);
                for (std::size_t k = 0; k < gacc_tensors.size(); ++k) {
                    double* dst = gacc_tensors[k]->data();
                    const double* src = g_tensors[k]->data();
                    for (std::size_t j = 0; j < gacc_tensors[k]->size(); ++j) dst[j] += src[j];
                }
            }
            // mean gradient, then global-norm clip
            const double inv_n = 1.0 / static_cast<double>(n);
            double sq = 0.0;
            for (Matrix* m : gacc_tensors)
                for (double& v : m->raw()) {
                    v *= inv_n;
                    sq += v * v;
                }
            if (!std::isfinite(sq)) throw numeric_error("train: non-finite gradient");
            if (hp.grad_clip > 0.0 && sq > hp.grad_clip * hp.grad_clip) {
                const double scale = hp.grad_clip / std::sqrt(sq);
                for (Matrix* m : gacc_tensors)
                    for (double& v : m->raw()) v *= scale;
            }
            for (std::size_t k = 0; k < tensors.size(); ++k)
                adam_step(*tensors[k], *gacc_tensors[k], adam[k]);
            done += n;
        }
        out.report.train_mse.push_back(epoch_loss / static_cast<double>(order.size()));
        const double val = evaluate_mse(out.model, val_wb);
        if (!std::isfinite(val)) throw numeric_error("train: non-finite validation loss");
        out.report.val_mse.push_back(val);
        if (val < best_val) {
            best_val = val;
            best = out.model;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= hp.patience && hp.patience > 0) {
            break;
        }
    }
    out.model = std::move(best);
    out.report.best_epoch = best_epoch;
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---- random-grid tuner -------------------------------------------------------

struct SearchSpace {
    std::vector<double> lr;
    std::vector<std::size_t> batch;
    std::vector<std::size_t> window;
    std::vector<std::size_t> hidden1;
    std::vector<std::size_t> hidden2;
    std::vector<std::size_t> bottleneck;
    std::vector<double> dropout;

    std::size_t size() const {
        return lr.size() * batch.size() * window.size() * hidden1.size() * hidden2.size() *
               bottleneck.size() * dropout.size();
    }
    void validate() const {
        if (size() == 0) throw std::domain_error("search space: some dimension is empty");
    }

    static SearchSpace defaults() {
        SearchSpace s;
        s.lr = {0.002, 0.006, 0.01};
        s.batch = {16, 32, 64};
        s.window = {10, 20};
        s.hidden1 = {32, 64};
        s.hidden2 = {16, 32};
        s.bottleneck = {32, 64};
        s.dropout = {0.0, 0.06, 0.1};
        return s;
    }

    Hyperparams decode(std::size_t linear) const {
        Hyperparams h;
        auto pick = [&linear](const auto& dim) {
            const std::size_t i = linear % dim.size();
            linear /= dim.size();
            return dim[i];
        };
        h.lr = pick(lr);
        h.batch = pick(batch);
        h.window = pick(window);
        h.hidden1 = pick(hidden1);
        h.hidden2 = pick(hidden2);
        h.bottleneck = pick(bottleneck);
        h.dropout = pick(dropout);
        return h;
    }
};

struct TrialResult {
    Hyperparams hp;
    double val_mse = 0.0;
    std::size_t epochs_run = 0;
};

struct TuneOutput {
    Hyperparams best;
    std::vector<TrialResult> trials;
};

// Random sampling without replacement from the finite grid; every trial is
// trained for `epochs_per_trial` epochs and judged on its final (best
// restored) validation MSE.
inline TuneOutput tune(const SignalFrame& raw_frame, const ScalerBounds& bounds,
                       const SearchSpace& space, std::size_t trials,
                       std::size_t epochs_per_trial, std::uint64_t seed) {
    space.validate();
    if (trials == 0) throw std::domain_error("tune: zero trials");
    const std::size_t total = space.size();
    Rng rng(seed);
    std::vector<std::size_t> picks;
    if (trials >= total) {
        picks.resize(total);
        std::iota(picks.begin(), picks.end(), 0);
    } else {
        std::vector<bool> seen(total, false);
        while (picks.size() < trials) {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(total));
            if (!seen[idx]) {
                seen[idx] = true;
                picks.push_back(idx);
            }
        }
    }

    const SignalFrame scaled = scale(raw_frame, bounds);
    TuneOutput out;
    std::size_t best_idx = 0;
    double best_val = 0.0;
    for (std::size_t k = 0; k < picks.size(); ++k) {
        Hyperparams hp = space.decode(picks[k]);
        hp.epochs = epochs_per_trial;
        hp.seed = Rng(seed).derive(100 + k).next_u64();
        auto [tr, va] = split_train_val(scaled, 0.8, hp.window);
        const auto train_wb = make_windows(tr, hp.window);
        const auto val_wb = make_windows(va, hp.window);
        const auto res = train(train_wb, val_wb, hp);
        TrialResult t;
        t.hp = hp;
        t.val_mse = res.report.val_mse[res.report.best_epoch];
        t.epochs_run = res.report.val_mse.size();
        out.trials.push_back(t);
        if (k == 0 || t.val_mse < best_val) {
            best_val = t.val_mse;
            best_idx = k;
        }
    }
    out.best = out.trials[best_idx].hp;
    return out;
}

}  // namespace attnae
