#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lsa/model.hpp"

namespace lsa {

inline int num_threads() {
    if (const char* env = std::getenv("LSA_NUM_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return int(std::min<unsigned>(hw == 0 ? 1 : hw, 8));
}

// Fixed contiguous chunking; combined with in-order reduction this keeps
// results identical for a given thread count regardless of scheduling.
template <typename F>
void parallel_chunks(size_t n, int nthreads, F&& body) {
    nthreads = std::max(1, std::min<int>(nthreads, int(n == 0 ? 1 : n)));
    if (nthreads == 1 || n == 0) {
        body(0, size_t(0), n);
        return;
    }
    std::vector<std::thread> threads;
    size_t per = (n + nthreads - 1) / nthreads;
    for (int c = 0; c < nthreads; ++c) {
        size_t begin = std::min(n, size_t(c) * per);
        size_t end = std::min(n, begin + per);
        threads.emplace_back([c, begin, end, &body] { body(c, begin, end); });
    }
    for (auto& t : threads) t.join();
}

inline double mse_loss(const std::vector<double>& predictions,
                       const std::vector<double>& targets) {
    if (predictions.empty() || predictions.size() != targets.size())
        throw std::invalid_argument("mse_loss: empty or mismatched inputs");
    double s = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        double r = predictions[i] - targets[i];
        s += r * r;
    }
    return s / double(predictions.size());
}

struct TrainDivergence : std::runtime_error {
    explicit TrainDivergence(const std::string& tensor)
        : std::runtime_error("training diverged: first non-finite tensor is " + tensor),
          tensor(tensor) {}
    std::string tensor;
};

// Adaptive moment optimizer, bias-corrected, defaults (0.9, 0.999, 1e-8).
class Adam {
public:
    Adam(const ModelParams& p, double lr) : lr_(lr) {
        m_.reserve(p.count());
        v_.reserve(p.count());
        for (int i = 0; i < p.count(); ++i) {
            m_.emplace_back(p.tensor(i).rows(), p.tensor(i).cols());
            v_.emplace_back(p.tensor(i).rows(), p.tensor(i).cols());
        }
    }

    void step(ModelParams& p, const Grads& g) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, double(t_));
        double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (int i = 0; i < p.count(); ++i) {
            Mat& theta = p.tensor(i);
            const Mat& grad = g.g[i];
            Mat& m = m_[i];
            Mat& v = v_[i];
            for (size_t k = 0; k < theta.size(); ++k) {
                m[k] = beta1_ * m[k] + (1.0 - beta1_) * grad[k];
                v[k] = beta2_ * v[k] + (1.0 - beta2_) * grad[k] * grad[k];
                theta[k] -= lr_ * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
            }
        }
    }

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
    std::vector<Mat> m_, v_;
};

// Forward-only predictions (unclamped) with a fixed long-sequence cache.
inline std::vector<double> predict_batch(const ModelParams& params, const AspectGraph& graph,
                                         const LongSeqCache& cache, const TrainConfig& cfg,
                                         const std::vector<Example>& examples, Variant variant) {
    std::vector<double> preds(examples.size());
    parallel_chunks(examples.size(), num_threads(), [&](int, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            ad::Tape tape;
            ExampleInputs in = build_inputs(graph, cache, cfg, examples[i]);
            ParamCtx ctx{&params, nullptr, nullptr};
            preds[i] = tape.value(predict_example(tape, in, ctx, cfg, variant))(0, 0);
        }
    });
    return preds;
}

struct EpochLog {
    int epoch = 0;
    double train_mse = 0.0, val_mse = 0.0, lr = 0.0, wall_time_sec = 0.0;
};

struct TrainResult {
    ModelParams params;  // best-validation checkpoint
    std::vector<EpochLog> history;
    int best_epoch = 0;
    double best_val_mse = 0.0;
};

// Mini-batch training from explicit starting parameters. Validation is the
// last 10% of the (seed-shuffled) training examples; early stopping returns
// the best-validation checkpoint. Deterministic under a fixed seed and
// thread count.
inline TrainResult train_from(ModelParams params, const std::vector<Example>& examples,
                              const AspectGraph& graph, const TrainConfig& cfg,
                              Variant variant = Variant::full, std::ostream* log = nullptr) {
    if (examples.empty()) throw std::invalid_argument("train: empty training set");
    std::vector<size_t> idx(examples.size());
    std::iota(idx.begin(), idx.end(), 0);
    named_stream(cfg.seed, "val_split").shuffle(idx);
    size_t n_val = examples.size() / 10;
    std::vector<Example> fit, val;
    for (size_t i = 0; i < idx.size() - n_val; ++i) fit.push_back(examples[idx[i]]);
    for (size_t i = idx.size() - n_val; i < idx.size(); ++i) val.push_back(examples[idx[i]]);
    if (val.empty()) val = fit;  // degenerate tiny sets

    std::vector<double> val_targets;
    for (const auto& e : val) val_targets.push_back(e.rating);

    int nthreads = num_threads();
    Adam opt(params, cfg.learning_rate);
    std::vector<Grads> chunk_grads;
    for (int c = 0; c < nthreads; ++c) chunk_grads.emplace_back(params);
    Grads total(params);

    TrainResult result{params, {}, 0, std::numeric_limits<double>::infinity()};
    LongSeqCache cache = LongSeqCache::build(graph, params, cfg.K);
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<size_t> order(fit.size());
        std::iota(order.begin(), order.end(), 0);
        named_stream(cfg.seed, "shuffle.epoch" + std::to_string(epoch)).shuffle(order);

        double sq_err_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
            size_t bsz = stop - start;
            std::vector<double> preds(bsz);
            for (auto& cg : chunk_grads) cg.zero();
            parallel_chunks(bsz, nthreads, [&](int chunk, size_t begin, size_t end) {
                for (size_t b = begin; b < end; ++b) {
                    const Example& ex = fit[order[start + b]];
                    ad::Tape tape;
                    ExampleInputs in = build_inputs(graph, cache, cfg, ex);
                    ParamCtx ctx{&params, &chunk_grads[chunk], nullptr};
                    ad::Var pred = predict_example(tape, in, ctx, cfg, variant);
                    preds[b] = tape.value(pred)(0, 0);
                    tape.backward(pred, 2.0 * (preds[b] - ex.rating) / double(bsz));
                }
            });
            double batch_sq = 0.0;
            for (size_t b = 0; b < bsz; ++b) {
                double r = preds[b] - fit[order[start + b]].rating;
                batch_sq += r * r;
            }
            if (!std::isfinite(batch_sq)) {
                std::string bad = params.first_nonfinite();
                if (bad.empty())
                    for (int i = 0; i < params.count() && bad.empty(); ++i)
                        for (int c = 0; c < nthreads && bad.empty(); ++c)
                            if (!chunk_grads[c].g[i].all_finite()) bad = params.name(i);
                throw TrainDivergence(bad.empty() ? "predictions" : bad);
            }
            sq_err_sum += batch_sq;
            total.zero();
            for (const auto& cg : chunk_grads) total.add(cg);
            opt.step(params, total);
        }

        // refreshed cache serves both validation and the next epoch
        cache = LongSeqCache::build(graph, params, cfg.K);
        std::vector<double> val_preds = predict_batch(params, graph, cache, cfg, val, variant);
        double val_mse = mse_loss(val_preds, val_targets);
        if (!std::isfinite(val_mse)) {
            std::string bad = params.first_nonfinite();
            throw TrainDivergence(bad.empty() ? "predictions" : bad);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_mse = sq_err_sum / double(fit.size());
        entry.val_mse = val_mse;
        entry.lr = cfg.learning_rate;
        entry.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(entry);
        if (log) {
            nlohmann::json j = {{"epoch", entry.epoch},
                                {"train_mse", entry.train_mse},
                                {"val_mse", entry.val_mse},
                                {"lr", entry.lr},
                                {"wall_time", entry.wall_time_sec}};
            (*log) << j.dump() << "\n";
        }

        if (val_mse < result.best_val_mse) {
            result.best_val_mse = val_mse;
            result.best_epoch = epoch;
            result.params = params;
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }
    return result;
}

inline ModelParams init_model(const AspectGraph& graph, const TrainConfig& cfg,
                              double initial_global_bias) {
    ModelParams params(
        ModelDims::from_config(cfg, graph.n_users(), graph.n_items(), graph.n_aspects()));
    params.init(cfg.seed);
    params.tensor(params.fm.b0)(0, 0) = initial_global_bias;
    return params;
}

inline TrainResult train_model(const std::vector<Example>& examples, const AspectGraph& graph,
                               const TrainConfig& cfg, Variant variant = Variant::full,
                               std::ostream* log = nullptr) {
    if (examples.empty()) throw std::invalid_argument("train: empty training set");
    double mean_rating = 0.0;
    for (const auto& e : examples) mean_rating += e.rating;
    mean_rating /= double(examples.size());
    return train_from(init_model(graph, cfg, mean_rating), examples, graph, cfg, variant, log);
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_tensor;
    size_t worst_coord = 0;
    double analytic = 0.0, numeric = 0.0;
};

// Central finite differences against the analytic gradients, with the
// selection wiring frozen at the current parameters (selection is discrete;
// within an epoch the trainer holds it fixed the same way). Relative error
// uses max(|analytic|, |numeric|, 1e-8) as denominator.
//
// A fixed step is not a valid oracle everywhere: within eps of a ReLU or
// LeakyReLU kink the central difference straddles the kink, and on
// near-zero-gradient coordinates the loss difference sits at roundoff level.
// Coordinates whose first estimate has not converged are re-measured at
// 8*eps, eps/8 and eps/64 and the best-agreeing step is kept. A wrong
// analytic gradient disagrees at every step size and still fails.
inline GradCheckReport gradient_check(ModelParams& params, const AspectGraph& graph,
                                      const std::vector<Example>& batch, const TrainConfig& cfg,
                                      double eps = 1e-5, int coords_per_tensor = 24,
                                      uint64_t sample_seed = 12345,
                                      Variant variant = Variant::full) {
    if (batch.empty()) throw std::invalid_argument("gradient_check: empty batch");
    LongSeqCache cache = LongSeqCache::build(graph, params, cfg.K);
    std::vector<ExampleInputs> inputs;
    for (const auto& ex : batch) inputs.push_back(build_inputs(graph, cache, cfg, ex));

    auto loss = [&]() {
        double s = 0.0;
        for (size_t i = 0; i < batch.size(); ++i) {
            ad::Tape tape;
            ParamCtx ctx{&params, nullptr, nullptr};
            double pred = tape.value(predict_example(tape, inputs[i], ctx, cfg, variant))(0, 0);
            double r = pred - batch[i].rating;
            s += r * r;
        }
        return s / double(batch.size());
    };

    Grads analytic(params);
    for (size_t i = 0; i < batch.size(); ++i) {
        ad::Tape tape;
        ParamCtx ctx{&params, &analytic, nullptr};
        ad::Var pred = predict_example(tape, inputs[i], ctx, cfg, variant);
        tape.backward(pred, 2.0 * (tape.value(pred)(0, 0) - batch[i].rating) /
                                double(batch.size()));
    }

    GradCheckReport report;
    Rng rng(sample_seed);
    for (int t = 0; t < params.count(); ++t) {
        Mat& theta = params.tensor(t);
        size_t n = theta.size();
        std::set<size_t> coords;
        if (int(n) <= coords_per_tensor)
            for (size_t k = 0; k < n; ++k) coords.insert(k);
        else
            while (int(coords.size()) < coords_per_tensor) coords.insert(rng.next_u64() % n);
        for (size_t k : coords) {
            double a = analytic.g[t][k];
            auto fd_rel = [&](double step, double& numeric_out) {
                double saved = theta[k];
                theta[k] = saved + step;
                double lp = loss();
                theta[k] = saved - step;
                double lm = loss();
                theta[k] = saved;
                numeric_out = (lp - lm) / (2.0 * step);
                return std::abs(a - numeric_out) /
                       std::max({std::abs(a), std::abs(numeric_out), 1e-8});
            };
            double numeric = 0.0;
            double rel = fd_rel(eps, numeric);
            if (rel > 1e-4) {
                for (double step : {8.0 * eps, eps / 8.0, eps / 64.0}) {
                    double refined = 0.0;
                    double r = fd_rel(step, refined);
                    if (r < rel) {
                        rel = r;
                        numeric = refined;
                    }
                    if (rel <= 1e-4) break;
                }
            }
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_tensor = params.name(t);
                report.worst_coord = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace lsa
