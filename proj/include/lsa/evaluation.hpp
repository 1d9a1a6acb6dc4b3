#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lsa/corpus.hpp"
#include "lsa/graph.hpp"
#include "lsa/training.hpp"

// 80/20 evaluation protocol: MSE and MAE over clamped predictions, NDCG@10
// per user with relevance = true rating and gain 2^rel - 1, averaged over
// users with at least two test items.

namespace lsa {

// Uniform random split at review granularity; returns (train, test) index
// sets, each ascending.
inline std::pair<std::vector<size_t>, std::vector<size_t>> split_dataset(size_t n, double ratio,
                                                                         uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) throw std::invalid_argument("split ratio must be in (0,1)");
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    named_stream(seed, "test_split").shuffle(perm);
    size_t n_test = size_t(std::llround(ratio * double(n)));
    std::vector<size_t> test(perm.begin(), perm.begin() + n_test);
    std::vector<size_t> train(perm.begin() + n_test, perm.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {train, test};
}

inline double dcg(const std::vector<double>& rels, int k) {
    double s = 0.0;
    int n = std::min<int>(k, int(rels.size()));
    for (int r = 0; r < n; ++r)
        s += (std::pow(2.0, rels[r]) - 1.0) / std::log2(double(r) + 2.0);
    return s;
}

// rels listed in predicted-rank order; normalizer is the DCG of the
// descending-relevance ordering (the best permutation).
inline double ndcg_at_k(std::vector<double> rels_in_predicted_order, int k) {
    double got = dcg(rels_in_predicted_order, k);
    std::sort(rels_in_predicted_order.begin(), rels_in_predicted_order.end(),
              std::greater<double>());
    double ideal = dcg(rels_in_predicted_order, k);
    return ideal > 0.0 ? got / ideal : 1.0;
}

struct MetricsReport {
    double mse = 0.0, mae = 0.0, ndcg_at_10 = 0.0;
    size_t n_test = 0;
    size_t ndcg_users = 0;
    std::string variant = "full";
    uint64_t seed = 0;
    size_t union_truncations = 0;
    nlohmann::json config;

    nlohmann::json to_json() const {
        return nlohmann::json{{"mse", mse},
                              {"mae", mae},
                              {"ndcg_at_10", ndcg_at_10},
                              {"n_test", n_test},
                              {"ndcg_users", ndcg_users},
                              {"variant", variant},
                              {"seed", seed},
                              {"union_truncations", union_truncations},
                              {"config", config}};
    }
};

struct PredictionRow {
    std::optional<int> user, item;
    double true_rating = 0.0;
    double predicted = 0.0;  // clamped
    int64_t timestamp = 0;
};

// Metrics over a test set: MSE/MAE on clamped predictions; ranking for NDCG
// uses the raw predictions (clamping is monotone, so only boundary ties
// would differ) with ascending item id as the tie break.
inline MetricsReport evaluate_model(const ModelParams& params, const AspectGraph& graph,
                                    const TrainConfig& cfg,
                                    const std::vector<Example>& test_set,
                                    Variant variant = Variant::full,
                                    std::vector<PredictionRow>* rows = nullptr) {
    if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
    LongSeqCache cache = LongSeqCache::build(graph, params, cfg.K);
    std::vector<double> raw = predict_batch(params, graph, cache, cfg, test_set, variant);

    MetricsReport report;
    report.variant = to_string(variant);
    report.seed = cfg.seed;
    report.n_test = test_set.size();
    double se = 0.0, ae = 0.0;
    std::map<int, std::vector<size_t>> by_user;
    for (size_t i = 0; i < test_set.size(); ++i) {
        double clamped = clamp_rating(raw[i]);
        double err = clamped - test_set[i].rating;
        se += err * err;
        ae += std::abs(err);
        if (test_set[i].user) by_user[*test_set[i].user].push_back(i);
        if (rows)
            rows->push_back(PredictionRow{test_set[i].user, test_set[i].item,
                                          test_set[i].rating, clamped,
                                          test_set[i].timestamp});
    }
    report.mse = se / double(test_set.size());
    report.mae = ae / double(test_set.size());

    double ndcg_sum = 0.0;
    size_t ndcg_users = 0;
    for (auto& [user, indices] : by_user) {
        if (indices.size() < 2) continue;
        std::sort(indices.begin(), indices.end(), [&](size_t a, size_t b) {
            if (raw[a] != raw[b]) return raw[a] > raw[b];
            int ia = test_set[a].item.value_or(-1), ib = test_set[b].item.value_or(-1);
            if (ia != ib) return ia < ib;
            return a < b;
        });
        std::vector<double> rels;
        for (size_t i : indices) rels.push_back(test_set[i].rating);
        ndcg_sum += ndcg_at_k(std::move(rels), 10);
        ++ndcg_users;
    }
    report.ndcg_users = ndcg_users;
    report.ndcg_at_10 = ndcg_users > 0 ? ndcg_sum / double(ndcg_users) : 0.0;
    return report;
}

// Global mean plus damped user/item biases; the reference point the trained
// model has to beat.
class BiasBaseline {
public:
    static BiasBaseline fit(const std::vector<Example>& train, double damping = 5.0) {
        BiasBaseline b;
        if (train.empty()) return b;
        double sum = 0.0;
        for (const auto& e : train) sum += e.rating;
        b.mu_ = sum / double(train.size());

        std::unordered_map<int, std::pair<double, int>> user_acc, item_acc;
        for (const auto& e : train)
            if (e.user) {
                auto& a = user_acc[*e.user];
                a.first += e.rating - b.mu_;
                a.second += 1;
            }
        for (auto& [u, a] : user_acc) b.b_user_[u] = a.first / (a.second + damping);
        for (const auto& e : train)
            if (e.item) {
                auto& a = item_acc[*e.item];
                a.first += e.rating - b.mu_ - (e.user ? b.b_user_[*e.user] : 0.0);
                a.second += 1;
            }
        for (auto& [i, a] : item_acc) b.b_item_[i] = a.first / (a.second + damping);
        return b;
    }

    double predict(std::optional<int> user, std::optional<int> item) const {
        double r = mu_;
        if (user)
            if (auto it = b_user_.find(*user); it != b_user_.end()) r += it->second;
        if (item)
            if (auto it = b_item_.find(*item); it != b_item_.end()) r += it->second;
        return r;
    }

    double test_mse(const std::vector<Example>& test) const {
        double se = 0.0;
        for (const auto& e : test) {
            double err = clamp_rating(predict(e.user, e.item)) - e.rating;
            se += err * err;
        }
        return test.empty() ? 0.0 : se / double(test.size());
    }

private:
    double mu_ = 0.0;
    std::unordered_map<int, double> b_user_, b_item_;
};

// Ingested dataset plus the train-side artifacts derived from it. User and
// item ids are assigned over the full review list (first appearance), while
// the vocabulary and graph come from the training split only.
struct SplitData {
    IdMap users, items;
    AspectVocabulary vocab;
    AspectGraph graph;
    std::vector<Example> train, test;
};

inline Example to_example(const RawReview& r, const IdMap& users, const IdMap& items) {
    return Example{users.find(r.user_id), items.find(r.item_id), r.rating, r.timestamp};
}

inline SplitData prepare_split(const std::vector<RawReview>& reviews, const TrainConfig& cfg) {
    SplitData data;
    for (const auto& r : reviews) {
        data.users.add(r.user_id);
        data.items.add(r.item_id);
    }
    auto [train_idx, test_idx] = split_dataset(reviews.size(), cfg.test_ratio, cfg.seed);

    std::vector<RawReview> train_reviews;
    train_reviews.reserve(train_idx.size());
    for (size_t i : train_idx) train_reviews.push_back(reviews[i]);
    auto mentions = extract_corpus_mentions(train_reviews);
    data.vocab = build_vocabulary(mentions, cfg.min_freq);
    data.graph = build_graph(train_reviews, mentions, data.vocab, data.users, data.items);

    for (size_t i : train_idx) data.train.push_back(to_example(reviews[i], data.users, data.items));
    for (size_t i : test_idx) data.test.push_back(to_example(reviews[i], data.users, data.items));
    return data;
}

struct PipelineResult {
    SplitData data;
    TrainResult trained;
    MetricsReport report;
    std::vector<PredictionRow> predictions;
};

// train + evaluate under one config; the backbone of the train, evaluate,
// ablate and sweep commands.
inline PipelineResult run_pipeline(const std::vector<RawReview>& reviews, const TrainConfig& cfg,
                                   Variant variant = Variant::full,
                                   std::ostream* train_log = nullptr) {
    PipelineResult out;
    out.data = prepare_split(reviews, cfg);
    out.trained = train_model(out.data.train, out.data.graph, cfg, variant, train_log);
    out.report = evaluate_model(out.trained.params, out.data.graph, cfg, out.data.test, variant,
                                &out.predictions);
    return out;
}

inline MetricsReport run_ablation(Variant variant, const std::vector<RawReview>& reviews,
                                  const TrainConfig& cfg) {
    return run_pipeline(reviews, cfg, variant).report;
}

enum class SweepParam { K, N };

inline SweepParam sweep_param_from_string(const std::string& s) {
    if (s == "K") return SweepParam::K;
    if (s == "N") return SweepParam::N;
    throw std::invalid_argument("sweep param must be K or N");
}

// One full train+evaluate per value, everything else fixed.
inline std::vector<std::pair<int, double>> sweep(SweepParam param, const std::vector<int>& values,
                                                 const std::vector<RawReview>& reviews,
                                                 const TrainConfig& base_cfg) {
    if (values.empty()) throw std::invalid_argument("sweep: no values");
    std::vector<std::pair<int, double>> rows;
    for (int v : values) {
        TrainConfig cfg = base_cfg;
        (param == SweepParam::K ? cfg.K : cfg.N) = v;
        rows.emplace_back(v, run_pipeline(reviews, cfg).report.mse);
    }
    return rows;
}

}  // namespace lsa
