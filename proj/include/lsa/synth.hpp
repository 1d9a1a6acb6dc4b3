#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsa/config.hpp"
#include "lsa/mat.hpp"
#include "lsa/types.hpp"

// Synthetic review corpus with known long-term aspect profiles and injected
// short-term drift, used as ground truth for the statistical acceptance
// checks. Each user carries a sparse long-term interest vector; drifted
// users temporarily switch to a replacement vector (disjoint support where
// possible) inside a recent window. Ratings follow the active interest
// vector; review triples name the aspects behind the rating, so extraction
// recovers them. Drift episodes come with extra in-window activity, which is
// what makes the drift observable in a short history.

namespace lsa {

struct UserProfile {
    std::vector<double> long_vec;
    std::vector<double> drift_vec;  // empty when not drifted
    bool drifted = false;
};

struct SynthReviewInfo {
    int user = 0, item = 0;
    int64_t timestamp = 0;
    bool drift_active = false;
    double affinity = 0.0;  // standardized, pre-sigmoid
};

struct SynthTruth {
    std::vector<UserProfile> users;
    std::vector<std::vector<double>> items;
    int64_t span_start = 0, span_end = 0;
    int64_t window_start = 0, window_end = 0;
    std::vector<SynthReviewInfo> reviews;  // aligned with generated reviews
};

struct SynthOutput {
    std::vector<RawReview> reviews;
    SynthTruth truth;
};

namespace detail {

inline std::vector<double> sparse_profile(Rng& rng, int n_aspects, int support,
                                          const std::vector<double>* avoid = nullptr) {
    std::vector<int> candidates;
    for (int a = 0; a < n_aspects; ++a)
        if (!avoid || (*avoid)[a] == 0.0) candidates.push_back(a);
    if (int(candidates.size()) < support) {
        candidates.resize(n_aspects);
        std::iota(candidates.begin(), candidates.end(), 0);
    }
    rng.shuffle(candidates);
    std::vector<double> vec(n_aspects, 0.0);
    for (int k = 0; k < support && k < int(candidates.size()); ++k)
        vec[candidates[k]] = rng.uniform(0.5, 1.5);
    return vec;
}

inline int weighted_pick(Rng& rng, const std::vector<double>& weights) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) return rng.uniform_int(int(weights.size()));
    double x = rng.uniform() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
        x -= weights[i];
        if (x <= 0.0) return int(i);
    }
    return int(weights.size()) - 1;
}

}  // namespace detail

inline SynthOutput generate(const SynthConfig& cfg) {
    if (cfg.n_users < 1 || cfg.n_items < 1 || cfg.n_aspects < 1 || cfg.interactions_per_user < 1)
        throw std::invalid_argument("synth: counts must be >= 1");
    if (cfg.drift_fraction < 0.0 || cfg.drift_fraction > 1.0)
        throw std::invalid_argument("synth: drift_fraction must be in [0,1]");

    constexpr int64_t kDay = 86400;
    const int64_t span_start = 1'500'000'000;
    const int64_t span_end = span_start + 730 * kDay;  // two years
    const int64_t window_end = span_end;
    const int64_t window_start = window_end - int64_t(cfg.drift_window_days) * kDay;
    const int support = std::min(5, cfg.n_aspects);

    SynthOutput out;
    SynthTruth& truth = out.truth;
    truth.span_start = span_start;
    truth.span_end = span_end;
    truth.window_start = window_start;
    truth.window_end = window_end;

    std::vector<int> drift_order(cfg.n_users);
    std::iota(drift_order.begin(), drift_order.end(), 0);
    named_stream(cfg.seed, "synth.drift_pick").shuffle(drift_order);
    int n_drifted = int(std::llround(cfg.drift_fraction * cfg.n_users));
    std::vector<char> drifted(cfg.n_users, 0);
    for (int k = 0; k < n_drifted; ++k) drifted[drift_order[k]] = 1;

    truth.users.resize(cfg.n_users);
    for (int u = 0; u < cfg.n_users; ++u) {
        Rng rng = named_stream(cfg.seed, "synth.user" + std::to_string(u));
        UserProfile& profile = truth.users[u];
        profile.long_vec = detail::sparse_profile(rng, cfg.n_aspects, support);
        profile.drifted = drifted[u] != 0;
        if (profile.drifted)
            profile.drift_vec =
                detail::sparse_profile(rng, cfg.n_aspects, support, &profile.long_vec);
    }
    truth.items.resize(cfg.n_items);
    for (int i = 0; i < cfg.n_items; ++i) {
        Rng rng = named_stream(cfg.seed, "synth.item" + std::to_string(i));
        truth.items[i] = detail::sparse_profile(rng, cfg.n_aspects, support);
    }

    // first pass: who interacts with what and when, and the raw affinity
    double window_share =
        std::max(0.3, double(window_end - window_start) / double(span_end - span_start));
    for (int u = 0; u < cfg.n_users; ++u) {
        Rng rng = named_stream(cfg.seed, "synth.interactions.u" + std::to_string(u));
        const UserProfile& profile = truth.users[u];
        for (int k = 0; k < cfg.interactions_per_user; ++k) {
            SynthReviewInfo info;
            info.user = u;
            info.item = rng.uniform_int(cfg.n_items);
            if (profile.drifted && rng.uniform() < window_share) {
                info.timestamp = window_start + int64_t(rng.uniform() *
                                                        double(window_end - window_start));
            } else {
                info.timestamp =
                    span_start + int64_t(rng.uniform() * double(span_end - span_start));
            }
            info.drift_active = profile.drifted && info.timestamp >= window_start &&
                                info.timestamp <= window_end;
            const std::vector<double>& active =
                info.drift_active ? profile.drift_vec : profile.long_vec;
            double affinity = 0.0;
            for (int a = 0; a < cfg.n_aspects; ++a)
                affinity += active[a] * truth.items[info.item][a];
            info.affinity = affinity;
            truth.reviews.push_back(info);
        }
    }

    // standardize affinities so the sigmoid spreads ratings over the scale
    double mean = 0.0;
    for (const auto& r : truth.reviews) mean += r.affinity;
    mean /= double(truth.reviews.size());
    double var = 0.0;
    for (const auto& r : truth.reviews) var += (r.affinity - mean) * (r.affinity - mean);
    double sd = std::sqrt(var / double(truth.reviews.size()));
    for (auto& r : truth.reviews) r.affinity = sd > 0.0 ? (r.affinity - mean) / sd : 0.0;

    std::sort(truth.reviews.begin(), truth.reviews.end(), [](const auto& a, const auto& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        if (a.user != b.user) return a.user < b.user;
        return a.item < b.item;
    });

    // second pass: ratings and dependency triples
    static const char* kPositive[] = {"great", "solid", "superb"};
    static const char* kNegative[] = {"poor", "weak", "lacking"};
    Rng noise = named_stream(cfg.seed, "synth.noise");
    Rng mention_rng = named_stream(cfg.seed, "synth.mentions");
    for (const auto& info : truth.reviews) {
        const UserProfile& profile = truth.users[info.user];
        const std::vector<double>& active =
            info.drift_active ? profile.drift_vec : profile.long_vec;
        double rating = 1.0 + 4.0 / (1.0 + std::exp(-info.affinity));
        if (cfg.noise_sd > 0.0) rating += noise.normal(0.0, cfg.noise_sd);
        rating = std::clamp(rating, 1.0, 5.0);

        std::vector<double> weights(cfg.n_aspects);
        for (int a = 0; a < cfg.n_aspects; ++a)
            weights[a] = active[a] + 0.1 * truth.items[info.item][a];
        int n_mentions = std::min(2, cfg.n_aspects);
        std::vector<DependencyTriple> triples;
        std::vector<double> w = weights;
        for (int m = 0; m < n_mentions; ++m) {
            int aspect = detail::weighted_pick(mention_rng, w);
            w[aspect] = 0.0;
            const char* opinion = rating >= 3.0 ? kPositive[mention_rng.uniform_int(3)]
                                                : kNegative[mention_rng.uniform_int(3)];
            triples.push_back(DependencyTriple{Relation::amod,
                                               "aspect" + std::to_string(aspect), opinion});
        }

        RawReview review;
        review.user_id = "u" + std::to_string(info.user);
        review.item_id = "i" + std::to_string(info.item);
        review.rating = rating;
        review.timestamp = info.timestamp;
        review.triples = std::move(triples);
        out.reviews.push_back(std::move(review));
    }
    return out;
}

inline void write_reviews_jsonl(const std::string& path, const std::vector<RawReview>& reviews) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write reviews: " + path);
    for (const auto& r : reviews) {
        nlohmann::json j = {{"user", r.user_id},
                            {"item", r.item_id},
                            {"rating", r.rating},
                            {"ts", r.timestamp}};
        if (r.text) j["text"] = *r.text;
        if (r.triples) {
            nlohmann::json triples = nlohmann::json::array();
            for (const auto& t : *r.triples)
                triples.push_back({to_string(t.relation), t.head, t.dependent});
            j["triples"] = std::move(triples);
        }
        out << j.dump() << "\n";
    }
}

inline nlohmann::json truth_to_json(const SynthTruth& truth) {
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : truth.users)
        users.push_back({{"long", u.long_vec}, {"drift", u.drift_vec}, {"drifted", u.drifted}});
    nlohmann::json reviews = nlohmann::json::array();
    for (const auto& r : truth.reviews)
        reviews.push_back({{"user", r.user},
                           {"item", r.item},
                           {"ts", r.timestamp},
                           {"drift_active", r.drift_active},
                           {"affinity", r.affinity}});
    return nlohmann::json{{"users", users},
                          {"items", truth.items},
                          {"span", {{"start", truth.span_start}, {"end", truth.span_end}}},
                          {"window", {{"start", truth.window_start}, {"end", truth.window_end}}},
                          {"reviews", reviews}};
}

}  // namespace lsa
