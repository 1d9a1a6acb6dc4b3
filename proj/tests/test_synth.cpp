#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "lsa/corpus.hpp"
#include "lsa/synth.hpp"

using namespace lsa;

namespace {

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (size_t k = 0; k < idx.size(); ++k) r[idx[k]] = double(k);
        return r;
    };
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= double(rx.size());
    my /= double(ry.size());
    double num = 0, dx = 0, dy = 0;
    for (size_t i = 0; i < rx.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    return dx > 0 && dy > 0 ? num / std::sqrt(dx * dy) : 0.0;
}

}  // namespace

TEST_CASE("generated corpus is deterministic under a fixed seed") {
    SynthConfig cfg;
    cfg.n_users = 12;
    cfg.n_items = 8;
    cfg.n_aspects = 10;
    cfg.interactions_per_user = 6;
    cfg.seed = 42;
    SynthOutput a = generate(cfg);
    SynthOutput b = generate(cfg);
    REQUIRE(a.reviews.size() == b.reviews.size());
    for (size_t i = 0; i < a.reviews.size(); ++i) {
        CHECK(a.reviews[i].user_id == b.reviews[i].user_id);
        CHECK(a.reviews[i].item_id == b.reviews[i].item_id);
        CHECK(a.reviews[i].rating == b.reviews[i].rating);
        CHECK(a.reviews[i].timestamp == b.reviews[i].timestamp);
    }
    CHECK(a.reviews.size() == size_t(cfg.n_users) * cfg.interactions_per_user);
}

TEST_CASE("ratings stay in [1,5] and timestamps inside the two-year span") {
    SynthConfig cfg;
    cfg.n_users = 30;
    cfg.n_items = 10;
    cfg.n_aspects = 12;
    cfg.interactions_per_user = 10;
    cfg.noise_sd = 1.0;  // aggressive noise still clamps
    cfg.seed = 7;
    SynthOutput out = generate(cfg);
    for (const auto& r : out.reviews) {
        CHECK(r.rating >= 1.0);
        CHECK(r.rating <= 5.0);
        CHECK(r.timestamp >= out.truth.span_start);
        CHECK(r.timestamp <= out.truth.span_end);
    }
}

TEST_CASE("noise-free, drift-free users rate an item identically at any time") {
    SynthConfig cfg;
    cfg.n_users = 10;
    cfg.n_items = 5;
    cfg.n_aspects = 8;
    cfg.interactions_per_user = 12;
    cfg.drift_fraction = 0.0;
    cfg.noise_sd = 0.0;
    cfg.seed = 19;
    SynthOutput out = generate(cfg);
    std::map<std::pair<std::string, std::string>, double> seen;
    for (const auto& r : out.reviews) {
        auto key = std::make_pair(r.user_id, r.item_id);
        auto it = seen.find(key);
        if (it == seen.end())
            seen.emplace(key, r.rating);
        else
            CHECK(it->second == r.rating);
    }
}

TEST_CASE("with full drift, in-window ratings follow the drifted vectors") {
    SynthConfig cfg;
    cfg.n_users = 60;
    cfg.n_items = 30;
    cfg.n_aspects = 20;
    cfg.interactions_per_user = 12;
    cfg.drift_fraction = 1.0;
    cfg.drift_window_days = 30;
    cfg.noise_sd = 0.0;
    cfg.seed = 23;
    SynthOutput out = generate(cfg);

    std::vector<double> ratings, drift_affinity, long_affinity;
    for (size_t i = 0; i < out.truth.reviews.size(); ++i) {
        const SynthReviewInfo& info = out.truth.reviews[i];
        if (!info.drift_active) continue;
        const UserProfile& u = out.truth.users[info.user];
        const std::vector<double>& item = out.truth.items[info.item];
        double da = 0.0, la = 0.0;
        for (size_t a = 0; a < item.size(); ++a) {
            da += u.drift_vec[a] * item[a];
            la += u.long_vec[a] * item[a];
        }
        ratings.push_back(out.reviews[i].rating);
        drift_affinity.push_back(da);
        long_affinity.push_back(la);
    }
    REQUIRE(ratings.size() > 50);
    double corr_drift = spearman(ratings, drift_affinity);
    double corr_long = spearman(ratings, long_affinity);
    CHECK(corr_drift > 0.5);
    CHECK(corr_drift > corr_long + 0.2);
}

TEST_CASE("every drifted user gets a replacement vector, fraction respected") {
    SynthConfig cfg;
    cfg.n_users = 40;
    cfg.n_aspects = 20;
    cfg.drift_fraction = 0.5;
    cfg.seed = 29;
    SynthOutput out = generate(cfg);
    int drifted = 0;
    for (const auto& u : out.truth.users) {
        if (u.drifted) {
            ++drifted;
            REQUIRE(!u.drift_vec.empty());
            // drift support is disjoint from the long-term support
            for (size_t a = 0; a < u.long_vec.size(); ++a)
                CHECK(u.long_vec[a] * u.drift_vec[a] == 0.0);
        }
    }
    CHECK(drifted == 20);
}

TEST_CASE("generated triples pass extraction with full recall of intended aspects") {
    SynthConfig cfg;
    cfg.n_users = 15;
    cfg.n_items = 8;
    cfg.n_aspects = 10;
    cfg.interactions_per_user = 6;
    cfg.seed = 31;
    SynthOutput out = generate(cfg);
    for (const auto& review : out.reviews) {
        REQUIRE(review.triples.has_value());
        auto mentions = extract_aspect_mentions(*review.triples);
        std::set<std::string> extracted;
        for (const auto& m : mentions) extracted.insert(m.aspect);
        std::set<std::string> intended;
        for (const auto& t : *review.triples) intended.insert(t.head);
        CHECK(extracted == intended);
    }
}

TEST_CASE("jsonl round trip preserves the corpus") {
    SynthConfig cfg;
    cfg.n_users = 6;
    cfg.n_items = 4;
    cfg.n_aspects = 6;
    cfg.interactions_per_user = 3;
    cfg.seed = 37;
    SynthOutput out = generate(cfg);
    std::string path = "synth_roundtrip_test.jsonl";
    write_reviews_jsonl(path, out.reviews);
    ParseResult parsed = parse_review_file(path, ReviewFormat::jsonl);
    CHECK(parsed.errors.empty());
    REQUIRE(parsed.reviews.size() == out.reviews.size());
    for (size_t i = 0; i < parsed.reviews.size(); ++i) {
        CHECK(parsed.reviews[i].user_id == out.reviews[i].user_id);
        CHECK(parsed.reviews[i].rating == out.reviews[i].rating);
        CHECK(parsed.reviews[i].timestamp == out.reviews[i].timestamp);
        REQUIRE(parsed.reviews[i].triples.has_value());
        CHECK(parsed.reviews[i].triples->size() == out.reviews[i].triples->size());
    }
    std::remove(path.c_str());

    nlohmann::json truth = truth_to_json(out.truth);
    CHECK(truth["users"].size() == 6);
    CHECK(truth["reviews"].size() == out.reviews.size());
}

TEST_CASE("invalid synth configs are rejected") {
    SynthConfig cfg;
    cfg.n_users = 0;
    CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
    SynthConfig cfg2;
    cfg2.drift_fraction = 1.5;
    CHECK_THROWS_AS(generate(cfg2), std::invalid_argument);
}
