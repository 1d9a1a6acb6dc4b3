#include <catch2/catch_amalgamated.hpp>

#include "lsa/corpus.hpp"
#include "lsa/graph.hpp"

using namespace lsa;

namespace {

RawReview review(const char* user, const char* item, double rating, int64_t ts,
                 std::vector<DependencyTriple> triples) {
    RawReview r;
    r.user_id = user;
    r.item_id = item;
    r.rating = rating;
    r.timestamp = ts;
    r.triples = std::move(triples);
    return r;
}

DependencyTriple amod(const char* head, const char* dep) {
    return DependencyTriple{Relation::amod, head, dep};
}

struct Fixture {
    std::vector<RawReview> reviews;
    IdMap users, items;
    AspectVocabulary vocab;
    AspectGraph graph;

    explicit Fixture(std::vector<RawReview> rs, int min_freq = 1) : reviews(std::move(rs)) {
        for (const auto& r : reviews) {
            users.add(r.user_id);
            items.add(r.item_id);
        }
        auto mentions = extract_corpus_mentions(reviews);
        vocab = build_vocabulary(mentions, min_freq);
        graph = build_graph(reviews, mentions, vocab, users, items);
    }
};

}  // namespace

TEST_CASE("one review yields distinct-aspect weights and a rating edge") {
    // "quality" mentioned twice in one review still counts once
    Fixture f({review("u", "i", 4.0, 10,
                      {amod("quality", "great"), amod("quality", "superb")})});
    int quality = *f.vocab.find("quality");
    NodeId user{NodeKind::user, 0}, item{NodeKind::item, 0};
    CHECK(f.graph.edge_weight(user, quality) == 1);
    CHECK(f.graph.edge_weight(item, quality) == 1);
    REQUIRE(f.graph.ratings().count({0, 0}) == 1);
    CHECK(f.graph.ratings().at({0, 0})[0] == std::make_pair(4.0, int64_t(10)));
    CHECK(f.graph.timestamps(user, quality) == std::vector<int64_t>{10});
}

TEST_CASE("zero reviews build an empty graph") {
    Fixture f({});
    CHECK(f.graph.n_users() == 0);
    CHECK(f.graph.n_items() == 0);
    CHECK(f.graph.n_aspects() == 0);
}

TEST_CASE("same user across two items accumulates user-side weight") {
    Fixture f({review("u", "i1", 5.0, 10, {amod("quality", "great")}),
               review("u", "i2", 3.0, 20, {amod("quality", "fine")})});
    int quality = *f.vocab.find("quality");
    CHECK(f.graph.edge_weight(NodeId{NodeKind::user, 0}, quality) == 2);
    CHECK(f.graph.edge_weight(NodeId{NodeKind::item, 0}, quality) == 1);
    CHECK(f.graph.edge_weight(NodeId{NodeKind::item, 1}, quality) == 1);
    CHECK(f.graph.timestamps(NodeId{NodeKind::user, 0}, quality) ==
          std::vector<int64_t>({10, 20}));
}

TEST_CASE("absent edges weigh zero and unknown aspects are skipped") {
    Fixture f({review("u", "i", 4.0, 10, {amod("quality", "great"), amod("cord", "frayed")})},
              /*min_freq=*/2);
    // min_freq 2 drops both aspects -> no aspect edges at all
    CHECK(f.vocab.size() == 0);
    CHECK(f.graph.edge_weight(NodeId{NodeKind::user, 0}, 0) == 0);
    CHECK(f.graph.neighbor_aspects(NodeId{NodeKind::user, 0}).empty());
}

TEST_CASE("neighbor_aspects lists exactly the w >= 1 aspects, ascending") {
    Fixture f({review("u", "i", 4.0, 10, {amod("quality", "great"), amod("cord", "long")}),
               review("v", "i", 2.0, 20, {amod("sound", "poor")})});
    NodeId item{NodeKind::item, 0};
    auto aspects = f.graph.neighbor_aspects(item);
    REQUIRE(aspects.size() == 3);
    CHECK(std::is_sorted(aspects.begin(), aspects.end()));
    CHECK(f.graph.neighbor_aspects(NodeId{NodeKind::user, 1}) ==
          std::vector<int>{*f.vocab.find("sound")});
    CHECK_THROWS_AS(f.graph.neighbor_aspects(NodeId{NodeKind::aspect, 0}),
                    std::invalid_argument);
}

TEST_CASE("user-side weight sum equals distinct (review, aspect) pairs") {
    Fixture f({review("a", "x", 4.0, 1, {amod("quality", "great"), amod("sound", "clear")}),
               review("a", "y", 3.0, 2, {amod("quality", "ok")}),
               review("b", "x", 5.0, 3, {amod("cord", "long"), amod("cord", "sturdy")})});
    int total_user_weight = 0;
    for (int u = 0; u < f.graph.n_users(); ++u)
        for (int a : f.graph.neighbor_aspects(NodeId{NodeKind::user, u}))
            total_user_weight += f.graph.edge_weight(NodeId{NodeKind::user, u}, a);
    CHECK(total_user_weight == 4);  // (a,quality)+(a,sound)+(a,quality)+(b,cord)

    int total_item_weight = 0;
    for (int i = 0; i < f.graph.n_items(); ++i)
        for (int a : f.graph.neighbor_aspects(NodeId{NodeKind::item, i}))
            total_item_weight += f.graph.edge_weight(NodeId{NodeKind::item, i}, a);
    CHECK(total_item_weight == 4);
}

TEST_CASE("history flattens (aspect, timestamp) pairs") {
    Fixture f({review("u", "i1", 4.0, 30, {amod("quality", "great")}),
               review("u", "i2", 3.0, 10, {amod("quality", "ok"), amod("cord", "long")})});
    InteractionHistory h = f.graph.history(NodeId{NodeKind::user, 0});
    REQUIRE(h.entries.size() == 3);
    int quality = *f.vocab.find("quality");
    int cord = *f.vocab.find("cord");
    int quality_count = 0, cord_count = 0;
    for (auto& [aspect, t] : h.entries) {
        if (aspect == quality) ++quality_count;
        if (aspect == cord) ++cord_count;
    }
    CHECK(quality_count == 2);
    CHECK(cord_count == 1);
}

TEST_CASE("rebuilding from the same inputs is identical") {
    auto make = [] {
        return Fixture({review("u", "i", 4.0, 10, {amod("quality", "great")}),
                        review("v", "i", 2.0, 5, {amod("sound", "poor")})});
    };
    Fixture a = make();
    Fixture b = make();
    for (int u = 0; u < a.graph.n_users(); ++u) {
        NodeId node{NodeKind::user, u};
        CHECK(a.graph.neighbor_aspects(node) == b.graph.neighbor_aspects(node));
        for (int asp : a.graph.neighbor_aspects(node))
            CHECK(a.graph.timestamps(node, asp) == b.graph.timestamps(node, asp));
    }
}

TEST_CASE("graph snapshot serializes to json") {
    Fixture f({review("u", "i", 4.0, 10, {amod("quality", "great")})});
    std::string path = "graph_snapshot_test.json";
    f.graph.save_json(path, f.vocab, f.users, f.items);
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    CHECK(j["version"] == 1);
    CHECK(j["users"].size() == 1);
    CHECK(j["edges"].size() == 2);  // user side + item side
    std::remove(path.c_str());
}
