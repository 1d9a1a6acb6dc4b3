#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lsa {

enum class Relation { amod, dobj, nsubj, acomp, other };

inline Relation relation_from_string(const std::string& s) {
    if (s == "amod") return Relation::amod;
    if (s == "dobj") return Relation::dobj;
    if (s == "nsubj") return Relation::nsubj;
    if (s == "acomp") return Relation::acomp;
    return Relation::other;
}

inline const char* to_string(Relation r) {
    switch (r) {
        case Relation::amod: return "amod";
        case Relation::dobj: return "dobj";
        case Relation::nsubj: return "nsubj";
        case Relation::acomp: return "acomp";
        default: return "other";
    }
}

struct DependencyTriple {
    Relation relation = Relation::other;
    std::string head;       // lowercase token
    std::string dependent;  // lowercase token
};

struct RawReview {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;    // in [1,5]
    int64_t timestamp = 0;  // seconds since epoch
    std::optional<std::string> text;
    std::optional<std::vector<DependencyTriple>> triples;
};

enum class Rule { amod, dobj, nsubj_acomp };

inline const char* to_string(Rule r) {
    switch (r) {
        case Rule::amod: return "amod";
        case Rule::dobj: return "dobj";
        default: return "nsubj_acomp";
    }
}

struct AspectMention {
    std::string aspect;
    std::string opinion;
    Rule rule = Rule::amod;
    int review_index = 0;

    friend bool operator==(const AspectMention& a, const AspectMention& b) {
        return a.aspect == b.aspect && a.opinion == b.opinion && a.rule == b.rule &&
               a.review_index == b.review_index;
    }
};

struct AspectVocabulary {
    std::unordered_map<std::string, int> aspect_to_id;
    std::vector<std::string> id_to_aspect;      // id -> aspect term
    std::vector<int> frequencies;               // id -> corpus count
    int min_freq = 2;

    int size() const { return int(id_to_aspect.size()); }
    std::optional<int> find(const std::string& aspect) const {
        auto it = aspect_to_id.find(aspect);
        if (it == aspect_to_id.end()) return std::nullopt;
        return it->second;
    }
};

enum class NodeKind { user, item, aspect };

struct NodeId {
    NodeKind kind = NodeKind::user;
    int index = 0;
};

// Dense id assignment in first-appearance order; deterministic for a fixed
// input file.
struct IdMap {
    std::unordered_map<std::string, int> to_index;
    std::vector<std::string> names;

    int add(const std::string& name) {
        auto it = to_index.find(name);
        if (it != to_index.end()) return it->second;
        int id = int(names.size());
        to_index.emplace(name, id);
        names.push_back(name);
        return id;
    }
    std::optional<int> find(const std::string& name) const {
        auto it = to_index.find(name);
        if (it == to_index.end()) return std::nullopt;
        return it->second;
    }
    int size() const { return int(names.size()); }
};

}  // namespace lsa
