#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lsa/types.hpp"

// Review ingestion and rule-based aspect-opinion extraction. The extractor
// consumes pre-parsed dependency triples; no NLP parser is bundled. Three
// patterns fire:
//   amod(noun, adj)              -> aspect = head,      opinion = dependent
//   dobj(verb, noun)             -> aspect = dependent,  opinion = head
//   nsubj(H, noun) + acomp(H, adj), same head H
//                                -> aspect = nsubj.dep, opinion = acomp.dep

namespace lsa {

enum class ReviewFormat { jsonl, csv };

struct ParseResult {
    std::vector<RawReview> reviews;
    std::vector<std::string> errors;  // one entry per rejected record, names the line
    size_t rejected_ratings = 0;      // subset of errors: rating outside [1,5]
};

inline std::string to_lower(std::string s) {
    for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Plural suffix stripping for aspect nouns. Table-driven: (suffix, strip).
inline std::string lemmatize_noun(std::string token) {
    token = to_lower(std::move(token));
    static const std::array<std::pair<const char*, int>, 6> suffixes = {{
        {"ches", 2}, {"shes", 2}, {"sses", 2}, {"xes", 2}, {"zes", 2}, {"oes", 2},
    }};
    auto ends_with = [&](const char* suf) {
        size_t n = std::strlen(suf);
        return token.size() > n && token.compare(token.size() - n, n, suf) == 0;
    };
    for (const auto& [suf, strip] : suffixes) {
        if (ends_with(suf)) {
            token.resize(token.size() - strip);
            return token;
        }
    }
    if (token.size() > 3 && token.back() == 's' && !ends_with("ss") && !ends_with("us") &&
        !ends_with("is"))
        token.pop_back();
    return token;
}

namespace detail {

inline bool parse_jsonl_record(const std::string& line, RawReview& out, std::string& err) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        err = "invalid JSON";
        return false;
    }
    for (const char* field : {"user", "item", "rating", "ts"}) {
        if (!j.contains(field)) {
            err = std::string("missing field '") + field + "'";
            return false;
        }
    }
    if (!j["rating"].is_number()) {
        err = "rating is not a number";
        return false;
    }
    out.user_id = j["user"].get<std::string>();
    out.item_id = j["item"].get<std::string>();
    out.rating = j["rating"].get<double>();
    out.timestamp = j["ts"].get<int64_t>();
    if (j.contains("text") && j["text"].is_string()) out.text = j["text"].get<std::string>();
    if (j.contains("triples") && j["triples"].is_array()) {
        std::vector<DependencyTriple> triples;
        for (const auto& t : j["triples"]) {
            if (!t.is_array() || t.size() != 3) {
                err = "triple is not a [relation, head, dependent] array";
                return false;
            }
            DependencyTriple dt;
            dt.relation = relation_from_string(t[0].get<std::string>());
            dt.head = to_lower(t[1].get<std::string>());
            dt.dependent = to_lower(t[2].get<std::string>());
            if (dt.head.empty() || dt.dependent.empty()) {
                err = "empty token in triple";
                return false;
            }
            triples.push_back(std::move(dt));
        }
        out.triples = std::move(triples);
    }
    if (!out.text && !out.triples) {
        err = "record has neither text nor triples";
        return false;
    }
    return true;
}

inline bool parse_csv_record(const std::string& line, RawReview& out, std::string& err) {
    std::stringstream ss(line);
    std::string user, item, rating, ts;
    if (!std::getline(ss, user, ',') || !std::getline(ss, item, ',') ||
        !std::getline(ss, rating, ',') || !std::getline(ss, ts, ',')) {
        err = "expected user,item,rating,ts";
        return false;
    }
    try {
        out.user_id = user;
        out.item_id = item;
        out.rating = std::stod(rating);
        out.timestamp = std::stoll(ts);
    } catch (const std::exception&) {
        err = "non-numeric rating or timestamp";
        return false;
    }
    out.text = std::string{};  // csv carries no review body
    return true;
}

}  // namespace detail

inline ParseResult parse_reviews(std::istream& in, ReviewFormat format) {
    ParseResult result;
    std::string line;
    int line_no = 0;
    bool csv_header_checked = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (format == ReviewFormat::csv && !csv_header_checked) {
            csv_header_checked = true;
            if (line.rfind("user,", 0) == 0) continue;  // optional header row
        }
        RawReview review;
        std::string err;
        bool ok = format == ReviewFormat::jsonl ? detail::parse_jsonl_record(line, review, err)
                                                : detail::parse_csv_record(line, review, err);
        if (!ok) {
            result.errors.push_back("line " + std::to_string(line_no) + ": " + err);
            continue;
        }
        if (review.rating < 1.0 || review.rating > 5.0) {
            result.errors.push_back("line " + std::to_string(line_no) + ": rating " +
                                    std::to_string(review.rating) + " outside [1,5]");
            ++result.rejected_ratings;
            continue;
        }
        if (review.timestamp < 0) {
            result.errors.push_back("line " + std::to_string(line_no) + ": negative timestamp");
            continue;
        }
        result.reviews.push_back(std::move(review));
    }
    return result;
}

inline ParseResult parse_review_file(const std::string& path, ReviewFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open review file: " + path);
    return parse_reviews(in, format);
}

// Applies the three dependency rules to one review's triples. Output is
// deduplicated by (aspect, opinion, rule) and sorted, so the result does not
// depend on triple order.
inline std::vector<AspectMention> extract_aspect_mentions(
    const std::vector<DependencyTriple>& triples, int review_index = 0) {
    std::set<std::tuple<std::string, std::string, Rule>> seen;
    auto emit = [&](std::string aspect, std::string opinion, Rule rule) {
        aspect = lemmatize_noun(std::move(aspect));
        if (aspect.empty() || opinion.empty()) return;
        seen.emplace(std::move(aspect), to_lower(std::move(opinion)), rule);
    };

    for (const auto& t : triples) {
        if (t.relation == Relation::amod) {
            emit(t.head, t.dependent, Rule::amod);
        } else if (t.relation == Relation::dobj) {
            emit(t.dependent, t.head, Rule::dobj);
        }
    }
    // nsubj + acomp sharing the same head, cross-paired
    for (const auto& ns : triples) {
        if (ns.relation != Relation::nsubj) continue;
        for (const auto& ac : triples) {
            if (ac.relation != Relation::acomp || ac.head != ns.head) continue;
            emit(ns.dependent, ac.dependent, Rule::nsubj_acomp);
        }
    }

    std::vector<AspectMention> mentions;
    mentions.reserve(seen.size());
    for (const auto& [aspect, opinion, rule] : seen)
        mentions.push_back(AspectMention{aspect, opinion, rule, review_index});
    return mentions;
}

inline std::vector<std::vector<AspectMention>> extract_corpus_mentions(
    const std::vector<RawReview>& reviews) {
    std::vector<std::vector<AspectMention>> per_review(reviews.size());
    for (size_t i = 0; i < reviews.size(); ++i)
        if (reviews[i].triples)
            per_review[i] = extract_aspect_mentions(*reviews[i].triples, int(i));
    return per_review;
}

// Retains aspects with corpus frequency >= min_freq. Ids are assigned by
// descending frequency with lexicographic tie-break, so id 0 is the most
// frequent aspect.
inline AspectVocabulary build_vocabulary(const std::vector<std::vector<AspectMention>>& per_review,
                                         int min_freq) {
    if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
    std::map<std::string, int> counts;
    for (const auto& mentions : per_review)
        for (const auto& m : mentions) ++counts[m.aspect];

    std::vector<std::pair<std::string, int>> kept;
    for (const auto& [aspect, count] : counts)
        if (count >= min_freq) kept.emplace_back(aspect, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    AspectVocabulary vocab;
    vocab.min_freq = min_freq;
    for (const auto& [aspect, count] : kept) {
        vocab.aspect_to_id.emplace(aspect, vocab.size());
        vocab.id_to_aspect.push_back(aspect);
        vocab.frequencies.push_back(count);
    }
    return vocab;
}

}  // namespace lsa
