#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lsa {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& key)
        : std::runtime_error("unknown or invalid config key: " + key), key(key) {}
    std::string key;
};

struct TrainConfig {
    // selection
    int K = 20;
    int N = 10;
    double T = 180.0;        // day window for Recent-N
    int rank_full_vocab = 0;  // Important-K over all aspects instead of neighbors
    // interest_encoders
    int d = 64;
    int L = 2;
    int H = 2;
    // predictor
    double lambda = 1.0;
    int k_fm = 8;
    int max_union = 128;
    // training
    int batch_size = 16;
    double learning_rate = 1e-3;
    int max_epochs = 30;
    int patience = 3;
    uint64_t seed = 42;
    // corpus
    int min_freq = 2;
    // evaluation
    double test_ratio = 0.2;
};

struct SynthConfig {
    int n_users = 200;
    int n_items = 100;
    int n_aspects = 30;
    int interactions_per_user = 20;
    double drift_fraction = 0.5;
    int drift_window_days = 30;
    double noise_sd = 0.25;
    uint64_t seed = 7;
};

struct AppConfig {
    TrainConfig train;
    SynthConfig synth;
};

namespace detail {

using FieldPtr = std::variant<int*, double*, uint64_t*>;

struct Binding {
    const char* section;
    const char* key;
    FieldPtr field;
};

inline std::vector<Binding> bindings(AppConfig& c) {
    return {
        {"corpus", "min_freq", &c.train.min_freq},
        {"selection", "K", &c.train.K},
        {"selection", "N", &c.train.N},
        {"selection", "T", &c.train.T},
        {"selection", "rank_full_vocab", &c.train.rank_full_vocab},
        {"interest_encoders", "d", &c.train.d},
        {"interest_encoders", "L", &c.train.L},
        {"interest_encoders", "H", &c.train.H},
        {"predictor", "lambda", &c.train.lambda},
        {"predictor", "k_fm", &c.train.k_fm},
        {"predictor", "max_union", &c.train.max_union},
        {"training", "batch_size", &c.train.batch_size},
        {"training", "learning_rate", &c.train.learning_rate},
        {"training", "max_epochs", &c.train.max_epochs},
        {"training", "patience", &c.train.patience},
        {"training", "seed", &c.train.seed},
        {"evaluation", "test_ratio", &c.train.test_ratio},
        {"synth", "n_users", &c.synth.n_users},
        {"synth", "n_items", &c.synth.n_items},
        {"synth", "n_aspects", &c.synth.n_aspects},
        {"synth", "interactions_per_user", &c.synth.interactions_per_user},
        {"synth", "drift_fraction", &c.synth.drift_fraction},
        {"synth", "drift_window_days", &c.synth.drift_window_days},
        {"synth", "noise_sd", &c.synth.noise_sd},
        {"synth", "seed", &c.synth.seed},
    };
}

inline void assign(const Binding& b, const std::string& raw) {
    try {
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, int>)
                    *p = std::stoi(raw);
                else if constexpr (std::is_same_v<T, double>)
                    *p = std::stod(raw);
                else
                    *p = std::stoull(raw);
            },
            b.field);
    } catch (const std::exception&) {
        throw ConfigError(std::string(b.section) + "." + b.key + " = " + raw);
    }
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// TOML-style subset: [section] headers, `key = value` lines, # comments.
inline void load_config_stream(std::istream& in, AppConfig& cfg) {
    auto binds = detail::bindings(cfg);
    std::string line, section;
    while (std::getline(in, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line);
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() >= 2)
            value = value.substr(1, value.size() - 2);
        bool found = false;
        for (const auto& b : binds) {
            if (section == b.section && key == b.key) {
                detail::assign(b, value);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError(section.empty() ? key : section + "." + key);
    }
}

inline void load_config_file(const std::string& path, AppConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    load_config_stream(in, cfg);
}

// Flat `--key value` override. A bare key applies to every section carrying
// it (so `--seed` seeds both training and synth); `section.key` targets one.
inline void set_config_key(AppConfig& cfg, const std::string& key, const std::string& value) {
    auto binds = detail::bindings(cfg);
    int matched = 0;
    for (const auto& b : binds) {
        if (key == b.key || key == std::string(b.section) + "." + b.key) {
            detail::assign(b, value);
            ++matched;
        }
    }
    if (matched == 0) throw ConfigError(key);
}

inline nlohmann::json config_to_json(const AppConfig& cfg) {
    nlohmann::json j;
    auto binds = detail::bindings(const_cast<AppConfig&>(cfg));
    for (const auto& b : binds) {
        std::visit([&](auto* p) { j[b.section][b.key] = *p; }, b.field);
    }
    return j;
}

// (section.key, current, default) for every field differing from defaults.
inline std::vector<std::array<std::string, 3>> config_diff_vs_defaults(const AppConfig& cfg) {
    AppConfig defaults;
    auto cur = detail::bindings(const_cast<AppConfig&>(cfg));
    auto def = detail::bindings(defaults);
    std::vector<std::array<std::string, 3>> out;
    for (size_t i = 0; i < cur.size(); ++i) {
        auto fmt = [](const detail::FieldPtr& f) {
            return std::visit(
                [](auto* p) {
                    std::ostringstream os;
                    os << *p;
                    return os.str();
                },
                f);
        };
        std::string a = fmt(cur[i].field), b = fmt(def[i].field);
        if (a != b)
            out.push_back({std::string(cur[i].section) + "." + cur[i].key, a, b});
    }
    return out;
}

}  // namespace lsa
