#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsa/evaluation.hpp"
#include "lsa/manifest.hpp"
#include "lsa/report.hpp"
#include "lsa/synth.hpp"

// Command-line front door. Every run writes its artifacts plus one
// manifest.json into the --out directory. Exit codes: 0 success, 2 bad
// config key or usage, 3 missing input.

namespace lsa::cli {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitMissingInput = 3;

struct MissingInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<RawReview> load_reviews(const std::string& path) {
    if (!fs::exists(path)) throw MissingInput("input file not found: " + path);
    ReviewFormat format =
        path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? ReviewFormat::csv
                                                                   : ReviewFormat::jsonl;
    ParseResult parsed = parse_review_file(path, format);
    if (!parsed.errors.empty()) {
        std::cerr << parsed.errors.size() << " record(s) rejected";
        if (parsed.rejected_ratings > 0)
            std::cerr << " (" << parsed.rejected_ratings << " with out-of-range ratings)";
        std::cerr << "\n";
        for (size_t i = 0; i < parsed.errors.size() && i < 10; ++i)
            std::cerr << "  " << parsed.errors[i] << "\n";
    }
    return std::move(parsed.reviews);
}

// Registers --config plus one --<key> override per config field; returns the
// storage the caller applies after parsing.
struct ConfigCli {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;  // key -> raw value

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "TOML-style config file");
        AppConfig probe;
        std::set<std::string> seen;
        for (const auto& b : lsa::detail::bindings(probe)) {
            std::string key = b.key;
            if (!seen.insert(key).second) continue;
            auto* opt = cmd->add_option_function<std::string>(
                "--" + key, [this, key](const std::string& v) { overrides.emplace_back(key, v); });
            opt->type_name("VALUE");
        }
    }

    AppConfig resolve() const {
        AppConfig cfg;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw MissingInput("config not found: " + config_path);
            load_config_file(config_path, cfg);
        }
        for (const auto& [key, value] : overrides) set_config_key(cfg, key, value);
        return cfg;
    }
};

inline void ensure_out(const std::string& out) { fs::create_directories(out); }

inline void write_metrics(const std::string& out_dir, const MetricsReport& report) {
    std::ofstream json_out(fs::path(out_dir) / "metrics.json");
    json_out << report.to_json().dump(2) << "\n";
    std::ofstream txt_out(fs::path(out_dir) / "metrics.txt");
    txt_out << render_metric_table({"value"}, {{"mse", {report.mse}},
                                               {"mae", {report.mae}},
                                               {"ndcg_at_10", {report.ndcg_at_10}}});
}

inline void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows,
                                  const IdMap& users, const IdMap& items) {
    std::ofstream out(path);
    out << "user,item,true_rating,predicted_rating,timestamp\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << (r.user ? users.names[*r.user] : "?") << ","
            << (r.item ? items.names[*r.item] : "?") << "," << r.true_rating << ","
            << r.predicted << "," << r.timestamp << "\n";
    }
}

inline nlohmann::json sequence_to_json(const InterestSequence& seq) {
    nlohmann::json j;
    j["horizon"] = seq.horizon == Horizon::long_term ? "long" : "short";
    j["anchor_kind"] = seq.anchor.kind == NodeKind::user ? "user" : "item";
    j["anchor"] = seq.anchor.index;
    nlohmann::json tokens = nlohmann::json::array();
    for (int k = 0; k < seq.slot_count(); ++k) {
        if (!seq.valid[k]) continue;
        nlohmann::json tok = {{"aspect", seq.aspect_ids[k]}};
        if (seq.horizon == Horizon::short_term) tok["ts"] = seq.timestamps[k];
        tokens.push_back(std::move(tok));
    }
    j["tokens"] = std::move(tokens);
    if (seq.horizon == Horizon::short_term) j["t_curr"] = seq.t_curr;
    return j;
}

inline void dump_sequences(const std::string& path, const SplitData& data,
                           const ModelParams& params, const TrainConfig& cfg, size_t limit) {
    LongSeqCache cache = LongSeqCache::build(data.graph, params, cfg.K);
    nlohmann::json out = nlohmann::json::array();
    for (size_t i = 0; i < data.train.size() && i < limit; ++i) {
        ExampleInputs in = build_inputs(data.graph, cache, cfg, data.train[i]);
        out.push_back({{"user_long", sequence_to_json(in.user_long)},
                       {"user_short", sequence_to_json(in.user_short)},
                       {"item_long", sequence_to_json(in.item_long)},
                       {"item_short", sequence_to_json(in.item_short)},
                       {"candidates", in.candidates}});
    }
    std::ofstream f(path);
    f << out.dump(2) << "\n";
}

inline int cmd_extract(const std::string& input, const std::string& out_dir, AppConfig cfg) {
    ensure_out(out_dir);
    WallClock clock;
    std::vector<RawReview> reviews = load_reviews(input);
    auto mentions = extract_corpus_mentions(reviews);

    fs::path mentions_path = fs::path(out_dir) / "mentions.jsonl";
    std::ofstream out(mentions_path);
    size_t n_mentions = 0;
    for (const auto& per_review : mentions)
        for (const auto& m : per_review) {
            out << nlohmann::json({{"review_index", m.review_index},
                                   {"aspect", m.aspect},
                                   {"opinion", m.opinion},
                                   {"rule", to_string(m.rule)}})
                       .dump()
                << "\n";
            ++n_mentions;
        }
    out.close();
    std::cout << "extracted " << n_mentions << " mentions from " << reviews.size()
              << " reviews\n";

    RunManifest manifest;
    manifest.command = "extract";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.train.seed;
    manifest.add_input(input);
    manifest.add_artifact(mentions_path.string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_build_graph(const std::string& input, const std::string& out_dir, AppConfig cfg) {
    ensure_out(out_dir);
    WallClock clock;
    std::vector<RawReview> reviews = load_reviews(input);
    IdMap users, items;
    for (const auto& r : reviews) {
        users.add(r.user_id);
        items.add(r.item_id);
    }
    auto mentions = extract_corpus_mentions(reviews);
    AspectVocabulary vocab = build_vocabulary(mentions, cfg.train.min_freq);
    AspectGraph graph = build_graph(reviews, mentions, vocab, users, items);

    fs::path graph_path = fs::path(out_dir) / "graph.json";
    graph.save_json(graph_path.string(), vocab, users, items);
    std::cout << "graph: " << graph.n_users() << " users, " << graph.n_items() << " items, "
              << graph.n_aspects() << " aspects\n";

    RunManifest manifest;
    manifest.command = "build-graph";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.train.seed;
    manifest.add_input(input);
    manifest.add_artifact(graph_path.string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_synth(const std::string& out_dir, AppConfig cfg) {
    ensure_out(out_dir);
    WallClock clock;
    SynthOutput out = generate(cfg.synth);
    fs::path reviews_path = fs::path(out_dir) / "reviews.jsonl";
    fs::path truth_path = fs::path(out_dir) / "truth.json";
    write_reviews_jsonl(reviews_path.string(), out.reviews);
    std::ofstream truth(truth_path);
    truth << truth_to_json(out.truth).dump() << "\n";
    truth.close();
    std::cout << "generated " << out.reviews.size() << " reviews\n";

    RunManifest manifest;
    manifest.command = "synth";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.synth.seed;
    manifest.add_artifact(reviews_path.string());
    manifest.add_artifact(truth_path.string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_train(const std::string& input, const std::string& out_dir, AppConfig cfg,
                     bool dump_seqs) {
    ensure_out(out_dir);
    WallClock clock;
    std::vector<RawReview> reviews = load_reviews(input);
    SplitData data = prepare_split(reviews, cfg.train);

    fs::path log_path = fs::path(out_dir) / "train_log.jsonl";
    std::ofstream log(log_path);
    TrainResult result = train_model(data.train, data.graph, cfg.train, Variant::full, &log);
    log.close();

    fs::path ckpt_path = fs::path(out_dir) / "checkpoint.bin";
    result.params.save(ckpt_path.string());
    std::ofstream cfg_out(fs::path(out_dir) / "config.json");
    cfg_out << config_to_json(cfg).dump(2) << "\n";
    cfg_out.close();
    if (dump_seqs)
        dump_sequences((fs::path(out_dir) / "sequences.json").string(), data, result.params,
                       cfg.train, 20);
    std::cout << "trained " << result.history.size() << " epochs, best val mse "
              << result.best_val_mse << " at epoch " << result.best_epoch << "\n";

    RunManifest manifest;
    manifest.command = "train";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.train.seed;
    manifest.add_input(input);
    manifest.add_artifact(ckpt_path.string());
    manifest.add_artifact(log_path.string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_evaluate(const std::string& input, const std::string& model_dir,
                        const std::string& out_dir, AppConfig cfg) {
    fs::path cfg_path = fs::path(model_dir) / "config.json";
    fs::path ckpt_path = fs::path(model_dir) / "checkpoint.bin";
    if (!fs::exists(cfg_path) || !fs::exists(ckpt_path))
        throw MissingInput("model directory missing config.json or checkpoint.bin: " + model_dir);
    ensure_out(out_dir);
    WallClock clock;

    // the training run's config governs the split and the model shape
    std::ifstream cfg_in(cfg_path);
    nlohmann::json snapshot = nlohmann::json::parse(cfg_in);
    for (auto& [section, keys] : snapshot.items())
        for (auto& [key, value] : keys.items()) {
            std::ostringstream v;
            if (value.is_number_float()) {
                v.precision(17);
                v << value.get<double>();
            } else {
                v << value;
            }
            set_config_key(cfg, section + "." + key, v.str());
        }

    std::vector<RawReview> reviews = load_reviews(input);
    SplitData data = prepare_split(reviews, cfg.train);
    ModelParams params(ModelDims::from_config(cfg.train, data.graph.n_users(),
                                              data.graph.n_items(), data.graph.n_aspects()));
    params.load(ckpt_path.string());

    std::vector<PredictionRow> rows;
    MetricsReport report =
        evaluate_model(params, data.graph, cfg.train, data.test, Variant::full, &rows);
    report.config = config_to_json(cfg);
    write_metrics(out_dir, report);
    write_predictions_csv((fs::path(out_dir) / "predictions.csv").string(), rows, data.users,
                          data.items);
    std::cout << render_metric_table({"value"}, {{"mse", {report.mse}},
                                                 {"mae", {report.mae}},
                                                 {"ndcg_at_10", {report.ndcg_at_10}}});

    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.train.seed;
    manifest.add_input(input);
    manifest.add_input(ckpt_path.string());
    manifest.add_artifact((fs::path(out_dir) / "metrics.json").string());
    manifest.add_artifact((fs::path(out_dir) / "predictions.csv").string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_ablate(const std::string& input, const std::string& variant_name,
                      const std::string& out_dir, AppConfig cfg) {
    ensure_out(out_dir);
    WallClock clock;
    Variant variant = variant_from_string(variant_name);
    std::vector<RawReview> reviews = load_reviews(input);

    fs::path log_path = fs::path(out_dir) / "train_log.jsonl";
    std::ofstream log(log_path);
    PipelineResult result = run_pipeline(reviews, cfg.train, variant, &log);
    log.close();
    result.report.config = config_to_json(cfg);
    write_metrics(out_dir, result.report);
    std::cout << "variant " << result.report.variant << ": mse " << result.report.mse << "\n";

    RunManifest manifest;
    manifest.command = "ablate";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.train.seed;
    manifest.add_input(input);
    manifest.add_artifact((fs::path(out_dir) / "metrics.json").string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_sweep(const std::string& input, const std::string& param,
                     const std::string& values_csv, const std::string& out_dir, AppConfig cfg) {
    ensure_out(out_dir);
    WallClock clock;
    SweepParam sweep_param = sweep_param_from_string(param);
    std::vector<int> values;
    std::stringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) values.push_back(std::stoi(tok));
    std::vector<RawReview> reviews = load_reviews(input);

    auto rows = sweep(sweep_param, values, reviews, cfg.train);
    fs::path csv_path = fs::path(out_dir) / "sweep.csv";
    std::ofstream csv(csv_path);
    csv << param << ",mse\n";
    csv.precision(17);
    for (const auto& [v, mse] : rows) csv << v << "," << mse << "\n";
    csv.close();
    fs::path svg_path = fs::path(out_dir) / "sweep.svg";
    write_sweep_svg(svg_path.string(), param, rows);
    for (const auto& [v, mse] : rows) std::cout << param << "=" << v << " mse=" << mse << "\n";

    RunManifest manifest;
    manifest.command = "sweep";
    manifest.config = config_to_json(cfg);
    manifest.seed = cfg.train.seed;
    manifest.add_input(input);
    manifest.add_artifact(csv_path.string());
    manifest.add_artifact(svg_path.string());
    manifest.wall_time_sec = clock.elapsed();
    manifest.write(out_dir);
    return kExitOk;
}

inline int cmd_report(const std::vector<std::string>& run_dirs) {
    std::cout << render_report(run_dirs);
    return kExitOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"LSA aspect-based recommender"};
    app.require_subcommand(1);

    std::string input, out_dir = "run", model_dir, variant = "full", param = "K", values;
    std::vector<std::string> report_dirs;
    bool dump_seqs = false;
    detail::ConfigCli config_cli;

    auto add_common = [&](CLI::App* cmd, bool needs_input) {
        config_cli.attach(cmd);
        cmd->add_option("--out", out_dir, "run directory for artifacts");
        if (needs_input) cmd->add_option("--input", input, "reviews file (jsonl)")->required();
        return cmd;
    };

    CLI::App* extract = add_common(app.add_subcommand("extract", "extract aspect mentions"), true);
    CLI::App* build_graph =
        add_common(app.add_subcommand("build-graph", "build the user-item-aspect graph"), true);
    CLI::App* synth =
        add_common(app.add_subcommand("synth", "generate a synthetic drift corpus"), false);
    CLI::App* train = add_common(app.add_subcommand("train", "train the model"), true);
    train->add_flag("--dump-sequences", dump_seqs, "write debug InterestSequences");
    CLI::App* evaluate =
        add_common(app.add_subcommand("evaluate", "evaluate a trained model"), true);
    evaluate->add_option("--model", model_dir, "train run directory")->required();
    CLI::App* ablate = add_common(app.add_subcommand("ablate", "train+evaluate a variant"), true);
    ablate->add_option("--variant", variant,
                       "full|no_aspect_attention|no_fusion|no_short|no_long");
    CLI::App* sweep_cmd = add_common(app.add_subcommand("sweep", "K or N sensitivity"), true);
    sweep_cmd->add_option("--param", param, "K or N");
    sweep_cmd->add_option("--values", values, "comma-separated values")->required();
    CLI::App* report = app.add_subcommand("report", "summarize run directories");
    report->add_option("dirs", report_dirs, "one or two run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadConfig;
    }

    try {
        if (report->parsed()) return detail::cmd_report(report_dirs);
        AppConfig cfg = config_cli.resolve();
        if (extract->parsed()) return detail::cmd_extract(input, out_dir, cfg);
        if (build_graph->parsed()) return detail::cmd_build_graph(input, out_dir, cfg);
        if (synth->parsed()) return detail::cmd_synth(out_dir, cfg);
        if (train->parsed()) return detail::cmd_train(input, out_dir, cfg, dump_seqs);
        if (evaluate->parsed()) return detail::cmd_evaluate(input, model_dir, out_dir, cfg);
        if (ablate->parsed()) return detail::cmd_ablate(input, variant, out_dir, cfg);
        if (sweep_cmd->parsed()) return detail::cmd_sweep(input, param, values, out_dir, cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const MissingInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingInput;
    } catch (const std::exception& e) {
        std::string what = e.what();
        std::cerr << "error: " << what << "\n";
        if (what.find("missing") != std::string::npos ||
            what.find("manifest") != std::string::npos)
            return kExitMissingInput;
        return kExitError;
    }
    return kExitBadConfig;
}

}  // namespace lsa::cli
