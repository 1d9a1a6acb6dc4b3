#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lsa/cli.hpp"

using namespace lsa;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
    std::vector<const char*> argv = {"lsa"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(int(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config file parsing: sections, overrides, unknown keys") {
    AppConfig cfg;
    std::istringstream toml(
        "# comment\n"
        "[selection]\n"
        "K = 12\n"
        "T = 90.5\n"
        "[training]\n"
        "seed = 99\n"
        "learning_rate = 0.01\n"
        "[synth]\n"
        "n_users = 50\n");
    load_config_stream(toml, cfg);
    CHECK(cfg.train.K == 12);
    CHECK(cfg.train.T == 90.5);
    CHECK(cfg.train.seed == 99);
    CHECK(cfg.train.learning_rate == 0.01);
    CHECK(cfg.synth.n_users == 50);

    SECTION("unknown key names the offender") {
        AppConfig fresh;
        std::istringstream bad("[selection]\nQ = 3\n");
        try {
            load_config_stream(bad, fresh);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.key == "selection.Q");
        }
    }
    SECTION("bare key override hits every section carrying it") {
        AppConfig fresh;
        set_config_key(fresh, "seed", "123");
        CHECK(fresh.train.seed == 123);
        CHECK(fresh.synth.seed == 123);
        CHECK_THROWS_AS(set_config_key(fresh, "bogus_key", "1"), ConfigError);
    }
    SECTION("config json snapshot round-trips through sections") {
        nlohmann::json j = config_to_json(cfg);
        CHECK(j["selection"]["K"] == 12);
        CHECK(j["training"]["seed"] == 99);
    }
    SECTION("config diff lists only non-default fields") {
        auto diff = config_diff_vs_defaults(cfg);
        CHECK(diff.size() == 5);
    }
}

TEST_CASE("synth then train then evaluate produces parseable metrics") {
    TempDir tmp("lsa_cli_pipeline");
    std::string synth_dir = tmp.sub("synth");
    std::string train_dir = tmp.sub("train");
    std::string eval_dir = tmp.sub("eval");

    REQUIRE(run_cli({"synth", "--out", synth_dir, "--n_users", "12", "--n_items", "8",
                     "--n_aspects", "8", "--interactions_per_user", "5", "--seed", "5"}) == 0);
    REQUIRE(fs::exists(fs::path(synth_dir) / "reviews.jsonl"));
    REQUIRE(fs::exists(fs::path(synth_dir) / "truth.json"));
    REQUIRE(fs::exists(fs::path(synth_dir) / "manifest.json"));

    std::string reviews = (fs::path(synth_dir) / "reviews.jsonl").string();
    REQUIRE(run_cli({"train", "--input", reviews, "--out", train_dir, "--d", "4", "--H", "2",
                     "--K", "2", "--N", "2", "--k_fm", "2", "--max_epochs", "2", "--seed", "5",
                     "--dump-sequences"}) == 0);
    REQUIRE(fs::exists(fs::path(train_dir) / "checkpoint.bin"));
    REQUIRE(fs::exists(fs::path(train_dir) / "train_log.jsonl"));
    REQUIRE(fs::exists(fs::path(train_dir) / "sequences.json"));

    REQUIRE(run_cli({"evaluate", "--input", reviews, "--model", train_dir, "--out", eval_dir}) ==
            0);
    nlohmann::json metrics = nlohmann::json::parse(read_file(eval_dir + "/metrics.json"));
    CHECK(metrics.contains("mse"));
    CHECK(metrics.contains("mae"));
    CHECK(metrics.contains("ndcg_at_10"));
    CHECK(metrics["n_test"].get<int>() > 0);
    REQUIRE(fs::exists(fs::path(eval_dir) / "predictions.csv"));
    std::string csv = read_file(eval_dir + "/predictions.csv");
    CHECK(csv.rfind("user,item,true_rating,predicted_rating,timestamp", 0) == 0);

    SECTION("report renders a table for one or two runs") {
        REQUIRE(run_cli({"report", eval_dir}) == 0);
        REQUIRE(run_cli({"report", eval_dir, eval_dir}) == 0);
    }
}

TEST_CASE("extract and build-graph emit their artifacts") {
    TempDir tmp("lsa_cli_extract");
    std::string reviews_path = tmp.sub("reviews.jsonl");
    {
        std::ofstream out(reviews_path);
        out << R"({"user":"u1","item":"i1","rating":5,"ts":100,"triples":[["amod","quality","great"],["amod","quality","fine"]]})"
            << "\n";
        out << R"({"user":"u2","item":"i1","rating":4,"ts":200,"triples":[["amod","quality","solid"]]})"
            << "\n";
    }
    std::string out_dir = tmp.sub("extract");
    REQUIRE(run_cli({"extract", "--input", reviews_path, "--out", out_dir}) == 0);
    std::string mentions = read_file(out_dir + "/mentions.jsonl");
    CHECK(mentions.find("quality") != std::string::npos);

    std::string graph_dir = tmp.sub("graph");
    REQUIRE(run_cli({"build-graph", "--input", reviews_path, "--out", graph_dir, "--min_freq",
                     "1"}) == 0);
    nlohmann::json graph = nlohmann::json::parse(read_file(graph_dir + "/graph.json"));
    CHECK(graph["aspects"].size() == 1);
    CHECK(graph["users"].size() == 2);
}

TEST_CASE("ablate echoes the variant in the metrics report") {
    TempDir tmp("lsa_cli_ablate");
    std::string synth_dir = tmp.sub("synth");
    REQUIRE(run_cli({"synth", "--out", synth_dir, "--n_users", "10", "--n_items", "6",
                     "--n_aspects", "6", "--interactions_per_user", "4", "--seed", "9"}) == 0);
    std::string reviews = (fs::path(synth_dir) / "reviews.jsonl").string();
    std::string out_dir = tmp.sub("ablate");
    REQUIRE(run_cli({"ablate", "--input", reviews, "--out", out_dir, "--variant", "no_short",
                     "--d", "4", "--H", "2", "--K", "2", "--N", "2", "--k_fm", "2",
                     "--max_epochs", "1", "--seed", "9"}) == 0);
    nlohmann::json metrics = nlohmann::json::parse(read_file(out_dir + "/metrics.json"));
    CHECK(metrics["variant"] == "no_short");
}

TEST_CASE("sweep writes a csv row per value plus a plot") {
    TempDir tmp("lsa_cli_sweep");
    std::string synth_dir = tmp.sub("synth");
    REQUIRE(run_cli({"synth", "--out", synth_dir, "--n_users", "10", "--n_items", "6",
                     "--n_aspects", "6", "--interactions_per_user", "4", "--seed", "11"}) == 0);
    std::string reviews = (fs::path(synth_dir) / "reviews.jsonl").string();
    std::string out_dir = tmp.sub("sweep");
    REQUIRE(run_cli({"sweep", "--input", reviews, "--out", out_dir, "--param", "K", "--values",
                     "1,2,3", "--d", "4", "--H", "2", "--N", "2", "--k_fm", "2", "--max_epochs",
                     "1", "--seed", "11"}) == 0);
    std::string csv = read_file(out_dir + "/sweep.csv");
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 4);  // header + 3 rows
    CHECK(fs::exists(fs::path(out_dir) / "sweep.svg"));
    std::string svg = read_file(out_dir + "/sweep.svg");
    CHECK(svg.find("<svg") != std::string::npos);
}

TEST_CASE("cli error codes: bad config key 2, missing input 3") {
    TempDir tmp("lsa_cli_errors");
    CHECK(run_cli({"synth", "--out", tmp.sub("x"), "--not_a_key", "1"}) == 2);
    CHECK(run_cli({"train", "--input", tmp.sub("missing.jsonl"), "--out", tmp.sub("y")}) == 3);
    CHECK(run_cli({"report", tmp.sub("no_such_run")}) == 3);

    SECTION("corrupted manifest also exits 3") {
        std::string dir = tmp.sub("corrupt");
        fs::create_directories(dir);
        std::ofstream(dir + "/manifest.json") << "{ not json";
        CHECK(run_cli({"report", dir}) == 3);
    }
    SECTION("bad key inside a config file exits 2") {
        std::string cfg_path = tmp.sub("bad.toml");
        std::ofstream(cfg_path) << "[selection]\nbogus = 1\n";
        CHECK(run_cli({"synth", "--out", tmp.sub("z"), "--config", cfg_path}) == 2);
    }
}

TEST_CASE("identical config and seed give byte-identical metrics json") {
    TempDir tmp("lsa_cli_determinism");
    std::string synth_dir = tmp.sub("synth");
    REQUIRE(run_cli({"synth", "--out", synth_dir, "--n_users", "10", "--n_items", "6",
                     "--n_aspects", "6", "--interactions_per_user", "4", "--seed", "21"}) == 0);
    std::string reviews = (fs::path(synth_dir) / "reviews.jsonl").string();
    std::vector<std::string> train_flags = {"--d", "4", "--H", "2", "--K", "2", "--N", "2",
                                            "--k_fm", "2", "--max_epochs", "2", "--seed", "21"};

    for (const char* run : {"a", "b"}) {
        std::vector<std::string> args = {"train", "--input", reviews, "--out", tmp.sub(run)};
        args.insert(args.end(), train_flags.begin(), train_flags.end());
        REQUIRE(run_cli(args) == 0);
        std::vector<std::string> eval_args = {"evaluate", "--input", reviews, "--model",
                                              tmp.sub(run), "--out", tmp.sub(std::string(run) + "_eval")};
        REQUIRE(run_cli(eval_args) == 0);
    }
    CHECK(read_file(tmp.sub("a_eval") + "/metrics.json") ==
          read_file(tmp.sub("b_eval") + "/metrics.json"));
}
