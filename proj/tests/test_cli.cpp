#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grssnn/grssnn.hpp"

using namespace grssnn;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = GRSSNN_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("grssnn_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

nlohmann::json tiny() {
    return nlohmann::json::parse(R"({
      "schema_version": 1,
      "name": "cli",
      "data": {"source": "wh", "sample_rate": 1.0,
               "multisine": {"n_samples": 256, "f_min": 0.01, "f_max": 0.4, "rms": 0.5}},
      "model": {"n_x": 2, "n_n": 4},
      "init": {"schemes": ["lti-gr", "random-gr"]},
      "lti": {"refine_epochs": 5},
      "training": {"max_epochs": 3},
      "monte_carlo": {"runs": 2, "base_seed": 7}
    })");
}

}  // namespace

TEST(Cli, UsageAndConfigErrorsExitOne) {
    const fs::path dir = fresh_dir("usage");
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("sweep"), 1);  // --config is required
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("sweep --config " + (dir / "missing.json").string()), 1);

    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_EQ(run("sweep --config " + (dir / "broken.json").string()), 1);

    auto j = tiny();
    j["init"]["schemes"] = {"lti-gr", "glorot"};
    EXPECT_EQ(run("sweep --config " + write_config(dir, j).string()), 1);
    EXPECT_EQ(run("sweep --runs 0 --config " + write_config(dir, tiny()).string()), 1);
}

TEST(Cli, DataErrorsExitTwo) {
    const fs::path dir = fresh_dir("data");
    nlohmann::json j = tiny();
    j["data"] = {{"source", "files"}, {"files", {{"train", "nowhere.csv"}}}};
    EXPECT_EQ(run("estimate-lti --config " + write_config(dir, j).string()), 2);
    EXPECT_EQ(run("summarize --in " + (dir / "nowhere.csv").string()), 2);
    std::ofstream(dir / "bad.csv") << "scheme,test_record\n";
    EXPECT_EQ(run("summarize --in " + (dir / "bad.csv").string()), 2);
}

TEST(Cli, AllRunsFailingExitsThree) {
    const fs::path dir = fresh_dir("diverged");
    nlohmann::json j = tiny();
    j["training"]["max_jacobian_bytes"] = 1.0;
    EXPECT_EQ(run("sweep --config " + write_config(dir, j).string()), 3);
}

TEST(Cli, GenerateThenTrainFromFiles) {
    const fs::path dir = fresh_dir("files");
    const fs::path cfg = write_config(dir, tiny());
    ASSERT_EQ(run("generate-data --config " + cfg.string() + " --out " + (dir / "data").string()), 0);
    const auto manifest = read_json_file((dir / "data" / "manifest.json").string());
    EXPECT_EQ(manifest.at("source"), "wh");
    ASSERT_EQ(manifest.at("tests").size(), 1u);

    // records written by generate-data reload bit for bit
    const ExperimentData direct = load_experiment_data(config_from_json(tiny()));
    const Dataset train = load_dataset(dir / "data" / "train.csv");
    EXPECT_EQ(train.u, direct.train.u);
    EXPECT_EQ(train.y, direct.train.y);
    EXPECT_EQ(manifest.at("train").at("hash").get<std::string>(), dataset_hash(direct.train));

    nlohmann::json files = tiny();
    files["data"] = {{"source", "files"},
                     {"sample_rate", 1.0},
                     {"files", {{"train", "data/train.csv"}, {"tests", manifest.at("tests")}}}};
    for (auto& t : files["data"]["files"]["tests"]) {
        t["path"] = "data/" + t["path"].get<std::string>();
        t.erase("samples");
        t.erase("hash");
    }
    const fs::path fcfg = dir / "files.json";
    std::ofstream(fcfg) << files.dump(2);

    ASSERT_EQ(run("estimate-lti --config " + fcfg.string() + " --out " + (dir / "lti").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "lti" / "lti.json"));

    const fs::path tdir = dir / "train";
    ASSERT_EQ(run("train --scheme lti-gr --seed 11 --config " + fcfg.string() + " --out " + tdir.string()), 0);
    for (const char* f : {"model.json", "history.csv", "train_report.json"}) EXPECT_TRUE(fs::exists(tdir / f)) << f;
    const auto rep = read_json_file((tdir / "train_report.json").string());
    const double trained = rep.at("test_rmse").at("multisine").get<double>();

    ASSERT_EQ(run("evaluate --config " + fcfg.string() + " --model " + (tdir / "model.json").string() + " --out " +
                  (dir / "eval").string()),
              0);
    const auto ev = read_json_file((dir / "eval" / "evaluation.json").string());
    EXPECT_EQ(ev.at("test_rmse").at("multisine").get<double>(), trained);

    EXPECT_EQ(run("evaluate --config " + fcfg.string() + " --model " + (tdir / "history.csv").string()), 2);
}

TEST(Cli, SweepOverridesAndSummarize) {
    const fs::path dir = fresh_dir("sweep");
    const fs::path cfg = write_config(dir, tiny());
    ASSERT_EQ(run("sweep --config " + cfg.string() + " --runs 3 --seed 20 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("sweep --config " + cfg.string() + " --runs 3 --seed 20 --workers 2 --out " + (dir / "b").string()), 0);
    EXPECT_EQ(slurp(dir / "a" / "aggregate.csv"), slurp(dir / "b" / "aggregate.csv"));

    const auto rows = parse_rows_csv(slurp(dir / "a" / "results.csv"));
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& r : rows) EXPECT_EQ(r.seed, 20u + static_cast<std::uint64_t>(r.run));

    ASSERT_EQ(run("summarize --in " + (dir / "a" / "results.csv").string() + " --out " + (dir / "sum.csv").string()), 0);
    EXPECT_EQ(slurp(dir / "sum.csv"), slurp(dir / "a" / "aggregate.csv"));
    ASSERT_EQ(run("summarize --in " + (dir / "a" / "results.csv").string() + " --out " + (dir / "sumdir").string()), 0);
    EXPECT_EQ(slurp(dir / "sumdir" / "aggregate.csv"), slurp(dir / "a" / "aggregate.csv"));
}
