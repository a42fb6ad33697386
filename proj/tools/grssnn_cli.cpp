// grssnn command line: data generation, linear estimation, training, evaluation,
// Monte-Carlo sweeps and result summaries, all driven by one JSON config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grssnn/grssnn.hpp"

namespace fs = std::filesystem;
using namespace grssnn;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kAllDiverged = 3 };

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<int> workers;
};

ExperimentConfig load_config(const Common& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    nlohmann::json j;
    {
        std::ifstream in(o.config);
        if (!in) throw ConfigError("cannot open config " + o.config);
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(o.config + ": " + e.what());
        }
    }
    ExperimentConfig c = config_from_json(j);
    // relative data paths are resolved against the config file
    const fs::path base = fs::path(o.config).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
    };
    resolve(c.data.train_file);
    for (auto& t : c.data.test_files) resolve(t.path);
    if (o.seed) c.base_seed = *o.seed;
    if (o.runs) {
        if (*o.runs < 1) throw ConfigError("--runs must be at least 1");
        c.runs = *o.runs;
    }
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers must be at least 1");
        c.workers = *o.workers;
    }
    return c;
}

fs::path out_dir(const Common& o) {
    if (o.out.empty()) throw ConfigError("--out is required");
    fs::create_directories(o.out);
    return o.out;
}

void print_table(const std::vector<AggregateRow>& rows) {
    std::printf("%-14s %-10s %5s %5s %13s %13s %13s\n", "scheme", "test", "runs", "div", "median", "p10", "p90");
    for (const auto& a : rows)
        std::printf("%-14s %-10s %5d %5d %13.6g %13.6g %13.6g\n", a.scheme.c_str(), a.test_record.c_str(), a.runs,
                    a.diverged, a.median, a.p10, a.p90);
}

int cmd_generate(const Common& o) {
    const ExperimentConfig c = load_config(o);
    const fs::path dir = out_dir(o);
    const ExperimentData data = load_experiment_data(c);
    nlohmann::json manifest = data.manifest;
    save_dataset(data.train, dir / "train.csv");
    manifest["train"] = {{"file", "train.csv"}, {"samples", data.train.samples()}, {"hash", dataset_hash(data.train)}};
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : data.tests) {
        const std::string file = "test_" + t.name + ".csv";
        save_dataset(t.data, dir / file);
        tests.push_back({{"name", t.name},
                         {"path", file},
                         {"periodic", t.periodic},
                         {"skip", t.skip},
                         {"samples", t.data.samples()},
                         {"hash", dataset_hash(t.data)}});
    }
    manifest["tests"] = std::move(tests);
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    std::printf("wrote %zu records to %s\n", data.tests.size() + 1, dir.string().c_str());
    return kOk;
}

int cmd_estimate(const Common& o) {
    const ExperimentConfig c = load_config(o);
    const ExperimentData data = load_experiment_data(c);
    const Dataset train = normalize_dataset(data.train, c.normalize_output);
    const PreparedLti p = prepare_lti(c, train);
    nlohmann::json j = to_json(p);
    j["normalization"] = to_json(*train.normalization);
    std::printf("order %d  subspace rmse %.6g  refined rmse %.6g  stable %s\n", p.estimate.order,
                p.estimate.subspace_rmse, p.estimate.refined_rmse, p.estimate.stable ? "yes" : "no");
    for (const auto& w : p.estimate.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& t : data.tests) {
        const double e = evaluate_record(p.model, *train.normalization, t);
        j["test_rmse"][t.name] = e;
        std::printf("linear model %s rmse %.6g\n", t.name.c_str(), e);
    }
    if (!o.out.empty()) write_text_file((out_dir(o) / "lti.json").string(), j.dump(2) + "\n");
    return kOk;
}

int cmd_train(const Common& o, const std::string& scheme) {
    ExperimentConfig c = load_config(o);
    if (!scheme.empty()) c.schemes = {init_kind_from_string(scheme)};
    const InitKind kind = c.schemes.front();
    const ExperimentData data = load_experiment_data(c);
    const Dataset train = normalize_dataset(data.train, c.normalize_output);
    const PreparedLti lti = prepare_lti(c, train);
    RunResult r = execute_run(c, kind, 0, lti, train, data.tests, true);
    if (r.diverged) {
        std::fprintf(stderr, "run diverged: %s\n", r.error.c_str());
        return kAllDiverged;
    }
    std::printf("%s seed %llu: %d epochs (%s), train rmse %.6g -> %.6g (normalized)\n",
                std::string(to_string(kind)).c_str(), static_cast<unsigned long long>(r.seed), r.epochs_run,
                r.stop_reason.c_str(), r.train_rmse.front(), r.train_rmse.back());
    for (std::size_t t = 0; t < data.tests.size(); ++t)
        std::printf("test %s rmse %.6g\n", data.tests[t].name.c_str(), r.test_rmse[t]);
    if (!o.out.empty()) {
        const fs::path dir = out_dir(o);
        nlohmann::json model = {{"scheme", std::string(to_string(kind))},
                                {"seed", r.seed},
                                {"gamma", r.gamma},
                                {"lti_hash", r.lti_hash},
                                {"normalization", to_json(*train.normalization)},
                                {"model", to_json(r.report->final_model, r.report->final_x0)}};
        write_text_file((dir / "model.json").string(), model.dump(2) + "\n");
        write_text_file((dir / "history.csv").string(), history_csv(*r.report));
        nlohmann::json rep = to_json(*r.report);
        for (std::size_t t = 0; t < data.tests.size(); ++t) rep["test_rmse"][data.tests[t].name] = r.test_rmse[t];
        write_text_file((dir / "train_report.json").string(), rep.dump(2) + "\n");
    }
    return kOk;
}

int cmd_evaluate(const Common& o, const std::string& model_path) {
    const ExperimentConfig c = load_config(o);
    const nlohmann::json j = read_json_file(model_path);
    if (!j.contains("model") || !j.contains("normalization"))
        throw DataError(model_path + ": expected a model file written by train or sweep");
    const UnpackedModel um = model_from_json(j.at("model"));
    const Normalization nm = normalization_from_json(j.at("normalization"));
    const ExperimentData data = load_experiment_data(c);
    nlohmann::json out = {{"model", model_path}};
    for (const auto& t : data.tests) {
        double e = 0.0;
        try {
            e = evaluate_record(um.model, nm, t);
        } catch (const DivergenceError& err) {
            std::fprintf(stderr, "%s: %s\n", t.name.c_str(), err.what());
            return kAllDiverged;
        }
        out["test_rmse"][t.name] = e;
        std::printf("test %s rmse %.6g\n", t.name.c_str(), e);
    }
    if (!o.out.empty()) write_text_file((out_dir(o) / "evaluation.json").string(), out.dump(2) + "\n");
    return kOk;
}

int cmd_sweep(const Common& o) {
    const ExperimentConfig c = load_config(o);
    std::optional<fs::path> dir;
    if (!o.out.empty()) dir = out_dir(o);
    const MonteCarloReport rep = run_pipeline(c, dir);
    print_table(rep.aggregate);
    for (const auto& r : rep.runs)
        if (r.diverged)
            std::fprintf(stderr, "%s run %d diverged: %s\n", std::string(to_string(r.scheme)).c_str(), r.run,
                         r.error.c_str());
    return rep.diverged_count() == rep.runs.size() ? kAllDiverged : kOk;
}

int cmd_summarize(const std::vector<std::string>& inputs, const std::string& out) {
    if (inputs.empty()) throw ConfigError("summarize needs at least one --in results file");
    std::vector<ResultRow> rows;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto part = parse_rows_csv(ss.str());
        rows.insert(rows.end(), part.begin(), part.end());
    }
    const auto agg = summarize(rows);
    print_table(agg);
    if (!out.empty()) {
        fs::path target = out;
        if (fs::is_directory(target) || target.extension() != ".csv") {
            fs::create_directories(target);
            write_text_file((target / "results.csv").string(), rows_csv(rows));
            target /= "aggregate.csv";
        }
        write_text_file(target.string(), aggregate_csv(agg));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-space neural network identification toolkit"};
    app.require_subcommand(1);

    Common o;
    std::string scheme, model_path, summary_out;
    std::vector<std::string> inputs;

    auto add_common = [&](CLI::App* sub, bool with_runs) {
        sub->add_option("--config", o.config, "experiment config (JSON)")->required();
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "base seed override");
        if (with_runs) {
            sub->add_option("--runs", o.runs, "Monte-Carlo run count override");
            sub->add_option("--workers", o.workers, "concurrent runs");
        }
    };

    auto* gen = app.add_subcommand("generate-data", "simulate the benchmark and write CSV records");
    add_common(gen, false);
    gen->get_option("--out")->required();
    auto* est = app.add_subcommand("estimate-lti", "estimate the normalized linear approximation");
    add_common(est, false);
    auto* train = app.add_subcommand("train", "train one model");
    add_common(train, false);
    train->add_option("--scheme", scheme, "init scheme (defaults to the first in the config)");
    auto* eval = app.add_subcommand("evaluate", "evaluate a saved model on the config's test records");
    add_common(eval, false);
    eval->add_option("--model", model_path, "model.json written by train or sweep")->required();
    auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over schemes and seeds");
    add_common(sweep, true);
    auto* summ = app.add_subcommand("summarize", "aggregate long-format result CSVs");
    summ->add_option("--in", inputs, "results.csv files")->required();
    summ->add_option("--out", summary_out, "output CSV or directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*gen) return cmd_generate(o);
        if (*est) return cmd_estimate(o);
        if (*train) return cmd_train(o, scheme);
        if (*eval) return cmd_evaluate(o, model_path);
        if (*sweep) return cmd_sweep(o);
        if (*summ) return cmd_summarize(inputs, summary_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataError;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "diverged: %s\n", e.what());
        return kAllDiverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDataError;
    }
    return kOk;
}
