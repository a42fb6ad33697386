#pragma once

// Experiment pipeline: data -> linear model -> initialization -> LM training
// -> test evaluation, repeated over Monte-Carlo seeds and init schemes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "grssnn/bench.hpp"
#include "grssnn/config.hpp"
#include "grssnn/init.hpp"
#include "grssnn/io.hpp"
#include "grssnn/lti_estimate.hpp"
#include "grssnn/optim.hpp"
#include "grssnn/serialize.hpp"
#include "grssnn/signal.hpp"

namespace grssnn {

struct TestRecord {
    std::string name;
    Dataset data;  ///< raw units
    bool periodic = false;
    int skip = 0;
};

struct ExperimentData {
    Dataset train;  ///< raw units
    std::vector<TestRecord> tests;
    nlohmann::json manifest;
};

inline constexpr const char* kSimulatorVersion = "grssnn-bench-1";

inline ExperimentData load_experiment_data(const ExperimentConfig& c) {
    ExperimentData out;
    out.manifest = {{"source", c.data.source == DataSource::boucwen ? "boucwen"
                               : c.data.source == DataSource::wh    ? "wh"
                                                                    : "files"},
                    {"simulator_version", kSimulatorVersion},
                    {"sample_rate", c.data.sample_rate}};
    if (c.data.source == DataSource::files) {
        out.train = load_dataset(c.data.train_file, c.data.sample_rate);
        for (const auto& f : c.data.test_files)
            out.tests.push_back({f.name, load_dataset(f.path, c.data.sample_rate), f.periodic, f.skip});
        out.manifest["train_file"] = c.data.train_file;
        return out;
    }
    const auto& ms = c.data.multisine;
    out.manifest["multisine"] = {{"n_samples", ms.n_samples},
                                 {"f_min", ms.f_min},
                                 {"f_max", ms.f_max},
                                 {"rms", ms.target_rms}};
    out.manifest["seeds"] = {{"train", c.data.seeds.train}, {"test", c.data.seeds.test}};
    if (c.data.source == DataSource::boucwen) {
        const auto& p = c.data.boucwen;
        const nlohmann::json preset = {{"m_l", p.m_l},     {"c_l", p.c_l},         {"k_l", p.k_l},
                                       {"alpha", p.alpha}, {"beta", p.beta},       {"gamma", p.gamma_bw},
                                       {"delta", p.delta}, {"nu", p.nu},           {"oversample", p.oversample},
                                       {"sample_rate", p.sample_rate}};
        out.manifest["boucwen"] = preset;
        out.manifest["preset_hash"] = std::to_string(fnv1a(preset.dump()));
        out.manifest["sweep"] = {{"f_start", c.data.sweep.f_start},
                                 {"f_end", c.data.sweep.f_end},
                                 {"sweep_rate", c.data.sweep.sweep_rate},
                                 {"amplitude", c.data.sweep.amplitude}};
        BoucWenDatasets d = make_boucwen_datasets(p, ms, c.data.sweep, c.data.seeds);
        out.train = std::move(d.train);
        out.tests.push_back({"multisine", std::move(d.test_multisine), true, 0});
        out.tests.push_back({"sweep", std::move(d.test_sweep), false, c.sweep_skip});
    } else {
        const auto& w = c.data.wh;
        const nlohmann::json preset = {{"front", to_json(w.front)},
                                       {"back", to_json(w.back)},
                                       {"knee", w.nl.knee},
                                       {"slope", w.nl.slope},
                                       {"noise_std", w.output_noise_std}};
        out.manifest["wh"] = preset;
        out.manifest["preset_hash"] = std::to_string(fnv1a(preset.dump()));
        WhDatasets d = make_wh_datasets(w, ms, c.data.seeds);
        out.train = std::move(d.train);
        out.tests.push_back({"multisine", std::move(d.test_multisine), true, 0});
    }
    return out;
}

/// Linear approximation shared by every run of an experiment, in normalized
/// signal units and with unit-std states.
struct PreparedLti {
    LtiEstimate estimate;         ///< on normalized data, before state scaling
    LtiStateSpace model;          ///< state-normalized
    Eigen::VectorXd x0;           ///< initial state in the normalized state basis
    Eigen::VectorXd state_scale;  ///< diagonal of the similarity transform
    std::string hash;
    std::string data_hash;
};

inline PreparedLti prepare_lti(const ExperimentConfig& c, const Dataset& train_norm) {
    LtiEstimateOptions opts;
    opts.horizon = c.lti_horizon;
    opts.refine = c.lti_refine_epochs > 0;
    opts.refine_options.max_epochs = std::max(1, c.lti_refine_epochs);
    PreparedLti p;
    p.estimate = estimate_lti(train_norm, static_cast<int>(c.n_x), opts);
    const StateNormalization sn = normalize_states(p.estimate.model, train_norm.u, p.estimate.x0);
    p.model = sn.model;
    p.state_scale = sn.scale;
    p.x0 = p.estimate.x0.cwiseQuotient(sn.scale);
    p.data_hash = dataset_hash(train_norm);
    nlohmann::json j = to_json(p.model);
    j["x0"] = matrix_to_json(p.x0);
    p.hash = std::to_string(fnv1a(j.dump()));
    return p;
}

inline nlohmann::json to_json(const PreparedLti& p) {
    nlohmann::json j = to_json(p.estimate, p.data_hash);
    j["normalized"] = to_json(p.model);
    j["normalized"]["x0"] = matrix_to_json(p.x0);
    j["state_scale"] = matrix_to_json(p.state_scale);
    j["hash"] = p.hash;
    return j;
}

/// Raw-unit RMSE of a model (trained on normalized data) on one test record.
inline double evaluate_record(const Model& model, const Normalization& nm, const TestRecord& rec) {
    const Dataset norm = apply_normalization(rec.data, nm);
    const Eigen::Index n = norm.samples();
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dims_of(model).n_x);
    if (rec.periodic) {
        Eigen::MatrixXd u2(2 * n, norm.n_u());
        u2 << norm.u, norm.u;
        const Trajectory t = simulate(model, u2, x0);
        const Eigen::MatrixXd y_hat = denormalize_outputs(t.y.bottomRows(n), nm);
        return rmse(rec.data.y, y_hat);
    }
    const Trajectory t = simulate(model, norm.u, x0);
    return rmse(rec.data.y, denormalize_outputs(t.y, nm), rec.skip);
}

inline double evaluate_record(const LtiStateSpace& lti, const Normalization& nm, const TestRecord& rec) {
    GrSsnnModel gr{lti, SsnnModel::zeros({lti.n_x(), lti.n_u(), lti.n_y(), 1})};
    return evaluate_record(Model{gr}, nm, rec);
}

struct RunResult {
    InitKind scheme = InitKind::lti_gr;
    int run = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string error;
    double gamma = 0.0;
    int epochs_run = 0;
    std::string stop_reason;
    std::vector<double> train_rmse;  ///< per epoch, normalized training units; [0] is the initial model
    std::vector<double> test_rmse;   ///< raw units, in test-record order
    std::string lti_hash;
    std::optional<TrainReport> report;
};

/// Model built by one init scheme for one seed.
struct Initialized {
    Model model;
    Eigen::VectorXd x0;
    double gamma = 0.0;
};

inline Initialized initialize(const ExperimentConfig& c, InitKind kind, const PreparedLti& lti, const Dataset& train,
                              std::uint64_t seed) {
    const Dims d{c.n_x, train.n_u(), train.n_y(), c.n_n};
    if (!uses_lti(kind)) return {init_random(kind, d, c.activation, seed), Eigen::VectorXd::Zero(d.n_x), 0.0};
    double gamma = 0.0;
    if (uses_gamma(kind)) gamma = c.gamma ? *c.gamma : select_gamma(lti.model, train.u, lti.x0, c.z_max).gamma;
    return {init_from_lti(kind, lti.model, d, c.activation, gamma, seed), lti.x0, gamma};
}

inline RunResult execute_run(const ExperimentConfig& c, InitKind kind, int run, const PreparedLti& lti,
                             const Dataset& train_norm, const std::vector<TestRecord>& tests, bool keep_report) {
    RunResult r;
    r.scheme = kind;
    r.run = run;
    r.seed = c.run_seed(run);
    r.lti_hash = lti.hash;
    try {
        Initialized init = initialize(c, kind, lti, train_norm, r.seed);
        r.gamma = init.gamma;
        TrainSpec spec;
        spec.x0 = init.x0;
        TrainReport rep = lm_train(init.model, train_norm, c.lm, spec);
        r.epochs_run = rep.epochs_run;
        r.stop_reason = std::string(to_string(rep.stop_reason));
        for (double v : rep.cost_history) r.train_rmse.push_back(std::sqrt(v));
        for (const auto& t : tests) {
            const double e = evaluate_record(rep.final_model, *train_norm.normalization, t);
            if (!std::isfinite(e)) throw DivergenceError(0, "non-finite test error");
            r.test_rmse.push_back(e);
        }
        if (keep_report) r.report = std::move(rep);
    } catch (const std::exception& e) {
        r.diverged = true;
        r.error = e.what();
        r.test_rmse.clear();
    }
    return r;
}

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    // same floating-point steps as numpy's default "linear" method, so results agree bit for bit
    const double n = static_cast<double>(v.size());
    const double pos = n * q + (1.0 + q * (1.0 - 1.0 - 1.0)) - 1.0;
    const double last = n - 1.0;
    const double lo_f = std::clamp(std::floor(pos), 0.0, last);
    const double hi_f = std::clamp(std::floor(pos) + 1.0, 0.0, last);
    const double a = v[static_cast<std::size_t>(lo_f)], b = v[static_cast<std::size_t>(hi_f)];
    const double t = pos >= last ? 0.0 : (pos < 0.0 ? 0.0 : pos - std::floor(pos));
    const double d = b - a;
    return t >= 0.5 ? b - d * (1.0 - t) : a + d * t;
}

/// One row of the long-format comparison table.
struct ResultRow {
    std::string scheme;
    std::string test_record;
    int run = 0;
    std::uint64_t seed = 0;
    double rmse = 0.0;
    bool diverged = false;
};

struct AggregateRow {
    std::string scheme;
    std::string test_record;
    int runs = 0;
    int diverged = 0;
    double median = 0.0, p10 = 0.0, p90 = 0.0;
};

/// Median and 10/90 percentiles per (scheme, test record) over non-diverged rows.
/// Groups appear in order of first occurrence.
inline std::vector<AggregateRow> summarize(const std::vector<ResultRow>& rows) {
    if (rows.empty()) throw DataError("summarize needs at least one result row");
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
    std::map<std::string, std::set<std::string>> records_per_scheme;
    for (const auto& r : rows) {
        const auto key = std::pair{r.scheme, r.test_record};
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&r);
        records_per_scheme[r.scheme].insert(r.test_record);
    }
    const auto& first = records_per_scheme.begin()->second;
    for (const auto& [scheme, recs] : records_per_scheme)
        if (recs != first) throw DataError("scheme '" + scheme + "' was evaluated on different test records");

    std::vector<AggregateRow> out;
    for (const auto& key : order) {
        AggregateRow a{key.first, key.second};
        std::vector<double> vals;
        for (const ResultRow* r : groups[key]) {
            ++a.runs;
            if (r->diverged)
                ++a.diverged;
            else
                vals.push_back(r->rmse);
        }
        a.median = percentile(vals, 0.5);
        a.p10 = percentile(vals, 0.1);
        a.p90 = percentile(vals, 0.9);
        out.push_back(a);
    }
    return out;
}

namespace detail {

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline std::string rows_csv(const std::vector<ResultRow>& rows) {
    std::string out = "scheme,test_record,run,seed,rmse,diverged\n";
    for (const auto& r : rows)
        out += r.scheme + "," + r.test_record + "," + std::to_string(r.run) + "," + std::to_string(r.seed) + "," +
               (r.diverged ? std::string() : detail::fmt17(r.rmse)) + "," + (r.diverged ? "1" : "0") + "\n";
    return out;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out = "scheme,test_record,runs,diverged,median,p10,p90\n";
    for (const auto& a : rows)
        out += a.scheme + "," + a.test_record + "," + std::to_string(a.runs) + "," + std::to_string(a.diverged) + "," +
               detail::fmt17(a.median) + "," + detail::fmt17(a.p10) + "," + detail::fmt17(a.p90) + "\n";
    return out;
}

inline std::vector<ResultRow> parse_rows_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "scheme,test_record,run,seed,rmse,diverged")
        throw DataError("not a long-format results CSV");
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 6) throw DataError("results CSV line " + std::to_string(line_no) + ": expected 6 fields");
        try {
            ResultRow r;
            r.scheme = cells[0];
            r.test_record = cells[1];
            r.run = std::stoi(cells[2]);
            r.seed = std::stoull(cells[3]);
            r.diverged = cells[5] == "1";
            r.rmse = r.diverged ? 0.0 : std::stod(cells[4]);
            rows.push_back(r);
        } catch (const std::exception&) {
            throw DataError("results CSV line " + std::to_string(line_no) + ": malformed field");
        }
    }
    return rows;
}

struct MonteCarloReport {
    std::vector<std::string> test_records;
    std::vector<RunResult> runs;
    std::vector<AggregateRow> aggregate;
    PreparedLti lti;
    std::vector<double> lti_test_rmse;

    std::vector<ResultRow> rows() const {
        std::vector<ResultRow> out;
        for (const auto& r : runs)
            for (std::size_t t = 0; t < test_records.size(); ++t)
                out.push_back({std::string(to_string(r.scheme)), test_records[t], r.run, r.seed,
                               r.diverged ? 0.0 : r.test_rmse[t], r.diverged});
        return out;
    }

    std::size_t diverged_count() const {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return r.diverged; }));
    }
};

/// Training-RMSE curves per scheme: median and 10/90 percentiles per epoch over
/// non-diverged runs. Runs that stopped early hold their last value.
inline std::string epoch_curves_csv(const MonteCarloReport& rep, int max_epochs) {
    std::string out = "scheme,epoch,median,p10,p90\n";
    std::vector<InitKind> schemes;
    for (const auto& r : rep.runs)
        if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
    for (InitKind s : schemes) {
        for (int e = 0; e <= max_epochs; ++e) {
            std::vector<double> v;
            for (const auto& r : rep.runs) {
                if (r.scheme != s || r.diverged || r.train_rmse.empty()) continue;
                v.push_back(r.train_rmse[std::min<std::size_t>(static_cast<std::size_t>(e), r.train_rmse.size() - 1)]);
            }
            if (v.empty()) continue;
            out += std::string(to_string(s)) + "," + std::to_string(e) + "," + detail::fmt17(percentile(v, 0.5)) +
                   "," + detail::fmt17(percentile(v, 0.1)) + "," + detail::fmt17(percentile(v, 0.9)) + "\n";
        }
    }
    return out;
}

/// Runs every (scheme, run) pair. When out_dir is set, per-run model/history
/// files and the aggregate tables are written there.
/// Runs every (scheme, run) pair. Training reports are dropped after their
/// artifacts are written unless `keep_reports` is set.
inline MonteCarloReport run_pipeline(const ExperimentConfig& c, const ExperimentData& data,
                                     const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                     bool keep_reports = false) {
    MonteCarloReport rep;
    const Dataset train_norm = normalize_dataset(data.train, c.normalize_output);
    rep.lti = prepare_lti(c, train_norm);
    for (const auto& t : data.tests) {
        rep.test_records.push_back(t.name);
        rep.lti_test_rmse.push_back(evaluate_record(rep.lti.model, *train_norm.normalization, t));
    }

    struct Job {
        InitKind kind;
        int run;
    };
    std::vector<Job> jobs;
    for (InitKind k : c.schemes)
        for (int i = 0; i < c.runs; ++i) jobs.push_back({k, i});
    rep.runs.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    const bool keep = out_dir.has_value() || keep_reports;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            RunResult r = execute_run(c, jobs[i].kind, jobs[i].run, rep.lti, train_norm, data.tests, keep);
            if (out_dir && r.report) {
                const auto dir = *out_dir / "runs" / std::string(to_string(r.scheme)) / ("run_" + std::to_string(r.run));
                std::filesystem::create_directories(dir);
                write_text_file((dir / "history.csv").string(), history_csv(*r.report));
                nlohmann::json run_json = {{"scheme", std::string(to_string(r.scheme))},
                                           {"seed", r.seed},
                                           {"gamma", r.gamma},
                                           {"lti_hash", r.lti_hash},
                                           {"normalization", to_json(*train_norm.normalization)},
                                           {"model", to_json(r.report->final_model, r.report->final_x0)}};
                write_text_file((dir / "model.json").string(), run_json.dump(2) + "\n");
                if (!keep_reports) r.report.reset();
            }
            rep.runs[i] = std::move(r);
        }
    };
    const int n_workers = std::max(1, std::min<int>(c.workers, static_cast<int>(jobs.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    rep.aggregate = summarize(rep.rows());
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_text_file((*out_dir / "results.csv").string(), rows_csv(rep.rows()));
        write_text_file((*out_dir / "aggregate.csv").string(), aggregate_csv(rep.aggregate));
        write_text_file((*out_dir / "epoch_curves.csv").string(), epoch_curves_csv(rep, c.lm.max_epochs));
        write_text_file((*out_dir / "lti.json").string(), to_json(rep.lti).dump(2) + "\n");
        nlohmann::json summary = {{"name", c.name},
                                  {"runs", rep.runs.size()},
                                  {"diverged", rep.diverged_count()},
                                  {"lti_hash", rep.lti.hash},
                                  {"manifest", data.manifest}};
        for (std::size_t t = 0; t < rep.test_records.size(); ++t)
            summary["lti_test_rmse"][rep.test_records[t]] = rep.lti_test_rmse[t];
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : rep.runs) {
            nlohmann::json jr = {{"scheme", std::string(to_string(r.scheme))},
                                 {"run", r.run},
                                 {"seed", r.seed},
                                 {"diverged", r.diverged},
                                 {"epochs_run", r.epochs_run},
                                 {"stop_reason", r.stop_reason},
                                 {"gamma", r.gamma}};
            if (r.diverged) jr["error"] = r.error;
            for (std::size_t t = 0; t < r.test_rmse.size(); ++t) jr["test_rmse"][rep.test_records[t]] = r.test_rmse[t];
            runs.push_back(jr);
        }
        summary["per_run"] = std::move(runs);
        write_text_file((*out_dir / "report.json").string(), summary.dump(2) + "\n");
    }
    return rep;
}

inline MonteCarloReport run_pipeline(const ExperimentConfig& c,
                                     const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
    return run_pipeline(c, load_experiment_data(c), out_dir);
}

}  // namespace grssnn
