#pragma once

// Experiment configuration (JSON, schema-versioned).
// The published schema lives in schemas/experiment_config.schema.json.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grssnn/bench.hpp"
#include "grssnn/errors.hpp"
#include "grssnn/init.hpp"
#include "grssnn/optim.hpp"
#include "grssnn/signal.hpp"
#include "grssnn/ssnn.hpp"

namespace grssnn {

inline constexpr int kConfigSchemaVersion = 1;

enum class DataSource { boucwen, wh, files };

struct FileRecord {
    std::string name;
    std::string path;
    bool periodic = false;  ///< steady-state periodic record: evaluated on the second of two simulated periods
    int skip = 0;           ///< leading samples excluded from the RMSE of a transient record
};

struct DataConfig {
    DataSource source = DataSource::boucwen;
    double sample_rate = 750.0;
    MultisineSpec multisine{.n_samples = 2048, .sample_rate = 750.0, .f_min = 5.0, .f_max = 150.0, .target_rms = 50.0};
    SweepSpec sweep{.f_start = 20.0, .f_end = 50.0, .sweep_rate = 10.0, .amplitude = 40.0, .sample_rate = 750.0};
    BenchmarkSeeds seeds;
    BoucWenParams boucwen;
    WhParams wh;
    std::string train_file;
    std::vector<FileRecord> test_files;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DataConfig data;
    Eigen::Index n_x = 3;
    Eigen::Index n_n = 15;
    Activation activation = Activation::tanh;
    std::vector<InitKind> schemes{InitKind::lti_gr};
    double z_max = kDefaultZMax;
    std::optional<double> gamma;
    int lti_horizon = 0;
    int lti_refine_epochs = 200;
    LmOptions lm{.max_epochs = 150};
    bool normalize_output = true;
    int runs = 10;
    std::uint64_t base_seed = 1000;
    int workers = 1;
    int sweep_skip = 2000;

    /// Seed of Monte-Carlo run `index`.
    std::uint64_t run_seed(int index) const { return base_seed + static_cast<std::uint64_t>(index); }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
    }
}

inline std::vector<double> poles_or(const nlohmann::json& j, const char* key, std::vector<double> def) {
    if (!j.contains(key)) return def;
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError(std::string(key) + " must list three poles");
    return v;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig c;
    check_keys(j, {"schema_version", "name", "data", "model", "init", "lti", "training", "monte_carlo", "evaluation"},
               "config");
    int version = 0;
    read(j, "schema_version", version, "config");
    if (version != kConfigSchemaVersion)
        throw ConfigError("schema_version must be " + std::to_string(kConfigSchemaVersion));
    read(j, "name", c.name, "config");

    if (!j.contains("data")) throw ConfigError("config needs a 'data' section");
    const auto& jd = j.at("data");
    check_keys(jd, {"source", "sample_rate", "multisine", "sweep", "seeds", "boucwen", "wh", "files"}, "data");
    std::string source = "boucwen";
    read(jd, "source", source, "data");
    if (source == "boucwen")
        c.data.source = DataSource::boucwen;
    else if (source == "wh")
        c.data.source = DataSource::wh;
    else if (source == "files")
        c.data.source = DataSource::files;
    else
        throw ConfigError("data.source must be boucwen, wh or files");
    read(jd, "sample_rate", c.data.sample_rate, "data");
    if (!(c.data.sample_rate > 0.0)) throw ConfigError("data.sample_rate must be positive");
    c.data.boucwen.sample_rate = c.data.sample_rate;
    if (jd.contains("multisine")) {
        const auto& m = jd.at("multisine");
        check_keys(m, {"n_samples", "f_min", "f_max", "rms"}, "data.multisine");
        read(m, "n_samples", c.data.multisine.n_samples, "data.multisine");
        read(m, "f_min", c.data.multisine.f_min, "data.multisine");
        read(m, "f_max", c.data.multisine.f_max, "data.multisine");
        read(m, "rms", c.data.multisine.target_rms, "data.multisine");
    }
    c.data.multisine.sample_rate = c.data.sample_rate;
    if (jd.contains("sweep")) {
        const auto& s = jd.at("sweep");
        check_keys(s, {"f_start", "f_end", "sweep_rate", "amplitude"}, "data.sweep");
        read(s, "f_start", c.data.sweep.f_start, "data.sweep");
        read(s, "f_end", c.data.sweep.f_end, "data.sweep");
        read(s, "sweep_rate", c.data.sweep.sweep_rate, "data.sweep");
        read(s, "amplitude", c.data.sweep.amplitude, "data.sweep");
    }
    c.data.sweep.sample_rate = c.data.sample_rate;
    if (jd.contains("seeds")) {
        check_keys(jd.at("seeds"), {"train", "test"}, "data.seeds");
        read(jd.at("seeds"), "train", c.data.seeds.train, "data.seeds");
        read(jd.at("seeds"), "test", c.data.seeds.test, "data.seeds");
    }
    if (jd.contains("boucwen")) {
        const auto& b = jd.at("boucwen");
        check_keys(b, {"m_l", "c_l", "k_l", "alpha", "beta", "gamma", "delta", "nu", "oversample"}, "data.boucwen");
        read(b, "m_l", c.data.boucwen.m_l, "data.boucwen");
        read(b, "c_l", c.data.boucwen.c_l, "data.boucwen");
        read(b, "k_l", c.data.boucwen.k_l, "data.boucwen");
        read(b, "alpha", c.data.boucwen.alpha, "data.boucwen");
        read(b, "beta", c.data.boucwen.beta, "data.boucwen");
        read(b, "gamma", c.data.boucwen.gamma_bw, "data.boucwen");
        read(b, "delta", c.data.boucwen.delta, "data.boucwen");
        read(b, "nu", c.data.boucwen.nu, "data.boucwen");
        read(b, "oversample", c.data.boucwen.oversample, "data.boucwen");
    }
    if (jd.contains("wh")) {
        const auto& w = jd.at("wh");
        check_keys(w, {"front_poles", "back_poles", "knee", "slope", "noise_std"}, "data.wh");
        const auto fp = detail::poles_or(w, "front_poles", {0.55, 0.65, 0.75});
        const auto bp = detail::poles_or(w, "back_poles", {0.6, 0.7, 0.8});
        c.data.wh.front = lowpass3(fp[0], fp[1], fp[2]);
        c.data.wh.back = lowpass3(bp[0], bp[1], bp[2]);
        read(w, "knee", c.data.wh.nl.knee, "data.wh");
        read(w, "slope", c.data.wh.nl.slope, "data.wh");
        read(w, "noise_std", c.data.wh.output_noise_std, "data.wh");
    }
    if (jd.contains("files")) {
        const auto& f = jd.at("files");
        check_keys(f, {"train", "tests"}, "data.files");
        read(f, "train", c.data.train_file, "data.files");
        if (f.contains("tests")) {
            for (const auto& t : f.at("tests")) {
                check_keys(t, {"name", "path", "periodic", "skip"}, "data.files.tests[]");
                FileRecord r;
                read(t, "name", r.name, "data.files.tests[]");
                read(t, "path", r.path, "data.files.tests[]");
                read(t, "periodic", r.periodic, "data.files.tests[]");
                read(t, "skip", r.skip, "data.files.tests[]");
                if (r.name.empty() || r.path.empty()) throw ConfigError("test files need a name and a path");
                c.data.test_files.push_back(r);
            }
        }
    }
    if (c.data.source == DataSource::files && c.data.train_file.empty())
        throw ConfigError("data.source = files needs data.files.train");

    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, {"n_x", "n_n", "activation"}, "model");
        read(m, "n_x", c.n_x, "model");
        read(m, "n_n", c.n_n, "model");
        std::string act = "tanh";
        read(m, "activation", act, "model");
        c.activation = activation_from_string(act);
    }
    if (c.n_x < 1 || c.n_n < 1) throw ConfigError("model.n_x and model.n_n must be at least 1");

    if (j.contains("init")) {
        const auto& in = j.at("init");
        check_keys(in, {"schemes", "z_max", "gamma"}, "init");
        if (in.contains("schemes")) {
            c.schemes.clear();
            for (const auto& s : in.at("schemes")) c.schemes.push_back(init_kind_from_string(s.get<std::string>()));
            if (c.schemes.empty()) throw ConfigError("init.schemes must not be empty");
        }
        read(in, "z_max", c.z_max, "init");
        if (in.contains("gamma") && !in.at("gamma").is_null()) c.gamma = in.at("gamma").get<double>();
        if (!(c.z_max > 0.0)) throw ConfigError("init.z_max must be positive");
        if (c.gamma && !(*c.gamma > 0.0)) throw ConfigError("init.gamma must be positive");
    }

    if (j.contains("lti")) {
        check_keys(j.at("lti"), {"horizon", "refine_epochs"}, "lti");
        read(j.at("lti"), "horizon", c.lti_horizon, "lti");
        read(j.at("lti"), "refine_epochs", c.lti_refine_epochs, "lti");
    }

    if (j.contains("training")) {
        const auto& t = j.at("training");
        check_keys(t,
                   {"max_epochs", "lambda_init", "lambda_up", "lambda_down", "svd_rel_tol", "cost_tol", "cost_floor", "cost_window",
                    "max_lambda", "max_retries", "max_jacobian_bytes", "normalize_output"},
                   "training");
        read(t, "max_epochs", c.lm.max_epochs, "training");
        read(t, "lambda_init", c.lm.lambda_init, "training");
        read(t, "lambda_up", c.lm.lambda_up, "training");
        read(t, "lambda_down", c.lm.lambda_down, "training");
        read(t, "svd_rel_tol", c.lm.svd_rel_tol, "training");
        read(t, "cost_tol", c.lm.cost_tol, "training");
        read(t, "cost_floor", c.lm.cost_floor, "training");
        read(t, "cost_window", c.lm.cost_window, "training");
        read(t, "max_lambda", c.lm.max_lambda, "training");
        read(t, "max_retries", c.lm.max_retries, "training");
        read(t, "max_jacobian_bytes", c.lm.max_jacobian_bytes, "training");
        read(t, "normalize_output", c.normalize_output, "training");
    }
    c.lm.validate();
    if (c.data.source == DataSource::boucwen) {
        c.data.boucwen.validate();
        (void)multisine_bins(c.data.multisine);
        (void)sweep_duration(c.data.sweep);
    } else if (c.data.source == DataSource::wh) {
        c.data.wh.validate();
        (void)multisine_bins(c.data.multisine);
    }

    if (j.contains("monte_carlo")) {
        const auto& m = j.at("monte_carlo");
        check_keys(m, {"runs", "base_seed", "workers"}, "monte_carlo");
        read(m, "runs", c.runs, "monte_carlo");
        read(m, "base_seed", c.base_seed, "monte_carlo");
        read(m, "workers", c.workers, "monte_carlo");
    }
    if (c.runs < 1) throw ConfigError("monte_carlo.runs must be at least 1");
    if (c.workers < 1) throw ConfigError("monte_carlo.workers must be at least 1");

    if (j.contains("evaluation")) {
        check_keys(j.at("evaluation"), {"sweep_skip"}, "evaluation");
        read(j.at("evaluation"), "sweep_skip", c.sweep_skip, "evaluation");
        if (c.sweep_skip < 0) throw ConfigError("evaluation.sweep_skip must be non-negative");
    }
    return c;
}

}  // namespace detail

/// Parses and validates an experiment config; every problem surfaces as ConfigError.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    try {
        return detail::parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

}  // namespace grssnn
