#pragma once

// JSON forms of linear models, networks and training reports.
// Matrices are {"rows", "cols", "data"} with data in row-major order.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "grssnn/errors.hpp"
#include "grssnn/lti.hpp"
#include "grssnn/lti_estimate.hpp"
#include "grssnn/optim.hpp"
#include "grssnn/params.hpp"
#include "grssnn/random.hpp"
#include "grssnn/signal.hpp"
#include "grssnn/ssnn.hpp"

namespace grssnn {

using json = nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw DataError("matrix JSON: data length does not match rows x cols");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
    return m;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::MatrixXd m = matrix_from_json(j);
    if (m.cols() != 1) throw DataError("expected a column vector");
    return m.col(0);
}

/// FNV-1a over the raw sample bytes and the sample rate, as 16 hex digits.
inline std::string dataset_hash(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const Eigen::Index dims[4] = {d.u.rows(), d.u.cols(), d.y.rows(), d.y.cols()};
    feed(dims, sizeof dims);
    feed(d.u.data(), sizeof(double) * static_cast<std::size_t>(d.u.size()));
    feed(d.y.data(), sizeof(double) * static_cast<std::size_t>(d.y.size()));
    feed(&d.sample_rate, sizeof d.sample_rate);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json to_json(const Normalization& n) {
    return {{"u_offset", matrix_to_json(n.u_offset)},
            {"u_scale", matrix_to_json(n.u_scale)},
            {"y_offset", matrix_to_json(n.y_offset)},
            {"y_scale", matrix_to_json(n.y_scale)}};
}

inline Normalization normalization_from_json(const json& j) {
    try {
        return {vector_from_json(j.at("u_offset")), vector_from_json(j.at("u_scale")),
                vector_from_json(j.at("y_offset")), vector_from_json(j.at("y_scale"))};
    } catch (const json::exception& e) {
        throw DataError(std::string("normalization JSON: ") + e.what());
    }
}

inline json to_json(const LtiStateSpace& m) {
    return {{"n_x", m.n_x()},
            {"n_u", m.n_u()},
            {"n_y", m.n_y()},
            {"A", matrix_to_json(m.A)},
            {"B", matrix_to_json(m.B)},
            {"C", matrix_to_json(m.C)},
            {"D", matrix_to_json(m.D)}};
}

inline LtiStateSpace lti_from_json(const json& j) {
    try {
        return {matrix_from_json(j.at("A")), matrix_from_json(j.at("B")), matrix_from_json(j.at("C")),
                matrix_from_json(j.at("D"))};
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("linear model JSON: ") + e.what());
    }
}

/// Linear estimate plus provenance.
inline json to_json(const LtiEstimate& e, const std::string& data_hash) {
    json j = to_json(e.model);
    j["x0"] = matrix_to_json(e.x0);
    j["provenance"] = {{"dataset_hash", data_hash},
                       {"order", e.order},
                       {"subspace_rmse", e.subspace_rmse},
                       {"refined_rmse", e.refined_rmse},
                       {"stable", e.stable},
                       {"warnings", e.warnings}};
    return j;
}

inline json to_json(const Model& model, const std::optional<Eigen::VectorXd>& x0 = std::nullopt) {
    const SsnnModel& n = network_of(model);
    const Dims d = n.dims();
    json blocks = {{"W_x", matrix_to_json(n.w_x)},   {"W_fx", matrix_to_json(n.w_fx)},
                   {"W_fu", matrix_to_json(n.w_fu)}, {"b_f", matrix_to_json(n.b_f)},
                   {"b_x", matrix_to_json(n.b_x)},   {"W_y", matrix_to_json(n.w_y)},
                   {"W_gx", matrix_to_json(n.w_gx)}, {"W_gu", matrix_to_json(n.w_gu)},
                   {"b_g", matrix_to_json(n.b_g)},   {"b_y", matrix_to_json(n.b_y)}};
    if (const LtiStateSpace* lin = linear_of(model)) {
        blocks["A"] = matrix_to_json(lin->A);
        blocks["B"] = matrix_to_json(lin->B);
        blocks["C"] = matrix_to_json(lin->C);
        blocks["D"] = matrix_to_json(lin->D);
    }
    if (x0) blocks["x0"] = matrix_to_json(*x0);
    return {{"structure", std::string(to_string(structure_of(model)))},
            {"layout_version", kLayoutVersion},
            {"activation", std::string(to_string(n.activation))},
            {"dims", {{"n_x", d.n_x}, {"n_u", d.n_u}, {"n_y", d.n_y}, {"n_n", d.n_n}}},
            {"blocks", std::move(blocks)}};
}

inline UnpackedModel model_from_json(const json& j) {
    try {
        if (j.at("layout_version").get<int>() != kLayoutVersion) throw DataError("unsupported layout_version");
        const Structure s = structure_from_string(j.at("structure").get<std::string>());
        const Activation act = activation_from_string(j.at("activation").get<std::string>());
        const auto& jd = j.at("dims");
        const Dims d{jd.at("n_x").get<Eigen::Index>(), jd.at("n_u").get<Eigen::Index>(),
                     jd.at("n_y").get<Eigen::Index>(), jd.at("n_n").get<Eigen::Index>()};
        const auto& b = j.at("blocks");
        const ParamLayout layout = make_layout(s, d, act, b.contains("x0"));
        Eigen::VectorXd theta(layout.size());
        for (const auto& blk : layout.blocks) {
            const Eigen::MatrixXd m = matrix_from_json(b.at(blk.name));
            if (m.rows() != blk.rows || m.cols() != blk.cols)
                throw DataError("block " + blk.name + " has the wrong shape");
            theta.segment(blk.offset, blk.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        }
        return unpack(theta, layout);
    } catch (const json::exception& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model JSON: ") + e.what());
    }
}

inline json to_json(const TrainReport& r) {
    json steps = json::array();
    for (const auto& s : r.step_log)
        steps.push_back({{"epoch", s.epoch},
                         {"lambda", s.lambda},
                         {"trial_cost", std::isfinite(s.trial_cost) ? json(s.trial_cost) : json(nullptr)},
                         {"accepted", s.accepted}});
    return {{"epochs_run", r.epochs_run},
            {"stop_reason", std::string(to_string(r.stop_reason))},
            {"wall_time", r.wall_time},
            {"cost_history", r.cost_history},
            {"step_log", std::move(steps)},
            {"final_theta", std::vector<double>(r.final_theta.data(), r.final_theta.data() + r.final_theta.size())},
            {"final_model", to_json(r.final_model, r.final_x0)}};
}

/// epoch,cost,rmse,lambda,accepted; epoch 0 is the initial model.
inline std::string history_csv(const TrainReport& r) {
    std::string out = "epoch,cost,rmse,lambda,accepted\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "0,%.17g,%.17g,,\n", r.cost_history.front(), std::sqrt(r.cost_history.front()));
    out += buf;
    for (const auto& e : r.epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", e.epoch, e.cost, std::sqrt(e.cost), e.lambda,
                      e.accepted ? 1 : 0);
        out += buf;
    }
    return out;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

}  // namespace grssnn
