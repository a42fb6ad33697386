#pragma once

// State-space neural networks.
//
// SS-NN:
//   x(k+1) = W_x  s(W_fx x(k) + W_fu u(k) + b_f) + b_x
//   y(k)   = W_y  s(W_gx x(k) + W_gu u(k) + b_g) + b_y
//
// gR-SS-NN adds a parallel linear term A x + B u (state) and C x + D u (output)
// to the same two one-hidden-layer branches.

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "grssnn/errors.hpp"
#include "grssnn/lti.hpp"

namespace grssnn {

enum class Activation { tanh, rbf, relu };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::rbf: return "rbf";
        case Activation::relu: return "relu";
    }
    return "?";
}

inline Activation activation_from_string(std::string_view s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "rbf" || s == "gaussian-rbf") return Activation::rbf;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::tanh: return std::tanh(z);
        case Activation::rbf: return std::exp(-z * z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return 0.0;
}

inline double activate_derivative(Activation a, double z) {
    switch (a) {
        case Activation::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::rbf: return -2.0 * z * std::exp(-z * z);
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

inline Eigen::VectorXd activate(Activation a, const Eigen::VectorXd& z) {
    return z.unaryExpr([a](double v) { return activate(a, v); });
}

inline Eigen::VectorXd activate_derivative(Activation a, const Eigen::VectorXd& z) {
    return z.unaryExpr([a](double v) { return activate_derivative(a, v); });
}

struct Dims {
    Eigen::Index n_x = 0, n_u = 0, n_y = 0, n_n = 0;

    friend bool operator==(const Dims&, const Dims&) = default;

    void validate() const {
        if (n_x < 1 || n_u < 1 || n_y < 1 || n_n < 1)
            throw std::invalid_argument("model dimensions must all be at least 1");
    }
};

/// Weights of one SS-NN (also the nonlinear branches of a gR-SS-NN).
struct SsnnModel {
    Eigen::MatrixXd w_x;   ///< n_x x n_n
    Eigen::MatrixXd w_fx;  ///< n_n x n_x
    Eigen::MatrixXd w_fu;  ///< n_n x n_u
    Eigen::VectorXd b_f;   ///< n_n
    Eigen::VectorXd b_x;   ///< n_x
    Eigen::MatrixXd w_y;   ///< n_y x n_n
    Eigen::MatrixXd w_gx;  ///< n_n x n_x
    Eigen::MatrixXd w_gu;  ///< n_n x n_u
    Eigen::VectorXd b_g;   ///< n_n
    Eigen::VectorXd b_y;   ///< n_y
    Activation activation = Activation::tanh;

    static SsnnModel zeros(const Dims& d, Activation act = Activation::tanh) {
        d.validate();
        SsnnModel m;
        m.w_x = Eigen::MatrixXd::Zero(d.n_x, d.n_n);
        m.w_fx = Eigen::MatrixXd::Zero(d.n_n, d.n_x);
        m.w_fu = Eigen::MatrixXd::Zero(d.n_n, d.n_u);
        m.b_f = Eigen::VectorXd::Zero(d.n_n);
        m.b_x = Eigen::VectorXd::Zero(d.n_x);
        m.w_y = Eigen::MatrixXd::Zero(d.n_y, d.n_n);
        m.w_gx = Eigen::MatrixXd::Zero(d.n_n, d.n_x);
        m.w_gu = Eigen::MatrixXd::Zero(d.n_n, d.n_u);
        m.b_g = Eigen::VectorXd::Zero(d.n_n);
        m.b_y = Eigen::VectorXd::Zero(d.n_y);
        m.activation = act;
        return m;
    }

    Dims dims() const { return {w_x.rows(), w_fu.cols(), w_y.rows(), w_x.cols()}; }

    void validate() const {
        const Dims d = dims();
        d.validate();
        auto check = [](bool ok, const char* what) {
            if (!ok) throw std::invalid_argument(std::string("inconsistent shape: ") + what);
        };
        check(w_fx.rows() == d.n_n && w_fx.cols() == d.n_x, "W_fx");
        check(w_fu.rows() == d.n_n, "W_fu");
        check(b_f.size() == d.n_n, "b_f");
        check(b_x.size() == d.n_x, "b_x");
        check(w_y.cols() == d.n_n, "W_y");
        check(w_gx.rows() == d.n_n && w_gx.cols() == d.n_x, "W_gx");
        check(w_gu.rows() == d.n_n && w_gu.cols() == d.n_u, "W_gu");
        check(b_g.size() == d.n_n, "b_g");
        check(b_y.size() == d.n_y, "b_y");
    }
};

/// Generalized residual SS-NN: explicit linear term plus SS-NN branches.
struct GrSsnnModel {
    LtiStateSpace linear;
    SsnnModel residual;

    Dims dims() const { return residual.dims(); }
    Activation activation() const { return residual.activation; }

    void validate() const {
        residual.validate();
        linear.validate();
        const Dims d = dims();
        if (linear.n_x() != d.n_x || linear.n_u() != d.n_u || linear.n_y() != d.n_y)
            throw std::invalid_argument("linear part dimensions differ from the network dimensions");
    }
};

using Model = std::variant<SsnnModel, GrSsnnModel>;

enum class Structure { ssnn, gr_ssnn };

inline std::string_view to_string(Structure s) { return s == Structure::ssnn ? "ssnn" : "gr-ssnn"; }

inline Structure structure_from_string(std::string_view s) {
    if (s == "ssnn") return Structure::ssnn;
    if (s == "gr-ssnn") return Structure::gr_ssnn;
    throw ConfigError("unknown model structure '" + std::string(s) + "'");
}

inline Structure structure_of(const Model& m) {
    return std::holds_alternative<SsnnModel>(m) ? Structure::ssnn : Structure::gr_ssnn;
}

inline const SsnnModel& network_of(const Model& m) {
    return std::visit(
        [](const auto& v) -> const SsnnModel& {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, SsnnModel>)
                return v;
            else
                return v.residual;
        },
        m);
}

inline const LtiStateSpace* linear_of(const Model& m) {
    const auto* gr = std::get_if<GrSsnnModel>(&m);
    return gr ? &gr->linear : nullptr;
}

inline Dims dims_of(const Model& m) { return network_of(m).dims(); }

inline void validate(const Model& m) {
    std::visit([](const auto& v) { v.validate(); }, m);
}

/// States whose magnitude exceeds this bound abort a simulation.
inline constexpr double kDivergenceBound = 1e6;

struct Trajectory {
    Eigen::MatrixXd y;  ///< N x n_y
    Eigen::MatrixXd x;  ///< (N+1) x n_x, includes x(N)
};

namespace detail {

inline Trajectory simulate_network(const SsnnModel& net, const LtiStateSpace* lin,
                                   const Eigen::Ref<const Eigen::MatrixXd>& u,
                                   const Eigen::Ref<const Eigen::VectorXd>& x0) {
    const Dims d = net.dims();
    if (u.cols() != d.n_u) throw std::invalid_argument("simulate: input has wrong channel count");
    if (x0.size() != d.n_x) throw std::invalid_argument("simulate: x0 has wrong length");
    const Eigen::Index n = u.rows();
    Trajectory out{Eigen::MatrixXd(n, d.n_y), Eigen::MatrixXd(n + 1, d.n_x)};
    Eigen::VectorXd x = x0, x_next(d.n_x), uk(d.n_u), yk(d.n_y), z(d.n_n);
    out.x.row(0) = x.transpose();
    for (Eigen::Index k = 0; k < n; ++k) {
        uk = u.row(k).transpose();

        z.noalias() = net.w_gx * x;
        z.noalias() += net.w_gu * uk;
        z += net.b_g;
        if (lin) {
            yk.noalias() = lin->C * x;
            yk.noalias() += lin->D * uk;
        } else {
            yk.setZero();
        }
        yk.noalias() += net.w_y * activate(net.activation, z);
        yk += net.b_y;
        out.y.row(k) = yk.transpose();

        z.noalias() = net.w_fx * x;
        z.noalias() += net.w_fu * uk;
        z += net.b_f;
        if (lin) {
            x_next.noalias() = lin->A * x;
            x_next.noalias() += lin->B * uk;
        } else {
            x_next.setZero();
        }
        x_next.noalias() += net.w_x * activate(net.activation, z);
        x_next += net.b_x;

        if (!yk.allFinite()) throw DivergenceError(static_cast<std::size_t>(k), "model output became non-finite");
        if (!x_next.allFinite() || x_next.cwiseAbs().maxCoeff() > kDivergenceBound)
            throw DivergenceError(static_cast<std::size_t>(k + 1), "model state diverged");
        x = x_next;
        out.x.row(k + 1) = x.transpose();
    }
    return out;
}

}  // namespace detail

inline Trajectory simulate(const SsnnModel& m, const Eigen::Ref<const Eigen::MatrixXd>& u,
                           const Eigen::Ref<const Eigen::VectorXd>& x0) {
    m.validate();
    return detail::simulate_network(m, nullptr, u, x0);
}

inline Trajectory simulate(const GrSsnnModel& m, const Eigen::Ref<const Eigen::MatrixXd>& u,
                           const Eigen::Ref<const Eigen::VectorXd>& x0) {
    m.validate();
    return detail::simulate_network(m.residual, &m.linear, u, x0);
}

inline Trajectory simulate(const Model& m, const Eigen::Ref<const Eigen::MatrixXd>& u,
                           const Eigen::Ref<const Eigen::VectorXd>& x0) {
    return std::visit([&](const auto& v) { return simulate(v, u, x0); }, m);
}

inline Trajectory simulate(const Model& m, const Eigen::Ref<const Eigen::MatrixXd>& u) {
    return simulate(m, u, Eigen::VectorXd::Zero(dims_of(m).n_x));
}

}  // namespace grssnn
