#pragma once

// Initialization schemes for SS-NN and gR-SS-NN models.
//
//   random-ssnn   SS-NN, uniform random weights, zero biases
//   random-gr     gR-SS-NN, A = 0, W_y = 0, B C D and state branch random
//   lti-suykens   SS-NN embedding a linear model in the tanh linear regime,
//                 extra neurons disconnected, random weights in the output layers
//   lti-improved  SS-NN embedding a linear model, extra neurons random and
//                 biased, zero weights in the output layers
//   lti-gr        gR-SS-NN with the linear model copied into (A, B, C, D),
//                 random hidden layers and zero output layers
//
// Every random block is drawn from its own substream keyed by (seed, block name).

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "grssnn/errors.hpp"
#include "grssnn/lti.hpp"
#include "grssnn/random.hpp"
#include "grssnn/ssnn.hpp"

namespace grssnn {

enum class InitKind { random_ssnn, random_gr, lti_suykens, lti_improved, lti_gr };

inline std::string_view to_string(InitKind k) {
    switch (k) {
        case InitKind::random_ssnn: return "random-ssnn";
        case InitKind::random_gr: return "random-gr";
        case InitKind::lti_suykens: return "lti-suykens";
        case InitKind::lti_improved: return "lti-improved";
        case InitKind::lti_gr: return "lti-gr";
    }
    return "?";
}

inline InitKind init_kind_from_string(std::string_view s) {
    for (InitKind k : {InitKind::random_ssnn, InitKind::random_gr, InitKind::lti_suykens, InitKind::lti_improved,
                       InitKind::lti_gr})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown init scheme '" + std::string(s) + "'");
}

inline bool uses_lti(InitKind k) { return k == InitKind::lti_suykens || k == InitKind::lti_improved || k == InitKind::lti_gr; }

inline bool uses_gamma(InitKind k) { return k == InitKind::lti_suykens || k == InitKind::lti_improved; }

inline Structure structure_for(InitKind k) {
    return (k == InitKind::random_gr || k == InitKind::lti_gr) ? Structure::gr_ssnn : Structure::ssnn;
}

/// Largest tanh pre-activation magnitude treated as linear.
inline constexpr double kDefaultZMax = 0.05;

struct InitScheme {
    InitKind kind = InitKind::lti_gr;
    std::uint64_t seed = 0;
    double z_max = kDefaultZMax;
    std::optional<double> gamma;  ///< overrides the data-driven choice
};

namespace detail {

inline Eigen::MatrixXd draw(std::uint64_t seed, std::string_view block, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
    RandomStream rng(seed, block);
    return rng.uniform_matrix(rows, cols) * scale;
}

}  // namespace detail

inline Model init_random(InitKind kind, const Dims& d, Activation act, std::uint64_t seed) {
    d.validate();
    if (uses_lti(kind)) throw std::invalid_argument("init_random called with a linear-model scheme");
    const double sx = 1.0 / std::sqrt(static_cast<double>(d.n_x));
    const double su = 1.0 / std::sqrt(static_cast<double>(d.n_u));
    SsnnModel net = SsnnModel::zeros(d, act);
    net.w_x = detail::draw(seed, "W_x", d.n_x, d.n_n);
    net.w_fx = detail::draw(seed, "W_fx", d.n_n, d.n_x, sx);
    net.w_fu = detail::draw(seed, "W_fu", d.n_n, d.n_u, su);
    net.w_gx = detail::draw(seed, "W_gx", d.n_n, d.n_x, sx);
    net.w_gu = detail::draw(seed, "W_gu", d.n_n, d.n_u, su);
    if (kind == InitKind::random_ssnn) {
        net.w_y = detail::draw(seed, "W_y", d.n_y, d.n_n);
        return net;
    }
    LtiStateSpace lin = LtiStateSpace::zeros(d.n_x, d.n_u, d.n_y);
    lin.B = detail::draw(seed, "B", d.n_x, d.n_u);
    lin.C = detail::draw(seed, "C", d.n_y, d.n_x);
    lin.D = detail::draw(seed, "D", d.n_y, d.n_u);
    return GrSsnnModel{std::move(lin), std::move(net)};
}

/// Builds a model from a state-normalized linear approximation. `gamma` is
/// ignored by lti-gr.
inline Model init_from_lti(InitKind kind, const LtiStateSpace& lti, const Dims& d, Activation act, double gamma,
                           std::uint64_t seed) {
    d.validate();
    lti.validate();
    if (!uses_lti(kind)) throw std::invalid_argument("init_from_lti called with a random scheme");
    if (lti.n_x() != d.n_x || lti.n_u() != d.n_u || lti.n_y() != d.n_y)
        throw std::invalid_argument("linear model dimensions do not match the network dimensions");
    if (d.n_n < d.n_x) throw std::invalid_argument("linear-model initialization needs at least n_x neurons");
    const double sx = 1.0 / std::sqrt(static_cast<double>(d.n_x));
    const double su = 1.0 / std::sqrt(static_cast<double>(d.n_u));

    if (kind == InitKind::lti_gr) {
        SsnnModel net = SsnnModel::zeros(d, act);
        net.w_fx = detail::draw(seed, "W_fx", d.n_n, d.n_x, sx);
        net.w_fu = detail::draw(seed, "W_fu", d.n_n, d.n_u, su);
        net.b_f = detail::draw(seed, "b_f", d.n_n, 1);
        net.w_gx = detail::draw(seed, "W_gx", d.n_n, d.n_x, sx);
        net.w_gu = detail::draw(seed, "W_gu", d.n_n, d.n_u, su);
        net.b_g = detail::draw(seed, "b_g", d.n_n, 1);
        return GrSsnnModel{lti, std::move(net)};
    }

    if (d.n_n < d.n_y) throw std::invalid_argument("linear-model initialization needs at least n_y neurons");
    if (act != Activation::tanh)
        throw std::invalid_argument(std::string(to_string(kind)) + " relies on the linear regime of tanh");
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");

    const Eigen::Index ex = d.n_n - d.n_x;  // extra state-branch neurons
    const Eigen::Index ey = d.n_n - d.n_y;  // extra output-branch neurons
    SsnnModel net = SsnnModel::zeros(d, act);
    net.w_x.leftCols(d.n_x) = Eigen::MatrixXd::Identity(d.n_x, d.n_x) / gamma;
    net.w_fx.topRows(d.n_x) = gamma * lti.A;
    net.w_fu.topRows(d.n_x) = gamma * lti.B;
    net.w_y.leftCols(d.n_y) = Eigen::MatrixXd::Identity(d.n_y, d.n_y) / gamma;
    net.w_gx.topRows(d.n_y) = gamma * lti.C;
    net.w_gu.topRows(d.n_y) = gamma * lti.D;

    if (kind == InitKind::lti_suykens) {
        if (ex > 0) net.w_x.rightCols(ex) = detail::draw(seed, "W_x", d.n_x, ex) / gamma;
        if (ey > 0) net.w_y.rightCols(ey) = detail::draw(seed, "W_y", d.n_y, ey) / gamma;
        return net;
    }
    if (ex > 0) {
        net.w_fx.bottomRows(ex) = detail::draw(seed, "W_fx", ex, d.n_x, sx);
        net.w_fu.bottomRows(ex) = detail::draw(seed, "W_fu", ex, d.n_u, su);
        net.b_f.tail(ex) = detail::draw(seed, "b_f", ex, 1);
    }
    if (ey > 0) {
        net.w_gx.bottomRows(ey) = detail::draw(seed, "W_gx", ey, d.n_x, sx);
        net.w_gu.bottomRows(ey) = detail::draw(seed, "W_gu", ey, d.n_u, su);
        net.b_g.tail(ey) = detail::draw(seed, "b_g", ey, 1);
    }
    return net;
}

struct GammaSelection {
    double gamma = 1.0;
    double max_preactivation = 0.0;  ///< max |A x + B u|, |C x + D u| over the record
    bool degenerate = false;         ///< all pre-activations were zero; gamma fell back to 1
};

/// Chooses gamma so that every linear-part pre-activation stays within z_max on `u`.
inline GammaSelection select_gamma(const LtiStateSpace& lti, const Eigen::Ref<const Eigen::MatrixXd>& u,
                                   const Eigen::Ref<const Eigen::VectorXd>& x0, double z_max = kDefaultZMax) {
    if (!(z_max > 0.0)) throw std::invalid_argument("z_max must be positive");
    const LtiTrajectory t = simulate_lti(lti, u, x0);
    // state-branch pre-activations are x(k+1) = A x(k) + B u(k), output-branch ones y(k)
    const Eigen::Index n = u.rows();
    double peak = 0.0;
    if (n > 0) peak = std::max(t.x.bottomRows(n).cwiseAbs().maxCoeff(), t.y.cwiseAbs().maxCoeff());
    if (!std::isfinite(peak)) throw DivergenceError(0, "linear model diverges on the training input");
    GammaSelection g;
    g.max_preactivation = peak;
    if (peak == 0.0) {
        g.degenerate = true;
        g.gamma = 1.0;
        return g;
    }
    g.gamma = z_max / peak;
    return g;
}

inline GammaSelection select_gamma(const LtiStateSpace& lti, const Eigen::Ref<const Eigen::MatrixXd>& u,
                                   double z_max = kDefaultZMax) {
    return select_gamma(lti, u, Eigen::VectorXd::Zero(lti.n_x()), z_max);
}

}  // namespace grssnn
