#pragma once

// Discrete-time linear state-space models:
//   x(k+1) = A x(k) + B u(k)
//   y(k)   = C x(k) + D u(k)

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "grssnn/signal.hpp"

namespace grssnn {

struct LtiStateSpace {
    Eigen::MatrixXd A, B, C, D;

    LtiStateSpace() = default;
    LtiStateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
        validate();
    }

    static LtiStateSpace zeros(Eigen::Index n_x, Eigen::Index n_u, Eigen::Index n_y) {
        return {Eigen::MatrixXd::Zero(n_x, n_x), Eigen::MatrixXd::Zero(n_x, n_u), Eigen::MatrixXd::Zero(n_y, n_x),
                Eigen::MatrixXd::Zero(n_y, n_u)};
    }

    Eigen::Index n_x() const { return A.rows(); }
    Eigen::Index n_u() const { return B.cols(); }
    Eigen::Index n_y() const { return C.rows(); }

    void validate() const {
        if (A.rows() != A.cols()) throw std::invalid_argument("A must be square");
        if (B.rows() != A.rows()) throw std::invalid_argument("B must have n_x rows");
        if (C.cols() != A.rows()) throw std::invalid_argument("C must have n_x columns");
        if (D.rows() != C.rows() || D.cols() != B.cols()) throw std::invalid_argument("D must be n_y x n_u");
    }

    double spectral_radius() const {
        if (n_x() == 0) return 0.0;
        return A.eigenvalues().cwiseAbs().maxCoeff();
    }

    /// All eigenvalues of A strictly inside the unit circle.
    bool is_stable() const { return spectral_radius() < 1.0; }
};

struct LtiTrajectory {
    Eigen::MatrixXd y;  ///< N x n_y
    Eigen::MatrixXd x;  ///< (N+1) x n_x, includes x(N)
};

inline LtiTrajectory simulate_lti(const LtiStateSpace& m, const Eigen::Ref<const Eigen::MatrixXd>& u,
                                  const Eigen::Ref<const Eigen::VectorXd>& x0) {
    m.validate();
    if (u.cols() != m.n_u()) throw std::invalid_argument("simulate_lti: input has wrong channel count");
    if (x0.size() != m.n_x()) throw std::invalid_argument("simulate_lti: x0 has wrong length");
    const Eigen::Index n = u.rows();
    LtiTrajectory out{Eigen::MatrixXd(n, m.n_y()), Eigen::MatrixXd(n + 1, m.n_x())};
    Eigen::VectorXd x = x0;
    Eigen::VectorXd uk(m.n_u());
    out.x.row(0) = x.transpose();
    for (Eigen::Index k = 0; k < n; ++k) {
        uk = u.row(k).transpose();
        out.y.row(k) = (m.C * x + m.D * uk).transpose();
        x = m.A * x + m.B * uk;
        out.x.row(k + 1) = x.transpose();
    }
    return out;
}

inline LtiTrajectory simulate_lti(const LtiStateSpace& m, const Eigen::Ref<const Eigen::MatrixXd>& u) {
    return simulate_lti(m, u, Eigen::VectorXd::Zero(m.n_x()));
}

/// Markov parameters h(0) = D, h(k) = C A^(k-1) B for k = 1..lags.
inline std::vector<Eigen::MatrixXd> markov_parameters(const LtiStateSpace& m, int lags) {
    std::vector<Eigen::MatrixXd> h;
    h.reserve(static_cast<std::size_t>(lags) + 1);
    h.push_back(m.D);
    Eigen::MatrixXd ak_b = m.B;
    for (int k = 1; k <= lags; ++k) {
        h.push_back(m.C * ak_b);
        ak_b = m.A * ak_b;
    }
    return h;
}

/// Series interconnection: the output of `first` drives `second`.
inline LtiStateSpace series(const LtiStateSpace& first, const LtiStateSpace& second) {
    if (first.n_y() != second.n_u()) throw std::invalid_argument("series: dimension mismatch");
    const Eigen::Index n1 = first.n_x(), n2 = second.n_x();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    a.topLeftCorner(n1, n1) = first.A;
    a.bottomLeftCorner(n2, n1) = second.B * first.C;
    a.bottomRightCorner(n2, n2) = second.A;
    Eigen::MatrixXd b(n1 + n2, first.n_u());
    b << first.B, second.B * first.D;
    Eigen::MatrixXd c(second.n_y(), n1 + n2);
    c << second.D * first.C, second.C;
    return {a, b, c, second.D * first.D};
}

/// Applies the state transform x = T x'.
inline LtiStateSpace similarity_transform(const LtiStateSpace& m, const Eigen::MatrixXd& t) {
    const Eigen::MatrixXd t_inv = t.inverse();
    return {t_inv * m.A * t, t_inv * m.B, m.C * t, m.D};
}

struct StateNormalization {
    LtiStateSpace model;
    Eigen::VectorXd scale;  ///< diagonal of T, the per-state std before scaling
};

/// Rescales the states so that each simulated state on `u` has unit (population) std.
inline StateNormalization normalize_states(const LtiStateSpace& m, const Eigen::Ref<const Eigen::MatrixXd>& u,
                                           const Eigen::Ref<const Eigen::VectorXd>& x0) {
    const auto traj = simulate_lti(m, u, x0);
    // std over the N states that produced outputs, x(0)..x(N-1)
    const Eigen::MatrixXd states = traj.x.topRows(u.rows());
    Eigen::VectorXd scale(m.n_x());
    for (Eigen::Index i = 0; i < m.n_x(); ++i) {
        scale(i) = population_std(states.col(i));
        if (!(scale(i) > 0.0) || !std::isfinite(scale(i)))
            throw DataError("state " + std::to_string(i + 1) + " has zero variance on the given input");
    }
    const Eigen::VectorXd inv = scale.cwiseInverse();
    LtiStateSpace out{inv.asDiagonal() * m.A * scale.asDiagonal(), inv.asDiagonal() * m.B,
                      m.C * scale.asDiagonal(), m.D};
    return {std::move(out), std::move(scale)};
}

inline StateNormalization normalize_states(const LtiStateSpace& m, const Eigen::Ref<const Eigen::MatrixXd>& u) {
    return normalize_states(m, u, Eigen::VectorXd::Zero(m.n_x()));
}

}  // namespace grssnn
