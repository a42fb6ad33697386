#pragma once

// Linear approximation of a (possibly nonlinear) system from one record.
//
// Stage 1 is a past-output MOESP subspace estimate: block-Hankel matrices of
// past/future inputs and outputs, an LQ factorization, and an SVD of the part
// of the future outputs explained by the past (instrumented by past I/O after
// removing the future inputs). A, C follow from the shift structure of the
// extended observability matrix; B, D and x0 from a linear least-squares fit.
// Stage 2 refines (A, B, C, D, x0) on the simulation error with the same LM
// engine used for network training.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grssnn/errors.hpp"
#include "grssnn/lti.hpp"
#include "grssnn/optim.hpp"
#include "grssnn/signal.hpp"
#include "grssnn/ssnn.hpp"

namespace grssnn {

struct LtiEstimateOptions {
    int horizon = 0;  ///< block rows per Hankel half; 0 selects max(2*order+2, 10)
    bool refine = true;
    LmOptions refine_options{.max_epochs = 200};
};

struct LtiEstimate {
    LtiStateSpace model;
    Eigen::VectorXd x0;
    int order = 0;
    double subspace_rmse = 0.0;
    double refined_rmse = 0.0;
    bool stable = true;
    Eigen::VectorXd hankel_singular_values;
    std::vector<std::string> warnings;
};

namespace detail {

// Block-Hankel matrix with `block_rows` block rows starting at sample `start`, `cols` columns.
inline Eigen::MatrixXd block_hankel(const Eigen::MatrixXd& s, Eigen::Index start, Eigen::Index block_rows,
                                    Eigen::Index cols) {
    const Eigen::Index ch = s.cols();
    Eigen::MatrixXd h(block_rows * ch, cols);
    for (Eigen::Index r = 0; r < block_rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) h.block(r * ch, c, ch, 1) = s.row(start + r + c).transpose();
    return h;
}

// Fits B, D and x0 for fixed (A, C) by linear least squares on the simulated output.
inline std::pair<LtiStateSpace, Eigen::VectorXd> fit_bd_x0(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                                                           const Dataset& d) {
    const Eigen::Index n = a.rows(), nu = d.n_u(), ny = d.n_y(), len = d.samples();
    const Eigen::Index cols = n + n * nu + ny * nu;
    Eigen::MatrixXd phi(len * ny, cols);
    auto put = [&](Eigen::Index col, const Eigen::MatrixXd& y) {
        const Eigen::MatrixXd yt = y.transpose();
        phi.col(col) = Eigen::Map<const Eigen::VectorXd>(yt.data(), yt.size());
    };
    const Eigen::MatrixXd zero_u = Eigen::MatrixXd::Zero(len, nu);
    LtiStateSpace probe = LtiStateSpace::zeros(n, nu, ny);
    probe.A = a;
    probe.C = c;
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        put(col++, simulate_lti(probe, zero_u, Eigen::VectorXd::Unit(n, i)).y);
    }
    for (Eigen::Index l = 0; l < nu; ++l) {
        for (Eigen::Index i = 0; i < n; ++i) {
            probe.B.setZero();
            probe.B(i, l) = 1.0;
            put(col++, simulate_lti(probe, d.u).y);
        }
    }
    probe.B.setZero();
    for (Eigen::Index l = 0; l < nu; ++l) {
        for (Eigen::Index r = 0; r < ny; ++r) {
            probe.D.setZero();
            probe.D(r, l) = 1.0;
            put(col++, simulate_lti(probe, d.u).y);
        }
    }
    const Eigen::MatrixXd yt = d.y.transpose();
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(yt.data(), yt.size());
    const Eigen::VectorXd sol = phi.colPivHouseholderQr().solve(target);

    LtiStateSpace m = LtiStateSpace::zeros(n, nu, ny);
    m.A = a;
    m.C = c;
    Eigen::VectorXd x0 = sol.head(n);
    col = n;
    for (Eigen::Index l = 0; l < nu; ++l)
        for (Eigen::Index i = 0; i < n; ++i) m.B(i, l) = sol(col++);
    for (Eigen::Index l = 0; l < nu; ++l)
        for (Eigen::Index r = 0; r < ny; ++r) m.D(r, l) = sol(col++);
    return {m, x0};
}

}  // namespace detail

inline LtiEstimate estimate_lti(const Dataset& d, int order, const LtiEstimateOptions& opts = {}) {
    d.validate();
    if (order < 1) throw std::invalid_argument("model order must be at least 1");
    const Eigen::Index len = d.samples();
    if (len < 20 * (order + 1))
        throw DataError("estimate_lti needs at least " + std::to_string(20 * (order + 1)) + " samples for order " +
                        std::to_string(order));
    const Eigen::Index nu = d.n_u(), ny = d.n_y();
    const Eigen::Index s = opts.horizon > 0 ? opts.horizon : std::max<Eigen::Index>(2 * order + 2, 10);
    const Eigen::Index cols = len - 2 * s + 1;
    if ((s - 1) * ny < order) throw std::invalid_argument("horizon too short for the requested order");
    if (cols < 2 * s * (nu + ny)) throw DataError("record too short for the subspace horizon");

    LtiEstimate est;
    est.order = order;

    const Eigen::MatrixXd u_p = detail::block_hankel(d.u, 0, s, cols);
    const Eigen::MatrixXd u_f = detail::block_hankel(d.u, s, s, cols);
    const Eigen::MatrixXd y_p = detail::block_hankel(d.y, 0, s, cols);
    const Eigen::MatrixXd y_f = detail::block_hankel(d.y, s, s, cols);
    const Eigen::Index r1 = s * nu, r2 = s * (nu + ny), r3 = s * ny;

    {
        Eigen::MatrixXd uu(2 * s * nu, cols);
        uu << u_p, u_f;
        Eigen::JacobiSVD<Eigen::MatrixXd> sv(uu / std::sqrt(static_cast<double>(cols)));
        const Eigen::VectorXd sg = sv.singularValues();
        if (sg(sg.size() - 1) < 1e-10 * sg(0))
            est.warnings.push_back("input is not persistently exciting for the chosen horizon");
    }

    Eigen::MatrixXd z(r1 + r2 + r3, cols);
    z << u_f, u_p, y_p, y_f;
    z /= std::sqrt(static_cast<double>(cols));
    // Z = L Q^T with L lower triangular, from the QR factorization of Z^T
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z.transpose());
    const Eigen::MatrixXd l =
        qr.matrixQR().topRows(z.rows()).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    const Eigen::MatrixXd l32 = l.block(r1 + r2, r1, r3, r2);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(l32, Eigen::ComputeThinU);
    est.hankel_singular_values = svd.singularValues();
    if (est.hankel_singular_values.size() < order || !(est.hankel_singular_values(order - 1) > 0.0))
        throw DataError("subspace step is rank deficient for order " + std::to_string(order));

    const Eigen::MatrixXd gamma = svd.matrixU().leftCols(order) *
                                  est.hankel_singular_values.head(order).cwiseSqrt().asDiagonal();
    const Eigen::MatrixXd c = gamma.topRows(ny);
    const Eigen::MatrixXd a =
        gamma.topRows((s - 1) * ny).completeOrthogonalDecomposition().solve(gamma.bottomRows((s - 1) * ny));

    auto [sub_model, sub_x0] = detail::fit_bd_x0(a, c, d);
    est.subspace_rmse = rmse(d.y, simulate_lti(sub_model, d.u, sub_x0).y);
    est.model = sub_model;
    est.x0 = sub_x0;
    est.refined_rmse = est.subspace_rmse;

    if (opts.refine && est.subspace_rmse > 0.0) {
        // the linear model is a gR-SS-NN whose (single-neuron) network is frozen at zero
        GrSsnnModel gr{sub_model, SsnnModel::zeros({order, nu, ny, 1})};
        TrainSpec spec;
        spec.x0 = sub_x0;
        spec.frozen_blocks = {"W_x", "W_fx", "W_fu", "b_f", "b_x", "W_y", "W_gx", "W_gu", "b_g", "b_y"};
        try {
            const TrainReport rep = lm_train(Model{gr}, d, opts.refine_options, spec);
            const auto& refined = std::get<GrSsnnModel>(rep.final_model).linear;
            const double r = rmse(d.y, simulate_lti(refined, d.u, rep.final_x0).y);
            if (r <= est.subspace_rmse) {
                est.model = refined;
                est.x0 = rep.final_x0;
                est.refined_rmse = r;
            }
        } catch (const DivergenceError&) {
            est.warnings.push_back("refinement diverged; subspace estimate kept");
        }
    }
    est.stable = est.model.is_stable();
    if (!est.stable) est.warnings.push_back("estimated linear model is unstable");
    return est;
}

}  // namespace grssnn
