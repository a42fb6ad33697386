#pragma once

// Exact derivatives of the simulated output with respect to theta.
//
// output_jacobian() propagates the state sensitivities dx(k)/dtheta forward
// along the unrolled recursion and returns the full (N*n_y) x dim(theta)
// Jacobian; row k*n_y + i holds dy_i(k)/dtheta. gradient_bptt() computes
// J^T w for a weight signal w by backpropagation through time. Both walk the
// same chain rule in opposite directions and are tested against each other.

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "grssnn/params.hpp"
#include "grssnn/ssnn.hpp"

namespace grssnn {

struct SimulationJacobian {
    Eigen::MatrixXd y;         ///< N x n_y simulated output
    Eigen::MatrixXd jacobian;  ///< (N*n_y) x layout.size()
};

namespace detail {

inline void check_layout(const Model& m, const ParamLayout& layout) {
    if (layout.structure != structure_of(m) || !(layout.dims == dims_of(m)))
        throw std::invalid_argument("parameter layout does not describe this model");
}

struct BlockIndex {
    const ParamBlock* a = nullptr;
    const ParamBlock* b = nullptr;
    const ParamBlock* c = nullptr;
    const ParamBlock* d = nullptr;
    const ParamBlock *w_x, *w_fx, *w_fu, *b_f, *b_x, *w_y, *w_gx, *w_gu, *b_g, *b_y;
    const ParamBlock* x0 = nullptr;

    explicit BlockIndex(const ParamLayout& l)
        : w_x(&l.block("W_x")), w_fx(&l.block("W_fx")), w_fu(&l.block("W_fu")), b_f(&l.block("b_f")),
          b_x(&l.block("b_x")), w_y(&l.block("W_y")), w_gx(&l.block("W_gx")), w_gu(&l.block("W_gu")),
          b_g(&l.block("b_g")), b_y(&l.block("b_y")) {
        if (l.structure == Structure::gr_ssnn) {
            a = &l.block("A");
            b = &l.block("B");
            c = &l.block("C");
            d = &l.block("D");
        }
        if (l.has_x0) x0 = &l.block("x0");
    }
};

// Adds the direct partial derivatives of one layer, out = [L_x L_u] [x;u] + W s(Wx x + Wu u + b) + bo,
// to the rows of `sens` (n_out x p). `lx`/`lu` are the linear blocks (may be null).
inline void add_direct_partials(Eigen::Ref<Eigen::MatrixXd> sens, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                const Eigen::VectorXd& h, const Eigen::VectorXd& dh, const Eigen::MatrixXd& w_out,
                                const ParamBlock* lx, const ParamBlock* lu, const ParamBlock& bw_out,
                                const ParamBlock& bw_in_x, const ParamBlock& bw_in_u, const ParamBlock& bb_in,
                                const ParamBlock& bb_out) {
    const Eigen::Index n_out = sens.rows();
    for (Eigen::Index i = 0; i < n_out; ++i) {
        if (lx)
            for (Eigen::Index j = 0; j < x.size(); ++j) sens(i, lx->index(i, j)) += x(j);
        if (lu)
            for (Eigen::Index l = 0; l < u.size(); ++l) sens(i, lu->index(i, l)) += u(l);
        for (Eigen::Index j = 0; j < h.size(); ++j) sens(i, bw_out.index(i, j)) += h(j);
        sens(i, bb_out.index(i, 0)) += 1.0;
    }
    for (Eigen::Index j = 0; j < h.size(); ++j) {
        if (dh(j) == 0.0) continue;
        const Eigen::VectorXd col = w_out.col(j) * dh(j);
        for (Eigen::Index l = 0; l < x.size(); ++l) sens.col(bw_in_x.index(j, l)) += col * x(l);
        for (Eigen::Index l = 0; l < u.size(); ++l) sens.col(bw_in_u.index(j, l)) += col * u(l);
        sens.col(bb_in.index(j, 0)) += col;
    }
}

}  // namespace detail

/// Full simulation Jacobian by forward sensitivity propagation. When the layout
/// carries an x0 block, its columns are dy/dx0; otherwise x0 is a constant.
inline SimulationJacobian output_jacobian(const Model& model, const Eigen::Ref<const Eigen::MatrixXd>& u,
                                          const Eigen::Ref<const Eigen::VectorXd>& x0, const ParamLayout& layout) {
    detail::check_layout(model, layout);
    const Trajectory traj = simulate(model, u, x0);  // throws on divergence
    const SsnnModel& net = network_of(model);
    const LtiStateSpace* lin = linear_of(model);
    const Dims d = net.dims();
    const Eigen::Index n = u.rows(), p = layout.size();
    const detail::BlockIndex bi(layout);

    SimulationJacobian out{traj.y, Eigen::MatrixXd::Zero(n * d.n_y, p)};
    Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(d.n_x, p);
    Eigen::MatrixXd sens_next(d.n_x, p), out_rows(d.n_y, p);
    if (bi.x0)
        for (Eigen::Index i = 0; i < d.n_x; ++i) sens(i, bi.x0->index(i, 0)) = 1.0;

    Eigen::VectorXd x(d.n_x), uk(d.n_u), z(d.n_n), h, dh;
    Eigen::MatrixXd g(d.n_y, d.n_x), m(d.n_x, d.n_x);
    for (Eigen::Index k = 0; k < n; ++k) {
        x = traj.x.row(k).transpose();
        uk = u.row(k).transpose();

        z = net.w_gx * x + net.w_gu * uk + net.b_g;
        h = activate(net.activation, z);
        dh = activate_derivative(net.activation, z);
        g.noalias() = net.w_y * dh.asDiagonal() * net.w_gx;
        if (lin) g += lin->C;
        out_rows.noalias() = g * sens;
        detail::add_direct_partials(out_rows, x, uk, h, dh, net.w_y, bi.c, bi.d, *bi.w_y, *bi.w_gx, *bi.w_gu, *bi.b_g,
                                    *bi.b_y);
        out.jacobian.middleRows(k * d.n_y, d.n_y) = out_rows;

        z = net.w_fx * x + net.w_fu * uk + net.b_f;
        h = activate(net.activation, z);
        dh = activate_derivative(net.activation, z);
        m.noalias() = net.w_x * dh.asDiagonal() * net.w_fx;
        if (lin) m += lin->A;
        sens_next.noalias() = m * sens;
        detail::add_direct_partials(sens_next, x, uk, h, dh, net.w_x, bi.a, bi.b, *bi.w_x, *bi.w_fx, *bi.w_fu, *bi.b_f,
                                    *bi.b_x);
        sens.swap(sens_next);
    }
    return out;
}

/// J^T w by backpropagation through time, where w (N x n_y) weights each output sample.
inline Eigen::VectorXd gradient_bptt(const Model& model, const Eigen::Ref<const Eigen::MatrixXd>& u,
                                     const Eigen::Ref<const Eigen::VectorXd>& x0, const ParamLayout& layout,
                                     const Eigen::Ref<const Eigen::MatrixXd>& w) {
    detail::check_layout(model, layout);
    const Trajectory traj = simulate(model, u, x0);
    const SsnnModel& net = network_of(model);
    const LtiStateSpace* lin = linear_of(model);
    const Dims d = net.dims();
    if (w.rows() != u.rows() || w.cols() != d.n_y) throw std::invalid_argument("gradient_bptt: weight shape mismatch");

    // gradients accumulate in a model of the same shape, packed at the end
    Model grad = model;
    std::visit(
        [&](auto& gm) {
            if constexpr (std::is_same_v<std::decay_t<decltype(gm)>, GrSsnnModel>) {
                gm.linear = LtiStateSpace::zeros(d.n_x, d.n_u, d.n_y);
                gm.residual = SsnnModel::zeros(d, net.activation);
            } else {
                gm = SsnnModel::zeros(d, net.activation);
            }
        },
        grad);
    SsnnModel& gn = std::holds_alternative<SsnnModel>(grad) ? std::get<SsnnModel>(grad)
                                                            : std::get<GrSsnnModel>(grad).residual;
    LtiStateSpace* gl = std::holds_alternative<GrSsnnModel>(grad) ? &std::get<GrSsnnModel>(grad).linear : nullptr;

    Eigen::VectorXd lam = Eigen::VectorXd::Zero(d.n_x), lam_prev(d.n_x);
    Eigen::VectorXd x(d.n_x), uk(d.n_u), wk(d.n_y), z, h, a;
    for (Eigen::Index k = u.rows() - 1; k >= 0; --k) {
        x = traj.x.row(k).transpose();
        uk = u.row(k).transpose();

        // state transition x(k) -> x(k+1); lam = dL/dx(k+1)
        z = net.w_fx * x + net.w_fu * uk + net.b_f;
        h = activate(net.activation, z);
        a = activate_derivative(net.activation, z).cwiseProduct(net.w_x.transpose() * lam);
        gn.w_x += lam * h.transpose();
        gn.b_x += lam;
        gn.w_fx += a * x.transpose();
        gn.w_fu += a * uk.transpose();
        gn.b_f += a;
        lam_prev = net.w_fx.transpose() * a;
        if (lin) {
            gl->A += lam * x.transpose();
            gl->B += lam * uk.transpose();
            lam_prev += lin->A.transpose() * lam;
        }

        // output at sample k
        wk = w.row(k).transpose();
        z = net.w_gx * x + net.w_gu * uk + net.b_g;
        h = activate(net.activation, z);
        a = activate_derivative(net.activation, z).cwiseProduct(net.w_y.transpose() * wk);
        gn.w_y += wk * h.transpose();
        gn.b_y += wk;
        gn.w_gx += a * x.transpose();
        gn.w_gu += a * uk.transpose();
        gn.b_g += a;
        lam_prev += net.w_gx.transpose() * a;
        if (lin) {
            gl->C += wk * x.transpose();
            gl->D += wk * uk.transpose();
            lam_prev += lin->C.transpose() * wk;
        }
        lam = lam_prev;
    }
    if (layout.has_x0) return pack(grad, lam).theta;
    return pack(grad).theta;
}

}  // namespace grssnn
