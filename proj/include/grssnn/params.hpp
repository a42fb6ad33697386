#pragma once

// Flat parameter vector theta and its layout.
//
// Each weight/bias block occupies a contiguous slice of theta, column-major
// inside the block. Block order is fixed per structure:
//   gR-SS-NN only:  A B C D
//   both:           W_x W_fx W_fu b_f b_x W_y W_gx W_gu b_g b_y
//   optional:       x0

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grssnn/ssnn.hpp"

namespace grssnn {

inline constexpr int kLayoutVersion = 1;

struct ParamBlock {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index size() const { return rows * cols; }
    /// theta index of entry (i, j) of this block.
    Eigen::Index index(Eigen::Index i, Eigen::Index j) const { return offset + j * rows + i; }
};

struct ParamLayout {
    int version = kLayoutVersion;
    Structure structure = Structure::ssnn;
    Dims dims;
    Activation activation = Activation::tanh;
    bool has_x0 = false;
    std::vector<ParamBlock> blocks;

    Eigen::Index size() const { return blocks.empty() ? 0 : blocks.back().offset + blocks.back().size(); }

    const ParamBlock& block(std::string_view name) const {
        auto it = std::find_if(blocks.begin(), blocks.end(), [&](const ParamBlock& b) { return b.name == name; });
        if (it == blocks.end()) throw std::out_of_range("no parameter block named '" + std::string(name) + "'");
        return *it;
    }

    bool contains(std::string_view name) const {
        return std::any_of(blocks.begin(), blocks.end(), [&](const ParamBlock& b) { return b.name == name; });
    }
};

inline ParamLayout make_layout(Structure s, const Dims& d, Activation act, bool with_x0) {
    d.validate();
    ParamLayout l;
    l.structure = s;
    l.dims = d;
    l.activation = act;
    l.has_x0 = with_x0;
    Eigen::Index off = 0;
    auto add = [&](const char* name, Eigen::Index r, Eigen::Index c) {
        l.blocks.push_back({name, off, r, c});
        off += r * c;
    };
    if (s == Structure::gr_ssnn) {
        add("A", d.n_x, d.n_x);
        add("B", d.n_x, d.n_u);
        add("C", d.n_y, d.n_x);
        add("D", d.n_y, d.n_u);
    }
    add("W_x", d.n_x, d.n_n);
    add("W_fx", d.n_n, d.n_x);
    add("W_fu", d.n_n, d.n_u);
    add("b_f", d.n_n, 1);
    add("b_x", d.n_x, 1);
    add("W_y", d.n_y, d.n_n);
    add("W_gx", d.n_n, d.n_x);
    add("W_gu", d.n_n, d.n_u);
    add("b_g", d.n_n, 1);
    add("b_y", d.n_y, 1);
    if (with_x0) add("x0", d.n_x, 1);
    return l;
}

inline ParamLayout make_layout(const Model& m, bool with_x0) {
    return make_layout(structure_of(m), dims_of(m), network_of(m).activation, with_x0);
}

struct ParamVector {
    Eigen::VectorXd theta;
    ParamLayout layout;
};

struct UnpackedModel {
    Model model;
    Eigen::VectorXd x0;  ///< zero-length when the layout has no x0 block
};

namespace detail {

template <class Fn>
void for_each_network_block(SsnnModel& n, Fn&& fn) {
    fn("W_x", n.w_x.data());
    fn("W_fx", n.w_fx.data());
    fn("W_fu", n.w_fu.data());
    fn("b_f", n.b_f.data());
    fn("b_x", n.b_x.data());
    fn("W_y", n.w_y.data());
    fn("W_gx", n.w_gx.data());
    fn("W_gu", n.w_gu.data());
    fn("b_g", n.b_g.data());
    fn("b_y", n.b_y.data());
}

template <class Fn>
void for_each_block(Model& m, Fn&& fn) {
    if (auto* gr = std::get_if<GrSsnnModel>(&m)) {
        fn("A", gr->linear.A.data());
        fn("B", gr->linear.B.data());
        fn("C", gr->linear.C.data());
        fn("D", gr->linear.D.data());
        for_each_network_block(gr->residual, fn);
    } else {
        for_each_network_block(std::get<SsnnModel>(m), fn);
    }
}

inline Model zero_model(const ParamLayout& l) {
    SsnnModel net = SsnnModel::zeros(l.dims, l.activation);
    if (l.structure == Structure::ssnn) return net;
    return GrSsnnModel{LtiStateSpace::zeros(l.dims.n_x, l.dims.n_u, l.dims.n_y), std::move(net)};
}

}  // namespace detail

inline ParamVector pack(const Model& model, const std::optional<Eigen::VectorXd>& x0 = std::nullopt) {
    validate(model);
    ParamVector pv{Eigen::VectorXd(), make_layout(model, x0.has_value())};
    pv.theta.resize(pv.layout.size());
    Model copy = model;
    detail::for_each_block(copy, [&](const char* name, const double* data) {
        const ParamBlock& b = pv.layout.block(name);
        std::copy(data, data + b.size(), pv.theta.data() + b.offset);
    });
    if (x0) {
        const ParamBlock& b = pv.layout.block("x0");
        if (x0->size() != b.size()) throw std::invalid_argument("pack: x0 has wrong length");
        pv.theta.segment(b.offset, b.size()) = *x0;
    }
    return pv;
}

inline UnpackedModel unpack(const Eigen::Ref<const Eigen::VectorXd>& theta, const ParamLayout& layout) {
    if (theta.size() != layout.size())
        throw std::invalid_argument("unpack: theta has length " + std::to_string(theta.size()) + ", layout expects " +
                                    std::to_string(layout.size()));
    UnpackedModel out{detail::zero_model(layout), Eigen::VectorXd()};
    detail::for_each_block(out.model, [&](const char* name, double* data) {
        const ParamBlock& b = layout.block(name);
        std::copy(theta.data() + b.offset, theta.data() + b.offset + b.size(), data);
    });
    if (layout.has_x0) {
        const ParamBlock& b = layout.block("x0");
        out.x0 = theta.segment(b.offset, b.size());
    }
    return out;
}

}  // namespace grssnn
