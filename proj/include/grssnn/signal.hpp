#pragma once

// Signal containers, excitation generators, normalization and the RMSE metric.
//
// Signals are stored sample-major: an N x n_u input matrix holds one sample per
// row. Standard deviations are population (divide-by-N) values throughout.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "grssnn/errors.hpp"
#include "grssnn/random.hpp"

namespace grssnn {

/// Per-channel affine maps: normalized = (raw - offset) / scale.
struct Normalization {
    Eigen::VectorXd u_offset, u_scale;
    Eigen::VectorXd y_offset, y_scale;
};

struct Dataset {
    Eigen::MatrixXd u;  ///< N x n_u
    Eigen::MatrixXd y;  ///< N x n_y
    double sample_rate = 1.0;
    std::optional<Normalization> normalization;

    Dataset() = default;
    Dataset(Eigen::MatrixXd u_, Eigen::MatrixXd y_, double fs) : u(std::move(u_)), y(std::move(y_)), sample_rate(fs) {
        validate();
    }

    Eigen::Index samples() const { return u.rows(); }
    Eigen::Index n_u() const { return u.cols(); }
    Eigen::Index n_y() const { return y.cols(); }

    void validate() const {
        if (u.rows() < 1) throw DataError("dataset must contain at least one sample");
        if (u.rows() != y.rows())
            throw DataError("input and output row counts differ: " + std::to_string(u.rows()) + " vs " +
                            std::to_string(y.rows()));
        if (u.cols() < 1 || y.cols() < 1) throw DataError("dataset needs at least one input and one output channel");
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw DataError("sample rate must be positive");
        if (!u.allFinite() || !y.allFinite()) throw DataError("dataset contains non-finite samples");
    }
};

struct MultisineSpec {
    std::size_t n_samples = 8192;
    double sample_rate = 750.0;
    double f_min = 5.0;
    double f_max = 150.0;
    double target_rms = 1.0;
    std::uint64_t seed = 0;
};

struct SweepSpec {
    double f_start = 20.0;
    double f_end = 50.0;
    double sweep_rate = 10.0;  ///< Hz per minute
    double amplitude = 1.0;    ///< RMS amplitude; the peak is amplitude * sqrt(2)
    double sample_rate = 750.0;
};

inline double population_mean(const Eigen::Ref<const Eigen::VectorXd>& v) { return v.mean(); }

inline double population_std(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().mean());
}

inline double rms(const Eigen::Ref<const Eigen::MatrixXd>& v) { return std::sqrt(v.array().square().mean()); }

/// Inclusive excited bin range [k_lo, k_hi] for a multisine spec.
inline std::pair<std::size_t, std::size_t> multisine_bins(const MultisineSpec& spec) {
    if (spec.n_samples < 2) throw std::invalid_argument("multisine needs at least 2 samples");
    if (!(spec.sample_rate > 0.0)) throw std::invalid_argument("multisine sample rate must be positive");
    if (!(spec.f_min > 0.0) || spec.f_min > spec.f_max)
        throw std::invalid_argument("multisine band must satisfy 0 < f_min <= f_max");
    if (spec.f_max >= spec.sample_rate / 2.0) throw std::invalid_argument("multisine f_max must be below Nyquist");
    const double n = static_cast<double>(spec.n_samples);
    const auto lo = static_cast<long long>(std::llround(spec.f_min * n / spec.sample_rate));
    const auto hi = static_cast<long long>(std::llround(spec.f_max * n / spec.sample_rate));
    const long long k_lo = std::max(1LL, lo);
    const long long k_hi = std::min(hi, static_cast<long long>((spec.n_samples - 1) / 2));
    if (k_lo > k_hi) throw std::invalid_argument("multisine excites no frequency bin");
    return {static_cast<std::size_t>(k_lo), static_cast<std::size_t>(k_hi)};
}

/// One period of a flat-amplitude random-phase multisine, scaled to target_rms.
inline Eigen::VectorXd generate_multisine(const MultisineSpec& spec) {
    const auto [k_lo, k_hi] = multisine_bins(spec);
    const std::size_t n = spec.n_samples;
    RandomStream rng(spec.seed, "multisine-phase");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < n; ++i) {
            // (k*i) mod n keeps the cosine argument small and exactly periodic
            const std::size_t idx = (k * i) % n;
            out(static_cast<Eigen::Index>(i)) += std::cos(w * static_cast<double>(idx) + phase);
        }
    }
    const double r = rms(out);
    out *= spec.target_rms / r;
    return out;
}

/// Time needed to sweep from f_start to f_end.
inline double sweep_duration(const SweepSpec& spec) {
    if (!(spec.sweep_rate > 0.0)) throw std::invalid_argument("sweep rate must be positive");
    return std::abs(spec.f_end - spec.f_start) / (spec.sweep_rate / 60.0);
}

/// Linear sine sweep. After the band is covered the frequency is held at f_end.
inline Eigen::VectorXd generate_sinesweep(const SweepSpec& spec, double duration) {
    const double nyq = spec.sample_rate / 2.0;
    if (!(spec.sample_rate > 0.0)) throw std::invalid_argument("sweep sample rate must be positive");
    if (!(spec.f_start > 0.0 && spec.f_start < nyq && spec.f_end > 0.0 && spec.f_end < nyq))
        throw std::invalid_argument("sweep frequencies must lie in (0, Nyquist)");
    const double cover = sweep_duration(spec);
    if (duration + 1e-9 < cover)
        throw std::invalid_argument("sweep duration " + std::to_string(duration) + " s is shorter than the " +
                                    std::to_string(cover) + " s needed to cover the band");
    const double rate = (spec.f_end >= spec.f_start ? 1.0 : -1.0) * spec.sweep_rate / 60.0;
    const auto n = static_cast<Eigen::Index>(std::llround(duration * spec.sample_rate));
    Eigen::VectorXd out(n);
    const double peak = spec.amplitude * std::numbers::sqrt2;
    const double cycles_at_cover = spec.f_start * cover + 0.5 * rate * cover * cover;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / spec.sample_rate;
        const double cycles =
            t <= cover ? spec.f_start * t + 0.5 * rate * t * t : cycles_at_cover + spec.f_end * (t - cover);
        // reduce to one cycle before scaling by 2*pi to keep the phase accurate for long records
        out(i) = peak * std::cos(2.0 * std::numbers::pi * (cycles - std::floor(cycles)));
    }
    return out;
}

/// Normalizes each input channel to zero mean and unit std using the given record's statistics.
/// Outputs are scaled to unit std (no offset) only when normalize_output is set.
inline Dataset normalize_dataset(const Dataset& d, bool normalize_output = false) {
    d.validate();
    Normalization nm;
    nm.u_offset.resize(d.n_u());
    nm.u_scale.resize(d.n_u());
    for (Eigen::Index j = 0; j < d.n_u(); ++j) {
        nm.u_offset(j) = population_mean(d.u.col(j));
        nm.u_scale(j) = population_std(d.u.col(j));
        if (!(nm.u_scale(j) > 0.0))
            throw DataError("input channel " + std::to_string(j + 1) + " has zero variance");
    }
    nm.y_offset = Eigen::VectorXd::Zero(d.n_y());
    nm.y_scale = Eigen::VectorXd::Ones(d.n_y());
    if (normalize_output) {
        for (Eigen::Index j = 0; j < d.n_y(); ++j) {
            // scaled only: a mean taken over a record with a start-up transient is not an
            // offset the linear dynamics could reproduce
            nm.y_scale(j) = population_std(d.y.col(j));
            if (!(nm.y_scale(j) > 0.0))
                throw DataError("output channel " + std::to_string(j + 1) + " has zero variance");
        }
    }
    Dataset out;
    out.sample_rate = d.sample_rate;
    out.u = ((d.u.rowwise() - nm.u_offset.transpose()).array().rowwise() / nm.u_scale.transpose().array()).matrix();
    out.y = ((d.y.rowwise() - nm.y_offset.transpose()).array().rowwise() / nm.y_scale.transpose().array()).matrix();
    out.normalization = std::move(nm);
    return out;
}

/// Maps a raw dataset into the normalized coordinates of an existing normalization.
inline Dataset apply_normalization(const Dataset& raw, const Normalization& nm) {
    raw.validate();
    if (raw.n_u() != nm.u_offset.size() || raw.n_y() != nm.y_offset.size())
        throw DataError("normalization channel count does not match dataset");
    Dataset out;
    out.sample_rate = raw.sample_rate;
    out.u = ((raw.u.rowwise() - nm.u_offset.transpose()).array().rowwise() / nm.u_scale.transpose().array()).matrix();
    out.y = ((raw.y.rowwise() - nm.y_offset.transpose()).array().rowwise() / nm.y_scale.transpose().array()).matrix();
    out.normalization = nm;
    return out;
}

inline Eigen::MatrixXd denormalize_outputs(const Eigen::MatrixXd& y, const Normalization& nm) {
    return ((y.array().rowwise() * nm.y_scale.transpose().array()).rowwise() + nm.y_offset.transpose().array())
        .matrix();
}

inline Eigen::MatrixXd denormalize_inputs(const Eigen::MatrixXd& u, const Normalization& nm) {
    return ((u.array().rowwise() * nm.u_scale.transpose().array()).rowwise() + nm.u_offset.transpose().array())
        .matrix();
}

/// Undoes normalize_dataset; a dataset without normalization is returned as is.
inline Dataset denormalize_dataset(const Dataset& d) {
    if (!d.normalization) return d;
    Dataset out;
    out.sample_rate = d.sample_rate;
    out.u = denormalize_inputs(d.u, *d.normalization);
    out.y = denormalize_outputs(d.y, *d.normalization);
    return out;
}

/// Root mean squared error over all channels of the samples with index >= skip.
inline double rmse(const Eigen::Ref<const Eigen::MatrixXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& y_hat,
                   Eigen::Index skip = 0) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
        throw std::invalid_argument("rmse: signal shapes differ");
    if (skip < 0 || skip >= y.rows()) throw std::invalid_argument("rmse: skip must be smaller than the signal length");
    const Eigen::Index n = y.rows() - skip;
    return std::sqrt((y.bottomRows(n) - y_hat.bottomRows(n)).array().square().mean());
}

}  // namespace grssnn
