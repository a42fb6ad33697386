#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "grssnn/signal.hpp"

using namespace grssnn;

namespace {

// naive DFT magnitude at bin k, angles reduced exactly modulo N
double dft_mag(const Eigen::VectorXd& x, std::size_t k) {
    const std::size_t n = static_cast<std::size_t>(x.size());
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
        acc += x(static_cast<Eigen::Index>(i)) * std::polar(1.0, ang);
    }
    return std::abs(acc);
}

}  // namespace

TEST(Multisine, BenchmarkSpecRmsAndSpectrum) {
    MultisineSpec spec{.n_samples = 8192, .sample_rate = 750.0, .f_min = 5.0, .f_max = 150.0, .target_rms = 50.0,
                       .seed = 7};
    const Eigen::VectorXd u = generate_multisine(spec);
    ASSERT_EQ(u.size(), 8192);
    EXPECT_NEAR(rms(u), 50.0, 50.0 * 1e-9);

    const auto [lo, hi] = multisine_bins(spec);
    EXPECT_EQ(lo, 55u);   // round(5 * 8192 / 750)
    EXPECT_EQ(hi, 1638u);  // round(150 * 8192 / 750)
    double peak = 0.0;
    std::vector<double> mags(4097);
    for (std::size_t k = 0; k <= 4096; ++k) {
        mags[k] = dft_mag(u, k);
        peak = std::max(peak, mags[k]);
    }
    for (std::size_t k = 0; k <= 4096; ++k) {
        if (k >= lo && k <= hi)
            EXPECT_GT(mags[k], 0.1 * peak) << "bin " << k;
        else
            EXPECT_LE(mags[k], 1e-9 * peak) << "bin " << k;
    }
}

TEST(Multisine, SingleBinIsPureCosine) {
    MultisineSpec spec{.n_samples = 64, .sample_rate = 64.0, .f_min = 8.0, .f_max = 8.0, .target_rms = 3.0, .seed = 1};
    const Eigen::VectorXd u = generate_multisine(spec);
    EXPECT_NEAR(rms(u), 3.0, 1e-12);
    int nonzero = 0;
    for (std::size_t k = 1; k <= 32; ++k)
        if (dft_mag(u, k) > 1e-9) ++nonzero;
    EXPECT_EQ(nonzero, 1);
    EXPECT_GT(dft_mag(u, 8), 1.0);
    // cosine amplitude from the bin magnitude: |X_k| = N A / 2
    EXPECT_NEAR(2.0 * dft_mag(u, 8) / 64.0, 3.0 * std::numbers::sqrt2, 1e-12);
}

TEST(Multisine, SeedDeterminism) {
    MultisineSpec spec{.n_samples = 512, .sample_rate = 100.0, .f_min = 1.0, .f_max = 30.0, .target_rms = 1.0, .seed = 3};
    const Eigen::VectorXd a = generate_multisine(spec);
    const Eigen::VectorXd b = generate_multisine(spec);
    EXPECT_TRUE((a.array() == b.array()).all());
    spec.seed = 4;
    const Eigen::VectorXd c = generate_multisine(spec);
    EXPECT_GT((a - c).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Multisine, RmsAndPeriodicityForManySeeds) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        MultisineSpec spec{.n_samples = 300, .sample_rate = 50.0, .f_min = 0.5, .f_max = 20.0, .target_rms = 2.5,
                           .seed = seed};
        const Eigen::VectorXd u = generate_multisine(spec);
        EXPECT_NEAR(rms(u), 2.5, 2.5 * 1e-9);
        // one more period of the underlying sum continues the first sample exactly: compare
        // with the closed form evaluated at n = N
        RandomStream rng(seed, "multisine-phase");
        const auto [lo, hi] = multisine_bins(spec);
        double first = 0.0, wrapped = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) {
            const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
            first += std::cos(ph);
            wrapped += std::cos(2.0 * std::numbers::pi * static_cast<double>(k) * 300.0 / 300.0 + ph);
        }
        EXPECT_NEAR(first, wrapped, 1e-9);
    }
}

TEST(Multisine, Errors) {
    MultisineSpec spec{.n_samples = 64, .sample_rate = 64.0, .f_min = 8.0, .f_max = 32.0, .target_rms = 1.0};
    EXPECT_THROW(generate_multisine(spec), std::invalid_argument);  // f_max at Nyquist
    spec.f_max = 8.2;
    spec.f_min = 8.1;
    spec.n_samples = 64;
    spec.sample_rate = 640.0;  // bins round to 1..1 -> ok
    EXPECT_NO_THROW(generate_multisine(spec));
    spec.f_min = 0.2;
    spec.f_max = 0.3;  // rounds to bin 0 only
    EXPECT_THROW(generate_multisine(spec), std::invalid_argument);
}

namespace {

double spectral_peak_hz(const Eigen::VectorXd& x, double fs) {
    double best = 0.0, best_f = 0.0;
    for (double f = 1.0; f < 100.0; f += 0.25) {
        std::complex<double> acc = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            acc += x(i) * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
        if (std::abs(acc) > best) {
            best = std::abs(acc);
            best_f = f;
        }
    }
    return best_f;
}

}  // namespace

TEST(Sinesweep, BenchmarkSweepBand) {
    SweepSpec spec{.f_start = 20.0, .f_end = 50.0, .sweep_rate = 10.0, .amplitude = 40.0, .sample_rate = 750.0};
    EXPECT_DOUBLE_EQ(sweep_duration(spec), 180.0);
    const Eigen::VectorXd u = generate_sinesweep(spec, 180.0);
    ASSERT_EQ(u.size(), 135000);
    EXPECT_NEAR(u(0), 40.0 * std::numbers::sqrt2, 1e-12);
    EXPECT_NEAR(spectral_peak_hz(u.head(750), 750.0), 20.0, 0.5);
    EXPECT_NEAR(spectral_peak_hz(u.tail(750), 750.0), 50.0, 0.5);
    EXPECT_NEAR(rms(u), 40.0, 0.2);
}

TEST(Sinesweep, DegenerateSweepIsSinusoid) {
    SweepSpec spec{.f_start = 12.0, .f_end = 12.0, .sweep_rate = 10.0, .amplitude = 1.5, .sample_rate = 200.0};
    const Eigen::VectorXd u = generate_sinesweep(spec, 2.0);
    for (Eigen::Index i = 0; i < u.size(); ++i)
        EXPECT_NEAR(u(i), 1.5 * std::numbers::sqrt2 * std::cos(2.0 * std::numbers::pi * 12.0 * i / 200.0), 1e-12);
}

TEST(Sinesweep, ZeroCrossingsMatchIntegratedFrequency) {
    SweepSpec spec{.f_start = 5.0, .f_end = 40.0, .sweep_rate = 600.0, .amplitude = 1.0, .sample_rate = 500.0};
    const double dur = sweep_duration(spec) + 0.5;  // includes a held-frequency tail
    const Eigen::VectorXd u = generate_sinesweep(spec, dur);
    const double cover = sweep_duration(spec);
    auto freq = [&](double t) { return t <= cover ? spec.f_start + (spec.sweep_rate / 60.0) * t : spec.f_end; };

    // oracle: trapezoidal integration of f(t) on a 100x finer grid, crossings where cycles = m + 1/4 or m + 3/4
    const int sub = 100;
    const double h = 1.0 / (spec.sample_rate * sub);
    std::vector<double> crossings;
    double cyc = 0.0, t = 0.0;
    double next_level = 0.25;
    const double t_end = static_cast<double>(u.size() - 1) / spec.sample_rate;
    while (t < t_end) {
        const double c_next = cyc + 0.5 * h * (freq(t) + freq(t + h));
        while (c_next >= next_level) {
            crossings.push_back(t + h * (next_level - cyc) / (c_next - cyc));
            next_level += 0.5;
        }
        cyc = c_next;
        t += h;
    }
    std::vector<double> observed;
    for (Eigen::Index i = 0; i + 1 < u.size(); ++i)
        if ((u(i) > 0) != (u(i + 1) > 0)) observed.push_back(static_cast<double>(i) / spec.sample_rate);
    ASSERT_NEAR(static_cast<double>(observed.size()), static_cast<double>(crossings.size()), 1.0);
    const std::size_t n = std::min(observed.size(), crossings.size());
    for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::abs(observed[i] - crossings[i]) * spec.sample_rate, 1.0) << i;
}

TEST(Sinesweep, TooShort) {
    SweepSpec spec{.f_start = 20.0, .f_end = 50.0, .sweep_rate = 10.0, .amplitude = 1.0, .sample_rate = 750.0};
    EXPECT_THROW(generate_sinesweep(spec, 100.0), std::invalid_argument);
}

TEST(Normalize, AlternatingUnchanged) {
    Eigen::MatrixXd u(4, 1), y(4, 1);
    u << 1, -1, 1, -1;
    y << 1, 2, 3, 4;
    const Dataset n = normalize_dataset(Dataset(u, y, 10.0));
    EXPECT_TRUE(n.u.isApprox(u, 1e-15));
    EXPECT_TRUE(n.y.isApprox(y));  // outputs untouched by default
    EXPECT_DOUBLE_EQ(n.normalization->u_scale(0), 1.0);
}

TEST(Normalize, AffinePopulationStd) {
    Eigen::MatrixXd u(3, 1), y(3, 1);
    u << 10, 20, 30;
    y << 0, 1, 0;
    const Dataset n = normalize_dataset(Dataset(u, y, 1.0));
    EXPECT_NEAR(n.u.mean(), 0.0, 1e-12);
    EXPECT_NEAR(population_std(n.u.col(0)), 1.0, 1e-12);
    EXPECT_NEAR(n.normalization->u_scale(0), std::sqrt(200.0 / 3.0), 1e-12);  // divide by N
    EXPECT_DOUBLE_EQ(n.normalization->u_offset(0), 20.0);
}

TEST(Normalize, OutputIsScaledNotCentered) {
    Eigen::MatrixXd u(4, 1), y(4, 1);
    u << 1, -1, 1, -1;
    y << 1, 2, 3, 4;
    const Dataset n = normalize_dataset(Dataset(u, y, 1.0), true);
    const double s = std::sqrt(1.25);
    EXPECT_NEAR(n.normalization->y_scale(0), s, 1e-15);
    EXPECT_EQ(n.normalization->y_offset(0), 0.0);
    EXPECT_TRUE(n.y.isApprox(y / s, 1e-15));
    EXPECT_NEAR(population_std(n.y.col(0)), 1.0, 1e-12);
}

TEST(Normalize, ConstantInputRejected) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Constant(3, 1, 5.0), y = Eigen::MatrixXd::Ones(3, 1);
    EXPECT_THROW(normalize_dataset(Dataset(u, y, 1.0)), DataError);
}

TEST(Normalize, RoundTripProperty) {
    RandomStream rng(11, "normalize-property");
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform01() * 50);
        Eigen::MatrixXd u = rng.uniform_matrix(n, 2, -100, 300);
        Eigen::MatrixXd y = rng.uniform_matrix(n, 3, -1e-3, 5e-3);
        const Dataset d(u, y, 100.0);
        for (bool out : {false, true}) {
            const Dataset nd = normalize_dataset(d, out);
            const Dataset back = denormalize_dataset(nd);
            EXPECT_LE((back.u - u).cwiseAbs().maxCoeff(), 1e-12 * u.cwiseAbs().maxCoeff());
            EXPECT_LE((back.y - y).cwiseAbs().maxCoeff(), 1e-12 * y.cwiseAbs().maxCoeff());
            const Dataset again = apply_normalization(back, *nd.normalization);
            EXPECT_LE((again.u - nd.u).cwiseAbs().maxCoeff(), 1e-12 * nd.u.cwiseAbs().maxCoeff());
        }
    }
}

TEST(Dataset, Invariants) {
    EXPECT_THROW(Dataset(Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(2, 1), 1.0), DataError);
    EXPECT_THROW(Dataset(Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Zero(3, 1), 0.0), DataError);
    EXPECT_THROW(Dataset(Eigen::MatrixXd::Zero(0, 1), Eigen::MatrixXd::Zero(0, 1), 1.0), DataError);
}

TEST(Rmse, Values) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(2), yh(2);
    yh << 3, 4;
    EXPECT_NEAR(rmse(y, yh), std::sqrt(12.5), 1e-15);
    EXPECT_NEAR(rmse(y, yh), 3.5355339, 1e-7);
    EXPECT_EQ(rmse(yh, yh), 0.0);
}

TEST(Rmse, SkipAveragesTail) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10000), yh = Eigen::VectorXd::Zero(10000);
    yh.head(2000).setConstant(1000.0);
    yh.tail(8000).setConstant(2.0);
    EXPECT_DOUBLE_EQ(rmse(y, yh, 2000), 2.0);
    for (Eigen::Index s : {0, 1, 9999}) EXPECT_EQ(rmse(yh, yh, s), 0.0);
}

TEST(Rmse, Errors) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(3), b = Eigen::VectorXd::Zero(4);
    EXPECT_THROW(rmse(a, b), std::invalid_argument);
    EXPECT_THROW(rmse(a, a, 3), std::invalid_argument);
}
