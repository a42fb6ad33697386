#pragma once

// Benchmark system simulators and dataset assembly.
//
// Bouc-Wen: a mass-spring-damper with a hysteretic restoring force z,
//   m y'' + c y' + k y + z = u
//   z' = alpha y' - beta (gamma |y'| |z|^(nu-1) z + delta y' |z|^nu)
// integrated with fixed-step RK4 on a zero-order-hold upsampled input.
//
// Wiener-Hammerstein: LTI filter -> static one-sided saturation -> LTI filter,
// plus white Gaussian output noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "grssnn/errors.hpp"
#include "grssnn/lti.hpp"
#include "grssnn/random.hpp"
#include "grssnn/signal.hpp"

namespace grssnn {

struct BoucWenParams {
    double m_l = 2.0;         ///< kg
    double c_l = 10.0;        ///< N s / m
    double k_l = 5.0e4;       ///< N / m
    double alpha = 5.0e4;     ///< N / m
    double beta = 1.0e3;      ///< 1 / m
    double gamma_bw = 0.8;
    double delta = -1.1;
    double nu = 1.0;
    double sample_rate = 750.0;  ///< Hz
    int oversample = 20;

    /// Coefficients, sample rate and integration factor of the public Bouc-Wen
    /// benchmark description.
    static BoucWenParams nominal() { return {}; }

    void validate() const {
        if (!(m_l > 0.0)) throw std::invalid_argument("Bouc-Wen mass must be positive");
        if (!(sample_rate > 0.0)) throw std::invalid_argument("Bouc-Wen sample rate must be positive");
        if (!(nu >= 1.0)) throw std::invalid_argument("Bouc-Wen exponent nu must be >= 1");
        if (oversample < 1) throw std::invalid_argument("oversample must be >= 1");
    }
};

/// Stateful Bouc-Wen integrator, so records can be continued across periods.
class BoucWenSimulator {
public:
    explicit BoucWenSimulator(const BoucWenParams& p) : p_(p) { p_.validate(); }

    /// Displacement samples y(t_k) for the force samples u(k); the state carries over between calls.
    Eigen::VectorXd run(const Eigen::Ref<const Eigen::VectorXd>& u) {
        const double h = 1.0 / (p_.sample_rate * p_.oversample);
        Eigen::VectorXd y(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            y(k) = s_[0];
            for (int i = 0; i < p_.oversample; ++i) advance(u(k), h);
            if (!std::isfinite(s_[0]) || !std::isfinite(s_[1]) || !std::isfinite(s_[2]))
                throw DivergenceError(static_cast<std::size_t>(samples_ + k),
                                      "Bouc-Wen integration blew up; increase oversample");
        }
        samples_ += static_cast<std::size_t>(u.size());
        return y;
    }

private:
    using State = std::array<double, 3>;  // displacement, velocity, hysteretic force

    State rhs(const State& s, double force) const {
        const double v = s[1], z = s[2];
        const double az = std::abs(z);
        const double znu1 = p_.nu == 1.0 ? z : std::pow(az, p_.nu - 1.0) * z;
        const double znu = p_.nu == 1.0 ? az : std::pow(az, p_.nu);
        return {v, (force - p_.c_l * v - p_.k_l * s[0] - z) / p_.m_l,
                p_.alpha * v - p_.beta * (p_.gamma_bw * std::abs(v) * znu1 + p_.delta * v * znu)};
    }

    State rk4(const State& s, double force, double h) const {
        auto axpy = [](const State& a, double c, const State& b) {
            return State{a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]};
        };
        const State k1 = rhs(s, force);
        const State k2 = rhs(axpy(s, h / 2, k1), force);
        const State k3 = rhs(axpy(s, h / 2, k2), force);
        const State k4 = rhs(axpy(s, h, k3), force);
        State out;
        for (int i = 0; i < 3; ++i) out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return out;
    }

    // the right-hand side has kinks where v or z changes sign
    static bool crosses(const State& a, const State& b) {
        for (int i : {1, 2})
            if ((a[i] > 0.0 && b[i] < 0.0) || (a[i] < 0.0 && b[i] > 0.0)) return true;
        return false;
    }

    // One step of length h. A step that straddles a kink is split at the kink,
    // located by bisection, so each RK4 stage sees a smooth right-hand side.
    void advance(double force, double h) {
        double remaining = h;
        for (int events = 0; remaining > 0.0; ++events) {
            const State trial = rk4(s_, force, remaining);
            if (events >= 8 || !crosses(s_, trial)) {
                s_ = trial;
                return;
            }
            double lo = 0.0, hi = remaining;
            for (int it = 0; it < 60 && hi - lo > 1e-15 * h; ++it) {
                const double mid = 0.5 * (lo + hi);
                (crosses(s_, rk4(s_, force, mid)) ? hi : lo) = mid;
            }
            s_ = rk4(s_, force, hi);
            remaining -= hi;
        }
    }

    BoucWenParams p_;
    State s_{0.0, 0.0, 0.0};
    std::size_t samples_ = 0;
};

/// Response from zero initial conditions.
inline Eigen::VectorXd simulate_boucwen(const BoucWenParams& p, const Eigen::Ref<const Eigen::VectorXd>& u) {
    BoucWenSimulator sim(p);
    return sim.run(u);
}

/// One-sided saturation: identity below the knee, reduced slope above it.
struct SaturationNl {
    double knee = 0.5;
    double slope = 0.2;

    double operator()(double v) const { return v <= knee ? v : knee + slope * (v - knee); }

    void validate() const {
        if (!(slope >= 0.0)) throw std::invalid_argument("saturation slope must be non-negative (monotone map)");
    }
};

/// Third-order low-pass built from three unit-DC-gain first-order sections x+ = p x + (1 - p) v.
inline LtiStateSpace lowpass3(double p1, double p2, double p3) {
    auto section = [](double p) {
        return LtiStateSpace{Eigen::MatrixXd::Constant(1, 1, p), Eigen::MatrixXd::Constant(1, 1, 1.0 - p),
                             Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    };
    return series(series(section(p1), section(p2)), section(p3));
}

struct WhParams {
    LtiStateSpace front = lowpass3(0.55, 0.65, 0.75);
    LtiStateSpace back = lowpass3(0.6, 0.7, 0.8);
    SaturationNl nl;
    double output_noise_std = 0.0;

    void validate() const {
        front.validate();
        back.validate();
        nl.validate();
        if (front.n_u() != 1 || front.n_y() != 1 || back.n_u() != 1 || back.n_y() != 1)
            throw std::invalid_argument("Wiener-Hammerstein filters must be SISO");
        if (!front.is_stable() || !back.is_stable()) throw std::invalid_argument("Wiener-Hammerstein filter is unstable");
        if (!(output_noise_std >= 0.0)) throw std::invalid_argument("noise std must be non-negative");
    }
};

/// Stateful Wiener-Hammerstein cascade; filter states carry over between calls.
class WhSimulator {
public:
    WhSimulator(const WhParams& p, std::uint64_t noise_seed)
        : p_(p), xf_(Eigen::VectorXd::Zero(p.front.n_x())), xb_(Eigen::VectorXd::Zero(p.back.n_x())),
          noise_(noise_seed, "wh-output-noise") {
        p_.validate();
    }

    Eigen::VectorXd run(const Eigen::Ref<const Eigen::VectorXd>& u) {
        Eigen::VectorXd y(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            const double v = (p_.front.C * xf_)(0) + p_.front.D(0, 0) * u(k);
            const double w = p_.nl(v);
            y(k) = (p_.back.C * xb_)(0) + p_.back.D(0, 0) * w;
            if (p_.output_noise_std > 0.0) y(k) += p_.output_noise_std * noise_.gaussian();
            xf_ = p_.front.A * xf_ + p_.front.B.col(0) * u(k);
            xb_ = p_.back.A * xb_ + p_.back.B.col(0) * w;
        }
        return y;
    }

private:
    WhParams p_;
    Eigen::VectorXd xf_, xb_;
    RandomStream noise_;
};

inline Eigen::VectorXd simulate_wh(const WhParams& p, const Eigen::Ref<const Eigen::VectorXd>& u,
                                   std::uint64_t noise_seed) {
    WhSimulator sim(p, noise_seed);
    return sim.run(u);
}

/// A periodic response after transients have died out.
struct SteadyStateRecord {
    Eigen::VectorXd y;
    int periods = 0;                 ///< periods simulated, including the kept one
    double period_difference = 0.0;  ///< max |last - previous| / max |last|
};

/// Repeats one input period until two consecutive output periods agree to `tol`
/// (relative to the peak output), with at least `min_periods` periods.
template <class Simulator>
SteadyStateRecord steady_state(Simulator& sim, const Eigen::Ref<const Eigen::VectorXd>& period, int min_periods = 2,
                               double tol = 1e-6, int max_periods = 100) {
    SteadyStateRecord rec;
    Eigen::VectorXd prev = sim.run(period);
    rec.periods = 1;
    while (true) {
        Eigen::VectorXd cur = sim.run(period);
        ++rec.periods;
        const double peak = std::max(cur.cwiseAbs().maxCoeff(), 1e-300);
        rec.period_difference = (cur - prev).cwiseAbs().maxCoeff() / peak;
        prev = std::move(cur);
        if (rec.periods >= min_periods && (rec.period_difference <= tol || rec.periods >= max_periods)) break;
    }
    rec.y = std::move(prev);
    return rec;
}

struct BoucWenDatasets {
    Dataset train;
    Dataset test_multisine;
    Dataset test_sweep;
    double train_period_difference = 0.0;
    double test_period_difference = 0.0;
};

struct BenchmarkSeeds {
    std::uint64_t train = 1;
    std::uint64_t test = 2;
};

inline Dataset single_channel(const Eigen::VectorXd& u, const Eigen::VectorXd& y, double fs) {
    return Dataset(Eigen::MatrixXd(u), Eigen::MatrixXd(y), fs);
}

/// Training record and the two test records. The multisine records are one
/// steady-state period; the sweep starts from rest and keeps its transient.
inline BoucWenDatasets make_boucwen_datasets(const BoucWenParams& p, MultisineSpec ms, const SweepSpec& sweep,
                                             const BenchmarkSeeds& seeds, double steady_tol = 1e-6) {
    p.validate();
    ms.sample_rate = p.sample_rate;
    BoucWenDatasets out;

    ms.seed = seeds.train;
    const Eigen::VectorXd u_train = generate_multisine(ms);
    BoucWenSimulator sim_train(p);
    const SteadyStateRecord train = steady_state(sim_train, u_train, 2, steady_tol);
    out.train = single_channel(u_train, train.y, p.sample_rate);
    out.train_period_difference = train.period_difference;

    ms.seed = seeds.test;
    const Eigen::VectorXd u_test = generate_multisine(ms);
    BoucWenSimulator sim_test(p);
    const SteadyStateRecord test = steady_state(sim_test, u_test, 2, steady_tol);
    out.test_multisine = single_channel(u_test, test.y, p.sample_rate);
    out.test_period_difference = test.period_difference;

    SweepSpec sw = sweep;
    sw.sample_rate = p.sample_rate;
    const Eigen::VectorXd u_sweep = generate_sinesweep(sw, sweep_duration(sw));
    out.test_sweep = single_channel(u_sweep, simulate_boucwen(p, u_sweep), p.sample_rate);
    return out;
}

struct WhDatasets {
    Dataset train;
    Dataset test_multisine;
};

/// Steady-state multisine records of the Wiener-Hammerstein cascade, each with independent noise.
inline WhDatasets make_wh_datasets(const WhParams& p, const MultisineSpec& ms, const BenchmarkSeeds& seeds) {
    p.validate();
    WhParams clean = p;
    clean.output_noise_std = 0.0;
    auto make = [&](std::uint64_t seed) {
        MultisineSpec s = ms;
        s.seed = seed;
        const Eigen::VectorXd u = generate_multisine(s);
        WhSimulator sim(clean, 0);
        Eigen::VectorXd y = steady_state(sim, u, 2, 1e-12).y;
        if (p.output_noise_std > 0.0) {
            RandomStream noise(seed, "wh-output-noise");
            for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += p.output_noise_std * noise.gaussian();
        }
        return single_channel(u, y, ms.sample_rate);
    };
    return {make(seeds.train), make(seeds.test)};
}

}  // namespace grssnn
