#pragma once

// Simulation-error cost and Levenberg-Marquardt minimization.
//
// Each epoch linearizes the residual r = y - y_hat, factors J = U S V^T and
// drops the directions with s_i < svd_rel_tol * s_max before forming the
// damped step V_r (S_r^2 + lambda I)^-1 S_r U_r^T r. Working in the retained
// right-singular subspace removes the flat directions that the non-unique
// network parametrization puts into J.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "grssnn/errors.hpp"
#include "grssnn/jacobian.hpp"
#include "grssnn/params.hpp"
#include "grssnn/signal.hpp"
#include "grssnn/ssnn.hpp"

namespace grssnn {

struct LmOptions {
    int max_epochs = 300;
    double lambda_init = 1e-2;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    double svd_rel_tol = 1e-8;
    double cost_tol = 1e-9;  ///< relative improvement over cost_window epochs below which training stops
    double cost_floor = 1e-28;  ///< absolute cost treated as converged (rounding level for unit-scale outputs)
    int cost_window = 10;
    double max_lambda = 1e10;
    int max_retries = 20;
    double max_jacobian_bytes = 2.0e9;

    void validate() const {
        if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
        if (!(lambda_init > 0.0)) throw ConfigError("lambda_init must be positive");
        if (!(lambda_up > 1.0 && lambda_down > 0.0 && lambda_down < 1.0))
            throw ConfigError("lambda factors must satisfy lambda_up > 1 > lambda_down > 0");
        if (!(svd_rel_tol > 0.0 && svd_rel_tol < 1.0)) throw ConfigError("svd_rel_tol must lie in (0, 1)");
        if (!(cost_tol >= 0.0)) throw ConfigError("cost_tol must be non-negative");
        if (!(cost_floor >= 0.0)) throw ConfigError("cost_floor must be non-negative");
        if (cost_window < 1) throw ConfigError("cost_window must be at least 1");
        if (!(max_lambda > lambda_init)) throw ConfigError("max_lambda must exceed lambda_init");
        if (max_retries < 1) throw ConfigError("max_retries must be at least 1");
    }
};

enum class StopReason { max_epochs, tolerance, lambda_overflow, nonfinite_jacobian };

inline std::string_view to_string(StopReason s) {
    switch (s) {
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::tolerance: return "tolerance";
        case StopReason::lambda_overflow: return "lambda_overflow";
        case StopReason::nonfinite_jacobian: return "nonfinite_jacobian";
    }
    return "?";
}

struct StepRecord {
    int epoch = 0;
    double lambda = 0.0;
    double trial_cost = 0.0;  ///< +inf when the trial point diverged
    bool accepted = false;
};

struct EpochRecord {
    int epoch = 0;
    double cost = 0.0;    ///< cost of the iterate after this epoch
    double lambda = 0.0;  ///< damping after this epoch
    bool accepted = false;
};

struct LmResult {
    Eigen::VectorXd theta;
    std::vector<double> cost_history;  ///< [0] is the initial cost, then one entry per epoch
    std::vector<EpochRecord> epochs;
    std::vector<StepRecord> steps;
    int epochs_run = 0;
    StopReason stop_reason = StopReason::max_epochs;
    double wall_time = 0.0;
};

/// A least-squares problem in the residual r(theta); cost = |r|^2 / residual_count().
template <class P>
concept LeastSquaresProblem = requires(const P& p, const Eigen::VectorXd& theta, Eigen::VectorXd& r,
                                       Eigen::MatrixXd& j) {
    { p.residual_count() } -> std::convertible_to<Eigen::Index>;
    { p.residual(theta) } -> std::same_as<std::optional<Eigen::VectorXd>>;
    p.linearize(theta, r, j);
};

/// Solves damped steps in the retained singular subspace of one Jacobian.
class DampedStepSolver {
public:
    DampedStepSolver(const Eigen::MatrixXd& j, const Eigen::VectorXd& r, double rel_tol) {
        const Eigen::Index m = j.rows(), n = j.cols();
        // exploding sensitivities can reach 1e200; factorize a unit-scaled copy so the SVD does not overflow
        const double scale = j.size() > 0 ? j.cwiseAbs().maxCoeff() : 0.0;
        const Eigen::MatrixXd js = scale > 0.0 ? Eigen::MatrixXd(j / scale) : j;
        Eigen::VectorXd s;
        Eigen::MatrixXd v;
        Eigen::VectorXd proj;
        if (m >= n && n > 0) {
            // QR first: the SVD then runs on the small n x n factor
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(js);
            const Eigen::MatrixXd rf = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
            const Eigen::VectorXd qtr = (qr.householderQ().transpose() * r).head(n);
            Eigen::BDCSVD<Eigen::MatrixXd> svd(rf, Eigen::ComputeThinU | Eigen::ComputeThinV);
            s = svd.singularValues();
            v = svd.matrixV();
            proj = svd.matrixU().transpose() * qtr;
        } else {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(js, Eigen::ComputeThinU | Eigen::ComputeThinV);
            s = svd.singularValues();
            v = svd.matrixV();
            proj = svd.matrixU().transpose() * r;
        }
        if (scale > 0.0) s *= scale;
        const double s_max = s.size() > 0 ? s(0) : 0.0;
        Eigen::Index keep = 0;
        if (s_max > 0.0)
            while (keep < s.size() && !(s(keep) < rel_tol * s_max)) ++keep;
        s_ = s.head(keep);
        v_ = v.leftCols(keep);
        proj_ = proj.head(keep);
        n_ = n;
    }

    Eigen::Index rank() const { return s_.size(); }
    const Eigen::MatrixXd& basis() const { return v_; }
    const Eigen::VectorXd& singular_values() const { return s_; }

    Eigen::VectorXd step(double lambda) const {
        if (rank() == 0) return Eigen::VectorXd::Zero(n_);
        // s p / (s^2 + lambda), written so s^2 cannot overflow
        const Eigen::VectorXd coef = (proj_.array() / (s_.array() + lambda / s_.array())).matrix();
        return v_ * coef;
    }

private:
    Eigen::VectorXd s_, proj_;
    Eigen::MatrixXd v_;
    Eigen::Index n_ = 0;
};

template <LeastSquaresProblem P>
LmResult lm_minimize(const P& problem, const Eigen::VectorXd& theta0, const LmOptions& opts) {
    opts.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const double m = static_cast<double>(problem.residual_count());
    if (m * static_cast<double>(theta0.size()) * sizeof(double) > opts.max_jacobian_bytes)
        throw ConfigError("Jacobian of " + std::to_string(problem.residual_count()) + " x " +
                          std::to_string(theta0.size()) + " exceeds the configured memory limit");

    LmResult res;
    res.theta = theta0;
    const auto r0 = problem.residual(theta0);
    if (!r0) throw DivergenceError(0, "initial model diverges on the training data");
    double cost = r0->squaredNorm() / m;
    res.cost_history.push_back(cost);

    double lambda = opts.lambda_init;
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    bool stopped = false;
    for (int epoch = 1; epoch <= opts.max_epochs && !stopped; ++epoch) {
        res.epochs_run = epoch;
        if (cost <= opts.cost_floor) {
            res.stop_reason = StopReason::tolerance;
            res.cost_history.push_back(cost);
            res.epochs.push_back({epoch, cost, lambda, false});
            break;
        }
        problem.linearize(res.theta, r, j);
        if (!j.allFinite()) {
            res.stop_reason = StopReason::nonfinite_jacobian;
            res.cost_history.push_back(cost);
            res.epochs.push_back({epoch, cost, lambda, false});
            break;
        }
        const DampedStepSolver solver(j, r, opts.svd_rel_tol);
        bool accepted = false;
        if (solver.rank() == 0) {
            res.stop_reason = StopReason::tolerance;
            stopped = true;
        }
        for (int retry = 0; !stopped && retry < opts.max_retries; ++retry) {
            Eigen::VectorXd trial = res.theta + solver.step(lambda);
            const auto rt = problem.residual(trial);
            const double trial_cost = rt ? rt->squaredNorm() / m : std::numeric_limits<double>::infinity();
            const bool ok = std::isfinite(trial_cost) && trial_cost < cost;
            res.steps.push_back({epoch, lambda, trial_cost, ok});
            if (ok) {
                res.theta = std::move(trial);
                cost = trial_cost;
                lambda = std::max(lambda * opts.lambda_down, 1e-20);
                accepted = true;
                break;
            }
            lambda *= opts.lambda_up;
            if (lambda > opts.max_lambda) {
                res.stop_reason = StopReason::lambda_overflow;
                stopped = true;
            }
        }
        res.cost_history.push_back(cost);
        res.epochs.push_back({epoch, cost, lambda, accepted});
        if (stopped) break;
        if (cost <= opts.cost_floor) {
            res.stop_reason = StopReason::tolerance;
            break;
        }
        if (epoch >= opts.cost_window) {
            const double before = res.cost_history[static_cast<std::size_t>(epoch - opts.cost_window)];
            if (before - cost <= opts.cost_tol * before) {
                res.stop_reason = StopReason::tolerance;
                break;
            }
        }
    }
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

/// Mean squared simulation residual over all N*n_y samples; +inf when the simulation diverges.
inline double cost(const Model& model, const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& x0) {
    try {
        const Trajectory t = simulate(model, data.u, x0);
        return (data.y - t.y).array().square().mean();
    } catch (const DivergenceError&) {
        return std::numeric_limits<double>::infinity();
    }
}

/// Which parts of theta the optimizer may move.
struct TrainSpec {
    std::optional<Eigen::VectorXd> x0;  ///< initial state, zero when unset
    bool train_x0 = true;
    std::vector<std::string> frozen_blocks;
};

/// Output-error fit of a model's free parameters to one record.
class SimulationProblem {
public:
    SimulationProblem(const Model& model, const Dataset& data, const TrainSpec& spec) : data_(data) {
        data.validate();
        const Dims d = dims_of(model);
        if (data.n_u() != d.n_u || data.n_y() != d.n_y)
            throw DataError("dataset channel counts do not match the model");
        const Eigen::VectorXd x0 = spec.x0 ? *spec.x0 : Eigen::VectorXd::Zero(d.n_x);
        full_ = pack(model, x0);
        std::vector<std::string> frozen = spec.frozen_blocks;
        if (!spec.train_x0) frozen.push_back("x0");
        for (const auto& name : frozen) (void)full_.layout.block(name);  // reject unknown names
        for (const auto& b : full_.layout.blocks) {
            if (std::find(frozen.begin(), frozen.end(), b.name) != frozen.end()) continue;
            for (Eigen::Index i = 0; i < b.size(); ++i) free_.push_back(b.offset + i);
        }
    }

    Eigen::Index residual_count() const { return data_.samples() * data_.n_y(); }
    Eigen::Index free_count() const { return static_cast<Eigen::Index>(free_.size()); }
    const ParamLayout& layout() const { return full_.layout; }

    Eigen::VectorXd initial() const {
        Eigen::VectorXd t(free_count());
        for (Eigen::Index i = 0; i < free_count(); ++i) t(i) = full_.theta(free_[static_cast<std::size_t>(i)]);
        return t;
    }

    Eigen::VectorXd full_theta(const Eigen::VectorXd& free) const {
        Eigen::VectorXd t = full_.theta;
        for (Eigen::Index i = 0; i < free_count(); ++i) t(free_[static_cast<std::size_t>(i)]) = free(i);
        return t;
    }

    std::optional<Eigen::VectorXd> residual(const Eigen::VectorXd& free) const {
        const UnpackedModel um = unpack(full_theta(free), full_.layout);
        try {
            const Trajectory t = simulate(um.model, data_.u, um.x0);
            return flatten(data_.y - t.y);
        } catch (const DivergenceError&) {
            return std::nullopt;
        }
    }

    void linearize(const Eigen::VectorXd& free, Eigen::VectorXd& r, Eigen::MatrixXd& j) const {
        const UnpackedModel um = unpack(full_theta(free), full_.layout);
        const SimulationJacobian sj = output_jacobian(um.model, data_.u, um.x0, full_.layout);
        r = flatten(data_.y - sj.y);
        j.resize(sj.jacobian.rows(), free_count());
        for (Eigen::Index i = 0; i < free_count(); ++i) j.col(i) = sj.jacobian.col(free_[static_cast<std::size_t>(i)]);
    }

private:
    // sample-major, matching the Jacobian row order
    static Eigen::VectorXd flatten(const Eigen::MatrixXd& e) {
        const Eigen::MatrixXd et = e.transpose();
        return Eigen::Map<const Eigen::VectorXd>(et.data(), et.size());
    }

    const Dataset& data_;
    ParamVector full_;
    std::vector<Eigen::Index> free_;
};

struct TrainReport {
    Model final_model;
    Eigen::VectorXd final_x0;
    Eigen::VectorXd final_theta;  ///< full theta including frozen blocks and x0
    ParamLayout layout;
    std::vector<double> cost_history;
    std::vector<EpochRecord> epochs;
    std::vector<StepRecord> step_log;
    int epochs_run = 0;
    StopReason stop_reason = StopReason::max_epochs;
    double wall_time = 0.0;
};

inline TrainReport lm_train(const Model& model, const Dataset& data, const LmOptions& opts,
                            const TrainSpec& spec = {}) {
    const SimulationProblem problem(model, data, spec);
    LmResult res = lm_minimize(problem, problem.initial(), opts);
    TrainReport rep;
    rep.final_theta = problem.full_theta(res.theta);
    rep.layout = problem.layout();
    UnpackedModel um = unpack(rep.final_theta, rep.layout);
    rep.final_model = std::move(um.model);
    rep.final_x0 = std::move(um.x0);
    rep.cost_history = std::move(res.cost_history);
    rep.epochs = std::move(res.epochs);
    rep.step_log = std::move(res.steps);
    rep.epochs_run = res.epochs_run;
    rep.stop_reason = res.stop_reason;
    rep.wall_time = res.wall_time;
    return rep;
}

}  // namespace grssnn
