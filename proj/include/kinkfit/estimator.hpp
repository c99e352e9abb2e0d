#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kinkfit/model.hpp"

namespace kinkfit {

struct FitConfig {
    // Candidate change points; empty means 21 quantiles of x from the 10th to
    // the 90th percentile.
    std::vector<double> tau_grid;
    double tol = 1e-5;
    int max_iter = 100;
    int step_halving_max = 30;

    void check() const;
};

struct FitResult {
    ParamVector params;
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
    double grad_norm = 0.0;  // max-norm of the score at params
    double h_used = 0.0;
    Eigen::MatrixXd neg_hessian_at_opt;
    Eigen::MatrixXd score_cov_at_opt;
    // Q_n after each accepted step, starting from the initial value.
    std::vector<double> objective_trace;

    friend bool operator==(const FitResult& a, const FitResult& b);
};

// Auto tau grid: 21 equally spaced quantile levels in [0.1, 0.9].
std::vector<double> auto_tau_grid(const Eigen::VectorXd& x);

// Fixed-tau GLM fits with the hard segment regressor over the grid; the
// candidate maximizing Q_n wins (ties toward the smallest tau).
ParamVector profile_init(const ModelSpec& spec, const Dataset& data, const FitConfig& config);

// Damped Newton ascent on Q_n from profile_init.
FitResult fit(const ModelSpec& spec, const Dataset& data, const FitConfig& config = {});

// Same ascent from a caller-provided start (warm starts for bootstrap refits).
FitResult fit_from(const ModelSpec& spec, const Dataset& data, const FitConfig& config, ParamVector start);

// Newton on beta and gamma only, with tau frozen at start.tau.
FitResult fit_fixed_tau(const ModelSpec& spec, const Dataset& data, const FitConfig& config, ParamVector start);

// One-step linearization about tau0: regress on (1, x, u, v, z) where
// u = s(x, tau0) and v = -ds/dtau(x, tau0), so that
// tau_hat = tau0 - c/beta2.
struct LinearizedFit {
    double tau0 = 0.0;
    Eigen::VectorXd coef;      // (beta0, beta1, beta2, c, gamma...)
    Eigen::MatrixXd cov;       // GLM covariance in the same order
    double c_aux() const { return coef(3); }
    double beta2() const { return coef(2); }
    double tau_hat() const { return tau0 - c_aux() / beta2(); }
};

LinearizedFit linearized_fit(const ModelSpec& spec, const Dataset& data, double tau0);

}  // namespace kinkfit
