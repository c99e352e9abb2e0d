#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kinkfit/estimator.hpp"

namespace kinkfit {

// Which negative Hessian enters J^{-1} Sigma J^{-1}.
//   Expected  Y-free part of J (equal to Sigma_n for natural links), so the
//             covariance reduces to Sigma_n^{-1}.
//   Observed  J_n as computed at the optimum, including the residual-weighted
//             second derivatives of theta. Inside a smoothed kink these carry
//             1/h factors and shrink the tau variance toward zero.
enum class HessianMode { Expected, Observed };

// Covariance of the estimates; throws InferenceError when the fit did not
// converge or the matrices are singular.
Eigen::MatrixXd sandwich_cov(const FitResult& fit, HessianMode mode = HessianMode::Expected);

// sqrt(a' C a) with a = (1/beta2, -c/beta2^2) and C = cov(c, beta2).
double delta_se_tau(const LinearizedFit& lin);

// Standard errors in parameter order from the linearized model: beta and
// gamma from its GLM covariance, tau by the delta method.
Eigen::VectorXd delta_se(const LinearizedFit& lin);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

// estimate +- z * se, z = 1.96 at level 0.95.
Interval normal_interval(double estimate, double se, double level);
double normal_critical_value(double level);

// Order statistics ceil(m*alpha/2) and ceil(m*(1-alpha/2)) (1-based) of the
// m values.
Interval percentile_interval(std::vector<double> values, double level);

struct BootstrapOptions {
    int replicates = 1000;
    double level = 0.95;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    FitConfig fit;
};

struct BootstrapResult {
    std::vector<Interval> ci;   // per parameter
    Eigen::MatrixXd estimates;  // reps_used x p, in replicate order
    int reps_used = 0;
    int failures = 0;
};

// Resamples with replacement separately within {x <= tau_hat} and
// {x > tau_hat}, refits each resample from the original estimate and returns
// percentile intervals.
BootstrapResult bootstrap_ci(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                             const BootstrapOptions& options);

struct InferenceOptions {
    double level = 0.95;
    HessianMode hessian = HessianMode::Expected;
    int bootstrap = 0;  // 0 disables the bootstrap
    std::uint64_t seed = 1;
    unsigned threads = 1;
    FitConfig fit;
};

struct InferenceResult {
    Eigen::MatrixXd cov_sandwich;
    Eigen::VectorXd se_sandwich;
    // Observed-Hessian sandwich, reported for comparison; absent when J is
    // singular.
    std::optional<Eigen::VectorXd> se_observed;
    std::optional<Eigen::VectorXd> se_delta;
    std::vector<Interval> ci_normal;
    std::optional<std::vector<Interval>> ci_bootstrap;
    int bootstrap_reps_used = 0;
    int bootstrap_failures = 0;
};

InferenceResult infer(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                      const InferenceOptions& options = {});

}  // namespace kinkfit
