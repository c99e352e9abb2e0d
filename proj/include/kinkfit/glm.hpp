#pragma once

#include <Eigen/Dense>

#include "kinkfit/family.hpp"

namespace kinkfit {

// Ordinary GLM with natural link fitted by iteratively reweighted least
// squares. Used for the fixed-tau fits of the profile initializer and for
// the linearized one-step model.
struct GlmFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;  // inverse Fisher information at coef
    double loglik = 0.0;  // sum y*eta - b(eta)
    int iterations = 0;
    bool converged = false;
};

struct GlmOptions {
    int max_iter = 50;
    double tol = 1e-10;  // relative change in the log-likelihood
};

// Throws DegenerateDesignError when the weighted design is rank deficient.
GlmFit fit_glm(const Family& family, const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
               const GlmOptions& options = {});

}  // namespace kinkfit
