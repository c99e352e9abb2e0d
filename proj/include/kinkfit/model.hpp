#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kinkfit/family.hpp"
#include "kinkfit/kernel.hpp"

namespace kinkfit {

// Shape of the broken-line term attached to beta2.
//   LinearLinear     (x - tau)_+
//   LinearQuadratic  (x - tau)^2 I(x >= tau)
//   QuadraticLinear  (x - tau)^2 I(x < tau)
enum class SegmentForm { LinearLinear, LinearQuadratic, QuadraticLinear };

SegmentForm segment_form_from_token(std::string_view token);
std::string to_token(SegmentForm form);

struct ModelSpec {
    Family family = Family::normal();
    Kernel kernel = Kernel::normal_cdf();
    BandwidthRule bw = BandwidthRule::power_law(-2.0);
    SegmentForm form = SegmentForm::LinearLinear;
    std::size_t n_covariates = 0;
};

// (beta0, beta1, beta2, tau, gamma_1..gamma_k). The flat ordering is used
// for every score vector and matrix in the library.
struct ParamVector {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double tau = 0.0;
    Eigen::VectorXd gamma;

    static constexpr Eigen::Index kTau = 3;

    Eigen::Index size() const { return 4 + gamma.size(); }
    Eigen::VectorXd flat() const;
    static ParamVector from_flat(const Eigen::VectorXd& v);

    bool all_finite() const;
    std::string name(Eigen::Index i) const;
};

struct Dataset {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::MatrixXd z;  // n x k, zero columns when there are no covariates

    Eigen::Index size() const { return x.size(); }
    Eigen::Index n_covariates() const { return z.cols(); }
    Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

// Throws DataError when the dataset does not fit the spec: sizes, n >= 5 + k,
// finite x and z, y in the family's support.
void validate(const ModelSpec& spec, const Dataset& data);

// Smoothed segment term s(x, tau) and its first two tau-derivatives.
struct SegmentTerm {
    double value = 0.0;
    double d_tau = 0.0;
    double d_tau2 = 0.0;
};

SegmentTerm segment_term(SegmentForm form, double x, double tau, double h, const Kernel& kernel);

// The unsmoothed segment term, i.e. the h -> 0 limit of segment_term.
double hard_segment(SegmentForm form, double x, double tau);

Eigen::VectorXd linear_predictor(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                                 double h);

// Q_n = sum_i y_i theta_i - b(theta_i).
double objective(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h);

// The same sum with the exact indicator in place of K, i.e. the
// log-likelihood without the sum of log c(y_i).
double hard_objective(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

// S_n = grad Q_n.
Eigen::VectorXd score(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h);

// J_n = -grad S_n = sum b''(theta) g g^t - sum (y - b'(theta)) d2theta.
Eigen::MatrixXd neg_hessian(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h);

// Sigma_n = cov S_n = sum b''(theta) g g^t with g = d theta / d delta.
Eigen::MatrixXd score_covariance(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                                 double h);

// All four quantities from one pass over the data.
struct Evaluation {
    double objective = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd neg_hessian;
    Eigen::MatrixXd score_cov;
};

enum class EvalLevel { Objective, Score, Full };

Evaluation evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h,
                    EvalLevel level = EvalLevel::Full);

}  // namespace kinkfit
