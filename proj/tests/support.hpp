#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkfit/model.hpp"
#include "kinkfit/parallel.hpp"

namespace kinkfit::testing {

// Broken-line sample with x ~ U(lo, hi) and y drawn at the unsmoothed
// predictor; noise-free when `exact` (normal family only).
inline Dataset broken_line(const Family& family, const ParamVector& truth, int n, std::uint64_t seed,
                           double lo = -2.0, double hi = 2.0, bool exact = false,
                           SegmentForm form = SegmentForm::LinearLinear) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(lo, hi);
    Dataset d;
    d.x.resize(n);
    d.y.resize(n);
    d.z.resize(n, truth.gamma.size());
    std::normal_distribution<double> nz(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        d.x(i) = ux(rng);
        for (Eigen::Index j = 0; j < truth.gamma.size(); ++j) d.z(i, j) = nz(rng);
        double theta = truth.beta0 + truth.beta1 * d.x(i) + truth.beta2 * hard_segment(form, d.x(i), truth.tau);
        for (Eigen::Index j = 0; j < truth.gamma.size(); ++j) theta += truth.gamma(j) * d.z(i, j);
        d.y(i) = exact ? theta : family.sample(theta, rng);
    }
    return d;
}

// Case-control style data shaped like a myocardial-infarction study:
// y = case indicator, x = alcohol intake in g/day (gamma distributed, median
// about 14), and nine covariates: age, smoking, BMI, hypertension, diabetes,
// family history, cholesterol and two centre dummies. The alcohol effect is
// quadratic below tau = 13.10 and linear above, with beta = (-11.64, 0.008,
// 0.009). Prevalence is about 43%.
struct EuramicShape {
    static constexpr double beta0 = -11.64;
    static constexpr double beta1 = 0.008;
    static constexpr double beta2 = 0.009;
    static constexpr double tau = 13.10;
    static inline const std::vector<std::string> covariates = {"age", "smoker", "bmi", "hypertension", "diabetes",
                                                               "family_history", "cholesterol", "centre2", "centre3"};
    static inline const std::vector<double> gamma = {0.147, 0.8, 0.05, 0.5, 0.6, 0.4, 0.2, 0.3, -0.2};
};

inline Dataset euramic_like(int n, std::uint64_t seed) {
    auto rng = substream(seed, 0, StreamTag::Data);
    std::gamma_distribution<double> alcohol(1.5, 12.0);
    std::uniform_real_distribution<double> age(35.0, 70.0), u01(0.0, 1.0);
    std::normal_distribution<double> bmi(26.0, 3.0), chol(5.8, 1.0);
    std::uniform_int_distribution<int> centre(0, 2);
    const auto k = static_cast<Eigen::Index>(EuramicShape::gamma.size());
    Dataset d;
    d.x.resize(n);
    d.y.resize(n);
    d.z.resize(n, k);
    for (int i = 0; i < n; ++i) {
        d.x(i) = alcohol(rng);
        const int c = centre(rng);
        d.z.row(i) << age(rng), u01(rng) < 0.45, bmi(rng), u01(rng) < 0.25, u01(rng) < 0.08, u01(rng) < 0.3,
            chol(rng), c == 1, c == 2;
    }
    const Family logit = Family::logit();
    for (int i = 0; i < n; ++i) {
        double theta = EuramicShape::beta0 + EuramicShape::beta1 * d.x(i) +
                       EuramicShape::beta2 * hard_segment(SegmentForm::QuadraticLinear, d.x(i), EuramicShape::tau);
        for (Eigen::Index j = 0; j < k; ++j) theta += EuramicShape::gamma[static_cast<std::size_t>(j)] * d.z(i, j);
        d.y(i) = logit.sample(theta, rng);
    }
    return d;
}

inline std::string to_csv(const Dataset& d, const std::vector<std::string>& znames = {}) {
    std::string out = "y,x";
    for (const auto& z : znames) out += "," + z;
    out += "\n";
    char buf[64];
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", d.y(i), d.x(i));
        out += buf;
        for (Eigen::Index j = 0; j < d.z.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", d.z(i, j));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

inline ModelSpec make_spec(const Family& family, SegmentForm form = SegmentForm::LinearLinear,
                           std::size_t k = 0) {
    ModelSpec s;
    s.family = family;
    s.form = form;
    s.n_covariates = k;
    return s;
}

inline Eigen::VectorXd fd_score(const ModelSpec& spec, const ParamVector& p, const Dataset& d, double h,
                                double step = 1e-6) {
    const Eigen::VectorXd v = p.flat();
    Eigen::VectorXd g(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double e = step * std::max(1.0, std::abs(v(i)));
        Eigen::VectorXd a = v, b = v;
        a(i) += e;
        b(i) -= e;
        g(i) = (objective(spec, ParamVector::from_flat(a), d, h) - objective(spec, ParamVector::from_flat(b), d, h)) /
               (2 * e);
    }
    return g;
}

inline Eigen::MatrixXd fd_neg_hessian(const ModelSpec& spec, const ParamVector& p, const Dataset& d, double h,
                                      double step = 1e-6) {
    const Eigen::VectorXd v = p.flat();
    Eigen::MatrixXd m(v.size(), v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double e = step * std::max(1.0, std::abs(v(i)));
        Eigen::VectorXd a = v, b = v;
        a(i) += e;
        b(i) -= e;
        m.col(i) = -(score(spec, ParamVector::from_flat(a), d, h) - score(spec, ParamVector::from_flat(b), d, h)) /
                   (2 * e);
    }
    return m;
}

// max |a - b| / max(1, max |b|)
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace kinkfit::testing
