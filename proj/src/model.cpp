#include "kinkfit/model.hpp"

#include <cmath>

#include "kinkfit/errors.hpp"

namespace kinkfit {

namespace {

// Neumaier compensated sum: per-observation totals agree to ~1e-16 relative
// whatever the order of accumulation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

class CompensatedMatrix {
public:
    explicit CompensatedMatrix(Eigen::Index p) : p_(p), cells_(static_cast<std::size_t>(p * p)) {}
    void add(Eigen::Index r, Eigen::Index c, double v) { cells_[static_cast<std::size_t>(r * p_ + c)].add(v); }
    Eigen::MatrixXd symmetric() const {
        Eigen::MatrixXd m(p_, p_);
        for (Eigen::Index r = 0; r < p_; ++r) {
            for (Eigen::Index c = 0; c <= r; ++c) {
                m(r, c) = m(c, r) = cells_[static_cast<std::size_t>(r * p_ + c)].value();
            }
        }
        return m;
    }

private:
    Eigen::Index p_;
    std::vector<CompensatedSum> cells_;
};

void check_inputs(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h) {
    if (!(h > 0.0)) throw DomainError("bandwidth must be positive");
    if (data.y.size() != data.x.size() || data.z.rows() != data.x.size()) {
        throw DomainError("dataset columns have different lengths");
    }
    if (params.gamma.size() != data.z.cols() || static_cast<std::size_t>(data.z.cols()) != spec.n_covariates) {
        throw DomainError("covariate count mismatch between spec, parameters and data");
    }
}

double covariate_part(const ParamVector& params, const Dataset& data, Eigen::Index i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < params.gamma.size(); ++j) s += params.gamma(j) * data.z(i, j);
    return s;
}

}  // namespace

SegmentForm segment_form_from_token(std::string_view token) {
    if (token == "linear-linear") return SegmentForm::LinearLinear;
    if (token == "linear-quadratic") return SegmentForm::LinearQuadratic;
    if (token == "quadratic-linear") return SegmentForm::QuadraticLinear;
    throw ConfigError("unknown segment form '" + std::string(token) +
                      "' (expected linear-linear, linear-quadratic or quadratic-linear)");
}

std::string to_token(SegmentForm form) {
    switch (form) {
        case SegmentForm::LinearLinear: return "linear-linear";
        case SegmentForm::LinearQuadratic: return "linear-quadratic";
        case SegmentForm::QuadraticLinear: return "quadratic-linear";
    }
    return "?";
}

Eigen::VectorXd ParamVector::flat() const {
    Eigen::VectorXd v(size());
    v << beta0, beta1, beta2, tau, gamma;
    return v;
}

ParamVector ParamVector::from_flat(const Eigen::VectorXd& v) {
    if (v.size() < 4) throw DomainError("parameter vector needs at least four entries");
    ParamVector p;
    p.beta0 = v(0);
    p.beta1 = v(1);
    p.beta2 = v(2);
    p.tau = v(3);
    p.gamma = v.tail(v.size() - 4);
    return p;
}

bool ParamVector::all_finite() const { return flat().allFinite(); }

std::string ParamVector::name(Eigen::Index i) const {
    switch (i) {
        case 0: return "beta0";
        case 1: return "beta1";
        case 2: return "beta2";
        case 3: return "tau";
        default: return "gamma" + std::to_string(i - 3);
    }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.x.resize(m);
    out.y.resize(m);
    out.z.resize(m, z.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto src = rows[static_cast<std::size_t>(r)];
        out.x(r) = x(src);
        out.y(r) = y(src);
        out.z.row(r) = z.row(src);
    }
    return out;
}

void validate(const ModelSpec& spec, const Dataset& data) {
    const auto n = data.size();
    const auto k = static_cast<Eigen::Index>(spec.n_covariates);
    if (data.y.size() != n || data.z.rows() != n) throw DataError("dataset columns have different lengths");
    if (data.z.cols() != k) {
        throw DataError("dataset has " + std::to_string(data.z.cols()) + " covariates, model expects " +
                        std::to_string(k));
    }
    if (n < 5 + k) {
        throw DataError("need at least " + std::to_string(5 + k) + " observations, got " + std::to_string(n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(data.x(i))) throw DataError("x is not finite at row " + std::to_string(i));
        if (!spec.family.in_support(data.y(i))) {
            throw DataError("y = " + std::to_string(data.y(i)) + " at row " + std::to_string(i) +
                            " is outside the support of the " + spec.family.token() + " family");
        }
        if (k > 0 && !data.z.row(i).allFinite()) {
            throw DataError("covariate is not finite at row " + std::to_string(i));
        }
    }
}

SegmentTerm segment_term(SegmentForm form, double x, double tau, double h, const Kernel& kernel) {
    if (!(h > 0.0)) throw DomainError("bandwidth must be positive");
    const double d = x - tau;
    const double u = d / h;
    const KernelValue kv = kernel.eval(u);
    // Each 1/h is paired with K' or K'' through u = d/h; once the kernel is
    // clamped those factors are exact zeros and the products stay finite.
    switch (form) {
        case SegmentForm::LinearLinear:
            return {d * kv.k, -(kv.k + u * kv.d1), (2.0 * kv.d1 + u * kv.d2) / h};
        case SegmentForm::LinearQuadratic:
            return {d * d * kv.k, -d * (2.0 * kv.k + u * kv.d1),
                    2.0 * kv.k + 4.0 * u * kv.d1 + u * u * kv.d2};
        case SegmentForm::QuadraticLinear: {
            const double c = 1.0 - kv.k;
            return {d * d * c, -d * (2.0 * c - u * kv.d1), 2.0 * c - 4.0 * u * kv.d1 - u * u * kv.d2};
        }
    }
    return {};
}

double hard_segment(SegmentForm form, double x, double tau) {
    const double d = x - tau;
    switch (form) {
        case SegmentForm::LinearLinear: return d > 0.0 ? d : 0.0;
        case SegmentForm::LinearQuadratic: return d >= 0.0 ? d * d : 0.0;
        case SegmentForm::QuadraticLinear: return d < 0.0 ? d * d : 0.0;
    }
    return 0.0;
}

Eigen::VectorXd linear_predictor(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                                 double h) {
    check_inputs(spec, params, data, h);
    Eigen::VectorXd theta(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const auto seg = segment_term(spec.form, data.x(i), params.tau, h, spec.kernel);
        theta(i) = params.beta0 + params.beta1 * data.x(i) + params.beta2 * seg.value +
                   covariate_part(params, data, i);
    }
    return theta;
}

double objective(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h) {
    return evaluate(spec, params, data, h, EvalLevel::Objective).objective;
}

double hard_objective(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
    if (params.gamma.size() != data.z.cols()) throw DomainError("covariate count mismatch");
    CompensatedSum q;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double theta = params.beta0 + params.beta1 * data.x(i) +
                             params.beta2 * hard_segment(spec.form, data.x(i), params.tau) +
                             covariate_part(params, data, i);
        const double qi = data.y(i) * theta - spec.family.cumulant(theta);
        if (!std::isfinite(qi)) throw NumericError("log-likelihood term is not finite", static_cast<std::size_t>(i));
        q.add(qi);
    }
    return q.value();
}

Eigen::VectorXd score(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h) {
    return evaluate(spec, params, data, h, EvalLevel::Score).score;
}

Eigen::MatrixXd neg_hessian(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h) {
    return evaluate(spec, params, data, h).neg_hessian;
}

Eigen::MatrixXd score_covariance(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                                 double h) {
    return evaluate(spec, params, data, h).score_cov;
}

Evaluation evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& data, double h,
                    EvalLevel level) {
    check_inputs(spec, params, data, h);
    const Eigen::Index p = params.size();
    const Eigen::Index k = params.gamma.size();
    const bool want_score = level != EvalLevel::Objective;
    const bool want_matrices = level == EvalLevel::Full;

    CompensatedSum q;
    std::vector<CompensatedSum> s(want_score ? static_cast<std::size_t>(p) : 0);
    CompensatedMatrix info(want_matrices ? p : 0);
    // Residual-weighted second derivatives of theta only touch (beta2, tau)
    // and (tau, tau).
    CompensatedSum resid_b2_tau, resid_tau_tau;

    Eigen::VectorXd g(p);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double xi = data.x(i);
        const auto seg = segment_term(spec.form, xi, params.tau, h, spec.kernel);
        const double theta = params.beta0 + params.beta1 * xi + params.beta2 * seg.value +
                             covariate_part(params, data, i);
        const double qi = data.y(i) * theta - spec.family.cumulant(theta);
        if (!std::isfinite(qi)) throw NumericError("objective term is not finite", static_cast<std::size_t>(i));
        q.add(qi);
        if (!want_score) continue;

        const double resid = data.y(i) - spec.family.mean(theta);
        g(0) = 1.0;
        g(1) = xi;
        g(2) = seg.value;
        g(3) = params.beta2 * seg.d_tau;
        for (Eigen::Index j = 0; j < k; ++j) g(4 + j) = data.z(i, j);
        if (!g.allFinite()) throw NumericError("derivative of theta is not finite", static_cast<std::size_t>(i));
        for (Eigen::Index a = 0; a < p; ++a) s[static_cast<std::size_t>(a)].add(resid * g(a));
        if (!want_matrices) continue;

        const double w = spec.family.variance(theta);
        for (Eigen::Index r = 0; r < p; ++r) {
            for (Eigen::Index c = 0; c <= r; ++c) info.add(r, c, w * g(r) * g(c));
        }
        const double h44 = params.beta2 * seg.d_tau2;
        if (!std::isfinite(h44)) throw NumericError("second derivative of theta is not finite", static_cast<std::size_t>(i));
        resid_b2_tau.add(resid * seg.d_tau);
        resid_tau_tau.add(resid * h44);
    }

    Evaluation out;
    out.objective = q.value();
    if (want_score) {
        out.score.resize(p);
        for (Eigen::Index a = 0; a < p; ++a) out.score(a) = s[static_cast<std::size_t>(a)].value();
    }
    if (want_matrices) {
        out.score_cov = info.symmetric();
        out.neg_hessian = out.score_cov;
        out.neg_hessian(2, 3) -= resid_b2_tau.value();
        out.neg_hessian(3, 2) = out.neg_hessian(2, 3);
        out.neg_hessian(3, 3) -= resid_tau_tau.value();
    }
    return out;
}

}  // namespace kinkfit
