#include "kinkfit/inference.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "kinkfit/errors.hpp"
#include "kinkfit/parallel.hpp"

namespace kinkfit {

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array().abs() > 0.0).all()) {
        throw InferenceError(std::string(what) + " is singular");
    }
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    if (!inv.allFinite()) throw InferenceError(std::string(what) + " is singular");
    return inv;
}

Eigen::VectorXd sqrt_diagonal(const Eigen::MatrixXd& cov) {
    Eigen::VectorXd se(cov.rows());
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        if (!(cov(i, i) >= 0.0)) throw InferenceError("covariance has a negative diagonal entry");
        se(i) = std::sqrt(cov(i, i));
    }
    return se;
}

std::size_t order_statistic(std::size_t m, double prob) {
    // 1-based index ceil(m * prob), clamped to [1, m].
    const double pos = std::ceil(static_cast<double>(m) * prob - 1e-9);
    return static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(m)));
}

}  // namespace

Eigen::MatrixXd sandwich_cov(const FitResult& fit, HessianMode mode) {
    if (!fit.converged) throw InferenceError("sandwich covariance needs a converged fit");
    const Eigen::MatrixXd& sigma = fit.score_cov_at_opt;
    Eigen::MatrixXd cov;
    if (mode == HessianMode::Expected) {
        cov = spd_inverse(sigma, "score covariance");
    } else {
        const Eigen::MatrixXd jinv = spd_inverse(fit.neg_hessian_at_opt, "negative Hessian");
        cov = jinv * sigma * jinv.transpose();
    }
    return 0.5 * (cov + cov.transpose());
}

double delta_se_tau(const LinearizedFit& lin) {
    const double b = lin.beta2();
    const double c = lin.c_aux();
    if (!(std::abs(b) > 1e-6)) throw IdentifiabilityError("beta2 is too close to zero for the delta method");
    const Eigen::Vector2d a(1.0 / b, -c / (b * b));
    Eigen::Matrix2d block;
    block << lin.cov(3, 3), lin.cov(3, 2), lin.cov(2, 3), lin.cov(2, 2);
    const double var = a.dot(block * a);
    if (!(var >= 0.0)) throw InferenceError("delta-method variance is negative");
    return std::sqrt(var);
}

Eigen::VectorXd delta_se(const LinearizedFit& lin) {
    Eigen::VectorXd se = sqrt_diagonal(lin.cov);
    se(ParamVector::kTau) = delta_se_tau(lin);
    return se;
}

double normal_critical_value(double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
    if (level == 0.95) return 1.96;
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
}

Interval normal_interval(double estimate, double se, double level) {
    const double z = normal_critical_value(level);
    return {estimate - z * se, estimate + z * se};
}

Interval percentile_interval(std::vector<double> values, double level) {
    if (values.empty()) throw InferenceError("percentile interval of an empty sample");
    if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
    std::sort(values.begin(), values.end());
    const double alpha = 1.0 - level;
    const auto m = values.size();
    return {values[order_statistic(m, alpha / 2.0) - 1], values[order_statistic(m, 1.0 - alpha / 2.0) - 1]};
}

BootstrapResult bootstrap_ci(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                             const BootstrapOptions& options) {
    if (options.replicates < 200) throw BootstrapError("bootstrap needs at least 200 replicates");
    if (!fit.converged) throw BootstrapError("bootstrap needs a converged fit");

    std::vector<Eigen::Index> left, right;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return data.x(a) < data.x(b); });
    for (auto i : order) (data.x(i) <= fit.params.tau ? left : right).push_back(i);
    if (left.size() < 3 || right.size() < 3) {
        throw BootstrapError("a bootstrap stratum has fewer than 3 observations");
    }

    const auto B = static_cast<std::size_t>(options.replicates);
    const Eigen::Index p = fit.params.size();
    std::vector<std::optional<Eigen::VectorXd>> draws(B);
    parallel_for(B, options.threads, [&](std::size_t b) {
        auto rng = substream(options.seed, b, StreamTag::Bootstrap);
        std::vector<Eigen::Index> rows;
        rows.reserve(order.size());
        for (const auto* stratum : {&left, &right}) {
            std::uniform_int_distribution<std::size_t> pick(0, stratum->size() - 1);
            for (std::size_t j = 0; j < stratum->size(); ++j) rows.push_back((*stratum)[pick(rng)]);
        }
        try {
            const FitResult refit = fit_from(spec, data.subset(rows), options.fit, fit.params);
            if (refit.converged) draws[b] = refit.params.flat();
        } catch (const Error&) {
        }
    });

    BootstrapResult out;
    for (const auto& d : draws) out.reps_used += d.has_value();
    out.failures = static_cast<int>(B) - out.reps_used;
    if (out.failures > static_cast<int>(B) / 10) {
        throw BootstrapError(std::to_string(out.failures) + " of " + std::to_string(B) +
                             " bootstrap refits failed (limit 10%)");
    }
    out.estimates.resize(out.reps_used, p);
    Eigen::Index row = 0;
    for (const auto& d : draws) {
        if (d) out.estimates.row(row++) = d->transpose();
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd col = out.estimates.col(j);
        out.ci.push_back(percentile_interval(std::vector<double>(col.data(), col.data() + col.size()), options.level));
    }
    return out;
}

InferenceResult infer(const ModelSpec& spec, const Dataset& data, const FitResult& fit,
                      const InferenceOptions& options) {
    InferenceResult out;
    out.cov_sandwich = sandwich_cov(fit, options.hessian);
    out.se_sandwich = sqrt_diagonal(out.cov_sandwich);
    try {
        out.se_observed = sqrt_diagonal(sandwich_cov(fit, HessianMode::Observed));
    } catch (const InferenceError&) {
    }
    try {
        out.se_delta = delta_se(linearized_fit(spec, data, fit.params.tau));
    } catch (const DegenerateDesignError&) {
    } catch (const IdentifiabilityError&) {
    }
    const Eigen::VectorXd est = fit.params.flat();
    for (Eigen::Index i = 0; i < est.size(); ++i) {
        out.ci_normal.push_back(normal_interval(est(i), out.se_sandwich(i), options.level));
    }
    if (options.bootstrap > 0) {
        BootstrapOptions b;
        b.replicates = options.bootstrap;
        b.level = options.level;
        b.seed = options.seed;
        b.threads = options.threads;
        b.fit = options.fit;
        const BootstrapResult boot = bootstrap_ci(spec, data, fit, b);
        out.ci_bootstrap = boot.ci;
        out.bootstrap_reps_used = boot.reps_used;
        out.bootstrap_failures = boot.failures;
    }
    return out;
}

}  // namespace kinkfit
