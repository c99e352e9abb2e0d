#include "kinkfit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "kinkfit/errors.hpp"
#include "kinkfit/glm.hpp"

namespace kinkfit {

namespace {

constexpr double kRidgeLevels[] = {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};

struct Interior {
    double lo;
    double hi;
};

// tau is kept inside [x_(2), x_(n-1)].
Interior interior_range(const Eigen::VectorXd& x) {
    std::vector<double> s(x.data(), x.data() + x.size());
    std::sort(s.begin(), s.end());
    return {s[1], s[s.size() - 2]};
}

struct NewtonStep {
    Eigen::VectorXd step;
    bool exact = true;  // unridged Newton step
};

// Solves J d = S on the free coordinates, escalating a ridge lambda * scale * I
// until J is positive definite.
std::optional<NewtonStep> newton_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& S, const std::vector<Eigen::Index>& free) {
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd Jf(m, m);
    Eigen::VectorXd Sf(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        Sf(a) = S(free[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b) Jf(a, b) = J(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    const double scale = std::max(1.0, Jf.diagonal().cwiseAbs().mean());
    for (double lambda : kRidgeLevels) {
        Eigen::MatrixXd A = Jf;
        A.diagonal().array() += lambda * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) continue;
        Eigen::VectorXd df = llt.solve(Sf);
        if (!df.allFinite()) continue;
        NewtonStep out{Eigen::VectorXd::Zero(S.size()), lambda == 0.0};
        for (Eigen::Index a = 0; a < m; ++a) out.step(free[static_cast<std::size_t>(a)]) = df(a);
        return out;
    }
    return std::nullopt;
}

bool positive_definite(const Eigen::MatrixXd& J, const std::vector<Eigen::Index>& free) {
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd Jf(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) Jf(a, b) = J(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Jf);
    return llt.info() == Eigen::Success;
}

double max_abs(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& free) {
    double m = 0.0;
    for (auto i : free) m = std::max(m, std::abs(v(i)));
    return m;
}

FitResult newton_ascent(const ModelSpec& spec, const Dataset& data, const FitConfig& config, ParamVector start,
                        bool free_tau) {
    config.check();
    validate(spec, data);
    const auto n = static_cast<double>(data.size());
    const double h = spec.bw.bandwidth(static_cast<std::size_t>(data.size()));
    const Interior range = interior_range(data.x);

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < start.size(); ++i) {
        if (free_tau || i != ParamVector::kTau) free.push_back(i);
    }

    Eigen::VectorXd delta = start.flat();
    if (free_tau) delta(ParamVector::kTau) = std::clamp(delta(ParamVector::kTau), range.lo, range.hi);
    if (!delta.allFinite()) throw OptimizationError("starting values are not finite");

    FitResult result;
    result.h_used = h;
    Evaluation ev = evaluate(spec, ParamVector::from_flat(delta), data, h);
    result.objective_trace.push_back(ev.objective);

    bool criteria_met = false;
    int iter = 0;
    while (iter < config.max_iter) {
        ++iter;
        auto solved = newton_step(ev.neg_hessian, ev.score, free);
        if (!solved) {
            // Inside a smoothed kink the residual part of J can make it
            // indefinite; fall back to a Fisher scoring step.
            solved = newton_step(ev.score_cov, ev.score, free);
            if (!solved) throw OptimizationError("negative Hessian is not positive definite even after ridge escalation");
            solved->exact = false;
        }
        const NewtonStep& ns = *solved;
        const double grad = max_abs(ev.score, free);
        if (grad < config.tol * n && ns.step.norm() < config.tol && ns.exact) {
            criteria_met = true;
            // Take the final small step only when it does not lower Q_n.
            Eigen::VectorXd cand = delta + ns.step;
            if (free_tau) cand(ParamVector::kTau) = std::clamp(cand(ParamVector::kTau), range.lo, range.hi);
            const double q = evaluate(spec, ParamVector::from_flat(cand), data, h, EvalLevel::Objective).objective;
            if (q >= ev.objective) {
                delta = cand;
                ev = evaluate(spec, ParamVector::from_flat(delta), data, h);
                result.objective_trace.push_back(ev.objective);
            }
            break;
        }

        double t = 1.0;
        bool accepted = false;
        for (int halve = 0; halve <= config.step_halving_max; ++halve, t *= 0.5) {
            Eigen::VectorXd cand = delta + t * ns.step;
            if (free_tau) cand(ParamVector::kTau) = std::clamp(cand(ParamVector::kTau), range.lo, range.hi);
            double q;
            try {
                q = evaluate(spec, ParamVector::from_flat(cand), data, h, EvalLevel::Objective).objective;
            } catch (const NumericError&) {
                continue;
            }
            if (q >= ev.objective) {
                delta = cand;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        ev = evaluate(spec, ParamVector::from_flat(delta), data, h);
        result.objective_trace.push_back(ev.objective);
    }

    result.params = ParamVector::from_flat(delta);
    result.objective_value = ev.objective;
    result.iterations = iter;
    result.grad_norm = max_abs(ev.score, free);
    result.neg_hessian_at_opt = ev.neg_hessian;
    result.score_cov_at_opt = ev.score_cov;
    result.converged = criteria_met && result.grad_norm < config.tol * n && positive_definite(ev.neg_hessian, free);

    if (free_tau && (result.params.tau <= range.lo || result.params.tau >= range.hi)) {
        throw BoundaryError("change point estimate reached the edge of the covariate range (tau = " +
                            std::to_string(result.params.tau) + ")");
    }
    return result;
}

}  // namespace

void FitConfig::check() const {
    if (!(tol > 0.0 && tol <= 1e-5)) throw ConfigError("tolerance must lie in (0, 1e-5]");
    if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (step_halving_max < 0) throw ConfigError("step_halving_max must be nonnegative");
}

bool operator==(const FitResult& a, const FitResult& b) {
    return a.params.flat() == b.params.flat() && a.objective_value == b.objective_value &&
           a.iterations == b.iterations && a.converged == b.converged && a.grad_norm == b.grad_norm &&
           a.h_used == b.h_used && a.neg_hessian_at_opt == b.neg_hessian_at_opt &&
           a.score_cov_at_opt == b.score_cov_at_opt && a.objective_trace == b.objective_trace;
}

std::vector<double> auto_tau_grid(const Eigen::VectorXd& x) {
    std::vector<double> s(x.data(), x.data() + x.size());
    std::sort(s.begin(), s.end());
    std::vector<double> grid;
    for (int j = 0; j < 21; ++j) {
        const double level = 0.1 + 0.04 * j;
        const double pos = level * static_cast<double>(s.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, s.size() - 1);
        grid.push_back(s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]));
    }
    return grid;
}

ParamVector profile_init(const ModelSpec& spec, const Dataset& data, const FitConfig& config) {
    validate(spec, data);
    std::vector<double> grid = config.tau_grid.empty() ? auto_tau_grid(data.x) : config.tau_grid;
    std::sort(grid.begin(), grid.end());
    const double xmin = data.x.minCoeff(), xmax = data.x.maxCoeff();
    for (double t : grid) {
        if (!(t > xmin && t < xmax)) throw ConfigError("tau grid value " + std::to_string(t) + " is outside (min x, max x)");
    }

    const Eigen::Index n = data.size();
    const Eigen::Index k = data.n_covariates();
    const double h = spec.bw.bandwidth(static_cast<std::size_t>(n));
    Eigen::MatrixXd design(n, 3 + k);
    design.col(0).setOnes();
    design.col(1) = data.x;
    if (k > 0) design.rightCols(k) = data.z;

    std::optional<ParamVector> best;
    double best_q = -std::numeric_limits<double>::infinity();
    for (double t : grid) {
        for (Eigen::Index i = 0; i < n; ++i) design(i, 2) = hard_segment(spec.form, data.x(i), t);
        ParamVector cand;
        double q;
        try {
            const GlmFit g = fit_glm(spec.family, design, data.y);
            if (!g.converged) continue;
            cand.beta0 = g.coef(0);
            cand.beta1 = g.coef(1);
            cand.beta2 = g.coef(2);
            cand.tau = t;
            cand.gamma = g.coef.tail(k);
            q = objective(spec, cand, data, h);
        } catch (const Error&) {
            continue;
        }
        if (q > best_q) {
            best_q = q;
            best = cand;
        }
    }
    if (!best) throw InitializationError("fixed change-point GLM fits failed for every tau candidate");
    if (std::abs(best->beta2) <= 1e-10) {
        throw IdentifiabilityError("slope change beta2 is zero at the best grid point; tau is not identifiable");
    }
    return *best;
}

FitResult fit(const ModelSpec& spec, const Dataset& data, const FitConfig& config) {
    return newton_ascent(spec, data, config, profile_init(spec, data, config), true);
}

FitResult fit_from(const ModelSpec& spec, const Dataset& data, const FitConfig& config, ParamVector start) {
    return newton_ascent(spec, data, config, std::move(start), true);
}

FitResult fit_fixed_tau(const ModelSpec& spec, const Dataset& data, const FitConfig& config, ParamVector start) {
    return newton_ascent(spec, data, config, std::move(start), false);
}

LinearizedFit linearized_fit(const ModelSpec& spec, const Dataset& data, double tau0) {
    validate(spec, data);
    const Eigen::Index n = data.size();
    const Eigen::Index k = data.n_covariates();
    const double h = spec.bw.bandwidth(static_cast<std::size_t>(n));
    Eigen::MatrixXd design(n, 4 + k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto seg = segment_term(spec.form, data.x(i), tau0, h, spec.kernel);
        design(i, 0) = 1.0;
        design(i, 1) = data.x(i);
        design(i, 2) = seg.value;
        design(i, 3) = -seg.d_tau;
    }
    if (k > 0) design.rightCols(k) = data.z;

    LinearizedFit out;
    out.tau0 = tau0;
    try {
        const GlmFit g = fit_glm(spec.family, design, data.y);
        out.coef = g.coef;
        out.cov = g.cov;
    } catch (const DegenerateDesignError&) {
        throw DegenerateDesignError(
            "linearized design is rank deficient at tau0 = " + std::to_string(tau0) +
            "; no observations inform the change point at this bandwidth, use a larger h for this step");
    }
    return out;
}

}  // namespace kinkfit
