#include "kinkfit/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kinkfit/errors.hpp"

namespace kinkfit {

namespace {

double loglik(const Family& family, const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += y(i) * eta(i) - family.cumulant(eta(i));
    return s;
}

Eigen::VectorXd starting_eta(const Family& family, const Eigen::VectorXd& y) {
    Eigen::VectorXd eta(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        switch (family.kind()) {
            case Family::Kind::NormalIdentity: eta(i) = y(i); break;
            case Family::Kind::BernoulliLogit: {
                const double mu = (y(i) + 0.5) / 2.0;
                eta(i) = std::log(mu / (1.0 - mu));
                break;
            }
            case Family::Kind::PoissonLog: eta(i) = std::log(y(i) + 0.1); break;
        }
    }
    return eta;
}

}  // namespace

GlmFit fit_glm(const Family& family, const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
               const GlmOptions& options) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (y.size() != n) throw DomainError("design and response lengths differ");
    if (n < p) throw DegenerateDesignError("fewer observations than GLM coefficients");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw DegenerateDesignError("GLM design matrix is rank deficient");

    GlmFit fit;
    Eigen::VectorXd eta = starting_eta(family, y);
    Eigen::VectorXd w(n), work(n);
    double ll_old = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    bool have_beta = false;

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i) = std::max(family.variance(eta(i)), 1e-300);
            work(i) = eta(i) + (y(i) - family.mean(eta(i))) / w(i);
        }
        const Eigen::VectorXd sw = w.cwiseSqrt();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> wqr(sw.asDiagonal() * design);
        wqr.setThreshold(1e-10);
        if (wqr.rank() < p) throw DegenerateDesignError("weighted GLM design is rank deficient");
        Eigen::VectorXd proposal = wqr.solve(sw.cwiseProduct(work));
        if (!proposal.allFinite()) break;

        Eigen::VectorXd eta_new = design * proposal;
        double ll = loglik(family, eta_new, y);
        // Step halving toward the previous iterate guards the first steps of
        // logit and Poisson fits.
        for (int halve = 0; have_beta && !(ll >= ll_old) && halve < 30; ++halve) {
            proposal = 0.5 * (proposal + beta);
            eta_new = design * proposal;
            ll = loglik(family, eta_new, y);
        }
        if (!std::isfinite(ll)) break;

        beta = proposal;
        eta = eta_new;
        have_beta = true;
        fit.iterations = iter;
        if (std::abs(ll - ll_old) <= options.tol * (std::abs(ll) + 0.1)) {
            fit.converged = true;
            ll_old = ll;
            break;
        }
        ll_old = ll;
    }

    fit.coef = beta;
    fit.loglik = ll_old;
    for (Eigen::Index i = 0; i < n; ++i) w(i) = family.variance(eta(i));
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
        throw DegenerateDesignError("GLM Fisher information is singular");
    }
    fit.cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    if (!beta.allFinite() || !fit.cov.allFinite()) fit.converged = false;
    return fit;
}

}  // namespace kinkfit
