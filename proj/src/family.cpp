#include "kinkfit/family.hpp"

#include <algorithm>
#include <cmath>

#include "kinkfit/errors.hpp"

namespace kinkfit {

namespace {

void require_finite(double theta) {
    if (!std::isfinite(theta)) throw DomainError("natural parameter is not finite");
}

double logistic(double theta) {
    if (theta >= 0.0) return 1.0 / (1.0 + std::exp(-theta));
    const double e = std::exp(theta);
    return e / (1.0 + e);
}

}  // namespace

Family Family::from_token(std::string_view token) {
    if (token == "normal") return normal();
    if (token == "logit") return logit();
    if (token == "poisson") return poisson();
    throw ConfigError("unknown family '" + std::string(token) + "' (expected normal, logit or poisson)");
}

std::string Family::token() const {
    switch (kind_) {
        case Kind::NormalIdentity: return "normal";
        case Kind::BernoulliLogit: return "logit";
        case Kind::PoissonLog: return "poisson";
    }
    return "?";
}

double Family::cumulant(double theta) const {
    require_finite(theta);
    switch (kind_) {
        case Kind::NormalIdentity: return 0.5 * theta * theta;
        case Kind::BernoulliLogit: return std::max(theta, 0.0) + std::log1p(std::exp(-std::abs(theta)));
        case Kind::PoissonLog: return std::exp(theta);
    }
    return 0.0;
}

double Family::mean(double theta) const {
    require_finite(theta);
    switch (kind_) {
        case Kind::NormalIdentity: return theta;
        case Kind::BernoulliLogit: return logistic(theta);
        case Kind::PoissonLog: return std::exp(theta);
    }
    return 0.0;
}

double Family::variance(double theta) const {
    require_finite(theta);
    switch (kind_) {
        case Kind::NormalIdentity: return 1.0;
        case Kind::BernoulliLogit: {
            // mu(1-mu) = e^{-|t|} / (1+e^{-|t|})^2 keeps the tail away from 0*1.
            const double e = std::exp(-std::abs(theta));
            return e / ((1.0 + e) * (1.0 + e));
        }
        case Kind::PoissonLog: return std::exp(theta);
    }
    return 0.0;
}

bool Family::in_support(double y) const {
    if (!std::isfinite(y)) return false;
    switch (kind_) {
        case Kind::NormalIdentity: return true;
        case Kind::BernoulliLogit: return y == 0.0 || y == 1.0;
        case Kind::PoissonLog: return y >= 0.0 && std::floor(y) == y;
    }
    return false;
}

double Family::sample(double theta, std::mt19937_64& rng) const {
    require_finite(theta);
    switch (kind_) {
        case Kind::NormalIdentity: return std::normal_distribution<double>(theta, 1.0)(rng);
        case Kind::BernoulliLogit:
            return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < logistic(theta) ? 1.0 : 0.0;
        case Kind::PoissonLog:
            return static_cast<double>(std::poisson_distribution<long long>(std::exp(theta))(rng));
    }
    return 0.0;
}

}  // namespace kinkfit
