#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "kinkfit/errors.hpp"
#include "kinkfit/family.hpp"

using namespace kinkfit;

namespace {

// Long-double references for b, b' and b''.
long double ref_cumulant(Family::Kind k, long double t) {
    switch (k) {
        case Family::Kind::NormalIdentity: return t * t / 2;
        case Family::Kind::BernoulliLogit: return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
        case Family::Kind::PoissonLog: return std::exp(t);
    }
    return 0;
}

long double ref_mean(Family::Kind k, long double t) {
    switch (k) {
        case Family::Kind::NormalIdentity: return t;
        case Family::Kind::BernoulliLogit: return 1 / (1 + std::exp(-t));
        case Family::Kind::PoissonLog: return std::exp(t);
    }
    return 0;
}

long double ref_variance(Family::Kind k, long double t) {
    switch (k) {
        case Family::Kind::NormalIdentity: return 1;
        case Family::Kind::BernoulliLogit: {
            const long double e = std::exp(-std::fabs(t));
            return e / ((1 + e) * (1 + e));
        }
        case Family::Kind::PoissonLog: return std::exp(t);
    }
    return 0;
}

bool close(double got, long double want, double rel) {
    const long double scale = std::max<long double>(1, std::fabs(want));
    return std::fabs(got - want) <= rel * scale;
}

}  // namespace

TEST_CASE("cumulant, mean and variance match extended-precision references") {
    for (const Family f : {Family::normal(), Family::logit(), Family::poisson()}) {
        for (double t = -30.0; t <= 30.0; t += 0.37) {
            CHECK(close(f.cumulant(t), ref_cumulant(f.kind(), t), 1e-14));
            CHECK(close(f.mean(t), ref_mean(f.kind(), t), 1e-14));
            // relative to the value itself so tiny logit variances are checked
            const long double v = ref_variance(f.kind(), t);
            CHECK(std::fabs(f.variance(t) - v) <= 1e-13 * v);
        }
    }
}

TEST_CASE("mean and variance are finite-difference derivatives of the cumulant") {
    const double e = 1e-5;
    for (const Family f : {Family::normal(), Family::logit(), Family::poisson()}) {
        for (double t : {-4.0, -1.3, 0.0, 0.6, 2.2, 5.0}) {
            const double d1 = (f.cumulant(t + e) - f.cumulant(t - e)) / (2 * e);
            const double d2 = (f.mean(t + e) - f.mean(t - e)) / (2 * e);
            CHECK(d1 == doctest::Approx(f.mean(t)).epsilon(1e-8));
            CHECK(d2 == doctest::Approx(f.variance(t)).epsilon(1e-8));
        }
    }
}

TEST_CASE("logit is stable far from zero") {
    const Family f = Family::logit();
    CHECK(f.cumulant(800.0) == 800.0);
    CHECK(f.cumulant(-800.0) == 0.0);
    CHECK(f.mean(800.0) == 1.0);
    CHECK(f.mean(-800.0) == 0.0);
    CHECK(f.variance(800.0) >= 0.0);
    CHECK(std::isfinite(f.variance(-800.0)));
    CHECK(f.cumulant(-40.0) == doctest::Approx(std::exp(-40.0)).epsilon(1e-12));
}

TEST_CASE("non-finite theta is a domain error") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    for (const Family f : {Family::normal(), Family::logit(), Family::poisson()}) {
        CHECK_THROWS_AS(f.cumulant(nan), DomainError);
        CHECK_THROWS_AS(f.mean(inf), DomainError);
        CHECK_THROWS_AS(f.variance(-inf), DomainError);
    }
}

TEST_CASE("support") {
    CHECK(Family::logit().in_support(0.0));
    CHECK(Family::logit().in_support(1.0));
    CHECK_FALSE(Family::logit().in_support(2.0));
    CHECK_FALSE(Family::logit().in_support(0.5));
    CHECK(Family::poisson().in_support(7.0));
    CHECK_FALSE(Family::poisson().in_support(-1.0));
    CHECK_FALSE(Family::poisson().in_support(1.5));
    CHECK(Family::normal().in_support(-3.2));
    CHECK_FALSE(Family::normal().in_support(std::numeric_limits<double>::infinity()));
}

TEST_CASE("tokens") {
    CHECK(Family::from_token("normal") == Family::normal());
    CHECK(Family::from_token("logit").token() == "logit");
    CHECK(Family::from_token("poisson") == Family::poisson());
    CHECK_THROWS_AS(Family::from_token("gaussian"), ConfigError);
}

TEST_CASE("samples have the family mean and variance") {
    std::mt19937_64 rng(7);
    const int m = 200000;
    for (const Family f : {Family::normal(), Family::logit(), Family::poisson()}) {
        const double t = 0.7;
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < m; ++i) {
            const double y = f.sample(t, rng);
            CHECK(f.in_support(y));
            s += y;
            ss += y * y;
        }
        const double mean = s / m;
        const double var = ss / m - mean * mean;
        CHECK(std::abs(mean - f.mean(t)) < 5.0 * std::sqrt(f.variance(t) / m));
        CHECK(var == doctest::Approx(f.variance(t)).epsilon(0.02));
    }
}
