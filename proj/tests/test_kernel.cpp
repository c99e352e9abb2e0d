#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include "kinkfit/errors.hpp"
#include "kinkfit/kernel.hpp"

using namespace kinkfit;

namespace {

Kernel cauchy() {
    using std::numbers::pi;
    return Kernel::custom([](double u) { return 0.5 + std::atan(u) / pi; },
                          [](double u) { return 1.0 / (pi * (1.0 + u * u)); },
                          [](double u) { return -2.0 * u / (pi * (1.0 + u * u) * (1.0 + u * u)); }, "cauchy");
}

// Moment int v^i K'(v) dv by double-exponential quadrature, independent of
// the library's Simpson rule.
double moment_normal(int i) {
    boost::math::quadrature::sinh_sinh<double> q;
    return q.integrate([i](double v) { return std::pow(v, i) * std::exp(-v * v / 2) / std::sqrt(2 * std::numbers::pi); });
}

double moment_exponential(int i) {
    boost::math::quadrature::exp_sinh<double> q;
    return q.integrate([i](double v) { return std::pow(v, i) * std::exp(-v); }, 0.0,
                       std::numeric_limits<double>::infinity());
}

int first_nonzero(double (*moment)(int)) {
    for (int i = 1; i <= 8; ++i) {
        if (std::abs(moment(i)) > 1e-6) return i;
    }
    return -1;
}

}  // namespace

TEST_CASE("derivatives match finite differences") {
    const double e = 1e-5;
    for (const Kernel& k : {Kernel::normal_cdf(), Kernel::exponential_cdf()}) {
        for (double u : {-3.0, -0.8, 0.3, 1.1, 4.0, 9.5}) {
            if (k.kind() == Kernel::Kind::ExponentialCdf && u < 0) continue;
            const auto v = k.eval(u);
            CHECK((k.eval(u + e).k - k.eval(u - e).k) / (2 * e) == doctest::Approx(v.d1).epsilon(1e-7));
            CHECK((k.eval(u + e).d1 - k.eval(u - e).d1) / (2 * e) == doctest::Approx(v.d2).epsilon(1e-6));
        }
    }
}

TEST_CASE("normal cdf values") {
    const Kernel k = Kernel::normal_cdf();
    CHECK(k.eval(0.0).k == doctest::Approx(0.5));
    CHECK(k.eval(1.96).k == doctest::Approx(0.9750021048517795).epsilon(1e-12));
    CHECK(k.eval(0.0).d1 == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)));
    CHECK(k.eval(-30.0).k == doctest::Approx(4.906713927148187e-198).epsilon(1e-10));
}

TEST_CASE("exponential cdf is zero to the left and takes right limits at the kink") {
    const Kernel k = Kernel::exponential_cdf();
    CHECK(k.eval(-0.5).k == 0.0);
    CHECK(k.eval(-0.5).d1 == 0.0);
    CHECK(k.eval(0.0).d1 == 1.0);
    CHECK(k.eval(0.0).d2 == -1.0);
    CHECK(k.eval(2.0).k == doctest::Approx(1.0 - std::exp(-2.0)));
}

TEST_CASE("arguments beyond the clamp take the exact limits") {
    for (const Kernel& k : {Kernel::normal_cdf(), Kernel::exponential_cdf()}) {
        const auto hi = k.eval(1e12);
        const auto lo = k.eval(-1e12);
        CHECK(hi.k == 1.0);
        CHECK(hi.d1 == 0.0);
        CHECK(hi.d2 == 0.0);
        CHECK(lo.k == 0.0);
        CHECK(lo.d1 == 0.0);
        CHECK(lo.d2 == 0.0);
    }
    CHECK_THROWS_AS(Kernel::normal_cdf().eval(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("validation of the built-in kernels and a Cauchy kernel") {
    const auto normal = validate(Kernel::normal_cdf());
    CHECK(normal.passed());
    const auto expo = validate(Kernel::exponential_cdf());
    CHECK(expo.passed());
    const auto c = validate(cauchy());
    CHECK(c.limits() == false);  // 0.5 + atan(1e3)/pi is 3e-4 short of 1
    CHECK_FALSE(c.condition_a());
    CHECK_FALSE(c.passed());
}

TEST_CASE("kernel order agrees with a quadrature oracle") {
    CHECK(moment_normal(1) == doctest::Approx(0.0));
    CHECK(moment_normal(2) == doctest::Approx(1.0));
    CHECK(first_nonzero(moment_normal) == 2);
    CHECK(first_nonzero(moment_exponential) == 1);
    CHECK(kernel_order(Kernel::normal_cdf()) == first_nonzero(moment_normal));
    CHECK(kernel_order(Kernel::exponential_cdf()) == first_nonzero(moment_exponential));
}

TEST_CASE("bandwidth rules") {
    CHECK(BandwidthRule::from_token("n^-2").bandwidth(500) == doctest::Approx(4e-6));
    CHECK(BandwidthRule::from_token("n^-3").bandwidth(500) == doctest::Approx(8e-9));
    CHECK(BandwidthRule::from_token("n^-3").bandwidth(100000000) == BandwidthRule::kDefaultFloor);
    CHECK(BandwidthRule::from_token("fixed:0.25").bandwidth(10) == 0.25);
    CHECK(BandwidthRule::from_token("n^-2").token() == "n^-2");
    CHECK_THROWS_AS(BandwidthRule::from_token("silverman"), ConfigError);
    CHECK_THROWS_AS(BandwidthRule::from_token("fixed:-1"), ConfigError);
    CHECK_THROWS_AS(BandwidthRule::from_token("n^-2").bandwidth(0), DomainError);
    CHECK_THROWS_AS(Kernel::from_token("epanechnikov"), ConfigError);
}
