#include "kinkfit/kernel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

#include "kinkfit/errors.hpp"

namespace kinkfit {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

KernelValue eval_normal_cdf(double u) {
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
    return {0.5 * std::erfc(-u / std::numbers::sqrt2), pdf, -u * pdf};
}

KernelValue eval_exponential_cdf(double u) {
    if (u < 0.0) return {};
    const double e = std::exp(-u);
    return {-std::expm1(-u), e, -e};
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
    }
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

Kernel Kernel::custom(Fn k, Fn d1, Fn d2, std::string name) {
    if (!k || !d1 || !d2) throw DomainError("custom kernel needs K, K' and K''");
    Kernel out(Kind::Custom);
    out.k_ = std::move(k);
    out.d1_ = std::move(d1);
    out.d2_ = std::move(d2);
    out.name_ = std::move(name);
    return out;
}

Kernel Kernel::from_token(std::string_view token) {
    if (token == "normal-cdf") return normal_cdf();
    if (token == "exp-cdf") return exponential_cdf();
    throw ConfigError("unknown kernel '" + std::string(token) + "' (expected normal-cdf or exp-cdf)");
}

std::string Kernel::token() const {
    switch (kind_) {
        case Kind::NormalCdf: return "normal-cdf";
        case Kind::ExponentialCdf: return "exp-cdf";
        case Kind::Custom: return name_;
    }
    return "?";
}

KernelValue Kernel::eval(double u) const {
    if (!std::isfinite(u)) throw DomainError("kernel argument is not finite");
    if (kind_ == Kind::Custom) return {k_(u), d1_(u), d2_(u)};
    if (u > kClampLimit) return {1.0, 0.0, 0.0};
    if (u < -kClampLimit) return {};
    return kind_ == Kind::NormalCdf ? eval_normal_cdf(u) : eval_exponential_cdf(u);
}

BandwidthRule BandwidthRule::power_law(double exponent, double floor) {
    if (!(exponent < 0.0)) throw DomainError("power-law bandwidth exponent must be negative");
    if (!(floor > 0.0)) throw DomainError("bandwidth floor must be positive");
    return BandwidthRule(Form::PowerLaw, exponent, floor);
}

BandwidthRule BandwidthRule::fixed(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("fixed bandwidth must be positive");
    return BandwidthRule(Form::Fixed, h, kDefaultFloor);
}

BandwidthRule BandwidthRule::from_token(std::string_view token) {
    try {
        if (token.starts_with("n^")) return power_law(parse_double(token.substr(2), "bandwidth exponent"));
        if (token.starts_with("fixed:")) return fixed(parse_double(token.substr(6), "fixed bandwidth"));
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("unknown bandwidth rule '" + std::string(token) + "' (expected n^-2, n^-3 or fixed:<h>)");
}

std::string BandwidthRule::token() const {
    return form_ == Form::PowerLaw ? "n^" + format_double(value_) : "fixed:" + format_double(value_);
}

double BandwidthRule::bandwidth(std::size_t n) const {
    if (n == 0) throw DomainError("bandwidth requested for n = 0");
    if (form_ == Form::Fixed) return value_;
    return std::max(floor_, std::pow(static_cast<double>(n), value_));
}

KernelReport validate(const Kernel& kernel) {
    constexpr double kFar = 1e3;
    constexpr double kTailTol = 1e-6;
    constexpr double kBound = 1e6;

    KernelReport r;
    r.lower_limit = std::abs(kernel.eval(-kFar).k) < kTailTol;
    r.upper_limit = std::abs(kernel.eval(kFar).k - 1.0) < kTailTol;

    bool d1_finite = true, d2_finite = true;
    constexpr int kSteps = 200000;
    for (int i = 0; i <= kSteps; ++i) {
        const double u = -kFar + 2.0 * kFar * i / kSteps;
        const auto v = kernel.eval(u);
        d1_finite = d1_finite && std::isfinite(v.d1);
        d2_finite = d2_finite && std::isfinite(v.d2);
        r.d1_sup = std::max(r.d1_sup, std::abs(v.d1));
        r.d2_sup = std::max(r.d2_sup, std::abs(v.d2));
    }
    r.d1_bounded = d1_finite && r.d1_sup < kBound;
    r.d2_bounded = d2_finite && r.d2_sup < kBound;

    for (double u : {-kFar, kFar}) {
        const auto v = kernel.eval(u);
        r.d1_tail_value = std::max(r.d1_tail_value, std::abs(u * v.d1));
        r.d2_tail_value = std::max(r.d2_tail_value, std::abs(u * u * v.d2));
    }
    r.d1_tail = std::isfinite(r.d1_tail_value) && r.d1_tail_value < kTailTol;
    r.d2_tail = std::isfinite(r.d2_tail_value) && r.d2_tail_value < kTailTol;
    return r;
}

int kernel_order(const Kernel& kernel) {
    constexpr double kHalfWidth = 60.0;
    constexpr int kHalfSteps = 60000;  // even, step 1e-3
    constexpr double kTol = 1e-6;
    constexpr int kMaxOrder = 8;
    const double step = kHalfWidth / kHalfSteps;

    // Simpson on [-L, 0] and [0, L] separately so a jump of K' at the origin
    // does not degrade the rule.
    std::vector<double> v(2 * kHalfSteps + 1), w(2 * kHalfSteps + 1), d1(2 * kHalfSteps + 1);
    for (int j = 0; j <= 2 * kHalfSteps; ++j) {
        v[j] = -kHalfWidth + j * step;
        d1[j] = kernel.eval(v[j]).d1;
        const int local = j <= kHalfSteps ? j : j - kHalfSteps;
        double weight = (local == 0 || local == kHalfSteps) ? 1.0 : (local % 2 == 1 ? 4.0 : 2.0);
        if (j == kHalfSteps) weight = 2.0;  // shared endpoint of both halves
        w[j] = weight * step / 3.0;
    }
    for (int order = 1; order <= kMaxOrder; ++order) {
        double moment = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) moment += w[j] * std::pow(v[j], order) * d1[j];
        if (std::abs(moment) > kTol) return order;
    }
    throw ValidationError("kernel derivative has no nonzero moment up to order 8");
}

}  // namespace kinkfit
