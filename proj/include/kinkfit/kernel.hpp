#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace kinkfit {

// K(u) together with its first two derivatives.
struct KernelValue {
    double k = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// CDF-like smoothing function that replaces the indicator I(u > 0).
//
// Built-in kernels clamp |u| at kClampLimit: beyond it K, K' and K'' take
// their exact limits (0 or 1, 0, 0). With bandwidths like n^-3 the scaled
// argument is enormous and the unclamped tails would feed 0*inf into the
// Hessian.
class Kernel {
public:
    enum class Kind { NormalCdf, ExponentialCdf, Custom };
    using Fn = std::function<double(double)>;

    static constexpr double kClampLimit = 1e3;

    static Kernel normal_cdf() { return Kernel(Kind::NormalCdf); }
    // K(u) = 1 - exp(-u) for u >= 0 and 0 otherwise. At the kink u = 0 the
    // derivatives take their right limits K'(0) = 1, K''(0) = -1.
    static Kernel exponential_cdf() { return Kernel(Kind::ExponentialCdf); }
    static Kernel custom(Fn k, Fn d1, Fn d2, std::string name = "custom");

    // "normal-cdf" | "exp-cdf"
    static Kernel from_token(std::string_view token);
    std::string token() const;

    Kind kind() const { return kind_; }

    KernelValue eval(double u) const;

private:
    explicit Kernel(Kind kind) : kind_(kind) {}

    Kind kind_;
    Fn k_, d1_, d2_;
    std::string name_;
};

// h_n schedule. PowerLaw gives max(floor, n^exponent).
class BandwidthRule {
public:
    enum class Form { PowerLaw, Fixed };

    static constexpr double kDefaultFloor = 1.8189894035458565e-12;  // eps^(3/4)

    static BandwidthRule power_law(double exponent, double floor = kDefaultFloor);
    static BandwidthRule fixed(double h);

    // "n^-2", "n^-3", "n^<exponent>" or "fixed:<value>"
    static BandwidthRule from_token(std::string_view token);
    std::string token() const;

    Form form() const { return form_; }
    double value() const { return value_; }
    double floor() const { return floor_; }

    double bandwidth(std::size_t n) const;

private:
    BandwidthRule(Form form, double value, double floor) : form_(form), value_(value), floor_(floor) {}

    Form form_;
    double value_;  // exponent or fixed h
    double floor_;
};

// Tail and boundedness checks on K, K' and K''. Condition (a) is
// boundedness of K' with |u|K'(u) -> 0, condition (b) the same for K''
// with u^2 K''(u).
struct KernelReport {
    bool lower_limit = false;    // K(-1e3) ~ 0
    bool upper_limit = false;    // K(1e3) ~ 1
    bool d1_bounded = false;
    bool d1_tail = false;        // |u| K'(u) < 1e-6 at |u| = 1e3
    bool d2_bounded = false;
    bool d2_tail = false;        // u^2 |K''(u)| < 1e-6 at |u| = 1e3
    double d1_sup = 0.0;
    double d2_sup = 0.0;
    double d1_tail_value = 0.0;
    double d2_tail_value = 0.0;

    bool condition_a() const { return d1_bounded && d1_tail; }
    bool condition_b() const { return d2_bounded && d2_tail; }
    bool limits() const { return lower_limit && upper_limit; }
    bool passed() const { return limits() && condition_a() && condition_b(); }
};

KernelReport validate(const Kernel& kernel);

// Smallest i >= 1 with |int v^i K'(v) dv| > 1e-6, from composite Simpson
// quadrature on [-60, 60]. Throws ValidationError if none up to i = 8.
int kernel_order(const Kernel& kernel);

}  // namespace kinkfit
