#pragma once

#include <random>
#include <string>
#include <string_view>

namespace kinkfit {

// Exponential-family response with natural link: log f(y; theta) =
// y*theta - b(theta) + log c(y). Dispersion is fixed at one.
class Family {
public:
    enum class Kind { NormalIdentity, BernoulliLogit, PoissonLog };

    constexpr explicit Family(Kind kind) : kind_(kind) {}

    static Family normal() { return Family(Kind::NormalIdentity); }
    static Family logit() { return Family(Kind::BernoulliLogit); }
    static Family poisson() { return Family(Kind::PoissonLog); }

    // "normal" | "logit" | "poisson"
    static Family from_token(std::string_view token);
    std::string token() const;

    Kind kind() const { return kind_; }

    // b(theta)
    double cumulant(double theta) const;
    // b'(theta) = g^{-1}(theta)
    double mean(double theta) const;
    // b''(theta)
    double variance(double theta) const;

    // Whether y is in the support of the response.
    bool in_support(double y) const;

    // One draw with natural parameter theta.
    double sample(double theta, std::mt19937_64& rng) const;

    friend bool operator==(const Family&, const Family&) = default;

private:
    Kind kind_;
};

}  // namespace kinkfit
