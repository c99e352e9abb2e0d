#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "kinkfit/errors.hpp"
#include "kinkfit/model.hpp"
#include "support.hpp"

using namespace kinkfit;
using namespace kinkfit::testing;

namespace {

const SegmentForm kForms[] = {SegmentForm::LinearLinear, SegmentForm::LinearQuadratic, SegmentForm::QuadraticLinear};

ParamVector truth_for(const Family& f, Eigen::Index k) {
    ParamVector p{0.3, 0.8, -1.2, 0.4, Eigen::VectorXd::LinSpaced(k, 0.2, -0.3)};
    if (f.kind() == Family::Kind::NormalIdentity) p = ParamVector{2.0, 3.0, -5.0, 0.5, p.gamma};
    return p;
}

}  // namespace

TEST_CASE("segment terms: finite-difference tau derivatives and the hard limit") {
    const Kernel k = Kernel::normal_cdf();
    for (SegmentForm form : kForms) {
        for (double x : {-1.0, 0.37, 0.41, 0.5, 1.3}) {
            const double tau = 0.4, h = 0.05, e = 1e-6;
            const auto s = segment_term(form, x, tau, h, k);
            const auto sp = segment_term(form, x, tau + e, h, k);
            const auto sm = segment_term(form, x, tau - e, h, k);
            CHECK((sp.value - sm.value) / (2 * e) == doctest::Approx(s.d_tau).epsilon(1e-6));
            CHECK((sp.d_tau - sm.d_tau) / (2 * e) == doctest::Approx(s.d_tau2).epsilon(1e-5));
            CHECK(segment_term(form, x, tau, 1e-12, k).value == doctest::Approx(hard_segment(form, x, tau)));
        }
    }
    CHECK(hard_segment(SegmentForm::LinearLinear, 2.0, 0.5) == 1.5);
    CHECK(hard_segment(SegmentForm::LinearLinear, 0.0, 0.5) == 0.0);
    CHECK(hard_segment(SegmentForm::LinearQuadratic, 2.0, 0.5) == 2.25);
    CHECK(hard_segment(SegmentForm::QuadraticLinear, 0.0, 0.5) == 0.25);
    CHECK(hard_segment(SegmentForm::QuadraticLinear, 2.0, 0.5) == 0.0);
}

TEST_CASE("score and negative Hessian match finite differences for every family and form") {
    for (const Family f : {Family::normal(), Family::logit(), Family::poisson()}) {
        for (SegmentForm form : kForms) {
            for (Eigen::Index k : {0, 2}) {
                CAPTURE(f.token());
                CAPTURE(to_token(form));
                CAPTURE(k);
                const ModelSpec spec = make_spec(f, form, static_cast<std::size_t>(k));
                const ParamVector truth = truth_for(f, k);
                const Dataset d = broken_line(f, truth, 300, 11 + static_cast<std::uint64_t>(k), -2.0, 2.0, false, form);
                ParamVector at = truth;
                at.beta1 += 0.05;
                at.tau += 0.03;
                const double h = 0.1;
                CHECK(rel_err(score(spec, at, d, h), fd_score(spec, at, d, h)) < 1e-5);
                CHECK(rel_err(neg_hessian(spec, at, d, h), fd_neg_hessian(spec, at, d, h)) < 1e-4);
            }
        }
    }
}

TEST_CASE("J and Sigma are symmetric and Sigma is positive semidefinite") {
    const ModelSpec spec = make_spec(Family::logit(), SegmentForm::LinearLinear, 1);
    const ParamVector p{0.1, 1.0, -2.0, 0.3, Eigen::VectorXd::Constant(1, 0.5)};
    const Dataset d = broken_line(spec.family, p, 200, 5);
    const Evaluation ev = evaluate(spec, p, d, 0.05);
    CHECK((ev.neg_hessian - ev.neg_hessian.transpose()).norm() == 0.0);
    CHECK((ev.score_cov - ev.score_cov.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ev.score_cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
    CHECK(ev.objective == doctest::Approx(objective(spec, p, d, 0.05)));
    CHECK(rel_err(ev.score, score(spec, p, d, 0.05)) == 0.0);
    CHECK(rel_err(ev.score_cov, score_covariance(spec, p, d, 0.05)) == 0.0);
}

TEST_CASE("score covariance matches the simulated covariance of the score") {
    // y drawn from the smoothed model itself so the score has mean zero.
    const ModelSpec spec = make_spec(Family::logit());
    const ParamVector p{0.2, 1.0, -1.5, 0.2, Eigen::VectorXd()};
    const double h = 0.2;
    Dataset d = broken_line(spec.family, p, 150, 9);
    const Eigen::VectorXd theta = linear_predictor(spec, p, d, h);
    std::mt19937_64 rng(99);
    const int reps = 20000;
    Eigen::MatrixXd draws(reps, 4);
    for (int r = 0; r < reps; ++r) {
        for (Eigen::Index i = 0; i < d.size(); ++i) d.y(i) = spec.family.sample(theta(i), rng);
        draws.row(r) = score(spec, p, d, h).transpose();
    }
    const Eigen::RowVectorXd mean = draws.colwise().mean();
    const Eigen::MatrixXd centered = draws.rowwise() - mean;
    const Eigen::MatrixXd emp = centered.transpose() * centered / (reps - 1);
    const Eigen::MatrixXd sigma = score_covariance(spec, p, d, h);
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(std::abs(mean(i)) < 5.0 * std::sqrt(sigma(i, i) / reps));
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK(std::abs(emp(i, j) - sigma(i, j)) < 0.05 * std::sqrt(sigma(i, i) * sigma(j, j)));
        }
    }
}

TEST_CASE("smoothed objective approaches the log-likelihood as h shrinks") {
    for (const Family f : {Family::normal(), Family::logit(), Family::poisson()}) {
        const ModelSpec spec = make_spec(f);
        const ParamVector p = truth_for(f, 0);
        const Dataset d = broken_line(f, p, 500, 21);
        double prev = 1e300;
        for (double h : {1e-1, 1e-2, 1e-3, 1e-5}) {
            const double dev = (linear_predictor(spec, p, d, h).array() -
                                (p.beta0 + p.beta1 * d.x.array() + p.beta2 * (d.x.array() - p.tau).max(0.0)))
                                   .abs()
                                   .maxCoeff();
            CHECK(dev < prev);
            prev = dev;
        }
        CHECK(prev < 1e-5);
        prev = std::abs(objective(spec, p, d, 1e-5) - hard_objective(spec, p, d)) / 500.0;
        CHECK(prev < 1e-6);
        const double tiny = std::abs(objective(spec, p, d, 4e-10) - hard_objective(spec, p, d)) / 500.0;
        CHECK(tiny < 1e-8);
    }
}

TEST_CASE("objective is invariant to row order and equivariant to shifting x") {
    const ModelSpec spec = make_spec(Family::poisson(), SegmentForm::LinearLinear, 1);
    const ParamVector p{0.1, 0.5, -0.8, 0.3, Eigen::VectorXd::Constant(1, 0.2)};
    const Dataset d = broken_line(spec.family, p, 400, 3);
    std::vector<Eigen::Index> rows(400);
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), std::mt19937_64(4));
    const Dataset shuffled = d.subset(rows);
    CHECK(objective(spec, p, shuffled, 0.01) == doctest::Approx(objective(spec, p, d, 0.01)).epsilon(1e-14));
    CHECK(rel_err(score(spec, p, shuffled, 0.01), score(spec, p, d, 0.01)) < 1e-13);

    Dataset moved = d;
    moved.x.array() += 10.0;
    ParamVector q = p;
    q.tau += 10.0;
    q.beta0 -= 10.0 * q.beta1;
    CHECK(objective(spec, q, moved, 0.01) == doctest::Approx(objective(spec, p, d, 0.01)).epsilon(1e-10));
}

TEST_CASE("dataset validation") {
    const ModelSpec spec = make_spec(Family::logit());
    Dataset d;
    d.x = Eigen::VectorXd::LinSpaced(3, 0, 1);
    d.y = Eigen::VectorXd::Zero(3);
    d.z.resize(3, 0);
    CHECK_THROWS_AS(validate(spec, d), DataError);
    d.x = Eigen::VectorXd::LinSpaced(8, 0, 1);
    d.y = Eigen::VectorXd::Zero(8);
    d.z.resize(8, 0);
    CHECK_NOTHROW(validate(spec, d));
    d.y(5) = 2.0;
    CHECK_THROWS_AS(validate(spec, d), DataError);
    d.y(5) = 1.0;
    d.x(2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate(spec, d), DataError);
}

TEST_CASE("non-finite contributions name the observation") {
    const ModelSpec spec = make_spec(Family::poisson());
    const ParamVector p{0.0, 1000.0, 0.0, 0.0, Eigen::VectorXd()};
    Dataset d;
    d.x = Eigen::VectorXd::LinSpaced(6, 0, 1);
    d.y = Eigen::VectorXd::Ones(6);
    d.z.resize(6, 0);
    try {
        (void)objective(spec, p, d, 0.1);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(e.index() >= 1);
    }
}

TEST_CASE("parameter vector flattening") {
    const ParamVector p{1, 2, 3, 4, Eigen::Vector2d(5, 6)};
    const Eigen::VectorXd v = p.flat();
    CHECK(v.size() == 6);
    CHECK(v(3) == 4);
    const ParamVector q = ParamVector::from_flat(v);
    CHECK(q.gamma(1) == 6);
    CHECK(p.name(3) == "tau");
    CHECK(p.name(4) == "gamma1");
    CHECK_THROWS_AS(segment_form_from_token("broken"), ConfigError);
}
