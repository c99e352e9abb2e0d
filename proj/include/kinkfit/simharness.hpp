#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkfit/inference.hpp"
#include "kinkfit/parallel.hpp"

namespace kinkfit {

struct SimScenario {
    std::string name = "scenario";
    std::string family = "normal";
    std::string kernel = "normal-cdf";
    std::string bandwidth = "n^-2";
    std::string form = "linear-linear";
    ParamVector truth{2.0, 3.0, -5.0, 0.5, Eigen::VectorXd()};
    int n = 500;
    int replications = 1000;
    double x_lo = -2.0;  // x ~ Uniform(x_lo, x_hi)
    double x_hi = 2.0;
    int bootstrap = 0;  // B per replicate, 0 for none
    double level = 0.95;
    std::uint64_t seed = 1;
    FitConfig fit;

    ModelSpec spec() const;
    void check() const;
};

// Draws replicate `index`: x iid uniform, y from the family at the
// unsmoothed predictor. Deterministic in (seed, index).
Dataset generate(const SimScenario& scenario, std::uint64_t index);

struct ReplicateOutcome {
    bool converged = false;
    std::string failure;  // error class when the fit failed
    Eigen::VectorXd estimate;
    Eigen::VectorXd se_prop1;
    std::optional<Eigen::VectorXd> se_delta;
    std::optional<std::vector<Interval>> ci_bootstrap;
};

struct ParameterRow {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double median = 0.0;
    std::optional<double> sd;  // absent with a single converged replicate
    double avg_se_prop1 = 0.0;
    std::optional<double> avg_se_delta;
    double coverage_normal_pct = 0.0;
    std::optional<double> coverage_bootstrap_pct;
};

struct SimReport {
    SimScenario scenario;
    std::vector<ParameterRow> rows;
    std::vector<ReplicateOutcome> replicates;  // in replicate order
    int n_converged = 0;
    int n_failed_fits = 0;
    bool degraded = false;  // more than 5% failed fits
};

// Runs every replicate (generate, fit, inference) on `threads` workers and
// aggregates in replicate order.
SimReport run(const SimScenario& scenario, unsigned threads = worker_count());

struct QQSeries {
    std::string parameter;
    std::vector<double> theoretical;   // normal quantiles at (i - 0.5)/m
    std::vector<double> standardized;  // sorted (estimate - mean)/sd
};

// Throws ExportError with fewer than 10 converged replicates or zero spread.
std::vector<QQSeries> qq_export(const SimReport& report);
std::string qq_csv(const std::vector<QQSeries>& series);

}  // namespace kinkfit
