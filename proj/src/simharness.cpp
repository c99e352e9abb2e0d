#include "kinkfit/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "kinkfit/errors.hpp"

namespace kinkfit {

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto m = v.size();
    return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

ReplicateOutcome run_replicate(const SimScenario& scenario, const ModelSpec& spec, std::uint64_t r) {
    ReplicateOutcome out;
    const Dataset data = generate(scenario, r);
    FitResult fitted;
    try {
        fitted = fit(spec, data, scenario.fit);
    } catch (const Error& e) {
        out.failure = e.error_class();
        return out;
    }
    if (!fitted.converged) {
        out.failure = "nonconvergence";
        return out;
    }
    try {
        out.se_prop1 = Eigen::VectorXd(sandwich_cov(fitted).diagonal().cwiseSqrt());
    } catch (const Error& e) {
        out.failure = e.error_class();
        return out;
    }
    out.converged = true;
    out.estimate = fitted.params.flat();
    try {
        out.se_delta = delta_se(linearized_fit(spec, data, fitted.params.tau));
    } catch (const Error&) {
    }
    if (scenario.bootstrap > 0) {
        BootstrapOptions b;
        b.replicates = scenario.bootstrap;
        b.level = scenario.level;
        b.seed = derive_seed(scenario.seed, r, StreamTag::Bootstrap);
        b.threads = 1;
        b.fit = scenario.fit;
        try {
            out.ci_bootstrap = bootstrap_ci(spec, data, fitted, b).ci;
        } catch (const Error&) {
        }
    }
    return out;
}

}  // namespace

ModelSpec SimScenario::spec() const {
    ModelSpec s;
    s.family = Family::from_token(family);
    s.kernel = Kernel::from_token(kernel);
    s.bw = BandwidthRule::from_token(bandwidth);
    s.form = segment_form_from_token(form);
    s.n_covariates = static_cast<std::size_t>(truth.gamma.size());
    return s;
}

void SimScenario::check() const {
    if (replications < 1) throw ConfigError("replications must be at least 1");
    if (n < 5) throw ConfigError("n must be at least 5");
    if (!(x_lo < truth.tau && truth.tau < x_hi)) throw ConfigError("need x_lo < tau < x_hi");
    if (truth.gamma.size() != 0) throw ConfigError("simulation scenarios do not generate covariates");
    if (bootstrap != 0 && bootstrap < 200) throw ConfigError("bootstrap needs B = 0 or B >= 200");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (!truth.all_finite()) throw ConfigError("true parameters must be finite");
    fit.check();
    (void)spec();
}

Dataset generate(const SimScenario& scenario, std::uint64_t index) {
    const ModelSpec spec = scenario.spec();
    auto rng = substream(scenario.seed, index, StreamTag::Data);
    std::uniform_real_distribution<double> xdist(scenario.x_lo, scenario.x_hi);
    Dataset d;
    d.x.resize(scenario.n);
    d.y.resize(scenario.n);
    d.z.resize(scenario.n, 0);
    for (int i = 0; i < scenario.n; ++i) d.x(i) = xdist(rng);
    for (int i = 0; i < scenario.n; ++i) {
        const ParamVector& t = scenario.truth;
        const double theta = t.beta0 + t.beta1 * d.x(i) + t.beta2 * hard_segment(spec.form, d.x(i), t.tau);
        d.y(i) = spec.family.sample(theta, rng);
    }
    return d;
}

SimReport run(const SimScenario& scenario, unsigned threads) {
    scenario.check();
    const ModelSpec spec = scenario.spec();
    SimReport report;
    report.scenario = scenario;
    report.replicates.resize(static_cast<std::size_t>(scenario.replications));
    parallel_for(report.replicates.size(), threads,
                 [&](std::size_t r) { report.replicates[r] = run_replicate(scenario, spec, r); });

    std::vector<const ReplicateOutcome*> ok;
    for (const auto& rep : report.replicates) {
        if (rep.converged) ok.push_back(&rep);
    }
    report.n_converged = static_cast<int>(ok.size());
    report.n_failed_fits = scenario.replications - report.n_converged;
    report.degraded = report.n_failed_fits > 0.05 * scenario.replications;
    if (ok.empty()) return report;

    const Eigen::VectorXd truth = scenario.truth.flat();
    const double z = normal_critical_value(scenario.level);
    for (Eigen::Index j = 0; j < truth.size(); ++j) {
        ParameterRow row;
        row.name = scenario.truth.name(j);
        row.truth = truth(j);
        std::vector<double> est;
        double se_sum = 0.0, covered = 0.0;
        double delta_sum = 0.0, boot_covered = 0.0;
        int delta_count = 0, boot_count = 0;
        for (const auto* rep : ok) {
            const double e = rep->estimate(j);
            est.push_back(e);
            se_sum += rep->se_prop1(j);
            covered += std::abs(e - truth(j)) <= z * rep->se_prop1(j);
            if (rep->se_delta) {
                delta_sum += (*rep->se_delta)(j);
                ++delta_count;
            }
            if (rep->ci_bootstrap) {
                boot_covered += (*rep->ci_bootstrap)[static_cast<std::size_t>(j)].contains(truth(j));
                ++boot_count;
            }
        }
        const double m = static_cast<double>(est.size());
        row.mean = std::accumulate(est.begin(), est.end(), 0.0) / m;
        row.median = median_of(est);
        if (est.size() > 1) {
            double ss = 0.0;
            for (double e : est) ss += (e - row.mean) * (e - row.mean);
            row.sd = std::sqrt(ss / (m - 1.0));
        }
        row.avg_se_prop1 = se_sum / m;
        if (delta_count > 0) row.avg_se_delta = delta_sum / delta_count;
        row.coverage_normal_pct = 100.0 * covered / m;
        if (boot_count > 0) row.coverage_bootstrap_pct = 100.0 * boot_covered / boot_count;
        report.rows.push_back(row);
    }
    return report;
}

std::vector<QQSeries> qq_export(const SimReport& report) {
    if (report.n_converged < 10) throw ExportError("Q-Q export needs at least 10 converged replicates");
    std::vector<QQSeries> out;
    const boost::math::normal_distribution<double> normal;
    for (std::size_t j = 0; j < report.rows.size(); ++j) {
        const ParameterRow& row = report.rows[j];
        if (!row.sd || !(*row.sd > 0.0)) throw ExportError("estimates of " + row.name + " have zero spread");
        QQSeries s;
        s.parameter = row.name;
        for (const auto& rep : report.replicates) {
            if (rep.converged) s.standardized.push_back((rep.estimate(static_cast<Eigen::Index>(j)) - row.mean) / *row.sd);
        }
        std::sort(s.standardized.begin(), s.standardized.end());
        const double m = static_cast<double>(s.standardized.size());
        for (std::size_t i = 0; i < s.standardized.size(); ++i) {
            s.theoretical.push_back(boost::math::quantile(normal, (static_cast<double>(i) + 0.5) / m));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string qq_csv(const std::vector<QQSeries>& series) {
    std::ostringstream os;
    os.precision(17);
    os << "parameter,theoretical,standardized\n";
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.theoretical.size(); ++i) {
            os << s.parameter << ',' << s.theoretical[i] << ',' << s.standardized[i] << '\n';
        }
    }
    return os.str();
}

}  // namespace kinkfit
