#include "kinkfit/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kinkfit/errors.hpp"

namespace kinkfit {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Splits one CSV record; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".";
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

double require_double(const KeyValues& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    auto v = to_double(it->second);
    if (!v) throw ConfigError("key '" + key + "' expects a number, got '" + it->second + "'");
    return *v;
}

long long require_integer(const KeyValues& kv, const std::string& key, long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

std::string opt_fmt(const std::optional<double>& v, int prec = 4) { return v ? fmt(*v, prec) : "-"; }

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

Ingested ingest_csv(const std::string& path, const ColumnMap& columns, const Family& family) {
    return ingest_csv_text(read_file(path), columns, family);
}

Ingested ingest_csv_text(const std::string& text, const ColumnMap& columns, const Family& family) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV input is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    auto column_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("required column '" + name + "' is not in the CSV header");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t yc = column_index(columns.y);
    const std::size_t xc = column_index(columns.x);
    std::vector<std::size_t> zc;
    for (const auto& z : columns.z) zc.push_back(column_index(z));

    std::vector<double> xs, ys, zs;
    Ingested out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " fields, header has " + std::to_string(header.size()));
        }
        std::vector<std::size_t> wanted{yc, xc};
        wanted.insert(wanted.end(), zc.begin(), zc.end());
        bool missing = false;
        std::vector<double> vals;
        for (auto c : wanted) {
            if (is_missing(cells[c])) {
                missing = true;
                break;
            }
            auto v = to_double(cells[c]);
            if (!v) {
                throw DataError("non-numeric value '" + cells[c] + "' at line " + std::to_string(line_no) +
                                ", column '" + header[c] + "'");
            }
            vals.push_back(*v);
        }
        if (missing) {
            ++out.rejected_rows;
            continue;
        }
        if (!family.in_support(vals[0])) {
            throw DataError("response " + cells[yc] + " at line " + std::to_string(line_no) +
                            " is outside the support of the " + family.token() + " family");
        }
        ys.push_back(vals[0]);
        xs.push_back(vals[1]);
        zs.insert(zs.end(), vals.begin() + 2, vals.end());
    }

    const auto n = static_cast<Eigen::Index>(xs.size());
    const auto k = static_cast<Eigen::Index>(zc.size());
    out.data.x = Eigen::Map<Eigen::VectorXd>(xs.data(), n);
    out.data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    out.data.z = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(zs.data(), n, k);
    return out;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (kv.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_key_values(os.str());
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : parse_string_list(text)) {
        auto v = to_double(item);
        if (!v) throw ConfigError("cannot parse '" + item + "' as a number");
        out.push_back(*v);
    }
    return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

SimScenario scenario_from_key_values(const KeyValues& kv) {
    static const std::set<std::string> known = {
        "schema_version", "name", "family", "kernel", "bandwidth", "form", "beta0", "beta1", "beta2", "tau", "n",
        "replications", "x_lo", "x_hi", "bootstrap", "level", "seed", "tol", "max_iter", "tau_grid"};
    for (const auto& [k, v] : kv) {
        if (!known.count(k)) throw ConfigError("unknown scenario key '" + k + "'");
    }
    if (require_integer(kv, "schema_version", kSchemaVersion) != kSchemaVersion) {
        throw ConfigError("unsupported scenario schema_version");
    }
    SimScenario s;
    auto str = [&](const char* key, std::string& dst) {
        if (auto it = kv.find(key); it != kv.end()) dst = it->second;
    };
    str("name", s.name);
    str("family", s.family);
    str("kernel", s.kernel);
    str("bandwidth", s.bandwidth);
    str("form", s.form);
    s.truth.beta0 = require_double(kv, "beta0", s.truth.beta0);
    s.truth.beta1 = require_double(kv, "beta1", s.truth.beta1);
    s.truth.beta2 = require_double(kv, "beta2", s.truth.beta2);
    s.truth.tau = require_double(kv, "tau", s.truth.tau);
    s.n = static_cast<int>(require_integer(kv, "n", s.n));
    s.replications = static_cast<int>(require_integer(kv, "replications", s.replications));
    s.x_lo = require_double(kv, "x_lo", s.x_lo);
    s.x_hi = require_double(kv, "x_hi", s.x_hi);
    s.bootstrap = static_cast<int>(require_integer(kv, "bootstrap", s.bootstrap));
    s.level = require_double(kv, "level", s.level);
    const long long seed = require_integer(kv, "seed", static_cast<long long>(s.seed));
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    s.seed = static_cast<std::uint64_t>(seed);
    s.fit.tol = require_double(kv, "tol", s.fit.tol);
    s.fit.max_iter = static_cast<int>(require_integer(kv, "max_iter", s.fit.max_iter));
    if (auto it = kv.find("tau_grid"); it != kv.end() && it->second != "auto") s.fit.tau_grid = parse_double_list(it->second);
    s.check();
    return s;
}

SimScenario read_scenario(const std::string& path) { return scenario_from_key_values(read_key_values(path)); }

nlohmann::json to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json to_json(const ParamVector& p) {
    return {{"beta0", p.beta0}, {"beta1", p.beta1}, {"beta2", p.beta2}, {"tau", p.tau}, {"gamma", vector_json(p.gamma)}};
}

nlohmann::json to_json(const FitResult& fit) {
    return {{"params", to_json(fit.params)},
            {"objective_value", fit.objective_value},
            {"iterations", fit.iterations},
            {"converged", fit.converged},
            {"grad_norm", fit.grad_norm},
            {"h_used", fit.h_used},
            {"neg_hessian_at_opt", to_json(fit.neg_hessian_at_opt)},
            {"score_cov_at_opt", to_json(fit.score_cov_at_opt)},
            {"objective_trace", fit.objective_trace}};
}

nlohmann::json to_json(const InferenceResult& inf, const ParamVector& names) {
    nlohmann::json params = nlohmann::json::array();
    for (Eigen::Index i = 0; i < inf.se_sandwich.size(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        nlohmann::json p = {{"name", names.name(i)},
                            {"se_sandwich", inf.se_sandwich(i)},
                            {"ci_normal", {inf.ci_normal[idx].lo, inf.ci_normal[idx].hi}}};
        if (inf.se_observed) p["se_observed_hessian"] = (*inf.se_observed)(i);
        if (inf.se_delta) p["se_delta"] = (*inf.se_delta)(i);
        if (inf.ci_bootstrap) p["ci_bootstrap"] = {(*inf.ci_bootstrap)[idx].lo, (*inf.ci_bootstrap)[idx].hi};
        params.push_back(p);
    }
    nlohmann::json j = {{"parameters", params}, {"cov_sandwich", to_json(inf.cov_sandwich)}};
    if (inf.ci_bootstrap) {
        j["bootstrap_reps_used"] = inf.bootstrap_reps_used;
        j["bootstrap_failures"] = inf.bootstrap_failures;
    }
    return j;
}

nlohmann::json to_json(const SimReport& report) {
    const SimScenario& s = report.scenario;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"parameter", r.name},
                        {"true", r.truth},
                        {"mean", r.mean},
                        {"median", r.median},
                        {"sd", opt_json(r.sd)},
                        {"avg_se_prop1", r.avg_se_prop1},
                        {"avg_se_delta", opt_json(r.avg_se_delta)},
                        {"coverage_normal_pct", r.coverage_normal_pct},
                        {"coverage_bootstrap_pct", opt_json(r.coverage_bootstrap_pct)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "simulation"},
            {"scenario",
             {{"name", s.name},
              {"family", s.family},
              {"kernel", s.kernel},
              {"bandwidth", s.bandwidth},
              {"form", s.form},
              {"truth", to_json(s.truth)},
              {"n", s.n},
              {"replications", s.replications},
              {"x_lo", s.x_lo},
              {"x_hi", s.x_hi},
              {"bootstrap", s.bootstrap},
              {"level", s.level},
              {"seed", s.seed}}},
            {"rows", rows},
            {"n_converged", report.n_converged},
            {"n_failed_fits", report.n_failed_fits},
            {"degraded", report.degraded}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j.at(static_cast<std::size_t>(r)).size()) != cols) {
            throw DataError("ragged matrix in JSON");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

ParamVector params_from_json(const nlohmann::json& j) {
    ParamVector p;
    p.beta0 = j.at("beta0").get<double>();
    p.beta1 = j.at("beta1").get<double>();
    p.beta2 = j.at("beta2").get<double>();
    p.tau = j.at("tau").get<double>();
    const auto g = j.at("gamma").get<std::vector<double>>();
    p.gamma = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    return p;
}

FitResult fit_from_json(const nlohmann::json& j) {
    FitResult f;
    f.params = params_from_json(j.at("params"));
    f.objective_value = j.at("objective_value").get<double>();
    f.iterations = j.at("iterations").get<int>();
    f.converged = j.at("converged").get<bool>();
    f.grad_norm = j.at("grad_norm").get<double>();
    f.h_used = j.at("h_used").get<double>();
    f.neg_hessian_at_opt = matrix_from_json(j.at("neg_hessian_at_opt"));
    f.score_cov_at_opt = matrix_from_json(j.at("score_cov_at_opt"));
    f.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    return f;
}

std::string fit_csv(const FitResult& fit, const InferenceResult& inf) {
    std::ostringstream os;
    os.precision(17);
    os << "parameter,estimate,se_sandwich,se_delta,ci_lo,ci_hi,boot_lo,boot_hi\n";
    const Eigen::VectorXd est = fit.params.flat();
    for (Eigen::Index i = 0; i < est.size(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        os << fit.params.name(i) << ',' << est(i) << ',' << inf.se_sandwich(i) << ',';
        if (inf.se_delta) os << (*inf.se_delta)(i);
        os << ',' << inf.ci_normal[idx].lo << ',' << inf.ci_normal[idx].hi << ',';
        if (inf.ci_bootstrap) os << (*inf.ci_bootstrap)[idx].lo << ',' << (*inf.ci_bootstrap)[idx].hi;
        else os << ',';
        os << '\n';
    }
    return os.str();
}

std::string fit_table(const FitResult& fit, const InferenceResult& inf) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-8s %12s %10s %10s %24s %24s\n", "param", "estimate", "se", "se_delta",
                  "normal CI", "bootstrap CI");
    os << buf;
    const Eigen::VectorXd est = fit.params.flat();
    for (Eigen::Index i = 0; i < est.size(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::string ci = "(" + fmt(inf.ci_normal[idx].lo) + ", " + fmt(inf.ci_normal[idx].hi) + ")";
        const std::string boot =
            inf.ci_bootstrap ? "(" + fmt((*inf.ci_bootstrap)[idx].lo) + ", " + fmt((*inf.ci_bootstrap)[idx].hi) + ")" : "-";
        std::snprintf(buf, sizeof(buf), "%-8s %12.6f %10.5f %10s %24s %24s\n", fit.params.name(i).c_str(), est(i),
                      inf.se_sandwich(i), inf.se_delta ? fmt((*inf.se_delta)(i), 5).c_str() : "-", ci.c_str(),
                      boot.c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "converged=%s iterations=%d grad_norm=%.3g h=%.3g Q=%.6f\n",
                  fit.converged ? "yes" : "no", fit.iterations, fit.grad_norm, fit.h_used, fit.objective_value);
    os << buf;
    return os.str();
}

std::string report_csv(const SimReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "parameter,true,mean,median,sd,avg_se_prop1,avg_se_delta,coverage_normal_pct,coverage_bootstrap_pct\n";
    auto opt = [&](const std::optional<double>& v) {
        if (v) os << *v;
    };
    for (const auto& r : report.rows) {
        os << r.name << ',' << r.truth << ',' << r.mean << ',' << r.median << ',';
        opt(r.sd);
        os << ',' << r.avg_se_prop1 << ',';
        opt(r.avg_se_delta);
        os << ',' << r.coverage_normal_pct << ',';
        opt(r.coverage_bootstrap_pct);
        os << '\n';
    }
    return os.str();
}

std::string report_table(const SimReport& report) {
    std::ostringstream os;
    const auto& s = report.scenario;
    os << s.name << ": " << s.family << " family, n=" << s.n << ", " << s.replications << " replications, h=" << s.bandwidth
       << ", kernel=" << s.kernel << "\n";
    char buf[128];
    auto line = [&](const char* label, auto&& cell) {
        std::snprintf(buf, sizeof(buf), "%-32s", label);
        os << buf;
        for (const auto& r : report.rows) {
            std::snprintf(buf, sizeof(buf), "%10s", cell(r).c_str());
            os << buf;
        }
        os << '\n';
    };
    line("Parameters", [](const ParameterRow& r) { return r.name; });
    line("True value", [](const ParameterRow& r) { return fmt(r.truth, 3); });
    line("Mean", [](const ParameterRow& r) { return fmt(r.mean, 3); });
    line("Median", [](const ParameterRow& r) { return fmt(r.median, 3); });
    line("S.D.", [](const ParameterRow& r) { return opt_fmt(r.sd, 3); });
    line("Average s.e. (sandwich)", [](const ParameterRow& r) { return fmt(r.avg_se_prop1, 3); });
    line("Average s.e. (delta method)", [](const ParameterRow& r) { return opt_fmt(r.avg_se_delta, 3); });
    line("Coverage of normal CI (%)", [](const ParameterRow& r) { return fmt(r.coverage_normal_pct, 1); });
    line("Coverage of bootstrap CI (%)", [](const ParameterRow& r) { return opt_fmt(r.coverage_bootstrap_pct, 1); });
    os << "converged " << report.n_converged << ", failed " << report.n_failed_fits
       << (report.degraded ? " (DEGRADED: more than 5% failed)" : "") << "\n";
    return os.str();
}

}  // namespace kinkfit
