#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinkfit/errors.hpp"
#include "kinkfit/io.hpp"

using namespace kinkfit;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kData = 3, kFit = 4, kInference = 5, kKernelRejected = 6 };

int exit_code_for(const std::string& cls) {
    static const std::map<std::string, int> codes = {
        {"config", kUsage},           {"data", kData},
        {"domain", kData},            {"initialization", kFit},
        {"identifiability", kFit},    {"optimization", kFit},
        {"boundary", kFit},           {"degenerate_design", kFit},
        {"numeric", kFit},            {"nonconvergence", kFit},
        {"inference", kInference},    {"bootstrap", kInference},
        {"validation", kKernelRejected}};
    auto it = codes.find(cls);
    return it == codes.end() ? kOther : it->second;
}

int report_error(const std::string& cls, const std::string& message) {
    const json j = {{"schema_version", kSchemaVersion},
                    {"error", {{"class", cls}, {"message", message}, {"exit_code", exit_code_for(cls)}}}};
    std::cerr << j.dump() << '\n';
    return exit_code_for(cls);
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw ExportError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ExportError("failed writing '" + path + "'");
}

// Settings start from the config file; every flag given on the command line
// replaces the file's value for the same key.
struct Layered {
    KeyValues values;
    std::map<std::string, CLI::Option*> flags;
    std::map<std::string, std::string> bound;

    void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        flags[key] = app.add_option(flag, bound[key], help);
    }
    void resolve(const std::string& config_path) {
        if (!config_path.empty()) values = read_key_values(config_path);
        for (auto& [key, opt] : flags) {
            if (opt->count() > 0) values[key] = bound[key];
        }
    }
    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
    std::string take(const std::string& key, const std::string& fallback) {
        std::string v = get(key, fallback);
        values.erase(key);
        return v;
    }
};

double to_number(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
}

long long to_integer(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
}

std::string check_format(const std::string& f) {
    if (f != "json" && f != "csv" && f != "table") throw ConfigError("format must be json, csv or table");
    return f;
}

int run_fit(Layered& s, const std::string& config_path) {
    s.resolve(config_path);
    static const std::set<std::string> known = {"schema_version", "input", "y", "x", "z", "family", "kernel",
                                                "bandwidth", "form", "tau_grid", "bootstrap", "seed", "level",
                                                "hessian", "tol", "max_iter", "out", "format"};
    for (const auto& [k, v] : s.values) {
        if (!known.count(k)) throw ConfigError("unknown fit setting '" + k + "'");
    }
    if (to_integer("schema_version", s.get("schema_version", "1")) != kSchemaVersion) {
        throw ConfigError("unsupported config schema_version");
    }
    const std::string input = s.get("input", "");
    if (input.empty()) throw ConfigError("fit needs an input CSV (--input or 'input' in the config)");

    ModelSpec spec;
    spec.family = Family::from_token(s.get("family", "normal"));
    spec.kernel = Kernel::from_token(s.get("kernel", "normal-cdf"));
    spec.bw = BandwidthRule::from_token(s.get("bandwidth", "n^-2"));
    spec.form = segment_form_from_token(s.get("form", "linear-linear"));

    ColumnMap columns;
    columns.y = s.get("y", "y");
    columns.x = s.get("x", "x");
    columns.z = parse_string_list(s.get("z", ""));
    spec.n_covariates = columns.z.size();

    FitConfig fc;
    const std::string grid = s.get("tau_grid", "auto");
    if (grid != "auto") fc.tau_grid = parse_double_list(grid);
    fc.tol = to_number("tol", s.get("tol", "1e-5"));
    fc.max_iter = static_cast<int>(to_integer("max_iter", s.get("max_iter", "100")));
    fc.check();

    InferenceOptions io;
    io.level = to_number("level", s.get("level", "0.95"));
    if (!(io.level > 0.0 && io.level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    io.bootstrap = static_cast<int>(to_integer("bootstrap", s.get("bootstrap", "0")));
    if (io.bootstrap != 0 && io.bootstrap < 200) throw ConfigError("bootstrap needs B = 0 or B >= 200");
    const long long seed = to_integer("seed", s.get("seed", "1"));
    if (seed < 0) throw ConfigError("seed must be nonnegative");
    io.seed = static_cast<std::uint64_t>(seed);
    const std::string hessian = s.get("hessian", "expected");
    if (hessian == "expected") io.hessian = HessianMode::Expected;
    else if (hessian == "observed") io.hessian = HessianMode::Observed;
    else throw ConfigError("hessian must be expected or observed");
    io.threads = worker_count();
    io.fit = fc;
    const std::string format = check_format(s.get("format", "json"));

    const Ingested ing = ingest_csv(input, columns, spec.family);
    validate(spec, ing.data);
    const FitResult fitted = fit(spec, ing.data, fc);

    json out = {{"schema_version", kSchemaVersion},
                {"kind", "fit"},
                {"config", s.values},
                {"n", ing.data.size()},
                {"rejected_rows", ing.rejected_rows},
                {"fit", to_json(fitted)}};
    if (!fitted.converged) {
        if (format == "json") emit(out.dump(2) + "\n", s.get("out", ""));
        return report_error("nonconvergence", "Newton ascent did not meet the convergence criteria in " +
                                                  std::to_string(fitted.iterations) + " iterations");
    }
    const InferenceResult inf = infer(spec, ing.data, fitted, io);
    out["inference"] = to_json(inf, fitted.params);

    std::string text;
    if (format == "json") text = out.dump(2) + "\n";
    else if (format == "csv") text = fit_csv(fitted, inf);
    else text = fit_table(fitted, inf);
    emit(text, s.get("out", ""));
    return kOk;
}

int run_simulate(Layered& s, const std::string& scenario_path) {
    s.resolve(scenario_path);
    const std::string out_prefix = s.take("out", "");
    const std::string format = check_format(s.take("format", "table"));
    const SimScenario scenario = scenario_from_key_values(s.values);
    const SimReport report = run(scenario, worker_count());

    const std::string table = report_table(report);
    const std::string csv = report_csv(report);
    json j = to_json(report);
    std::string qq;
    try {
        qq = qq_csv(qq_export(report));
    } catch (const ExportError& e) {
        std::cerr << "note: no Q-Q data written: " << e.what() << '\n';
    }
    const std::string prefix = out_prefix.empty() ? scenario.name : out_prefix;
    emit(table, prefix + ".txt");
    emit(csv, prefix + ".csv");
    emit(j.dump(2) + "\n", prefix + ".json");
    if (!qq.empty()) emit(qq, prefix + "_qq.csv");

    if (format == "json") std::cout << j.dump(2) << '\n';
    else if (format == "csv") std::cout << csv;
    else std::cout << table;
    if (report.degraded) std::cerr << "warning: more than 5% of fits failed\n";
    return report.n_converged > 0 ? kOk : report_error("nonconvergence", "no replicate converged");
}

int run_validate_kernel(const std::string& token, const std::string& format) {
    const Kernel kernel = Kernel::from_token(token);
    const KernelReport r = validate(kernel);
    json j = {{"schema_version", kSchemaVersion},
              {"kind", "kernel_validation"},
              {"kernel", kernel.token()},
              {"limits", r.limits()},
              {"condition_a", r.condition_a()},
              {"condition_b", r.condition_b()},
              {"d1_sup", r.d1_sup},
              {"d2_sup", r.d2_sup},
              {"d1_tail_value", r.d1_tail_value},
              {"d2_tail_value", r.d2_tail_value},
              {"passed", r.passed()}};
    if (r.passed()) j["order"] = kernel_order(kernel);
    if (format == "json") {
        std::cout << j.dump(2) << '\n';
    } else {
        std::printf("kernel       %s\nlimits       %s\ncondition a  %s\ncondition b  %s\n", kernel.token().c_str(),
                    r.limits() ? "ok" : "FAIL", r.condition_a() ? "ok" : "FAIL", r.condition_b() ? "ok" : "FAIL");
        if (r.passed()) std::printf("order        %d\n", j["order"].get<int>());
    }
    return r.passed() ? kOk : report_error("validation", "kernel " + kernel.token() + " fails the tail conditions");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinkfit: change-point estimation in broken-line GLMs"};
    app.require_subcommand(1);

    Layered fit_settings;
    std::string fit_config;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a broken-line GLM to a CSV file");
    fit_cmd->add_option("--config", fit_config, "key = value settings file; flags override it");
    fit_settings.add(*fit_cmd, "input,--input", "input", "CSV file with a header row");
    fit_settings.add(*fit_cmd, "--y", "y", "response column (default y)");
    fit_settings.add(*fit_cmd, "--x", "x", "change-point covariate column (default x)");
    fit_settings.add(*fit_cmd, "--z", "z", "comma-separated covariate columns");
    fit_settings.add(*fit_cmd, "--family", "family", "normal | logit | poisson");
    fit_settings.add(*fit_cmd, "--kernel", "kernel", "normal-cdf | exp-cdf");
    fit_settings.add(*fit_cmd, "--bandwidth", "bandwidth", "n^<exponent> | fixed:<h>");
    fit_settings.add(*fit_cmd, "--form", "form", "linear-linear | linear-quadratic | quadratic-linear");
    fit_settings.add(*fit_cmd, "--tau-grid", "tau_grid", "comma-separated candidate change points or auto");
    fit_settings.add(*fit_cmd, "--bootstrap", "bootstrap", "stratified bootstrap replicates B (0 = off)");
    fit_settings.add(*fit_cmd, "--seed", "seed", "master seed");
    fit_settings.add(*fit_cmd, "--level", "level", "confidence level");
    fit_settings.add(*fit_cmd, "--hessian", "hessian", "expected | observed");
    fit_settings.add(*fit_cmd, "--tol", "tol", "convergence tolerance");
    fit_settings.add(*fit_cmd, "--max-iter", "max_iter", "Newton iteration cap");
    fit_settings.add(*fit_cmd, "--out", "out", "output path (default stdout)");
    fit_settings.add(*fit_cmd, "--format", "format", "json | csv | table");

    Layered sim_settings;
    std::string scenario_path;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo scenario");
    sim_cmd->add_option("scenario,--scenario", scenario_path, "scenario file")->required();
    sim_settings.add(*sim_cmd, "--family", "family", "override the scenario family");
    sim_settings.add(*sim_cmd, "--kernel", "kernel", "override the kernel");
    sim_settings.add(*sim_cmd, "--bandwidth", "bandwidth", "override the bandwidth rule");
    sim_settings.add(*sim_cmd, "--form", "form", "override the segment form");
    sim_settings.add(*sim_cmd, "--tau-grid", "tau_grid", "override the profile grid");
    sim_settings.add(*sim_cmd, "--bootstrap", "bootstrap", "bootstrap replicates per sample");
    sim_settings.add(*sim_cmd, "--seed", "seed", "master seed");
    sim_settings.add(*sim_cmd, "--level", "level", "confidence level");
    sim_settings.add(*sim_cmd, "--replications", "replications", "number of simulated samples");
    sim_settings.add(*sim_cmd, "--n", "n", "sample size");
    sim_settings.add(*sim_cmd, "--out", "out", "prefix for .txt/.csv/.json/_qq.csv (default: scenario name)");
    sim_settings.add(*sim_cmd, "--format", "format", "what to print: table | csv | json");

    std::string kernel_token = "normal-cdf", kernel_format = "table";
    CLI::App* kern_cmd = app.add_subcommand("validate-kernel", "Check a smoothing kernel's tail conditions and order");
    kern_cmd->add_option("--kernel", kernel_token, "normal-cdf | exp-cdf");
    kern_cmd->add_option("--format", kernel_format, "json | table")->check(CLI::IsMember({"json", "table"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return report_error("config", e.what());
    }

    try {
        if (*fit_cmd) return run_fit(fit_settings, fit_config);
        if (*sim_cmd) return run_simulate(sim_settings, scenario_path);
        return run_validate_kernel(kernel_token, kernel_format);
    } catch (const Error& e) {
        return report_error(e.error_class(), e.what());
    } catch (const std::exception& e) {
        return report_error("internal", e.what());
    }
}
