#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinkfit/inference.hpp"
#include "kinkfit/simharness.hpp"

namespace kinkfit {

inline constexpr int kSchemaVersion = 1;

// Column roles for CSV ingestion.
struct ColumnMap {
    std::string y = "y";
    std::string x = "x";
    std::vector<std::string> z;
};

struct Ingested {
    Dataset data;
    std::size_t rejected_rows = 0;  // rows with a missing mapped value
};

// Reads a headered CSV. Empty cells and NA/NaN count as missing and drop
// the row; any other non-numeric cell is a DataError naming line and
// column, as is a response outside the family's support.
Ingested ingest_csv(const std::string& path, const ColumnMap& columns, const Family& family);
Ingested ingest_csv_text(const std::string& text, const ColumnMap& columns, const Family& family);

// Flat "key = value" text with '#' comments.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::string& path);

std::vector<double> parse_double_list(const std::string& text);
std::vector<std::string> parse_string_list(const std::string& text);

// Scenario keys: schema_version name family kernel bandwidth form beta0 beta1
// beta2 tau n replications x_lo x_hi bootstrap level seed tol max_iter tau_grid
SimScenario scenario_from_key_values(const KeyValues& kv);
SimScenario read_scenario(const std::string& path);

nlohmann::json to_json(const Eigen::MatrixXd& m);
nlohmann::json to_json(const ParamVector& p);
nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const InferenceResult& inf, const ParamVector& names);
nlohmann::json to_json(const SimReport& report);

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
ParamVector params_from_json(const nlohmann::json& j);
FitResult fit_from_json(const nlohmann::json& j);

std::string fit_csv(const FitResult& fit, const InferenceResult& inf);
std::string fit_table(const FitResult& fit, const InferenceResult& inf);
std::string report_csv(const SimReport& report);
std::string report_table(const SimReport& report);

}  // namespace kinkfit
