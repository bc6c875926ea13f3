#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "tlpo/aipw.hpp"
#include "tlpo/mc.hpp"

namespace tlpo {

enum class Format { Text, Csv, Json };

Format parse_format(std::string_view name);

/// Table 2 row order; also the csv/json column order.
inline constexpr std::string_view kMetricLabels[] = {
    "MC mean", "MC median", "MC SD", "Ave MC SE", "MC Cov", "MC MSE ratio", "MC pr(reject H0)"};

nlohmann::ordered_json to_json(const McSummary& s);
McSummary summary_from_json(const nlohmann::ordered_json& j);

/// Text: metrics as rows, estimators as columns, 3 decimals. Csv/json: full precision.
std::string render(const McSummary& s, Format f);

nlohmann::ordered_json to_json(const EstimateResult& r);
std::string render(const EstimateResult& r, Format f);

}  // namespace tlpo
