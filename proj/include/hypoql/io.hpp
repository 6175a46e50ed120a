#pragma once

#include "hypoql/estimate.hpp"
#include "hypoql/montecarlo.hpp"
#include "hypoql/simulate.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace hypoql {

/// CSV with header "t,x1..,y1..", one row per observation, 17 significant
/// digits so doubles round-trip losslessly.
void write_observations_csv(const ObservationGrid& grid, const std::string& path);

/// Parses the simulator CSV format.  The time column must be strictly
/// increasing and equidistant to relative tolerance 1e-9; h is inferred from
/// the spacing.  Throws FormatError / NonEquidistantError.
ObservationGrid load_observations(const std::string& path, const Dimensions& dims);

nlohmann::json report_to_json(const EstimateReport& rep);
nlohmann::json information_to_json(const InformationMatrices& gamma);
nlohmann::json summary_to_json(const McResult& result);

void write_json(const nlohmann::json& doc, const std::string& path);

void write_mc_raw_csv(const McResult& result, const std::string& path);
void write_mc_qq_csv(const McResult& result, const std::string& path);
void write_ident_csv(const std::vector<IdentCurve>& curves, const std::string& path);
void write_contrast_trace_csv(const std::vector<std::pair<long, double>>& trace,
                              const std::string& path);

/// %.17g formatting used by every CSV writer
std::string format_double(double v);

}  // namespace hypoql
