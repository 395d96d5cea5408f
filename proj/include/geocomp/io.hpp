#pragma once

// File formats: RFC-4180 CSV for datasets, predictions, profiles and
// per-replicate study records; JSON for fitted models and study summaries.
// Numbers are written so that reading them back gives the same double.

#include "geocomp/mle.hpp"
#include "geocomp/predict.hpp"
#include "geocomp/sim_study.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace geocomp::io {

/// "%.17g"; non-finite values are written as nan, inf and -inf.
std::string format_double(double v);
/// Fixed with four decimals, for human-readable tables.
std::string format_fixed4(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws InputError naming the column when it is absent.
  std::size_t column(const std::string& name) const;
};

/// Quoted fields, embedded separators, doubled quotes and CRLF are accepted.
/// Throws InputError on ragged rows, unterminated quotes or an empty file.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Parses a full-string double; throws InputError mentioning `context`.
double parse_double(const std::string& text, const std::string& context);

/// Which columns hold parts and covariates. Columns x and y are always the
/// coordinates. With `parts` empty, every column that is not a coordinate or
/// a listed covariate is a part.
struct DatasetSchema {
  std::vector<std::string> parts;
  std::vector<std::string> covariates;
};

struct DatasetRead {
  GeoDataset data;
  std::vector<std::string> warnings;
};

/// Rows are closed on ingest; rows whose raw sum is off by more than 1e-6 are
/// reported in `warnings`. Nonpositive parts and missing values are InputErrors.
/// The composition denominator is set to the last part.
DatasetRead read_dataset(std::istream& in, const DatasetSchema& schema = {});
DatasetRead read_dataset_file(const std::string& path, const DatasetSchema& schema = {});
void write_dataset(std::ostream& out, const GeoDataset& data);

/// Everything needed to reuse a fit without re-estimation.
struct FitFile {
  FitResult result;
  CorrelationFamily family;
  std::vector<std::string> parts;
  std::size_t denominator = 0;
  std::vector<std::string> covariates;
  FitOptions options;
};

std::string fit_to_json(const FitFile& fit);
/// Validates the document first; throws InputError describing the first problem.
FitFile fit_from_json(const std::string& text);
void save_fit(const std::string& path, const FitFile& fit);
FitFile load_fit(const std::string& path);

/// Model data for `dataset` under the model recorded in `fit`. Throws
/// InputError when part or covariate names differ.
ModelData model_data_for(const FitFile& fit, const GeoDataset& dataset);

/// Table with columns Parameter, Estimate, SE and the two interval bounds.
std::string format_estimate_table(const std::vector<ParameterEstimate>& rows, double level);

/// Column label for a quantile level: 0.05 -> q05, 0.5 -> q50, 0.025 -> q2.5.
std::string quantile_label(double level);
/// x, y, then for every part: <part>_mean_gh, <part>_mean_mc and one column per
/// quantile level (the Monte Carlo columns are omitted when MC was disabled).
void write_predictions(std::ostream& out, const GridPrediction& pred, const std::vector<std::string>& parts);

/// parameter, value, deviance.
void write_profile(std::ostream& out, const ProfileTrace& trace);
/// Ratio of the upper to the lower half-width of the profile interval
/// (infinite when an endpoint is open).
double profile_asymmetry(const ProfileTrace& trace);
/// parameter, estimate, level, lower, upper, asymmetry, asymmetric.
void write_profile_intervals(std::ostream& out, const std::vector<ProfileTrace>& traces);

/// One row per replicate: replicate, converged, status, loglik, then for each
/// parameter (standard-deviation scale, then the variances) estimate, lower, upper.
void write_study_records(std::ostream& out, const StudySummary& summary);
std::string study_to_json(const StudySummary& summary);

/// {"beta": [...], "sigma": [...], "tau": [...], "phi": x, "rho": [...],
///  "family": "...", "matern_smoothness": v} with sigma and tau as standard deviations.
SimConfig sim_config_from_json(const std::string& text);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace geocomp::io
