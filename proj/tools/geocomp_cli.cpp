// geocomp: fit, profile, predict, simulate and study from the command line.
//
// Exit codes: 0 success, 1 bad input file, 2 usage error, 3 numerical
// failure or non-convergence.

#include "geocomp/errors.hpp"
#include "geocomp/io.hpp"
#include "geocomp/mle.hpp"
#include "geocomp/predict.hpp"
#include "geocomp/sim_study.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace geocomp;

constexpr int kOk = 0;
constexpr int kInput = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_list(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& t : split_list(s)) {
    try {
      out.push_back(io::parse_double(t, flag));
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

void write_csv_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ostringstream out;
  body(out);
  io::write_text_file(path, out.str());
}

void print_notes(const std::vector<std::string>& notes) {
  for (const auto& n : notes) std::cerr << "note: " << n << '\n';
}

// ------------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string denominator;
  std::string correlation = "exponential";
  double smoothness = 1.5;
  double ci_level = 0.95;
  std::string init;
  std::string out = "fit.json";
  std::string parts;
  std::string covariates;
  bool no_flat_check = false;
};

std::size_t resolve_denominator(const std::string& spec, const GeoDataset& data) {
  if (spec.empty()) return most_abundant_part(data.compositions);
  for (std::size_t j = 0; j < data.part_names.size(); ++j)
    if (data.part_names[j] == spec) return j;
  throw UsageError("--denominator '" + spec + "' is not a composition column");
}

std::optional<CovarianceParams> read_init(const std::string& path, std::size_t m) {
  if (path.empty()) return std::nullopt;
  const std::string text = io::read_text_file(path);
  try {
    return io::fit_from_json(text).result.params.cov;
  } catch (const InputError&) {
  }
  // Fall back to a plain parameter document.
  try {
    const SimConfig c = io::sim_config_from_json(text);
    CovarianceParams p = c.covariance();
    if (p.components() != m) throw InputError("initial values have the wrong number of components");
    return p;
  } catch (const InputError& e) {
    throw InputError("--init: " + std::string(e.what()));
  }
}

int cmd_fit(const FitArgs& a) {
  if (!(a.ci_level > 0.0 && a.ci_level < 1.0)) throw UsageError("--ci-level must lie in (0, 1)");
  CorrelationFamily family;
  try {
    family = CorrelationFamily::parse(a.correlation, a.smoothness);
  } catch (const std::domain_error& e) {
    throw UsageError(e.what());
  }
  const io::DatasetRead read = io::read_dataset_file(a.data, {split_list(a.parts), split_list(a.covariates)});
  print_notes(read.warnings);
  const std::size_t denominator = resolve_denominator(a.denominator, read.data);
  const ModelData data = make_model_data(read.data, denominator, family);

  FitOptions options;
  options.ci_level = a.ci_level;
  options.check_flat_phi = !a.no_flat_check;
  const FitResult fitted = fit(data, options, read_init(a.init, data.components()));

  io::FitFile file{fitted, family, read.data.part_names, denominator, read.data.covariate_names, options};
  io::save_fit(a.out, file);

  std::cout << "denominator: " << read.data.part_names[denominator] << "   family: " << family.name()
            << "   log-likelihood: " << io::format_fixed4(fitted.loglik) << '\n';
  std::cout << io::format_estimate_table(fitted.sd_scale(), fitted.ci_level);
  std::cout << (fitted.converged ? "converged" : "NOT converged") << " (" << fitted.status << ", "
            << fitted.iterations << " iterations)\n";
  print_notes(fitted.notes);
  return fitted.converged ? kOk : kNumeric;
}

// --------------------------------------------------------------- profile

struct ProfileArgs {
  std::string fit;
  std::string data;
  std::string params;
  int grid_points = 30;
  double span = 4.0;
  std::string out_dir = ".";
};

int cmd_profile(const ProfileArgs& a) {
  if (a.grid_points < 2) throw UsageError("--grid-points must be at least 2");
  if (!(a.span > 0.0)) throw UsageError("--span must be positive");
  const io::FitFile file = io::load_fit(a.fit);
  const std::size_t m = file.parts.size() - 1;
  const auto names = parameter_names(m);
  std::vector<std::size_t> chosen;
  if (a.params.empty()) {
    for (std::size_t q = 0; q < names.size(); ++q) chosen.push_back(q);
  } else {
    for (const auto& n : split_list(a.params)) {
      try {
        chosen.push_back(parameter_index(n, m));
      } catch (const std::domain_error&) {
        throw UsageError("unknown parameter '" + n + "'");
      }
    }
  }
  const io::DatasetRead read = io::read_dataset_file(a.data, {file.parts, file.covariates});
  print_notes(read.warnings);
  const ModelData data = io::model_data_for(file, read.data);
  if (!file.result.converged) {
    std::cerr << "error: the fit did not converge; profiles need a converged fit\n";
    return kNumeric;
  }

  const auto [lo, hi] = parameter_bounds(m, file.options);
  const Eigen::VectorXd lambda = file.result.params.cov.to_vector();
  std::filesystem::create_directories(a.out_dir);
  std::vector<ProfileTrace> traces;
  for (std::size_t q : chosen) {
    const auto qi = static_cast<Eigen::Index>(q);
    double se = file.result.se_lambda[qi];
    // Without a usable SE the default span covers half the estimate either side.
    if (!(std::isfinite(se) && se > 0.0)) se = std::max(0.125 * std::abs(lambda[qi]), 0.125);
    ProfileGrid grid{std::max(lo[qi], lambda[qi] - a.span * se), std::min(hi[qi], lambda[qi] + a.span * se),
                     a.grid_points};
    ProfileTrace tr = profile_trace(file.result, q, grid, data, file.options);
    write_csv_file((std::filesystem::path(a.out_dir) / ("profile_" + tr.name + ".csv")).string(),
                   [&](std::ostream& o) { io::write_profile(o, tr); });
    std::cout << tr.name << ": estimate " << io::format_fixed4(tr.estimate) << ", profile interval ["
              << io::format_fixed4(tr.ci_lower) << ", " << io::format_fixed4(tr.ci_upper) << "]\n";
    traces.push_back(std::move(tr));
  }
  write_csv_file((std::filesystem::path(a.out_dir) / "profile_intervals.csv").string(),
                 [&](std::ostream& o) { io::write_profile_intervals(o, traces); });
  return kOk;
}

// --------------------------------------------------------------- predict

struct PredictArgs {
  std::string fit;
  std::string data;
  int nx = 50;
  int ny = 50;
  std::string bbox;
  std::string sites;
  int gh_points = 20;
  long long mc_samples = 10000;
  std::optional<unsigned long long> seed;
  std::string quantiles = "0.05,0.95";
  bool exclude_nugget = false;
  int jobs = 0;
  std::string out = "predictions.csv";
};

int cmd_predict(const PredictArgs& a) {
  if (a.mc_samples < 0 || a.mc_samples == 1) throw UsageError("--mc-samples must be 0 or at least 2");
  if (a.mc_samples > 0 && !a.seed) throw UsageError("--seed is required when Monte Carlo samples are requested");
  if (a.gh_points < 1 || a.gh_points > 95) throw UsageError("--gh-points must lie in [1, 95]");
  if (a.nx < 1 || a.ny < 1) throw UsageError("--grid-nx and --grid-ny must be positive");
  const std::vector<double> levels = parse_list(a.quantiles, "--quantiles");
  for (double l : levels)
    if (!(l >= 0.0 && l <= 1.0)) throw UsageError("--quantiles must lie in [0, 1]");

  const io::FitFile file = io::load_fit(a.fit);
  io::DatasetRead read = io::read_dataset_file(a.data, {file.parts, file.covariates});
  print_notes(read.warnings);
  const ModelData data = io::model_data_for(file, read.data);
  if (!file.result.converged) {
    std::cerr << "error: the fit did not converge; refusing to predict\n";
    return kNumeric;
  }

  SpatialLocations sites;
  NewSiteDesign design;
  if (!a.sites.empty()) {
    const io::CsvTable t = io::read_csv_file(a.sites);
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    if (n == 0) throw InputError("--sites file has no rows");
    Eigen::MatrixX2d xy(n, 2);
    Eigen::MatrixXd cov(n, static_cast<Eigen::Index>(file.covariates.size()));
    const std::size_t cx = t.column("x"), cy = t.column("y");
    std::vector<std::size_t> cc;
    for (const auto& c : file.covariates) cc.push_back(t.column(c));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = t.rows[static_cast<std::size_t>(i)];
      xy(i, 0) = io::parse_double(row[cx], "--sites x");
      xy(i, 1) = io::parse_double(row[cy], "--sites y");
      for (std::size_t k = 0; k < cc.size(); ++k)
        cov(i, static_cast<Eigen::Index>(k)) = io::parse_double(row[cc[k]], "--sites " + file.covariates[k]);
    }
    sites = SpatialLocations(xy);
    if (!file.covariates.empty()) design = DesignMatrix::shared_covariates(cov, file.parts.size() - 1);
  } else {
    if (!file.covariates.empty()) throw UsageError("the model has covariates; pass prediction sites with --sites");
    GridSpec grid = GridSpec::bounding(data.locations, a.nx, a.ny);
    if (!a.bbox.empty()) {
      const auto b = parse_list(a.bbox, "--bbox");
      if (b.size() != 4 || !(b[2] >= b[0] && b[3] >= b[1])) throw UsageError("--bbox needs xmin,ymin,xmax,ymax");
      grid = {a.nx, a.ny, b[0], b[1], b[2], b[3]};
    }
    sites = grid.locations();
  }

  PredictOptions options;
  options.gh_points = a.gh_points;
  options.mc_samples = static_cast<std::size_t>(a.mc_samples);
  options.seed = a.seed.value_or(0);
  options.quantile_levels = levels;
  options.conditional = {file.denominator, !a.exclude_nugget, a.jobs};
  const GridPrediction pred = predict_sites(file.result.params, data, sites, design, options);
  print_notes(pred.warnings);
  write_csv_file(a.out, [&](std::ostream& o) { io::write_predictions(o, pred, file.parts); });
  std::cout << "wrote " << pred.sites.size() << " predictions to " << a.out << '\n';
  return kOk;
}

// -------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config = "1";
  std::string params;
  std::size_t n = 100;
  unsigned long long seed = 1;
  std::string out = "simulated.csv";
};

SimConfig resolve_config(const std::string& id, const std::string& params, std::size_t n) {
  SimConfig c;
  if (id == "custom") {
    if (params.empty()) throw UsageError("--config custom needs --params");
    c = io::sim_config_from_json(io::read_text_file(params));
    c.n = n;
  } else if (id == "1" || id == "2" || id == "3") {
    c = SimConfig::preset(std::stoi(id), n);
  } else {
    throw UsageError("--config must be 1, 2, 3 or custom");
  }
  try {
    make_grid(n);
  } catch (const std::domain_error& e) {
    throw UsageError(e.what());
  }
  try {
    c.validate();
  } catch (const std::domain_error& e) {
    throw InputError(std::string("simulation parameters: ") + e.what());
  }
  return c;
}

int cmd_simulate(const SimulateArgs& a) {
  SimConfig c = resolve_config(a.config, a.params, a.n);
  c.base_seed = a.seed;
  const GeoDataset ds = simulate_dataset(c, 0);
  write_csv_file(a.out, [&](std::ostream& o) { io::write_dataset(o, ds); });
  std::cout << "wrote " << ds.sites() << " simulated sites to " << a.out << '\n';
  return kOk;
}

// ----------------------------------------------------------------- study

struct StudyArgs {
  std::string config = "1";
  std::string params;
  std::size_t n = 100;
  std::size_t replicates = 100;
  unsigned long long seed = 1;
  int jobs = 0;
  std::string out_json = "study.json";
  std::string out_csv = "study_replicates.csv";
};

int cmd_study(const StudyArgs& a) {
  if (a.replicates < 1) throw UsageError("--replicates must be positive");
  SimConfig c = resolve_config(a.config, a.params, a.n);
  c.base_seed = a.seed;
  c.replicates = a.replicates;
  StudyOptions options;
  options.jobs = a.jobs;
  const StudySummary s = run_study(c, options);
  io::write_text_file(a.out_json, io::study_to_json(s));
  write_csv_file(a.out_csv, [&](std::ostream& o) { io::write_study_records(o, s); });

  std::cout << "replicates converged: " << s.replicates_converged << " / " << s.replicates << '\n';
  std::cout << "Parameter     Truth      Bias  Coverage\n";
  for (std::size_t k = 0; k < s.sd_scale.size(); ++k) {
    const auto& p = s.sd_scale[k];
    if (p.name.rfind("beta", 0) == 0) continue;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-10s %8s %9s %9s\n", p.name.c_str(), io::format_fixed4(p.truth).c_str(),
                  io::format_fixed4(p.bias).c_str(), io::format_fixed4(p.coverage).c_str());
    std::cout << buf;
  }
  if (s.unreliable) {
    std::cerr << "error: more than 20% of the replicates failed to converge\n";
    return kNumeric;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geostatistical models for compositional data"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the model by maximum likelihood");
  fit_cmd->add_option("data", fa.data, "Dataset CSV (x, y, parts, covariates)")->required();
  fit_cmd->add_option("--denominator", fa.denominator, "Denominator part (default: most abundant)");
  fit_cmd->add_option("--correlation", fa.correlation, "exponential, spherical or matern");
  fit_cmd->add_option("--matern-smoothness", fa.smoothness, "Fixed Matern smoothness");
  fit_cmd->add_option("--ci-level", fa.ci_level, "Wald interval level");
  fit_cmd->add_option("--init", fa.init, "Fit file or parameter JSON with starting values");
  fit_cmd->add_option("--out", fa.out, "Output fit file");
  fit_cmd->add_option("--parts", fa.parts, "Comma-separated composition columns");
  fit_cmd->add_option("--covariates", fa.covariates, "Comma-separated covariate columns");
  fit_cmd->add_flag("--no-flat-phi-check", fa.no_flat_check, "Skip the flat range-profile diagnostic");

  ProfileArgs pa;
  auto* prof_cmd = app.add_subcommand("profile", "Profile-likelihood traces and intervals");
  prof_cmd->add_option("fit", pa.fit, "Fit file")->required();
  prof_cmd->add_option("data", pa.data, "Dataset CSV used for the fit")->required();
  prof_cmd->add_option("--params", pa.params, "Comma-separated parameter names (default: all)");
  prof_cmd->add_option("--grid-points", pa.grid_points, "Grid points per parameter");
  prof_cmd->add_option("--span", pa.span, "Half-width of the grid in standard errors");
  prof_cmd->add_option("--out-dir", pa.out_dir, "Directory for the profile CSV files");

  PredictArgs pr;
  auto* pred_cmd = app.add_subcommand("predict", "Predict compositions on a grid");
  pred_cmd->add_option("fit", pr.fit, "Fit file")->required();
  pred_cmd->add_option("data", pr.data, "Dataset CSV used for the fit")->required();
  pred_cmd->add_option("--grid-nx", pr.nx, "Grid points along x");
  pred_cmd->add_option("--grid-ny", pr.ny, "Grid points along y");
  pred_cmd->add_option("--bbox", pr.bbox, "xmin,ymin,xmax,ymax (default: data bounding box)");
  pred_cmd->add_option("--sites", pr.sites, "CSV of prediction sites (x, y, covariates) instead of a grid");
  pred_cmd->add_option("--gh-points", pr.gh_points, "Gauss-Hermite points per dimension");
  pred_cmd->add_option("--mc-samples", pr.mc_samples, "Monte Carlo draws per site (0 disables)");
  pred_cmd->add_option("--seed", pr.seed, "Random seed (required for Monte Carlo)");
  pred_cmd->add_option("--quantiles", pr.quantiles, "Comma-separated quantile levels");
  pred_cmd->add_flag("--exclude-nugget", pr.exclude_nugget, "Predict the signal without the new-site nugget");
  pred_cmd->add_option("--jobs", pr.jobs, "Threads over prediction sites (0: default)");
  pred_cmd->add_option("--out", pr.out, "Output CSV");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a dataset on a regular grid");
  sim_cmd->add_option("--config", sa.config, "1, 2, 3 or custom");
  sim_cmd->add_option("--params", sa.params, "Parameter JSON for --config custom");
  sim_cmd->add_option("--n", sa.n, "Number of sites (perfect square)");
  sim_cmd->add_option("--seed", sa.seed, "Random seed");
  sim_cmd->add_option("--out", sa.out, "Output dataset CSV");

  StudyArgs st;
  auto* study_cmd = app.add_subcommand("study", "Run a simulation study");
  study_cmd->add_option("--config", st.config, "1, 2, 3 or custom");
  study_cmd->add_option("--params", st.params, "Parameter JSON for --config custom");
  study_cmd->add_option("--n", st.n, "Number of sites (perfect square)");
  study_cmd->add_option("--replicates", st.replicates, "Number of replicates");
  study_cmd->add_option("--seed", st.seed, "Base random seed");
  study_cmd->add_option("--jobs", st.jobs, "Threads over replicates (0: default)");
  study_cmd->add_option("--out-json", st.out_json, "Summary JSON");
  study_cmd->add_option("--out-csv", st.out_csv, "Per-replicate CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa);
    if (*prof_cmd) return cmd_profile(pa);
    if (*pred_cmd) return cmd_predict(pr);
    if (*sim_cmd) return cmd_simulate(sa);
    if (*study_cmd) return cmd_study(st);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  }
  return kUsage;
}
