#include "geocomp/io.hpp"

#include "geocomp/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace geocomp::io {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_fixed4(double v) {
  if (!std::isfinite(v)) return format_double(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& context) {
  std::size_t b = text.find_first_not_of(" \t");
  std::size_t e = text.find_last_not_of(" \t");
  if (b == std::string::npos) throw InputError("missing value in " + context);
  const std::string t = text.substr(b, e - b + 1);
  if (t == "nan" || t == "NaN") return kNaN;
  if (t == "inf" || t == "Inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf" || t == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw InputError("cannot parse '" + t + "' as a number in " + context);
  return v;
}

// -------------------------------------------------------------------- CSV

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw InputError("missing column '" + name + "'");
}

CsvTable read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false, any = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) records.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      end_row();
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw InputError("unterminated quoted field in CSV input");
  if (!field.empty() || !row.empty()) end_row();
  if (!any || records.empty()) throw InputError("CSV input is empty");

  CsvTable t;
  t.header = std::move(records.front());
  if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw InputError("CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                       " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in);
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out << ',';
    const std::string& f = fields[k];
    if (f.find_first_of(",\"\r\n") != std::string::npos) {
      out << '"';
      for (char c : f) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << f;
    }
  }
  out << "\r\n";
}

// --------------------------------------------------------------- datasets

DatasetRead read_dataset(std::istream& in, const DatasetSchema& schema) {
  const CsvTable t = read_csv(in);
  const std::size_t cx = t.column("x");
  const std::size_t cy = t.column("y");
  std::vector<std::size_t> cov_cols;
  for (const auto& name : schema.covariates) cov_cols.push_back(t.column(name));
  std::vector<std::string> part_names = schema.parts;
  std::vector<std::size_t> part_cols;
  if (part_names.empty()) {
    for (std::size_t k = 0; k < t.header.size(); ++k) {
      if (k == cx || k == cy || std::find(cov_cols.begin(), cov_cols.end(), k) != cov_cols.end()) continue;
      part_names.push_back(t.header[k]);
      part_cols.push_back(k);
    }
  } else {
    for (const auto& name : part_names) part_cols.push_back(t.column(name));
  }
  if (part_cols.size() < 2) throw InputError("dataset needs at least two composition columns");
  if (t.rows.empty()) throw InputError("dataset has no rows");

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Eigen::MatrixX2d coords(n, 2);
  Eigen::MatrixXd cov(n, static_cast<Eigen::Index>(cov_cols.size()));
  DatasetRead out{{}, {}};
  std::vector<Composition> comps;
  std::size_t off_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const std::string where = "row " + std::to_string(i + 1);
    coords(i, 0) = parse_double(row[cx], where + ", column x");
    coords(i, 1) = parse_double(row[cy], where + ", column y");
    if (!std::isfinite(coords(i, 0)) || !std::isfinite(coords(i, 1)))
      throw InputError("non-finite coordinate in " + where);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      const double v = parse_double(row[cov_cols[k]], where + ", column " + schema.covariates[k]);
      if (!std::isfinite(v)) throw InputError("non-finite covariate in " + where);
      cov(i, static_cast<Eigen::Index>(k)) = v;
    }
    std::vector<double> raw;
    double sum = 0.0;
    for (std::size_t k = 0; k < part_cols.size(); ++k) {
      const double v = parse_double(row[part_cols[k]], where + ", column " + part_names[k]);
      if (!(v > 0.0) || !std::isfinite(v))
        throw InputError("composition part '" + part_names[k] + "' must be positive in " + where);
      raw.push_back(v);
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) ++off_sum;
    comps.push_back(closure(raw));
  }
  if (off_sum > 0)
    out.warnings.push_back(std::to_string(off_sum) + " row(s) did not sum to 1 within 1e-6 and were closed");
  out.data = GeoDataset{SpatialLocations(coords), std::move(comps), std::move(part_names), std::move(cov),
                        schema.covariates};
  return out;
}

DatasetRead read_dataset_file(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_dataset(in, schema);
}

void write_dataset(std::ostream& out, const GeoDataset& data) {
  std::vector<std::string> header{"x", "y"};
  header.insert(header.end(), data.part_names.begin(), data.part_names.end());
  header.insert(header.end(), data.covariate_names.begin(), data.covariate_names.end());
  write_csv_row(out, header);
  const auto& c = data.locations.coords();
  for (std::size_t i = 0; i < data.sites(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    std::vector<std::string> row{format_double(c(ii, 0)), format_double(c(ii, 1))};
    for (double p : data.compositions[i].parts()) row.push_back(format_double(p));
    for (Eigen::Index k = 0; k < data.covariates.cols(); ++k) row.push_back(format_double(data.covariates(ii, k)));
    write_csv_row(out, row);
  }
}

// ---------------------------------------------------------------- FitFile

namespace {

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(num(v[k]));
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) vec_json(m.row(i).transpose()).swap(a.emplace_back());
  return a;
}

json estimates_json(const std::vector<ParameterEstimate>& rows) {
  json a = json::array();
  for (const auto& r : rows)
    a.push_back({{"name", r.name}, {"estimate", num(r.estimate)}, {"se", num(r.se)}, {"lower", num(r.lower)},
                 {"upper", num(r.upper)}});
  return a;
}

double get_num(const json& j) {
  if (j.is_null()) return kNaN;
  return j.get<double>();
}

Eigen::VectorXd get_vec(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = get_num(j[k]);
  return v;
}

Eigen::MatrixXd get_mat(const json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw InputError("ragged matrix in fit file");
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = get_num(j[i][k]);
  }
  return m;
}

void require(const json& j, const char* key, json::value_t type, const std::string& where) {
  if (!j.contains(key)) throw InputError("fit file: missing '" + std::string(key) + "' in " + where);
  const json& v = j.at(key);
  const bool ok = type == json::value_t::number_float ? (v.is_number() || v.is_null()) : v.type() == type ||
                  (type == json::value_t::number_unsigned && v.is_number_integer() && v.get<long long>() >= 0);
  if (!ok) throw InputError("fit file: '" + std::string(key) + "' in " + where + " has the wrong type");
}

void require_numeric_array(const json& j, const char* key, std::size_t size, const std::string& where) {
  require(j, key, json::value_t::array, where);
  const json& a = j.at(key);
  if (a.size() != size)
    throw InputError("fit file: '" + std::string(key) + "' in " + where + " should have " + std::to_string(size) +
                     " entries");
  for (const auto& v : a)
    if (!(v.is_number() || v.is_null())) throw InputError("fit file: non-numeric entry in '" + std::string(key) + "'");
}

void require_square(const json& j, const char* key, std::size_t size) {
  require(j, key, json::value_t::array, "document");
  const json& a = j.at(key);
  if (a.size() != size) throw InputError("fit file: '" + std::string(key) + "' has the wrong dimension");
  for (const auto& row : a) {
    if (!row.is_array() || row.size() != size) throw InputError("fit file: '" + std::string(key) + "' is not square");
    for (const auto& v : row)
      if (!(v.is_number() || v.is_null())) throw InputError("fit file: non-numeric entry in '" + std::string(key) + "'");
  }
}

constexpr const char* kFormat = "geocomp-fit";

void validate_fit(const json& j) {
  if (!j.is_object()) throw InputError("fit file: document is not a JSON object");
  require(j, "format", json::value_t::string, "document");
  if (j["format"] != kFormat) throw InputError("fit file: unexpected format tag");
  require(j, "version", json::value_t::number_unsigned, "document");
  if (j["version"].get<int>() != 1) throw InputError("fit file: unsupported version");
  require(j, "model", json::value_t::object, "document");
  const json& model = j["model"];
  require(model, "family", json::value_t::string, "model");
  require(model, "matern_smoothness", json::value_t::number_float, "model");
  require(model, "parts", json::value_t::array, "model");
  require(model, "denominator", json::value_t::string, "model");
  require(model, "denominator_index", json::value_t::number_unsigned, "model");
  require(model, "covariates", json::value_t::array, "model");
  require(model, "stacking", json::value_t::string, "model");
  const std::size_t parts = model["parts"].size();
  if (parts < 2) throw InputError("fit file: model needs at least two parts");
  for (const auto& p : model["parts"])
    if (!p.is_string()) throw InputError("fit file: part names must be strings");
  if (model["denominator_index"].get<std::size_t>() >= parts) throw InputError("fit file: denominator index out of range");
  if (model["parts"][model["denominator_index"].get<std::size_t>()] != model["denominator"])
    throw InputError("fit file: denominator name does not match its index");
  try {
    CorrelationFamily::parse(model["family"].get<std::string>());
  } catch (const std::domain_error& e) {
    throw InputError(std::string("fit file: ") + e.what());
  }
  const std::size_t m = parts - 1;
  const std::size_t q = parameter_count(m);
  const std::size_t p = m * (model["covariates"].size() + 1);

  require(j, "estimates", json::value_t::object, "document");
  require_numeric_array(j["estimates"], "lambda", q, "estimates");
  require_numeric_array(j["estimates"], "beta", p, "estimates");
  require_numeric_array(j["estimates"], "se_lambda", q, "estimates");
  require_numeric_array(j["estimates"], "se_beta", p, "estimates");
  require(j["estimates"], "beta_names", json::value_t::array, "estimates");
  for (const char* key : {"variance_scale", "sd_scale"}) {
    require(j["estimates"], key, json::value_t::array, "estimates");
    if (j["estimates"][key].size() != p + q) throw InputError(std::string("fit file: '") + key + "' has the wrong length");
    for (const auto& row : j["estimates"][key]) {
      if (!row.is_object()) throw InputError("fit file: estimate rows must be objects");
      require(row, "name", json::value_t::string, key);
      for (const char* f : {"estimate", "se", "lower", "upper"}) require(row, f, json::value_t::number_float, key);
    }
  }
  require_square(j, "beta_covariance", p);
  require_square(j, "observed_information", q);
  require(j, "loglik", json::value_t::number_float, "document");
  require(j, "convergence", json::value_t::object, "document");
  const json& c = j["convergence"];
  require(c, "converged", json::value_t::boolean, "convergence");
  require(c, "status", json::value_t::string, "convergence");
  require(c, "iterations", json::value_t::number_unsigned, "convergence");
  require(c, "evaluations", json::value_t::number_unsigned, "convergence");
  require(c, "gradient_norm", json::value_t::number_float, "convergence");
  require(c, "information_reliable", json::value_t::boolean, "convergence");
  require(c, "notes", json::value_t::array, "convergence");
  require(c, "loglik_trace", json::value_t::array, "convergence");
  require(j, "options", json::value_t::object, "document");
  const json& o = j["options"];
  for (const char* f : {"ci_level", "variance_floor", "rho_margin"}) require(o, f, json::value_t::number_float, "options");
  require(o, "check_flat_phi", json::value_t::boolean, "options");
  require(o, "optimizer", json::value_t::object, "options");
  require(o, "richardson", json::value_t::object, "options");
}

}  // namespace

std::string fit_to_json(const FitFile& fit) {
  const FitResult& r = fit.result;
  const FitOptions& o = fit.options;
  json j;
  j["format"] = kFormat;
  j["version"] = 1;
  j["model"] = {{"family", fit.family.name()},
                {"matern_smoothness", fit.family.smoothness},
                {"parts", fit.parts},
                {"denominator", fit.parts.at(fit.denominator)},
                {"denominator_index", fit.denominator},
                {"covariates", fit.covariates},
                {"stacking", "component-major"},
                {"beta_information", r.beta_information}};
  j["estimates"] = {{"lambda", vec_json(r.params.cov.to_vector())},
                    {"lambda_names", parameter_names(r.components())},
                    {"beta", vec_json(r.params.beta)},
                    {"beta_names", r.beta_names},
                    {"se_lambda", vec_json(r.se_lambda)},
                    {"se_beta", vec_json(r.se_beta)},
                    {"ci_level", r.ci_level},
                    {"variance_scale", estimates_json(r.variance_scale())},
                    {"sd_scale", estimates_json(r.sd_scale())}};
  j["beta_covariance"] = mat_json(r.beta_covariance);
  j["observed_information"] = mat_json(r.obs_info);
  j["loglik"] = num(r.loglik);
  json trace = json::array();
  for (double v : r.loglik_trace) trace.push_back(num(v));
  j["convergence"] = {{"converged", r.converged},
                      {"status", r.status},
                      {"iterations", r.iterations},
                      {"evaluations", r.evaluations},
                      {"gradient_norm", num(r.gradient_norm)},
                      {"information_reliable", r.information_reliable},
                      {"notes", r.notes},
                      {"loglik_trace", trace}};
  j["options"] = {{"ci_level", o.ci_level},
                  {"variance_floor", o.variance_floor},
                  {"rho_margin", o.rho_margin},
                  {"check_flat_phi", o.check_flat_phi},
                  {"optimizer",
                   {{"memory", o.optimizer.memory},
                    {"max_iterations", o.optimizer.max_iterations},
                    {"pgtol", o.optimizer.pgtol},
                    {"rel_ftol", o.optimizer.rel_ftol},
                    {"max_line_search", o.optimizer.max_line_search}}},
                  {"richardson",
                   {{"relative_step", o.richardson.relative_step},
                    {"zero_step", o.richardson.zero_step},
                    {"zero_tolerance", o.richardson.zero_tolerance},
                    {"stages", o.richardson.stages},
                    {"reduction", o.richardson.reduction}}}};
  return j.dump(2) + "\n";
}

FitFile fit_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("fit file is not valid JSON: ") + e.what());
  }
  validate_fit(j);
  try {
    FitFile f;
    const json& model = j["model"];
    f.family = CorrelationFamily::parse(model["family"].get<std::string>(), model["matern_smoothness"].get<double>());
    f.parts = model["parts"].get<std::vector<std::string>>();
    f.denominator = model["denominator_index"].get<std::size_t>();
    f.covariates = model["covariates"].get<std::vector<std::string>>();
    const std::size_t m = f.parts.size() - 1;

    const json& o = j["options"];
    f.options.ci_level = o["ci_level"].get<double>();
    f.options.variance_floor = o["variance_floor"].get<double>();
    f.options.rho_margin = o["rho_margin"].get<double>();
    f.options.check_flat_phi = o["check_flat_phi"].get<bool>();
    const json& opt = o["optimizer"];
    f.options.optimizer.memory = opt.at("memory").get<int>();
    f.options.optimizer.max_iterations = opt.at("max_iterations").get<int>();
    f.options.optimizer.pgtol = opt.at("pgtol").get<double>();
    f.options.optimizer.rel_ftol = opt.at("rel_ftol").get<double>();
    f.options.optimizer.max_line_search = opt.at("max_line_search").get<int>();
    const json& rich = o["richardson"];
    f.options.richardson.relative_step = rich.at("relative_step").get<double>();
    f.options.richardson.zero_step = rich.at("zero_step").get<double>();
    f.options.richardson.zero_tolerance = rich.at("zero_tolerance").get<double>();
    f.options.richardson.stages = rich.at("stages").get<int>();
    f.options.richardson.reduction = rich.at("reduction").get<double>();

    FitResult& r = f.result;
    const json& est = j["estimates"];
    r.params.cov = CovarianceParams::from_vector(get_vec(est["lambda"]), m);
    r.params.beta = get_vec(est["beta"]);
    r.beta_names = est["beta_names"].get<std::vector<std::string>>();
    r.se_lambda = get_vec(est["se_lambda"]);
    r.se_beta = get_vec(est["se_beta"]);
    r.ci_level = f.options.ci_level;
    r.beta_covariance = get_mat(j["beta_covariance"]);
    r.obs_info = get_mat(j["observed_information"]);
    r.loglik = get_num(j["loglik"]);
    if (model.contains("beta_information")) r.beta_information = model["beta_information"].get<std::string>();
    const json& c = j["convergence"];
    r.converged = c["converged"].get<bool>();
    r.status = c["status"].get<std::string>();
    r.iterations = c["iterations"].get<int>();
    r.evaluations = c["evaluations"].get<int>();
    r.gradient_norm = get_num(c["gradient_norm"]);
    r.information_reliable = c["information_reliable"].get<bool>();
    r.notes = c["notes"].get<std::vector<std::string>>();
    for (const auto& v : c["loglik_trace"]) r.loglik_trace.push_back(get_num(v));
    r.params.cov.validate();
    return f;
  } catch (const json::exception& e) {
    throw InputError(std::string("fit file: ") + e.what());
  } catch (const std::domain_error& e) {
    throw InputError(std::string("fit file: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

void save_fit(const std::string& path, const FitFile& fit) { write_text_file(path, fit_to_json(fit)); }

FitFile load_fit(const std::string& path) { return fit_from_json(read_text_file(path)); }

ModelData model_data_for(const FitFile& fit, const GeoDataset& dataset) {
  if (dataset.part_names != fit.parts) {
    std::string have, want;
    for (const auto& p : dataset.part_names) have += (have.empty() ? "" : ",") + p;
    for (const auto& p : fit.parts) want += (want.empty() ? "" : ",") + p;
    throw InputError("dataset parts (" + have + ") differ from the fitted model (" + want + ")");
  }
  if (dataset.covariate_names != fit.covariates) throw InputError("dataset covariates differ from the fitted model");
  return make_model_data(dataset, fit.denominator, fit.family);
}

// ----------------------------------------------------------------- tables

std::string format_estimate_table(const std::vector<ParameterEstimate>& rows, double level) {
  const double tail = 50.0 * (1.0 - level);
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g%%", v);
    return std::string(buf);
  };
  const std::vector<std::string> head{"Parameter", "Estimate", "SE", pct(tail), pct(100.0 - tail)};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows)
    cells.push_back({r.name, format_fixed4(r.estimate), format_fixed4(r.se), format_fixed4(r.lower), format_fixed4(r.upper)});
  std::vector<std::size_t> width(head.size());
  for (std::size_t k = 0; k < head.size(); ++k) {
    width[k] = head[k].size();
    for (const auto& c : cells) width[k] = std::max(width[k], c[k].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& c) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k == 0) {
        out << c[k] << std::string(width[k] - c[k].size(), ' ');
      } else {
        out << "  " << std::string(width[k] - c[k].size(), ' ') << c[k];
      }
    }
    out << '\n';
  };
  line(head);
  for (const auto& c : cells) line(c);
  return out.str();
}

// ---------------------------------------------------------- predictions

std::string quantile_label(double level) {
  const double pct = 100.0 * level;
  char buf[32];
  if (std::abs(pct - std::round(pct)) < 1e-9)
    std::snprintf(buf, sizeof buf, "q%02d", static_cast<int>(std::round(pct)));
  else
    std::snprintf(buf, sizeof buf, "q%g", pct);
  return buf;
}

void write_predictions(std::ostream& out, const GridPrediction& pred, const std::vector<std::string>& parts) {
  const bool mc = !pred.sites.empty() && pred.sites.front().mean_mc.has_value();
  const std::vector<double> levels = pred.sites.empty() ? std::vector<double>{} : pred.sites.front().levels;
  std::vector<std::string> header{"x", "y"};
  for (const auto& p : parts) {
    header.push_back(p + "_mean_gh");
    if (!mc) continue;
    header.push_back(p + "_mean_mc");
    for (double l : levels) header.push_back(p + "_" + quantile_label(l));
  }
  write_csv_row(out, header);
  for (const auto& s : pred.sites) {
    std::vector<std::string> row{format_double(s.site[0]), format_double(s.site[1])};
    for (std::size_t j = 0; j < parts.size(); ++j) {
      row.push_back(format_double(s.mean_gh[j]));
      if (!mc) continue;
      row.push_back(format_double((*s.mean_mc)[j]));
      for (std::size_t l = 0; l < levels.size(); ++l)
        row.push_back(format_double(s.quantiles[l][static_cast<Eigen::Index>(j)]));
    }
    write_csv_row(out, row);
  }
}

// -------------------------------------------------------------- profiles

void write_profile(std::ostream& out, const ProfileTrace& trace) {
  write_csv_row(out, {"parameter", "value", "deviance"});
  for (std::size_t k = 0; k < trace.grid.size(); ++k)
    write_csv_row(out, {trace.name, format_double(trace.grid[k]), format_double(trace.deviance[k])});
}

double profile_asymmetry(const ProfileTrace& trace) {
  const double left = trace.estimate - trace.ci_lower;
  const double right = trace.ci_upper - trace.estimate;
  if (!std::isfinite(left) || !std::isfinite(right)) return std::numeric_limits<double>::infinity();
  if (left <= 0.0) return std::numeric_limits<double>::infinity();
  return right / left;
}

void write_profile_intervals(std::ostream& out, const std::vector<ProfileTrace>& traces) {
  write_csv_row(out, {"parameter", "estimate", "level", "lower", "upper", "asymmetry", "asymmetric"});
  for (const auto& t : traces) {
    const double a = profile_asymmetry(t);
    const bool flag = !(a <= 2.0 && a >= 0.5);
    write_csv_row(out, {t.name, format_double(t.estimate), format_double(t.level), format_double(t.ci_lower),
                        format_double(t.ci_upper), format_double(a), flag ? "true" : "false"});
  }
}

// ----------------------------------------------------------------- study

namespace {

std::vector<std::string> record_columns(const StudySummary& s) {
  std::vector<std::string> names;
  for (const auto& p : s.sd_scale) names.push_back(p.name);
  for (const auto& p : s.variance_scale)
    if (p.name.rfind("sigma2_", 0) == 0 || p.name.rfind("tau2_", 0) == 0) names.push_back(p.name);
  return names;
}

const ParameterEstimate* find_row(const ReplicateRecord& r, const std::string& name) {
  for (const auto* rows : {&r.sd_scale, &r.variance_scale})
    for (const auto& e : *rows)
      if (e.name == name) return &e;
  return nullptr;
}

json param_summary_json(const std::vector<ParameterSummary>& rows) {
  json a = json::array();
  for (const auto& p : rows)
    a.push_back({{"name", p.name},
                 {"truth", num(p.truth)},
                 {"mean_estimate", num(p.mean_estimate)},
                 {"bias", num(p.bias)},
                 {"spread", num(p.spread)},
                 {"coverage", num(p.coverage)},
                 {"replicates_used", p.used}});
  return a;
}

}  // namespace

void write_study_records(std::ostream& out, const StudySummary& summary) {
  const std::vector<std::string> names = record_columns(summary);
  std::vector<std::string> header{"replicate", "converged", "status", "loglik"};
  for (const auto& n : names) {
    header.push_back(n);
    header.push_back(n + "_lower");
    header.push_back(n + "_upper");
  }
  write_csv_row(out, header);
  for (const auto& r : summary.records) {
    std::vector<std::string> row{std::to_string(r.replicate), r.converged ? "true" : "false", r.status,
                                 r.sd_scale.empty() ? "nan" : format_double(r.loglik)};
    for (const auto& n : names) {
      const ParameterEstimate* e = find_row(r, n);
      row.push_back(e ? format_double(e->estimate) : "nan");
      row.push_back(e ? format_double(e->lower) : "nan");
      row.push_back(e ? format_double(e->upper) : "nan");
    }
    write_csv_row(out, row);
  }
}

std::string study_to_json(const StudySummary& s) {
  const SimConfig& c = s.config;
  json j;
  j["config"] = {{"beta", vec_json(c.beta)},
                 {"sigma", vec_json(c.sigma)},
                 {"tau", vec_json(c.tau)},
                 {"phi", c.phi},
                 {"rho", vec_json(c.rho)},
                 {"n", c.n},
                 {"family", c.family.name()},
                 {"matern_smoothness", c.family.smoothness},
                 {"replicates", c.replicates},
                 {"base_seed", c.base_seed}};
  j["replicates"] = s.replicates;
  j["replicates_converged"] = s.replicates_converged;
  j["replicates_failed"] = s.replicates - s.replicates_converged;
  j["unreliable"] = s.unreliable;
  j["sd_scale"] = param_summary_json(s.sd_scale);
  j["variance_scale"] = param_summary_json(s.variance_scale);
  return j.dump(2) + "\n";
}

SimConfig sim_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SimConfig c;
    c.beta = get_vec(j.at("beta"));
    c.sigma = get_vec(j.at("sigma"));
    c.tau = get_vec(j.at("tau"));
    c.phi = j.at("phi").get<double>();
    c.rho = j.contains("rho") ? get_vec(j["rho"]) : Eigen::VectorXd();
    c.family = CorrelationFamily::parse(j.value("family", std::string("exponential")), j.value("matern_smoothness", 1.5));
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("simulation parameters: ") + e.what());
  } catch (const std::domain_error& e) {
    throw InputError(std::string("simulation parameters: ") + e.what());
  }
}

}  // namespace geocomp::io
