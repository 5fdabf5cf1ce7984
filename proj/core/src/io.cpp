#include "nmms/io.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nmms/error.hpp"

namespace nmms {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitCells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(Trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool ParseDouble(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.precision(17);
  return out;
}

std::string Join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

}  // namespace

std::string FormatNumber(double x) { return fmt::format("{:.17g}", x); }

std::size_t CsvTable::Column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IngestionError("missing column '" + name + "'", 1);
}

double CsvTable::Number(std::size_t row, std::size_t column) const {
  if (row >= rows.size()) throw IngestionError("row out of range", row + 2);
  if (column >= rows[row].size()) throw IngestionError("missing cell", row + 2, column + 1);
  double v = 0.0;
  if (!ParseDouble(rows[row][column], v)) {
    throw IngestionError("non-numeric cell '" + rows[row][column] + "'", row + 2, column + 1);
  }
  return v;
}

CsvTable ReadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    const std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    if (!have_header) {
      table.header = SplitCells(trimmed);
      have_header = true;
    } else {
      table.rows.push_back(SplitCells(trimmed));
    }
  }
  if (!have_header) throw IngestionError("'" + path + "' has no header");
  return table;
}

void WriteGridFunctionCsv(const std::string& path, const GridFunction& u) {
  const SampleGrid& grid = *u.grid();
  std::vector<std::string> header;
  for (int k = 0; k < grid.dim(); ++k) header.push_back(fmt::format("x_{}", k + 1));
  if (u.channels() == 1) {
    header.emplace_back("value");
  } else {
    for (int c = 0; c < u.channels(); ++c) header.push_back(fmt::format("value_{}", c + 1));
  }
  header.emplace_back("weight");

  auto out = OpenOut(path);
  out << Join(header) << '\n';
  for (int i = 0; i < grid.size(); ++i) {
    std::vector<std::string> cells;
    for (int k = 0; k < grid.dim(); ++k) cells.push_back(FormatNumber(grid.points()(i, k)));
    for (int c = 0; c < u.channels(); ++c) cells.push_back(FormatNumber(u[i * u.channels() + c]));
    cells.push_back(FormatNumber(grid.weights()[i]));
    out << Join(cells) << '\n';
  }
}

GridFunction ReadGridFunctionCsv(const std::string& path) {
  const CsvTable table = ReadCsv(path);
  std::vector<std::size_t> xs, values;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const std::string& h = table.header[j];
    if (h.rfind("x_", 0) == 0) xs.push_back(j);
    if (h == "value" || h.rfind("value_", 0) == 0) values.push_back(j);
  }
  const std::size_t weight = table.Column("weight");
  if (xs.empty() || values.empty()) {
    throw IngestionError("grid function CSV needs x_* and value columns", 1);
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(xs.size());
  const int channels = static_cast<int>(values.size());
  Matrix points(n, d);
  Vector weights(n);
  Vector vals(n * channels);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) points(i, k) = table.Number(i, xs[k]);
    for (int c = 0; c < channels; ++c) vals[i * channels + c] = table.Number(i, values[c]);
    weights[i] = table.Number(i, weight);
  }
  return GridFunction(SampleGrid::Create(std::move(points), std::move(weights)), std::move(vals),
                      channels);
}

IngestedData IngestCsv(const std::string& path, const std::vector<std::string>& feature_columns,
                       const std::string& target_column, bool standardize) {
  if (feature_columns.empty()) throw IngestionError("no feature columns given");
  const CsvTable table = ReadCsv(path);
  if (table.rows.empty()) throw IngestionError("'" + path + "' has no data rows");

  std::vector<std::size_t> cols;
  for (const auto& name : feature_columns) cols.push_back(table.Column(name));
  cols.push_back(table.Column(target_column));

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Matrix data(n, static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = table.Number(i, cols[j]);
      if (!std::isfinite(v)) {
        throw IngestionError("non-finite cell", static_cast<std::size_t>(i) + 2, cols[j] + 1);
      }
      data(i, static_cast<Eigen::Index>(j)) = v;
    }
  }

  Standardization transform;
  if (standardize) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double mean = data.col(j).mean();
      const double var = (data.col(j).array() - mean).square().sum() / static_cast<double>(n);
      const std::string& name =
          j + 1 < data.cols() ? feature_columns[static_cast<std::size_t>(j)] : target_column;
      if (!(var > 0.0)) {
        throw IngestionError("column '" + name + "' has zero variance", 0,
                             cols[static_cast<std::size_t>(j)] + 1);
      }
      const double sd = std::sqrt(var);
      data.col(j) = (data.col(j).array() - mean) / sd;
      transform.columns.push_back(name);
      transform.mean.push_back(mean);
      transform.stddev.push_back(sd);
    }
  }
  const Eigen::Index d = data.cols() - 1;
  GridPtr grid = SampleGrid::Uniform(data.leftCols(d));
  GridFunction target(grid, data.col(d));
  return IngestedData{std::move(grid), std::move(target), std::move(transform)};
}

void WriteStandardization(const std::string& path, const Standardization& transform) {
  auto out = OpenOut(path);
  out << "column,mean,stddev\n";
  for (std::size_t j = 0; j < transform.columns.size(); ++j) {
    out << transform.columns[j] << ',' << FormatNumber(transform.mean[j]) << ','
        << FormatNumber(transform.stddev[j]) << '\n';
  }
}

void WriteCheckpoint(const std::string& path, const MlpModel& model) {
  const MlpArchitecture& a = model.arch();
  std::string hidden;
  for (std::size_t i = 0; i < a.hidden_widths.size(); ++i) {
    if (i) hidden += ';';
    hidden += std::to_string(a.hidden_widths[i]);
  }
  auto out = OpenOut(path);
  out << fmt::format("# mlp input={} hidden={} output={} activation={} init={}\n", a.input_dim,
                     hidden, a.output_dim, ToString(a.activation), ToString(a.init));
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    out << FormatNumber(model.params()[i]) << '\n';
  }
}

MlpModel ReadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# mlp", 0) != 0) {
    throw IngestionError("checkpoint header missing", 1);
  }
  MlpArchitecture arch;
  std::istringstream header(line.substr(5));
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw IngestionError("bad checkpoint field '" + field + "'", 1);
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "input") {
      arch.input_dim = std::stoi(value);
    } else if (key == "output") {
      arch.output_dim = std::stoi(value);
    } else if (key == "hidden") {
      arch.hidden_widths.clear();
      std::istringstream widths(value);
      std::string w;
      while (std::getline(widths, w, ';')) {
        if (!w.empty()) arch.hidden_widths.push_back(std::stoi(w));
      }
    } else if (key == "activation") {
      arch.activation = ParseActivation(value);
    } else if (key == "init") {
      arch.init = ParseInitScheme(value);
    }
  }
  arch.Validate();

  std::vector<double> params;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = Trim(line);
    if (t.empty()) continue;
    double v = 0.0;
    if (!ParseDouble(t, v)) throw IngestionError("non-numeric parameter", row, 1);
    params.push_back(v);
  }
  if (static_cast<int>(params.size()) != arch.ParameterCount()) {
    throw IngestionError(fmt::format("checkpoint holds {} parameters, architecture needs {}",
                                     params.size(), arch.ParameterCount()));
  }
  return MlpModel(arch, Eigen::Map<const Vector>(params.data(), static_cast<Eigen::Index>(params.size())));
}

const std::vector<std::string>& TrajectoryColumns() {
  static const std::vector<std::string> columns = {
      "step",           "energy",          "objective_start",    "objective_end",
      "tracking_error", "s_min",           "s_min_weighted",     "lambda_hat",
      "L_hat",          "r_w",             "C_v",                "h_star_norm",
      "K_v",            "param_step_norm", "function_step_norm", "displacement_ratio",
      "inner_residual", "inner_steps",     "accepted_steps",     "cg_iters",
      "line_search_evals", "stalled",      "T_n",                "K_n",
      "wall_time"};
  return columns;
}

void WriteTrajectoryCsv(const std::string& path, const std::vector<MmsRecord>& records) {
  auto out = OpenOut(path);
  out << Join(TrajectoryColumns()) << '\n';
  for (const MmsRecord& r : records) {
    const bool t = r.theory.has_value();
    const std::vector<std::string> cells = {
        std::to_string(r.step),
        FormatNumber(r.energy),
        FormatNumber(r.objective_start),
        FormatNumber(r.objective_end),
        FormatNumber(r.tracking_error),
        FormatNumber(r.s_min),
        FormatNumber(t ? r.theory->s_min_weighted : kNaN),
        FormatNumber(t ? r.theory->lambda_hat : kNaN),
        FormatNumber(t ? r.theory->L_hat : kNaN),
        FormatNumber(t ? r.theory->r_w : kNaN),
        FormatNumber(t ? r.theory->C_v : kNaN),
        FormatNumber(t ? r.theory->h_star_norm : kNaN),
        FormatNumber(t ? r.theory->K_v : kNaN),
        FormatNumber(r.param_step_norm),
        FormatNumber(r.function_step_norm),
        FormatNumber(r.displacement_ratio),
        FormatNumber(r.inner_residual),
        std::to_string(r.inner_steps),
        std::to_string(r.accepted_steps),
        std::to_string(r.cg_iters),
        std::to_string(r.line_search_evals),
        r.stalled ? "1" : "0",
        FormatNumber(r.T_n),
        std::to_string(r.K_n),
        FormatNumber(r.wall_time)};
    out << Join(cells) << '\n';
  }
}

std::vector<MmsRecord> ReferenceRecords(const ExactTrajectory& traj,
                                        const EnergyFunctional& energy) {
  std::vector<MmsRecord> out;
  for (std::size_t n = 0; n < traj.steps.size(); ++n) {
    MmsRecord r;
    r.step = static_cast<int>(n);
    r.energy = energy.Value(traj.steps[n]);
    r.tracking_error = 0.0;
    r.s_min = kNaN;
    r.param_step_norm = kNaN;
    r.displacement_ratio = kNaN;
    r.inner_residual = n == 0 ? kNaN : 0.0;
    r.T_n = kNaN;
    r.K_n = -1;
    if (n == 0) {
      r.objective_start = kNaN;
      r.objective_end = kNaN;
    } else {
      const double d = Norm(traj.steps[n] - traj.steps[n - 1]);
      r.function_step_norm = d;
      r.objective_start = energy.Value(traj.steps[n - 1]);
      r.objective_end = r.energy + d * d / (2.0 * traj.tau);
    }
    out.push_back(r);
  }
  return out;
}

void WriteIteratesCsv(const std::string& path, const std::vector<GridFunction>& iterates) {
  auto out = OpenOut(path);
  const int m = iterates.empty() ? 0 : iterates.front().size();
  std::vector<std::string> header = {"step"};
  for (int j = 0; j < m; ++j) header.push_back(fmt::format("u_{}", j));
  out << Join(header) << '\n';
  for (std::size_t n = 0; n < iterates.size(); ++n) {
    if (iterates[n].size() != m) throw DimensionError("iterates differ in length");
    std::string line = std::to_string(n);
    for (int j = 0; j < m; ++j) {
      line += ',';
      line += FormatNumber(iterates[n][j]);
    }
    out << line << '\n';
  }
}

std::vector<GridFunction> ReadIteratesCsv(const std::string& path, const GridPtr& grid,
                                          int channels) {
  const CsvTable table = ReadCsv(path);
  const std::size_t m = static_cast<std::size_t>(grid->size()) * static_cast<std::size_t>(channels);
  if (table.header.size() != m + 1) {
    throw IngestionError(fmt::format("iterates CSV has {} value columns, grid needs {}",
                                     table.header.size() - 1, m),
                         1);
  }
  std::vector<GridFunction> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != m + 1) {
      throw IngestionError("wrong number of cells", r + 2);
    }
    Vector v(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) v[static_cast<Eigen::Index>(j)] = table.Number(r, j + 1);
    out.emplace_back(grid, std::move(v), channels);
  }
  return out;
}

void WriteCertificateCsv(const std::string& path, const TrackingCertificate& cert) {
  auto out = OpenOut(path);
  out << "n,e_n,inner_residual,bound,e_next,pass,distance_to_minimizer,global_bound,global_pass\n";
  const std::size_t rows = std::max(cert.steps.size(), cert.global.size());
  for (std::size_t n = 0; n < rows; ++n) {
    std::vector<std::string> cells = {std::to_string(n)};
    if (n < cert.steps.size()) {
      const TrackingStep& s = cert.steps[n];
      cells.insert(cells.end(), {FormatNumber(s.e_n), FormatNumber(s.inner_residual),
                                 FormatNumber(s.bound), FormatNumber(s.e_next),
                                 s.pass ? "1" : "0"});
    } else {
      cells.insert(cells.end(), {FormatNumber(cert.errors[n]), "nan", "nan", "nan", ""});
    }
    if (n < cert.global.size()) {
      const GlobalStep& g = cert.global[n];
      cells.insert(cells.end(), {FormatNumber(g.distance_to_minimizer), FormatNumber(g.bound),
                                 g.pass ? "1" : "0"});
    } else {
      cells.insert(cells.end(), {"nan", "nan", ""});
    }
    out << Join(cells) << '\n';
  }
}

std::string CertificateReport(const TrackingCertificate& cert, const TheoryConstants& c) {
  std::string out;
  out += fmt::format("tau {}\nrho {}\nepsilon {}\n", FormatNumber(c.tau), FormatNumber(c.rho),
                     FormatNumber(c.epsilon));
  out += fmt::format("steps {}\nsup_error {}\n", cert.steps.size(), FormatNumber(cert.sup_error));
  int failed = 0;
  for (const auto& s : cert.steps) failed += s.pass ? 0 : 1;
  out += fmt::format("recurrence {} ({} failing steps)\n", cert.recurrence_pass ? "PASS" : "FAIL",
                     failed);
  if (cert.global.empty()) {
    out += "global n/a\n";
  } else {
    out += fmt::format("global {}\n", cert.global_pass ? "PASS" : "FAIL");
  }
  out += fmt::format("certificate {}\n", cert.passed() ? "PASS" : "FAIL");
  return out;
}

}  // namespace nmms
