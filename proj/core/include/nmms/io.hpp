#pragma once

// CSV emission and parsing. Every floating-point value is written with 17
// significant digits so files round-trip exactly.

#include <string>
#include <vector>

#include "nmms/hilbert.hpp"
#include "nmms/mms.hpp"
#include "nmms/network.hpp"
#include "nmms/reference.hpp"
#include "nmms/theory.hpp"

namespace nmms {

std::string FormatNumber(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws IngestionError when absent.
  std::size_t Column(const std::string& name) const;
  /// Numeric cell; throws IngestionError with 1-based location (the header is row 1).
  double Number(std::size_t row, std::size_t column) const;
};

/// Comma-separated, first line is the header, blank lines and lines starting
/// with '#' are skipped. Cells are trimmed; quoting is not supported.
CsvTable ReadCsv(const std::string& path);

/// Columns x_1..x_d, value (or value_1..value_C), weight.
void WriteGridFunctionCsv(const std::string& path, const GridFunction& u);
GridFunction ReadGridFunctionCsv(const std::string& path);

struct Standardization {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> stddev;  // population convention, 1/N
};

struct IngestedData {
  GridPtr grid;
  GridFunction target;
  Standardization transform;  // empty when standardize is off
};

/// Reads the named feature columns and target column; grid weights are 1/N.
/// With `standardize`, every feature and the target is mapped to zero mean
/// and unit population variance.
IngestedData IngestCsv(const std::string& path, const std::vector<std::string>& feature_columns,
                       const std::string& target_column, bool standardize);

void WriteStandardization(const std::string& path, const Standardization& transform);

/// First line "# mlp input=.. hidden=a;b output=.. activation=.. init=..",
/// then one parameter per line.
void WriteCheckpoint(const std::string& path, const MlpModel& model);
MlpModel ReadCheckpoint(const std::string& path);

/// Column order of trajectory CSVs; wall_time is always last.
const std::vector<std::string>& TrajectoryColumns();
void WriteTrajectoryCsv(const std::string& path, const std::vector<MmsRecord>& records);

/// Rows shaped like WriteTrajectoryCsv output for an exact trajectory: energy,
/// objectives and step norms filled in, network columns NaN, tracking error 0.
std::vector<MmsRecord> ReferenceRecords(const ExactTrajectory& traj,
                                        const EnergyFunctional& energy);

/// One row per iterate: step, u_0 .. u_{M-1} (sample-major values).
void WriteIteratesCsv(const std::string& path, const std::vector<GridFunction>& iterates);
std::vector<GridFunction> ReadIteratesCsv(const std::string& path, const GridPtr& grid,
                                          int channels = 1);

void WriteCertificateCsv(const std::string& path, const TrackingCertificate& cert);
std::string CertificateReport(const TrackingCertificate& cert, const TheoryConstants& c);

}  // namespace nmms
