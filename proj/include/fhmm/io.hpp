#ifndef FHMM_IO_HPP
#define FHMM_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "fhmm/model.hpp"

namespace fhmm {

struct ObservationRecord {
  std::string timestamp;
  double pm10 = 0.0;
  double wind = 0.0;
  double visibility = 0.0;
  double humidity = 0.0;
  std::optional<int> label_haze;
  std::optional<int> label_dust;
};

struct IngestionReport {
  int input_rows = 0;
  int output_rows = 0;
  int imputed_values = 0;
  int dropped_rows = 0;
  std::vector<std::string> warnings;
};

struct Dataset {
  std::vector<ObservationRecord> records;
  Matrix feature_matrix;                    // T x 4, raw positive values
  std::optional<Eigen::MatrixXi> labels;    // T x 2 when label columns present
  IngestionReport report;
};

struct LoadOptions {
  double wind_floor = 0.05;  // replaces zero wind before log transforms
  int max_gap = 3;           // longest run of missing values to interpolate
};

/// Parses a CSV with columns timestamp, pm10, wind, visibility, humidity and
/// optional label_haze, label_dust. Missing numeric cells (empty or NA) are
/// linearly interpolated for gaps of up to max_gap steps; longer gaps drop
/// the rows.
Dataset load_csv(const std::string& path, const LoadOptions& opts = {});

struct InflationEstimate {
  double c = 0.0;
  double fraction = 0.0;
  bool warn_low = false;  // fraction below 1%
};

InflationEstimate detect_inflation(const Dataset& data);

/// Writes content atomically (temp file in the same directory + rename).
void atomic_write(const std::string& path, const std::string& content);

}  // namespace fhmm

#endif
