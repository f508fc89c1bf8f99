#include "fhmm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fhmm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace and CR
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Dataset load_csv(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file " + path);
  const auto header = split_csv_line(line);
  std::map<std::string, int> col;
  for (size_t i = 0; i < header.size(); ++i) col[header[i]] = static_cast<int>(i);
  for (const char* req : {"timestamp", "pm10", "wind", "visibility", "humidity"})
    if (!col.count(req))
      throw std::runtime_error("load_csv: missing required column '" +
                               std::string(req) + "'");
  const bool has_labels = col.count("label_haze") && col.count("label_dust");

  std::vector<std::string> timestamps;
  std::vector<std::array<double, 4>> raw;  // NaN marks missing
  std::vector<std::array<int, 2>> labels;
  const std::array<const char*, 4> feat_cols = {"pm10", "wind", "visibility",
                                                "humidity"};
  int line_no = 1;
  Dataset out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ++out.report.input_rows;
    const auto f = split_csv_line(line);
    if (f.size() < header.size())
      throw std::runtime_error("load_csv: short row at line " +
                               std::to_string(line_no));
    std::array<double, 4> row;
    for (int i = 0; i < 4; ++i) {
      const std::string& cell = f[col[feat_cols[i]]];
      if (is_missing(cell)) {
        row[i] = kMissing;
        continue;
      }
      try {
        size_t pos = 0;
        row[i] = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: unparsable value '" + cell +
                                 "' at line " + std::to_string(line_no));
      }
    }
    timestamps.push_back(f[col["timestamp"]]);
    raw.push_back(row);
    if (has_labels) {
      auto parse_label = [&](const char* name) {
        const std::string& cell = f[col[name]];
        if (is_missing(cell)) return 0;
        if (cell != "0" && cell != "1")
          throw std::runtime_error("load_csv: label '" + cell +
                                   "' at line " + std::to_string(line_no));
        return cell == "1" ? 1 : 0;
      };
      labels.push_back({parse_label("label_haze"), parse_label("label_dust")});
    }
  }

  const int T = static_cast<int>(raw.size());
  for (int t = 1; t < T; ++t)
    if (timestamps[t] <= timestamps[t - 1])
      throw std::runtime_error("load_csv: timestamps not strictly increasing at line " +
                               std::to_string(t + 2));

  // Interpolate short gaps per column, mark long ones for dropping.
  std::vector<bool> drop(T, false);
  for (int i = 0; i < 4; ++i) {
    int t = 0;
    while (t < T) {
      if (!std::isnan(raw[t][i])) {
        ++t;
        continue;
      }
      int e = t;
      while (e < T && std::isnan(raw[e][i])) ++e;
      const int gap = e - t;
      const bool interior = t > 0 && e < T;
      if (interior && gap <= opts.max_gap) {
        const double lo = raw[t - 1][i], hi = raw[e][i];
        for (int u = t; u < e; ++u) {
          raw[u][i] = lo + (hi - lo) * (u - t + 1) / (gap + 1);
          ++out.report.imputed_values;
        }
      } else {
        for (int u = t; u < e; ++u) drop[u] = true;
      }
      t = e;
    }
  }

  for (int t = 0; t < T; ++t) {
    if (drop[t]) {
      ++out.report.dropped_rows;
      continue;
    }
    ObservationRecord rec;
    rec.timestamp = timestamps[t];
    rec.pm10 = raw[t][0];
    rec.wind = std::max(raw[t][1], opts.wind_floor);
    rec.visibility = raw[t][2];
    rec.humidity = raw[t][3];
    if (has_labels) {
      rec.label_haze = labels[t][0];
      rec.label_dust = labels[t][1];
    }
    out.records.push_back(rec);
  }
  out.report.output_rows = static_cast<int>(out.records.size());

  out.feature_matrix.resize(out.report.output_rows, 4);
  if (has_labels) out.labels = Eigen::MatrixXi(out.report.output_rows, 2);
  for (int t = 0; t < out.report.output_rows; ++t) {
    const auto& r = out.records[t];
    out.feature_matrix.row(t) << r.pm10, r.wind, r.visibility, r.humidity;
    if (has_labels) {
      (*out.labels)(t, 0) = *r.label_haze;
      (*out.labels)(t, 1) = *r.label_dust;
    }
  }
  return out;
}

InflationEstimate detect_inflation(const Dataset& data) {
  InflationEstimate est;
  const auto vis = data.feature_matrix.col(2);
  if (vis.size() == 0) return est;
  std::vector<double> v(vis.data(), vis.data() + vis.size());
  std::sort(v.begin(), v.end());
  // modal maximal value: the largest value that repeats, else the maximum
  double best = v.back();
  size_t best_count = 1, i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    if (j - i >= best_count) {  // >= keeps the largest among equal counts
      best_count = j - i;
      best = v[i];
    }
    i = j;
  }
  est.c = best;
  size_t at = 0;
  for (double x : v) at += x == best;
  est.fraction = static_cast<double>(at) / v.size();
  est.warn_low = est.fraction < 0.01;
  return est;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp);
    out << content;
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("atomic_write: rename failed for " + path);
}

}  // namespace fhmm
