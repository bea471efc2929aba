#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amsa/msa.hpp"

namespace amsa::csv {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kLossHistoryHeader = "run_id,iteration,layers,train_loss,test_loss,lambda_sq,wall_ms";
inline constexpr const char* kSummaryHeader = "run_id,min_train_loss,argmin_iteration,test_loss_at_best,final_layers";

/// 17 significant digits, enough to round-trip a double.
inline std::string number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

struct LossHistoryRow {
  std::size_t run_id = 0;
  IterationRow row;
};

inline std::string format_loss_row(std::size_t run_id, const IterationRow& r) {
  std::string line = std::to_string(run_id) + ',' + std::to_string(r.iteration) + ',' + std::to_string(r.layers) +
                     ',' + number(r.train_loss) + ',' + number(r.test_loss) + ',' + number(r.lambda_sq) + ',' +
                     number(r.wall_ms);
  return line;
}

inline void write_loss_history(const std::filesystem::path& path, std::span<const LossHistoryRow> rows) {
  std::ofstream out = open_for_write(path);
  out << kLossHistoryHeader << '\n';
  for (const auto& r : rows) out << format_loss_row(r.run_id, r.row) << '\n';
  finish(out, path);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

inline LossHistoryRow parse_loss_row(const std::string& line) {
  const auto f = split(line);
  if (f.size() != 7) throw std::invalid_argument("loss_history: expected 7 fields in '" + line + "'");
  LossHistoryRow r;
  r.run_id = std::stoul(f[0]);
  r.row.iteration = std::stoul(f[1]);
  r.row.layers = std::stoul(f[2]);
  r.row.train_loss = std::stod(f[3]);
  r.row.test_loss = std::stod(f[4]);
  r.row.lambda_sq = std::stod(f[5]);
  r.row.wall_ms = std::stod(f[6]);
  return r;
}

inline std::vector<LossHistoryRow> read_loss_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kLossHistoryHeader) throw IoError("bad header in " + path.string());
  std::vector<LossHistoryRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_loss_row(line));
  }
  return rows;
}

struct SummaryRow {
  std::size_t run_id = 0;
  RunSummary summary{};
};

inline void write_summary(const std::filesystem::path& path, std::span<const SummaryRow> rows) {
  std::ofstream out = open_for_write(path);
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.run_id << ',' << number(r.summary.min_train_loss) << ',' << r.summary.argmin_iteration << ','
        << number(r.summary.test_loss_at_best) << ',' << r.summary.final_layers << '\n';
  }
  finish(out, path);
}

struct PredictionRow {
  std::size_t run_id = 0;
  std::vector<double> x;
  double y_true = 0.0;
  double y_pred = 0.0;
};

inline void write_predictions(const std::filesystem::path& path, std::size_t input_dim,
                              std::span<const PredictionRow> rows) {
  std::ofstream out = open_for_write(path);
  out << "run_id";
  for (std::size_t k = 1; k <= input_dim; ++k) out << ",x" << k;
  out << ",y_true,y_pred\n";
  for (const auto& r : rows) {
    out << r.run_id;
    for (const double x : r.x) out << ',' << number(x);
    out << ',' << number(r.y_true) << ',' << number(r.y_pred) << '\n';
  }
  finish(out, path);
}

}  // namespace amsa::csv
