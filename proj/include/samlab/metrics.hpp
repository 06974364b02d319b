#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace samlab {

struct MetricRow {
  std::string process;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double param_norm = 0.0;
  double grad_norm = 0.0;
  double lambda1 = 0.0;
  double alignment = 0.0;
  std::uint64_t hvp_count = 0;
  double wall_ms = 0.0;

  bool operator==(const MetricRow&) const = default;
};

// Fixed column order of every metrics CSV.
const std::vector<std::string>& metric_columns();
std::string csv_header();

// Shortest round-trip form (%.17g); "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);
double parse_double_field(const std::string& field);

std::string format_row(const MetricRow& row);
MetricRow parse_row(const std::string& line);

struct CsvDocument {
  std::vector<std::pair<std::string, std::string>> comments;  // "# key=value" lines
  std::vector<MetricRow> rows;
};

// Comment lines may appear anywhere; the header row is mandatory.
CsvDocument parse_csv(std::istream& in);

// Streams rows as they are produced. Enforces strictly increasing steps and
// nondecreasing hvp_count per (process, seed). Every line is flushed so a run
// that aborts leaves a readable partial file.
class MetricWriter {
 public:
  MetricWriter(std::ostream& out, const std::string& preamble);

  void comment(const std::string& key, const std::string& value);
  void write(const MetricRow& row);

 private:
  std::ostream& out_;
  std::map<std::pair<std::string, std::uint64_t>, std::pair<std::uint64_t, std::uint64_t>> last_;
};

}  // namespace samlab
