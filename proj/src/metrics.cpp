#include "samlab/metrics.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace samlab {

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {
      "process",    "seed",      "step",      "train_loss", "test_loss", "test_accuracy",
      "param_norm", "grad_norm", "lambda1",   "alignment",  "hvp_count", "wall_ms"};
  return cols;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : metric_columns()) out += (out.empty() ? "" : ",") + c;
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double_field(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (field.empty() || *end != '\0') throw std::invalid_argument("bad numeric field '" + field + "'");
  return v;
}

namespace {

std::uint64_t parse_u64(const std::string& field) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(field.c_str(), &end, 10);
  if (field.empty() || *end != '\0') throw std::invalid_argument("bad integer field '" + field + "'");
  return v;
}

}  // namespace

std::string format_row(const MetricRow& r) {
  std::string out = r.process;
  auto add = [&](const std::string& s) { out += "," + s; };
  add(std::to_string(r.seed));
  add(std::to_string(r.step));
  add(format_double(r.train_loss));
  add(format_double(r.test_loss));
  add(format_double(r.test_accuracy));
  add(format_double(r.param_norm));
  add(format_double(r.grad_norm));
  add(format_double(r.lambda1));
  add(format_double(r.alignment));
  add(std::to_string(r.hvp_count));
  add(format_double(r.wall_ms));
  return out;
}

MetricRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (f.size() != metric_columns().size()) {
    throw std::invalid_argument("metrics row has " + std::to_string(f.size()) + " fields");
  }
  MetricRow r;
  r.process = f[0];
  r.seed = parse_u64(f[1]);
  r.step = parse_u64(f[2]);
  r.train_loss = parse_double_field(f[3]);
  r.test_loss = parse_double_field(f[4]);
  r.test_accuracy = parse_double_field(f[5]);
  r.param_norm = parse_double_field(f[6]);
  r.grad_norm = parse_double_field(f[7]);
  r.lambda1 = parse_double_field(f[8]);
  r.alignment = parse_double_field(f[9]);
  r.hvp_count = parse_u64(f[10]);
  r.wall_ms = parse_double_field(f[11]);
  return r;
}

CsvDocument parse_csv(std::istream& in) {
  CsvDocument doc;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(line.find_first_not_of("# ") == std::string::npos
                                         ? line.size()
                                         : line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        doc.comments.emplace_back(body, "");
      } else {
        doc.comments.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    if (!header) {
      if (line != csv_header()) throw std::invalid_argument("unexpected CSV header: " + line);
      header = true;
      continue;
    }
    doc.rows.push_back(parse_row(line));
  }
  if (!header) throw std::invalid_argument("metrics CSV has no header row");
  return doc;
}

MetricWriter::MetricWriter(std::ostream& out, const std::string& preamble) : out_(out) {
  out_ << preamble << csv_header() << '\n';
  out_.flush();
}

void MetricWriter::comment(const std::string& key, const std::string& value) {
  out_ << "# " << key << '=' << value << '\n';
  out_.flush();
}

void MetricWriter::write(const MetricRow& row) {
  const auto key = std::make_pair(row.process, row.seed);
  const auto it = last_.find(key);
  if (it != last_.end()) {
    if (row.step <= it->second.first) throw std::logic_error("metric steps must increase");
    if (row.hvp_count < it->second.second) throw std::logic_error("hvp_count must not decrease");
  }
  last_[key] = {row.step, row.hvp_count};
  out_ << format_row(row) << '\n';
  out_.flush();
}

}  // namespace samlab
