#include "samlab/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "samlab/errors.hpp"

namespace samlab {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"seeds", "0,1,2,3,4", "replicate seeds"},
      {"steps", "500", "optimizer steps per run"},
      {"eval_every", "10", "metric row cadence in steps"},
      {"fair_compute", "false", "SGD runs twice the step budget"},
      {"model.widths", "2,16,2", "layer widths: input, hidden..., output"},
      {"model.activation", "gelu", "gelu|relu"},
      {"model.loss", "xent", "xent|mse"},
      {"oracle.mode", "exact", "exact|fd derivative mode"},
      {"data.source", "synthetic", "synthetic|idx"},
      {"data.n_train", "256", "synthetic training rows"},
      {"data.n_test", "256", "synthetic test rows"},
      {"data.classes", "2", "synthetic classes"},
      {"data.margin", "3", "distance between synthetic class means"},
      {"data.seed", "0", "synthetic data seed"},
      {"data.train_images", "", "IDX training images"},
      {"data.train_labels", "", "IDX training labels"},
      {"data.test_images", "", "IDX test images"},
      {"data.test_labels", "", "IDX test labels"},
      {"data.limit", "0", "keep the first N IDX rows (0 keeps all)"},
      {"data.batch_size", "128", "mini-batch size"},
      {"data.policy", "shuffle", "shuffle|with-replacement|full-enumeration|partition-sample"},
      {"opt.method", "sam", "sgd|sam|eigensam|reversesam|egr"},
      {"opt.lr", "0.1", "learning rate"},
      {"opt.rho", "0.05", "perturbation radius"},
      {"opt.alpha", "0.2", "Eigen-SAM alignment strength"},
      {"opt.p", "100", "eigenvector refresh interval"},
      {"opt.q", "5", "power iterations per refresh"},
      {"opt.momentum", "0.9", "momentum"},
      {"opt.weight_decay", "5e-5", "decoupled weight decay"},
      {"opt.schedule", "cosine", "constant|cosine"},
      {"opt.grad_floor", "1e-12", "gradient floor below which the perturbation is zero"},
      {"opt.power_shift", "0", "Eigen-SAM power iteration on H + shift I"},
      {"probe.q", "20", "power iterations for the lambda1 and alignment metrics"},
      {"probe.shift", "0", "shift for the lambda1 metric power iteration"},
      {"probe.lambda1", "true", "log lambda1"},
      {"probe.alignment", "true", "log perturbation-eigenvector alignment"},
      {"sde.processes", "discrete-sam,sde2,sde3", "processes to simulate"},
      {"sde.lr", "0.01", "discrete step size eta"},
      {"sde.rho", "0.2", "SAM radius"},
      {"sde.steps", "2000", "horizon in discrete steps"},
      {"sde.dt", "0", "integrator step (0 means eta)"},
      {"sde.diffusion", "auto", "auto|exact|sampled|off"},
      {"sde.batch_size", "32", "partition block size for expectations"},
      {"sde.aligned_q", "50", "power iterations for the aligned drifts"},
      {"spectrum.k", "5", "eigenpairs"},
      {"spectrum.q", "200", "power iterations per eigenpair"},
      {"spectrum.tol", "1e-6", "relative residual for convergence"},
      {"spectrum.trace_probes", "100", "Hutchinson probes (0 disables)"},
      {"moments.problem", "quartic", "quartic|quadratic|toy2"},
      {"moments.eta", "0.01", "step size for the one-step moments"},
      {"moments.rho_grid", "0.02,0.04,0.08,0.16", "radii"},
      {"power.q_max", "30", "largest power iteration count"},
      {"power.reps", "5", "random starts per q"},
      {"power.ref_q", "500", "iterations for the reference eigenvector"},
      {"bound.f_s", "0.1", "empirical loss"},
      {"bound.lambda1", "10", "top Hessian eigenvalue"},
      {"bound.param_norm", "10", "parameter norm |x|"},
      {"bound.d", "100", "parameter count"},
      {"bound.n", "10000", "sample count"},
      {"bound.sigma", "0.01", "posterior standard deviation"},
      {"bound.L", "1", "loss bound"},
      {"bound.C", "1", "third-derivative bound"},
      {"bound.delta", "0.05", "confidence"},
      {"conv.beta", "1", "smoothness"},
      {"conv.gap", "1", "initial gap f(x0) - f*"},
      {"conv.sigma2", "1", "batch gradient variance"},
      {"conv.T", "100", "steps"},
      {"conv.rho", "0", "perturbation radius"},
      {"conv.alpha", "0", "alignment strength"},
      {"align.omega", "0.8", "cosine between gradient and eigenvector"},
  };
  return schema;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool known(const std::string& key) {
  const auto& schema = config_schema();
  return std::any_of(schema.begin(), schema.end(),
                     [&](const ConfigKey& k) { return k.name == key; });
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* kind) {
  throw ConfigError("key '" + key + "': '" + value + "' is not " + kind);
}

double parse_double(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE) bad_value(key, s, "a number");
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) bad_value(key, s, "an integer");
  return v;
}

}  // namespace

Config::Config() {
  for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::load(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // No value contains '#', so everything after it is a comment.
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (!known(key)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown config key '" + key +
                        "'");
    }
    values_[key] = trim(t.substr(eq + 1));
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  load(in, path);
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const { return parse_double(key, get(key)); }

std::int64_t Config::get_int(const std::string& key) const { return parse_int(key, get(key)); }

std::size_t Config::get_size(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) bad_value(key, get(key), "a nonnegative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::get_u64(const std::string& key) const { return get_size(key); }

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) out.push_back(parse_double(key, s));
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& s : get_list(key)) {
    const std::int64_t v = parse_int(key, s);
    if (v < 0) bad_value(key, s, "a nonnegative integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::uint64_t> Config::seeds() const {
  std::vector<std::uint64_t> out;
  std::set<std::uint64_t> seen;
  for (std::size_t s : get_sizes("seeds")) {
    if (!seen.insert(s).second) throw ConfigError("seed " + std::to_string(s) + " is repeated");
    out.push_back(s);
  }
  if (out.empty()) throw ConfigError("at least one seed is required");
  return out;
}

std::vector<std::pair<std::string, std::string>> Config::resolved() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_schema()) out.emplace_back(k.name, values_.at(k.name));
  return out;
}

std::string Config::echo() const {
  std::string out;
  for (const auto& [k, v] : resolved()) out += "# " + k + "=" + v + "\n";
  return out;
}

}  // namespace samlab
