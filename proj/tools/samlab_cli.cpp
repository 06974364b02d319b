// Command-line front end: samlab <subcommand> [--config PATH] [--out DIR]
// [--seed S[,S...]] [key=value ...]. Exit codes: 0 success, 2 configuration
// or input error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "samlab/config.hpp"
#include "samlab/errors.hpp"
#include "samlab/runner.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::string seeds;
  std::vector<std::string> overrides;
};

samlab::Config resolve(const Options& opts) {
  samlab::Config cfg;
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  if (!opts.seeds.empty()) cfg.set("seeds", opts.seeds);
  return cfg;
}

std::filesystem::path prepare_out(const Options& opts, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw samlab::ConfigError("cannot create output directory " + opts.out_dir);
  return std::filesystem::path(opts.out_dir) / file;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw samlab::ConfigError("cannot write " + path.string());
  return out;
}

int dispatch(const std::string& name, const Options& opts) {
  const samlab::Config cfg = resolve(opts);
  if (name == "train" || name == "simulate-sde") {
    const auto path = prepare_out(opts, "metrics.csv");
    std::ofstream out = open_out(path);
    if (name == "train") {
      samlab::run_train(cfg, out);
    } else {
      samlab::run_simulate_sde(cfg, out);
    }
    std::cout << "wrote " << path.string() << '\n';
    return 0;
  }
  nlohmann::json report;
  if (name == "spectrum") report = samlab::run_spectrum(cfg);
  else if (name == "probe-moments") report = samlab::run_probe_moments(cfg);
  else if (name == "probe-power") report = samlab::run_probe_power(cfg);
  else if (name == "bound") report = samlab::run_bound(cfg);
  else if (name == "align-range") report = samlab::run_align_range(cfg);
  const auto path = prepare_out(opts, "report.json");
  std::ofstream out = open_out(path);
  out << report.dump(2) << '\n';
  std::cout << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpness-aware optimization laboratory"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train an MLP and write metrics.csv"},
      {"simulate-sde", "simulate discrete SAM and its SDEs, write metrics.csv"},
      {"spectrum", "deflated Hessian spectrum and trace, write report.json"},
      {"probe-moments", "one-step moment errors against rho, write report.json"},
      {"probe-power", "eigenvector alignment against power iterations, write report.json"},
      {"bound", "PAC-Bayes and convergence bounds, write report.json"},
      {"align-range", "admissible alpha interval for a cosine, write report.json"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_path, "key=value config file");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seeds, "seed list, e.g. 0,1,2");
    sub->add_option("overrides", opts.overrides, "key=value overrides");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return dispatch(name, opts);
  } catch (const samlab::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const samlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const samlab::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const samlab::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  }
}
