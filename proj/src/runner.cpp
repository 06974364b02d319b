#include "samlab/runner.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "samlab/bounds.hpp"
#include "samlab/errors.hpp"
#include "samlab/hessian.hpp"
#include "samlab/objectives.hpp"
#include "samlab/rng.hpp"
#include "samlab/sde.hpp"

namespace samlab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json config_json(const Config& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.resolved()) j[k] = v;
  return j;
}

Dataset truncate(Dataset d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return d;
  const std::size_t dim = d.input_dim();
  d.inputs.shape[0] = limit;
  d.inputs.data.resize(limit * dim);
  d.labels.resize(limit);
  return d;
}

double accuracy(const Mlp& model, const ParamVector& x, const Dataset& data) {
  if (data.size() == 0) return kNaN;
  const Tensor logits = model.predict(x, data.inputs);
  const std::size_t k = logits.cols();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    }
    if (static_cast<int>(best) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// Full-dataset quantities shared by every metric row of a run.
struct Evaluator {
  const Problem& problem;
  LossOracle train_full;
  LossOracle test_full;
  std::size_t probe_q;
  double probe_shift;
  bool want_lambda1;
  bool want_alignment;

  Evaluator(const Problem& p, const Config& cfg)
      : problem(p),
        train_full(p.model, std::make_shared<const Batch>(full_batch(p.train)), p.mode),
        test_full(p.model, std::make_shared<const Batch>(full_batch(p.test)), p.mode),
        probe_q(cfg.get_size("probe.q")),
        probe_shift(cfg.get_double("probe.shift")),
        want_lambda1(cfg.get_bool("probe.lambda1")),
        want_alignment(cfg.get_bool("probe.alignment")) {}

  EigenEstimate top(const LossOracle& oracle, const ParamVector& x, std::uint64_t seed,
                    std::uint64_t salt, std::uint64_t step) const {
    return power_iteration(hessian_operator(oracle, x), probe_q,
                           random_unit(x.layout(), stream_key(seed, Stream::Probe, salt), step),
                           probe_shift);
  }

  // Losses, norms and lambda1 of the full training set at x.
  MetricRow base_row(const std::string& process, std::uint64_t seed, std::uint64_t step,
                     const ParamVector& x, std::optional<EigenEstimate>* full_top) const {
    MetricRow r;
    r.process = process;
    r.seed = seed;
    r.step = step;
    const auto [f, g] = train_full.loss_and_grad(x);
    r.train_loss = f;
    r.grad_norm = g.norm();
    r.test_loss = problem.test.size() ? test_full.loss(x) : kNaN;
    r.test_accuracy = accuracy(*problem.model, x, problem.test);
    r.param_norm = x.norm();
    r.lambda1 = kNaN;
    r.alignment = kNaN;
    if (want_lambda1) {
      EigenEstimate est = top(train_full, x, seed, 0, step);
      r.lambda1 = est.value;
      if (full_top) *full_top = std::move(est);
    }
    return r;
  }

  double alignment(const ParamVector& perturbation, const ParamVector& v) const {
    if (perturbation.norm() < 1e-12) return kNaN;
    return align(perturbation, v).value;
  }
};

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

BatchSampler sampler_for(const Config& cfg, std::uint64_t seed) {
  return BatchSampler{cfg.get_size("data.batch_size"), seed,
                      parse_policy(cfg.get("data.policy"))};
}

}  // namespace

MlpSpec model_spec(const Config& cfg) {
  MlpSpec spec;
  spec.widths = cfg.get_sizes("model.widths");
  spec.activation = parse_activation(cfg.get("model.activation"));
  spec.head = parse_loss_head(cfg.get("model.loss"));
  spec.validate();
  return spec;
}

Problem build_problem(const Config& cfg) {
  Problem p;
  p.spec = model_spec(cfg);
  const std::string mode = cfg.get("oracle.mode");
  if (mode == "exact") {
    p.mode = DerivativeMode::Exact;
  } else if (mode == "fd") {
    p.mode = DerivativeMode::FiniteDifference;
  } else {
    throw ConfigError("oracle.mode must be exact|fd, got '" + mode + "'");
  }
  const std::string source = cfg.get("data.source");
  if (source == "synthetic") {
    const std::size_t dim = p.spec.widths.front();
    const std::size_t classes = cfg.get_size("data.classes");
    const double margin = cfg.get_double("data.margin");
    const std::uint64_t seed = cfg.get_u64("data.seed");
    p.train = gen_synthetic(cfg.get_size("data.n_train"), dim, classes, margin, seed, Split::Train);
    const std::size_t n_test = cfg.get_size("data.n_test");
    if (n_test > 0) {
      p.test = gen_synthetic(n_test, dim, classes, margin, seed, Split::Test);
    } else {
      p.test.classes = classes;
      p.test.split = Split::Test;
      p.test.inputs = Tensor(Shape{0, dim});
    }
  } else if (source == "idx") {
    const std::size_t limit = cfg.get_size("data.limit");
    p.train = truncate(load_idx(cfg.get("data.train_images"), cfg.get("data.train_labels")), limit);
    p.test = truncate(load_idx(cfg.get("data.test_images"), cfg.get("data.test_labels")), limit);
    p.test.split = Split::Test;
  } else {
    throw ConfigError("data.source must be synthetic|idx, got '" + source + "'");
  }
  if (p.spec.widths.front() != p.train.input_dim()) {
    throw ConfigError("model input width " + std::to_string(p.spec.widths.front()) +
                      " does not match data dimension " + std::to_string(p.train.input_dim()));
  }
  if (p.spec.widths.back() != p.train.classes) {
    throw ConfigError("model output width " + std::to_string(p.spec.widths.back()) +
                      " does not match " + std::to_string(p.train.classes) + " classes");
  }
  p.model = std::make_shared<const Mlp>(p.spec);
  return p;
}

std::size_t train_steps(const Config& cfg) {
  const std::size_t steps = cfg.get_size("steps");
  const bool doubled = cfg.get_bool("fair_compute") && parse_method(cfg.get("opt.method")) == Method::Sgd;
  return doubled ? 2 * steps : steps;
}

OptimizerConfig optimizer_config(const Config& cfg, std::uint64_t seed) {
  OptimizerConfig o;
  o.method = parse_method(cfg.get("opt.method"));
  o.lr = cfg.get_double("opt.lr");
  o.rho = cfg.get_double("opt.rho");
  o.alpha = cfg.get_double("opt.alpha");
  o.p = cfg.get_size("opt.p");
  o.q = cfg.get_size("opt.q");
  o.momentum = cfg.get_double("opt.momentum");
  o.weight_decay = cfg.get_double("opt.weight_decay");
  o.schedule = parse_schedule(cfg.get("opt.schedule"));
  o.total_steps = train_steps(cfg);
  o.grad_floor = cfg.get_double("opt.grad_floor");
  o.power_shift = cfg.get_double("opt.power_shift");
  o.seed = seed;
  o.validate();
  return o;
}

ParamVector train_to(const Problem& problem, const Config& cfg, std::uint64_t seed,
                     std::size_t steps) {
  const OptimizerConfig opt = optimizer_config(cfg, seed);
  const BatchSampler sampler = sampler_for(cfg, seed);
  ParamVector x = init_params(problem.spec, seed);
  OptimizerState state;
  for (std::size_t k = 0; k < steps; ++k) {
    const LossOracle oracle(problem.model,
                            std::make_shared<const Batch>(sample_batch(sampler, problem.train, k)),
                            problem.mode);
    StepResult res = step(x, oracle, opt, state);
    x = std::move(res.x);
    state = std::move(res.state);
  }
  return x;
}

void run_train(const Config& cfg, std::ostream& csv) {
  const Problem problem = build_problem(cfg);
  const Evaluator eval(problem, cfg);
  const std::size_t every = cfg.get_size("eval_every");
  if (every == 0) throw ConfigError("eval_every must be >= 1");
  const std::size_t total = train_steps(cfg);
  const auto seeds = cfg.seeds();
  const std::string process = cfg.get("opt.method");
  optimizer_config(cfg, 0);  // validate before any output

  MetricWriter out(csv, cfg.echo());
  out.comment("param_count", std::to_string(problem.spec.param_count()));
  for (std::uint64_t seed : seeds) {
    const OptimizerConfig opt = optimizer_config(cfg, seed);
    const BatchSampler sampler = sampler_for(cfg, seed);
    ParamVector x = init_params(problem.spec, seed);
    OptimizerState state;
    const Stopwatch clock;
    try {
      for (std::size_t k = 0; k <= total; ++k) {
        const bool log = k % every == 0 || k == total;
        const LossOracle oracle(
            problem.model,
            std::make_shared<const Batch>(sample_batch(sampler, problem.train, k)), problem.mode);
        // The row at step k describes x_k and the perturbation step k applies;
        // after the last update the step is evaluated but not taken.
        StepResult res = step(x, oracle, opt, state);
        if (log) {
          MetricRow row = eval.base_row(process, seed, k, x, nullptr);
          row.hvp_count = state.hvp_count;
          if (eval.want_alignment) {
            const EigenEstimate v = eval.top(oracle, x, seed, 1, k);
            row.alignment = eval.alignment(res.perturbation, v.vector);
          }
          row.wall_ms = clock.ms();
          out.write(row);
        }
        if (k == total) break;
        x = std::move(res.x);
        state = std::move(res.state);
      }
    } catch (const NumericError& e) {
      out.comment("error", e.what());
      throw;
    }
  }
}

void run_simulate_sde(const Config& cfg, std::ostream& csv) {
  const Problem problem = build_problem(cfg);
  const Evaluator eval(problem, cfg);
  const std::size_t every = cfg.get_size("eval_every");
  if (every == 0) throw ConfigError("eval_every must be >= 1");
  const std::size_t steps = cfg.get_size("sde.steps");
  const auto seeds = cfg.seeds();
  const auto processes = cfg.get_list("sde.processes");
  if (processes.empty()) throw ConfigError("sde.processes is empty");

  SdeConfig base;
  base.eta = cfg.get_double("sde.lr");
  base.rho = cfg.get_double("sde.rho");
  base.dt = cfg.get_double("sde.dt");
  base.steps = steps;
  base.aligned_q = cfg.get_size("sde.aligned_q");
  base.tau = cfg.get_double("opt.grad_floor");
  const std::string diffusion = cfg.get("sde.diffusion");
  const std::size_t d = problem.spec.param_count();
  base.diffusion = diffusion == "auto"
                       ? (d <= kExactDiffusionLimit ? DiffusionMode::Exact : DiffusionMode::Sampled)
                       : parse_diffusion(diffusion);
  base.validate();
  if (base.diffusion == DiffusionMode::Exact && d > kExactDiffusionLimit) {
    throw DimensionTooLarge("exact diffusion needs d <= 512, got " + std::to_string(d));
  }
  const double ratio = base.eta / base.step_size();
  const auto substeps = static_cast<std::size_t>(std::llround(ratio));
  if (substeps < 1 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9 * ratio) {
    throw ConfigError("sde.dt must divide sde.lr into a whole number of substeps");
  }
  for (const auto& name : processes) {
    if (name != "discrete-sam") parse_sde_process(name);
  }

  const std::size_t batch = cfg.get_size("sde.batch_size");
  const OracleFamily family = partition_family(problem.model, problem.train, batch, problem.mode);

  OptimizerConfig sam;
  sam.method = Method::Sam;
  sam.lr = base.eta;
  sam.rho = base.rho;
  sam.grad_floor = base.tau;
  sam.validate();

  MetricWriter out(csv, cfg.echo());
  out.comment("param_count", std::to_string(d));
  out.comment("diffusion_mode", to_string(base.diffusion));
  out.comment("partition_batches", std::to_string(family.size()));
  for (const auto& w : base.warnings()) out.comment("warning", w);

  for (const auto& name : processes) {
    const bool discrete = name == "discrete-sam";
    for (std::uint64_t seed : seeds) {
      SdeConfig scfg = base;
      scfg.seed = seed;
      if (!discrete) scfg.process = parse_sde_process(name);
      const BatchSampler sampler{batch, seed, SamplingPolicy::PartitionSample};
      ParamVector x = init_params(problem.spec, seed);
      OptimizerState state;
      double clipped_max = 0.0;
      const Stopwatch clock;
      try {
        for (std::size_t k = 0; k <= steps; ++k) {
          if (k % every == 0 || k == steps) {
            std::optional<EigenEstimate> top;
            MetricRow row = eval.base_row(name, seed, k, x, &top);
            if (eval.want_alignment) {
              const ParamVector g = eval.train_full.grad(x);
              const EigenEstimate v = top ? *top : eval.top(eval.train_full, x, seed, 0, k);
              row.alignment = eval.alignment(sam_perturbation(g, base.tau), v.vector);
            }
            row.wall_ms = clock.ms();
            if (!discrete && base.diffusion == DiffusionMode::Exact) {
              out.comment("clipped_mass",
                          name + " seed=" + std::to_string(seed) + " step=" + std::to_string(k) +
                              " max=" + format_double(clipped_max));
              clipped_max = 0.0;
            }
            out.write(row);
          }
          if (k == steps) break;
          if (discrete) {
            const std::size_t b = batch_indices(sampler, problem.train.size(), k).front() / batch;
            StepResult res = sam_step(x, family[b], sam, state);
            x = std::move(res.x);
            state = std::move(res.state);
          } else {
            for (std::size_t s = 0; s < substeps; ++s) {
              SdeStepInfo info;
              x = sde_step(family, x, scfg, k * substeps + s, &info);
              clipped_max = std::max(clipped_max, info.clipped_mass);
            }
          }
        }
      } catch (const NumericError& e) {
        out.comment("error", e.what());
        throw;
      }
    }
  }
}

json run_spectrum(const Config& cfg) {
  const Problem problem = build_problem(cfg);
  const Evaluator eval(problem, cfg);
  const std::size_t k = cfg.get_size("spectrum.k");
  const std::size_t q = cfg.get_size("spectrum.q");
  const double tol = cfg.get_double("spectrum.tol");
  const std::size_t probes = cfg.get_size("spectrum.trace_probes");
  json runs = json::array();
  for (std::uint64_t seed : cfg.seeds()) {
    const ParamVector x = train_to(problem, cfg, seed, train_steps(cfg));
    const LinearOperator op = hessian_operator(eval.train_full, x);
    const SpectrumReport rep = spectrum_deflated(op, k, q, seed, tol, probes);
    const EigenEstimate top = power_iteration(op, q, seed);
    json run = {{"seed", seed},
                {"eigenvalues", rep.eigenvalues},
                {"residuals", rep.residuals},
                {"converged", rep.converged},
                {"hvp_calls", rep.hvp_calls},
                {"power_iteration", {{"value", top.value}, {"residual", top.residual}}},
                {"sharpness_proxy", sharpness_proxy(top.value, cfg.get_double("opt.rho"))}};
    if (probes > 0) {
      run["trace"] = rep.trace;
      run["trace_stderr"] = rep.trace_stderr;
      run["trace_probes"] = probes;
    }
    runs.push_back(run);
  }
  return {{"subcommand", "spectrum"}, {"config", config_json(cfg)}, {"runs", runs}};
}

namespace {

std::shared_ptr<const Model> polynomial(std::size_t dim, std::vector<Monomial> terms) {
  return std::make_shared<const PolynomialObjective>(dim, std::move(terms));
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

OracleFamily analytic_family(const std::string& problem) {
  OracleFamily family;
  if (problem == "quartic") {
    family.emplace_back(polynomial(1, {{0.25, {4}}}), nullptr);
  } else if (problem == "quadratic") {
    family.emplace_back(polynomial(1, {{0.5, {2}}}), nullptr);
  } else if (problem == "toy2") {
    family.emplace_back(polynomial(2, {{0.25, {4, 0}}, {0.5, {0, 2}}, {1.0, {2, 1}}}), nullptr);
    family.emplace_back(polynomial(2, {{0.25, {0, 4}}, {1.0, {2, 0}}, {0.5, {1, 2}}, {1.0, {1, 1}}}),
                        nullptr);
  } else {
    throw ConfigError("moments.problem must be quartic|quadratic|toy2, got '" + problem + "'");
  }
  return family;
}

ParamVector analytic_point(const std::string& problem) {
  if (problem == "toy2") return ParamVector::from({1.0, 0.5});
  analytic_family(problem);
  return ParamVector::from({1.0});
}

json run_probe_moments(const Config& cfg) {
  const std::string problem = cfg.get("moments.problem");
  const OracleFamily family = analytic_family(problem);
  const ParamVector x = analytic_point(problem);
  const MomentProbeReport rep = one_step_moment_probe(family, x, cfg.get_double("moments.eta"),
                                                      cfg.get_doubles("moments.rho_grid"));
  return {{"subcommand", "probe-moments"},
          {"config", config_json(cfg)},
          {"problem", problem},
          {"x", x.values()},
          {"rho", rep.rho},
          {"e1_third", rep.e1_third},
          {"e1_second", rep.e1_second},
          {"e2_third", rep.e2_third},
          {"e2_second", rep.e2_second},
          {"slopes",
           {{"e1_third", optional_json(rep.slope_e1_third)},
            {"e1_second", optional_json(rep.slope_e1_second)},
            {"e2_third", optional_json(rep.slope_e2_third)},
            {"e2_second", optional_json(rep.slope_e2_second)}}}};
}

json run_probe_power(const Config& cfg) {
  const Problem problem = build_problem(cfg);
  const Evaluator eval(problem, cfg);
  const std::size_t q_max = cfg.get_size("power.q_max");
  const std::size_t reps = cfg.get_size("power.reps");
  const std::size_t ref_q = cfg.get_size("power.ref_q");
  if (q_max < 1 || reps < 1 || ref_q < 1) throw ConfigError("power.* counts must be >= 1");
  json runs = json::array();
  for (std::uint64_t seed : cfg.seeds()) {
    const ParamVector x = train_to(problem, cfg, seed, train_steps(cfg));
    const LinearOperator op = hessian_operator(eval.train_full, x);
    const EigenEstimate ref =
        power_iteration(op, ref_q, random_unit(x.layout(), stream_key(seed, Stream::Probe, 2), 0));
    json curve = json::array();
    for (std::size_t q = 1; q <= q_max; ++q) {
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const EigenEstimate est = power_iteration(op, q, random_unit(x.layout(), seed, r));
        const double a = align(est.vector, ref.vector).value;
        sum += a;
        sum2 += a * a;
      }
      const double mean = sum / static_cast<double>(reps);
      const double var = reps > 1 ? (sum2 - reps * mean * mean) / static_cast<double>(reps - 1) : 0.0;
      curve.push_back({{"q", q},
                       {"alignment", mean},
                       {"stderr", std::sqrt(std::max(var, 0.0) / static_cast<double>(reps))}});
    }
    runs.push_back({{"seed", seed},
                    {"reference", {{"value", ref.value}, {"residual", ref.residual}}},
                    {"curve", curve}});
  }
  return {{"subcommand", "probe-power"}, {"config", config_json(cfg)}, {"runs", runs}};
}

json run_bound(const Config& cfg) {
  BoundInputs in;
  in.empirical_loss = cfg.get_double("bound.f_s");
  in.lambda1 = cfg.get_double("bound.lambda1");
  in.param_norm = cfg.get_double("bound.param_norm");
  in.d = cfg.get_double("bound.d");
  in.n = cfg.get_double("bound.n");
  in.sigma = cfg.get_double("bound.sigma");
  in.loss_bound = cfg.get_double("bound.L");
  in.third_bound = cfg.get_double("bound.C");
  in.delta = cfg.get_double("bound.delta");
  ConvergenceInputs ci;
  ci.beta = cfg.get_double("conv.beta");
  ci.gap = cfg.get_double("conv.gap");
  ci.sigma2 = cfg.get_double("conv.sigma2");
  ci.steps = cfg.get_double("conv.T");
  ci.rho = cfg.get_double("conv.rho");
  ci.alpha = cfg.get_double("conv.alpha");
  const ConvergenceBound cb = convergence_bound(ci);
  return {{"subcommand", "bound"},
          {"pac_bayes",
           {{"inputs",
             {{"f_s", in.empirical_loss},
              {"lambda1", in.lambda1},
              {"param_norm", in.param_norm},
              {"d", in.d},
              {"n", in.n},
              {"sigma", in.sigma},
              {"L", in.loss_bound},
              {"C", in.third_bound},
              {"delta", in.delta}}},
            {"constant_K", pac_bayes_constant()},
            {"bound", pac_bayes_bound(in)}}},
          {"convergence",
           {{"inputs",
             {{"beta", ci.beta},
              {"gap", ci.gap},
              {"sigma2", ci.sigma2},
              {"T", ci.steps},
              {"rho", ci.rho},
              {"alpha", ci.alpha}}},
            {"eta", cb.eta},
            {"bound", cb.bound}}}};
}

json run_align_range(const Config& cfg) {
  const double omega = cfg.get_double("align.omega");
  const Interval r = alpha_admissible_range(omega);
  return {{"subcommand", "align-range"},
          {"omega", omega},
          {"lower", r.lower},
          {"upper", r.upper_infinite() ? json(nullptr) : json(r.upper)},
          {"upper_infinite", r.upper_infinite()}};
}

}  // namespace samlab
