#pragma once

// Command-line front end. run() parses arguments, executes one subcommand and
// writes summary.json plus CSV (and optionally SVG) files into --out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bangoff/analysis.hpp"
#include "bangoff/controls.hpp"
#include "bangoff/errors.hpp"
#include "bangoff/io.hpp"
#include "bangoff/model.hpp"
#include "bangoff/objective.hpp"
#include "bangoff/optimize.hpp"
#include "bangoff/random.hpp"
#include "bangoff/speed_limit.hpp"

namespace bangoff::cli {

enum ExitCode : int { ok = 0, bad_input = 1, over_limit = 2, no_convergence = 3 };

struct Options {
  std::string command;
  std::string system_path;
  std::string out = "out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool svg = false;

  std::optional<double> T;
  std::optional<int> Ns;
  double delta = kDefaultDelta;
  std::optional<int> points;
  std::optional<int> iters;

  std::string method = "sd";
  std::string type;
  std::vector<double> durations;
  std::vector<double> values;
  int slots = 40;
  int n_c = 5;
  double lo = 0.0, hi = 0.0;
  double tol = 1e-4;
  double epsilon = kDefaultTcEpsilon;
  double range1 = 0.0, range2 = 0.0;
  std::string value = "bures";
  std::vector<double> sigmas{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
};

namespace detail {

using io::json;

class Emitter {
 public:
  Emitter(const std::string& dir, json config) : dir_(dir), config_(std::move(config)), hash_(io::config_hash(config_)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw invalid_input("cannot create output directory: " + dir_.string());
  }

  const std::string& hash() const { return hash_; }

  template <class Fn>
  void file(const std::string& name, Fn&& write) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw invalid_input("cannot write " + (dir_ / name).string());
    write(os);
  }

  void summary(json result) {
    file("summary.json", [&](std::ostream& os) { os << io::summary(config_, std::move(result)).dump(2) << '\n'; });
  }

 private:
  std::filesystem::path dir_;
  json config_;
  std::string hash_;
};

inline double require_T(const Options& o) {
  if (!o.T) throw invalid_input("--T is required for '" + o.command + "'");
  if (!(*o.T > 0.0) || !std::isfinite(*o.T)) throw invalid_input("--T must be positive");
  return *o.T;
}

inline int positive(std::optional<int> v, int fallback, const char* flag) {
  const int x = v.value_or(fallback);
  if (x < 1) throw invalid_input(std::string(flag) + " must be >= 1");
  return x;
}

inline BangOffType require_type(const Options& o) {
  if (o.type.empty()) throw invalid_input("--type is required for '" + o.command + "'");
  return BangOffType::parse(o.type);
}

inline json base_config(const Options& o, const ControlSystem& s) {
  return json{{"command", o.command}, {"system", io::system_json(s)}, {"seed", o.seed}, {"threads", o.threads}};
}

inline void maybe_step_svg(Emitter& em, const Options& o, const PiecewiseControl& p, double M) {
  if (o.svg) em.file("control.svg", [&](std::ostream& os) { io::write_step_svg(os, p, M, em.hash()); });
}

inline int cmd_evaluate(const Options& o, const ControlSystem& s) {
  json cfg = base_config(o, s);
  const int n = positive(o.points, 1000, "--points");
  if (!o.values.empty()) {
    const double T = require_T(o);
    const PiecewiseControl p{o.values, T / static_cast<double>(o.values.size())};
    cfg["T"] = T;
    cfg["values"] = o.values;
    Emitter em(o.out, cfg);
    const auto r = evaluate(s, p, T);
    em.file("control.csv", [&](std::ostream& os) { io::write_control_csv(os, p, em.hash()); });
    maybe_step_svg(em, o, p, s.bound);
    em.summary(json{{"T", T}, {"fidelity", r.fidelity}, {"infidelity", r.infidelity}, {"bures", r.bures}});
    return ok;
  }
  const BangOffType type = require_type(o);
  const BangOffControl c{type, o.durations, s.bound};
  validate(c);
  const double T = o.T.value_or(c.total());
  cfg["type"] = type.str();
  cfg["durations"] = o.durations;
  cfg["T"] = T;
  cfg["points"] = n;
  Emitter em(o.out, cfg);
  const auto r = evaluate(s, c, T);
  if (T > 0.0) {
    em.file("control.csv", [&](std::ostream& os) { io::write_control_csv(os, c, n, em.hash()); });
    maybe_step_svg(em, o, to_piecewise(c, n), s.bound);
  }
  em.summary(json{{"T", T}, {"fidelity", r.fidelity}, {"infidelity", r.infidelity}, {"bures", r.bures}});
  return ok;
}

template <class Control>
int finish_optimize(const Options& o, Emitter& em, const std::vector<OptimizationResult<Control>>& runs, double T,
                    double M) {
  std::size_t best = 0;
  bool any_converged = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].best_fidelity > runs[best].best_fidelity) best = i;
    any_converged = any_converged || runs[i].converged;
  }
  em.file("traces.csv", [&](std::ostream& os) { io::write_trace_csv(os, runs, em.hash()); });
  const PiecewiseControl p = [&] {
    if constexpr (std::is_same_v<Control, PiecewiseControl>) return runs[best].best_control;
    else return to_piecewise(runs[best].best_control, 1000);
  }();
  em.file("control.csv", [&](std::ostream& os) { io::write_control_csv(os, p, em.hash()); });
  maybe_step_svg(em, o, p, M);
  json all = json::array();
  for (const auto& r : runs) all.push_back(json{{"seed", r.seed}, {"fidelity", r.best_fidelity}, {"converged", r.converged}});
  em.summary(json{{"T", T}, {"best", io::result_json(runs[best])}, {"best_index", best}, {"runs", all}});
  return any_converged ? ok : no_convergence;
}

inline int cmd_optimize(const Options& o, const ControlSystem& s) {
  const double T = require_T(o);
  json cfg = base_config(o, s);
  cfg["method"] = o.method;
  cfg["T"] = T;
  if (o.method == "sd" || o.method == "qn") {
    const BangOffType type = require_type(o);
    const int points = positive(o.points, 20, "--points");
    const int iters = positive(o.iters, o.method == "sd" ? 10000 : 500, "--iters");
    cfg["type"] = type.str();
    cfg["points"] = points;
    cfg["iters"] = iters;
    Emitter em(o.out, cfg);
    const BangOffEvaluator ev(s);
    auto runs = multi_start(
        static_cast<std::size_t>(points), o.seed,
        [&](std::uint64_t seed, std::size_t) {
          if (o.method == "sd") {
            SdConfig c;
            c.iterations = iters;
            c.seed = seed;
            return sd_durations(s, type, T, c);
          }
          Rng rng = make_rng(seed);
          const auto start = random_bangoff(type, T, s.bound, rng).durations;
          QnConfig q;
          q.max_iterations = iters;
          auto r = quasi_newton(ev, type, T, start, s.bound, q);
          r.seed = seed;
          return r;
        },
        o.threads);
    return finish_optimize(o, em, runs, T, s.bound);
  }
  if (o.method == "oneflip") {
    if (o.slots < 1) throw invalid_input("--slots must be >= 1");
    const int points = positive(o.points, 100, "--points");
    const int iters = positive(o.iters, 10000, "--iters");
    cfg["slots"] = o.slots;
    cfg["points"] = points;
    cfg["iters"] = iters;
    Emitter em(o.out, cfg);
    auto runs = multi_start(
        static_cast<std::size_t>(points), o.seed,
        [&](std::uint64_t seed, std::size_t) {
          SdConfig c;
          c.iterations = iters;
          c.seed = seed;
          return one_flip_sd(s, T, static_cast<std::size_t>(o.slots), c);
        },
        o.threads);
    return finish_optimize(o, em, runs, T, s.bound);
  }
  if (o.method == "crab") {
    if (o.n_c < 1) throw invalid_input("--Nc must be >= 1");
    const int points = positive(o.points, 20, "--points");
    const int iters = positive(o.iters, 2000, "--iters");
    cfg["Nc"] = o.n_c;
    cfg["points"] = points;
    cfg["iters"] = iters;
    Emitter em(o.out, cfg);
    CrabConfig c;
    c.evaluations = iters;
    c.threads = o.threads;
    std::vector<CrabResult> runs{crab_optimize(s, T, static_cast<std::size_t>(o.n_c), points, o.seed, c)};
    return finish_optimize(o, em, runs, T, s.bound);
  }
  throw invalid_input("--method must be one of sd, qn, oneflip, crab");
}

inline Budget budget_of(const Options& o) {
  Budget b;
  b.starts = positive(o.points, b.starts, "--points");
  b.sd_iterations = positive(o.iters, b.sd_iterations, "--iters");
  b.seed = o.seed;
  b.threads = o.threads;
  return b;
}

inline json budget_json(const Budget& b) {
  return json{{"points", b.starts}, {"iters", b.sd_iterations}, {"polish", b.polish}};
}

inline int cmd_qsl(const Options& o, const ControlSystem& s) {
  QslOptions q;
  q.delta = o.delta;
  q.budget = budget_of(o);
  q.tol = o.tol;
  if (o.Ns) {
    if (*o.Ns < 0) throw invalid_input("--Ns must be >= 0");
    q.ns_max = static_cast<std::size_t>(*o.Ns);
  }
  if (o.T) q.T_max = require_T(o);
  json cfg = base_config(o, s);
  cfg["Ns"] = q.ns_max;
  cfg["delta"] = q.delta;
  cfg["tol"] = q.tol;
  cfg["T_max"] = q.T_max;
  cfg["budget"] = budget_json(q.budget);
  Emitter em(o.out, cfg);
  const QslReport r = estimate_qsl(s, q);
  if (!r.optimal_types.empty()) {
    const BangOffControl c{r.optimal_types.front(), r.optimal_durations.front(), s.bound};
    em.file("control.csv", [&](std::ostream& os) { io::write_control_csv(os, c, 1000, em.hash()); });
    maybe_step_svg(em, o, to_piecewise(c, 1000), s.bound);
  }
  em.summary(io::qsl_json(r));
  return r.converged ? ok : no_convergence;
}

inline int cmd_tc(const Options& o, const ControlSystem& s) {
  const double lo = o.lo > 0.0 ? o.lo : 0.2;
  const double hi = o.hi > 0.0 ? o.hi : 1.5;
  const Budget b = budget_of(o);
  json cfg = base_config(o, s);
  cfg["lo"] = lo;
  cfg["hi"] = hi;
  cfg["epsilon"] = o.epsilon;
  cfg["tol"] = o.tol;
  cfg["budget"] = budget_json(b);
  Emitter em(o.out, cfg);
  em.summary(io::critical_time_json(critical_time(s, lo, hi, o.epsilon, o.tol, b)));
  return ok;
}

inline int cmd_sweep(const Options& o, const ControlSystem& s) {
  const double lo = o.lo > 0.0 ? o.lo : 0.1;
  const double hi = o.hi > 0.0 ? o.hi : require_T(o);
  if (!(hi > lo)) throw invalid_input("sweep: need --lo < --hi");
  const int n = o.Ns.value_or(1);
  if (n < 0) throw invalid_input("--Ns must be >= 0");
  Budget b = budget_of(o);
  b.starts = 20;
  int grid_points = 41;
  if (o.points) grid_points = positive(o.points, 41, "--points");
  if (grid_points < 2) throw invalid_input("--points must be >= 2 for a sweep");
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) grid[i] = lo + (hi - lo) * i / (grid_points - 1);
  json cfg = base_config(o, s);
  cfg["Ns"] = n;
  cfg["lo"] = lo;
  cfg["hi"] = hi;
  cfg["points"] = grid_points;
  cfg["budget"] = budget_json(b);
  Emitter em(o.out, cfg);
  const auto v = fidelity_vs_T(s, static_cast<std::size_t>(n), grid, b);
  em.file("sweep.csv", [&](std::ostream& os) { io::write_sweep_csv(os, v, em.hash()); });
  json pts = json::array();
  for (const auto& p : v) pts.push_back(json{{"T", p.T}, {"fidelity", p.fidelity}, {"type", p.type.str()}});
  em.summary(json{{"points", pts}});
  return ok;
}

inline int cmd_landscape(const Options& o, const ControlSystem& s) {
  const BangOffType type = require_type(o);
  LandscapeSpec spec;
  spec.mode = type.size() == 3 ? LandscapeMode::fixed_total : LandscapeMode::free_total;
  if (spec.mode == LandscapeMode::fixed_total) spec.T = require_T(o);
  if (o.value == "fidelity") spec.value = LandscapeValue::fidelity;
  else if (o.value == "bures") spec.value = LandscapeValue::log_bures;
  else throw invalid_input("--value must be fidelity or bures");
  const int n = positive(o.points, 101, "--points");
  const double def = spec.mode == LandscapeMode::fixed_total ? spec.T : o.T.value_or(3.0);
  spec.axis1 = Axis{0.0, o.range1 > 0.0 ? o.range1 : def, static_cast<std::size_t>(n)};
  spec.axis2 = Axis{0.0, o.range2 > 0.0 ? o.range2 : def, static_cast<std::size_t>(n)};
  spec.threads = o.threads;
  json cfg = base_config(o, s);
  cfg["type"] = type.str();
  cfg["mode"] = spec.mode == LandscapeMode::fixed_total ? "fixed_total" : "free_total";
  cfg["T"] = spec.T;
  cfg["value"] = o.value;
  cfg["axis1"] = {spec.axis1.lo, spec.axis1.hi, spec.axis1.n};
  cfg["axis2"] = {spec.axis2.lo, spec.axis2.hi, spec.axis2.n};
  Emitter em(o.out, cfg);
  const LandscapeGrid g = landscape(s, type, spec);
  em.file("landscape.csv", [&](std::ostream& os) { io::write_landscape_csv(os, g, em.hash()); });
  if (o.svg) em.file("landscape.svg", [&](std::ostream& os) { io::write_heatmap_svg(os, g, em.hash()); });
  json optima = json::array();
  for (const auto& p : local_optima(g)) optima.push_back(json{{"t1", p.t1}, {"t2", p.t2}, {"value", p.value}});
  em.summary(json{{"local_optima", optima}});
  return ok;
}

inline int cmd_robustness(const Options& o, const ControlSystem& s) {
  const BangOffType type = require_type(o);
  const BangOffControl c{type, o.durations, s.bound};
  validate(c);
  const int n = positive(o.points, 10000, "--points");
  json cfg = base_config(o, s);
  cfg["type"] = type.str();
  cfg["durations"] = o.durations;
  cfg["sigmas"] = o.sigmas;
  cfg["points"] = n;
  Emitter em(o.out, cfg);
  std::vector<RobustnessStats> all;
  json slopes;
  for (PerturbMode m : {PerturbMode::durations, PerturbMode::bound}) {
    const auto v = robustness(s, c, m, o.sigmas, static_cast<std::size_t>(n), o.seed, o.threads);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : v) pts.emplace_back(r.sigma, r.mean_error);
    slopes[to_string(m)] = o.sigmas.size() >= 2 ? json(loglog_slope(pts)) : json(nullptr);
    all.insert(all.end(), v.begin(), v.end());
  }
  em.file("robustness.csv", [&](std::ostream& os) { io::write_robustness_csv(os, all, em.hash()); });
  em.summary(json{{"loglog_slope", slopes}});
  return ok;
}

inline int cmd_distances(const Options& o, const ControlSystem& s) {
  const double T = require_T(o);
  if (o.slots < 1) throw invalid_input("--slots must be >= 1");
  const int points = positive(o.points, 1000, "--points");
  const int iters = positive(o.iters, 10000, "--iters");
  json cfg = base_config(o, s);
  cfg["T"] = T;
  cfg["slots"] = o.slots;
  cfg["points"] = points;
  cfg["iters"] = iters;
  Emitter em(o.out, cfg);
  auto runs = multi_start(
      static_cast<std::size_t>(points), o.seed,
      [&](std::uint64_t seed, std::size_t) {
        SdConfig c;
        c.iterations = iters;
        c.seed = seed;
        return one_flip_sd(s, T, static_cast<std::size_t>(o.slots), c);
      },
      o.threads);
  std::vector<PiecewiseControl> controls;
  double best = 0.0;
  for (const auto& r : runs) {
    controls.push_back(r.best_control);
    best = std::max(best, r.best_fidelity);
  }
  const DistanceReport d = distance_distribution(controls, o.threads);
  em.file("distances.csv", [&](std::ostream& os) { io::write_distance_csv(os, d, em.hash()); });
  json hist = json::array();
  for (std::size_t k = 0; k < d.histogram.counts.size(); ++k)
    hist.push_back(json{{"center", d.histogram.center(k)}, {"count", d.histogram.counts[k]}});
  em.summary(json{{"best_fidelity", best}, {"peaks", d.peaks}, {"histogram", hist}});
  return ok;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Time-optimal bang-off controls and quantum speed limit estimates"};
  app.require_subcommand(1, 1);

  auto common = [&](CLI::App* c) {
    c->add_option("--system", o.system_path, "System definition file (JSON)")->required();
    c->add_option("--out", o.out, "Output directory");
    c->add_option("--seed", o.seed, "Master seed");
    c->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    c->add_flag("--svg", o.svg, "Also render SVG plots");
  };
  auto budget = [&](CLI::App* c) {
    c->add_option("--points", o.points, "Starting points per word");
    c->add_option("--iters", o.iters, "SD iterations per start");
  };

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Fidelity and Bures distance of one control");
  common(evaluate_cmd);
  evaluate_cmd->add_option("--type", o.type, "Bang-off word, e.g. PZN");
  evaluate_cmd->add_option("--durations", o.durations, "Segment durations")->delimiter(',');
  evaluate_cmd->add_option("--values", o.values, "Per-slot control values")->delimiter(',');
  evaluate_cmd->add_option("--T", o.T, "Total duration");
  evaluate_cmd->add_option("--points", o.points, "Slots in the rendered control");

  auto* optimize_cmd = app.add_subcommand("optimize", "Multi-start optimization at fixed T");
  common(optimize_cmd);
  budget(optimize_cmd);
  optimize_cmd->add_option("--method", o.method, "sd, qn, oneflip or crab");
  optimize_cmd->add_option("--type", o.type, "Bang-off word (sd, qn)");
  optimize_cmd->add_option("--T", o.T, "Total duration")->required();
  optimize_cmd->add_option("--slots", o.slots, "Time slots (oneflip)");
  optimize_cmd->add_option("--Nc", o.n_c, "Fourier cutoff (crab)");

  auto* qsl_cmd = app.add_subcommand("qsl", "Estimate the quantum speed limit");
  common(qsl_cmd);
  budget(qsl_cmd);
  qsl_cmd->add_option("--Ns", o.Ns, "Largest switch count to try");
  qsl_cmd->add_option("--delta", o.delta, "Feasibility threshold on 1 - F");
  qsl_cmd->add_option("--tol", o.tol, "Duration tolerance");
  qsl_cmd->add_option("--T", o.T, "Upper end of the duration scan");

  auto* tc_cmd = app.add_subcommand("tc", "Critical time below which switching does not help");
  common(tc_cmd);
  budget(tc_cmd);
  tc_cmd->add_option("--lo", o.lo, "Bracket lower end");
  tc_cmd->add_option("--hi", o.hi, "Bracket upper end");
  tc_cmd->add_option("--epsilon", o.epsilon, "Fidelity gain threshold");
  tc_cmd->add_option("--tol", o.tol, "Duration tolerance");

  auto* sweep_cmd = app.add_subcommand("sweep", "Best fidelity over a grid of durations");
  common(sweep_cmd);
  sweep_cmd->add_option("--Ns", o.Ns, "Switch count");
  sweep_cmd->add_option("--lo", o.lo, "First duration");
  sweep_cmd->add_option("--hi", o.hi, "Last duration");
  sweep_cmd->add_option("--T", o.T, "Last duration (if --hi is absent)");
  sweep_cmd->add_option("--points", o.points, "Grid points");
  sweep_cmd->add_option("--iters", o.iters, "SD iterations per start");

  auto* landscape_cmd = app.add_subcommand("landscape", "Fidelity or Bures landscape over two durations");
  common(landscape_cmd);
  landscape_cmd->add_option("--type", o.type, "Two- or three-segment word")->required();
  landscape_cmd->add_option("--T", o.T, "Total duration (three-segment words)");
  landscape_cmd->add_option("--points", o.points, "Grid points per axis");
  landscape_cmd->add_option("--range1", o.range1, "Upper end of the t1 axis");
  landscape_cmd->add_option("--range2", o.range2, "Upper end of the t2 axis");
  landscape_cmd->add_option("--value", o.value, "fidelity or bures");

  auto* robustness_cmd = app.add_subcommand("robustness", "Error under Gaussian perturbations");
  common(robustness_cmd);
  robustness_cmd->add_option("--type", o.type, "Bang-off word")->required();
  robustness_cmd->add_option("--durations", o.durations, "Nominal durations")->delimiter(',')->required();
  robustness_cmd->add_option("--sigmas", o.sigmas, "Perturbation widths")->delimiter(',');
  robustness_cmd->add_option("--points", o.points, "Samples per width");

  auto* distances_cmd = app.add_subcommand("distances", "Distance distribution of 1-flip optima");
  common(distances_cmd);
  distances_cmd->add_option("--T", o.T, "Total duration")->required();
  distances_cmd->add_option("--slots", o.slots, "Time slots");
  distances_cmd->add_option("--points", o.points, "Independent runs");
  distances_cmd->add_option("--iters", o.iters, "SD iterations per run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return bad_input;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    const ControlSystem s = io::load_system(o.system_path);
    int code = ok;
    if (o.command == "evaluate") code = detail::cmd_evaluate(o, s);
    else if (o.command == "optimize") code = detail::cmd_optimize(o, s);
    else if (o.command == "qsl") code = detail::cmd_qsl(o, s);
    else if (o.command == "tc") code = detail::cmd_tc(o, s);
    else if (o.command == "sweep") code = detail::cmd_sweep(o, s);
    else if (o.command == "landscape") code = detail::cmd_landscape(o, s);
    else if (o.command == "robustness") code = detail::cmd_robustness(o, s);
    else code = detail::cmd_distances(o, s);
    if (code == no_convergence) err << "warning: no convergence reported; see " << o.out << "/summary.json\n";
    return code;
  } catch (const resource_limit& e) {
    err << "error: " << e.what() << '\n';
    return over_limit;
  } catch (const numerical_failure& e) {
    err << "error: " << e.what() << '\n';
    return no_convergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return bad_input;
  }
}

}  // namespace bangoff::cli
