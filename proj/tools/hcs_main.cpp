/*
 Copyright 2026 The hcs Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// hcs: steer, simulate and verify from the command line.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 verification failure. HCS_LOG_LEVEL sets the log level (trace, debug,
// info, warn, error, off); the default is info.

#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hcs/io.hpp"
#include "hcs/verify.hpp"

#ifndef HCS_VERSION
#define HCS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace hcs;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerify = 4;

struct Options {
  std::string experiment;
  std::string config;
  std::string method = "auto";
  std::string out;
  std::string plan;
  int samples = 0;
  std::uint64_t seed = 1;
  std::vector<double> eta;
  double tol = 0.0;
  int max_iter = 0;
  int threads = 1;
  int thinning = 1;
  std::optional<double> epsilon;
  double sigma0_scale = 1.0;
  bool no_baseline = false;
  std::string suite = "all";
  bool flip_phi12 = false;
  std::vector<std::string> argv;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  }
  return hex.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string matrix_text(const Matrix& m) {
  std::ostringstream s;
  s << std::setprecision(6) << m;
  return s.str();
}

Experiment resolve_experiment(const Options& o) {
  if (!o.config.empty() && !o.experiment.empty()) {
    throw Error(ErrorCode::kConfig, "give either --experiment or --config, not both");
  }
  Experiment ex = !o.config.empty()       ? load_experiment(o.config)
                  : !o.experiment.empty() ? builtin_experiment(o.experiment)
                                          : throw Error(ErrorCode::kConfig,
                                                        "need --experiment or --config");
  if (!o.eta.empty()) ex.sdp.eta_schedule = o.eta;
  if (o.tol > 0.0) ex.sdp.tolerance = o.tol;
  if (o.max_iter > 0) {
    ex.sdp.max_iterations = o.max_iter;
    ex.ilqr.max_iterations = o.max_iter;
  }
  return ex;
}

fs::path output_dir(const Options& o, const std::string& fallback) {
  fs::path dir = o.out.empty() ? fs::path("out") / fallback : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

// Pads ragged rows (mode visits of different dimension) with NaN.
std::vector<std::vector<double>> pad(std::vector<std::vector<double>> rows) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  for (auto& r : rows) r.resize(width, std::numeric_limits<double>::quiet_NaN());
  return rows;
}

std::vector<std::string> header(std::vector<std::string> fixed, const std::string& prefix,
                                std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) fixed.push_back(prefix + std::to_string(i));
  return fixed;
}

void append(std::vector<double>& row, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
}

std::size_t max_dim(const HybridSystemSpec& sys) {
  std::size_t n = 0;
  for (const auto& m : sys.modes) n = std::max(n, std::size_t(m.state_dim));
  return n;
}

// Writes config.json next to the artifacts so `reproduce` can point at it.
void write_manifest(const fs::path& dir, const std::string& command, const Options& o,
                    const Json& config, std::vector<std::string> artifacts, const Json& timings,
                    const std::string& reproduce, Json extra = Json::object()) {
  write_json(dir / "config.json", config);
  artifacts.push_back("config.json");
  Json files = Json::object();
  for (const auto& a : artifacts) files[a] = {{"sha256", sha256_file(dir / a)}};
  Json m = {{"tool", "hcs"},
            {"version", HCS_VERSION},
            {"command", command},
            {"argv", o.argv},
            {"config", config},
            {"artifacts", files},
            {"reproduce", reproduce},
            {"timings_seconds", timings}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / "manifest.json", m);
}

int cmd_steer(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Experiment ex = resolve_experiment(o);
  const SteeringMethod method = parse_method(o.method);
  spdlog::info("experiment {}: nominal solve", ex.name);
  const SteeringRun run = run_steering(ex, method);
  spdlog::info("nominal cost {:.6g} after {} iterations, {} event(s)", run.nominal.cost,
               run.nominal.iterations, run.nominal.trajectory.events.size());
  for (const auto& w : run.nominal.warnings) spdlog::warn("{}", w);

  const fs::path dir = output_dir(o, ex.name);
  std::vector<std::string> artifacts{"plan.json", "nominal.csv", "sigma.csv"};
  write_json(dir / "plan.json", plan_to_json(ex, run));

  const auto& traj = run.nominal.trajectory;
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    std::vector<double> row{traj.times[k], double(traj.modes[k])};
    append(row, traj.states[k]);
    rows.push_back(std::move(row));
  }
  write_csv(dir / "nominal.csv", header({"t", "mode"}, "x", max_dim(ex.system)), pad(rows));

  rows.clear();
  const std::size_t n = max_dim(ex.system);
  for (std::size_t v = 0; v < run.solution.segments.size(); ++v) {
    const auto& seg = run.solution.segments[v];
    for (std::size_t k = 0; k < seg.times.size(); ++k) {
      std::vector<double> row{seg.times[k], double(v)};
      append(row, seg.sigma[k]);
      rows.push_back(std::move(row));
    }
  }
  write_csv(dir / "sigma.csv", header({"t", "visit"}, "sigma", n * n), pad(rows));

  Json jumps = Json::array();
  std::cout << "method: " << method_name(run.method) << "\n";
  for (std::size_t j = 0; j < run.solution.jumps.size(); ++j) {
    const auto& jr = run.solution.jumps[j];
    const int rank = int(numerical_rank(jr.sigma_plus));
    const double cov_res = (jr.sigma_plus - jr.xi * jr.sigma_minus * jr.xi.transpose()).norm();
    jumps.push_back({{"time", jr.time},
                     {"sigma_minus", to_json(jr.sigma_minus)},
                     {"sigma_plus", to_json(jr.sigma_plus)},
                     {"sigma_plus_rank", rank},
                     {"jump_covariance_residual", cov_res},
                     {"pi_jump_residual", pi_jump_residual(jr)}});
    std::cout << "jump " << j << " at t = " << jr.time << "\n"
              << "Sigma-:\n" << matrix_text(jr.sigma_minus) << "\n"
              << "Sigma+ (rank " << rank << " of " << jr.sigma_plus.rows() << "):\n"
              << matrix_text(jr.sigma_plus) << "\n"
              << "||Sigma+ - Xi Sigma- Xi'|| = " << cov_res
              << ", Riccati jump residual = " << pi_jump_residual(jr) << "\n";
  }
  const double terminal_error = relative_error(run.solution.terminal_sigma(), ex.sigma_t);
  std::cout << "expected control cost: " << run.solution.cost << "\n"
            << "terminal covariance relative error: " << terminal_error << "\n";
  Json summary = {{"method", std::string(method_name(run.method))},
                  {"jumps", jumps},
                  {"cost", run.solution.cost},
                  {"terminal_relative_error", terminal_error},
                  {"nominal_cost", run.nominal.cost},
                  {"nominal_iterations", run.nominal.iterations},
                  {"nominal_stationarity", run.nominal.stationarity}};
  if (run.sdp) {
    write_json(dir / "sdp.json", sdp_to_json(*run.sdp));
    artifacts.push_back("sdp.json");
    summary["sdp_objective"] = run.sdp->objective;
    std::cout << "convex objective: " << run.sdp->objective << "\n";
  }
  write_json(dir / "summary.json", summary);
  artifacts.push_back("summary.json");
  const std::string reproduce = "hcs steer --config " + (dir / "config.json").string() +
                                " --method " + o.method + " --out " + dir.string();
  write_manifest(dir, "steer", o, experiment_to_json(ex), artifacts,
                 {{"nominal", run.nominal_seconds},
                  {"steering", run.steering_seconds},
                  {"total", seconds_since(t0)}},
                 reproduce, {{"method", std::string(method_name(run.method))}});
  spdlog::info("wrote {}", dir.string());
  return 0;
}

Json ensemble_report(const EnsembleResult& res, const PlannedSchedule& planned, int samples) {
  const auto cmp = compare_schedules(res, planned);
  return {{"terminal_covariance", to_json(res.terminal_covariance)},
          {"terminal_mean", to_json(res.terminal_mean)},
          {"terminal_relative_deviation", cmp.terminal_deviation},
          {"max_covariance_deviation", cmp.max_deviation},
          {"tube_coverage", cmp.coverage},
          {"terminal_coverage", cmp.terminal_coverage},
          {"terminal_samples", res.terminal_states.size()},
          {"escaped", res.escaped},
          {"escape_rate", res.escape_rate(samples)}};
}

void write_ensemble_csv(const fs::path& path, const EnsembleResult& res, std::size_t n) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < res.times.size(); ++r) {
    std::vector<double> row{res.times[r], double(res.visit[r]), double(res.count[r]),
                            res.coverage[r]};
    append(row, res.covariance[r]);
    rows.push_back(std::move(row));
  }
  write_csv(path, header({"t", "visit", "count", "coverage"}, "cov", n * n), pad(rows));
}

int cmd_simulate(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  Json plan_json;
  if (!o.plan.empty()) {
    plan_json = read_json(o.plan);
  } else {
    const Experiment ex = resolve_experiment(o);
    spdlog::info("no plan given; solving {} first", ex.name);
    plan_json = plan_to_json(ex, run_steering(ex, parse_method(o.method)));
  }
  const LoadedPlan plan = plan_from_json(plan_json);
  const Experiment& ex = plan.experiment;
  SimConfig cfg;
  cfg.samples = o.samples > 0 ? o.samples : 1000;
  cfg.master_seed = o.seed;
  cfg.epsilon = o.epsilon.value_or(ex.epsilon);
  cfg.sigma0 = o.sigma0_scale * ex.sigma0;
  cfg.threads = o.threads;
  cfg.thinning = o.thinning;
  cfg.tube = &plan.schedule;
  spdlog::info("{} samples, seed {}, {} thread(s)", cfg.samples, cfg.master_seed, cfg.threads);
  const auto t_sim = std::chrono::steady_clock::now();
  const EnsembleResult res = simulate_ensemble(ex.system, plan.steering, cfg);
  const double sim_seconds = seconds_since(t_sim);

  const fs::path dir = output_dir(o, ex.name + "_sim");
  const std::size_t n = max_dim(ex.system);
  std::vector<std::string> artifacts{"ensemble.csv", "event_times.csv", "report.json"};
  write_ensemble_csv(dir / "ensemble.csv", res, n);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < res.event_times.size(); ++i) {
    for (std::size_t e = 0; e < res.event_times[i].size(); ++e) {
      rows.push_back({double(i), double(e), res.event_times[i][e]});
    }
  }
  write_csv(dir / "event_times.csv", {"sample", "event", "t"}, rows);

  Json report = {{"samples", cfg.samples},
                 {"seed", cfg.master_seed},
                 {"epsilon", cfg.epsilon},
                 {"sigma0_scale", o.sigma0_scale},
                 {"target_covariance", to_json(ex.sigma_t)},
                 {"steering", ensemble_report(res, plan.schedule, cfg.samples)}};
  const Vector& x_nom = plan.steering.nominal.states.back();
  if (res.terminal_mean.size() == x_nom.size()) {
    report["terminal_mean_minus_nominal"] = (res.terminal_mean - x_nom).cwiseAbs().maxCoeff();
  }
  const double dev = report["steering"]["terminal_relative_deviation"].get<double>();
  std::cout << "terminal covariance (empirical):\n"
            << matrix_text(res.terminal_covariance) << "\n"
            << "relative deviation from target: " << dev << "\n"
            << "escaped samples: " << res.escaped << "\n";
  double base_seconds = 0.0;
  if (!o.no_baseline) {
    const auto t_base = std::chrono::steady_clock::now();
    SimConfig base_cfg = cfg;
    base_cfg.tube = nullptr;
    const EnsembleResult base = simulate_ensemble(ex.system, plan.baseline, base_cfg);
    base_seconds = seconds_since(t_base);
    report["baseline"] = ensemble_report(base, plan.schedule, cfg.samples);
    write_ensemble_csv(dir / "baseline_ensemble.csv", base, n);
    artifacts.push_back("baseline_ensemble.csv");
    std::cout << "iLQR-gain baseline relative deviation: "
              << report["baseline"]["terminal_relative_deviation"].get<double>() << "\n";
  }
  write_json(dir / "report.json", report);
  Json config = experiment_to_json(ex);
  config["samples"] = cfg.samples;
  config["seed"] = cfg.master_seed;
  config["thinning"] = cfg.thinning;
  config["simulate_epsilon"] = cfg.epsilon;
  config["sigma0_scale"] = o.sigma0_scale;
  std::ostringstream cmd;
  cmd << std::setprecision(17) << "hcs simulate " << (dir / "plan.json").string() << " --samples "
      << cfg.samples << " --seed " << cfg.master_seed << " --thinning " << cfg.thinning
      << " --epsilon " << cfg.epsilon << " --sigma0-scale " << o.sigma0_scale
      << (o.no_baseline ? " --no-baseline" : "") << " --out " << dir.string();
  write_json(dir / "plan.json", plan_json);
  artifacts.push_back("plan.json");
  write_manifest(dir, "simulate", o, config, artifacts,
                 {{"simulate", sim_seconds}, {"baseline", base_seconds}, {"total", seconds_since(t0)}},
                 cmd.str(), {{"plan_source", o.plan}, {"threads", cfg.threads}});
  spdlog::info("wrote {}", dir.string());
  return 0;
}

int cmd_verify(const Options& o) {
  VerifyOptions vo;
  vo.seed = o.seed;
  vo.flip_phi12_sign = o.flip_phi12;
  const auto checks = run_verify(o.suite, vo);
  bool ok = true;
  std::cout << std::left << std::setw(9) << "suite" << std::setw(36) << "check" << std::setw(14)
            << "max residual" << std::setw(11) << "tolerance" << "result\n";
  for (const auto& c : checks) {
    std::cout << std::setw(9) << c.suite << std::setw(36) << c.name << std::setw(14)
              << std::setprecision(3) << c.residual << std::setw(11) << c.tolerance
              << (c.pass() ? "PASS" : "FAIL") << "\n";
    ok = ok && c.pass();
  }
  return ok ? 0 : kExitVerify;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kDimensionMismatch: return kExitConfig;
    case ErrorCode::kVerification: return kExitVerify;
    default: return kExitSolver;
  }
}

int report_error(const Options& o, const std::string& code, const std::string& detail, int exit) {
  const Json err = {{"error", code}, {"detail", detail}, {"exit_code", exit}};
  std::cerr << err.dump() << "\n";
  if (!o.out.empty()) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (!ec) {
      std::ofstream(fs::path(o.out) / "error.json") << err.dump(1) << "\n";
    }
  }
  return exit;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("hcs");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("HCS_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options o;
  o.argv.assign(argv, argv + argc);
  CLI::App app{"Covariance steering for hybrid systems"};
  app.set_version_flag("--version", HCS_VERSION);
  app.require_subcommand(1);

  auto add_problem = [&](CLI::App* sub) {
    sub->add_option("--experiment", o.experiment, "builtin experiment: bouncing-ball, slip");
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--method", o.method, "steering method")
        ->check(CLI::IsMember({"auto", "analytic", "sdp"}));
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--eta", o.eta, "relative regularization levels for singular jumps");
    sub->add_option("--tol", o.tol, "convex solver tolerance");
    sub->add_option("--max-iter", o.max_iter, "iteration cap for the nominal and convex solvers");
  };

  CLI::App* steer = app.add_subcommand("steer", "solve the nominal and the covariance plan");
  add_problem(steer);

  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo check of a plan");
  simulate->add_option("plan", o.plan, "plan.json written by steer")->check(CLI::ExistingFile);
  add_problem(simulate);
  simulate->add_option("--samples", o.samples, "sample count (default 1000)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", o.seed, "master seed");
  simulate->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--thinning", o.thinning, "record every k-th step")
      ->check(CLI::PositiveNumber);
  simulate->add_flag("--no-baseline", o.no_baseline, "skip the iLQR-gain ensemble");
  simulate->add_option("--epsilon", o.epsilon, "noise level (default: the plan's)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--sigma0-scale", o.sigma0_scale, "scales the initial covariance")
      ->check(CLI::NonNegativeNumber);

  CLI::App* verify = app.add_subcommand("verify", "identity and oracle self-checks");
  verify->add_option("--suite", o.suite, "kernels, riccati, sdp or all")
      ->check(CLI::IsMember({"kernels", "riccati", "sdp", "all"}));
  verify->add_option("--seed", o.seed, "instance seed");
  verify->add_flag("--flip-phi12-sign", o.flip_phi12, "negative control for the kernels suite")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report_error(o, "config-error", e.what(), kExitConfig);
  }

  try {
    if (steer->parsed()) return cmd_steer(o);
    if (simulate->parsed()) return cmd_simulate(o);
    return cmd_verify(o);
  } catch (const Error& e) {
    return report_error(o, std::string(code_name(e.code())), e.what(), exit_code_for(e.code()));
  } catch (const fs::filesystem_error& e) {
    return report_error(o, "config-error", e.what(), kExitConfig);
  } catch (const std::exception& e) {
    return report_error(o, "internal-error", e.what(), kExitSolver);
  }
}
