// Acceptance suite: one PASS/FAIL line per criterion, tolerances as stated in the README.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dcelab/cli.hpp"
#include "dcelab/closed_dynamics.hpp"
#include "dcelab/drive.hpp"
#include "dcelab/environment.hpp"
#include "dcelab/noise.hpp"
#include "dcelab/open_mode.hpp"
#include "dcelab/spectrum.hpp"

using namespace dcelab;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Largest Floquet exponent of x'' + (a + b (1 - cos(W t)) / 2) x = 0 from an RK4 monodromy matrix.
double mathieu_exponent(double a, double b, double W, int steps) {
  const double T = 2.0 * pi / W, h = T / steps;
  auto rhs = [&](double t, const std::array<double, 2>& y) {
    return std::array<double, 2>{y[1], -(a + b * 0.5 * (1.0 - std::cos(W * t))) * y[0]};
  };
  std::array<std::array<double, 2>, 2> M;
  for (int c = 0; c < 2; ++c) {
    std::array<double, 2> y = {c == 0 ? 1.0 : 0.0, c == 1 ? 1.0 : 0.0};
    for (int i = 0; i < steps; ++i) {
      const double t = i * h;
      const auto k1 = rhs(t, y);
      const auto k2 = rhs(t + h / 2, {y[0] + h / 2 * k1[0], y[1] + h / 2 * k1[1]});
      const auto k3 = rhs(t + h / 2, {y[0] + h / 2 * k2[0], y[1] + h / 2 * k2[1]});
      const auto k4 = rhs(t + h, {y[0] + h * k3[0], y[1] + h * k3[1]});
      for (int j = 0; j < 2; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    M[c] = y;
  }
  const double tr = M[0][0] + M[1][1], det = M[0][0] * M[1][1] - M[1][0] * M[0][1];
  const double disc = tr * tr / 4 - det;
  if (disc <= 0) return 0.0;
  return std::log(std::abs(tr / 2) + std::sqrt(disc)) / T;
}

Outcome spectrum_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double residual = 0.0, limit = 0.0;
  bool brackets = true;
  for (double v : {1e-3, 1.0, 10.0, 1e6, 1e14})
    for (int m = 1; m <= 5; ++m) {
      const auto r = solve_root(v, m);
      residual = std::max(residual, root_residual(r, v) / std::max(1.0, v));
      brackets = brackets && r.kappa > (2 * m - 1) * pi && r.kappa < 2 * m * pi;
    }
  for (int m = 1; m <= 5; ++m) {
    limit = std::max(limit, std::abs(solve_root(1e14, m).kappa / (2 * m * pi) - 1.0));
    limit = std::max(limit, std::abs(solve_root(1e-9, m).kappa / ((2 * m - 1) * pi) - 1.0));
  }
  const double secs = seconds_since(t0);
  return {residual < 1e-10 && brackets && limit < 1e-8 && secs < 1.0,
          fmt("max residual %.2e (<1e-10), limit error %.2e (<1e-8), %.3f s (<1 s), brackets ", residual, limit,
              secs) +
              (brackets ? "respected" : "VIOLATED")};
}

Outcome epsilon_range() {
  std::string detail;
  bool ok = true;
  for (double V0 : {1e10, 1e13}) {
    const CavityConfig cav{1e-2, V0, 1e16};
    const auto table = spectrum_table(cav, V0, 3);
    for (int m = 1; m <= 3; ++m) {
      const double eps = epsilon_n(cav, table, m).epsilon;
      const bool in = eps >= 1e-8 && eps <= 1e-2;
      ok = ok && in;
      if (m == 1) detail += fmt("V0=%.0e: eps_1=%.3e", V0, eps) + (in ? "; " : " outside; ");
    }
  }
  return {ok, detail + "range [1e-8, 1e-2]"};
}

struct ResonantSetup {
  CavityConfig cavity;
  WavenumberTable table;
  std::vector<ModeModulation> mods;
  DriveProfile drive = DriveProfile::zero(1.0);
  double lambda = 0.0;
};

// L = 1, v = 10 (non-equidistant spectrum), eps = 1e-3 on mode 1, raised cosine at Omega = 2 k~ (1 + detuning).
ResonantSetup resonant_setup(int modes, double detuning = 0.0) {
  ResonantSetup s;
  s.cavity = {1.0, 10.0, 10.0};
  s.table = spectrum_table(s.cavity, s.cavity.V0, modes);
  s.cavity.Vmax = vmax_for_epsilon(s.cavity, s.table, 1, 1e-3);
  for (int m = 1; m <= modes; ++m) s.mods.push_back(make_modulation(s.cavity, s.table, m, 0.5));
  const double kt = s.mods[0].k_tilde();
  s.drive = DriveProfile::raised_cosine(pi / (kt * (1.0 + detuning)));
  s.lambda = 1e-3 * 0.5 * kt / 2.0;
  return s;
}

Outcome closed_resonance() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = resonant_setup(1);
  const auto& mod = s.mods[0];
  const double dt = 2.0 * pi / mod.k0 / 40.0;
  const auto tr = evolve_resonant(mod, s.drive, 3.2 / s.lambda, dt, 8);
  const double fitted = growth_rate_fit(tr, 2.0 / s.lambda, 3.0 / s.lambda).rate;
  // Oracle: x'' + (k~^2 + 2 eps k0^2 (f - 1/2)) x = 0 with f = (1 - cos W t) / 2.
  const double k0 = mod.k0, kt = mod.k_tilde(), e = mod.epsilon;
  const double oracle = 2.0 * mathieu_exponent(kt * kt - e * k0 * k0, 2.0 * e * k0 * k0, s.drive.omega(), 4000);
  const double formula = 2.0 * s.lambda;
  const auto det = resonant_setup(1, 10.0 * 1e-3);
  const auto trd = evolve_resonant(det.mods[0], det.drive, 3.2 / s.lambda, dt, 8);
  const double maxN = *std::max_element(trd.N.begin(), trd.N.end());
  const double secs = seconds_since(t0);
  const double d1 = std::abs(fitted / oracle - 1.0), d2 = std::abs(fitted / formula - 1.0);
  return {d1 < 0.05 && d2 < 0.05 && maxN < 0.01 && secs < 30.0,
          fmt("fitted %.6e vs Mathieu %.6e (%.2f%%) vs 2*eps*f1*k~/2 %.6e", fitted, oracle, 100 * d1, formula) +
              fmt(" (%.2f%%, tol 5%%); detuned max N %.2e (<1e-2); %.1f s (<30 s)", 100 * d2, maxN, secs)};
}

Outcome single_mode_dominance() {
  const auto s = resonant_setup(4);
  const double dt = 2.0 * pi / (s.mods.back().k0 * 1.001) / 40.0;
  const auto res = coupled_photon_numbers(s.table, s.mods, s.drive, 3.0 / s.lambda, dt, 64, 1);
  const Eigen::Index last = res.N.rows() - 1;
  const double Nres = res.N(last, 0);
  double worst = 0.0;
  for (int n = 1; n < 4; ++n) worst = std::max(worst, res.N(last, n) / Nres);
  return {worst < 0.05, fmt("resonant N %.3e at lambda t = 3; largest non-resonant share %.2e (<5e-2)", Nres, worst)};
}

EnvironmentSpec ohmic(double gamma, double cutoff, double temperature) {
  EnvironmentSpec e;
  e.gamma = gamma;
  e.cutoff = cutoff;
  e.temperature = temperature;
  e.schedule = CouplingSchedule::constant(1.0);
  return e;
}

Outcome kernel_limits() {
  const auto einstein = check_einstein_relation(ohmic(0.01, 10.0, 1000.0));
  double lo = 1e300, hi = 0.0;
  for (double cut : {1.0, 2.0, 5.0, 10.0}) {
    const double w = noise_kernel_width(ohmic(0.01, cut, 1000.0)) * cut;
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  const double spread = hi / lo - 1.0;
  return {einstein.residual < 0.02 && spread < 0.01,
          fmt("Einstein residual %.2e (<2e-2); width*Lambda in [%.6f, %.6f] over Lambda 1..10, spread %.2e (<1e-2)",
              einstein.residual, lo, hi, spread)};
}

Outcome noise_statistics() {
  const auto env = ohmic(0.05, 10.0, 20.0);
  const double dt = 0.01;
  const int n = 512, M = 10000;
  std::vector<double> lags(n + 1);
  for (int j = 0; j <= n; ++j) lags[j] = noise_kernel(env, dt * j, 0);
  std::string notice;
  const auto circ = stationary_sample_fft(lags, dt, M, 101, &notice, n);
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cov(i, j) = lags[std::abs(i - j)];
  const auto fact = sample(factorize_covariance(cov), 0.0, dt, M, 202);
  double worst = 0.0, worst_pair = 0.0;
  const int anchor = 200;
  for (int lag : {0, 1, 5, 20}) {
    double sc = 0.0, sf = 0.0;
    for (int r = 0; r < M; ++r) {
      sc += circ[r].values[anchor] * circ[r].values[anchor + lag];
      sf += fact[r].values[anchor] * fact[r].values[anchor + lag];
    }
    sc /= M;
    sf /= M;
    const double se = std::sqrt((lags[0] * lags[0] + lags[lag] * lags[lag]) / M);
    worst = std::max({worst, std::abs(sc - lags[lag]) / se, std::abs(sf - lags[lag]) / se});
    worst_pair = std::max(worst_pair, std::abs(sc - sf) / (std::sqrt(2.0) * se));
  }
  return {worst < 5.0 && worst_pair < 5.0 && notice.empty(),
          fmt("M = 1e4, 512 points, lags {0,1,5,20}: worst deviation %.2f SE (<5); circulant vs factorization %.2f SE (<5)",
              worst, worst_pair) +
              (notice.empty() ? "" : "; " + notice)};
}

OpenRunConfig open_config(double t_end, double dt) {
  OpenRunConfig c;
  c.cavity = {1.0, 10.0, 10.0};
  c.t_end = t_end;
  c.dt = dt;
  return c;
}

Outcome local_limit_consistency() {
  const auto s = resonant_setup(1);
  OpenRunConfig c = open_config(0.0, 2.0 * pi / s.mods[0].k0 / 40.0);
  c.cavity = s.cavity;
  c.drive = s.drive;
  c.t_end = 1.0 / s.lambda;
  const auto eq = assemble_effective(c);
  const double identity = std::abs(eq.C * (c.cavity.Vmax - c.cavity.V0) / (eq.mod.k0 * eq.mod.epsilon) - 1.0);
  const auto open = evolve_langevin(eq, nullptr, quantum_initial_state(eq.omega_ref(), eq.mod.norm), c.t_end);
  const auto closed = evolve_resonant(eq.mod, c.drive, c.t_end, c.dt);
  double sup = open.P.size() == closed.P.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(open.P.size(), closed.P.size()); ++i)
    sup = std::max({sup, std::abs(open.P[i] - closed.P[i]), std::abs(open.Pdot[i] - closed.Pdot[i])});
  return {sup <= 1e-8 && identity <= 1e-12,
          fmt("sup |open - closed| = %.2e over %.0f steps (<=1e-8); C (Vmax - V0) / (k0 eps) - 1 = %.1e (<=1e-12)", sup,
              static_cast<double>(open.P.size() - 1), identity)};
}

Outcome damped_limit() {
  OpenRunConfig c = open_config(60.0, 0.005);
  c.environment_on = true;
  c.environment = ohmic(0.01, 20.0, 1.0);
  c.noise_on = false;
  const auto eq = assemble_effective(c);
  const auto tr = evolve_langevin(eq, nullptr, quantum_initial_state(eq.omega_ref(), eq.mod.norm), c.t_end, 10);
  std::vector<double> E;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    const double w = eq.omega_ref();
    E.push_back(eq.mod.norm * (std::norm(tr.Pdot[i]) + w * w * std::norm(tr.P[i])) / 2.0);
  }
  const double fitted = -growth_rate_fit(tr.t, E, 5.0, 60.0).rate;
  const double expected = eq.friction_rate();
  const double dev = std::abs(fitted / expected - 1.0);
  return {dev < 0.02, fmt("energy decay rate %.6e vs 2 pi k0 C lambda0^2 J(w)/w = %.6e (%.3f%%, tol 2%%)", fitted,
                          expected, 100 * dev)};
}

Outcome thermalization() {
  const auto t0 = std::chrono::steady_clock::now();
  OpenRunConfig c = open_config(30.0, 0.01);
  c.environment_on = true;
  c.environment = ohmic(0.25, 10.0, 200.0);
  c.ensemble = 10000;
  c.seed = 2024;
  c.stride = 100;
  const auto r = ensemble_run(c);
  const auto eq = assemble_effective(c);
  const double T = c.environment.temperature, k0 = eq.mod.k0;
  const double pot = eq.mod.norm * k0 * k0 * r.mean_PF2.back();
  const double se = std::sqrt(2.0 / c.ensemble) * pot;
  const double z = (pot - T) / se;
  const double secs = seconds_since(t0);
  return {std::abs(z) < 5.0 && secs < 300.0,
          fmt("norm k0^2 <P_F^2> = %.3f vs T = %.0f (%.2f SE, tol 5); %.1f s (<300 s)", pot, T, z, secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dcelab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  // The check command prints its own table; keep the acceptance output to one line per criterion.
  std::ostringstream sink;
  auto* saved = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(saved);
  return code;
}

Outcome determinism(const fs::path& configs) {
  const fs::path root = fs::temp_directory_path() / "dcelab_acceptance";
  fs::remove_all(root);
  struct Job {
    std::string command, config, threads_a, threads_b;
  };
  const std::vector<Job> jobs = {{"spectrum", "centimetre_cavity.ini", "1", "1"},
                                 {"closed", "default.ini", "1", "1"},
                                 {"closed", "coupled.ini", "1", "4"},
                                 {"open", "open_damped.ini", "1", "1"},
                                 {"open", "open_ensemble.ini", "1", "4"},
                                 {"noise", "noise.ini", "1", "1"},
                                 {"check", "default.ini", "1", "1"}};
  int files = 0;
  std::string mismatch;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& job = jobs[j];
    const fs::path a = root / (std::to_string(j) + "a"), b = root / (std::to_string(j) + "b");
    const std::string cfg = (configs / job.config).string();
    const int ca = invoke({job.command, "--config", cfg, "--out", a.string(), "--threads", job.threads_a});
    const int cb = invoke({job.command, "--config", cfg, "--out", b.string(), "--threads", job.threads_b});
    if (ca != 0 || cb != 0) mismatch += job.command + " exit " + std::to_string(ca) + "/" + std::to_string(cb) + " ";
    for (const auto& e : fs::directory_iterator(a)) {
      const auto name = e.path().filename();
      if (name == "timing.json") continue;
      ++files;
      if (!fs::exists(b / name) || slurp(e.path()) != slurp(b / name)) mismatch += (a / name).string() + " ";
    }
  }
  return {mismatch.empty(), std::to_string(files) + " output files across 7 reruns compared byte for byte" +
                                (mismatch.empty() ? ", all identical (threads 1 vs 4 for ensembles)"
                                                  : "; differ: " + mismatch)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path configs = argc > 1 ? fs::path(argv[1]) : fs::path(DCELAB_CONFIG_DIR);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"spectrum correctness", spectrum_correctness},
      {"epsilon range at centimetre scale", epsilon_range},
      {"closed parametric resonance", closed_resonance},
      {"single-mode dominance", single_mode_dominance},
      {"kernel limits", kernel_limits},
      {"noise synthesis statistics", noise_statistics},
      {"open/closed local-limit consistency", local_limit_consistency},
      {"damped limit", damped_limit},
      {"thermalization", thermalization},
      {"determinism", [&] { return determinism(configs); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.passed ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
