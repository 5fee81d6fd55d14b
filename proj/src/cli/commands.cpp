#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "dcelab/cli.hpp"
#include "dcelab/closed_dynamics.hpp"
#include "dcelab/errors.hpp"
#include "dcelab/noise.hpp"
#include "dcelab/quadrature.hpp"
#include "dcelab/open_mode.hpp"

namespace dcelab::cli {

using json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw InternalError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

constexpr const char* kVersion = "0.1.0";

// Numbers in JSON reports use the same 17-digit text as the CSV files.
json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return json::parse(format_double(x));
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
    text_ += "\n";
  }
  Csv& row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) text_ += (i ? "," : "") + format_double(values[i]);
    text_ += "\n";
    return *this;
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

// Collects outputs in memory; one writer flushes them with the manifest at the end.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(const std::string& name, const std::string& body) { files.emplace_back(name, body); }
  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw ConfigurationError("cannot write '" + path.string() + "'");
}

// Manifest content is a function of the command, the resolved config and the outputs only;
// wall-clock times go to timing.json so reruns stay byte-identical.
void flush(const std::filesystem::path& dir, const std::string& command, const ExperimentConfig& cfg,
           const Outputs& out, const std::string& started, double seconds) {
  std::filesystem::create_directories(dir);
  json files = json::object();
  for (const auto& [name, body] : out.files) {
    write_file(dir / name, body);
    files[name] = {{"sha256", sha256_hex(body)}, {"bytes", body.size()}};
  }
  json manifest = {{"tool", "dcelab"},
                   {"version", kVersion},
                   {"command", command},
                   {"seed", std::to_string(cfg.seed)},
                   {"config", cfg.canonical()},
                   {"files", files}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  json timing = {{"command", command}, {"started", started}, {"finished", utc_now()}, {"seconds", seconds}};
  write_file(dir / "timing.json", timing.dump(2) + "\n");
}

}  // namespace

namespace {

void require_time(const ResolvedSetup& s) {
  if (!(s.t_end > 0.0)) throw ConfigurationError("run.t_end or run.t_end_growth is required for this command");
}

ModeModulation modulation(const ExperimentConfig& c, const ResolvedSetup& s, int m) {
  const double f0 = s.drive.family() == PulseFamily::zero ? 0.0 : fourier_coefficients(s.drive, 1).f0;
  return make_modulation(s.cavity, s.table, m, f0, c.epsilon_bound);
}

void cmd_spectrum(const ExperimentConfig& c, Outputs& out) {
  const ResolvedSetup s = resolve(c);
  Csv csv({"m", "kL", "norm", "epsilon"});
  for (int m = 1; m <= c.modes; ++m) {
    const auto& e = s.table.mode(m);
    const double eps = s.cavity.Vmax > s.cavity.V0 ? epsilon_n(s.cavity, s.table, m).epsilon : 0.0;
    csv.row({static_cast<double>(m), e.root.kappa, e.norm(), eps});
  }
  out.add("spectrum.csv", csv.str());
}

json growth_report(const std::vector<double>& t, const std::vector<double>& N, const ExperimentConfig& c,
                   const ResolvedSetup& s) {
  json r = {{"lambda", number(s.growth_rate)}, {"oracle_rate", number(2.0 * s.growth_rate)}};
  if (s.growth_rate > 0.0 && c.fit_hi_growth / s.growth_rate <= s.t_end * (1.0 + 1e-12)) {
    const auto fit = growth_rate_fit(t, N, c.fit_lo_growth / s.growth_rate, c.fit_hi_growth / s.growth_rate);
    r["fitted_rate"] = number(fit.rate);
    r["std_error"] = number(fit.std_error);
    r["points"] = fit.points;
    r["relative_deviation"] = number(fit.rate / (2.0 * s.growth_rate) - 1.0);
  }
  return r;
}

void cmd_closed(const ExperimentConfig& c, Outputs& out) {
  const ResolvedSetup s = resolve(c);
  require_time(s);
  json report = {{"t_end", number(s.t_end)}, {"dt", number(s.dt)}};
  if (!c.coupled) {
    const auto mod = modulation(c, s, c.mode);
    const auto tr = evolve_resonant(mod, s.drive, s.t_end, s.dt, c.stride);
    Csv csv({"t", "P_re", "P_im", "Pdot_re", "Pdot_im", "N"});
    for (std::size_t i = 0; i < tr.t.size(); ++i)
      csv.row({tr.t[i], tr.P[i].real(), tr.P[i].imag(), tr.Pdot[i].real(), tr.Pdot[i].imag(), tr.N[i]});
    out.add("closed.csv", csv.str());
    report["epsilon"] = number(mod.epsilon);
    report["k_tilde"] = number(mod.k_tilde());
    report["max_N"] = number(*std::max_element(tr.N.begin(), tr.N.end()));
    report["growth"] = growth_report(tr.t, tr.N, c, s);
  } else {
    std::vector<ModeModulation> mods;
    for (int m = 1; m <= c.modes; ++m) mods.push_back(modulation(c, s, m));
    const auto res = coupled_photon_numbers(s.table, mods, s.drive, s.t_end, s.dt, c.stride, c.threads);
    std::vector<std::string> header{"t"};
    for (int m = 1; m <= c.modes; ++m) header.push_back("N_" + std::to_string(m));
    Csv csv(header);
    for (std::size_t i = 0; i < res.t.size(); ++i) {
      std::vector<double> row{res.t[i]};
      for (int m = 0; m < c.modes; ++m) row.push_back(res.N(static_cast<Eigen::Index>(i), m));
      csv.row(row);
    }
    out.add("closed_coupled.csv", csv.str());
    const Eigen::Index last = res.N.rows() - 1;
    const double resonant = res.N(last, c.mode - 1);
    json final = json::array(), share = json::array();
    for (int m = 0; m < c.modes; ++m) {
      final.push_back(number(res.N(last, m)));
      share.push_back(number(res.N(last, m) / resonant));
    }
    report["final_N"] = final;
    report["share_of_resonant"] = share;
    std::vector<double> Nr(res.t.size());
    for (std::size_t i = 0; i < Nr.size(); ++i) Nr[i] = res.N(static_cast<Eigen::Index>(i), c.mode - 1);
    report["growth"] = growth_report(res.t, Nr, c, s);
  }
  out.add_json("closed_report.json", report);
}

void cmd_open(const ExperimentConfig& c, Outputs& out) {
  const ResolvedSetup s = resolve(c);
  require_time(s);
  const OpenRunConfig oc = open_run_config(c, s);
  const auto eq = assemble_effective(oc);
  const auto r = ensemble_run(oc, c.keep_samples);
  Csv csv({"t", "mean_N", "var_N", "mean_N_floor_subtracted", "N_hom", "mean_PF2", "mean_dPF2"});
  for (std::size_t i = 0; i < r.t.size(); ++i)
    csv.row({r.t[i], r.mean_N[i], r.var_N[i], r.mean_N_floor_subtracted[i], r.homogeneous.N[i], r.mean_PF2[i],
             r.mean_dPF2[i]});
  out.add("open.csv", csv.str());
  for (std::size_t k = 0; k < r.samples.size(); ++k) {
    const auto& tr = r.samples[k];
    Csv sc({"t", "P", "Pdot"});
    for (std::size_t i = 0; i < tr.t.size(); ++i) sc.row({tr.t[i], tr.P[i].real(), tr.Pdot[i].real()});
    out.add("sample_" + std::to_string(k) + ".csv", sc.str());
  }
  const double k0 = eq.mod.k0, norm = eq.mod.norm;
  const double pot = norm * k0 * k0 * r.mean_PF2.back(), kin = norm * r.mean_dPF2.back();
  json report = {{"t_end", number(r.t.back())},
                 {"dt", number(eq.dt)},
                 {"single_mode", true},
                 {"C", number(eq.C)},
                 {"gA", number(eq.gA)},
                 {"friction_rate", number(eq.friction_rate())},
                 {"memory_window", r.window},
                 {"local_kernel_sum", number(eq.ell)},
                 {"thermal_floor", number(r.thermal_floor)},
                 {"ensemble", c.ensemble},
                 {"final_mean_N", number(r.mean_N.back())},
                 {"final_var_N", number(r.var_N.back())},
                 {"equipartition_potential", number(pot)},
                 {"equipartition_kinetic", number(kin)},
                 {"equipartition_std_error", number(std::sqrt(2.0 / c.ensemble) * pot)},
                 {"notice", r.notice}};
  report["growth"] = growth_report(r.t, r.homogeneous.N, c, s);
  out.add_json("open_report.json", report);
}

void cmd_noise(const ExperimentConfig& c, Outputs& out) {
  if (!c.environment) throw ConfigurationError("noise synthesis needs [environment] enabled = true");
  const ResolvedSetup s = resolve(c);
  require_time(s);
  const OpenRunConfig oc = open_run_config(c, s);
  const auto eq = assemble_effective(oc);
  const int points = static_cast<int>(step_count(s.t_end, eq.dt)) + 1;
  const NoiseSource src(eq, points, c.noise_method, c.seed);
  std::vector<std::string> header{"t"};
  for (int r = 0; r < c.ensemble; ++r) header.push_back("F_" + std::to_string(r));
  std::vector<NoiseInput> draws;
  for (int r = 0; r < c.ensemble; ++r) draws.push_back(src.draw(static_cast<std::uint64_t>(r)));
  Csv csv(header);
  for (int i = 0; i < points; ++i) {
    std::vector<double> row{eq.dt * i};
    for (const auto& d : draws) row.push_back(d.F[i]);
    csv.row(row);
  }
  out.add("noise.csv", csv.str());
  // Empirical covariance at a few lags, averaged over realizations and start points.
  json lags = json::array();
  for (int lag : {0, 1, 5}) {
    if (lag >= points) break;
    double sum = 0.0;
    long count = 0;
    for (const auto& d : draws)
      for (int i = 0; i + lag < points; ++i, ++count) sum += d.F[i] * d.F[i + lag];
    lags.push_back({{"lag", lag},
                    {"empirical", number(sum / static_cast<double>(count))},
                    {"target", number(noise_kernel(s.environment, eq.dt * lag, 0))}});
  }
  out.add_json("noise_report.json", {{"points", points}, {"dt", number(eq.dt)}, {"realizations", c.ensemble},
                                     {"method", c.noise_method == NoiseMethod::circulant ? "circulant" : "factorization"},
                                     {"notice", src.notice()}, {"covariance", lags}});
}

}  // namespace

namespace {

struct CheckRow {
  std::string name;
  double tolerance;
  double observed;
  bool passed;
};

EnvironmentSpec check_environment(const ExperimentConfig& c, const ResolvedSetup& s) {
  if (c.environment && c.spectral_family == SpectralFamily::ohmic) return s.environment;
  EnvironmentSpec e;
  e.gamma = 0.01;
  e.cutoff = 10.0;
  e.temperature = 1.0;
  e.schedule = CouplingSchedule::constant(1.0);
  return e;
}

std::vector<CheckRow> run_checks(const ExperimentConfig& c) {
  std::vector<CheckRow> rows;
  auto add = [&](std::string name, double tol, double observed) {
    rows.push_back({std::move(name), tol, observed, std::isfinite(observed) && observed <= tol});
  };

  // Roots: residuals and brackets over the sheet-strength decades, optionally perturbed.
  double worst_residual = 0.0, worst_bracket = 0.0;
  for (double v : {1e-3, 1.0, 10.0, 1e6, 1e14})
    for (int m = 1; m <= 5; ++m) {
      RootEntry r = solve_root(v, m);
      if (c.perturb_root != 0.0) {
        const double shift = c.perturb_root * r.kappa;
        r.offset += r.anchored_right ? -shift : shift;
        r.kappa += shift;
      }
      worst_residual = std::max(worst_residual, root_residual(r, v) / std::max(1.0, v));
      const double lo = (2 * m - 1) * std::numbers::pi, hi = 2 * m * std::numbers::pi;
      worst_bracket = std::max(worst_bracket, r.kappa <= lo || r.kappa >= hi ? 1.0 : 0.0);
    }
  add("root_residual", 1e-10, worst_residual);
  add("root_brackets", 0.0, worst_bracket);
  double limit = 0.0;
  for (int m = 1; m <= 5; ++m) {
    limit = std::max(limit, std::abs(solve_root(1e14, m).kappa / (2 * m * std::numbers::pi) - 1.0));
    limit = std::max(limit, std::abs(solve_root(1e-9, m).kappa / ((2 * m - 1) * std::numbers::pi) - 1.0));
  }
  add("root_limits", 1e-8, limit);

  const ResolvedSetup s = resolve(c);
  // Orthogonality of distinct modes at V0, integrated on each side of the sheet.
  double ortho = 0.0;
  const int top = std::min(c.modes, 5);
  for (int m = 1; m <= top; ++m)
    for (int n = m + 1; n <= top; ++n) {
      const ModeFunction a{s.table.mode(m).k, c.L}, b{s.table.mode(n).k, c.L};
      auto g = [&](double x) { return mode_value(a, x) * mode_value(b, x); };
      const double ip = simpson<double>(g, 0.0, c.L / 2, 4096) + simpson<double>(g, c.L / 2, c.L, 4096);
      ortho = std::max(ortho, std::abs(ip));
    }
  add("mode_orthogonality", 1e-9, ortho);

  // Boundary prefactor identity C (Vmax - V0) = k0 eps.
  {
    CavityConfig cav = s.cavity;
    if (!(cav.Vmax > cav.V0)) cav.Vmax = vmax_for_epsilon(cav, s.table, c.mode, 1e-3);
    const double k0 = s.table.mode(c.mode).k, L = cav.L, V0 = cav.V0;
    const double C = k0 / (V0 + V0 * V0 * L / 4.0 + k0 * k0 * L);
    const double eps = epsilon_n(cav, s.table, c.mode).epsilon;
    add("prefactor_identity", 1e-12, std::abs(C * (cav.Vmax - V0) / (k0 * eps) - 1.0));
  }

  // Fluctuation-dissipation: N~'(s) -> -2 T D~(s) for T >> Lambda.
  EnvironmentSpec env = check_environment(c, s);
  {
    EnvironmentSpec hot = env;
    hot.temperature = 1000.0 * hot.cutoff;
    double worst = 0.0, scale = 0.0;
    for (int j = 1; j <= 40; ++j) {
      const double lag = 0.1 * j / hot.cutoff;
      const double d = dissipation_kernel(hot, lag, 0);
      scale = std::max(scale, std::abs(2.0 * hot.temperature * d));
      worst = std::max(worst, std::abs(noise_kernel(hot, lag, 1) + 2.0 * hot.temperature * d));
    }
    add("fluctuation_dissipation", 1e-5, worst / scale);
    hot.temperature = 100.0 * hot.cutoff;
    add("einstein_relation", 0.02, check_einstein_relation(hot).residual);
    double lo = 1e300, hi = 0.0;
    for (double cut : {1.0, 3.0, 10.0}) {
      EnvironmentSpec w = hot;
      w.cutoff = cut;
      w.temperature = 100.0 * 10.0;
      const double scaled = noise_kernel_width(w) * cut;
      lo = std::min(lo, scaled);
      hi = std::max(hi, scaled);
    }
    add("noise_width_scaling", 0.01, hi / lo - 1.0);
  }
  if (c.environment) {
    const int n = 257;
    std::vector<double> Nt(n);
    for (int j = 0; j < n; ++j) Nt[j] = noise_kernel(env, s.dt * j, 0);
    add("noise_spectrum_psd", 1e-10, std::max(0.0, -noise_spectrum_min_ratio(Nt)));
  }

  // Local-limit equivalence: environment-off open dynamics against the closed oscillator.
  {
    ExperimentConfig local = c;
    local.environment = false;
    local.coupled = false;
    if (!(local.epsilon > 0.0) && !(local.Vmax > local.V0)) {
      local.epsilon = 1e-3;
      local.Vmax = 0.0;
    }
    if (local.drive_family == PulseFamily::zero) local.drive_family = PulseFamily::raised_cosine;
    ResolvedSetup ls = resolve(local);
    ls.t_end = 100.0 * ls.drive.period();
    OpenRunConfig oc = open_run_config(local, ls);
    const auto eq = assemble_effective(oc);
    const auto open = evolve_langevin(eq, nullptr, quantum_initial_state(eq.omega_ref(), eq.mod.norm), ls.t_end);
    const auto closed = evolve_resonant(eq.mod, ls.drive, ls.t_end, ls.dt);
    double sup = 0.0;
    for (std::size_t i = 0; i < std::min(open.P.size(), closed.P.size()); ++i)
      sup = std::max({sup, std::abs(open.P[i] - closed.P[i]), std::abs(open.Pdot[i] - closed.Pdot[i])});
    if (open.P.size() != closed.P.size()) sup = INFINITY;
    add("local_limit_equivalence", 1e-8, sup);
  }
  return rows;
}

int cmd_check(const ExperimentConfig& c, Outputs& out) {
  const auto rows = run_checks(c);
  json list = json::array();
  bool all = true;
  for (const auto& r : rows) {
    list.push_back({{"name", r.name}, {"tolerance", number(r.tolerance)}, {"observed", number(r.observed)},
                    {"passed", r.passed}});
    all = all && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " observed " << format_double(r.observed)
              << " tolerance " << format_double(r.tolerance) << "\n";
  }
  out.add_json("check_report.json", {{"count", rows.size()}, {"passed", all}, {"checks", list}});
  return all ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Dynamical Casimir cavity laboratory: spectrum, closed and open mode dynamics"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
  const char* names[] = {"spectrum", "closed", "open", "noise", "check"};
  const char* help[] = {"cavity wavenumbers, norms and modulation depths",
                        "closed-cavity mode dynamics and growth-rate fit",
                        "open-mode ensemble with dissipation and noise",
                        "stationary environment noise realizations",
                        "invariant suite; exit code 1 when any check fails"};
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> seed_opts;
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config_path, "experiment config (INI sections)")->required();
    sub->add_option("--out", out_dir, "output directory");
    seed_opts.push_back(sub->add_option("--seed", seed, "overrides run.seed"));
    sub->add_option("--threads", threads, "worker threads; falls back to DCE_LAB_THREADS")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  int which = 0;
  while (!subs[which]->parsed()) ++which;
  const std::string command = names[which];
  const auto start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  try {
    ExperimentConfig cfg = load_config_file(config_path);
    if (seed_opts[which]->count() > 0) cfg.seed = seed;
    ExperimentConfig exec = cfg;
    if (threads > 0) {
      exec.threads = threads;
    } else if (const char* env = std::getenv("DCE_LAB_THREADS")) {
      const int t = std::atoi(env);
      if (t < 1) throw ConfigurationError("DCE_LAB_THREADS must be a positive integer");
      exec.threads = t;
    }
    Outputs out;
    int code = 0;
    switch (which) {
      case 0: cmd_spectrum(exec, out); break;
      case 1: cmd_closed(exec, out); break;
      case 2: cmd_open(exec, out); break;
      case 3: cmd_noise(exec, out); break;
      default: code = cmd_check(exec, out); break;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    flush(out_dir, command, cfg, out, started, seconds);
    return code;
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace dcelab::cli
