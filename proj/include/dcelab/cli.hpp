#pragma once

// Command-line front end: INI-style experiment configs, the spectrum / closed / open /
// noise / check pipelines, and bit-stable CSV and JSON outputs.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcelab/drive.hpp"
#include "dcelab/environment.hpp"
#include "dcelab/open_mode.hpp"
#include "dcelab/spectrum.hpp"

namespace dcelab::cli {

/// Sections of key = value lines. '#' and ';' start comments.
struct IniEntry {
  std::string value;
  int line = 0;
};
using IniDocument = std::map<std::string, std::map<std::string, IniEntry>>;

/// Throws ConfigurationError naming the source and line on malformed input or duplicate keys.
IniDocument parse_ini(const std::string& text, const std::string& source = "<config>");

struct ExperimentConfig {
  // [cavity]
  double L = 1.0;
  double V0 = 10.0;
  double Vmax = 0.0;     // 0: derived from epsilon, or equal to V0 when epsilon is unset too
  double epsilon = 0.0;  // target modulation of run.mode; exclusive with Vmax

  // [drive]
  PulseFamily drive_family = PulseFamily::raised_cosine;
  double period = 0.0;     // 0: parametric resonance, Omega = 2 k~ (1 + detuning)
  double detuning = 0.0;
  double tau_e_over_T = 0.02;
  double tau_r_over_T = 0.025;
  std::string pulse_file;  // tabulated family, CSV "t,f"

  // [environment]
  bool environment = false;
  SpectralFamily spectral_family = SpectralFamily::ohmic;
  double power = 3.0;
  double gamma = 0.0;
  double cutoff = 10.0;
  double temperature = 0.0;
  double lambda0 = 1.0;
  bool drive_tied = false;

  // [run]
  int mode = 1;
  int modes = 4;
  bool coupled = false;
  double t_end = 0.0;         // absolute end time; exclusive with t_end_growth
  double t_end_growth = 0.0;  // end time in units of 1 / lambda, lambda the resonant growth rate
  double dt = 0.0;            // 0: period of the fastest mode / steps_per_period
  int steps_per_period = 40;
  int ensemble = 1;
  std::uint64_t seed = 0;
  int stride = 1;
  int threads = 1;
  bool noise = true;
  NoiseMethod noise_method = NoiseMethod::circulant;
  double window_tol = 1e-8;
  bool full_memory = false;
  bool environment_gA = true;
  bool local_drive_gA = false;
  double epsilon_bound = 0.05;
  double fit_lo_growth = 2.0;
  double fit_hi_growth = 3.0;
  int keep_samples = 0;

  // [check]
  double perturb_root = 0.0;  // relative offset added to every root before its residual check

  /// Every key with its resolved value, in schema order; parses back to the same config.
  std::string canonical() const;
};

/// Applies a parsed document onto defaults. Unknown sections or keys, bad values and
/// inconsistent combinations raise ConfigurationError with line diagnostics.
ExperimentConfig load_config(const IniDocument& doc, const std::string& source = "<config>");
ExperimentConfig load_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config_file(const std::string& path);

/// Physical objects resolved from a config: table at V0, Vmax, drive and environment.
struct ResolvedSetup {
  CavityConfig cavity;
  WavenumberTable table;
  DriveProfile drive = DriveProfile::zero(1.0);
  EnvironmentSpec environment;
  double growth_rate = 0.0;  // lambda = eps f1 k~ / 2 of run.mode; 0 without drive
  double t_end = 0.0;
  double dt = 0.0;
};

ResolvedSetup resolve(const ExperimentConfig& config);
OpenRunConfig open_run_config(const ExperimentConfig& config, const ResolvedSetup& setup);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);
/// Shortest round-trip-safe text for CSV and JSON: 17 significant digits.
std::string format_double(double x);

/// Entry point of the dcelab executable; returns the process exit code.
/// 0 success, 1 failed checks, 2 usage or configuration error, 3 numerical failure.
int run(int argc, char** argv);

}  // namespace dcelab::cli
