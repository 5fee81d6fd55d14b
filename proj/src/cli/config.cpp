#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "dcelab/cli.hpp"
#include "dcelab/errors.hpp"

namespace dcelab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, int line) { return source + ":" + std::to_string(line) + ": "; }

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto cut = raw.find_first_of("#;");
    const std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigurationError(where(source, line) + "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      doc[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigurationError(where(source, line) + "expected key = value");
    if (section.empty()) throw ConfigurationError(where(source, line) + "key outside any [section]");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigurationError(where(source, line) + "empty key");
    auto& sec = doc[section];
    if (auto it = sec.find(key); it != sec.end())
      throw ConfigurationError(where(source, line) + "duplicate key '" + key + "' in [" + section +
                               "], first set on line " + std::to_string(it->second.line));
    sec[key] = {trim(s.substr(eq + 1)), line};
  }
  return doc;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

using Config = ExperimentConfig;

struct Field {
  const char* section;
  const char* key;
  std::function<void(Config&, const std::string&)> set;  // throws std::invalid_argument with a reason
  std::function<std::string(const Config&)> get;
};

double parse_double(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x))
    throw std::invalid_argument("expected a finite number, got '" + v + "'");
  return x;
}

long long parse_integer(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw std::invalid_argument("expected an integer, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

Field real(const char* sec, const char* key, double Config::*m) {
  return {sec, key, [m](Config& c, const std::string& v) { c.*m = parse_double(v); },
          [m](const Config& c) { return format_double(c.*m); }};
}

Field integer(const char* sec, const char* key, int Config::*m) {
  return {sec, key,
          [m](Config& c, const std::string& v) {
            const long long x = parse_integer(v);
            if (x < -2147483647LL || x > 2147483647LL) throw std::invalid_argument("integer out of range");
            c.*m = static_cast<int>(x);
          },
          [m](const Config& c) { return std::to_string(c.*m); }};
}

Field flag(const char* sec, const char* key, bool Config::*m) {
  return {sec, key, [m](Config& c, const std::string& v) { c.*m = parse_bool(v); },
          [m](const Config& c) { return std::string(c.*m ? "true" : "false"); }};
}

template <typename E>
Field choice(const char* sec, const char* key, E Config::*m, std::vector<std::pair<std::string, E>> names) {
  return {sec, key,
          [m, names](Config& c, const std::string& v) {
            for (const auto& [n, e] : names)
              if (n == v) {
                c.*m = e;
                return;
              }
            std::string all;
            for (const auto& [n, e] : names) all += (all.empty() ? "" : ", ") + n;
            throw std::invalid_argument("unknown value '" + v + "' (one of: " + all + ")");
          },
          [m, names](const Config& c) {
            for (const auto& [n, e] : names)
              if (c.*m == e) return n;
            return std::string("?");
          }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(real("cavity", "L", &Config::L));
    f.push_back(real("cavity", "V0", &Config::V0));
    f.push_back(real("cavity", "Vmax", &Config::Vmax));
    f.push_back(real("cavity", "epsilon", &Config::epsilon));
    f.push_back(choice<PulseFamily>("drive", "family", &Config::drive_family,
                                    {{"raised_cosine", PulseFamily::raised_cosine},
                                     {"fast_rise", PulseFamily::fast_rise},
                                     {"tabulated", PulseFamily::tabulated},
                                     {"zero", PulseFamily::zero}}));
    f.push_back(real("drive", "period", &Config::period));
    f.push_back(real("drive", "detuning", &Config::detuning));
    f.push_back(real("drive", "tau_e_over_T", &Config::tau_e_over_T));
    f.push_back(real("drive", "tau_r_over_T", &Config::tau_r_over_T));
    f.push_back({"drive", "file", [](Config& c, const std::string& v) { c.pulse_file = v; },
                 [](const Config& c) { return c.pulse_file; }});
    f.push_back(flag("environment", "enabled", &Config::environment));
    f.push_back(choice<SpectralFamily>("environment", "family", &Config::spectral_family,
                                       {{"ohmic", SpectralFamily::ohmic}, {"supraohmic", SpectralFamily::supraohmic}}));
    f.push_back(real("environment", "power", &Config::power));
    f.push_back(real("environment", "gamma", &Config::gamma));
    f.push_back(real("environment", "cutoff", &Config::cutoff));
    f.push_back(real("environment", "temperature", &Config::temperature));
    f.push_back(real("environment", "lambda0", &Config::lambda0));
    f.push_back(choice<bool>("environment", "schedule", &Config::drive_tied,
                             {{"constant", false}, {"drive_tied", true}}));
    f.push_back(integer("run", "mode", &Config::mode));
    f.push_back(integer("run", "modes", &Config::modes));
    f.push_back(flag("run", "coupled", &Config::coupled));
    f.push_back(real("run", "t_end", &Config::t_end));
    f.push_back(real("run", "t_end_growth", &Config::t_end_growth));
    f.push_back(real("run", "dt", &Config::dt));
    f.push_back(integer("run", "steps_per_period", &Config::steps_per_period));
    f.push_back(integer("run", "ensemble", &Config::ensemble));
    f.push_back({"run", "seed",
                 [](Config& c, const std::string& v) {
                   if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
                     throw std::invalid_argument("expected an unsigned 64-bit integer, got '" + v + "'");
                   errno = 0;
                   c.seed = std::strtoull(v.c_str(), nullptr, 10);
                   if (errno == ERANGE) throw std::invalid_argument("seed out of range");
                 },
                 [](const Config& c) { return std::to_string(c.seed); }});
    f.push_back(integer("run", "stride", &Config::stride));
    f.push_back(integer("run", "threads", &Config::threads));
    f.push_back(flag("run", "noise", &Config::noise));
    f.push_back(choice<NoiseMethod>("run", "noise_method", &Config::noise_method,
                                    {{"circulant", NoiseMethod::circulant},
                                     {"factorization", NoiseMethod::factorization}}));
    f.push_back(real("run", "window_tol", &Config::window_tol));
    f.push_back(flag("run", "full_memory", &Config::full_memory));
    f.push_back(flag("run", "environment_gA", &Config::environment_gA));
    f.push_back(flag("run", "local_drive_gA", &Config::local_drive_gA));
    f.push_back(real("run", "epsilon_bound", &Config::epsilon_bound));
    f.push_back(real("run", "fit_lo_growth", &Config::fit_lo_growth));
    f.push_back(real("run", "fit_hi_growth", &Config::fit_hi_growth));
    f.push_back(integer("run", "keep_samples", &Config::keep_samples));
    f.push_back(real("check", "perturb_root", &Config::perturb_root));
    return f;
  }();
  return fields;
}

}  // namespace

std::string ExperimentConfig::canonical() const {
  std::string out, section;
  for (const auto& f : schema()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(*this) + "\n";
  }
  return out;
}

ExperimentConfig load_config(const IniDocument& doc, const std::string& source) {
  Config c;
  auto line_of = [&](const char* sec, const char* key) {
    if (auto s = doc.find(sec); s != doc.end())
      if (auto k = s->second.find(key); k != s->second.end()) return k->second.line;
    return 0;
  };
  for (const auto& [sec, keys] : doc) {
    const bool known = std::any_of(schema().begin(), schema().end(), [&](const Field& f) { return sec == f.section; });
    if (!known) {
      const int line = keys.empty() ? 0 : keys.begin()->second.line;
      throw ConfigurationError(where(source, line) + "unknown section [" + sec + "]");
    }
    for (const auto& [key, entry] : keys) {
      auto it = std::find_if(schema().begin(), schema().end(),
                             [&](const Field& f) { return sec == f.section && key == f.key; });
      if (it == schema().end())
        throw ConfigurationError(where(source, entry.line) + "unknown key '" + key + "' in [" + sec + "]");
      try {
        it->set(c, entry.value);
      } catch (const std::invalid_argument& e) {
        throw ConfigurationError(where(source, entry.line) + sec + "." + key + ": " + e.what());
      }
    }
  }

  auto require = [&](bool ok, const char* sec, const char* key, const std::string& why) {
    if (!ok) throw ConfigurationError(where(source, line_of(sec, key)) + sec + "." + key + ": " + why);
  };
  require(c.L > 0.0, "cavity", "L", "must be positive");
  require(c.V0 >= 0.0, "cavity", "V0", "must be non-negative");
  require(c.Vmax == 0.0 || c.Vmax >= c.V0, "cavity", "Vmax", "must be at least V0");
  require(c.epsilon >= 0.0, "cavity", "epsilon", "must be non-negative");
  require(!(c.epsilon > 0.0 && c.Vmax > 0.0), "cavity", "epsilon", "set either Vmax or epsilon, not both");
  require(c.period >= 0.0, "drive", "period", "must be non-negative");
  require(c.detuning > -1.0, "drive", "detuning", "must exceed -1");
  require(c.tau_e_over_T > 0.0 && c.tau_e_over_T < 1.0, "drive", "tau_e_over_T", "must lie in (0, 1)");
  require(c.tau_r_over_T > 0.0, "drive", "tau_r_over_T", "must be positive");
  require(c.drive_family != PulseFamily::tabulated || !c.pulse_file.empty(), "drive", "file",
          "the tabulated family needs a pulse file");
  require(c.drive_family != PulseFamily::tabulated || c.period == 0.0, "drive", "period",
          "tabulated pulses take their period from the file");
  require(c.gamma >= 0.0, "environment", "gamma", "must be non-negative");
  require(c.cutoff > 0.0, "environment", "cutoff", "must be positive");
  require(c.temperature >= 0.0, "environment", "temperature", "must be non-negative");
  require(c.lambda0 >= 0.0, "environment", "lambda0", "must be non-negative");
  require(c.spectral_family == SpectralFamily::ohmic || c.power >= 2.0, "environment", "power",
          "supraohmic power must be at least 2");
  require(c.mode >= 1, "run", "mode", "must be >= 1");
  require(c.modes >= c.mode, "run", "modes", "must be at least run.mode");
  require(c.t_end >= 0.0 && c.t_end_growth >= 0.0, "run", "t_end", "must be non-negative");
  require(!(c.t_end > 0.0 && c.t_end_growth > 0.0), "run", "t_end_growth", "set either t_end or t_end_growth");
  require(c.dt >= 0.0, "run", "dt", "must be non-negative");
  require(c.steps_per_period >= 20, "run", "steps_per_period", "must be >= 20");
  require(c.ensemble >= 1, "run", "ensemble", "must be >= 1");
  require(c.stride >= 1, "run", "stride", "must be >= 1");
  require(c.threads >= 1, "run", "threads", "must be >= 1");
  require(c.window_tol > 0.0 && c.window_tol < 1.0, "run", "window_tol", "must lie in (0, 1)");
  require(c.epsilon_bound > 0.0, "run", "epsilon_bound", "must be positive");
  require(c.fit_lo_growth >= 0.0 && c.fit_lo_growth < c.fit_hi_growth, "run", "fit_hi_growth",
          "fit window needs 0 <= fit_lo_growth < fit_hi_growth");
  require(c.keep_samples >= 0, "run", "keep_samples", "must be non-negative");
  return c;
}

ExperimentConfig load_config_text(const std::string& text, const std::string& source) {
  return load_config(parse_ini(text, source), source);
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), path);
}

namespace {

DriveProfile build_drive(const Config& c, double period) {
  switch (c.drive_family) {
    case PulseFamily::raised_cosine: return DriveProfile::raised_cosine(period);
    case PulseFamily::fast_rise: return DriveProfile::fast_rise(period, c.tau_e_over_T * period, c.tau_r_over_T * period);
    case PulseFamily::tabulated: return load_pulse_csv(c.pulse_file);
    case PulseFamily::zero: break;
  }
  return DriveProfile::zero(period);
}

}  // namespace

ResolvedSetup resolve(const ExperimentConfig& c) {
  ResolvedSetup s;
  s.cavity = {c.L, c.V0, c.V0};
  s.table = spectrum_table(s.cavity, c.V0, c.modes);
  if (c.epsilon > 0.0) s.cavity.Vmax = vmax_for_epsilon(s.cavity, s.table, c.mode, c.epsilon);
  else if (c.Vmax > 0.0) s.cavity.Vmax = c.Vmax;

  const double k0 = s.table.mode(c.mode).k;
  const double eps = s.cavity.Vmax > s.cavity.V0 ? epsilon_n(s.cavity, s.table, c.mode).epsilon : 0.0;
  if (c.period > 0.0 || c.drive_family == PulseFamily::tabulated) {
    s.drive = build_drive(c, c.period);
  } else if (c.drive_family == PulseFamily::zero) {
    s.drive = DriveProfile::zero(std::numbers::pi / k0);
  } else {
    // Resonance Omega = 2 k~ depends on f0, which depends on the pulse shape only.
    double period = std::numbers::pi / (k0 * (1.0 + c.detuning));
    for (int it = 0; it < 3; ++it) {
      const double f0 = fourier_coefficients(build_drive(c, period), 1).f0;
      period = std::numbers::pi / (k0 * (1.0 + eps * f0) * (1.0 + c.detuning));
    }
    s.drive = build_drive(c, period);
  }
  if (eps > 0.0 && s.drive.family() != PulseFamily::zero) {
    const auto fs = fourier_coefficients(s.drive, 1);
    s.growth_rate = eps * fs.amplitude[0] * k0 * (1.0 + eps * fs.f0) / 2.0;
  }

  s.environment.family = c.spectral_family;
  s.environment.power = c.spectral_family == SpectralFamily::ohmic ? 1.0 : c.power;
  s.environment.gamma = c.gamma;
  s.environment.cutoff = c.cutoff;
  s.environment.temperature = c.temperature;
  s.environment.schedule = c.drive_tied
                               ? CouplingSchedule::drive_tied(c.lambda0, s.cavity.Vmax / s.cavity.V0, s.drive)
                               : CouplingSchedule::constant(c.lambda0);

  if (c.t_end > 0.0) {
    s.t_end = c.t_end;
  } else if (c.t_end_growth > 0.0) {
    if (!(s.growth_rate > 0.0)) throw ConfigurationError("run.t_end_growth needs a drive with a resonant growth rate");
    s.t_end = c.t_end_growth / s.growth_rate;
  } else {
    s.t_end = 0.0;  // commands that integrate in time reject this
  }
  if (c.dt > 0.0) {
    s.dt = c.dt;
  } else {
    const int top = c.coupled ? c.modes : c.mode;
    s.dt = 2.0 * std::numbers::pi / (s.table.mode(top).k * (1.0 + eps)) / c.steps_per_period;
    // Resolve the environment kernels, whose width is about 2 / cutoff.
    if (c.environment) s.dt = std::min(s.dt, 0.1 / c.cutoff);
  }
  return s;
}

OpenRunConfig open_run_config(const ExperimentConfig& c, const ResolvedSetup& s) {
  OpenRunConfig o;
  o.cavity = s.cavity;
  o.mode = c.mode;
  o.drive = s.drive;
  o.environment_on = c.environment;
  o.environment = s.environment;
  o.noise_on = c.noise;
  o.t_end = s.t_end;
  o.dt = s.dt;
  o.ensemble = c.ensemble;
  o.seed = c.seed;
  o.include_local_drive_gA = c.local_drive_gA;
  o.environment_gA = c.environment_gA;
  o.window_tol = c.window_tol;
  o.full_memory = c.full_memory;
  o.noise_method = c.noise_method;
  o.threads = c.threads;
  o.stride = c.stride;
  o.epsilon_bound = c.epsilon_bound;
  return o;
}

}  // namespace dcelab::cli
