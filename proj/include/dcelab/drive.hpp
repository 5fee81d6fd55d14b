#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dcelab/spectrum.hpp"

namespace dcelab {

enum class PulseFamily {
  raised_cosine,  // f = (1 - cos(Omega t)) / 2
  fast_rise,      // (1 - e^{-t/tau_s})^3 e^{-t/tau_r}, peak 1 at tau_e
  tabulated,      // periodic cubic spline through (t, f) samples
  zero,           // f == 0, degenerate profile for tests and drive-off runs
};

std::string to_string(PulseFamily family);

class PeriodicSpline;

/// Periodic, non-negative modulation f(t) of the sheet potential,
/// V(t) = V0 + (Vmax - V0) f(t). Value, first and second derivatives are analytic
/// for the built-in families and spline-exact for tabulated ones.
class DriveProfile {
 public:
  static DriveProfile raised_cosine(double period);
  /// Fast rise over tau_e followed by exponential relaxation with time constant tau_r.
  /// Requires tau_r > tau_e / 3 and a relaxed tail below 1e-12 at the end of the period.
  static DriveProfile fast_rise(double period, double tau_e, double tau_r);
  /// Samples must start at f = 0; values are rescaled so the largest sample is 1.
  static DriveProfile tabulated(std::vector<double> t, std::vector<double> f);
  static DriveProfile zero(double period);

  PulseFamily family() const { return family_; }
  double period() const { return period_; }
  double omega() const;
  double tau_e() const { return tau_e_; }
  double tau_r() const { return tau_r_; }
  /// tau_e << T is advisory; true when tau_e exceeds a tenth of the period.
  bool slow_excitation_warning() const { return tau_e_ > 0.1 * period_; }

  double value(double t) const;
  double rate(double t) const;
  double curvature(double t) const;

 private:
  DriveProfile() = default;
  double reduce(double t) const;

  PulseFamily family_ = PulseFamily::zero;
  double period_ = 1.0;
  double tau_e_ = 0.0;
  double tau_r_ = 0.0;
  double tau_s_ = 0.0;   // fast_rise: rise constant solving the peak condition
  double peak_ = 1.0;    // fast_rise: unnormalized value at tau_e
  std::shared_ptr<const PeriodicSpline> spline_;
};

/// Read a one-period pulse table from CSV with header "t,f".
DriveProfile load_pulse_csv(const std::string& path);

/// f(t) = f0 + sum_j f_j cos(j Omega t + c_j), f_j >= 0, c_j in (-pi, pi].
struct FourierSeries {
  double omega = 0.0;
  double f0 = 0.0;
  std::vector<double> amplitude;  // f_1 .. f_J
  std::vector<double> phase;      // c_1 .. c_J

  int harmonics() const { return static_cast<int>(amplitude.size()); }
  double operator()(double t) const;
};

/// Dense-grid projection of the profile onto J harmonics. `grid` = 0 picks
/// max(4096, 16 J) rounded up to a power of two; an explicit grid must exceed 2 J.
FourierSeries fourier_coefficients(const DriveProfile& profile, int harmonics, int grid = 0);

struct EpsilonResult {
  double epsilon = 0.0;
  bool validity_ok = true;  // V0 L >> Vmax/V0 > 1, with ">>" read as a factor 10
};

/// Relative wavenumber modulation of mode m; `table` must be built at V0.
EpsilonResult epsilon_n(const CavityConfig& cavity, const WavenumberTable& table, int m);

/// Vmax that gives mode m a prescribed epsilon.
double vmax_for_epsilon(const CavityConfig& cavity, const WavenumberTable& table, int m, double epsilon);

struct ModeModulation {
  int m = 1;
  double k0 = 0.0;       // static root at V0
  double epsilon = 0.0;  // relative amplitude
  double f0 = 0.0;       // mean of the drive
  double norm = 1.0;     // (Psi, Psi) at V0

  double k_tilde() const { return k0 * (1.0 + epsilon * f0); }
};

/// Build the modulation of mode m, rejecting |epsilon| >= epsilon_bound.
ModeModulation make_modulation(const CavityConfig& cavity, const WavenumberTable& table, int m,
                               double f0, double epsilon_bound = 0.05);

/// k0 (1 + epsilon f(t)).
double instantaneous_wavenumber(const ModeModulation& mod, const DriveProfile& profile, double t);
/// k_tilde (1 + epsilon (f(t) - f0)), the centered form used by the dynamics.
double centered_wavenumber(const ModeModulation& mod, const DriveProfile& profile, double t);

}  // namespace dcelab
