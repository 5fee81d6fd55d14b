#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dcelab/drive.hpp"

namespace dcelab {

enum class SpectralFamily { ohmic, supraohmic };

std::string to_string(SpectralFamily family);

/// Time-dependent system-bath coupling lambda(t) with analytic derivatives.
class CouplingSchedule {
 public:
  CouplingSchedule() = default;
  static CouplingSchedule constant(double lambda0);
  /// lambda0 sqrt(1 + (Vmax/V0 - 1) f(t)): lambda^2 follows the sheet potential.
  static CouplingSchedule drive_tied(double lambda0, double vratio, DriveProfile profile);
  /// Arbitrary schedule given value and first two derivatives.
  static CouplingSchedule custom(std::function<double(double)> value, std::function<double(double)> rate,
                                 std::function<double(double)> curvature);

  bool is_constant() const { return kind_ == Kind::constant; }
  double lambda0() const { return lambda0_; }
  double value(double t) const;
  double rate(double t) const;
  double curvature(double t) const;

 private:
  enum class Kind { constant, drive_tied, custom };
  Kind kind_ = Kind::constant;
  double lambda0_ = 0.0;
  double vratio_ = 1.0;
  std::shared_ptr<const DriveProfile> profile_;
  std::function<double(double)> value_, rate_, curvature_;
};

struct EnvironmentSpec {
  SpectralFamily family = SpectralFamily::ohmic;
  double power = 1.0;        // supraohmic exponent p >= 2; ignored for ohmic
  double gamma = 0.0;        // coupling strength [1/m]
  double cutoff = 1.0;       // Lambda [1/m]
  double temperature = 0.0;  // k_B T [1/m]
  CouplingSchedule schedule;

  void validate() const;
};

/// Controls the frequency quadrature behind every kernel value.
struct KernelQuadrature {
  double omega_max = 8.0;    // upper limit in units of the cutoff; e^{-64} truncation
  int min_panels = 2048;
  int points_per_cycle = 32;
  double rel_tol = 1e-9;     // relative to the integral of |integrand|
};

/// ohmic: gamma w e^{-w^2/L^2}; supraohmic: gamma w^p L^{1-p} e^{-w^2/L^2}.
double spectral_density(const EnvironmentSpec& spec, double omega);

/// d^k/ds^k of Dtilde(s) = int_0^inf J(w) sin(w s) dw. Odd in s for even k.
double dissipation_kernel(const EnvironmentSpec& spec, double s, int derivative = 0,
                          const KernelQuadrature& q = {});

/// d^k/ds^k of Ntilde(s) = int_0^inf J(w) coth(w / 2T) cos(w s) dw; coth -> 1 at T = 0.
double noise_kernel(const EnvironmentSpec& spec, double s, int derivative = 0, const KernelQuadrature& q = {});

/// Stationary kernels sampled at lags s_j = j ds, j = 0..n-1.
struct KernelTable {
  double ds = 0.0;
  std::vector<double> lag;
  std::vector<double> Dtilde;     // D~
  std::vector<double> Dtilde_d1;  // D~'
  std::vector<double> Dtilde_d2;  // D~''
  std::vector<double> Ntilde;     // N~
  /// Trapezoid integral of D~ over the table: the weight of the delta-like
  /// piece once the kernel is treated as local on the scale of the dynamics.
  double local_part = 0.0;

  int size() const { return static_cast<int>(lag.size()); }
};

KernelTable kernel_table(const EnvironmentSpec& spec, double ds, int n, const KernelQuadrature& q = {});

/// Ratio min/max of the discrete spectrum of the even periodic extension of Ntilde.
/// A valid correlation has this >= -1e-10.
double noise_spectrum_min_ratio(const std::vector<double>& Ntilde);

struct FullKernels {
  Eigen::MatrixXd D;       // lambda(t) lambda(t') D~(t - t')
  Eigen::MatrixXd N;       // lambda(t) lambda(t') N~(t - t'), symmetric PSD
  double clipped = 0.0;    // largest negative eigenvalue removed, relative to the spectral radius
};

/// Two-time kernels on the grid t_i = t0 + i dt, i = 0..n-1. Throws AccuracyError when
/// the PSD clip removes more than 1e-6 of the spectral radius.
FullKernels assemble_full_kernels(const EnvironmentSpec& spec, double t0, double dt, int n,
                                  const KernelQuadrature& q = {});

struct EinsteinCheck {
  double noise_strength = 0.0;  // int_{-inf}^{inf} N~(s) ds
  double friction = 0.0;        // int_{-inf}^{inf} s D~(s) ds, the action on a linear test function
  double residual = 0.0;        // |strength - 2 T friction| / strength
  bool high_temperature = false;  // T >= Lambda
};

/// Compare white-noise strength with 2 T times friction using lag quadrature on [-s_max, s_max].
EinsteinCheck check_einstein_relation(const EnvironmentSpec& spec, double s_max = 0.0,
                                      const KernelQuadrature& q = {});

/// RMS lag width sqrt(int s^2 N~ / int N~) over [0, s_max]; s_max = 0 picks 12 / Lambda.
double noise_kernel_width(const EnvironmentSpec& spec, double s_max = 0.0, const KernelQuadrature& q = {});

}  // namespace dcelab
