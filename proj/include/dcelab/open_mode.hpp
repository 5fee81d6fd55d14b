#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dcelab/closed_dynamics.hpp"
#include "dcelab/drive.hpp"
#include "dcelab/environment.hpp"
#include "dcelab/noise.hpp"
#include "dcelab/spectrum.hpp"

namespace dcelab {

enum class NoiseMethod { circulant, factorization };

struct OpenRunConfig {
  CavityConfig cavity;
  int mode = 1;
  DriveProfile drive = DriveProfile::zero(1.0);
  bool environment_on = false;
  EnvironmentSpec environment;
  bool noise_on = true;
  double t_end = 0.0;
  double dt = 0.0;
  int ensemble = 1;
  std::uint64_t seed = 0;
  /// Only one resonant mode is evolved; the flag records that assumption in outputs.
  bool single_mode = true;
  /// Adds g^A eps k0 (2 f' P' + f'' P) from the local drive piece. Off by default so the
  /// environment-free equation coincides with the decoupled resonant oscillator.
  bool include_local_drive_gA = false;
  /// Keep the g^A terms generated by the environment (memory, local and noise pieces).
  bool environment_gA = true;
  /// Memory kernels are truncated at the first lag after which |K|, |K'|, |K''| all stay
  /// below window_tol times their maxima; full_memory keeps the whole history.
  double window_tol = 1e-8;
  bool full_memory = false;
  NoiseMethod noise_method = NoiseMethod::circulant;
  int threads = 1;
  int stride = 1;
  double epsilon_bound = 0.05;
};

/// Coefficients of
///   P'' + w2(t) P + c(t) P' + a1 J + a2 J' + a3 J2 = F_eff(t),
/// J(t) = int_0^t lambda(s) K(t - s) P(s) ds, J' and J2 with K' and K'' in place of K,
/// K = -2 D~ the retarded response of the sheet, and w2 = w_d^2 plus local kernel pieces.
struct EffectiveEquation {
  ModeModulation mod;
  CavityConfig cavity;
  DriveProfile drive = DriveProfile::zero(1.0);
  bool environment_on = false;
  EnvironmentSpec env;
  bool local_drive_gA = false;
  bool environment_gA = true;

  double C = 0.0;      // k0 / (V0 + V0^2 L / 4 + k0^2 L)
  double gA = 0.0;     // diagonal g^(A) at V0
  double phi = 0.0;    // sqrt(L/2) cosec(k0 L / 2)
  double alpha = 0.0;  // 2 k0 + gA k0^2
  double vbar = 0.0;   // drive-averaged sheet potential

  double dt = 0.0;
  int window = 0;  // memory lags 0..window
  std::vector<double> K, dK, ddK;
  double ell = 0.0;   // trapezoid sum of K over the window
  double ell2 = 0.0;  // trapezoid sum of K''

  double omega_ref() const { return mod.k_tilde(); }
  double potential(double t) const;
  double lambda(double t) const;
  /// w_d^2(t) = k~^2 + 2 k0 C (V(t) - vbar) plus local environment and drive pieces.
  double stiffness(double t) const;
  double damping(double t) const;
  void memory_coefficients(double t, double& a1, double& a2, double& a3) const;
  /// F_eff from the stationary force F_s and its first two derivatives at t.
  double forcing(double t, double Fs, double dFs, double ddFs) const;
  /// Energy-decay rate of the homogeneous solution for weak coupling and constant lambda.
  double friction_rate() const;
};

EffectiveEquation assemble_effective(const OpenRunConfig& config);

/// Stationary force and derivatives sampled on the run grid t_i = i dt.
struct NoiseInput {
  std::vector<double> F, dF, ddF;
};

/// Grid decomposition of D(t, s) = V0 delta + (V(t) - V0) delta + d~(t, s).
struct SplitKernel {
  double V0 = 0.0;
  std::vector<double> local_drive;  // V(t_i) - V0
  /// Lower-triangular d~: lambda_i lambda_j K(t_i - t_j) off the diagonal; the diagonal holds
  /// the delta-like piece -lambda_i^2 ell lumped onto the trapezoid weight dt/2.
  Eigen::MatrixXd d_tilde;
};

SplitKernel split_kernel(const EffectiveEquation& eq, int n);

/// Delta k(t_n) P(t_n) = C [ (V - V0) P + int d~ P ds - phi lambda F_s ] on the grid.
cplx delta_k_product(const EffectiveEquation& eq, const std::vector<cplx>& P, const NoiseInput* noise, int n);

/// Integrates the effective equation from `start` at t = 0. Memory is a trapezoid sum on
/// the grid, linearly interpolated inside each Gauss-Legendre step and corrected twice.
ModeTrajectory evolve_langevin(const EffectiveEquation& eq, const NoiseInput* noise, OscillatorState start,
                               double t_end, int stride = 1);

struct EnsembleResult {
  std::vector<double> t;
  std::vector<double> mean_N;
  std::vector<double> var_N;
  std::vector<double> mean_N_floor_subtracted;
  double thermal_floor = 0.0;  // classical T / omega_ref
  ModeTrajectory homogeneous;
  std::vector<double> mean_PF2, mean_dPF2;  // <P_F^2>, <P_F'^2>
  std::vector<ModeTrajectory> samples;      // first few noise-driven trajectories
  int window = 0;
  std::string notice;
};

/// Homogeneous quantum solution plus M noise-driven real solutions from independent
/// streams. The moments do not depend on the thread count.
EnsembleResult ensemble_run(const OpenRunConfig& config, int keep_samples = 0);

/// Stationary noise on the run grid t_i = i dt, i < points, for realization `stream`.
/// Circulant embedding gives spectral derivatives; the factorization path factorizes the
/// joint covariance of (F, F', F'') and is limited to short grids.
class NoiseSource {
 public:
  NoiseSource(const EffectiveEquation& eq, int points, NoiseMethod method, std::uint64_t seed);
  NoiseInput draw(std::uint64_t stream) const;
  const std::string& notice() const { return notice_; }

 private:
  int n_;
  std::uint64_t seed_;
  std::shared_ptr<const CirculantSampler> circulant_;
  std::shared_ptr<const CovarianceFactor> joint_;  // factor of the (F, F', F'') covariance
  std::string notice_;
};

}  // namespace dcelab
