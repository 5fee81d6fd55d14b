#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "dcelab/drive.hpp"
#include "dcelab/spectrum.hpp"

namespace dcelab {

using cplx = std::complex<double>;

struct OscillatorState {
  cplx P;
  cplx Pdot;
};

/// Sampled mode amplitude. For coupled runs, `N` holds the occupation of this mode
/// produced by one source mode; the total is the sum over sources.
struct ModeTrajectory {
  int m = 1;
  double k_tilde = 0.0;
  double epsilon = 0.0;
  double norm = 1.0;
  std::vector<double> t;
  std::vector<cplx> P;
  std::vector<cplx> Pdot;
  std::vector<double> N;
};

/// Vacuum positive-frequency state at omega: P = 1/sqrt(2 omega norm), Pdot = -i omega P.
OscillatorState quantum_initial_state(double omega, double norm);

/// norm (|Pdot|^2 + omega^2 |P|^2) / (2 omega) - 1/2.
double photon_number(cplx P, cplx Pdot, double omega_ref, double norm);

/// norm |Pdot + i omega P|^2 / (2 omega): negative-frequency weight of one amplitude.
/// Equals photon_number when the Wronskian keeps its initial value.
double bogoliubov_occupation(cplx P, cplx Pdot, double omega, double norm);

/// Number of equal steps covering `span` with step at most |dt|.
long step_count(double span, double dt);

/// Rejects dt k_max > 2 pi / 20, i.e. fewer than 20 steps per fastest period.
void check_step(double dt, double k_max);

/// P'' + k_tilde^2 P + 2 eps k0^2 (f - f0) P = 0 from the vacuum state at t = 0.
ModeTrajectory evolve_resonant(const ModeModulation& mod, const DriveProfile& profile, double t_end,
                               double dt, int stride = 1);

/// Same equation from an arbitrary state at t0; t_end < t0 integrates backwards.
ModeTrajectory evolve_resonant_from(const ModeModulation& mod, const DriveProfile& profile, double t0,
                                    OscillatorState start, double t_end, double dt, int stride = 1);

/// First-order coupled system driven from the vacuum of mode `mods[source]`:
///   P_n'' + k~_n^2 P_n = -2 eps_n k_n^2 (f - f0) P_n
///                        - sum_m g^A_{mn} eps_m k_m (2 f' P_m' + f'' P_m).
/// Returns one trajectory per entry of `mods`.
std::vector<ModeTrajectory> evolve_coupled(const WavenumberTable& table, const std::vector<ModeModulation>& mods,
                                           const DriveProfile& profile, int source, double t_end, double dt,
                                           int stride = 1);

struct CoupledPhotonNumbers {
  std::vector<double> t;
  Eigen::MatrixXd N;  // rows: samples, columns: modes in `mods` order
};

/// Total occupation of every mode, summed over all vacuum sources. Sources run on
/// up to `threads` workers; the result does not depend on the thread count.
CoupledPhotonNumbers coupled_photon_numbers(const WavenumberTable& table, const std::vector<ModeModulation>& mods,
                                            const DriveProfile& profile, double t_end, double dt, int stride = 1,
                                            int threads = 1);

struct GrowthFit {
  double rate = 0.0;       // d(log N)/dt
  double std_error = 0.0;  // standard error of the slope
  int points = 0;
};

/// Least-squares slope of log N over samples with t in [t_lo, t_hi].
GrowthFit growth_rate_fit(const std::vector<double>& t, const std::vector<double>& N, double t_lo, double t_hi);
GrowthFit growth_rate_fit(const ModeTrajectory& traj, double t_lo, double t_hi);

}  // namespace dcelab
