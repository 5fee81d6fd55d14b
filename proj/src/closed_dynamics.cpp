#include "dcelab/closed_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "dcelab/errors.hpp"
#include "dcelab/integrator.hpp"

namespace dcelab {

OscillatorState quantum_initial_state(double omega, double norm) {
  if (!(omega > 0.0) || !(norm > 0.0)) throw DomainError("initial state needs omega > 0 and norm > 0");
  const cplx P(1.0 / std::sqrt(2.0 * omega * norm), 0.0);
  return {P, cplx(0.0, -omega) * P};
}

double photon_number(cplx P, cplx Pdot, double omega_ref, double norm) {
  return norm * (std::norm(Pdot) + omega_ref * omega_ref * std::norm(P)) / (2.0 * omega_ref) - 0.5;
}

double bogoliubov_occupation(cplx P, cplx Pdot, double omega, double norm) {
  return norm * std::norm(Pdot + cplx(0.0, omega) * P) / (2.0 * omega);
}

long step_count(double span, double dt) {
  if (!(dt != 0.0) || !std::isfinite(dt)) throw ConfigurationError("time step must be finite and non-zero");
  const double r = std::abs(span / dt);
  return std::max(1L, static_cast<long>(std::ceil(r - 1e-9)));
}

void check_step(double dt, double k_max) {
  if (std::abs(dt) * k_max > 2.0 * std::numbers::pi / 20.0)
    throw ConfigurationError("time step " + std::to_string(dt) + " resolves the fastest mode (k = " +
                             std::to_string(k_max) + ") with fewer than 20 steps per period");
}

namespace {

double mode_kmax(const ModeModulation& mod) { return mod.k0 * (1.0 + std::abs(mod.epsilon)); }

ModeTrajectory blank_trajectory(const ModeModulation& mod) {
  ModeTrajectory tr;
  tr.m = mod.m;
  tr.k_tilde = mod.k_tilde();
  tr.epsilon = mod.epsilon;
  tr.norm = mod.norm;
  return tr;
}

}  // namespace

ModeTrajectory evolve_resonant_from(const ModeModulation& mod, const DriveProfile& profile, double t0,
                                    OscillatorState start, double t_end, double dt, int stride) {
  if (stride < 1) throw ConfigurationError("output stride must be >= 1");
  check_step(dt, mode_kmax(mod));
  const long n = step_count(t_end - t0, dt);
  const double h = (t_end - t0) / static_cast<double>(n);

  const double kt2 = mod.k_tilde() * mod.k_tilde();
  const double drive = 2.0 * mod.epsilon * mod.k0 * mod.k0;
  auto sys = [&](double t, Eigen::MatrixXd& A, Eigen::VectorXcd& b) {
    A(0, 1) = 1.0;
    A(1, 0) = -(kt2 + drive * (profile.value(t) - mod.f0));
    b.setZero();
  };
  GaussLegendre3<cplx> gl(2);
  Eigen::VectorXcd y(2);
  y << start.P, start.Pdot;

  ModeTrajectory tr = blank_trajectory(mod);
  const double w = mod.k_tilde();
  auto record = [&](double t) {
    tr.t.push_back(t);
    tr.P.push_back(y(0));
    tr.Pdot.push_back(y(1));
    tr.N.push_back(photon_number(y(0), y(1), w, mod.norm));
  };
  record(t0);
  for (long i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    gl.step(sys, t, h, y);
    if (!std::isfinite(std::abs(y(0))))
      throw DivergenceError("resonant amplitude diverged", t + h, std::abs(y(0)));
    if ((i + 1) % stride == 0 || i + 1 == n) record(t0 + static_cast<double>(i + 1) * h);
  }
  return tr;
}

ModeTrajectory evolve_resonant(const ModeModulation& mod, const DriveProfile& profile, double t_end, double dt,
                               int stride) {
  return evolve_resonant_from(mod, profile, 0.0, quantum_initial_state(mod.k_tilde(), mod.norm), t_end, dt,
                              stride);
}

namespace {

// Integrates the coupled system for each source in `sources` at once. Result is
// indexed [source position][mode].
std::vector<std::vector<ModeTrajectory>> integrate_coupled(const WavenumberTable& table,
                                                           const std::vector<ModeModulation>& mods,
                                                           const DriveProfile& profile, const std::vector<int>& sources,
                                                           double t_end, double dt, int stride) {
  const int M = static_cast<int>(mods.size());
  if (M < 1) throw ConfigurationError("coupled run needs at least one mode");
  for (int s : sources)
    if (s < 0 || s >= M) throw ConfigurationError("source index out of range");
  if (stride < 1) throw ConfigurationError("output stride must be >= 1");
  double kmax = 0.0;
  for (const auto& md : mods) kmax = std::max(kmax, mode_kmax(md));
  check_step(dt, kmax);

  // G(n, m) = g^A_{mn} eps_m k_m: weight of mode m's drive terms in mode n's equation.
  Eigen::MatrixXd G(M, M);
  for (int n = 0; n < M; ++n)
    for (int m = 0; m < M; ++m)
      G(n, m) = mods[m].epsilon == 0.0 ? 0.0
                                       : coupling_A(table, mods[m].m, mods[n].m) * mods[m].epsilon * mods[m].k0;
  Eigen::VectorXd kt2(M), drive(M), f0(M);
  for (int n = 0; n < M; ++n) {
    kt2(n) = mods[n].k_tilde() * mods[n].k_tilde();
    drive(n) = 2.0 * mods[n].epsilon * mods[n].k0 * mods[n].k0;
    f0(n) = mods[n].f0;
  }

  auto sys = [&](double t, Eigen::MatrixXd& A, Eigen::VectorXcd& b) {
    const double f = profile.value(t), fd = profile.rate(t), fdd = profile.curvature(t);
    A.setZero();
    A.topRightCorner(M, M).setIdentity();
    A.bottomLeftCorner(M, M) = -fdd * G;
    A.bottomRightCorner(M, M) = -2.0 * fd * G;
    for (int n = 0; n < M; ++n) A(M + n, n) -= kt2(n) + drive(n) * (f - f0(n));
    b.setZero();
  };

  const long steps = step_count(t_end, dt);
  const double h = t_end / static_cast<double>(steps);
  const int S = static_cast<int>(sources.size());
  GaussLegendre3<cplx> gl(2 * M);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(2 * M, S);
  for (int c = 0; c < S; ++c) {
    const int s = sources[c];
    const auto s0 = quantum_initial_state(mods[s].k_tilde(), mods[s].norm);
    y(s, c) = s0.P;
    y(M + s, c) = s0.Pdot;
  }

  std::vector<std::vector<ModeTrajectory>> out(static_cast<std::size_t>(S));
  for (auto& per : out)
    for (const auto& md : mods) per.push_back(blank_trajectory(md));
  auto record = [&](double t) {
    for (int c = 0; c < S; ++c)
      for (int n = 0; n < M; ++n) {
        auto& tr = out[c][n];
        tr.t.push_back(t);
        tr.P.push_back(y(n, c));
        tr.Pdot.push_back(y(M + n, c));
        tr.N.push_back(bogoliubov_occupation(y(n, c), y(M + n, c), tr.k_tilde, tr.norm));
      }
  };
  record(0.0);
  for (long i = 0; i < steps; ++i) {
    gl.step_homogeneous(sys, static_cast<double>(i) * h, h, y);
    if (!y.allFinite()) throw DivergenceError("coupled amplitudes diverged", (i + 1) * h, INFINITY);
    if ((i + 1) % stride == 0 || i + 1 == steps) record(static_cast<double>(i + 1) * h);
  }
  return out;
}

}  // namespace

std::vector<ModeTrajectory> evolve_coupled(const WavenumberTable& table, const std::vector<ModeModulation>& mods,
                                           const DriveProfile& profile, int source, double t_end, double dt,
                                           int stride) {
  return std::move(integrate_coupled(table, mods, profile, {source}, t_end, dt, stride).front());
}

CoupledPhotonNumbers coupled_photon_numbers(const WavenumberTable& table, const std::vector<ModeModulation>& mods,
                                            const DriveProfile& profile, double t_end, double dt, int stride,
                                            int threads) {
  const int M = static_cast<int>(mods.size());
  if (M < 1) throw ConfigurationError("coupled run needs at least one mode");
  // Sources are split into contiguous blocks, one per worker; each block shares one
  // factorization per step. Columns never interact, so blocking does not change the values.
  const int nt = std::clamp(threads, 1, M);
  std::vector<std::vector<int>> blocks(static_cast<std::size_t>(nt));
  for (int s = 0; s < M; ++s) blocks[static_cast<std::size_t>(s * nt / M)].push_back(s);
  std::vector<std::vector<std::vector<ModeTrajectory>>> results(blocks.size());
  std::vector<std::thread> pool;
  for (std::size_t b = 1; b < blocks.size(); ++b)
    pool.emplace_back([&, b] { results[b] = integrate_coupled(table, mods, profile, blocks[b], t_end, dt, stride); });
  results[0] = integrate_coupled(table, mods, profile, blocks[0], t_end, dt, stride);
  for (auto& th : pool) th.join();

  CoupledPhotonNumbers out;
  out.t = results[0][0][0].t;
  out.N.setZero(static_cast<Eigen::Index>(out.t.size()), M);
  // Fixed summation order over sources.
  for (const auto& block : results)
    for (const auto& per : block)
      for (int n = 0; n < M; ++n)
        for (std::size_t i = 0; i < out.t.size(); ++i) out.N(static_cast<Eigen::Index>(i), n) += per[n].N[i];
  return out;
}

GrowthFit growth_rate_fit(const std::vector<double>& t, const std::vector<double>& N, double t_lo, double t_hi) {
  if (t.size() != N.size()) throw DomainError("growth fit: series length mismatch");
  double sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(N[i] > 0.0)) throw DomainError("growth fit: non-positive photon number in window");
    xs.push_back(t[i]);
    ys.push_back(std::log(N[i]));
  }
  const int n = static_cast<int>(xs.size());
  if (n < 3) throw DomainError("growth fit: fewer than 3 samples in window");
  const double xm = [&] { double s = 0; for (double x : xs) s += x; return s / n; }();
  const double ym = [&] { double s = 0; for (double y : ys) s += y; return s / n; }();
  for (int i = 0; i < n; ++i) {
    const double dx = xs[i] - xm, dy = ys[i] - ym;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  GrowthFit fit;
  fit.points = n;
  fit.rate = sxy / sxx;
  const double icept = ym - fit.rate * xm;
  for (int i = 0; i < n; ++i) {
    const double r = ys[i] - icept - fit.rate * xs[i];
    sy += r * r;
  }
  fit.std_error = std::sqrt(sy / (n - 2) / sxx);
  return fit;
}

GrowthFit growth_rate_fit(const ModeTrajectory& traj, double t_lo, double t_hi) {
  return growth_rate_fit(traj.t, traj.N, t_lo, t_hi);
}

}  // namespace dcelab
