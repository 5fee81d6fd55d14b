#include "dcelab/open_mode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "dcelab/errors.hpp"
#include "dcelab/integrator.hpp"

namespace dcelab {

double EffectiveEquation::potential(double t) const {
  return cavity.V0 + (cavity.Vmax - cavity.V0) * drive.value(t);
}

double EffectiveEquation::lambda(double t) const { return environment_on ? env.schedule.value(t) : 0.0; }

namespace {

double alpha_env(const EffectiveEquation& eq) { return eq.environment_gA ? eq.alpha : 2.0 * eq.mod.k0; }
double gA_env(const EffectiveEquation& eq) { return eq.environment_gA ? eq.gA : 0.0; }

}  // namespace

double EffectiveEquation::stiffness(double t) const {
  const double kt = mod.k_tilde();
  double w2 = kt * kt + 2.0 * mod.k0 * C * (potential(t) - vbar);
  if (local_drive_gA) w2 += gA * mod.k0 * mod.epsilon * drive.curvature(t);
  if (environment_on) {
    const double l = env.schedule.value(t), ld = env.schedule.rate(t), ldd = env.schedule.curvature(t);
    const double l2 = l * l, l2dd = 2.0 * (ld * ld + l * ldd);
    const double k0sq = mod.k0 * mod.k0;
    w2 += -alpha_env(*this) * C * l2 * ell + gA_env(*this) * C * (-l2 * ell2 - l2dd * ell + l2 * ell * k0sq);
  }
  return w2;
}

double EffectiveEquation::damping(double t) const {
  double c = 0.0;
  if (local_drive_gA) c += 2.0 * gA * mod.k0 * mod.epsilon * drive.rate(t);
  if (environment_on) {
    const double l2d = 2.0 * env.schedule.value(t) * env.schedule.rate(t);
    c += -2.0 * gA_env(*this) * C * l2d * ell;
  }
  return c;
}

void EffectiveEquation::memory_coefficients(double t, double& a1, double& a2, double& a3) const {
  if (!environment_on) {
    a1 = a2 = a3 = 0.0;
    return;
  }
  const double l = env.schedule.value(t), ld = env.schedule.rate(t), ldd = env.schedule.curvature(t);
  const double g = gA_env(*this);
  a1 = alpha_env(*this) * C * l + g * C * ldd;
  a2 = 2.0 * g * C * ld;
  a3 = g * C * l;
}

double EffectiveEquation::forcing(double t, double Fs, double dFs, double ddFs) const {
  if (!environment_on) return 0.0;
  const double l = env.schedule.value(t), ld = env.schedule.rate(t), ldd = env.schedule.curvature(t);
  const double Ft = phi * l * Fs;
  const double Ftdd = phi * (ldd * Fs + 2.0 * ld * dFs + l * ddFs);
  return alpha_env(*this) * C * Ft + gA_env(*this) * C * Ftdd;
}

double EffectiveEquation::friction_rate() const {
  if (!environment_on) return 0.0;
  const double w = omega_ref(), l0 = env.schedule.lambda0();
  return std::numbers::pi * 2.0 * mod.k0 * C * l0 * l0 * spectral_density(env, w) / w;
}

EffectiveEquation assemble_effective(const OpenRunConfig& config) {
  config.cavity.validate();
  if (!config.single_mode) throw ConfigurationError("only the single-mode open dynamics is implemented");
  if (!(config.t_end > 0.0)) throw ConfigurationError("t_end must be positive");
  EffectiveEquation eq;
  eq.cavity = config.cavity;
  eq.drive = config.drive;
  eq.environment_on = config.environment_on;
  eq.env = config.environment;
  eq.local_drive_gA = config.include_local_drive_gA;
  eq.environment_gA = config.environment_gA;

  const auto table = spectrum_table(config.cavity, config.cavity.V0, config.mode);
  const double f0 = config.drive.family() == PulseFamily::zero ? 0.0 : fourier_coefficients(config.drive, 1).f0;
  eq.mod = make_modulation(config.cavity, table, config.mode, f0, config.epsilon_bound);
  const double k0 = eq.mod.k0, L = config.cavity.L, V0 = config.cavity.V0;
  eq.C = k0 / (V0 + V0 * V0 * L / 4.0 + k0 * k0 * L);
  eq.gA = coupling_A(table, config.mode, config.mode);
  eq.phi = std::sqrt(L / 2.0) / std::sin(k0 * L / 2.0);
  eq.alpha = 2.0 * k0 + eq.gA * k0 * k0;
  eq.vbar = V0 + (config.cavity.Vmax - V0) * f0;

  check_step(config.dt, k0 * (1.0 + std::abs(eq.mod.epsilon)));
  const long steps = step_count(config.t_end, config.dt);
  eq.dt = config.t_end / static_cast<double>(steps);

  if (eq.environment_on) {
    eq.env.validate();
    // Gaussian-cutoff kernels of odd spectral power decay like e^{-Lambda^2 s^2/4}; even
    // powers leave algebraic tails, so search further before truncating.
    const bool odd = eq.env.family == SpectralFamily::ohmic || std::fmod(eq.env.power, 2.0) == 1.0;
    const double s_cap = (odd ? 16.0 : 400.0) / eq.env.cutoff;
    const long cap = std::min<long>(steps, static_cast<long>(std::ceil(s_cap / eq.dt)) + 1);
    const auto tab = kernel_table(eq.env, eq.dt, static_cast<int>(cap) + 1);
    const int n = tab.size();
    eq.K.resize(n);
    eq.dK.resize(n);
    eq.ddK.resize(n);
    for (int j = 0; j < n; ++j) {
      eq.K[j] = -2.0 * tab.Dtilde[j];
      eq.dK[j] = -2.0 * tab.Dtilde_d1[j];
      eq.ddK[j] = -2.0 * tab.Dtilde_d2[j];
    }
    int last = n - 1;
    if (!config.full_memory) {
      auto absmax = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
      };
      const double mK = absmax(eq.K), mdK = absmax(eq.dK), mddK = absmax(eq.ddK);
      last = 1;
      for (int j = n - 1; j >= 1; --j) {
        if (std::abs(eq.K[j]) > config.window_tol * mK || std::abs(eq.dK[j]) > config.window_tol * mdK ||
            std::abs(eq.ddK[j]) > config.window_tol * mddK) {
          last = std::min(n - 1, j + 1);
          break;
        }
      }
    } else {
      // Lags past the cap are below e^{-60} of the peak and are stored as exact zeros.
      last = static_cast<int>(steps);
    }
    eq.K.resize(last + 1, 0.0);
    eq.dK.resize(last + 1, 0.0);
    eq.ddK.resize(last + 1, 0.0);
    eq.window = last;
    eq.ell = eq.ell2 = 0.0;
    for (int j = 0; j <= last; ++j) {
      const double w = (j == 0 || j == last ? 0.5 : 1.0) * eq.dt;
      eq.ell += w * eq.K[j];
      eq.ell2 += w * eq.ddK[j];
    }
  }
  return eq;
}

namespace {

// Trapezoid weight of lag l in the memory sum at grid index j, window W.
inline double lag_weight(int l, int j, int W, double dt) {
  if (j == 0) return 0.0;
  return (l == 0 || l == j || l == W) ? 0.5 * dt : dt;
}

}  // namespace

SplitKernel split_kernel(const EffectiveEquation& eq, int n) {
  SplitKernel out;
  out.V0 = eq.cavity.V0;
  out.local_drive.resize(static_cast<std::size_t>(n));
  out.d_tilde = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double t = eq.dt * i;
    out.local_drive[i] = eq.potential(t) - eq.cavity.V0;
    if (!eq.environment_on) continue;
    const double li = eq.lambda(t);
    for (int j = 0; j < i; ++j) {
      const int l = i - j;
      if (l <= eq.window) out.d_tilde(i, j) = li * eq.lambda(eq.dt * j) * eq.K[l];
    }
    // K(0) = 0, so the diagonal carries only the lumped delta piece.
    out.d_tilde(i, i) = -li * li * eq.ell / (0.5 * eq.dt);
  }
  return out;
}

cplx delta_k_product(const EffectiveEquation& eq, const std::vector<cplx>& P, const NoiseInput* noise, int n) {
  if (n < 0 || n >= static_cast<int>(P.size())) throw DomainError("delta_k_product: index outside history");
  const double t = eq.dt * n;
  cplx sum = (eq.potential(t) - eq.cavity.V0) * P[n];
  if (eq.environment_on) {
    const double ln = eq.lambda(t);
    cplx J = 0.0;
    for (int l = 0; l <= std::min(n, eq.window); ++l)
      J += lag_weight(l, n, eq.window, eq.dt) * eq.K[l] * eq.lambda(eq.dt * (n - l)) * P[n - l];
    sum += ln * J - ln * ln * eq.ell * P[n];
    if (noise) sum -= eq.phi * ln * noise->F.at(static_cast<std::size_t>(n));
  }
  return eq.C * sum;
}

}  // namespace dcelab

namespace dcelab {

namespace {

constexpr double kDivergence = 1e15;

// Integrates a block of columns of P'' + w2 P + c P' + memory = F_eff on the grid t_n = n dt.
// `Feff` is either empty (homogeneous) or holds F_eff at grid points, one column per solution.
// `record(n, Y)` is called at every grid point with Y = [P; P'] (2 x cols).
template <typename Scalar, typename Record>
void integrate_block(const EffectiveEquation& eq, Eigen::Matrix<Scalar, 2, Eigen::Dynamic> Y0,
                     const Eigen::MatrixXd& Feff, long steps, Record&& record) {
  using Gl = GaussLegendre3<Scalar>;
  using Mat = typename Gl::Mat;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  const Eigen::Index r = Y0.cols();
  const double h = eq.dt;
  const bool memory = eq.environment_on && eq.window > 0;
  const bool forced = Feff.size() > 0;

  std::vector<double> lam;
  if (memory) {
    lam.resize(static_cast<std::size_t>(steps) + 1);
    for (long j = 0; j <= steps; ++j) lam[j] = eq.lambda(h * static_cast<double>(j));
  }
  // History of lambda(t_j) P(t_j); rows are grid points.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hist;
  if (memory) hist.resize(steps + 1, r);

  // Memory term at grid n from the stored history, with row n already filled.
  auto memory_at = [&](long n) -> Row {
    Row out = Row::Zero(r);
    if (!memory || n == 0) return out;
    double a1, a2, a3;
    eq.memory_coefficients(h * static_cast<double>(n), a1, a2, a3);
    const long top = std::min<long>(n, eq.window);
    Row J = Row::Zero(r), Jd = Row::Zero(r), J2 = Row::Zero(r);
    for (long l = 0; l <= top; ++l) {
      const double w = (l == 0 || l == n || l == eq.window) ? 0.5 * h : h;
      const auto row = hist.row(n - l);
      J += (w * eq.K[l]) * row;
      Jd += (w * eq.dK[l]) * row;
      J2 += (w * eq.ddK[l]) * row;
    }
    out = a1 * J + a2 * Jd + a3 * J2;
    return out;
  };

  auto sys = [&](double t, Eigen::MatrixXd& A, typename Gl::Vec& b) {
    A(0, 0) = 0.0;
    A(0, 1) = 1.0;
    A(1, 0) = -eq.stiffness(t);
    A(1, 1) = -eq.damping(t);
    b.setZero();
  };

  Gl gl(2);
  Mat Y = Y0;
  if (memory) hist.row(0) = lam[0] * Y.row(0);
  Row Mprev = Row::Zero(r), Mcur = Row::Zero(r);
  record(0L, Y);

  for (long n = 0; n < steps; ++n) {
    const double t = h * static_cast<double>(n);
    // M_{n+1} depends on P_{n+1} only through the lag-0 weight of K'.
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
    if (memory) eq.memory_coefficients(t + h, a1, a2, a3);
    const bool implicit = memory && a2 * eq.dK[0] != 0.0;
    Row Mnext;
    if (memory && !implicit) {
      hist.row(n + 1).setZero();
      Mnext = memory_at(n + 1);
    } else {
      Mnext = n == 0 ? Mcur : Row(2.0 * Mcur - Mprev);
    }
    const Mat Ystart = Y;
    const int passes = implicit ? 3 : 1;
    for (int pass = 0; pass < passes; ++pass) {
      Y = Ystart;
      auto forcing = [&](double s) -> Mat {
        const double x = (s - t) / h;
        Mat B = Mat::Zero(2, r);
        B.row(1) = -((1.0 - x) * Mcur + x * Mnext);
        if (forced)
          for (Eigen::Index c = 0; c < r; ++c)
            B(1, c) += (1.0 - x) * Feff(n, c) + x * Feff(n + 1, c);
        return B;
      };
      gl.step_forced(sys, forcing, t, h, Y);
      if (implicit) {
        hist.row(n + 1) = lam[n + 1] * Y.row(0);
        Mnext = memory_at(n + 1);
      }
    }
    if (memory) hist.row(n + 1) = lam[n + 1] * Y.row(0);
    for (Eigen::Index c = 0; c < r; ++c) {
      const double mag = std::abs(Y(0, c));
      if (!std::isfinite(mag) || mag > kDivergence)
        throw DivergenceError("mode amplitude diverged", t + h, mag);
    }
    Mprev = Mcur;
    Mcur = Mnext;
    record(n + 1, Y);
  }
}

// F_eff on the grid for one noise realization.
Eigen::VectorXd effective_forcing(const EffectiveEquation& eq, const NoiseInput& noise, long steps) {
  const std::size_t need = static_cast<std::size_t>(steps) + 1;
  if (noise.F.size() < need) throw ConfigurationError("noise realization shorter than the run grid");
  const bool want_derivatives = eq.environment_gA && eq.gA != 0.0;
  if (want_derivatives && (noise.dF.size() < need || noise.ddF.size() < need))
    throw ConfigurationError("g^A noise terms need F' and F'' of the stationary force");
  Eigen::VectorXd out(static_cast<Eigen::Index>(need));
  for (std::size_t j = 0; j < need; ++j) {
    const double dF = want_derivatives ? noise.dF[j] : 0.0, ddF = want_derivatives ? noise.ddF[j] : 0.0;
    out(static_cast<Eigen::Index>(j)) = eq.forcing(eq.dt * static_cast<double>(j), noise.F[j], dF, ddF);
  }
  return out;
}

long run_steps(const EffectiveEquation& eq, double t_end) {
  if (!(eq.dt > 0.0)) throw ConfigurationError("effective equation has no time step");
  return step_count(t_end, eq.dt);
}

}  // namespace

ModeTrajectory evolve_langevin(const EffectiveEquation& eq, const NoiseInput* noise, OscillatorState start,
                               double t_end, int stride) {
  if (stride < 1) throw ConfigurationError("output stride must be >= 1");
  const long steps = run_steps(eq, t_end);
  Eigen::MatrixXd Feff;
  if (noise && eq.environment_on) Feff = effective_forcing(eq, *noise, steps);

  ModeTrajectory tr;
  tr.m = eq.mod.m;
  tr.k_tilde = eq.mod.k_tilde();
  tr.epsilon = eq.mod.epsilon;
  tr.norm = eq.mod.norm;
  const double w = eq.omega_ref();
  Eigen::Matrix<cplx, 2, Eigen::Dynamic> Y0(2, 1);
  Y0 << start.P, start.Pdot;
  integrate_block<cplx>(eq, Y0, Feff, steps, [&](long n, const Eigen::MatrixXcd& Y) {
    if (n % stride != 0 && n != steps) return;
    tr.t.push_back(eq.dt * static_cast<double>(n));
    tr.P.push_back(Y(0, 0));
    tr.Pdot.push_back(Y(1, 0));
    tr.N.push_back(photon_number(Y(0, 0), Y(1, 0), w, eq.mod.norm));
  });
  return tr;
}

}  // namespace dcelab

namespace dcelab {

namespace {

constexpr int kJointLimit = 1024;  // grid points for the dense (F, F', F'') factorization

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

NoiseSource::NoiseSource(const EffectiveEquation& eq, int points, NoiseMethod method, std::uint64_t seed)
    : n_(points), seed_(seed) {
  if (points < 2) throw ConfigurationError("noise grid needs at least two points");
  if (!eq.environment_on) throw ConfigurationError("noise requested without an environment");
  if (method == NoiseMethod::circulant) {
    int lags = 1;
    while (lags < points - 1) lags *= 2;
    std::vector<double> Ntilde(static_cast<std::size_t>(lags) + 1);
    for (int j = 0; j <= lags; ++j) Ntilde[j] = noise_kernel(eq.env, eq.dt * j, 0);
    if (auto s = CirculantSampler::create(Ntilde, eq.dt, points)) {
      circulant_ = std::make_shared<const CirculantSampler>(std::move(*s));
      return;
    }
    notice_ = "circulant embedding has negative eigenvalues; falling back to covariance factorization";
  }
  if (points > kJointLimit)
    throw ConfigurationError("joint covariance factorization is limited to " + std::to_string(kJointLimit) +
                             " grid points; use the circulant method or a shorter run");
  auto f = factorize_covariance(stationary_joint_covariance(eq.env, eq.dt, points));
  if (f.floored > 1e-6) {
    if (!notice_.empty()) notice_ += "; ";
    notice_ += "joint noise covariance floored at " + std::to_string(f.floored) + " of its spectral radius";
  }
  joint_ = std::make_shared<const CovarianceFactor>(std::move(f));
}

NoiseInput NoiseSource::draw(std::uint64_t stream) const {
  NoiseInput out;
  if (circulant_) {
    const StationaryDraw d = circulant_->draw(seed_, stream, true);
    out.F = to_std(d.F);
    out.dF = to_std(d.dF);
    out.ddF = to_std(d.ddF);
    return out;
  }
  const Eigen::Index m = joint_->A.cols();
  Eigen::VectorXd z(m);
  NormalStream(seed_, stream).fill(z.data(), static_cast<std::size_t>(m));
  const Eigen::VectorXd x = joint_->A * z;
  out.F = to_std(x.segment(0, n_));
  out.dF = to_std(x.segment(n_, n_));
  out.ddF = to_std(x.segment(2 * n_, n_));
  return out;
}

namespace {

constexpr int kBatch = 64;

struct BatchMoments {
  std::vector<double> P2, dP2, X, X2;  // sums over the batch at every recorded sample
};

}  // namespace

EnsembleResult ensemble_run(const OpenRunConfig& config, int keep_samples) {
  if (config.ensemble < 1) throw DomainError("ensemble size must be >= 1");
  if (config.stride < 1) throw ConfigurationError("output stride must be >= 1");
  const EffectiveEquation eq = assemble_effective(config);
  const long steps = run_steps(eq, config.t_end);
  const double w = eq.omega_ref(), norm = eq.mod.norm;

  EnsembleResult res;
  res.window = eq.window;
  res.homogeneous = evolve_langevin(eq, nullptr, quantum_initial_state(w, norm), config.t_end, config.stride);
  res.t = res.homogeneous.t;
  const std::size_t ns = res.t.size();
  res.mean_N = res.homogeneous.N;
  res.var_N.assign(ns, 0.0);
  res.mean_PF2.assign(ns, 0.0);
  res.mean_dPF2.assign(ns, 0.0);

  const bool noisy = config.environment_on && config.noise_on;
  if (noisy) {
    const NoiseSource source(eq, static_cast<int>(steps) + 1, config.noise_method, config.seed);
    res.notice = source.notice();
    res.thermal_floor = eq.env.temperature / w;
    const int M = config.ensemble;
    const int batches = (M + kBatch - 1) / kBatch;
    std::vector<BatchMoments> parts(static_cast<std::size_t>(batches));

    auto run_batch = [&](int b) {
      const int first = b * kBatch, r = std::min(kBatch, M - first);
      Eigen::MatrixXd Feff(steps + 1, r);
      for (int c = 0; c < r; ++c) Feff.col(c) = effective_forcing(eq, source.draw(first + c), steps);
      BatchMoments& bm = parts[b];
      bm.P2.assign(ns, 0.0);
      bm.dP2.assign(ns, 0.0);
      bm.X.assign(ns, 0.0);
      bm.X2.assign(ns, 0.0);
      std::size_t k = 0;
      integrate_block<double>(eq, Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, r), Feff, steps,
                              [&](long n, const Eigen::MatrixXd& Y) {
                                if (n % config.stride != 0 && n != steps) return;
                                for (int c = 0; c < r; ++c) {
                                  const double p2 = Y(0, c) * Y(0, c), d2 = Y(1, c) * Y(1, c);
                                  const double x = norm * (d2 + w * w * p2) / (2.0 * w);
                                  bm.P2[k] += p2;
                                  bm.dP2[k] += d2;
                                  bm.X[k] += x;
                                  bm.X2[k] += x * x;
                                }
                                ++k;
                              });
    };

    const int workers = std::max(1, std::min(config.threads, batches));
    if (workers == 1) {
      for (int b = 0; b < batches; ++b) run_batch(b);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
      for (int id = 0; id < workers; ++id)
        pool.emplace_back([&, id] {
          try {
            for (int b = id; b < batches; b += workers) run_batch(b);
          } catch (...) {
            errors[id] = std::current_exception();
          }
        });
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    // Reduce in batch order so the moments do not depend on the thread count.
    std::vector<double> X(ns, 0.0), X2(ns, 0.0);
    for (const auto& bm : parts)
      for (std::size_t k = 0; k < ns; ++k) {
        res.mean_PF2[k] += bm.P2[k];
        res.mean_dPF2[k] += bm.dP2[k];
        X[k] += bm.X[k];
        X2[k] += bm.X2[k];
      }
    for (std::size_t k = 0; k < ns; ++k) {
      res.mean_PF2[k] /= M;
      res.mean_dPF2[k] /= M;
      const double mean = X[k] / M;
      res.mean_N[k] += mean;
      res.var_N[k] = M > 1 ? std::max(0.0, (X2[k] - M * mean * mean) / (M - 1)) : 0.0;
    }
    for (int s = 0; s < std::min(keep_samples, M); ++s) {
      const NoiseInput in = source.draw(static_cast<std::uint64_t>(s));
      res.samples.push_back(evolve_langevin(eq, &in, {cplx(0.0), cplx(0.0)}, config.t_end, config.stride));
    }
  }
  res.mean_N_floor_subtracted.resize(ns);
  for (std::size_t k = 0; k < ns; ++k) res.mean_N_floor_subtracted[k] = res.mean_N[k] - res.thermal_floor;
  return res;
}

}  // namespace dcelab
