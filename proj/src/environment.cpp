#include "dcelab/environment.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "dcelab/errors.hpp"
#include "dcelab/quadrature.hpp"

namespace dcelab {

std::string to_string(SpectralFamily family) {
  return family == SpectralFamily::ohmic ? "ohmic" : "supraohmic";
}

CouplingSchedule CouplingSchedule::constant(double lambda0) {
  CouplingSchedule c;
  c.kind_ = Kind::constant;
  c.lambda0_ = lambda0;
  return c;
}

CouplingSchedule CouplingSchedule::drive_tied(double lambda0, double vratio, DriveProfile profile) {
  if (!(vratio > 0.0)) throw DomainError("drive-tied coupling needs Vmax/V0 > 0");
  CouplingSchedule c;
  c.kind_ = Kind::drive_tied;
  c.lambda0_ = lambda0;
  c.vratio_ = vratio;
  c.profile_ = std::make_shared<const DriveProfile>(std::move(profile));
  return c;
}

CouplingSchedule CouplingSchedule::custom(std::function<double(double)> value, std::function<double(double)> rate,
                                          std::function<double(double)> curvature) {
  CouplingSchedule c;
  c.kind_ = Kind::custom;
  c.lambda0_ = value(0.0);
  c.value_ = std::move(value);
  c.rate_ = std::move(rate);
  c.curvature_ = std::move(curvature);
  return c;
}

double CouplingSchedule::value(double t) const {
  switch (kind_) {
    case Kind::constant: return lambda0_;
    case Kind::drive_tied: return lambda0_ * std::sqrt(1.0 + (vratio_ - 1.0) * profile_->value(t));
    case Kind::custom: return value_(t);
  }
  return 0.0;
}

double CouplingSchedule::rate(double t) const {
  switch (kind_) {
    case Kind::constant: return 0.0;
    case Kind::drive_tied: {
      const double S = std::sqrt(1.0 + (vratio_ - 1.0) * profile_->value(t));
      return lambda0_ * (vratio_ - 1.0) * profile_->rate(t) / (2.0 * S);
    }
    case Kind::custom: return rate_(t);
  }
  return 0.0;
}

double CouplingSchedule::curvature(double t) const {
  switch (kind_) {
    case Kind::constant: return 0.0;
    case Kind::drive_tied: {
      const double a = vratio_ - 1.0;
      const double S = std::sqrt(1.0 + a * profile_->value(t));
      const double fd = profile_->rate(t);
      return lambda0_ * (a * profile_->curvature(t) / (2.0 * S) - a * a * fd * fd / (4.0 * S * S * S));
    }
    case Kind::custom: return curvature_(t);
  }
  return 0.0;
}

void EnvironmentSpec::validate() const {
  if (!(gamma >= 0.0)) throw DomainError("environment: gamma must be >= 0");
  if (!(cutoff > 0.0)) throw DomainError("environment: cutoff must be > 0");
  if (!(temperature >= 0.0)) throw DomainError("environment: temperature must be >= 0");
  if (family == SpectralFamily::supraohmic && !(power >= 2.0))
    throw DomainError("environment: supraohmic power must be >= 2");
}

double spectral_density(const EnvironmentSpec& spec, double omega) {
  if (omega < 0.0) throw DomainError("spectral density needs omega >= 0");
  const double L = spec.cutoff;
  const double g = std::exp(-(omega * omega) / (L * L));
  if (spec.family == SpectralFamily::ohmic) return spec.gamma * omega * g;
  return spec.gamma * std::pow(omega, spec.power) * std::pow(L, 1.0 - spec.power) * g;
}

namespace {

// J(w) coth(w / 2T), continuous at w = 0.
double weighted_density(const EnvironmentSpec& spec, double w) {
  const double T = spec.temperature;
  if (T == 0.0) return spectral_density(spec, w);
  if (w == 0.0) return spec.family == SpectralFamily::ohmic ? 2.0 * T * spec.gamma : 0.0;
  return spectral_density(spec, w) / std::tanh(w / (2.0 * T));
}

// Composite 8-point Gauss-Legendre on [0, W], compared against the same rule on twice
// as many panels. The integrands need not be even in w, so the trapezoid rule's
// endpoint superconvergence cannot be relied on.
template <typename F>
double gl8_panels(F&& g, double W, long panels, double& abs_sum) {
  static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                  0.9602898564975363};
  static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                  0.1012285362903763};
  const double h = W / static_cast<double>(panels);
  double sum = 0.0, asum = 0.0;
  for (long p = 0; p < panels; ++p) {
    const double mid = h * (static_cast<double>(p) + 0.5);
    for (int i = 0; i < 4; ++i) {
      const double a = g(mid - 0.5 * h * x[i]), b = g(mid + 0.5 * h * x[i]);
      sum += w[i] * (a + b);
      asum += w[i] * (std::abs(a) + std::abs(b));
    }
  }
  abs_sum = 0.5 * h * asum;
  return 0.5 * h * sum;
}

template <typename F>
double frequency_integral(F&& g, double W, double s, const KernelQuadrature& q, const char* what) {
  const double cycles = W * std::abs(s) / (2.0 * std::numbers::pi);
  const int target = std::max(q.min_panels, static_cast<int>(std::ceil(cycles * q.points_per_cycle)));
  const long panels = std::max(8L, static_cast<long>((target + 15) / 16));
  double scale = 0.0;
  const double coarse = gl8_panels(g, W, panels, scale);
  const double fine = gl8_panels(g, W, 2 * panels, scale);
  const double err = std::abs(fine - coarse);
  if (err > q.rel_tol * scale && err > 1e-300)
    throw AccuracyError(std::string(what) + ": frequency quadrature did not converge", err / scale);
  return fine;
}

void check_derivative(int k) {
  if (k < 0 || k > 4) throw DomainError("kernel derivative order must be in 0..4");
}

}  // namespace

double dissipation_kernel(const EnvironmentSpec& spec, double s, int derivative, const KernelQuadrature& q) {
  spec.validate();
  check_derivative(derivative);
  if (spec.gamma == 0.0) return 0.0;
  const double phase = derivative * 0.5 * std::numbers::pi;
  auto g = [&](double w) { return spectral_density(spec, w) * std::pow(w, derivative) * std::sin(w * s + phase); };
  return frequency_integral(g, q.omega_max * spec.cutoff, s, q, "dissipation kernel");
}

double noise_kernel(const EnvironmentSpec& spec, double s, int derivative, const KernelQuadrature& q) {
  spec.validate();
  check_derivative(derivative);
  if (spec.gamma == 0.0) return 0.0;
  const double phase = derivative * 0.5 * std::numbers::pi;
  auto g = [&](double w) { return weighted_density(spec, w) * std::pow(w, derivative) * std::cos(w * s + phase); };
  return frequency_integral(g, q.omega_max * spec.cutoff, s, q, "noise kernel");
}

KernelTable kernel_table(const EnvironmentSpec& spec, double ds, int n, const KernelQuadrature& q) {
  if (!(ds > 0.0) || n < 2) throw DomainError("kernel table needs ds > 0 and n >= 2");
  KernelTable tab;
  tab.ds = ds;
  tab.lag.resize(n);
  tab.Dtilde.resize(n);
  tab.Dtilde_d1.resize(n);
  tab.Dtilde_d2.resize(n);
  tab.Ntilde.resize(n);
  for (int j = 0; j < n; ++j) {
    const double s = ds * j;
    tab.lag[j] = s;
    tab.Dtilde[j] = j == 0 ? 0.0 : dissipation_kernel(spec, s, 0, q);
    tab.Dtilde_d1[j] = dissipation_kernel(spec, s, 1, q);
    tab.Dtilde_d2[j] = j == 0 ? 0.0 : dissipation_kernel(spec, s, 2, q);
    tab.Ntilde[j] = noise_kernel(spec, s, 0, q);
  }
  double local = 0.0;
  for (int j = 0; j < n; ++j) local += (j == 0 || j == n - 1 ? 0.5 : 1.0) * tab.Dtilde[j];
  tab.local_part = local * ds;
  return tab;
}

double noise_spectrum_min_ratio(const std::vector<double>& Ntilde) {
  const std::size_t n = Ntilde.size();
  if (n < 2) throw DomainError("spectrum check needs at least two lags");
  std::vector<double> c(2 * (n - 1));
  for (std::size_t j = 0; j < n; ++j) c[j] = Ntilde[j];
  for (std::size_t j = 1; j + 1 < n; ++j) c[2 * (n - 1) - j] = Ntilde[j];
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, c);
  double lo = spec[0].real(), hi = spec[0].real();
  for (const auto& v : spec) {
    lo = std::min(lo, v.real());
    hi = std::max(hi, v.real());
  }
  if (hi <= 0.0) return lo == 0.0 ? 0.0 : -1.0;
  return lo / hi;
}

FullKernels assemble_full_kernels(const EnvironmentSpec& spec, double t0, double dt, int n,
                                  const KernelQuadrature& q) {
  const KernelTable tab = kernel_table(spec, dt, n, q);
  Eigen::VectorXd lam(n);
  for (int i = 0; i < n; ++i) lam(i) = spec.schedule.value(t0 + dt * i);
  FullKernels out;
  out.D.resize(n, n);
  out.N.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int k = std::abs(i - j);
      const double sign = i >= j ? 1.0 : -1.0;
      out.D(i, j) = lam(i) * lam(j) * sign * tab.Dtilde[k];
      out.N(i, j) = lam(i) * lam(j) * tab.Ntilde[k];
    }
  out.N = 0.5 * (out.N + out.N.transpose()).eval();
  if (out.N.isZero(0.0)) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.N);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double radius = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() < 0.0) {
    out.clipped = -ev.minCoeff() / radius;
    if (out.clipped > 1e-6)
      throw AccuracyError("noise covariance is not positive semidefinite on this grid", out.clipped);
    const Eigen::MatrixXd V = eig.eigenvectors();
    out.N = V * ev.cwiseMax(0.0).asDiagonal() * V.transpose();
    out.N = 0.5 * (out.N + out.N.transpose()).eval();
  }
  return out;
}

EinsteinCheck check_einstein_relation(const EnvironmentSpec& spec, double s_max, const KernelQuadrature& q) {
  spec.validate();
  if (s_max <= 0.0) s_max = 12.0 / spec.cutoff + (spec.temperature > 0.0 ? 6.0 / spec.temperature : 0.0);
  EinsteinCheck out;
  out.high_temperature = spec.temperature >= spec.cutoff;
  if (spec.gamma == 0.0) return out;
  const int panels = 1024;
  out.noise_strength = 2.0 * simpson<double>([&](double s) { return noise_kernel(spec, s, 0, q); }, 0.0, s_max, panels);
  out.friction =
      2.0 * simpson<double>([&](double s) { return s * dissipation_kernel(spec, s, 0, q); }, 0.0, s_max, panels);
  const double rhs = 2.0 * spec.temperature * out.friction;
  out.residual = std::abs(out.noise_strength - rhs) / std::abs(out.noise_strength);
  return out;
}

double noise_kernel_width(const EnvironmentSpec& spec, double s_max, const KernelQuadrature& q) {
  spec.validate();
  if (s_max <= 0.0) s_max = 12.0 / spec.cutoff;
  const int panels = 1024;
  std::vector<double> vals(panels + 1);
  for (int i = 0; i <= panels; ++i) vals[i] = noise_kernel(spec, s_max * i / panels, 0, q);
  auto at = [&](double s) { return vals[static_cast<std::size_t>(std::lround(s / s_max * panels))]; };
  const double m0 = simpson<double>(at, 0.0, s_max, panels);
  const double m2 = simpson<double>([&](double s) { return s * s * at(s); }, 0.0, s_max, panels);
  return std::sqrt(m2 / m0);
}

}  // namespace dcelab
