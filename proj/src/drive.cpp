#include "dcelab/drive.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "dcelab/errors.hpp"
#include "dcelab/quadrature.hpp"

namespace dcelab {

namespace {
constexpr double pi = std::numbers::pi;
}

// Periodic cubic spline through (t_i, y_i), i = 0..n with t_n = period and y_n = y_0.
class PeriodicSpline {
 public:
  PeriodicSpline(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
    const int n = static_cast<int>(t_.size()) - 1;
    std::vector<double> h(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) h[i] = t_[i + 1] - t_[i];
    Eigen::SparseMatrix<double> A(n, n);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      const int prev = (i + n - 1) % n;
      const double hp = h[prev], hi = h[i];
      const double yp = y_[prev], yi = y_[i], yn = y_[i + 1];
      trip.emplace_back(i, i, 2.0 * (hp + hi));
      trip.emplace_back(i, prev, hp);
      trip.emplace_back(i, (i + 1) % n, hi);
      rhs(i) = 6.0 * ((yn - yi) / hi - (yi - yp) / hp);
    }
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw DomainError("periodic spline system is singular");
    const Eigen::VectorXd m = lu.solve(rhs);
    m_.assign(m.data(), m.data() + n);
    m_.push_back(m_.front());
  }

  // order 0: value, 1: first derivative, 2: second derivative; t in [0, period)
  double eval(double t, int order) const {
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - t_.begin()) - 1));
    i = std::min(i, t_.size() - 2);
    const double h = t_[i + 1] - t_[i];
    const double a = (t_[i + 1] - t) / h, b = (t - t_[i]) / h;
    const double mi = m_[i], mj = m_[i + 1];
    switch (order) {
      case 0:
        return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
      case 1:
        return (y_[i + 1] - y_[i]) / h - (3.0 * a * a - 1.0) * h * mi / 6.0 + (3.0 * b * b - 1.0) * h * mj / 6.0;
      default:
        return a * mi + b * mj;
    }
  }

  const std::vector<double>& knots() const { return t_; }
  const std::vector<double>& values() const { return y_; }

 private:
  std::vector<double> t_, y_, m_;
};

std::string to_string(PulseFamily family) {
  switch (family) {
    case PulseFamily::raised_cosine: return "raised_cosine";
    case PulseFamily::fast_rise: return "fast_rise";
    case PulseFamily::tabulated: return "tabulated";
    case PulseFamily::zero: return "zero";
  }
  return "unknown";
}

namespace {
void check_period(double period) {
  if (!(period > 0.0) || !std::isfinite(period)) throw DomainError("drive period must be positive");
}

// Unnormalized fast-rise pulse and its derivatives.
struct FastRiseTerms {
  double h, dh, d2h;
};
FastRiseTerms fast_rise_terms(double t, double tau_s, double tau_r) {
  const double es = std::exp(-t / tau_s);
  const double a = -std::expm1(-t / tau_s);
  const double da = es / tau_s, d2a = -da / tau_s;
  const double u = a * a * a, du = 3.0 * a * a * da, d2u = 6.0 * a * da * da + 3.0 * a * a * d2a;
  const double e = std::exp(-t / tau_r);
  return {u * e, (du - u / tau_r) * e, (d2u - 2.0 * du / tau_r + u / (tau_r * tau_r)) * e};
}
}  // namespace

DriveProfile DriveProfile::raised_cosine(double period) {
  check_period(period);
  DriveProfile p;
  p.family_ = PulseFamily::raised_cosine;
  p.period_ = period;
  p.tau_e_ = 0.5 * period;
  return p;
}

DriveProfile DriveProfile::zero(double period) {
  check_period(period);
  DriveProfile p;
  p.family_ = PulseFamily::zero;
  p.period_ = period;
  return p;
}

DriveProfile DriveProfile::fast_rise(double period, double tau_e, double tau_r) {
  check_period(period);
  if (!(tau_e > 0.0) || !(tau_e < period)) throw DomainError("fast_rise: need 0 < tau_e < period");
  if (!(tau_r > tau_e / 3.0)) throw DomainError("fast_rise: need tau_r > tau_e / 3");
  // Peak of (1 - e^{-t/s})^3 e^{-t/r} sits at t = s ln(1 + 3 r / s); solve for s.
  auto peak_at = [&](double s) { return s * std::log1p(3.0 * tau_r / s) - tau_e; };
  double hi = tau_e;
  while (peak_at(hi) < 0.0) hi *= 2.0;
  const double tau_s = brent_root(peak_at, 1e-9 * tau_e, hi).x;

  DriveProfile p;
  p.family_ = PulseFamily::fast_rise;
  p.period_ = period;
  p.tau_e_ = tau_e;
  p.tau_r_ = tau_r;
  p.tau_s_ = tau_s;
  p.peak_ = fast_rise_terms(tau_e, tau_s, tau_r).h;
  const double tail = fast_rise_terms(period, tau_s, tau_r).h / p.peak_;
  if (tail > 1e-12)
    throw DomainError("fast_rise: pulse has not relaxed by the end of the period (tail " +
                      std::to_string(tail) + ")");
  return p;
}

DriveProfile DriveProfile::tabulated(std::vector<double> t, std::vector<double> f) {
  if (t.size() != f.size() || t.size() < 4) throw DomainError("pulse table needs >= 4 matching rows");
  if (t.front() != 0.0) throw DomainError("pulse table must start at t = 0");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw DomainError("pulse table times must be strictly increasing");
  for (double v : f)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("pulse values must be finite and non-negative");
  if (std::abs(f.back() - f.front()) > 1e-12) throw DomainError("pulse table must cover exactly one period");
  if (std::abs(f.front()) > 1e-12) throw DomainError("pulse table must start at f = 0");
  const double fmax = *std::max_element(f.begin(), f.end());
  if (!(fmax > 0.0)) throw DomainError("pulse table is identically zero");
  for (double& v : f) v /= fmax;
  f.front() = f.back() = 0.0;
  DriveProfile p;
  p.family_ = PulseFamily::tabulated;
  p.period_ = t.back();
  const auto peak = std::max_element(f.begin(), f.end());
  p.tau_e_ = t[static_cast<std::size_t>(peak - f.begin())];
  p.spline_ = std::make_shared<PeriodicSpline>(std::move(t), std::move(f));
  return p;
}

double DriveProfile::omega() const { return 2.0 * pi / period_; }

double DriveProfile::reduce(double t) const {
  double r = std::fmod(t, period_);
  if (r < 0.0) r += period_;
  if (r >= period_) r = 0.0;
  return r;
}

double DriveProfile::value(double t) const {
  const double r = reduce(t);
  switch (family_) {
    case PulseFamily::raised_cosine: return 0.5 * (1.0 - std::cos(omega() * r));
    case PulseFamily::fast_rise: return fast_rise_terms(r, tau_s_, tau_r_).h / peak_;
    case PulseFamily::tabulated: return spline_->eval(r, 0);
    case PulseFamily::zero: return 0.0;
  }
  return 0.0;
}

double DriveProfile::rate(double t) const {
  const double r = reduce(t);
  switch (family_) {
    case PulseFamily::raised_cosine: return 0.5 * omega() * std::sin(omega() * r);
    case PulseFamily::fast_rise: return fast_rise_terms(r, tau_s_, tau_r_).dh / peak_;
    case PulseFamily::tabulated: return spline_->eval(r, 1);
    case PulseFamily::zero: return 0.0;
  }
  return 0.0;
}

double DriveProfile::curvature(double t) const {
  const double r = reduce(t);
  switch (family_) {
    case PulseFamily::raised_cosine: return 0.5 * omega() * omega() * std::cos(omega() * r);
    case PulseFamily::fast_rise: return fast_rise_terms(r, tau_s_, tau_r_).d2h / peak_;
    case PulseFamily::tabulated: return spline_->eval(r, 2);
    case PulseFamily::zero: return 0.0;
  }
  return 0.0;
}

DriveProfile load_pulse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open pulse table " + path);
  std::string line;
  std::getline(in, line);
  line.erase(std::remove_if(line.begin(), line.end(), ::isspace), line.end());
  if (line != "t,f") throw DomainError(path + ": expected header \"t,f\"");
  std::vector<double> t, f;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double a = 0, b = 0;
    char comma = 0;
    if (!(ss >> a >> comma >> b) || comma != ',')
      throw DomainError(path + ":" + std::to_string(lineno) + ": malformed row");
    t.push_back(a);
    f.push_back(b);
  }
  return DriveProfile::tabulated(std::move(t), std::move(f));
}

double FourierSeries::operator()(double t) const {
  double s = f0;
  for (int j = 0; j < harmonics(); ++j) s += amplitude[j] * std::cos((j + 1) * omega * t + phase[j]);
  return s;
}

FourierSeries fourier_coefficients(const DriveProfile& profile, int harmonics, int grid) {
  if (harmonics < 1) throw DomainError("harmonic count must be >= 1");
  int n = grid;
  if (n == 0) {
    n = 4096;
    while (n < 16 * harmonics) n *= 2;
  }
  if (n <= 2 * harmonics)
    throw AccuracyError("Fourier grid too coarse for the requested harmonics",
                        static_cast<double>(n) / (2.0 * harmonics));

  std::vector<double> samples(static_cast<std::size_t>(n));
  const double dt = profile.period() / n;
  for (int i = 0; i < n; ++i) samples[i] = profile.value(i * dt);
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, samples);

  FourierSeries out;
  out.omega = profile.omega();
  out.f0 = spec[0].real() / n;
  out.amplitude.resize(static_cast<std::size_t>(harmonics));
  out.phase.resize(static_cast<std::size_t>(harmonics));
  for (int j = 1; j <= harmonics; ++j) {
    const std::complex<double> c = 2.0 * spec[static_cast<std::size_t>(j)] / static_cast<double>(n);
    double amp = std::abs(c);
    double ph = std::arg(c);
    if (amp <= 1e-15) {
      ph = 0.0;
    } else if (ph <= -pi + 4.0 * std::numeric_limits<double>::epsilon()) {
      ph = pi;
    }
    out.amplitude[j - 1] = amp;
    out.phase[j - 1] = ph;
  }
  return out;
}

EpsilonResult epsilon_n(const CavityConfig& cavity, const WavenumberTable& table, int m) {
  cavity.validate();
  if (std::abs(table.V - cavity.V0) > 1e-12 * cavity.V0)
    throw DomainError("epsilon_n: wavenumber table must be built at V0");
  const double k0 = table.mode(m).k;
  const double L = cavity.L, V0 = cavity.V0;
  EpsilonResult r;
  r.epsilon = (cavity.Vmax - V0) / (L * k0 * k0 + V0 * (1.0 + V0 * L / 4.0));
  const double ratio = cavity.Vmax / V0;
  r.validity_ok = ratio > 1.0 && V0 * L >= 10.0 * ratio;
  return r;
}

double vmax_for_epsilon(const CavityConfig& cavity, const WavenumberTable& table, int m, double epsilon) {
  const double k0 = table.mode(m).k;
  const double L = cavity.L, V0 = cavity.V0;
  return V0 + epsilon * (L * k0 * k0 + V0 * (1.0 + V0 * L / 4.0));
}

ModeModulation make_modulation(const CavityConfig& cavity, const WavenumberTable& table, int m,
                               double f0, double epsilon_bound) {
  const auto eps = epsilon_n(cavity, table, m);
  if (!(std::abs(eps.epsilon) < epsilon_bound))
    throw ConfigurationError("epsilon = " + std::to_string(eps.epsilon) + " for mode " + std::to_string(m) +
                             " exceeds the perturbative bound " + std::to_string(epsilon_bound));
  ModeModulation mod;
  mod.m = m;
  mod.k0 = table.mode(m).k;
  mod.epsilon = eps.epsilon;
  mod.f0 = f0;
  mod.norm = table.mode(m).norm();
  return mod;
}

double instantaneous_wavenumber(const ModeModulation& mod, const DriveProfile& profile, double t) {
  return mod.k0 * (1.0 + mod.epsilon * profile.value(t));
}

double centered_wavenumber(const ModeModulation& mod, const DriveProfile& profile, double t) {
  return mod.k_tilde() * (1.0 + mod.epsilon * (profile.value(t) - mod.f0));
}

}  // namespace dcelab
