#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "dcelab/environment.hpp"
#include "dcelab/errors.hpp"
#include "dcelab/quadrature.hpp"

using namespace dcelab;
using std::numbers::pi;

namespace {

EnvironmentSpec ohmic(double gamma, double cutoff, double T) {
  EnvironmentSpec e;
  e.gamma = gamma;
  e.cutoff = cutoff;
  e.temperature = T;
  e.schedule = CouplingSchedule::constant(1.0);
  return e;
}

// Closed-form ohmic dissipation kernel and its first two lag derivatives.
double ohmic_D(double g, double L, double s, int k) {
  const double a = L * L / 4.0, c = g * std::sqrt(pi) / 4.0 * L * L * L, e = std::exp(-a * s * s);
  if (k == 0) return c * s * e;
  if (k == 1) return c * (1.0 - 2.0 * a * s * s) * e;
  return c * (-6.0 * a * s + 4.0 * a * a * s * s * s) * e;
}

// Plain trapezoid on a fixed dense grid; independent of the production refinement.
template <typename F>
double dense_trapezoid(F&& f, double a, double b, int n) {
  return trapezoid<double>(f, a, b, n);
}

}  // namespace

TEST_CASE("spectral density") {
  auto e = ohmic(0.7, 3.0, 0.0);
  CHECK(spectral_density(e, 0.0) == 0.0);
  CHECK(spectral_density(e, 1e-8) / 1e-8 == doctest::Approx(0.7).epsilon(1e-12));
  e.family = SpectralFamily::supraohmic;
  e.power = 3.0;
  CHECK(spectral_density(e, 0.0) == 0.0);
  CHECK(spectral_density(e, 3.0) == doctest::Approx(0.7 * 3.0 / std::exp(1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(spectral_density(e, -1.0), DomainError);
  e.power = 1.5;
  CHECK_THROWS_AS(e.validate(), DomainError);
  CHECK_THROWS_AS(ohmic(-1.0, 1.0, 0.0).validate(), DomainError);
  CHECK_THROWS_AS(ohmic(1.0, 0.0, 0.0).validate(), DomainError);
}

TEST_CASE("ohmic dissipation kernel matches its closed form") {
  const auto e = ohmic(0.3, 5.0, 0.0);
  const double peak = ohmic_D(0.3, 5.0, std::sqrt(2.0) / 5.0, 0);
  CHECK(dissipation_kernel(e, 0.0) == 0.0);
  for (double s : {0.01, 0.1, 0.28, 0.5, 1.0, 2.0}) {
    for (int k = 0; k <= 2; ++k) {
      const double scale = peak * std::pow(5.0, k);
      CHECK(std::abs(dissipation_kernel(e, s, k) - ohmic_D(0.3, 5.0, s, k)) < 1e-9 * scale);
    }
    CHECK(dissipation_kernel(e, -s) == doctest::Approx(-dissipation_kernel(e, s)).epsilon(1e-14));
  }
}

TEST_CASE("noise kernel: parity, zero temperature and high temperature") {
  auto e = ohmic(0.3, 5.0, 0.0);
  for (double s : {0.05, 0.4, 1.3}) {
    CHECK(noise_kernel(e, -s) == doctest::Approx(noise_kernel(e, s)).epsilon(1e-14));
    const double ref = dense_trapezoid(
        [&](double w) { return 0.3 * w * std::exp(-w * w / 25.0) * std::cos(w * s); }, 0.0, 60.0, 400000);
    CHECK(std::abs(noise_kernel(e, s) - ref) < 1e-8 * 0.3 * 25.0);
  }
  // High T: N~ -> 2 T gamma (sqrt(pi)/2) Lambda e^{-Lambda^2 s^2 / 4}, relative correction ~ Lambda^2 / (24 T^2).
  e.temperature = 500.0;
  for (double s : {0.0, 0.1, 0.3}) {
    const double G = 0.3 * std::sqrt(pi) / 2.0 * 5.0 * std::exp(-25.0 * s * s / 4.0);
    CHECK(noise_kernel(e, s) == doctest::Approx(2.0 * e.temperature * G).epsilon(1e-4));
  }
}

TEST_CASE("supraohmic kernels agree with dense quadrature") {
  auto e = ohmic(0.2, 2.0, 1.5);
  e.family = SpectralFamily::supraohmic;
  e.power = 3.0;
  for (double s : {0.2, 1.1}) {
    const double d = dense_trapezoid(
        [&](double w) { return spectral_density(e, w) * std::sin(w * s); }, 0.0, 24.0, 400000);
    const double n = dense_trapezoid(
        [&](double w) { return w == 0.0 ? 0.0 : spectral_density(e, w) / std::tanh(w / 3.0) * std::cos(w * s); },
        0.0, 24.0, 400000);
    CHECK(dissipation_kernel(e, s) == doctest::Approx(d).epsilon(1e-8));
    CHECK(noise_kernel(e, s) == doctest::Approx(n).epsilon(1e-8));
  }
}

TEST_CASE("dissipation kernel acts as a derivative of a delta") {
  // Against g with g(0) = 1, g'(0) = 1, g''(0) = -2: int_0^inf D~ g = g(0) gamma sqrt(pi) Lambda / 2
  // (the local piece) + g'(0) gamma pi / 2 + g''(0) sqrt(pi) gamma / Lambda + O(1 / Lambda^2).
  const double gamma = 0.4;
  auto g = [](double s) { return std::exp(-s * s) * (1.0 + s); };
  double prev_err = 0.0;
  for (double L : {10.0, 100.0, 1000.0}) {
    const auto e = ohmic(gamma, L, 0.0);
    const double I = simpson<double>([&](double s) { return dissipation_kernel(e, s) * g(s); }, 0.0, 14.0 / L, 1024);
    const double derivative_part = I - gamma * std::sqrt(pi) * L / 2.0;
    const double err = std::abs(derivative_part - gamma * pi / 2.0);
    CHECK(err < 5.0 * gamma / L);
    if (prev_err > 0.0) CHECK(prev_err / err > 8.0);
    if (L == 1000.0) CHECK(err * L / gamma == doctest::Approx(2.0 * std::sqrt(pi)).epsilon(0.01));
    prev_err = err;
  }
}

TEST_CASE("transform consistency") {
  const auto e = ohmic(0.3, 4.0, 400.0);
  for (double w : {0.5, 2.0, 5.0}) {
    const double Jw = spectral_density(e, w);
    const double Dw = 2.0 / pi * simpson<double>([&](double s) { return dissipation_kernel(e, s) * std::sin(w * s); },
                                                 0.0, 4.0, 2048);
    const double Nw = 2.0 / pi * simpson<double>([&](double s) { return noise_kernel(e, s) * std::cos(w * s); },
                                                 0.0, 4.0, 2048);
    CHECK(Dw == doctest::Approx(Jw).epsilon(1e-6));
    CHECK(Nw == doctest::Approx(2.0 * e.temperature / w * Jw).epsilon(1e-4));
  }
}

TEST_CASE("kernel table and spectral positivity") {
  const auto e = ohmic(0.3, 4.0, 50.0);
  const auto tab = kernel_table(e, 0.02, 512);
  CHECK(tab.size() == 512);
  CHECK(tab.Dtilde[0] == 0.0);
  CHECK(tab.Dtilde[7] == doctest::Approx(ohmic_D(0.3, 4.0, 0.14, 0)).epsilon(1e-9));
  // Continuum value gamma sqrt(pi) Lambda / 2, up to the O((Lambda ds)^2) trapezoid error.
  CHECK(tab.local_part == doctest::Approx(0.3 * std::sqrt(pi) * 4.0 / 2.0).epsilon(1e-3));
  CHECK(noise_spectrum_min_ratio(tab.Ntilde) >= -1e-10);
  // An oscillating sequence is not a valid correlation.
  std::vector<double> bad = {1.0, 0.95, 0.0, 0.0};
  CHECK(noise_spectrum_min_ratio(bad) < 0.0);
}

TEST_CASE("full kernels") {
  auto e = ohmic(0.3, 4.0, 50.0);
  e.schedule = CouplingSchedule::constant(0.8);
  const auto tab = kernel_table(e, 0.05, 64);
  const auto fk = assemble_full_kernels(e, 0.0, 0.05, 64);
  CHECK((fk.N - fk.N.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fk.clipped <= 1e-6);
  for (int i = 0; i < 64; i += 7)
    for (int j = 0; j < 64; j += 5) {
      const int k = std::abs(i - j);
      CHECK(fk.D(i, j) == doctest::Approx((i >= j ? 1 : -1) * 0.64 * tab.Dtilde[k]).epsilon(1e-14));
      CHECK(std::abs(fk.N(i, j) - 0.64 * tab.Ntilde[k]) < 1e-10 * 0.64 * tab.Ntilde[0]);
    }
  // Stationary: constant along diagonals.
  CHECK(fk.D(10, 3) == fk.D(40, 33));

  // lambda vanishes on t in [1, 2): the matching rows and columns vanish.
  e.schedule = CouplingSchedule::custom([](double t) { return (t >= 1.0 && t < 2.0) ? 0.0 : 1.0; },
                                        [](double) { return 0.0; }, [](double) { return 0.0; });
  const auto gated = assemble_full_kernels(e, 0.0, 0.05, 64);
  for (int i = 20; i < 40; ++i) {
    CHECK(gated.D.row(i).cwiseAbs().maxCoeff() == 0.0);
    CHECK(gated.D.col(i).cwiseAbs().maxCoeff() == 0.0);
    CHECK(gated.N.row(i).cwiseAbs().maxCoeff() < 1e-12 * gated.N(0, 0));
  }
}

TEST_CASE("drive-tied coupling derivatives") {
  const auto p = DriveProfile::raised_cosine(2.0);
  const auto c = CouplingSchedule::drive_tied(0.5, 4.0, p);
  CHECK(c.value(0.0) == doctest::Approx(0.5));
  CHECK(c.value(1.0) == doctest::Approx(0.5 * 2.0));
  for (double t : {0.1, 0.7, 1.3}) {
    const double h = 1e-5;
    CHECK(c.rate(t) == doctest::Approx((c.value(t + h) - c.value(t - h)) / (2 * h)).epsilon(1e-7));
    CHECK(c.curvature(t) == doctest::Approx((c.rate(t + h) - c.rate(t - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("einstein relation") {
  const auto e = ohmic(0.3, 4.0, 200.0);
  const auto r = check_einstein_relation(e);
  CHECK(r.high_temperature);
  CHECK(r.residual < 0.02);
  CHECK(r.friction == doctest::Approx(0.3 * pi).epsilon(1e-4));
  CHECK(r.noise_strength == doctest::Approx(2.0 * pi * 200.0 * 0.3).epsilon(1e-4));
  auto e2 = e;
  e2.temperature *= 2.0;
  const auto r2 = check_einstein_relation(e2);
  CHECK(r2.noise_strength == doctest::Approx(2.0 * r.noise_strength).epsilon(1e-6));
  CHECK(std::abs(r2.residual - r.residual) < 1e-6);
  const auto z = check_einstein_relation(ohmic(0.0, 4.0, 200.0));
  CHECK(z.noise_strength == 0.0);
  CHECK(z.friction == 0.0);
}

TEST_CASE("noise kernel width scales as 1 / Lambda") {
  std::vector<double> widths;
  for (double L : {1.0, std::sqrt(10.0), 10.0}) {
    const auto e = ohmic(0.3, L, 1000.0);
    widths.push_back(noise_kernel_width(e) * L);
  }
  for (double w : widths) CHECK(w == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
}
