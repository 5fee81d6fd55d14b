#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "dcelab/errors.hpp"
#include "dcelab/quadrature.hpp"
#include "dcelab/spectrum.hpp"

using namespace dcelab;
using std::numbers::pi;

namespace {

// Plain bisection on the tangent form; independent of the production solver.
double bisection_root(double v, int m) {
  double lo = (2.0 * m - 1.0) * pi * (1.0 + 1e-15), hi = 2.0 * m * pi;
  auto f = [&](double k) { return 2.0 * k + v * std::tan(0.5 * k); };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

const std::vector<double> kVs = {1e-3, 1.0, 10.0, 1e6, 1e14};

}  // namespace

TEST_CASE("plasma potential") {
  CHECK(plasma_potential(1.0, 1.0, 1.0) == doctest::Approx(4.0 * pi).epsilon(1e-15));
  CHECK(plasma_potential(2.0, 3.0, 5.0) == doctest::Approx(2.0 * plasma_potential(1.0, 3.0, 5.0)));
  // Good-conductor scale used for the peak potential.
  CHECK(plasma_potential(1e16 / (4.0 * pi), 1.0, 1.0) == doctest::Approx(1e16).epsilon(1e-14));
  CHECK_THROWS_AS(plasma_potential(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(plasma_potential(1.0, -1.0, 1.0), DomainError);
}

TEST_CASE("root at v = 10 agrees with bisection oracle") {
  const double oracle = bisection_root(10.0, 1);
  CHECK(std::abs(2.0 * oracle + 10.0 * std::tan(0.5 * oracle)) < 1e-13);
  // 40-digit reference: kL = 4.7612889693468048834
  CHECK(oracle == doctest::Approx(4.7612889693468048834).epsilon(1e-15));
  const auto r = solve_root(10.0, 1);
  CHECK(r.kappa == doctest::Approx(oracle).epsilon(1e-15));
  for (int m = 2; m <= 5; ++m) CHECK(solve_root(10.0, m).kappa == doctest::Approx(bisection_root(10.0, m)).epsilon(1e-14));
}

TEST_CASE("limits of the sheet potential") {
  for (int m = 1; m <= 5; ++m) {
    const auto hard = solve_root(1e14, m);
    CHECK(std::abs(hard.kappa - 2.0 * m * pi) / (2.0 * m * pi) < 1e-10);
    const auto soft = solve_root(1e-9, m);
    CHECK(std::abs(soft.kappa - (2.0 * m - 1.0) * pi) / ((2.0 * m - 1.0) * pi) < 1e-8);
    // Leading-order departure from the pole is v / kappa.
    const auto weak = solve_root(1e-3, m);
    CHECK((weak.kappa - (2.0 * m - 1.0) * pi) == doctest::Approx(1e-3 / ((2.0 * m - 1.0) * pi)).epsilon(1e-3));
  }
  CHECK(solve_root(0.0, 2).kappa == doctest::Approx(3.0 * pi));
}

TEST_CASE("root residuals and brackets") {
  for (double v : kVs) {
    for (int m = 1; m <= 5; ++m) {
      const auto r = solve_root(v, m);
      CHECK(root_residual(r, v) < 1e-10);
      CHECK(r.kappa > (2.0 * m - 1.0) * pi);
      CHECK(r.kappa < 2.0 * m * pi);
    }
  }
  CHECK_THROWS_AS(solve_root(1.0, 0), DomainError);
  CHECK_THROWS_AS(solve_root(-1.0, 1), DomainError);
}

TEST_CASE("wavenumber grows monotonically with the potential") {
  for (int m = 1; m <= 3; ++m) {
    double prev = (2.0 * m - 1.0) * pi;
    for (double v = 1e-4; v < 1e15; v *= 3.0) {
      const double k = solve_root(v, m).kappa;
      CHECK(k >= prev);
      prev = k;
    }
    CHECK(prev <= 2.0 * m * pi);
  }
}

TEST_CASE("mode norm") {
  CHECK(mode_norm(2.0 * pi, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mode_norm(pi, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mode_norm(0.5 * pi, 1.0) == doctest::Approx(1.0 - 2.0 / pi).epsilon(1e-15));
  CHECK(mode_norm(0.5 * pi, 1.0) == doctest::Approx(0.36338).epsilon(1e-5));
}

TEST_CASE("mode function boundary conditions") {
  const CavityConfig cav{0.37, 10.0 / 0.37, 20.0 / 0.37};
  const auto table = spectrum_table(cav, cav.V0, 3);
  for (const auto& e : table.entries) {
    const ModeFunction psi{e.k, cav.L};
    CHECK(std::abs(mode_value(psi, 0.0)) < 1e-15);
    CHECK(std::abs(mode_value(psi, cav.L)) < 1e-15);
    // both branches at the sheet
    const double left = std::sqrt(2.0 / cav.L) * std::sin(e.k * 0.5 * cav.L);
    const double right = -std::sqrt(2.0 / cav.L) * std::sin(e.k * (0.5 * cav.L - cav.L));
    CHECK(std::abs(left - right) <= 1e-12 * std::abs(left));
    // derivative jump equals -V Psi(L/2)
    const double h = 1e-6 * cav.L, x = 0.5 * cav.L;
    const double dleft = (mode_value(psi, x) - mode_value(psi, x - h)) / h;
    const double dright = (mode_value(psi, x + h) - mode_value(psi, x)) / h;
    CHECK((dleft - dright) == doctest::Approx(-cav.V0 * mode_value(psi, x)).epsilon(1e-4));
  }
  CHECK_THROWS_AS(mode_value({1.0, 1.0}, -0.1), DomainError);
  CHECK_THROWS_AS(mode_value({1.0, 1.0}, 1.1), DomainError);
}

TEST_CASE("analytic k-derivatives of the mode function") {
  const ModeFunction psi{5.3, 1.0};
  const double dk = 1e-5;
  for (double x : {0.1, 0.3, 0.5, 0.62, 0.9}) {
    const double fd = (mode_value({psi.k + dk, 1.0}, x) - mode_value({psi.k - dk, 1.0}, x)) / (2 * dk);
    CHECK(mode_dk(psi, x) == doctest::Approx(fd).epsilon(1e-7));
    const double fd2 = (mode_dk({psi.k + dk, 1.0}, x) - mode_dk({psi.k - dk, 1.0}, x)) / (2 * dk);
    CHECK(mode_dk2(psi, x) == doctest::Approx(fd2).epsilon(1e-6));
  }
}

TEST_CASE("numerical orthogonality of the first five modes") {
  const CavityConfig cav{1.0, 10.0, 10.0};
  const auto table = spectrum_table(cav, 10.0, 5);
  for (int m = 1; m <= 5; ++m) {
    for (int n = 1; n <= 5; ++n) {
      const ModeFunction a{table.mode(m).k, 1.0}, b{table.mode(n).k, 1.0};
      auto f = [&](double x) { return mode_value(a, x) * mode_value(b, x); };
      const double ip = simpson(f, 0.0, 0.5, 4096) + simpson(f, 0.5, 1.0, 4096);
      const double expect = m == n ? table.mode(m).norm() : 0.0;
      CHECK(std::abs(ip - expect) < 1e-8);
    }
  }
}

TEST_CASE("coupling coefficients") {
  const CavityConfig cav{1.0, 10.0, 10.0};
  const auto table = spectrum_table(cav, 10.0, 2);

  // 1e6-point trapezoid oracle for the diagonal g^(A).
  const ModeFunction p1{table.mode(1).k, 1.0};
  auto fa = [&](double x) { return mode_dk(p1, x) * mode_value(p1, x); };
  const double oracle = (trapezoid(fa, 0.0, 0.5, 500000) + trapezoid(fa, 0.5, 1.0, 500000)) / table.mode(1).norm();
  const double gA11 = coupling_A(table, 1, 1);
  CHECK(gA11 == doctest::Approx(oracle).epsilon(1e-9));
  // 40-digit adaptive-quadrature reference values
  CHECK(gA11 == doctest::Approx(-0.022452465303054109).epsilon(1e-10));
  CHECK(coupling_B(table, 1, 1) == doctest::Approx(-0.10751783321068818).epsilon(1e-10));
  CHECK(coupling_A(table, 1, 2) == doctest::Approx(0.16641991586031859).epsilon(1e-10));
  CHECK(coupling_A(table, 2, 1) == doctest::Approx(-0.16760958812505426).epsilon(1e-10));
  CHECK(coupling_B(table, 2, 1) == doctest::Approx(0.058011146701080245).epsilon(1e-10));

  // panel doubling
  SpectrumTolerances fine;
  fine.quad_panels = 4096;
  CHECK(std::abs(coupling_A(table, 1, 2, fine) - coupling_A(table, 1, 2)) < 1e-8);
  CHECK(std::abs(coupling_B(table, 2, 2, fine) - coupling_B(table, 2, 2)) < 1e-8);

  // g^(A) carries a length, g^(B) a squared length: (L, V) -> (sL, V/s)
  const double s = 3.5;
  const CavityConfig scaled{s, 10.0 / s, 10.0 / s};
  const auto t2 = spectrum_table(scaled, 10.0 / s, 2);
  CHECK(coupling_A(t2, 1, 2) == doctest::Approx(s * coupling_A(table, 1, 2)).epsilon(1e-9));
  CHECK(coupling_B(t2, 2, 2) == doctest::Approx(s * s * coupling_B(table, 2, 2)).epsilon(1e-9));

  SpectrumTolerances coarse;
  coarse.quad_panels = 4;
  CHECK_THROWS_AS(coupling_A(table, 1, 2, coarse), AccuracyError);
}

TEST_CASE("spectrum table") {
  const CavityConfig cav{2.0, 5e13, 5e13};
  const auto hard = spectrum_table(cav, 5e13, 3);
  for (int m = 1; m <= 3; ++m) CHECK(hard.mode(m).k == doctest::Approx(m * pi).epsilon(1e-12));

  const auto t = spectrum_table({1.0, 10.0, 10.0}, 10.0, 3);
  const double d1 = t.mode(2).k - t.mode(1).k, d2 = t.mode(3).k - t.mode(2).k;
  CHECK(std::abs(d2 - d1) > 0.1);
  CHECK(t.mode(1).k < t.mode(2).k);
  CHECK(t.mode(2).k < t.mode(3).k);

  const CavityConfig c{0.5, 7.0, 7.0};
  CHECK(spectrum_table(c, 7.0, 1).mode(1).k == static_wavenumber(c, 7.0, 1));
  CHECK_THROWS_AS(spectrum_table(c, 7.0, 0), DomainError);
  CHECK_THROWS_AS(t.mode(4), DomainError);
}
