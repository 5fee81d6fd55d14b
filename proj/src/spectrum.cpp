#include "dcelab/spectrum.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dcelab/errors.hpp"
#include "dcelab/quadrature.hpp"

namespace dcelab {

namespace {

constexpr double pi = std::numbers::pi;

double norm_from_root(const RootEntry& r) {
  // sin(kappa) through the offset keeps full relative precision near the bracket ends.
  const double s = -std::sin(r.offset);
  return 1.0 - s / r.kappa;
}

template <typename F>
double inner_product(F&& f, double L, int panels) {
  const auto n = static_cast<std::size_t>(panels);
  return simpson(f, 0.0, 0.5 * L, n) + simpson(f, 0.5 * L, L, n);
}

template <typename Deriv>
double coupling(const WavenumberTable& table, int m, int n, const SpectrumTolerances& tol,
                Deriv&& deriv, int length_power, const char* name) {
  const auto& em = table.mode(m);
  const auto& en = table.mode(n);
  const ModeFunction pm{em.k, table.L};
  const ModeFunction pn{en.k, table.L};
  auto integrand = [&](double x) { return deriv(pm, x) * mode_value(pn, x); };
  const double coarse = inner_product(integrand, table.L, tol.quad_panels);
  const double fine = inner_product(integrand, table.L, 2 * tol.quad_panels);
  const double scale = std::max(std::abs(fine), std::pow(table.L, length_power));
  const double change = std::abs(fine - coarse);
  if (change > tol.quad_rel_tol * scale)
    throw AccuracyError(std::string(name) + " quadrature did not converge for (m, n) = (" +
                            std::to_string(m) + ", " + std::to_string(n) + ")",
                        change / scale);
  return fine / en.norm();
}

}  // namespace

void CavityConfig::validate() const {
  if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("cavity length must be positive");
  if (!(V0 > 0.0) || !std::isfinite(V0)) throw DomainError("V0 must be positive");
  if (!(Vmax >= V0) || !std::isfinite(Vmax)) throw DomainError("Vmax must satisfy Vmax >= V0");
}

double plasma_potential(double surface_density, double charge, double effective_mass) {
  if (!(surface_density > 0.0) || !(charge > 0.0) || !(effective_mass > 0.0))
    throw DomainError("plasma_potential: inputs must be positive");
  return 4.0 * pi * surface_density * charge * charge / effective_mass;
}

double root_residual(const RootEntry& r, double v) {
  if (r.anchored_right) return std::abs(2.0 * r.kappa - v * std::tan(0.5 * r.offset));
  if (r.offset == 0.0) return v == 0.0 ? 0.0 : INFINITY;
  return std::abs(2.0 * r.kappa - v / std::tan(0.5 * r.offset));
}

RootEntry solve_root(double v, int m, const SpectrumTolerances& tol) {
  if (m < 1) throw DomainError("mode index must be >= 1");
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("sheet potential must be finite and >= 0");

  RootEntry r;
  r.m = m;
  const double right_end = 2.0 * pi * m;
  const double left_end = (2.0 * m - 1.0) * pi;
  if (v == 0.0) {
    r.kappa = left_end;
    r.offset = 0.0;
    r.anchored_right = false;
    r.norm = norm_from_root(r);
    return r;
  }

  // kappa = 2 m pi - delta turns 2 kappa = -v tan(kappa/2) into the pole-free
  // v sin(delta/2) = 2 (2 m pi - delta) cos(delta/2) on delta in (0, pi).
  auto right_form = [&](double d) {
    return v * std::sin(0.5 * d) - 2.0 * (right_end - d) * std::cos(0.5 * d);
  };
  auto sol = brent_root(right_form, 0.0, pi);
  if (sol.x <= 0.5 * pi) {
    r.anchored_right = true;
    r.offset = sol.x;
    r.kappa = right_end - sol.x;
  } else {
    // kappa = (2m-1) pi + eta: 2 kappa sin(eta/2) = v cos(eta/2).
    auto left_form = [&](double eta) {
      return 2.0 * (left_end + eta) * std::sin(0.5 * eta) - v * std::cos(0.5 * eta);
    };
    sol = brent_root(left_form, 0.0, pi);
    r.anchored_right = false;
    r.offset = sol.x;
    r.kappa = left_end + sol.x;
  }
  if (!(r.offset > 0.0) || !(r.offset < pi))
    throw InternalError("root left its bracket for m = " + std::to_string(m));
  const double res = root_residual(r, v);
  if (!(res <= tol.root_residual * std::max(1.0, r.kappa)))
    throw InternalError("root residual " + std::to_string(res) + " above tolerance for m = " +
                        std::to_string(m));
  r.norm = norm_from_root(r);
  return r;
}

const WavenumberEntry& WavenumberTable::mode(int m) const {
  if (m < 1 || m > size()) throw DomainError("mode index " + std::to_string(m) + " not in table");
  return entries[static_cast<std::size_t>(m - 1)];
}

double static_wavenumber(const CavityConfig& cavity, double V, int m, const SpectrumTolerances& tol) {
  if (!(cavity.L > 0.0)) throw DomainError("cavity length must be positive");
  return solve_root(V * cavity.L, m, tol).kappa / cavity.L;
}

double mode_norm(double k, double L) {
  const double kl = k * L;
  return 1.0 - std::sin(kl) / kl;
}

namespace {
void check_position(const ModeFunction& mode, double x) {
  if (!(x >= 0.0 && x <= mode.L)) throw DomainError("position outside the cavity");
}
}  // namespace

double mode_value(const ModeFunction& mode, double x) {
  check_position(mode, x);
  const double a = std::sqrt(2.0 / mode.L);
  if (x <= 0.5 * mode.L) return a * std::sin(mode.k * x);
  return -a * std::sin(mode.k * (x - mode.L));
}

double mode_dk(const ModeFunction& mode, double x) {
  check_position(mode, x);
  const double a = std::sqrt(2.0 / mode.L);
  if (x <= 0.5 * mode.L) return a * x * std::cos(mode.k * x);
  const double y = x - mode.L;
  return -a * y * std::cos(mode.k * y);
}

double mode_dk2(const ModeFunction& mode, double x) {
  check_position(mode, x);
  const double a = std::sqrt(2.0 / mode.L);
  if (x <= 0.5 * mode.L) return -a * x * x * std::sin(mode.k * x);
  const double y = x - mode.L;
  return a * y * y * std::sin(mode.k * y);
}

double coupling_A(const WavenumberTable& table, int m, int n, const SpectrumTolerances& tol) {
  return coupling(table, m, n, tol, mode_dk, 1, "coupling_A");
}

double coupling_B(const WavenumberTable& table, int m, int n, const SpectrumTolerances& tol) {
  return coupling(table, m, n, tol, mode_dk2, 2, "coupling_B");
}

WavenumberTable spectrum_table(const CavityConfig& cavity, double V, int modes,
                               const SpectrumTolerances& tol) {
  if (modes < 1) throw DomainError("mode count must be >= 1");
  if (!(cavity.L > 0.0)) throw DomainError("cavity length must be positive");
  WavenumberTable table;
  table.L = cavity.L;
  table.V = V;
  table.entries.reserve(static_cast<std::size_t>(modes));
  for (int m = 1; m <= modes; ++m) {
    WavenumberEntry e;
    e.m = m;
    e.root = solve_root(V * cavity.L, m, tol);
    e.k = e.root.kappa / cavity.L;
    table.entries.push_back(e);
  }
  return table;
}

}  // namespace dcelab
