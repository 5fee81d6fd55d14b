#pragma once

// Eigenvalue problem of the slab cavity: a 1D cavity [0, L] with perfectly
// reflecting walls and a delta-potential sheet of strength V at x = L/2.
// Only modes with a non-vanishing field at the sheet are enumerated; they
// satisfy 2k = -V tan(kL/2) and have exactly one root kL in ((2m-1)pi, 2m pi).

#include <vector>

namespace dcelab {

struct CavityConfig {
  double L = 1.0;     // length
  double V0 = 1.0;    // sheet potential without excitation [1/length]
  double Vmax = 1.0;  // peak sheet potential [1/length]

  void validate() const;
  double v0() const { return V0 * L; }
  double vmax() const { return Vmax * L; }
};

struct SpectrumTolerances {
  double root_residual = 1e-12;  // nondimensional |2kL + VL tan(kL/2)|
  int quad_panels = 2048;        // Simpson panels per cavity half
  double quad_rel_tol = 1e-8;    // panel-doubling agreement for couplings
};

/// One root of the nondimensional equation 2 kappa = -v tan(kappa/2).
///
/// The root is stored as an offset from whichever bracket end it is closer
/// to, so that the residual can be evaluated without cancellation even when
/// the root sits within a few ulps of 2 m pi (v ~ 1e14) or of the tangent
/// pole (v -> 0).
struct RootEntry {
  int m = 0;
  double kappa = 0.0;   // kL
  double offset = 0.0;  // distance to the anchored bracket end, > 0
  bool anchored_right = true;  // true: kappa = 2 m pi - offset; false: kappa = (2m-1) pi + offset
  double norm = 0.0;    // (Psi, Psi) = 1 - sin(kL)/(kL)
};

/// Nondimensional residual |2 kappa + v tan(kappa/2)| evaluated through the stored offset.
double root_residual(const RootEntry& root, double v);

/// m-th root of 2 kappa = -v tan(kappa/2) for v = V L >= 0.
RootEntry solve_root(double v, int m, const SpectrumTolerances& tol = {});

struct WavenumberEntry {
  int m = 0;
  double k = 0.0;  // [1/length]
  RootEntry root;
  double norm() const { return root.norm; }
};

struct WavenumberTable {
  double L = 1.0;
  double V = 0.0;
  std::vector<WavenumberEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
  const WavenumberEntry& mode(int m) const;
};

struct ModeFunction {
  double k = 0.0;
  double L = 1.0;
};

/// Sheet potential 4 pi n_s e^2 / m_eff of a thin plasma layer (natural units).
double plasma_potential(double surface_density, double charge, double effective_mass);

/// m-th static wavenumber for sheet potential V.
double static_wavenumber(const CavityConfig& cavity, double V, int m,
                         const SpectrumTolerances& tol = {});

double mode_norm(double k, double L);

/// Psi(x): sqrt(2/L) sin(kx) left of the sheet, -sqrt(2/L) sin(k(x-L)) right of it.
double mode_value(const ModeFunction& mode, double x);
/// d Psi / dk at fixed x.
double mode_dk(const ModeFunction& mode, double x);
/// d^2 Psi / dk^2 at fixed x.
double mode_dk2(const ModeFunction& mode, double x);

/// g^(A)_{mn} = (dPsi_m/dk_m, Psi_n) / (Psi_n, Psi_n). Carries one power of length.
double coupling_A(const WavenumberTable& table, int m, int n, const SpectrumTolerances& tol = {});
/// g^(B)_{mn} = (d^2Psi_m/dk_m^2, Psi_n) / (Psi_n, Psi_n). Carries two powers of length.
double coupling_B(const WavenumberTable& table, int m, int n, const SpectrumTolerances& tol = {});

WavenumberTable spectrum_table(const CavityConfig& cavity, double V, int modes,
                               const SpectrumTolerances& tol = {});

}  // namespace dcelab
