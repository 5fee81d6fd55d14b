#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace dcelab {

/// Composite Simpson rule on [a, b] with `panels` (rounded up to even) subintervals.
template <typename Scalar = double, typename F>
Scalar simpson(F&& f, double a, double b, std::size_t panels) {
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  Scalar odd{0}, even{0};
  for (std::size_t i = 1; i < panels; ++i) {
    const double x = a + h * static_cast<double>(i);
    if (i % 2 == 1)
      odd += f(x);
    else
      even += f(x);
  }
  return (f(a) + f(b) + Scalar(4) * odd + Scalar(2) * even) * (h / 3.0);
}

/// Composite trapezoid rule on [a, b] with `panels` subintervals.
template <typename Scalar = double, typename F>
Scalar trapezoid(F&& f, double a, double b, std::size_t panels) {
  const double h = (b - a) / static_cast<double>(panels);
  Scalar sum = (f(a) + f(b)) * 0.5;
  for (std::size_t i = 1; i < panels; ++i) sum += f(a + h * static_cast<double>(i));
  return sum * h;
}

struct BracketResult {
  double x;
  double fx;
  int iterations;
};

/// Brent's method on a sign-changing bracket [a, b]. Iterates to machine precision.
template <typename F>
BracketResult brent_root(F&& f, double a, double b, int max_iter = 200) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return {a, fa, 0};
  if (fb == 0.0) return {b, fb, 0};
  double c = a, fc = fa, d = b - a, e = d;
  int it = 0;
  for (; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol = 2.0 * 2.220446049250313e-16 * std::abs(b) + 1e-300;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) break;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0)
        q = -q;
      else
        p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  return {b, fb, it};
}

}  // namespace dcelab
