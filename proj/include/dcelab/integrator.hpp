#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <type_traits>

namespace dcelab {

namespace detail {
template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
}  // namespace detail

/// Three-stage Gauss-Legendre collocation (order 6) for linear systems
///   y' = A(t) y + b(t),
/// with A real and y either real or complex. The method is symplectic and
/// preserves quadratic invariants of the flow, such as the Wronskian of a
/// second-order oscillator, to roundoff.
///
/// With `constant_matrix` the stage matrix is factorized once per step size and
/// A(t) is assumed not to change; b(t) is still sampled every step.
///
/// `System` must provide `void operator()(double t, Eigen::MatrixXd& A, Vec& b) const`,
/// filling an n x n matrix and a length-n forcing vector.
template <typename Scalar>
class GaussLegendre3 {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit GaussLegendre3(int n, bool constant_matrix = false) : n_(n), constant_(constant_matrix) {
    const double r = std::sqrt(15.0);
    c_ << 0.5 - r / 10.0, 0.5, 0.5 + r / 10.0;
    a_ << 5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0,
          5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0,
          5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0;
    w_ << 5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0;
    for (auto& Ai : A_) Ai.setZero(n, n);
    for (auto& bi : b_) bi.setZero(n);
  }

  int dimension() const { return n_; }

  /// Advance y from t to t + h in place. h may be negative.
  template <typename System>
  void step(const System& sys, double t, double h, Vec& y) {
    Mat Y = y;
    step_columns(sys, t, h, Y, false);
    y = Y.col(0);
  }

  /// Advance every column of Y as an independent solution of the homogeneous
  /// system y' = A(t) y, sharing one factorization per step. b(t) is ignored.
  template <typename System>
  void step_homogeneous(const System& sys, double t, double h, Mat& Y) {
    step_columns(sys, t, h, Y, true);
  }

  /// Columns of Y share A(t) but carry their own forcing: `forcing(t)` returns an
  /// n x cols(Y) matrix. b(t) from `sys` is ignored.
  template <typename System, typename Forcing>
  void step_forced(const System& sys, const Forcing& forcing, double t, double h, Mat& Y) {
    for (int i = 0; i < 3; ++i) {
      sys(t + c_(i) * h, A_[i], b_[i]);
      B_[i] = forcing(t + c_(i) * h);
    }
    advance(h, Y);
  }

 private:
  template <typename System>
  void step_columns(const System& sys, double t, double h, Mat& y, bool homogeneous) {
    for (int i = 0; i < 3; ++i) {
      sys(t + c_(i) * h, A_[i], b_[i]);
      if (homogeneous) b_[i].setZero();
      B_[i] = b_[i].replicate(1, y.cols());
    }
    advance(h, y);
  }

  // One step given stage matrices A_ and stage forcings B_.
  void advance(double h, Mat& y) {
    const int n = n_;
    if (!constant_ || !have_lu_ || h != lu_h_) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(3 * n, 3 * n);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M.block(i * n, j * n, n, n) -= h * a_(i, j) * A_[j];
      lu_.compute(M);
      have_lu_ = true;
      lu_h_ = h;
    }
    // Stage values Y_i = y + h sum_j a_ij (A_j Y_j + B_j).
    const Eigen::Index r = y.cols();
    Mat rhs(3 * n, r);
    for (int i = 0; i < 3; ++i) {
      Mat acc = y;
      for (int j = 0; j < 3; ++j) acc += (h * a_(i, j)) * B_[j];
      rhs.middleRows(i * n, n) = acc;
    }
    const Mat Y = solve(rhs);
    for (int i = 0; i < 3; ++i) y += (h * w_(i)) * (A_[i] * Y.middleRows(i * n, n) + B_[i]);
  }

  Mat solve(const Mat& rhs) const {
    if constexpr (detail::is_complex<Scalar>::value) {
      const Eigen::Index r = rhs.cols();
      Eigen::MatrixXd two(rhs.rows(), 2 * r);
      two.leftCols(r) = rhs.real();
      two.rightCols(r) = rhs.imag();
      const Eigen::MatrixXd x = lu_.solve(two);
      Mat out(rhs.rows(), r);
      out.real() = x.leftCols(r);
      out.imag() = x.rightCols(r);
      return out;
    } else {
      return lu_.solve(rhs);
    }
  }

  int n_;
  bool constant_;
  Eigen::Vector3d c_, w_;
  Eigen::Matrix3d a_;
  Eigen::MatrixXd A_[3];
  Vec b_[3];
  Mat B_[3];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool have_lu_ = false;
  double lu_h_ = 0.0;
};

}  // namespace dcelab
