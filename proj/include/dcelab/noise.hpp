#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcelab/environment.hpp"

namespace dcelab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter counter, Key key);
};

/// Standard normal draws from the Philox stream (seed, stream). Draw i depends only on
/// (seed, stream, i), so realizations can be regenerated in any order.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream);
  double next();
  void fill(double* out, std::size_t n);

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct NoiseRealization {
  std::vector<double> t;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct CovarianceFactor {
  Eigen::MatrixXd A;     // A A^T reproduces the covariance
  double floored = 0.0;  // most negative eigenvalue set to zero, relative to the spectral radius
};

/// Symmetric eigendecomposition N = V diag(max(w, 0)) V^T, A = V diag(sqrt(max(w, 0))).
/// Throws DomainError when N departs from symmetry by more than 1e-10 of its largest entry.
CovarianceFactor factorize_covariance(const Eigen::MatrixXd& N);

/// M realizations values = A z on the grid t_i = t0 + i dt; realization r uses stream first_stream + r.
std::vector<NoiseRealization> sample(const CovarianceFactor& factor, double t0, double dt, int M,
                                     std::uint64_t seed, std::uint64_t first_stream = 0);

/// Stationary draw with analytic (spectral) derivatives on the grid.
struct StationaryDraw {
  Eigen::VectorXd F;
  Eigen::VectorXd dF;
  Eigen::VectorXd ddF;
};

/// Circulant embedding of a stationary covariance given at lags 0..n-1 on a grid of step dt.
class CirculantSampler {
 public:
  /// Embeds lags 0..L-1 into a circulant of length 2(L-1) and returns the first
  /// `output_size` points (all L when 0). L - 1 a power of two keeps the FFTs fast.
  /// Fails (empty) when the embedding has a negative eigenvalue below -1e-10 of the largest.
  static std::optional<CirculantSampler> create(const std::vector<double>& Ntilde, double dt, int output_size = 0);

  int size() const { return n_; }
  double dt() const { return dt_; }
  /// Grid-exact sample of the covariance plus its spectral first and second derivatives.
  /// Derivatives are left empty when `derivatives` is false.
  StationaryDraw draw(std::uint64_t seed, std::uint64_t stream, bool derivatives = true) const;

 private:
  CirculantSampler() = default;
  int n_ = 0;
  double dt_ = 0.0;
  std::vector<double> amplitude_;  // sqrt(lambda_k / m)
  std::vector<double> omega_;      // signed angular frequency of bin k; 0 at Nyquist
};

/// Circulant synthesis of M realizations of `output_size` points (0: all lags); falls back to factorization of the Toeplitz
/// matrix when the embedding fails, and says so in `notice`.
std::vector<NoiseRealization> stationary_sample_fft(const std::vector<double>& Ntilde, double dt, int M,
                                                    std::uint64_t seed, std::string* notice = nullptr,
                                                    int output_size = 0);

/// Covariance of (F, F', F'') for a stationary process with kernel N~ on the grid j dt,
/// as a 3n x 3n matrix in block order [F; F'; F''].
Eigen::MatrixXd stationary_joint_covariance(const EnvironmentSpec& spec, double dt, int n,
                                            const KernelQuadrature& q = {});

/// CSV with header "t,F".
void write_noise_csv(const std::string& path, const NoiseRealization& r);
NoiseRealization read_noise_csv(const std::string& path);

}  // namespace dcelab
