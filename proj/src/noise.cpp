#include "dcelab/noise.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "dcelab/errors.hpp"

namespace dcelab {

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += W0;
      k[1] += W1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                   static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  ++block_;
  const auto r = Philox4x32::block(ctr, key_);
  // Two 53-bit uniforms in (0, 1).
  const std::uint64_t a = ((static_cast<std::uint64_t>(r[0]) << 32) | r[1]) >> 11;
  const std::uint64_t b = ((static_cast<std::uint64_t>(r[2]) << 32) | r[3]) >> 11;
  const double u1 = (static_cast<double>(a) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(b) + 0.5) * 0x1.0p-53;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = rad * std::sin(th);
  has_spare_ = true;
  return rad * std::cos(th);
}

void NormalStream::fill(double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = next();
}

CovarianceFactor factorize_covariance(const Eigen::MatrixXd& N) {
  if (N.rows() != N.cols() || N.rows() == 0) throw DomainError("covariance must be a non-empty square matrix");
  const double big = N.cwiseAbs().maxCoeff();
  if ((N - N.transpose()).cwiseAbs().maxCoeff() > 1e-10 * big) throw DomainError("covariance is not symmetric");
  CovarianceFactor out;
  if (big == 0.0) {
    out.A = Eigen::MatrixXd::Zero(N.rows(), N.cols());
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (N + N.transpose()));
  const Eigen::VectorXd w = eig.eigenvalues();
  const double radius = w.cwiseAbs().maxCoeff();
  if (w.minCoeff() < 0.0) out.floored = -w.minCoeff() / radius;
  out.A = eig.eigenvectors() * w.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return out;
}

std::vector<NoiseRealization> sample(const CovarianceFactor& factor, double t0, double dt, int M,
                                     std::uint64_t seed, std::uint64_t first_stream) {
  if (M < 1) throw DomainError("sample count must be >= 1");
  const Eigen::Index n = factor.A.rows();
  std::vector<NoiseRealization> out(static_cast<std::size_t>(M));
  Eigen::VectorXd z(factor.A.cols());
  for (int r = 0; r < M; ++r) {
    NormalStream rng(seed, first_stream + static_cast<std::uint64_t>(r));
    rng.fill(z.data(), static_cast<std::size_t>(z.size()));
    const Eigen::VectorXd v = factor.A * z;
    auto& real = out[static_cast<std::size_t>(r)];
    real.seed = seed;
    real.stream = first_stream + static_cast<std::uint64_t>(r);
    real.values.assign(v.data(), v.data() + n);
    real.t.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) real.t[static_cast<std::size_t>(i)] = t0 + dt * static_cast<double>(i);
  }
  return out;
}

std::optional<CirculantSampler> CirculantSampler::create(const std::vector<double>& Ntilde, double dt,
                                                         int output_size) {
  const std::size_t n = Ntilde.size();
  if (n < 2 || !(dt > 0.0)) throw DomainError("circulant embedding needs >= 2 lags and dt > 0");
  if (output_size < 0 || static_cast<std::size_t>(output_size) > n)
    throw DomainError("circulant output size exceeds the number of lags");
  const std::size_t m = 2 * (n - 1);
  std::vector<double> c(m);
  for (std::size_t j = 0; j < n; ++j) c[j] = Ntilde[j];
  for (std::size_t j = 1; j + 1 < n; ++j) c[m - j] = Ntilde[j];
  std::vector<std::complex<double>> lam;
  Eigen::FFT<double> fft;
  fft.fwd(lam, c);
  double hi = 0.0, lo = 0.0;
  for (const auto& v : lam) {
    hi = std::max(hi, v.real());
    lo = std::min(lo, v.real());
  }
  if (hi <= 0.0 || lo < -1e-10 * hi) return std::nullopt;
  CirculantSampler s;
  s.n_ = output_size == 0 ? static_cast<int>(n) : output_size;
  s.dt_ = dt;
  s.amplitude_.resize(m);
  s.omega_.resize(m);
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(m) * dt);
  for (std::size_t k = 0; k < m; ++k) {
    s.amplitude_[k] = std::sqrt(std::max(0.0, lam[k].real()) / static_cast<double>(m));
    const long signed_k = k < m / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(m);
    s.omega_[k] = (2 * k == m) ? 0.0 : base * static_cast<double>(signed_k);
  }
  return s;
}

StationaryDraw CirculantSampler::draw(std::uint64_t seed, std::uint64_t stream, bool derivatives) const {
  const std::size_t m = amplitude_.size();
  NormalStream rng(seed, stream);
  std::vector<std::complex<double>> w0(m), w1(m), w2(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double a = rng.next(), b = rng.next();
    const std::complex<double> z = amplitude_[k] * std::complex<double>(a, b);
    // The forward transform uses e^{-i w_k t}, so d/dt multiplies by -i w_k.
    w0[k] = z;
    w1[k] = std::complex<double>(0.0, -omega_[k]) * z;
    w2[k] = -omega_[k] * omega_[k] * z;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> y;
  StationaryDraw d;
  auto take = [&](const std::vector<std::complex<double>>& w, Eigen::VectorXd& out) {
    fft.fwd(y, w);
    out.resize(n_);
    for (int j = 0; j < n_; ++j) out(j) = y[static_cast<std::size_t>(j)].real();
  };
  take(w0, d.F);
  if (derivatives) {
    take(w1, d.dF);
    take(w2, d.ddF);
  }
  return d;
}

std::vector<NoiseRealization> stationary_sample_fft(const std::vector<double>& Ntilde, double dt, int M,
                                                    std::uint64_t seed, std::string* notice, int output_size) {
  if (M < 1) throw DomainError("sample count must be >= 1");
  const auto sampler = CirculantSampler::create(Ntilde, dt, output_size);
  if (!sampler) {
    if (notice) *notice = "circulant embedding has negative eigenvalues; falling back to covariance factorization";
    const int n = output_size == 0 ? static_cast<int>(Ntilde.size()) : output_size;
    Eigen::MatrixXd N(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) N(i, j) = Ntilde[static_cast<std::size_t>(std::abs(i - j))];
    return sample(factorize_covariance(N), 0.0, dt, M, seed);
  }
  if (notice) notice->clear();
  std::vector<NoiseRealization> out(static_cast<std::size_t>(M));
  for (int r = 0; r < M; ++r) {
    const auto d = sampler->draw(seed, static_cast<std::uint64_t>(r), false);
    auto& real = out[static_cast<std::size_t>(r)];
    real.seed = seed;
    real.stream = static_cast<std::uint64_t>(r);
    real.values.assign(d.F.data(), d.F.data() + d.F.size());
    real.t.resize(real.values.size());
    for (std::size_t i = 0; i < real.t.size(); ++i) real.t[i] = dt * static_cast<double>(i);
  }
  return out;
}

Eigen::MatrixXd stationary_joint_covariance(const EnvironmentSpec& spec, double dt, int n, const KernelQuadrature& q) {
  // Cov(F^(a)(t), F^(b)(t')) = (-1)^b N~^(a+b)(t - t'); N~^(k) has parity (-1)^k.
  std::vector<std::vector<double>> tab(5, std::vector<double>(static_cast<std::size_t>(n)));
  for (int k = 0; k <= 4; ++k)
    for (int j = 0; j < n; ++j) tab[k][j] = noise_kernel(spec, dt * j, k, q);
  Eigen::MatrixXd C(3 * n, 3 * n);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int k = a + b;
      const double sb = (b % 2) ? -1.0 : 1.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int lag = i - j;
          const double parity = (lag < 0 && (k % 2)) ? -1.0 : 1.0;
          C(a * n + i, b * n + j) = sb * parity * tab[k][static_cast<std::size_t>(std::abs(lag))];
        }
    }
  return 0.5 * (C + C.transpose());
}

void write_noise_csv(const std::string& path, const NoiseRealization& r) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigurationError("cannot write " + path);
  std::fprintf(f, "t,F\n");
  for (std::size_t i = 0; i < r.values.size(); ++i) std::fprintf(f, "%.17g,%.17g\n", r.t[i], r.values[i]);
  std::fclose(f);
}

NoiseRealization read_noise_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open noise file " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,F") throw DomainError(path + ": expected header \"t,F\"");
  NoiseRealization r;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double t = 0, v = 0;
    char comma = 0;
    if (!(ss >> t >> comma >> v) || comma != ',')
      throw DomainError(path + ":" + std::to_string(lineno) + ": malformed row");
    r.t.push_back(t);
    r.values.push_back(v);
  }
  for (std::size_t i = 1; i < r.t.size(); ++i)
    if (!(r.t[i] > r.t[i - 1])) throw DomainError(path + ": times must be strictly increasing");
  return r;
}

}  // namespace dcelab
