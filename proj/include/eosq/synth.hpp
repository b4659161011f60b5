#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "eosq/common.hpp"
#include "eosq/covariance.hpp"
#include "eosq/rng.hpp"

namespace eosq::synth {

enum class EntryDist { kGaussian, kRademacherScaled };

// Spiked block model: data = sum_i d_i u_i v_i^T + A^{1/2} X B^{1/2} with
// X i.i.d. symmetric entries of variance exactly 1/d.
struct SpikedModelSpec {
  int n = 0;
  int d = 0;
  std::vector<double> signal_strengths;  // descending
  CovarianceSpec noise_row_cov = CovarianceSpec::identity(0);  // A (n x n)
  CovarianceSpec noise_col_cov = CovarianceSpec::identity(0);  // B (d x d)
  EntryDist entry_dist = EntryDist::kGaussian;
  std::uint64_t seed = 0;
  double tau = kDefaultTau;
};

struct SpikedGroundTruth {
  Matrix signal;                   // S, n x d
  Matrix noise;                    // Z, n x d
  Matrix left_vectors;             // n x r, orthonormal columns
  Matrix right_vectors;            // d x r, orthonormal columns
  std::vector<double> strengths;   // d_i, descending
  Vector per_token_snr;            // ||S[t,:]||^2 / ||Z[t,:]||^2
};

struct SampledBlock {
  Matrix data;  // S + Z
  SpikedGroundTruth truth;
};

inline void validate_spec(const SpikedModelSpec& spec) {
  if (spec.n < 2 || spec.d < 2)
    throw validation_error("spiked model requires n, d >= 2");
  const double beta = static_cast<double>(spec.n) / spec.d;
  if (!(beta > spec.tau && beta < 1.0 / spec.tau)) {
    std::ostringstream msg;
    msg << "aspect ratio n/d = " << beta << " outside (" << spec.tau << ", "
        << 1.0 / spec.tau << ")";
    throw validation_error(msg.str());
  }
  const auto& s = spec.signal_strengths;
  if (static_cast<int>(s.size()) >= std::min(spec.n, spec.d))
    throw validation_error("signal rank must be strictly smaller than min(n, d)");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0))
      throw validation_error("signal strengths must be positive");
    if (s[i] >= 1.0 / spec.tau)
      throw validation_error("signal strength exceeds 1/tau");
    if (i > 0 && s[i] > s[i - 1])
      throw validation_error("signal strengths must be sorted descending");
  }
  if (spec.noise_row_cov.dim != spec.n)
    throw validation_error("row covariance dim must equal n");
  if (spec.noise_col_cov.dim != spec.d)
    throw validation_error("column covariance dim must equal d");
}

namespace detail {

// QR of an i.i.d. Gaussian matrix with the triangular factor's diagonal made
// positive, so the factor is both Haar-consistent and seed-deterministic.
inline Matrix orthonormal_factor(int rows, int cols, Rng rng) {
  Matrix g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix& qrm = qr.matrixQR();
  for (int j = 0; j < cols; ++j)
    if (qrm(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

inline Matrix sample_core_entries(int n, int d, EntryDist dist, Rng rng) {
  Matrix x(n, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double e = (dist == EntryDist::kGaussian) ? rng.gaussian()
                                                      : rng.rademacher();
      x(i, j) = e * scale;
    }
  }
  return x;
}

}  // namespace detail

inline SampledBlock sample_block(const SpikedModelSpec& spec) {
  validate_spec(spec);
  const int n = spec.n;
  const int d = spec.d;
  const int r = static_cast<int>(spec.signal_strengths.size());

  const RealizedCovariance row_cov = realize_covariance(spec.noise_row_cov, spec.tau);
  const RealizedCovariance col_cov = realize_covariance(spec.noise_col_cov, spec.tau);

  Matrix x = detail::sample_core_entries(
      n, d, spec.entry_dist, Rng(derive_stream(spec.seed, 0, StreamRole::kNoise)));
  Matrix z = row_cov.is_identity ? std::move(x) : Matrix(row_cov.sqrt * x);
  if (!col_cov.is_identity) z = z * col_cov.sqrt;

  SampledBlock out;
  out.truth.noise = std::move(z);
  out.truth.strengths = spec.signal_strengths;
  if (r > 0) {
    out.truth.left_vectors = detail::orthonormal_factor(
        n, r, Rng(derive_stream(spec.seed, 0, StreamRole::kLeftVectors)));
    out.truth.right_vectors = detail::orthonormal_factor(
        d, r, Rng(derive_stream(spec.seed, 0, StreamRole::kRightVectors)));
    Vector strengths = Eigen::Map<const Vector>(spec.signal_strengths.data(), r);
    out.truth.signal = out.truth.left_vectors * strengths.asDiagonal() *
                       out.truth.right_vectors.transpose();
  } else {
    out.truth.left_vectors = Matrix(n, 0);
    out.truth.right_vectors = Matrix(d, 0);
    out.truth.signal = Matrix::Zero(n, d);
  }
  out.data = out.truth.signal + out.truth.noise;

  out.truth.per_token_snr = Vector(n);
  for (int t = 0; t < n; ++t) {
    const double signal_energy = out.truth.signal.row(t).squaredNorm();
    const double noise_energy = out.truth.noise.row(t).squaredNorm();
    out.truth.per_token_snr[t] =
        noise_energy > 0.0
            ? signal_energy / noise_energy
            : (signal_energy > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marchenko-Pastur closed forms under the entry-variance-1/d convention,
// beta = n/d. The bulk of ZZ^T for white noise is [(1-sqrt(beta))^2,
// (1+sqrt(beta))^2].

inline double mp_bulk_edge(double beta) {
  if (!(beta > 0.0)) throw validation_error("beta must be positive");
  const double s = std::sqrt(beta);
  return (1.0 + s) * (1.0 + s);
}

// Stieltjes transform of the limiting spectral measure of ZZ^T, evaluated at
// real z >= bulk edge. Root chosen so m(z) -> -1/z as z -> infinity.
inline double mp_stieltjes_row(double z, double beta) {
  if (!(beta > 0.0)) throw validation_error("beta must be positive");
  if (!(z >= mp_bulk_edge(beta)))
    throw numeric_error("mp_stieltjes_row: z below the bulk edge");
  const double b = z + beta - 1.0;
  const double disc = std::max(0.0, b * b - 4.0 * beta * z);
  return (-b + std::sqrt(disc)) / (2.0 * beta * z);
}

// Companion transform for Z^T Z via the exact zero-padding trace identity
// beta * m1(z) - m2(z) = (1 - beta) / z.
inline double mp_stieltjes_col(double z, double beta) {
  return beta * mp_stieltjes_row(z, beta) - (1.0 - beta) / z;
}

inline double mp_d_transform(double z, double beta) {
  return z * mp_stieltjes_row(z, beta) * mp_stieltjes_col(z, beta);
}

// Critical spike strength alpha = 1 / sqrt(T(lambda_+)).
inline double white_noise_alpha(double beta) {
  const double edge = mp_bulk_edge(beta);
  const double t = mp_d_transform(edge, beta);
  return 1.0 / std::sqrt(t);
}

}  // namespace eosq::synth
