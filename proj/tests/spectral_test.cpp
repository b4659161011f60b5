#include "eosq/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "eosq/metrics.hpp"
#include "eosq/synth.hpp"

using namespace eosq;
using spectral::BulkEdgeEstimate;
using spectral::NoiseSpectrumEstimate;
using spectral::SpectralDecomposition;

namespace {

Matrix pure_noise(int n, int d, std::uint64_t seed) {
  synth::SpikedModelSpec spec;
  spec.n = n;
  spec.d = d;
  spec.noise_row_cov = synth::CovarianceSpec::identity(n);
  spec.noise_col_cov = synth::CovarianceSpec::identity(d);
  spec.seed = seed;
  return synth::sample_block(spec).data;
}

Matrix spiked_noise(int n, int d, std::vector<double> strengths,
                    std::uint64_t seed) {
  synth::SpikedModelSpec spec;
  spec.n = n;
  spec.d = d;
  spec.signal_strengths = std::move(strengths);
  spec.noise_row_cov = synth::CovarianceSpec::identity(n);
  spec.noise_col_cov = synth::CovarianceSpec::identity(d);
  spec.seed = seed;
  return synth::sample_block(spec).data;
}

// Synthetic decomposition with prescribed eigenvalues (vectors unused by the
// edge estimator).
SpectralDecomposition with_eigenvalues(const std::vector<double>& lambda,
                                       int n, int d) {
  SpectralDecomposition sd;
  sd.n = n;
  sd.d = d;
  sd.singular_values = Vector(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i)
    sd.singular_values[i] = std::sqrt(lambda[i]);
  return sd;
}

std::vector<double> eigenvalues_of(const Matrix& m) {
  const Vector sv = spectral::decompose(m).singular_values;
  std::vector<double> out(sv.size());
  for (Index i = 0; i < sv.size(); ++i) out[i] = sv[i] * sv[i];
  return out;
}

}  // namespace

TEST(Decompose, IdentityHasUnitSingularValues) {
  const auto sd = spectral::decompose(Matrix::Identity(4, 4));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(sd.singular_values[i], 1.0, 1e-12);
}

TEST(Decompose, PaddedDiagonal) {
  Matrix m = Matrix::Zero(4, 3);
  m(0, 0) = 3.0;
  m(1, 1) = 2.0;
  m(2, 2) = 1.0;
  const auto sd = spectral::decompose(m);
  ASSERT_EQ(sd.singular_values.size(), 3);
  EXPECT_NEAR(sd.singular_values[0], 3.0, 1e-12);
  EXPECT_NEAR(sd.singular_values[1], 2.0, 1e-12);
  EXPECT_NEAR(sd.singular_values[2], 1.0, 1e-12);
}

TEST(Decompose, ReconstructionInvariant) {
  const Matrix block = pure_noise(96, 128, 5);
  const auto sd = spectral::decompose(block);
  const Matrix recon = sd.left_vectors * sd.singular_values.asDiagonal() *
                       sd.right_vectors.transpose();
  EXPECT_LT((recon - block).norm() / block.norm(), 1e-6);
  // descending order
  for (Index i = 1; i < sd.singular_values.size(); ++i)
    EXPECT_LE(sd.singular_values[i], sd.singular_values[i - 1]);
}

TEST(Decompose, GaussianTopSingularValueNearTwo) {
  double sum = 0.0;
  const int seeds = 30;
  for (int s = 0; s < seeds; ++s)
    sum += spectral::decompose(pure_noise(128, 128, 100 + s))
               .singular_values[0];
  EXPECT_NEAR(sum / seeds, 2.0, 0.1);
}

TEST(Decompose, RejectsNonFinite) {
  Matrix m = Matrix::Zero(4, 4);
  m(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(spectral::decompose(m), numeric_error);
}

TEST(BulkEdge, PilotParameterAt128) {
  EXPECT_EQ(spectral::pilot_k(128, 128), 11);
}

TEST(BulkEdge, ConstantSpectrumGivesConstantEdge) {
  const auto sd = with_eigenvalues(std::vector<double>(64, 2.5), 64, 64);
  const auto edge = spectral::estimate_bulk_edge(sd);
  EXPECT_NEAR(edge.lambda_plus_hat, 2.5, 1e-12);
  EXPECT_EQ(edge.r_plus_hat, 0);
}

TEST(BulkEdge, WhiteNoiseEdgeNearFour) {
  double sum = 0.0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    const auto sd = spectral::decompose(pure_noise(128, 128, 900 + s));
    sum += spectral::estimate_bulk_edge(sd).lambda_plus_hat;
  }
  EXPECT_NEAR(sum / seeds, 4.0, 0.25);
}

TEST(BulkEdge, StrictInequalityRankRule) {
  // Flat spectrum at v with one eigenvalue placed exactly on the detection
  // threshold v * (1 + d^{-1/3}): equality must NOT count.
  const int d = 128;
  const double v = 1.0;
  const double margin = std::pow(static_cast<double>(d), -1.0 / 3.0);
  const double threshold = v * (1.0 + margin);
  // Find a singular value whose square reproduces the threshold bit-exactly.
  double sigma = std::sqrt(threshold);
  while (sigma * sigma > threshold) sigma = std::nextafter(sigma, 0.0);
  std::vector<double> lambda(d, v);
  lambda[0] = sigma * sigma;
  const auto sd = with_eigenvalues(lambda, d, d);
  const auto edge = spectral::estimate_bulk_edge(sd);
  ASSERT_NEAR(edge.lambda_plus_hat, v, 1e-12);
  EXPECT_EQ(edge.r_plus_hat, 0);  // at-or-below threshold: not an outlier

  // One ulp above the threshold must count.
  double above = std::nextafter(sigma, 10.0);
  while (above * above <= threshold) above = std::nextafter(above, 10.0);
  lambda[0] = above * above;
  const auto edge2 = spectral::estimate_bulk_edge(with_eigenvalues(lambda, d, d));
  EXPECT_EQ(edge2.r_plus_hat, 1);
}

TEST(BulkEdge, RejectsShortSpectrum) {
  const auto sd = with_eigenvalues({5.0, 4.0, 3.0, 2.0, 1.0}, 5, 5);
  EXPECT_THROW(spectral::estimate_bulk_edge(sd), numeric_error);
}

TEST(BulkEdge, RankRecoveryAtRankFive) {
  // All strengths at or above twice the critical threshold: the rank rule
  // recovers r = 5 on nearly every draw; pure noise yields r = 0.
  const std::vector<double> strengths = {4.0, 3.5, 3.0, 2.5, 2.0};
  const int seeds = 200;
  int exact = 0, silent = 0;
  for (int s = 0; s < seeds; ++s) {
    const auto sd =
        spectral::decompose(spiked_noise(128, 128, strengths, 230000 + s));
    if (spectral::estimate_bulk_edge(sd).r_plus_hat == 5) ++exact;
    const auto sd0 = spectral::decompose(pure_noise(128, 128, 240000 + s));
    if (spectral::estimate_bulk_edge(sd0).r_plus_hat == 0) ++silent;
  }
  EXPECT_GE(exact, static_cast<int>(0.95 * seeds));
  EXPECT_GE(silent, static_cast<int>(0.95 * seeds));
}

TEST(Impute, BoundaryValueEqualsAnchor) {
  const Matrix block = spiked_noise(128, 128, {3.0}, 42);
  const auto sd = spectral::decompose(block);
  const auto edge = spectral::estimate_bulk_edge(sd);
  const auto noise = spectral::impute_noise_spectrum(sd, edge);
  const int k = noise.k_used;
  const int r = noise.r_plus;
  // j = k imputed entry equals the observed anchor lambda_{k + r + 1}.
  const double anchor = sd.singular_values[k + r] * sd.singular_values[k + r];
  double min_gap = 1e300;
  for (Index i = 0; i < noise.eigenvalues.size(); ++i)
    min_gap = std::min(min_gap, std::abs(noise.eigenvalues[i] - anchor));
  EXPECT_EQ(min_gap, 0.0);
  EXPECT_EQ(noise.eigenvalues.size(), 128);
  for (Index i = 1; i < noise.eigenvalues.size(); ++i)
    EXPECT_LE(noise.eigenvalues[i], noise.eigenvalues[i - 1]);
}

TEST(Impute, ConstantSpectrumImputesConstant) {
  const auto sd = with_eigenvalues(std::vector<double>(64, 1.75), 64, 64);
  const auto edge = spectral::estimate_bulk_edge(sd);
  const auto noise = spectral::impute_noise_spectrum(sd, edge);
  for (Index i = 0; i < noise.eigenvalues.size(); ++i)
    EXPECT_NEAR(noise.eigenvalues[i], 1.75, 1e-12);
}

TEST(Impute, MatchesIndependentNoiseDraw) {
  // Spiked 128x128 block: the imputed noise spectrum should be close in KS
  // distance to the spectrum of an independent pure-noise draw.
  double total = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const Matrix block = spiked_noise(128, 128, {3.0}, 3000 + s);
    const auto sd = spectral::decompose(block);
    const auto edge = spectral::estimate_bulk_edge(sd);
    const auto noise = spectral::impute_noise_spectrum(sd, edge);
    std::vector<double> imputed(noise.eigenvalues.data(),
                                noise.eigenvalues.data() + 128);
    total += metrics::ks_distance(
        imputed, eigenvalues_of(pure_noise(128, 128, 700000 + s)));
  }
  EXPECT_LT(total / seeds, 0.08);
}

TEST(DTransform, OnePointSpectrum) {
  NoiseSpectrumEstimate noise;
  noise.n = 1;
  noise.d = 1;
  noise.eigenvalues = Vector::Constant(1, 1.0);
  const auto p = spectral::d_transform_at(noise, 2.0);
  EXPECT_DOUBLE_EQ(p.m1, -1.0);
  EXPECT_DOUBLE_EQ(p.m2, -1.0);
  EXPECT_DOUBLE_EQ(p.t_value, 2.0);
}

TEST(DTransform, PaddingIdentityExact) {
  // n = 2d: n*m1(z) - d*m2(z) == (n - d) * (-1/z).
  const int d = 32, n = 64;
  NoiseSpectrumEstimate noise;
  noise.n = n;
  noise.d = d;
  Vector ev(d);
  for (int i = 0; i < d; ++i) ev[i] = 2.0 - i * 0.05;
  noise.eigenvalues = ev;
  for (double z : {3.0, 4.0, 10.0}) {
    const auto p = spectral::d_transform_at(noise, z);
    EXPECT_NEAR(n * p.m1 - d * p.m2, (n - d) * (-1.0 / z), 1e-12);
  }
}

TEST(DTransform, EmpiricalMatchesClosedFormAboveEdge) {
  const Matrix block = pure_noise(512, 512, 77);
  const auto sd = spectral::decompose(block);
  NoiseSpectrumEstimate noise;
  noise.n = 512;
  noise.d = 512;
  noise.eigenvalues = sd.singular_values.array().square();
  for (double z : {4.2, 4.5, 6.0}) {
    const auto p = spectral::d_transform_at(noise, z);
    EXPECT_NEAR(p.m1 / synth::mp_stieltjes_row(z, 1.0), 1.0, 0.03);
    EXPECT_NEAR(p.t_value / synth::mp_d_transform(z, 1.0), 1.0, 0.03);
  }
  // Closed form exactly at the edge: m(4) = -1/2, T(4) = 1.
  EXPECT_NEAR(synth::mp_stieltjes_row(4.0, 1.0), -0.5, 1e-12);
  EXPECT_NEAR(synth::mp_d_transform(4.0, 1.0), 1.0, 1e-12);
}

TEST(DTransform, PositiveAndDecreasingAboveBulk) {
  const Matrix block = pure_noise(128, 128, 55);
  const auto sd = spectral::decompose(block);
  const auto edge = spectral::estimate_bulk_edge(sd);
  const auto noise = spectral::impute_noise_spectrum(sd, edge);
  double previous = std::numeric_limits<double>::infinity();
  for (double factor = 1.05; factor < 3.0; factor += 0.05) {
    const double z = noise.eigenvalues[0] * factor;
    const auto p = spectral::d_transform_at(noise, z);
    EXPECT_GT(p.t_value, 0.0);
    EXPECT_LT(p.t_value, previous);
    EXPECT_LT(p.t_prime, 0.0);
    previous = p.t_value;
  }
}

TEST(DTransform, RejectsEvaluationInsideBulk) {
  NoiseSpectrumEstimate noise;
  noise.n = 4;
  noise.d = 4;
  Vector ev(4);
  ev << 4.0, 3.0, 2.0, 1.0;
  noise.eigenvalues = ev;
  EXPECT_THROW(spectral::d_transform_at(noise, 3.5), numeric_error);
  EXPECT_THROW(spectral::d_transform_at(noise, 4.0), numeric_error);
  EXPECT_NO_THROW(spectral::d_transform_at(noise, 4.1));
}

TEST(DTransform, ThetaInversionRecoversOutlierLocation) {
  // For square white noise, theta(3) = (1 + 9)(1 + 1/9) = 100/9.
  const Matrix block = pure_noise(512, 512, 99);
  const auto sd = spectral::decompose(block);
  NoiseSpectrumEstimate noise;
  noise.n = 512;
  noise.d = 512;
  noise.eigenvalues = sd.singular_values.array().square();
  const double theta = spectral::theta_from_strength(noise, 3.0);
  EXPECT_NEAR(theta, 100.0 / 9.0, 0.5);
}
