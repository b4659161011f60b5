#include "eosq/shrinkage.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "eosq/synth.hpp"

using namespace eosq;
using shrinkage::ComponentEstimate;
using shrinkage::Loss;

namespace {

synth::SpikedModelSpec white_spec(int n, int d, std::vector<double> strengths,
                                  std::uint64_t seed) {
  synth::SpikedModelSpec spec;
  spec.n = n;
  spec.d = d;
  spec.signal_strengths = std::move(strengths);
  spec.noise_row_cov = synth::CovarianceSpec::identity(n);
  spec.noise_col_cov = synth::CovarianceSpec::identity(d);
  spec.seed = seed;
  return spec;
}

ComponentEstimate estimate(double a1, double a2, double d_hat) {
  ComponentEstimate est;
  est.d_hat = d_hat;
  est.a1_hat = a1;
  est.a2_hat = a2;
  return est;
}

}  // namespace

TEST(EstimateComponent, OnePointSpectrumHandArithmetic) {
  spectral::NoiseSpectrumEstimate noise;
  noise.n = 1;
  noise.d = 1;
  noise.eigenvalues = Vector::Constant(1, 1.0);
  const ComponentEstimate est = shrinkage::estimate_component(noise, 2.0);
  EXPECT_FALSE(est.demoted);
  // T(2) = 2 * (1/(1-2))^2 = 2, d_hat = 1/sqrt(2).
  EXPECT_NEAR(est.d_hat, 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(EstimateComponent, DemotesBelowEvaluationGuard) {
  spectral::NoiseSpectrumEstimate noise;
  noise.n = 4;
  noise.d = 4;
  Vector ev(4);
  ev << 4.0, 3.0, 2.0, 1.0;
  noise.eigenvalues = ev;
  EXPECT_TRUE(shrinkage::estimate_component(noise, 3.9).demoted);
  EXPECT_TRUE(shrinkage::estimate_component(noise, 4.0).demoted);
  EXPECT_FALSE(shrinkage::estimate_component(noise, 6.0).demoted);
}

TEST(EstimateComponent, RecoversPlantedStrength) {
  // White square case, planted strength 3 at 256x256: d_hat within 10%.
  double d_sum = 0.0, gap_sum = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const auto sampled =
        synth::sample_block(white_spec(256, 256, {3.0}, 600 + s));
    const auto sd = spectral::decompose(sampled.data);
    const auto edge = spectral::estimate_bulk_edge(sd);
    const auto noise = spectral::impute_noise_spectrum(sd, edge);
    const double lambda1 = sd.singular_values[0] * sd.singular_values[0];
    const ComponentEstimate est = shrinkage::estimate_component(noise, lambda1);
    ASSERT_FALSE(est.demoted);
    d_sum += est.d_hat;
    gap_sum += std::abs(est.a1_hat - est.a2_hat);
  }
  EXPECT_NEAR(d_sum / seeds, 3.0, 0.3);
  // square white case is symmetric: overlaps agree
  EXPECT_LT(gap_sum / seeds, 0.05);
}

TEST(ApplyShrinker, PerfectOverlapKeepsStrength) {
  const ComponentEstimate est = estimate(1.0, 1.0, 5.0);
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kFrobenius, est), 5.0);
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kOperator, est), 5.0);
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kNuclear, est), 5.0);
}

TEST(ApplyShrinker, HalfOverlapArithmetic) {
  const ComponentEstimate est = estimate(0.5, 0.5, 4.0);
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kFrobenius, est), 2.0);
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kOperator, est), 4.0);
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kNuclear, est), 0.0);
}

TEST(ApplyShrinker, AsymmetricOverlaps) {
  const ComponentEstimate est = estimate(0.9, 0.4, 2.0);
  EXPECT_NEAR(shrinkage::apply_shrinker(Loss::kFrobenius, est), 1.2, 1e-12);
  EXPECT_NEAR(shrinkage::apply_shrinker(Loss::kOperator, est),
              2.0 * std::sqrt(0.4 / 0.9), 1e-12);
  EXPECT_NEAR(shrinkage::apply_shrinker(Loss::kNuclear, est),
              2.0 * (std::sqrt(0.36) - std::sqrt(0.06)), 1e-12);
}

TEST(ApplyShrinker, NuclearFloorsAtZero) {
  EXPECT_DOUBLE_EQ(
      shrinkage::apply_shrinker(Loss::kNuclear, estimate(0.1, 0.1, 1.0)), 0.0);
}

TEST(ApplyShrinker, DemotedComponentGivesZero) {
  ComponentEstimate est = estimate(0.9, 0.9, 3.0);
  est.demoted = true;
  EXPECT_DOUBLE_EQ(shrinkage::apply_shrinker(Loss::kFrobenius, est), 0.0);
}

TEST(Shrink, ZeroMatrix) {
  const auto out = shrinkage::shrink(Matrix::Zero(32, 32));
  EXPECT_EQ(out.result.rank, 0);
  EXPECT_EQ(out.residual, Matrix::Zero(32, 32));
}

TEST(Shrink, PureNoiseUsuallyRankZero) {
  int rank_zero = 0;
  const int seeds = 60;
  for (int s = 0; s < seeds; ++s) {
    const auto sampled = synth::sample_block(white_spec(128, 128, {}, 20 + s));
    const auto out = shrinkage::shrink(sampled.data);
    if (out.result.rank == 0) {
      ++rank_zero;
      EXPECT_EQ(out.residual, sampled.data);
    }
  }
  EXPECT_GE(rank_zero, static_cast<int>(0.9 * seeds));
}

TEST(Shrink, ResidualIsExactComplement) {
  const auto sampled = synth::sample_block(white_spec(128, 128, {3.0}, 5));
  const auto out = shrinkage::shrink(sampled.data);
  ASSERT_GE(out.result.rank, 1);
  const Matrix estimate = out.result.left_factors *
                          out.result.shrunken_values.asDiagonal() *
                          out.result.right_factors.transpose();
  EXPECT_LT((sampled.data - estimate - out.residual).norm(),
            1e-12 * sampled.data.norm());
}

TEST(Shrink, BeatsRankOneTruncationOnSpikedBlocks) {
  // Frobenius distance to the true signal: the shrunken estimate should beat
  // hard rank-1 truncation on most seeds.
  int wins = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto sampled =
        synth::sample_block(white_spec(128, 128, {3.0}, 83000 + s));
    const auto out = shrinkage::shrink(sampled.data);
    const auto sd = spectral::decompose(sampled.data);
    const Matrix truncated = sd.singular_values[0] *
                             sd.left_vectors.col(0) *
                             sd.right_vectors.col(0).transpose();
    const Matrix estimate = out.result.left_factors *
                            out.result.shrunken_values.asDiagonal() *
                            out.result.right_factors.transpose();
    const double shrunk_err = (estimate - sampled.truth.signal).squaredNorm();
    const double trunc_err = (truncated - sampled.truth.signal).squaredNorm();
    if (shrunk_err < trunc_err) ++wins;
  }
  EXPECT_GE(wins, 90);
}

TEST(Shrink, NeverInflatesSingularValues) {
  for (int s = 0; s < 20; ++s) {
    const auto sampled = synth::sample_block(
        white_spec(128, 128, {4.0, 3.0, 2.0}, 91000 + s));
    const auto sd = spectral::decompose(sampled.data);
    const auto out = shrinkage::shrink(sampled.data);
    for (const ComponentEstimate& est : out.result.components) {
      if (est.demoted) continue;
      EXPECT_LE(est.phi_hat, sd.singular_values[est.index] + 1e-12);
      EXPECT_GE(est.phi_hat, 0.0);
      EXPECT_GE(est.a1_hat, 0.0);
      EXPECT_LE(est.a1_hat, 1.0);
      EXPECT_GE(est.a2_hat, 0.0);
      EXPECT_LE(est.a2_hat, 1.0);
    }
  }
}

TEST(Shrink, OperatorAndNuclearLossesSelectable) {
  const auto sampled = synth::sample_block(white_spec(128, 128, {3.0}, 17));
  const auto fro = shrinkage::shrink(sampled.data, Loss::kFrobenius);
  const auto op = shrinkage::shrink(sampled.data, Loss::kOperator);
  const auto nuc = shrinkage::shrink(sampled.data, Loss::kNuclear);
  ASSERT_GE(fro.result.rank, 1);
  ASSERT_GE(op.result.rank, 1);
  ASSERT_GE(nuc.result.rank, 1);
  // nuclear <= frobenius <= operator for equal overlaps in [0, 1]
  EXPECT_LE(nuc.result.shrunken_values[0], fro.result.shrunken_values[0]);
  EXPECT_LE(fro.result.shrunken_values[0],
            op.result.shrunken_values[0] + 1e-12);
}
