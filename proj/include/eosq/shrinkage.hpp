#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "eosq/common.hpp"
#include "eosq/spectral.hpp"

namespace eosq::shrinkage {

enum class Loss { kFrobenius, kOperator, kNuclear };

// Plug-in estimates for one outlier: strength, singular-vector overlaps
// (clamped to [0, 1]: they estimate squared cosines), and the shrunken value.
// A component is demoted when the D-transform is non-positive at its
// eigenvalue or the eigenvalue sits below the evaluation guard; demoted
// components are excluded from the estimate.
struct ComponentEstimate {
  int index = 0;
  double observed_eigenvalue = 0.0;
  double d_hat = 0.0;
  double a1_hat = 0.0;
  double a2_hat = 0.0;
  double phi_hat = 0.0;
  bool demoted = false;
  bool clamped = false;  // a raw overlap fell outside [0, 1]
};

inline ComponentEstimate estimate_component(
    const spectral::NoiseSpectrumEstimate& noise, double lambda_i) {
  ComponentEstimate est;
  est.observed_eigenvalue = lambda_i;
  const double top =
      noise.eigenvalues.size() > 0 ? noise.eigenvalues[0] : 0.0;
  if (!(lambda_i > 0.0) ||
      lambda_i < top * (1.0 + spectral::kEvaluationGuard)) {
    est.demoted = true;
    return est;
  }
  const spectral::DTransformPoint p = spectral::d_transform_at(noise, lambda_i);
  if (!(p.t_value > 0.0)) {
    est.demoted = true;
    return est;
  }
  est.d_hat = 1.0 / std::sqrt(p.t_value);
  // a_j = m_j / (d^2 T') = m_j T / T'.
  const double a1 = p.m1 * p.t_value / p.t_prime;
  const double a2 = p.m2 * p.t_value / p.t_prime;
  est.clamped = a1 < 0.0 || a1 > 1.0 || a2 < 0.0 || a2 > 1.0;
  est.a1_hat = std::clamp(a1, 0.0, 1.0);
  est.a2_hat = std::clamp(a2, 0.0, 1.0);
  return est;
}

inline double apply_shrinker(Loss loss, const ComponentEstimate& est) {
  if (est.demoted) return 0.0;
  const double d = est.d_hat;
  const double a1 = est.a1_hat;
  const double a2 = est.a2_hat;
  switch (loss) {
    case Loss::kFrobenius:
      return d * std::sqrt(a1 * a2);
    case Loss::kOperator: {
      const double hi = std::max(a1, a2);
      if (hi == 0.0) return 0.0;
      return d * std::sqrt(std::min(a1, a2) / hi);
    }
    case Loss::kNuclear: {
      const double v =
          d * (std::sqrt(a1 * a2) - std::sqrt((1.0 - a1) * (1.0 - a2)));
      return std::max(0.0, v);
    }
  }
  return 0.0;
}

struct ShrinkageResult {
  Matrix left_factors;     // n x rank
  Matrix right_factors;    // d x rank
  Vector shrunken_values;  // rank
  int rank = 0;            // components kept (demotions excluded)
  std::vector<ComponentEstimate> components;  // all candidates, in order
  Loss loss = Loss::kFrobenius;
  spectral::BulkEdgeEstimate edge;
  spectral::NoiseSpectrumEstimate noise;
};

struct ShrinkOutput {
  ShrinkageResult result;
  Matrix residual;  // block - estimate, exact
};

inline ShrinkOutput shrink(const Matrix& block,
                           Loss loss = Loss::kFrobenius) {
  const spectral::SpectralDecomposition sd = spectral::decompose(block);
  const spectral::BulkEdgeEstimate edge = spectral::estimate_bulk_edge(sd);
  const spectral::NoiseSpectrumEstimate noise =
      spectral::impute_noise_spectrum(sd, edge);

  ShrinkOutput out;
  out.result.loss = loss;
  out.result.edge = edge;
  out.result.noise = noise;

  std::vector<int> kept;
  for (int i = 0; i < edge.r_plus_hat; ++i) {
    const double sigma = sd.singular_values[i];
    ComponentEstimate est = estimate_component(noise, sigma * sigma);
    est.index = i;
    if (!est.demoted) {
      est.phi_hat = apply_shrinker(loss, est);
      kept.push_back(i);
    }
    out.result.components.push_back(est);
  }

  const int rank = static_cast<int>(kept.size());
  out.result.rank = rank;
  out.result.left_factors = Matrix(sd.n, rank);
  out.result.right_factors = Matrix(sd.d, rank);
  out.result.shrunken_values = Vector(rank);
  for (int j = 0; j < rank; ++j) {
    const int i = kept[j];
    out.result.left_factors.col(j) = sd.left_vectors.col(i);
    out.result.right_factors.col(j) = sd.right_vectors.col(i);
    out.result.shrunken_values[j] = out.result.components[i].phi_hat;
  }

  if (rank > 0) {
    out.residual = block - out.result.left_factors *
                               out.result.shrunken_values.asDiagonal() *
                               out.result.right_factors.transpose();
  } else {
    out.residual = block;
  }
  return out;
}

}  // namespace eosq::shrinkage
