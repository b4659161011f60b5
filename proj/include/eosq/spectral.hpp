#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "eosq/common.hpp"

namespace eosq::spectral {

struct SpectralDecomposition {
  Vector singular_values;  // descending, length min(n, d)
  Matrix left_vectors;     // n x min(n, d)
  Matrix right_vectors;    // d x min(n, d)
  Index n = 0;
  Index d = 0;
};

inline SpectralDecomposition decompose(const Matrix& block) {
  if (!block.allFinite())
    throw numeric_error("decompose: block contains non-finite entries");
  Eigen::BDCSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.singularValues(), svd.matrixU(), svd.matrixV(), block.rows(),
          block.cols()};
}

struct BulkEdgeEstimate {
  double lambda_plus_hat = 0.0;
  int k = 0;            // pilot parameter actually used
  int r_plus_hat = 0;   // eigenvalues strictly above lambda_+ * (1 + d^{-1/3})
  bool k_shrunk = false;
};

// Pilot window size k = floor(d^c), c = min(1/2.01, 1/log log d), shrunk to
// keep both windows inside the spectrum. Hard floor at k = 3.
inline int pilot_k(Index d, Index min_nd, bool* shrunk = nullptr) {
  const double ld = std::log(static_cast<double>(d));
  double c = 1.0 / 2.01;
  if (ld > 1.0) c = std::min(c, 1.0 / std::log(ld));
  int k = static_cast<int>(std::floor(std::pow(static_cast<double>(d), c)));
  if (shrunk) *shrunk = false;
  const int k_max = static_cast<int>((min_nd - 1) / 2);
  if (k > k_max) {
    k = k_max;
    if (shrunk) *shrunk = true;
  }
  if (k < 3) {
    std::ostringstream msg;
    msg << "pilot windows need at least 7 singular values, got " << min_nd;
    throw numeric_error(msg.str());
  }
  return k;
}

inline constexpr double kTwoThirdsStep = 0.5874010519681994;  // 2^{2/3} - 1

inline BulkEdgeEstimate estimate_bulk_edge(const SpectralDecomposition& sd) {
  const Index min_nd = sd.singular_values.size();
  BulkEdgeEstimate est;
  est.k = pilot_k(sd.d, min_nd, &est.k_shrunk);

  // Eigenvalue scale throughout: lambda_i = sigma_i^2.
  const auto lambda = [&](Index i) {
    const double s = sd.singular_values[i];
    return s * s;
  };
  const double anchor = lambda(est.k);       // 1-based index k+1
  const double far = lambda(2 * est.k);      // 1-based index 2k+1
  est.lambda_plus_hat = anchor + (anchor - far) / kTwoThirdsStep;

  const double margin = std::pow(static_cast<double>(sd.d), -1.0 / 3.0);
  const double threshold = est.lambda_plus_hat * (1.0 + margin);
  int r = 0;
  for (Index i = 0; i < min_nd; ++i) {
    if (lambda(i) > threshold)
      ++r;
    else
      break;  // descending order
  }
  est.r_plus_hat = r;
  return est;
}

// Estimated noise eigenvalues: length min(n, d), descending. Indices above
// r_plus + k reuse the observed eigenvalues; the k entries after the outliers
// are imputed from the square-root edge profile; the outlier slots are filled
// with the top imputed value (the discarded directions sat at the edge).
struct NoiseSpectrumEstimate {
  Vector eigenvalues;
  Index n = 0;
  Index d = 0;
  int k_used = 0;
  int r_plus = 0;
};

inline NoiseSpectrumEstimate impute_noise_spectrum(
    const SpectralDecomposition& sd, const BulkEdgeEstimate& edge) {
  const Index min_nd = sd.singular_values.size();
  const int r = edge.r_plus_hat;
  int k = edge.k;
  if (2 * k + r + 1 > min_nd) {
    k = static_cast<int>((min_nd - r - 1) / 2);
    if (k < 3) {
      std::ostringstream msg;
      msg << "impute_noise_spectrum: need 2k + r + 1 <= " << min_nd
          << "; shrink k below " << edge.k << " is infeasible (r = " << r << ")";
      throw numeric_error(msg.str());
    }
  }

  const auto lambda = [&](Index i) {
    const double s = sd.singular_values[i];
    return s * s;
  };
  const double anchor = lambda(k + r);        // 1-based k + r + 1
  const double far = lambda(2 * k + r);       // 1-based 2k + r + 1
  const double spread = anchor - far;

  NoiseSpectrumEstimate out;
  out.n = sd.n;
  out.d = sd.d;
  out.k_used = k;
  out.r_plus = r;
  out.eigenvalues = Vector(min_nd);
  for (int j = 1; j <= k; ++j) {
    const double frac =
        (1.0 - std::pow(static_cast<double>(j) / k, 2.0 / 3.0)) / kTwoThirdsStep;
    out.eigenvalues[r + j - 1] = anchor + frac * spread;
  }
  for (Index i = r + k; i < min_nd; ++i) out.eigenvalues[i] = lambda(i);
  for (int i = 0; i < r; ++i) out.eigenvalues[i] = out.eigenvalues[r];
  std::sort(out.eigenvalues.data(), out.eigenvalues.data() + min_nd,
            std::greater<double>());
  return out;
}

// Empirical Stieltjes transforms of the estimated noise spectrum and the
// D-transform T(z) = z m1(z) m2(z) with exact analytic derivatives. m1
// averages over the n-point spectrum of ZZ^T (zero-padded when n > min),
// m2 symmetrically over d points.
struct DTransformPoint {
  double z = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double m1_prime = 0.0;
  double m2_prime = 0.0;
  double t_value = 0.0;
  double t_prime = 0.0;
};

inline constexpr double kEvaluationGuard = 1e-6;

inline DTransformPoint d_transform_at(const NoiseSpectrumEstimate& noise,
                                      double z) {
  const Index min_nd = noise.eigenvalues.size();
  const double top = min_nd > 0 ? noise.eigenvalues[0] : 0.0;
  if (!(z > 0.0) || z < top * (1.0 + kEvaluationGuard)) {
    std::ostringstream msg;
    msg << "d_transform_at: z = " << z
        << " is inside or below the bulk (guard = "
        << top * (1.0 + kEvaluationGuard) << ")";
    throw numeric_error(msg.str());
  }

  double sum_inv = 0.0;
  double sum_inv_sq = 0.0;
  for (Index i = 0; i < min_nd; ++i) {
    const double inv = 1.0 / (noise.eigenvalues[i] - z);
    sum_inv += inv;
    sum_inv_sq += inv * inv;
  }
  const double n = static_cast<double>(noise.n);
  const double d = static_cast<double>(noise.d);
  const double pad_n = n - static_cast<double>(min_nd);
  const double pad_d = d - static_cast<double>(min_nd);

  DTransformPoint p;
  p.z = z;
  p.m1 = (sum_inv + pad_n * (-1.0 / z)) / n;
  p.m2 = (sum_inv + pad_d * (-1.0 / z)) / d;
  p.m1_prime = (sum_inv_sq + pad_n / (z * z)) / n;
  p.m2_prime = (sum_inv_sq + pad_d / (z * z)) / d;
  p.t_value = z * p.m1 * p.m2;
  p.t_prime = p.m1 * p.m2 + z * (p.m1_prime * p.m2 + p.m1 * p.m2_prime);
  return p;
}

// Diagnostic inverse theta(d) = T^{-1}(1/d^2): the eigenvalue location an
// outlier of strength d would occupy. Reporting only; never enters the
// pipeline. Returns NaN when 1/d^2 is not attained above the bulk.
inline double theta_from_strength(const NoiseSpectrumEstimate& noise,
                                  double strength) {
  if (!(strength > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double target = 1.0 / (strength * strength);
  const double top = noise.eigenvalues.size() > 0 ? noise.eigenvalues[0] : 0.0;
  double lo = std::max(top * (1.0 + 2e-6), 1e-12);
  if (d_transform_at(noise, lo).t_value <= target)
    return std::numeric_limits<double>::quiet_NaN();
  double hi = std::max(2.0 * lo, 1.0);
  int expand = 0;
  while (d_transform_at(noise, hi).t_value > target) {
    hi *= 2.0;
    if (++expand > 200) return std::numeric_limits<double>::quiet_NaN();
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (d_transform_at(noise, mid).t_value > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace eosq::spectral
