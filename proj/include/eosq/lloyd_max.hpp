#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "eosq/common.hpp"

namespace eosq::quant {

// Scalar quantizer with centroid levels and midpoint thresholds, MSE-optimal
// for the target marginal.
struct LloydMaxCodebook {
  int bits = 0;
  Vector levels;      // ascending, 2^bits entries
  Vector thresholds;  // ascending midpoints, 2^bits - 1 entries
  double target_variance = 1.0;
  double distortion = 0.0;  // MSE against the target distribution

  int quantize(double x) const {
    const double* begin = thresholds.data();
    const double* end = begin + thresholds.size();
    return static_cast<int>(std::upper_bound(begin, end, x) - begin);
  }
  double level(int code) const { return levels[code]; }
};

namespace detail {

inline double normal_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865476);
}

// Quantile by bisection; init-quality only.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Closed-form cell moments of the standard normal over (a, b].
inline double cell_mass(double a, double b) {
  return normal_cdf(b) - normal_cdf(a);
}

inline double cell_mean_integral(double a, double b) {
  const double pa = std::isfinite(a) ? normal_pdf(a) : 0.0;
  const double pb = std::isfinite(b) ? normal_pdf(b) : 0.0;
  return pa - pb;
}

inline double cell_second_moment(double a, double b) {
  const double pa = std::isfinite(a) ? a * normal_pdf(a) : 0.0;
  const double pb = std::isfinite(b) ? b * normal_pdf(b) : 0.0;
  return cell_mass(a, b) + pa - pb;
}

}  // namespace detail

// Fixed point of the Lloyd iteration on the zero-mean Gaussian with the given
// variance. Converged when the largest level movement drops below 1e-9 on the
// standard-normal scale.
inline LloydMaxCodebook build_codebook(int bits, double variance) {
  if (bits < 1 || bits > 8)
    throw validation_error("codebook bits must be in [1, 8]");
  if (!(variance > 0.0))
    throw validation_error("codebook variance must be positive");
  const int count = 1 << bits;

  // High-rate companding init: the optimal point density is proportional to
  // pdf^{1/3}, which for a Gaussian is again Gaussian with variance 3.
  std::vector<double> levels(count);
  const double companding = std::sqrt(3.0);
  for (int i = 0; i < count; ++i)
    levels[i] = companding * detail::normal_quantile((i + 0.5) / count);

  // Newton iteration on the centroid/midpoint optimality system
  // F_i = l_i - centroid_i(l). The Jacobian is tridiagonal (each centroid
  // sees only the two adjacent midpoints), so one step is O(count). Plain
  // Lloyd sweeps at 256 levels contract too slowly for the 1e-9 tolerance
  // within the iteration cap; Newton reaches it in a handful of steps from
  // the companding init. A step that would disorder the levels falls back to
  // one plain Lloyd sweep.
  std::vector<double> bounds(count + 1);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> residual(count), diag(count), lower(count), upper(count);
  bool converged = false;
  for (int iter = 0; iter < 10000 && !converged; ++iter) {
    bounds[0] = -inf;
    bounds[count] = inf;
    for (int i = 1; i < count; ++i)
      bounds[i] = 0.5 * (levels[i - 1] + levels[i]);
    for (int i = 0; i < count; ++i) {
      const double a = bounds[i];
      const double b = bounds[i + 1];
      const double mass = detail::cell_mass(a, b);
      const double centroid =
          mass > 0.0 ? detail::cell_mean_integral(a, b) / mass : levels[i];
      residual[i] = levels[i] - centroid;
      const double da =
          std::isfinite(a) && mass > 0.0
              ? detail::normal_pdf(a) * (centroid - a) / mass
              : 0.0;
      const double db =
          std::isfinite(b) && mass > 0.0
              ? detail::normal_pdf(b) * (b - centroid) / mass
              : 0.0;
      lower[i] = -0.5 * da;
      diag[i] = 1.0 - 0.5 * (da + db);
      upper[i] = -0.5 * db;
    }
    // Thomas solve of J * delta = -F.
    std::vector<double> c_prime(count), d_prime(count);
    c_prime[0] = upper[0] / diag[0];
    d_prime[0] = -residual[0] / diag[0];
    for (int i = 1; i < count; ++i) {
      const double denom = diag[i] - lower[i] * c_prime[i - 1];
      c_prime[i] = upper[i] / denom;
      d_prime[i] = (-residual[i] - lower[i] * d_prime[i - 1]) / denom;
    }
    std::vector<double> delta(count);
    delta[count - 1] = d_prime[count - 1];
    for (int i = count - 2; i >= 0; --i)
      delta[i] = d_prime[i] - c_prime[i] * delta[i + 1];

    std::vector<double> proposed(count);
    double move = 0.0;
    bool ordered = true;
    for (int i = 0; i < count; ++i) {
      proposed[i] = levels[i] + delta[i];
      move = std::max(move, std::abs(delta[i]));
      if (i > 0 && proposed[i] <= proposed[i - 1]) ordered = false;
    }
    if (ordered && std::isfinite(move)) {
      levels = std::move(proposed);
    } else {
      move = 0.0;  // safeguard: one plain Lloyd sweep
      for (int i = 0; i < count; ++i) {
        const double mass = detail::cell_mass(bounds[i], bounds[i + 1]);
        if (mass > 0.0) {
          const double centroid =
              detail::cell_mean_integral(bounds[i], bounds[i + 1]) / mass;
          move = std::max(move, std::abs(centroid - levels[i]));
          levels[i] = centroid;
        }
      }
      move = std::max(move, 1e-6);  // never report convergence off a fallback
    }
    converged = move < 1e-9;
  }
  if (!converged)
    throw numeric_error("Lloyd iteration failed to converge in 10000 steps");

  // Kill the residual asymmetry of the fixed point.
  for (int i = 0; i < count / 2; ++i) {
    const double v = 0.5 * (levels[count - 1 - i] - levels[i]);
    levels[count - 1 - i] = v;
    levels[i] = -v;
  }

  LloydMaxCodebook cb;
  cb.bits = bits;
  cb.levels = Eigen::Map<const Vector>(levels.data(), count);
  cb.thresholds = Vector(count - 1);
  for (int i = 1; i < count; ++i)
    cb.thresholds[i - 1] = 0.5 * (levels[i - 1] + levels[i]);

  bounds[0] = -inf;
  bounds[count] = inf;
  for (int i = 1; i < count; ++i) bounds[i] = cb.thresholds[i - 1];
  double distortion = 0.0;
  for (int i = 0; i < count; ++i) {
    const double mass = detail::cell_mass(bounds[i], bounds[i + 1]);
    const double first = detail::cell_mean_integral(bounds[i], bounds[i + 1]);
    const double second = detail::cell_second_moment(bounds[i], bounds[i + 1]);
    distortion += second - 2.0 * levels[i] * first + levels[i] * levels[i] * mass;
  }

  const double sigma = std::sqrt(variance);
  cb.levels *= sigma;
  cb.thresholds *= sigma;
  cb.distortion = distortion * variance;
  cb.target_variance = variance;
  return cb;
}

// Immutable process-wide cache keyed on (bits, exact variance).
inline const LloydMaxCodebook& shared_codebook(int bits, double variance) {
  using Key = std::pair<int, std::uint64_t>;
  static std::mutex mu;
  static std::map<Key, std::unique_ptr<LloydMaxCodebook>> cache;
  const Key key{bits, std::bit_cast<std::uint64_t>(variance)};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::make_unique<LloydMaxCodebook>(
                                build_codebook(bits, variance)))
             .first;
  }
  return *it->second;
}

// Lloyd iteration on an empirical sample (data-adaptive codebooks for SVD
// factors). Constant input degenerates to a single repeated level.
inline LloydMaxCodebook train_codebook(std::vector<double> samples, int bits) {
  if (bits < 1 || bits > 8)
    throw validation_error("codebook bits must be in [1, 8]");
  if (samples.empty()) throw validation_error("train_codebook: empty sample");
  const int count = 1 << bits;
  std::sort(samples.begin(), samples.end());
  const std::size_t m = samples.size();

  std::vector<double> prefix(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + samples[i];

  std::vector<double> levels(count);
  for (int i = 0; i < count; ++i) {
    const std::size_t idx = std::min<std::size_t>(
        m - 1, static_cast<std::size_t>((i + 0.5) / count * m));
    levels[i] = samples[idx];
  }

  const double scale =
      std::max(std::abs(samples.front()), std::abs(samples.back()));
  const double tol = scale > 0.0 ? 1e-12 * scale : 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    double move = 0.0;
    std::size_t cell_begin = 0;
    for (int i = 0; i < count; ++i) {
      std::size_t cell_end = m;
      if (i + 1 < count) {
        const double threshold = 0.5 * (levels[i] + levels[i + 1]);
        cell_end = static_cast<std::size_t>(
            std::upper_bound(samples.begin(), samples.end(), threshold) -
            samples.begin());
      }
      if (cell_end > cell_begin) {
        const double mean =
            (prefix[cell_end] - prefix[cell_begin]) / (cell_end - cell_begin);
        move = std::max(move, std::abs(mean - levels[i]));
        levels[i] = mean;
      }
      cell_begin = cell_end;
    }
    if (move <= tol) break;
  }
  std::sort(levels.begin(), levels.end());

  LloydMaxCodebook cb;
  cb.bits = bits;
  cb.levels = Eigen::Map<const Vector>(levels.data(), count);
  cb.thresholds = Vector(count - 1);
  for (int i = 1; i < count; ++i)
    cb.thresholds[i - 1] = 0.5 * (levels[i - 1] + levels[i]);

  double mse = 0.0;
  double mean = prefix[m] / m;
  double var = 0.0;
  for (double s : samples) {
    const double q = cb.level(cb.quantize(s));
    mse += (s - q) * (s - q);
    var += (s - mean) * (s - mean);
  }
  cb.distortion = mse / m;
  cb.target_variance = var / m;
  return cb;
}

}  // namespace eosq::quant
