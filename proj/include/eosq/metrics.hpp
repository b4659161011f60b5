#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "eosq/common.hpp"
#include "eosq/pipeline.hpp"
#include "eosq/rng.hpp"
#include "eosq/synth.hpp"

namespace eosq::metrics {

inline double relative_l2(const Matrix& original, const Matrix& reconstructed) {
  if (original.rows() != reconstructed.rows() ||
      original.cols() != reconstructed.cols())
    throw validation_error("relative_l2: shape mismatch");
  const double denom = original.norm();
  if (denom == 0.0) throw validation_error("relative_l2: zero original");
  return 100.0 * (reconstructed - original).norm() / denom;
}

// --------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov machinery used by the spectrum property
// checks and the distribution-equality tests.

inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw validation_error("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double dist = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    dist = std::max(dist, std::abs(fa - fb));
  }
  return dist;
}

// Asymptotic p-value with the Stephens small-sample correction.
inline double ks_p_value(double dist, std::size_t n1, std::size_t n2) {
  const double ne = static_cast<double>(n1) * n2 / (n1 + n2);
  const double sq = std::sqrt(ne);
  const double lambda = (sq + 0.12 + 0.11 / sq) * dist;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1) ? term : -term;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// --------------------------------------------------------------------------
// Inner-product fidelity protocol. Rows are unit-normalized before
// compression; each row gets its own batch of unit queries drawn with a fixed
// mean cosine to the row (attention-style alignment), and signed errors
// e = <q, x_hat> - <q, x> are pooled across rows and queries.

inline constexpr double kDefaultQueryAlignment = 0.238;

struct IpProtocol {
  int query_count = 4096;  // per block, split evenly across rows
  double alignment = kDefaultQueryAlignment;
  std::uint64_t seed = 0x51e575;
};

struct IpStats {
  double bias = 0.0;
  double std = 0.0;
  std::int64_t count = 0;
};

namespace detail {

inline Vector gaussian_vector(Index d, Rng& rng) {
  Vector g(d);
  for (Index i = 0; i < d; ++i) g[i] = rng.gaussian();
  return g;
}

// Unit query with exact cosine `alignment` against the unit anchor.
inline Vector aligned_query(const Vector& anchor_unit, double alignment,
                            Rng& rng) {
  const Index d = anchor_unit.size();
  Vector g = gaussian_vector(d, rng);
  Vector w = g - g.dot(anchor_unit) * anchor_unit;
  const double wn = w.norm();
  if (wn == 0.0) {
    w = Vector::Zero(d);
    w[0] = 1.0;  // measure-zero fallback
  } else {
    w /= wn;
  }
  return alignment * anchor_unit + std::sqrt(1.0 - alignment * alignment) * w;
}

struct Welford {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;
  void add(double e) {
    sum += e;
    sum_sq += e * e;
    ++count;
  }
  IpStats stats() const {
    IpStats s;
    s.count = count;
    if (count > 0) {
      s.bias = sum / count;
      const double var =
          std::max(0.0, sum_sq / count - s.bias * s.bias);
      s.std = std::sqrt(var);
    }
    return s;
  }
};

inline Matrix unit_rows(const Matrix& block, std::vector<int>* kept) {
  Matrix x = block;
  for (Index t = 0; t < x.rows(); ++t) {
    const double norm = x.row(t).norm();
    if (norm > 0.0) {
      x.row(t) /= norm;
      if (kept) kept->push_back(static_cast<int>(t));
    }
  }
  return x;
}

}  // namespace detail

// Reconstruction-callback variant: pools <q, recon_row - row> for any
// compressor expressible as a reconstruction (identity = lossless).
inline IpStats ip_fidelity_recon(
    const std::vector<Matrix>& blocks,
    const std::function<Matrix(const Matrix&, std::size_t)>& reconstruct,
    const IpProtocol& proto) {
  if (proto.query_count < 1000)
    throw validation_error("ip protocol requires at least 1000 queries");
  detail::Welford acc;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    std::vector<int> kept;
    const Matrix x = detail::unit_rows(blocks[bi], &kept);
    const Matrix xhat = reconstruct(x, bi);
    const int per_row =
        std::max<int>(1, proto.query_count / static_cast<int>(x.rows()));
    for (int t : kept) {
      Rng rng(derive_stream(derive_stream(proto.seed, bi, StreamRole::kQueries),
                            static_cast<std::uint64_t>(t)));
      const Vector row = x.row(t);
      const Vector err = (xhat.row(t) - x.row(t)).transpose();
      for (int qi = 0; qi < per_row; ++qi) {
        const Vector q = detail::aligned_query(row, proto.alignment, rng);
        acc.add(q.dot(err));
      }
    }
  }
  return acc.stats();
}

// Method-aware variant: *_prod methods score inner products through the
// sidecar estimator rather than the MSE reconstruction.
inline IpStats ip_fidelity(const std::vector<Matrix>& blocks,
                           const pipeline::CompressionConfig& cfg,
                           const IpProtocol& proto) {
  if (proto.query_count < 1000)
    throw validation_error("ip protocol requires at least 1000 queries");
  detail::Welford acc;
  const bool prod = pipeline::method_uses_qjl(cfg.method);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    std::vector<int> kept;
    const Matrix x = detail::unit_rows(blocks[bi], &kept);
    const pipeline::CompressedBlock cb = pipeline::compress_block(x, cfg, bi);
    const Matrix xhat = pipeline::decompress_block(cb, cfg);
    const Index d = x.cols();
    Matrix phi;
    if (prod) phi = quant::gaussian_projection(static_cast<int>(d),
                                               cb.projection_seed);
    const int per_row =
        std::max<int>(1, proto.query_count / static_cast<int>(x.rows()));
    for (int t : kept) {
      Rng rng(derive_stream(derive_stream(proto.seed, bi, StreamRole::kQueries),
                            static_cast<std::uint64_t>(t)));
      const Vector row = x.row(t);
      const Vector err = (xhat.row(t) - x.row(t)).transpose();
      const quant::QjlSidecar* sc = prod ? &(*cb.qjl)[t] : nullptr;
      for (int qi = 0; qi < per_row; ++qi) {
        const Vector q = detail::aligned_query(row, proto.alignment, rng);
        double e = q.dot(err);
        if (prod) {
          const Vector pq = phi * q;
          double dot = 0.0;
          for (Index j = 0; j < d; ++j)
            dot += sc->sign_bits[j] ? pq[j] : -pq[j];
          e += sc->residual_norm * quant::kQjlScale / static_cast<double>(d) *
               dot;
        }
        acc.add(e);
      }
    }
  }
  return acc.stats();
}

// --------------------------------------------------------------------------
// Coordinate delocalization: per-row statistic (||r||_inf / ||r||_2) *
// sqrt(d / log d), reported as max / 99th percentile / fraction above the
// calibrated constant.

struct DelocStats {
  double max_ratio = 0.0;
  double p99_ratio = 0.0;
  double violation_fraction = 0.0;
  int rows_used = 0;
  int zero_rows = 0;
  std::vector<double> ratios;
};

inline DelocStats delocalization_check(const Matrix& residual,
                                       double c_threshold = 4.0) {
  DelocStats out;
  const double d = static_cast<double>(residual.cols());
  const double scale = std::sqrt(d / std::log(d));
  for (Index t = 0; t < residual.rows(); ++t) {
    const double l2 = residual.row(t).norm();
    if (l2 == 0.0) {
      ++out.zero_rows;
      continue;
    }
    const double linf = residual.row(t).cwiseAbs().maxCoeff();
    out.ratios.push_back(linf / l2 * scale);
  }
  out.rows_used = static_cast<int>(out.ratios.size());
  if (out.rows_used == 0) return out;
  std::vector<double> sorted = out.ratios;
  std::sort(sorted.begin(), sorted.end());
  out.max_ratio = sorted.back();
  const std::size_t idx = static_cast<std::size_t>(
      std::ceil(0.99 * sorted.size())) - 1;
  out.p99_ratio = sorted[std::min(idx, sorted.size() - 1)];
  out.violation_fraction =
      static_cast<double>(std::count_if(sorted.begin(), sorted.end(),
                                        [&](double r) { return r > c_threshold; })) /
      sorted.size();
  return out;
}

// --------------------------------------------------------------------------
// Residual-isotropy property suite on synthetic blocks with ground truth.

struct TruthBlock {
  Matrix data;
  Matrix signal;
  Matrix noise;
};

struct PropertyReport {
  double residual_frobenius_gap = 0.0;   // mean |  ||R||^2 - ||Z||^2  | / (nd)
  double spectrum_ks_distance = 0.0;     // mean KS(eig RR^T, eig ZZ^T)
  double deloc_max_ratio = 0.0;          // max row statistic over all blocks
  std::vector<std::pair<double, double>> snr_bias_curve;  // (snr, bias ratio)
};

namespace detail {

inline std::vector<double> squared_singular_values(const Matrix& m) {
  const Vector sv = spectral::decompose(m).singular_values;
  std::vector<double> out(sv.size());
  for (Index i = 0; i < sv.size(); ++i) out[i] = sv[i] * sv[i];
  return out;
}

}  // namespace detail

// Runs the residual checks over ground-truth blocks: spectrum match,
// Frobenius concentration, delocalization, and the per-token inner-product
// bias ratio of residual-path vs direct quantization, aggregated by SNR
// decile.
inline PropertyReport proposition_one_suite(
    const std::vector<TruthBlock>& blocks,
    const pipeline::CompressionConfig& cfg, const IpProtocol& proto,
    int bias_rotations = 4, int bias_queries_per_token = 64) {
  if (blocks.empty())
    throw validation_error("proposition_one_suite: no blocks");
  PropertyReport report;
  std::vector<std::pair<double, double>> token_points;  // (snr, ratio)

  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const TruthBlock& tb = blocks[bi];
    if (tb.noise.rows() != tb.data.rows() || tb.noise.cols() != tb.data.cols())
      throw validation_error(
          "proposition_one_suite: block lacks synthetic ground truth");
    const Index n = tb.data.rows();
    const Index d = tb.data.cols();
    const double nd = static_cast<double>(n) * static_cast<double>(d);

    const shrinkage::ShrinkOutput sh = shrinkage::shrink(tb.data, cfg.loss);
    const Matrix& residual = sh.residual;

    report.residual_frobenius_gap +=
        std::abs(residual.squaredNorm() - tb.noise.squaredNorm()) / nd;
    report.spectrum_ks_distance +=
        ks_distance(detail::squared_singular_values(residual),
                    detail::squared_singular_values(tb.noise));
    const DelocStats deloc = delocalization_check(residual);
    report.deloc_max_ratio = std::max(report.deloc_max_ratio, deloc.max_ratio);

    // Per-token bias of quantizing the residual row vs the raw row, under
    // the shared aligned-query ensemble, averaged over rotation seeds.
    Matrix sum_resid = Matrix::Zero(n, 1);
    Matrix sum_direct = Matrix::Zero(n, 1);
    for (int m = 0; m < bias_rotations; ++m) {
      const std::uint64_t rot_seed = derive_stream(
          derive_stream(proto.seed, bi, StreamRole::kRotation),
          static_cast<std::uint64_t>(m));
      const quant::BlockQuantContext ctx = quant::BlockQuantContext::create(
          static_cast<int>(d), cfg.residual_bits, rot_seed);
      for (Index t = 0; t < n; ++t) {
        const Vector row_x = tb.data.row(t);
        const Vector row_r = residual.row(t);
        const Vector err_r =
            quant::tq_mse_decode(quant::tq_mse_encode(row_r, ctx), ctx) - row_r;
        const Vector err_x =
            quant::tq_mse_decode(quant::tq_mse_encode(row_x, ctx), ctx) - row_x;
        const double xnorm = row_x.norm();
        if (xnorm == 0.0) continue;
        const Vector anchor = row_x / xnorm;
        Rng rng(derive_stream(
            derive_stream(proto.seed, bi, StreamRole::kQueries),
            static_cast<std::uint64_t>(t)));
        for (int qi = 0; qi < bias_queries_per_token; ++qi) {
          const Vector q = detail::aligned_query(anchor, proto.alignment, rng);
          sum_resid(t, 0) += q.dot(err_r);
          sum_direct(t, 0) += q.dot(err_x);
        }
      }
    }
    const double samples =
        static_cast<double>(bias_rotations) * bias_queries_per_token;
    for (Index t = 0; t < n; ++t) {
      const double denom = std::abs(sum_direct(t, 0) / samples);
      if (denom == 0.0) continue;
      const double ratio = std::abs(sum_resid(t, 0) / samples) / denom;
      const double snr = tb.noise.row(t).squaredNorm() > 0.0
                             ? tb.signal.row(t).squaredNorm() /
                                   tb.noise.row(t).squaredNorm()
                             : 0.0;
      token_points.emplace_back(snr, ratio);
    }
  }

  report.residual_frobenius_gap /= static_cast<double>(blocks.size());
  report.spectrum_ks_distance /= static_cast<double>(blocks.size());

  std::sort(token_points.begin(), token_points.end());
  const std::size_t bins = 10;
  const std::size_t total = token_points.size();
  for (std::size_t bin = 0; bin < bins && total > 0; ++bin) {
    const std::size_t begin = bin * total / bins;
    const std::size_t end = (bin + 1) * total / bins;
    if (end <= begin) continue;
    double snr_sum = 0.0, ratio_sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      snr_sum += token_points[i].first;
      ratio_sum += token_points[i].second;
    }
    const double count = static_cast<double>(end - begin);
    report.snr_bias_curve.emplace_back(snr_sum / count, ratio_sum / count);
  }
  return report;
}

// Synthetic-oracle entry point: samples the model at each seed.
inline PropertyReport proposition_one_suite(
    const synth::SpikedModelSpec& model, const pipeline::CompressionConfig& cfg,
    const std::vector<std::uint64_t>& seeds, const IpProtocol& proto) {
  std::vector<TruthBlock> blocks;
  blocks.reserve(seeds.size());
  for (std::uint64_t s : seeds) {
    synth::SpikedModelSpec m = model;
    m.seed = s;
    synth::SampledBlock sampled = synth::sample_block(m);
    blocks.push_back({std::move(sampled.data), std::move(sampled.truth.signal),
                      std::move(sampled.truth.noise)});
  }
  return proposition_one_suite(blocks, cfg, proto);
}

// --------------------------------------------------------------------------
// Method comparison tables.

struct FidelityReport {
  std::string method;
  double bits_total = 0.0;
  double rel_l2_percent = 0.0;
  double ip_bias = 0.0;
  double ip_std = 0.0;
  double mean_rank = std::numeric_limits<double>::quiet_NaN();
  int n_blocks = 0;
};

inline std::vector<FidelityReport> comparison_table(
    const std::vector<Matrix>& blocks,
    const std::vector<pipeline::Method>& methods,
    const std::vector<int>& bit_widths, pipeline::CompressionConfig base,
    const IpProtocol& proto) {
  if (blocks.empty() || methods.empty() || bit_widths.empty())
    throw validation_error("comparison_table: empty inputs");
  std::vector<FidelityReport> reports;
  for (pipeline::Method method : methods) {
    for (int b : bit_widths) {
      pipeline::CompressionConfig cfg = base;
      cfg.method = method;
      cfg.residual_bits = b;
      FidelityReport rep;
      rep.method = pipeline::method_name(method);
      rep.n_blocks = static_cast<int>(blocks.size());
      double bits_sum = 0.0, l2_sum = 0.0, rank_sum = 0.0;
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const pipeline::CompressedBlock cb =
            pipeline::compress_block(blocks[bi], cfg, bi);
        const Matrix recon = pipeline::decompress_block(cb, cfg);
        bits_sum += cb.bits.total.to_double();
        l2_sum += relative_l2(blocks[bi], recon);
        rank_sum += cb.rank;
      }
      rep.bits_total = bits_sum / blocks.size();
      rep.rel_l2_percent = l2_sum / blocks.size();
      if (pipeline::method_uses_factors(method))
        rep.mean_rank = rank_sum / blocks.size();
      const IpStats ip = ip_fidelity(blocks, cfg, proto);
      rep.ip_bias = ip.bias;
      rep.ip_std = ip.std;
      reports.push_back(std::move(rep));
    }
  }
  return reports;
}

}  // namespace eosq::metrics
