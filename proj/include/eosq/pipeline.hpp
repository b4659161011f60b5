#pragma once

#include <atomic>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eosq/common.hpp"
#include "eosq/rng.hpp"
#include "eosq/shrinkage.hpp"
#include "eosq/turboquant.hpp"

namespace eosq::pipeline {

enum class Method : std::uint8_t {
  kTqMse = 0,
  kTqProd = 1,
  kSvd1Tq = 2,
  kEoptShrinkQMse = 3,
  kEoptShrinkQProd = 4,
  kKivi = 5,
};

enum class KiviAxis : std::uint8_t { kPerChannel = 0, kPerToken = 1 };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::kTqMse: return "tq_mse";
    case Method::kTqProd: return "tq_prod";
    case Method::kSvd1Tq: return "svd1_tq";
    case Method::kEoptShrinkQMse: return "eoptshrinkq_mse";
    case Method::kEoptShrinkQProd: return "eoptshrinkq_prod";
    case Method::kKivi: return "kivi";
  }
  return "unknown";
}

inline Method parse_method(const std::string& name) {
  for (int m = 0; m <= 5; ++m)
    if (name == method_name(static_cast<Method>(m)))
      return static_cast<Method>(m);
  throw validation_error("unknown method: " + name);
}

inline bool method_uses_qjl(Method m) {
  return m == Method::kTqProd || m == Method::kEoptShrinkQProd;
}

inline bool method_uses_factors(Method m) {
  return m == Method::kSvd1Tq || m == Method::kEoptShrinkQMse ||
         m == Method::kEoptShrinkQProd;
}

struct CompressionConfig {
  Method method = Method::kEoptShrinkQMse;
  int residual_bits = 2;  // b
  int factor_bits = 4;    // b_s
  shrinkage::Loss loss = shrinkage::Loss::kFrobenius;
  int block_rows = 128;   // n
  KiviAxis kivi_axis = KiviAxis::kPerChannel;
  int kivi_group = 64;    // g
  std::uint64_t root_seed = 0;
};

inline void validate_config(const CompressionConfig& cfg) {
  if (cfg.residual_bits < 1 || cfg.residual_bits > 8)
    throw validation_error("residual bits must be in [1, 8]");
  if (cfg.factor_bits < 2 || cfg.factor_bits > 8)
    throw validation_error("factor bits must be in [2, 8]");
  if (cfg.kivi_group < 1) throw validation_error("kivi group must be >= 1");
  if (cfg.block_rows < 1) throw validation_error("block rows must be >= 1");
}

// Exact rational bits-per-entry bookkeeping.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) { reduce(); }

  void reduce() {
    if (den < 0) { num = -num; den = -den; }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
    if (num == 0) den = 1;
  }
  Rational operator+(const Rational& o) const {
    return Rational(num * o.den + o.num * den, den * o.den);
  }
  bool operator==(const Rational& o) const {
    return num == o.num && den == o.den;
  }
  double to_double() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }
};

// Per-entry bit costs. `total` follows the pipeline's accounting line:
// residual bits plus factor (and QJL / group) overheads. The per-row norm and
// per-component sigma costs are shared across the TQ-based methods and are
// reported separately rather than folded into the total.
struct BitAccounting {
  Rational residual_bits_per_entry;
  Rational factor_overhead;
  Rational norm_overhead;
  Rational sigma_overhead;
  Rational qjl_overhead;
  Rational group_overhead;
  Rational total;
};

inline BitAccounting make_accounting(Method method, int b, int b_s, int rank,
                                     int n, int d, int kivi_groups = 0) {
  BitAccounting acc;
  const std::int64_t nd = static_cast<std::int64_t>(n) * d;
  acc.residual_bits_per_entry = Rational(b);
  if (method_uses_factors(method) && rank > 0) {
    acc.factor_overhead =
        Rational(static_cast<std::int64_t>(rank) * (n + d) * b_s, nd);
    acc.sigma_overhead = Rational(16 * static_cast<std::int64_t>(rank), nd);
  }
  if (method != Method::kKivi) acc.norm_overhead = Rational(16, d);
  if (method_uses_qjl(method)) acc.qjl_overhead = Rational(1);
  if (method == Method::kKivi)
    acc.group_overhead = Rational(32 * static_cast<std::int64_t>(kivi_groups), nd);
  acc.total = acc.residual_bits_per_entry + acc.qjl_overhead +
              acc.factor_overhead + acc.group_overhead;
  return acc;
}

// Quantized SVD factors: one data-adaptive codebook per factor matrix,
// shrunken values at container precision.
struct FactorPayload {
  Vector u_levels;
  Vector v_levels;
  CodeMatrix u_codes;  // n x rank
  CodeMatrix v_codes;  // d x rank
  Vector phi;          // rank, f32-rounded
};

struct KiviPayload {
  KiviAxis axis = KiviAxis::kPerChannel;
  int group = 64;
  std::vector<float> zero_points;  // per group, axis-major walk order
  std::vector<float> scales;
  CodeMatrix codes;  // n x d
};

struct CompressedBlock {
  int n = 0;
  int d = 0;
  Method method = Method::kTqMse;
  int rank = 0;
  int demoted = 0;
  std::uint64_t rotation_seed = 0;
  std::uint64_t projection_seed = 0;
  std::optional<FactorPayload> factors;
  std::vector<quant::QuantizedVector> rows;
  std::optional<std::vector<quant::QjlSidecar>> qjl;
  std::optional<KiviPayload> kivi;
  BitAccounting bits;
};

namespace detail {

inline Vector round_to_f32(const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i)
    out[i] = static_cast<double>(static_cast<float>(v[i]));
  return out;
}

inline std::vector<double> matrix_entries(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

inline void quantize_factor_matrix(const Matrix& factor, int bits,
                                   Vector* levels, CodeMatrix* codes) {
  const int count = 1 << bits;
  codes->resize(factor.rows(), factor.cols());
  const double lo = factor.minCoeff();
  const double hi = factor.maxCoeff();
  if (hi == lo) {
    // Constant entries: a single effective level reconstructs exactly.
    *levels = Vector::Constant(1, static_cast<double>(static_cast<float>(lo)));
    codes->setZero();
    return;
  }
  quant::LloydMaxCodebook cb =
      quant::train_codebook(matrix_entries(factor), bits);
  *levels = round_to_f32(cb.levels);
  quant::LloydMaxCodebook stored;  // quantize against the stored levels
  stored.bits = bits;
  stored.levels = *levels;
  stored.thresholds = Vector(count - 1);
  for (int i = 1; i < count; ++i)
    stored.thresholds[i - 1] = 0.5 * ((*levels)[i - 1] + (*levels)[i]);
  for (Index j = 0; j < factor.cols(); ++j)
    for (Index i = 0; i < factor.rows(); ++i)
      (*codes)(i, j) = static_cast<std::uint8_t>(stored.quantize(factor(i, j)));
}

inline Matrix dequantize_factor_matrix(const Vector& levels,
                                       const CodeMatrix& codes) {
  Matrix out(codes.rows(), codes.cols());
  for (Index j = 0; j < codes.cols(); ++j)
    for (Index i = 0; i < codes.rows(); ++i) out(i, j) = levels[codes(i, j)];
  return out;
}

}  // namespace detail

inline FactorPayload quantize_svd_factors(const Matrix& u, const Matrix& v,
                                          int factor_bits) {
  if (u.cols() != v.cols())
    throw validation_error("quantize_svd_factors: rank mismatch");
  const double ortho_u = (u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).norm();
  const double ortho_v = (v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).norm();
  if (ortho_u > 1e-6 || ortho_v > 1e-6)
    throw validation_error("quantize_svd_factors: columns must be orthonormal");
  FactorPayload payload;
  detail::quantize_factor_matrix(u, factor_bits, &payload.u_levels,
                                 &payload.u_codes);
  detail::quantize_factor_matrix(v, factor_bits, &payload.v_levels,
                                 &payload.v_codes);
  return payload;
}

inline Matrix dequantize_factors(const FactorPayload& payload) {
  const Matrix u = detail::dequantize_factor_matrix(payload.u_levels,
                                                    payload.u_codes);
  const Matrix v = detail::dequantize_factor_matrix(payload.v_levels,
                                                    payload.v_codes);
  return u * payload.phi.asDiagonal() * v.transpose();
}

// Group-wise asymmetric uniform quantization (per-channel for keys, per-token
// for values). Scale and zero point stored at container precision, accounted
// as 32 bits per group.
inline CompressedBlock kivi_compress(const Matrix& block, int bits,
                                     KiviAxis axis, int group) {
  if (bits < 1 || bits > 8)
    throw validation_error("kivi bits must be in [1, 8]");
  if (group < 1) throw validation_error("kivi group must be >= 1");
  const int n = static_cast<int>(block.rows());
  const int d = static_cast<int>(block.cols());
  const int levels = (1 << bits) - 1;

  CompressedBlock cb;
  cb.n = n;
  cb.d = d;
  cb.method = Method::kKivi;
  KiviPayload payload;
  payload.axis = axis;
  payload.group = group;
  payload.codes.resize(n, d);

  const int lanes = (axis == KiviAxis::kPerChannel) ? d : n;
  const int span = (axis == KiviAxis::kPerChannel) ? n : d;
  for (int lane = 0; lane < lanes; ++lane) {
    for (int start = 0; start < span; start += group) {
      const int len = std::min(group, span - start);
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (int off = 0; off < len; ++off) {
        const double v = (axis == KiviAxis::kPerChannel)
                             ? block(start + off, lane)
                             : block(lane, start + off);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const float zero = static_cast<float>(lo);
      const float scale =
          static_cast<float>(hi == lo ? 0.0 : (hi - lo) / levels);
      payload.zero_points.push_back(zero);
      payload.scales.push_back(scale);
      for (int off = 0; off < len; ++off) {
        const int i = (axis == KiviAxis::kPerChannel) ? start + off : lane;
        const int j = (axis == KiviAxis::kPerChannel) ? lane : start + off;
        int code = 0;
        if (scale > 0.0f) {
          code = static_cast<int>(
              std::lround((block(i, j) - static_cast<double>(zero)) /
                          static_cast<double>(scale)));
          code = std::clamp(code, 0, levels);
        }
        payload.codes(i, j) = static_cast<std::uint8_t>(code);
      }
    }
  }
  const int groups = static_cast<int>(payload.scales.size());
  cb.kivi = std::move(payload);
  cb.bits = make_accounting(Method::kKivi, bits, 0, 0, n, d, groups);
  return cb;
}

inline Matrix kivi_decompress(const CompressedBlock& cb) {
  const KiviPayload& payload = *cb.kivi;
  Matrix out(cb.n, cb.d);
  const int lanes = (payload.axis == KiviAxis::kPerChannel) ? cb.d : cb.n;
  const int span = (payload.axis == KiviAxis::kPerChannel) ? cb.n : cb.d;
  std::size_t g = 0;
  for (int lane = 0; lane < lanes; ++lane) {
    for (int start = 0; start < span; start += payload.group, ++g) {
      const int len = std::min(payload.group, span - start);
      const double zero = payload.zero_points[g];
      const double scale = payload.scales[g];
      for (int off = 0; off < len; ++off) {
        const int i =
            (payload.axis == KiviAxis::kPerChannel) ? start + off : lane;
        const int j =
            (payload.axis == KiviAxis::kPerChannel) ? lane : start + off;
        out(i, j) = zero + scale * payload.codes(i, j);
      }
    }
  }
  return out;
}

namespace detail {

inline void quantize_rows(const Matrix& residual, const CompressionConfig& cfg,
                          CompressedBlock* cb) {
  const int n = static_cast<int>(residual.rows());
  const int d = static_cast<int>(residual.cols());
  const quant::BlockQuantContext ctx = quant::BlockQuantContext::create(
      d, cfg.residual_bits, cb->rotation_seed);
  cb->rows.reserve(n);
  for (int t = 0; t < n; ++t)
    cb->rows.push_back(quant::tq_mse_encode(residual.row(t), ctx));
  if (method_uses_qjl(cfg.method)) {
    const Matrix phi = quant::gaussian_projection(d, cb->projection_seed);
    std::vector<quant::QjlSidecar> sidecars;
    sidecars.reserve(n);
    for (int t = 0; t < n; ++t) {
      const Vector row = residual.row(t);
      const Vector row_hat = quant::tq_mse_decode(cb->rows[t], ctx);
      sidecars.push_back(quant::qjl_encode(row, row_hat, phi,
                                           cb->projection_seed));
    }
    cb->qjl = std::move(sidecars);
  }
}

}  // namespace detail

inline CompressedBlock compress_block(const Matrix& block,
                                      const CompressionConfig& cfg,
                                      std::uint64_t block_index = 0) {
  validate_config(cfg);
  if (!block.allFinite())
    throw numeric_error("compress_block: non-finite entries");
  const int n = static_cast<int>(block.rows());
  const int d = static_cast<int>(block.cols());

  if (cfg.method == Method::kKivi)
    return kivi_compress(block, cfg.residual_bits, cfg.kivi_axis,
                         cfg.kivi_group);

  CompressedBlock cb;
  cb.n = n;
  cb.d = d;
  cb.method = cfg.method;
  cb.rotation_seed =
      derive_stream(cfg.root_seed, block_index, StreamRole::kRotation);
  cb.projection_seed =
      derive_stream(cfg.root_seed, block_index, StreamRole::kProjection);

  Matrix residual;
  switch (cfg.method) {
    case Method::kTqMse:
    case Method::kTqProd:
      residual = block;
      break;
    case Method::kSvd1Tq: {
      const spectral::SpectralDecomposition sd = spectral::decompose(block);
      const Matrix u = sd.left_vectors.leftCols(1);
      const Matrix v = sd.right_vectors.leftCols(1);
      FactorPayload payload = quantize_svd_factors(u, v, cfg.factor_bits);
      payload.phi = detail::round_to_f32(sd.singular_values.head(1));
      cb.factors = std::move(payload);
      cb.rank = 1;
      residual = block - sd.singular_values[0] * u * v.transpose();
      break;
    }
    case Method::kEoptShrinkQMse:
    case Method::kEoptShrinkQProd: {
      shrinkage::ShrinkOutput sh = shrinkage::shrink(block, cfg.loss);
      cb.rank = sh.result.rank;
      cb.demoted = static_cast<int>(sh.result.components.size()) - sh.result.rank;
      if (sh.result.rank > 0) {
        FactorPayload payload = quantize_svd_factors(
            sh.result.left_factors, sh.result.right_factors, cfg.factor_bits);
        payload.phi = detail::round_to_f32(sh.result.shrunken_values);
        cb.factors = std::move(payload);
      }
      residual = std::move(sh.residual);
      break;
    }
    case Method::kKivi:
      break;  // handled above
  }

  detail::quantize_rows(residual, cfg, &cb);
  cb.bits = make_accounting(cfg.method, cfg.residual_bits, cfg.factor_bits,
                            cb.rank, n, d);
  return cb;
}

inline Matrix decompress_block(const CompressedBlock& cb,
                               const CompressionConfig& cfg) {
  if (cb.method == Method::kKivi) return kivi_decompress(cb);
  const quant::BlockQuantContext ctx = quant::BlockQuantContext::create(
      cb.d, cfg.residual_bits, cb.rotation_seed);
  Matrix out(cb.n, cb.d);
  for (int t = 0; t < cb.n; ++t)
    out.row(t) = quant::tq_mse_decode(cb.rows[t], ctx).transpose();
  if (cb.factors.has_value()) out += dequantize_factors(*cb.factors);
  return out;
}

// Deterministic block-parallel compression: per-block seeds depend only on
// the block index, results land in input order regardless of scheduling.
inline std::vector<CompressedBlock> compress_stream(
    const std::vector<Matrix>& blocks, const CompressionConfig& cfg,
    int workers = 1) {
  std::vector<CompressedBlock> out(blocks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      out[i] = compress_block(blocks[i], cfg, i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= blocks.size()) return;
      try {
        out[i] = compress_block(blocks[i], cfg, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<int>(workers, static_cast<int>(blocks.size()));
  pool.reserve(count);
  for (int w = 0; w < count; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace eosq::pipeline
