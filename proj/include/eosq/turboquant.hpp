#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "eosq/common.hpp"
#include "eosq/lloyd_max.hpp"
#include "eosq/rng.hpp"

namespace eosq::quant {

// Haar-distributed orthogonal matrix: QR of an i.i.d. Gaussian matrix with
// the triangular factor's diagonal sign-fixed positive.
inline Matrix haar_rotation(int d, std::uint64_t seed) {
  if (d < 2) throw validation_error("haar_rotation requires d >= 2");
  Rng rng(seed);
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& qrm = qr.matrixQR();
  for (int j = 0; j < d; ++j)
    if (qrm(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

// Gaussian random projection with i.i.d. N(0, 1) entries; realized from its
// seed, row by row, and never persisted.
inline Matrix gaussian_projection(int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix phi(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) phi(i, j) = rng.gaussian();
  return phi;
}

// Per-vector code: stored norm (container precision), one Lloyd-Max index per
// coordinate, and the seed identifying the shared rotation.
struct QuantizedVector {
  double norm = 0.0;
  std::vector<std::uint8_t> codes;  // length d, each < 2^bits
  std::uint64_t rotation_seed = 0;
  bool zero = false;  // explicit zero-row marker; codes are inert
};

// Immutable per-block context shared by every row: the rotation is
// materialized once per (d, seed) and the codebook is the cached Gaussian
// codebook for variance 1/d.
struct BlockQuantContext {
  Matrix rotation;
  const LloydMaxCodebook* codebook = nullptr;
  std::uint64_t rotation_seed = 0;

  static BlockQuantContext create(int d, int bits, std::uint64_t seed) {
    BlockQuantContext ctx;
    ctx.rotation = haar_rotation(d, seed);
    ctx.codebook = &shared_codebook(bits, 1.0 / d);
    ctx.rotation_seed = seed;
    return ctx;
  }
};

inline QuantizedVector tq_mse_encode(const Vector& x,
                                     const BlockQuantContext& ctx) {
  const Index d = ctx.rotation.rows();
  if (x.size() != d) throw validation_error("tq_mse_encode: dimension mismatch");
  if (ctx.codebook->target_variance != 1.0 / static_cast<double>(d))
    throw validation_error("tq_mse_encode: codebook variance must be 1/d");

  QuantizedVector qv;
  qv.rotation_seed = ctx.rotation_seed;
  qv.codes.resize(d, 0);
  const double norm = x.norm();
  if (norm == 0.0) {
    qv.zero = true;
    return qv;
  }
  qv.norm = static_cast<double>(static_cast<float>(norm));
  const Vector z = ctx.rotation * (x / norm);
  for (Index j = 0; j < d; ++j)
    qv.codes[j] = static_cast<std::uint8_t>(ctx.codebook->quantize(z[j]));
  return qv;
}

inline Vector tq_mse_decode(const QuantizedVector& qv,
                            const BlockQuantContext& ctx) {
  const Index d = ctx.rotation.rows();
  if (static_cast<Index>(qv.codes.size()) != d)
    throw validation_error("tq_mse_decode: dimension mismatch");
  if (qv.zero) return Vector::Zero(d);
  Vector zhat(d);
  for (Index j = 0; j < d; ++j) zhat[j] = ctx.codebook->level(qv.codes[j]);
  return qv.norm * (ctx.rotation.transpose() * zhat);
}

// Seed-resolving overload: rebuilds the rotation recorded in the code.
inline Vector tq_mse_decode(const QuantizedVector& qv,
                            const LloydMaxCodebook& codebook) {
  BlockQuantContext ctx;
  ctx.rotation = haar_rotation(static_cast<int>(qv.codes.size()),
                               qv.rotation_seed);
  ctx.codebook = &codebook;
  ctx.rotation_seed = qv.rotation_seed;
  return tq_mse_decode(qv, ctx);
}

// One-bit-per-coordinate sketch of the quantization residual r_x = x - x_hat:
// stores ||r_x|| and sign(Phi r_x) for unbiased inner-product correction.
struct QjlSidecar {
  double residual_norm = 0.0;
  std::vector<std::uint8_t> sign_bits;  // length d, 1 where (Phi r_x)_j >= 0
  std::uint64_t projection_seed = 0;
};

inline QjlSidecar qjl_encode(const Vector& x, const Vector& x_hat_mse,
                             const Matrix& projection,
                             std::uint64_t projection_seed) {
  if (x.size() != x_hat_mse.size() || projection.cols() != x.size())
    throw validation_error("qjl_encode: shape mismatch");
  const Vector residual = x - x_hat_mse;
  QjlSidecar sc;
  sc.projection_seed = projection_seed;
  sc.residual_norm =
      static_cast<double>(static_cast<float>(residual.norm()));
  const Vector projected = projection * residual;
  sc.sign_bits.resize(x.size());
  for (Index j = 0; j < x.size(); ++j)
    sc.sign_bits[j] = projected[j] >= 0.0 ? 1 : 0;  // sign(0) fixed to +1
  return sc;
}

inline constexpr double kQjlScale = 1.2533141373155003;  // sqrt(pi / 2)

// Inner product against a stored code: <q, x_hat_mse>, plus the sidecar
// correction ||r_x|| * sqrt(pi/2)/d * <Phi q, sign(Phi r_x)> when present.
inline double ip_estimate(const Vector& q, const QuantizedVector& qv,
                          const BlockQuantContext& ctx,
                          const QjlSidecar* sidecar = nullptr,
                          const Matrix* projection = nullptr) {
  const Index d = ctx.rotation.rows();
  if (q.size() != d) throw validation_error("ip_estimate: dimension mismatch");
  double value = 0.0;
  if (!qv.zero) {
    if (static_cast<Index>(qv.codes.size()) != d)
      throw validation_error("ip_estimate: code length mismatch");
    const Vector rotated_q = ctx.rotation * q;
    double dot = 0.0;
    for (Index j = 0; j < d; ++j)
      dot += rotated_q[j] * ctx.codebook->level(qv.codes[j]);
    value = qv.norm * dot;
  }
  if (sidecar != nullptr) {
    if (projection == nullptr)
      throw validation_error("ip_estimate: sidecar requires its projection");
    if (static_cast<Index>(sidecar->sign_bits.size()) != d ||
        projection->cols() != d)
      throw validation_error("ip_estimate: sidecar dimension mismatch");
    const Vector projected_q = (*projection) * q;
    double dot = 0.0;
    for (Index j = 0; j < d; ++j)
      dot += sidecar->sign_bits[j] ? projected_q[j] : -projected_q[j];
    value += sidecar->residual_norm * kQjlScale / static_cast<double>(d) * dot;
  }
  return value;
}

// Seed-resolving overload.
inline double ip_estimate(const Vector& q, const QuantizedVector& qv,
                          const LloydMaxCodebook& codebook,
                          const QjlSidecar* sidecar = nullptr) {
  BlockQuantContext ctx;
  ctx.rotation =
      haar_rotation(static_cast<int>(qv.codes.size()), qv.rotation_seed);
  ctx.codebook = &codebook;
  ctx.rotation_seed = qv.rotation_seed;
  if (sidecar == nullptr) return ip_estimate(q, qv, ctx);
  const Matrix phi = gaussian_projection(static_cast<int>(q.size()),
                                         sidecar->projection_seed);
  return ip_estimate(q, qv, ctx, sidecar, &phi);
}

}  // namespace eosq::quant
