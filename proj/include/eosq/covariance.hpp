#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <utility>

#include "eosq/common.hpp"

namespace eosq::synth {

enum class CovKind { kIdentity, kDiagonal, kToeplitz, kExplicit };

// Row/column covariance of the separable noise model. The realized matrix
// must be symmetric positive-definite with top eigenvalue <= 1/tau and at
// most a (1 - tau) fraction of its spectrum inside [0, tau].
struct CovarianceSpec {
  CovKind kind = CovKind::kIdentity;
  int dim = 0;
  Vector diag_values;  // kDiagonal
  double rho = 0.0;    // kToeplitz
  Matrix matrix;       // kExplicit

  static CovarianceSpec identity(int dim) {
    CovarianceSpec s;
    s.kind = CovKind::kIdentity;
    s.dim = dim;
    return s;
  }

  static CovarianceSpec diagonal(Vector values) {
    CovarianceSpec s;
    s.kind = CovKind::kDiagonal;
    s.dim = static_cast<int>(values.size());
    s.diag_values = std::move(values);
    return s;
  }

  static CovarianceSpec toeplitz(int dim, double rho) {
    CovarianceSpec s;
    s.kind = CovKind::kToeplitz;
    s.dim = dim;
    s.rho = rho;
    return s;
  }

  static CovarianceSpec explicit_matrix(Matrix m) {
    CovarianceSpec s;
    s.kind = CovKind::kExplicit;
    s.dim = static_cast<int>(m.rows());
    s.matrix = std::move(m);
    return s;
  }
};

struct RealizedCovariance {
  Matrix matrix;       // SPD
  Matrix sqrt;         // symmetric square root, sqrt * sqrt == matrix
  Vector eigenvalues;  // ascending (solver order)
  bool is_identity = false;
};

namespace detail {

inline void check_spectrum(const Vector& eigenvalues, double tau) {
  const double top = eigenvalues.maxCoeff();
  if (top > 1.0 / tau) {
    std::ostringstream msg;
    msg << "covariance spectrum violates the regularity bound: top eigenvalue "
        << top << " exceeds 1/tau = " << 1.0 / tau;
    throw validation_error(msg.str());
  }
  const double low_mass =
      static_cast<double>((eigenvalues.array() <= tau).count()) /
      static_cast<double>(eigenvalues.size());
  if (low_mass > 1.0 - tau) {
    std::ostringstream msg;
    msg << "covariance spectrum too degenerate: fraction " << low_mass
        << " of eigenvalues lies in [0, " << tau << "]";
    throw validation_error(msg.str());
  }
}

}  // namespace detail

inline RealizedCovariance realize_covariance(const CovarianceSpec& spec,
                                             double tau = kDefaultTau) {
  if (spec.dim < 2) throw validation_error("covariance dim must be >= 2");
  RealizedCovariance out;
  switch (spec.kind) {
    case CovKind::kIdentity: {
      out.matrix = Matrix::Identity(spec.dim, spec.dim);
      out.sqrt = out.matrix;
      out.eigenvalues = Vector::Ones(spec.dim);
      out.is_identity = true;
      detail::check_spectrum(out.eigenvalues, tau);
      return out;
    }
    case CovKind::kDiagonal: {
      if (spec.diag_values.size() != spec.dim)
        throw validation_error("diagonal covariance: values length != dim");
      if ((spec.diag_values.array() <= 0.0).any())
        throw validation_error("diagonal covariance requires positive values");
      out.matrix = spec.diag_values.asDiagonal();
      out.sqrt = spec.diag_values.array().sqrt().matrix().asDiagonal();
      Vector ev = spec.diag_values;
      std::sort(ev.data(), ev.data() + ev.size());
      out.eigenvalues = ev;
      detail::check_spectrum(out.eigenvalues, tau);
      return out;
    }
    case CovKind::kToeplitz: {
      if (!(spec.rho >= 0.0 && spec.rho < 1.0))
        throw validation_error("toeplitz covariance requires rho in [0, 1)");
      Matrix t(spec.dim, spec.dim);
      for (int i = 0; i < spec.dim; ++i)
        for (int j = 0; j < spec.dim; ++j)
          t(i, j) = std::pow(spec.rho, std::abs(i - j));
      out.matrix = std::move(t);
      break;
    }
    case CovKind::kExplicit: {
      if (spec.matrix.rows() != spec.matrix.cols())
        throw validation_error("explicit covariance must be square");
      const double asym = (spec.matrix - spec.matrix.transpose()).norm();
      if (asym > 1e-10 * std::max(1.0, spec.matrix.norm()))
        throw validation_error("explicit covariance must be symmetric");
      out.matrix = spec.matrix;
      break;
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(out.matrix);
  if (es.info() != Eigen::Success)
    throw numeric_error("covariance eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) {
    std::ostringstream msg;
    msg << "covariance is not positive definite: min eigenvalue = "
        << ev.minCoeff();
    throw validation_error(msg.str());
  }
  out.eigenvalues = ev;
  out.sqrt = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
             es.eigenvectors().transpose();
  detail::check_spectrum(out.eigenvalues, tau);
  return out;
}

}  // namespace eosq::synth
