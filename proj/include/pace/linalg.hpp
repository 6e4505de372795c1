#pragma once

// Dense symmetric linear algebra on top of Eigen: covariance, eigendecomposition,
// ridge-regularized matrix square roots, rank-one projections and PCA.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "pace/error.hpp"
#include "pace/feature_io.hpp"

namespace pace {

using DenseMatrix = Eigen::MatrixXd;

/// Square matrix that was symmetric within 1e-9 relative at construction and
/// is stored exactly symmetric.
class SymmetricMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-9;

  explicit SymmetricMatrix(DenseMatrix m) : data_(std::move(m)) {
    if (data_.rows() != data_.cols()) {
      throw DimensionError("SymmetricMatrix: matrix is " + std::to_string(data_.rows()) + "x" +
                           std::to_string(data_.cols()));
    }
    for (Index i = 0; i < dim(); ++i) {
      for (Index j = i + 1; j < dim(); ++j) {
        const double a = data_(i, j);
        const double b = data_(j, i);
        if (!(std::abs(a - b) <= kSymmetryTolerance * (1.0 + std::abs(a)))) {
          throw ValidationError("SymmetricMatrix: entries (" + std::to_string(i) + "," +
                                std::to_string(j) + ") and its transpose differ");
        }
        const double mid = 0.5 * (a + b);
        data_(i, j) = mid;
        data_(j, i) = mid;
      }
    }
  }

  static SymmetricMatrix identity(Index d) { return SymmetricMatrix(DenseMatrix::Identity(d, d)); }

  Index dim() const noexcept { return data_.rows(); }
  const DenseMatrix& matrix() const noexcept { return data_; }
  double operator()(Index i, Index j) const { return data_(i, j); }

 private:
  DenseMatrix data_;
};

/// Eigenvalues ascending; eigenvectors are the matching orthonormal columns.
struct EigenDecomposition {
  Vector eigenvalues;
  DenseMatrix eigenvectors;
};

inline Vector column_mean(const FeatureMatrix& x) { return x.colwise().mean().transpose(); }

inline FeatureMatrix center(const FeatureMatrix& x, const Vector& mean) {
  return x.rowwise() - mean.transpose();
}

/// Population covariance (divisor n).
inline SymmetricMatrix covariance(const FeatureMatrix& x) {
  if (x.rows() < 2) {
    throw InsufficientDataError("covariance: need at least 2 samples, got " + std::to_string(x.rows()));
  }
  const FeatureMatrix centered = center(x, column_mean(x));
  DenseMatrix c = centered.transpose() * centered;
  c /= static_cast<double>(x.rows());
  return SymmetricMatrix(0.5 * (c + c.transpose()));
}

/// Symmetric eigendecomposition (tridiagonalization + implicit QR). Eigen caps
/// the QR phase at 30*d iterations and reports NoConvergence past it.
inline EigenDecomposition sym_eig(const SymmetricMatrix& c) {
  if (!c.matrix().allFinite()) throw ValidationError("sym_eig: non-finite entry");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(c.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("sym_eig: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

enum class MatrixPower { half, inverse_half };

inline constexpr double kMinInvertibleEigenvalue = 1e-12;

/// (C + ridge*I)^{+1/2} or ^{-1/2}. Eigenvalues of C are clamped at zero before
/// the ridge is added.
inline SymmetricMatrix matrix_power_half(const SymmetricMatrix& c, MatrixPower power, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw ParameterError("matrix_power_half: ridge must be finite and >= 0");
  }
  const EigenDecomposition eig = sym_eig(c);
  Vector w = eig.eigenvalues.cwiseMax(0.0).array() + ridge;
  if (power == MatrixPower::inverse_half) {
    const double smallest = w.minCoeff();
    if (smallest < kMinInvertibleEigenvalue) {
      throw SingularityError("matrix_power_half: smallest eigenvalue of C + ridge*I is " +
                             std::to_string(smallest) + ", cannot take the inverse square root");
    }
    w = w.array().sqrt().inverse();
  } else {
    w = w.array().sqrt();
  }
  const DenseMatrix& v = eig.eigenvectors;
  DenseMatrix out = v * w.asDiagonal() * v.transpose();
  return SymmetricMatrix(0.5 * (out + out.transpose()));
}

inline constexpr double kDegenerateDirectionNorm = 1e-30;

/// Removes from every row its component along `direction`.
inline FeatureMatrix project_out(const FeatureMatrix& x, const Vector& direction) {
  if (direction.size() != x.cols()) {
    throw DimensionError("project_out: direction has length " + std::to_string(direction.size()) +
                         ", rows have " + std::to_string(x.cols()));
  }
  const double norm = direction.norm();
  if (!(norm > kDegenerateDirectionNorm)) {
    throw DegenerateError("project_out: direction has near-zero norm");
  }
  const Vector unit = direction / norm;
  const Vector coeff = x * unit;
  return x - coeff * unit.transpose();
}

/// Top-k principal directions. Rows of `components` are orthonormal, ordered by
/// descending variance, and signed so each row's largest-magnitude entry is
/// positive.
struct PcaModel {
  Vector mean;
  Matrix components;
  Vector explained_variance;

  Index k() const noexcept { return components.rows(); }
  Index dim() const noexcept { return components.cols(); }
};

inline PcaModel pca_fit(const FeatureMatrix& x, Index k) {
  const Index limit = std::min<Index>(x.rows() - 1, x.cols());
  if (k < 1 || k > limit) {
    throw ParameterError("pca_fit: k=" + std::to_string(k) + " outside [1, " + std::to_string(limit) + "]");
  }
  const EigenDecomposition eig = sym_eig(covariance(x));
  const Index d = x.cols();
  PcaModel model;
  model.mean = column_mean(x);
  model.components.resize(k, d);
  model.explained_variance.resize(k);
  for (Index r = 0; r < k; ++r) {
    const Index src = d - 1 - r;
    Vector v = eig.eigenvectors.col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    model.components.row(r) = v.transpose();
    model.explained_variance(r) = std::max(0.0, eig.eigenvalues(src));
  }
  return model;
}

inline FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x) {
  if (x.cols() != model.dim()) {
    throw DimensionError("pca_transform: input dimension " + std::to_string(x.cols()) +
                         " differs from model dimension " + std::to_string(model.dim()));
  }
  return center(x, model.mean) * model.components.transpose();
}

}  // namespace pace
