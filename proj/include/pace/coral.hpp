#pragma once

// Correlation alignment. Labeled data (source rows followed by labeled target
// rows) is centered, whitened with (Cov(labeled) + lambda*I)^{-1/2} and
// recolored with (Cov(unlabeled) + lambda*I)^{1/2}. Unlabeled data is only
// centered.

#include <string>

#include "pace/feature_io.hpp"
#include "pace/linalg.hpp"

namespace pace {

struct CoralConfig {
  double lambda = 1e-3;
};

inline void validate(const CoralConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw ParameterError("coral: lambda must be finite and >= 0");
  }
}

/// Fitted alignment. Labeled rows map x -> (x - labeled_mean) * whitening * coloring,
/// unlabeled rows map x -> x - unlabeled_mean.
struct CoralTransform {
  Vector labeled_mean;
  Vector unlabeled_mean;
  SymmetricMatrix whitening;
  SymmetricMatrix coloring;

  FeatureMatrix whiten_labeled(const FeatureMatrix& x) const {
    return center(x, labeled_mean) * whitening.matrix();
  }
  FeatureMatrix apply_labeled(const FeatureMatrix& x) const {
    return whiten_labeled(x) * coloring.matrix();
  }
  FeatureMatrix apply_unlabeled(const FeatureMatrix& x) const { return center(x, unlabeled_mean); }
};

inline FeatureMatrix vstack(const FeatureMatrix& top, const FeatureMatrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  if (top.cols() != bottom.cols()) throw DimensionError("vstack: column counts differ");
  FeatureMatrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

inline CoralTransform coral_fit(const FeatureMatrix& labeled, const FeatureMatrix& unlabeled,
                                const CoralConfig& cfg) {
  validate(cfg);
  if (labeled.cols() != unlabeled.cols()) {
    throw DimensionError("coral: labeled and unlabeled dimensions differ");
  }
  if (labeled.rows() < 2) throw InsufficientDataError("coral: need at least 2 labeled samples");
  if (unlabeled.rows() < 2) throw InsufficientDataError("coral: need at least 2 unlabeled samples");
  return CoralTransform{
      column_mean(labeled),
      column_mean(unlabeled),
      matrix_power_half(covariance(labeled), MatrixPower::inverse_half, cfg.lambda),
      matrix_power_half(covariance(unlabeled), MatrixPower::half, cfg.lambda),
  };
}

struct AlignedFeatures {
  FeatureMatrix source;
  FeatureMatrix target_labeled;
  FeatureMatrix target_unlabeled;
};

/// `target_labeled` may have zero rows. Row order is preserved in every output.
inline AlignedFeatures coral_align(const FeatureMatrix& source, const FeatureMatrix& target_labeled,
                                   const FeatureMatrix& target_unlabeled, const CoralConfig& cfg) {
  if (target_labeled.rows() > 0 && target_labeled.cols() != source.cols()) {
    throw DimensionError("coral: target_labeled dimension differs from source");
  }
  const FeatureMatrix labeled = vstack(source, target_labeled);
  const CoralTransform t = coral_fit(labeled, target_unlabeled, cfg);
  const FeatureMatrix aligned = t.apply_labeled(labeled);
  AlignedFeatures out;
  out.source = aligned.topRows(source.rows());
  out.target_labeled = aligned.bottomRows(target_labeled.rows());
  out.target_unlabeled = t.apply_unlabeled(target_unlabeled);
  return out;
}

/// Aligns a whole bundle. Validation rows are target data and receive the
/// unlabeled transform.
inline DataBundle coral_align(const DataBundle& bundle, const CoralConfig& cfg) {
  const FeatureMatrix labeled = vstack(bundle.source.features, bundle.target_labeled.features);
  const CoralTransform t = coral_fit(labeled, bundle.target_unlabeled, cfg);
  const FeatureMatrix aligned = t.apply_labeled(labeled);
  DataBundle out = bundle;
  out.source.features = aligned.topRows(bundle.source.size());
  out.target_labeled.features = aligned.bottomRows(bundle.target_labeled.size());
  out.target_unlabeled = t.apply_unlabeled(bundle.target_unlabeled);
  if (!bundle.validation.empty()) out.validation.features = t.apply_unlabeled(bundle.validation.features);
  return out;
}

}  // namespace pace
