#pragma once

// Zero-bias multinomial logistic regression trained by full-batch momentum GD.
//
// The objective is a sum of weighted, masked cross-entropy terms
//   sum_t weight_t * (1/n_t) * sum_i mask_ti * CE(softmax(x_ti W^T), y_ti)
// where n_t is the full size of term t, not the number of unmasked samples.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pace/error.hpp"
#include "pace/feature_io.hpp"
#include "pace/optimizer.hpp"

namespace pace {

struct LinearClassifier {
  Matrix weights;  // K x d
  GdTrace trace;

  Index num_classes() const noexcept { return weights.rows(); }
  Index dim() const noexcept { return weights.cols(); }
};

/// One weighted cross-entropy term. An empty mask keeps every sample.
struct LossTerm {
  std::reference_wrapper<const FeatureMatrix> features;
  std::reference_wrapper<const LabelVector> labels;
  double weight = 1.0;
  std::vector<std::uint8_t> mask;

  Index size() const noexcept { return features.get().rows(); }
};

inline void validate_term(const LossTerm& t, Index num_classes, Index dim) {
  const FeatureMatrix& x = t.features;
  const LabelVector& y = t.labels;
  if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
    throw ParameterError("loss term: weight must be finite and >= 0");
  }
  if (x.rows() == 0) return;
  if (x.cols() != dim) {
    throw DimensionError("loss term: feature dimension " + std::to_string(x.cols()) +
                         " differs from classifier dimension " + std::to_string(dim));
  }
  if (static_cast<Index>(y.size()) != x.rows()) {
    throw DimensionError("loss term: " + std::to_string(x.rows()) + " samples but " +
                         std::to_string(y.size()) + " labels");
  }
  if (!t.mask.empty() && static_cast<Index>(t.mask.size()) != x.rows()) {
    throw DimensionError("loss term: mask length differs from sample count");
  }
  for (auto label : y.labels) {
    if (static_cast<Index>(label) >= num_classes) {
      throw ValidationError("loss term: label " + std::to_string(label) + " >= K=" +
                            std::to_string(num_classes));
    }
  }
}

namespace detail {

/// A term restricted to its unmasked rows, with weight/n folded into `scale`.
struct CompactTerm {
  Matrix x;
  std::vector<std::uint32_t> y;
  double scale = 0.0;
};

inline std::vector<CompactTerm> compact_terms(std::span<const LossTerm> terms, Index num_classes,
                                              Index dim) {
  std::vector<CompactTerm> out;
  for (const auto& t : terms) {
    validate_term(t, num_classes, dim);
    const FeatureMatrix& x = t.features;
    const LabelVector& y = t.labels;
    if (x.rows() == 0 || t.weight == 0.0) continue;
    std::vector<std::size_t> keep;
    keep.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
      if (t.mask.empty() || t.mask[static_cast<std::size_t>(i)]) keep.push_back(static_cast<std::size_t>(i));
    }
    if (keep.empty()) continue;
    CompactTerm c;
    c.scale = t.weight / static_cast<double>(x.rows());
    if (keep.size() == static_cast<std::size_t>(x.rows())) {
      c.x = x;
      c.y = y.labels;
    } else {
      c.x = select_rows(x, keep);
      c.y.reserve(keep.size());
      for (auto i : keep) c.y.push_back(y.labels[i]);
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Loss of the compacted objective at `w`; the gradient is written to `grad`.
inline double compact_loss_and_grad(const Matrix& w, std::span<const CompactTerm> terms, Matrix& grad) {
  grad.setZero(w.rows(), w.cols());
  double total = 0.0;
  Matrix z;
  for (const auto& t : terms) {
    z.noalias() = t.x * w.transpose();
    double term_loss = 0.0;
    for (Index i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      const auto label = static_cast<Index>(t.y[static_cast<std::size_t>(i)]);
      const double shift = row.maxCoeff();
      const double target = row(label) - shift;
      row.array() = (row.array() - shift).exp();
      const double sum = row.sum();
      term_loss += std::log(sum) - target;
      row /= sum;
      row(label) -= 1.0;
    }
    total += t.scale * term_loss;
    grad.noalias() += t.scale * (z.transpose() * t.x);
  }
  return total;
}

}  // namespace detail

/// n x K matrix X W^T.
inline Matrix logits(const Matrix& weights, const FeatureMatrix& x) {
  if (x.cols() != weights.cols()) {
    throw DimensionError("logits: feature dimension " + std::to_string(x.cols()) +
                         " differs from weight dimension " + std::to_string(weights.cols()));
  }
  return x * weights.transpose();
}

/// Row-wise softmax with per-row max subtraction.
inline Matrix softmax_probs(const Matrix& z) {
  Matrix p = z;
  for (Index i = 0; i < p.rows(); ++i) {
    auto row = p.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return p;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Row>
Index argmax_lowest(const Row& row) {
  Index best = 0;
  for (Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = c;
  }
  return best;
}

inline LabelVector predict(const Matrix& weights, const FeatureMatrix& x) {
  const Matrix z = logits(weights, x);
  LabelVector out;
  out.num_classes = static_cast<std::uint32_t>(weights.rows());
  out.labels.resize(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) out.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(argmax_lowest(z.row(i)));
  return out;
}

inline std::pair<double, Matrix> loss_and_grad(const Matrix& weights, std::span<const LossTerm> terms) {
  const auto compact = detail::compact_terms(terms, weights.rows(), weights.cols());
  Matrix grad;
  const double loss = detail::compact_loss_and_grad(weights, compact, grad);
  return {loss, std::move(grad)};
}

/// Runs exactly cfg.iterations momentum steps from `initial`. No weight decay.
inline LinearClassifier gd_train(const Matrix& initial, std::span<const LossTerm> terms, const GdConfig& cfg) {
  const auto compact = detail::compact_terms(terms, initial.rows(), initial.cols());
  LinearClassifier out;
  out.weights = momentum_descent(
      initial,
      [&](const Matrix& w, Matrix& grad) { return detail::compact_loss_and_grad(w, compact, grad); },
      cfg, &out.trace);
  return out;
}

/// Labeled-data training from W = 0: alpha0 * L_source + beta0 * L_target_labeled.
/// Expects aligned, L2-normalized features. The target term drops out when the
/// bundle has no labeled target samples.
inline LinearClassifier train_labeled(const DataBundle& bundle, double alpha0, double beta0,
                                      const GdConfig& cfg) {
  std::vector<LossTerm> terms;
  terms.push_back({bundle.source.features, bundle.source.labels, alpha0, {}});
  if (!bundle.is_uda()) {
    terms.push_back({bundle.target_labeled.features, bundle.target_labeled.labels, beta0, {}});
  }
  const Matrix init = Matrix::Zero(bundle.num_classes, bundle.dim());
  return gd_train(init, terms, cfg);
}

/// Top-1 accuracy with lowest-index tie-breaking.
inline double accuracy(const Matrix& weights, const FeatureMatrix& x, const LabelVector& y) {
  if (static_cast<Index>(y.size()) != x.rows()) {
    throw DimensionError("accuracy: " + std::to_string(x.rows()) + " samples but " +
                         std::to_string(y.size()) + " labels");
  }
  if (y.empty()) throw ValidationError("accuracy: no samples");
  const LabelVector pred = predict(weights, x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Checkpoint file: "PACW" | version u32 = 1 | K u64 | d u64 | K*d f64 row-major

inline std::string encode_classifier(const Matrix& weights) {
  if (!weights.allFinite()) throw ValidationError("classifier checkpoint: non-finite weight");
  std::string out = "PACW";
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(weights.rows()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(weights.cols()));
  for (Index k = 0; k < weights.size(); ++k) {
    detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(weights.data()[k]));
  }
  return out;
}

inline Matrix decode_classifier(std::string_view bytes, std::string_view source = "checkpoint") {
  const std::string where(source);
  constexpr std::size_t header = 24;
  if (bytes.size() < header) throw LengthError(where + ": truncated header");
  if (bytes.substr(0, 4) != "PACW") throw FormatError(where + ": bad magic, expected PACW");
  if (detail::get_le<std::uint32_t>(bytes, 4) != 1) throw FormatError(where + ": unsupported version");
  const auto k = detail::get_le<std::uint64_t>(bytes, 8);
  const auto d = detail::get_le<std::uint64_t>(bytes, 16);
  if (k == 0 || d == 0) throw ValidationError(where + ": empty weight matrix");
  if (k > (std::numeric_limits<std::uint64_t>::max() / 8) / d || bytes.size() - header != k * d * 8) {
    throw LengthError(where + ": payload size does not match K*d");
  }
  Matrix w(static_cast<Index>(k), static_cast<Index>(d));
  for (std::uint64_t i = 0; i < k * d; ++i) {
    w.data()[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, header + 8 * i));
  }
  if (!w.allFinite()) throw ValidationError(where + ": non-finite weight");
  return w;
}

inline void save_classifier(const Matrix& weights, const std::filesystem::path& path) {
  detail::write_file(path, encode_classifier(weights));
}

inline Matrix load_classifier(const std::filesystem::path& path) {
  return decode_classifier(detail::read_file(path), path.string());
}

}  // namespace pace
