#pragma once

// Confidence-thresholded self-training of a linear classifier.
//
// Each round t: pseudo-label the unlabeled target rows with the current W,
// mask source and target rows whose confidence does not exceed the round's
// thresholds, then run a fresh momentum-GD solve of
//   alpha_t L_s(masked) + beta_t L_tl + gamma_t L_tu(masked, pseudo-labels).
// Pseudo-labels and masks stay fixed for the whole round.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pace/classifier.hpp"
#include "pace/error.hpp"
#include "pace/feature_io.hpp"

namespace pace {

/// What the thresholds compare against. `probability` uses the maximum
/// softmax probability; `logit` thresholds the raw maximum logit.
enum class ThresholdMode { probability, logit };

/// Which class's confidence decides whether a source sample is kept.
enum class SourceConfidence { predicted_class, true_class };

struct SelfTrainSchedule {
  // One entry per round.
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
  std::vector<double> tau_source;
  std::vector<double> tau_target;
  std::vector<double> learning_rate;

  std::size_t gd_iters = 200;
  double momentum = 0.9;
  ThresholdMode threshold_mode = ThresholdMode::probability;
  SourceConfidence source_confidence = SourceConfidence::predicted_class;

  std::size_t rounds() const noexcept { return alpha.size(); }

  /// Default target threshold for round t (1-based) of T: 0.9, 0.8, 0.7 over
  /// consecutive thirds.
  static double default_tau_target(std::size_t t, std::size_t rounds) {
    static constexpr double kThirds[3] = {0.9, 0.8, 0.7};
    return kThirds[std::min<std::size_t>(2, (t - 1) * 3 / rounds)];
  }

  static SelfTrainSchedule defaults(std::size_t rounds = 30) {
    SelfTrainSchedule s;
    s.alpha.assign(rounds, 0.1);
    s.beta.assign(rounds, 0.05);
    s.gamma.assign(rounds, 0.9);
    s.tau_source.assign(rounds, 0.8);
    s.learning_rate.assign(rounds, 80.0);
    s.tau_target.resize(rounds);
    for (std::size_t t = 1; t <= rounds; ++t) s.tau_target[t - 1] = default_tau_target(t, rounds);
    return s;
  }
};

inline void validate(const SelfTrainSchedule& s) {
  const std::size_t t = s.rounds();
  for (const auto* v : {&s.beta, &s.gamma, &s.tau_source, &s.tau_target, &s.learning_rate}) {
    if (v->size() != t) throw ParameterError("self-training schedule: per-round arrays differ in length");
  }
  for (std::size_t i = 0; i < t; ++i) {
    if (!(s.alpha[i] >= 0 && s.beta[i] >= 0 && s.gamma[i] >= 0)) {
      throw ParameterError("self-training schedule: loss weights must be >= 0");
    }
    if (!(s.learning_rate[i] > 0)) throw ParameterError("self-training schedule: learning rates must be > 0");
    if (s.threshold_mode == ThresholdMode::probability) {
      for (double tau : {s.tau_source[i], s.tau_target[i]}) {
        if (!(tau >= 0.0 && tau <= 1.0)) {
          throw ParameterError("self-training schedule: thresholds must lie in [0, 1]");
        }
      }
    } else if (!std::isfinite(s.tau_source[i]) || !std::isfinite(s.tau_target[i])) {
      throw ParameterError("self-training schedule: thresholds must be finite");
    }
  }
  if (s.gd_iters < 1) throw ParameterError("self-training schedule: gd_iters must be >= 1");
}

struct PseudoLabels {
  LabelVector labels;
  std::vector<double> confidence;  // maximum softmax probability per row
};

inline PseudoLabels pseudo_label(const Matrix& weights, const FeatureMatrix& x) {
  const Matrix z = logits(weights, x);
  const Matrix p = softmax_probs(z);
  PseudoLabels out;
  out.labels.num_classes = static_cast<std::uint32_t>(weights.rows());
  out.labels.labels.resize(static_cast<std::size_t>(p.rows()));
  out.confidence.resize(static_cast<std::size_t>(p.rows()));
  for (Index i = 0; i < p.rows(); ++i) {
    const Index c = argmax_lowest(z.row(i));
    out.labels.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(c);
    out.confidence[static_cast<std::size_t>(i)] = p(i, c);
  }
  return out;
}

/// mask_i = 1 iff confidence_i > tau (strict).
inline std::vector<std::uint8_t> confidence_mask(std::span<const double> confidence, double tau) {
  std::vector<std::uint8_t> mask(confidence.size());
  for (std::size_t i = 0; i < confidence.size(); ++i) mask[i] = confidence[i] > tau ? 1 : 0;
  return mask;
}

struct RoundTrace {
  std::size_t round = 0;  // 1-based
  LabelVector pseudo_labels;
  std::vector<double> target_confidence;
  std::vector<std::uint8_t> target_mask;
  std::size_t source_kept = 0;
  std::size_t target_kept = 0;
  double loss_start = 0.0;
  double loss_end = 0.0;
  std::optional<double> target_accuracy;
};

struct SelfTrainResult {
  LinearClassifier classifier;
  std::vector<RoundTrace> trace;
};

namespace detail {

/// Per-row confidence used for thresholding, following the schedule's modes.
/// `truth` selects the true-class variant when non-null.
inline std::vector<double> threshold_scores(const Matrix& weights, const FeatureMatrix& x,
                                            ThresholdMode mode, const LabelVector* truth) {
  const Matrix z = logits(weights, x);
  const Matrix scores = mode == ThresholdMode::probability ? softmax_probs(z) : z;
  std::vector<double> out(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) {
    const Index c = truth ? static_cast<Index>((*truth)[static_cast<std::size_t>(i)]) : argmax_lowest(z.row(i));
    out[static_cast<std::size_t>(i)] = scores(i, c);
  }
  return out;
}

}  // namespace detail

/// Runs schedule.rounds() self-training rounds starting from `initial`.
/// Expects aligned, L2-normalized features.
inline SelfTrainResult self_train(const Matrix& initial, const DataBundle& bundle,
                                  const SelfTrainSchedule& schedule) {
  validate(schedule);
  if (initial.rows() != bundle.num_classes || initial.cols() != bundle.dim()) {
    throw DimensionError("self_train: initial weights do not match the bundle's K x d");
  }
  SelfTrainResult out;
  out.classifier.weights = initial;
  const bool true_class = schedule.source_confidence == SourceConfidence::true_class;
  for (std::size_t r = 0; r < schedule.rounds(); ++r) {
    const Matrix& w = out.classifier.weights;
    RoundTrace rt;
    rt.round = r + 1;
    rt.pseudo_labels = predict(w, bundle.target_unlabeled);
    rt.target_confidence = detail::threshold_scores(w, bundle.target_unlabeled, schedule.threshold_mode, nullptr);
    rt.target_mask = confidence_mask(rt.target_confidence, schedule.tau_target[r]);
    const auto source_scores = detail::threshold_scores(w, bundle.source.features, schedule.threshold_mode,
                                                        true_class ? &bundle.source.labels : nullptr);
    auto source_mask = confidence_mask(source_scores, schedule.tau_source[r]);
    for (auto m : source_mask) rt.source_kept += m;
    for (auto m : rt.target_mask) rt.target_kept += m;

    std::vector<LossTerm> terms;
    terms.push_back({bundle.source.features, bundle.source.labels, schedule.alpha[r], std::move(source_mask)});
    if (!bundle.is_uda()) {
      terms.push_back({bundle.target_labeled.features, bundle.target_labeled.labels, schedule.beta[r], {}});
    }
    terms.push_back({bundle.target_unlabeled, rt.pseudo_labels, schedule.gamma[r], rt.target_mask});

    const GdConfig gd{schedule.learning_rate[r], schedule.gd_iters, schedule.momentum, true};
    LinearClassifier next;
    try {
      next = gd_train(w, terms, gd);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.iteration(), "self-training round " + std::to_string(r + 1) + ": " + e.what());
    }
    rt.loss_start = next.trace.losses.front();
    rt.loss_end = next.trace.final_loss;
    if (bundle.target_eval_labels) {
      rt.target_accuracy = accuracy(next.weights, bundle.target_unlabeled, *bundle.target_eval_labels);
    }
    out.classifier = std::move(next);
    out.trace.push_back(std::move(rt));
  }
  return out;
}

}  // namespace pace
