#pragma once

// Combining per-member class probabilities into one label per sample.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pace/classifier.hpp"
#include "pace/error.hpp"
#include "pace/feature_io.hpp"
#include "pace/random.hpp"

namespace pace {

struct PredictionSet {
  std::string member_id;
  Matrix probs;  // n x K, rows sum to 1
  std::optional<double> validation_accuracy;
};

inline void validate(const PredictionSet& p) {
  for (Index i = 0; i < p.probs.rows(); ++i) {
    const auto row = p.probs.row(i);
    if (!row.allFinite() || row.minCoeff() < 0.0 || std::abs(row.sum() - 1.0) > 1e-9) {
      throw ValidationError("prediction set '" + p.member_id + "': row " + std::to_string(i) +
                            " is not a probability distribution");
    }
  }
  if (p.validation_accuracy && !(*p.validation_accuracy >= 0.0 && *p.validation_accuracy <= 1.0)) {
    throw ValidationError("prediction set '" + p.member_id + "': validation accuracy outside [0, 1]");
  }
}

namespace detail {

inline void check_members(std::span<const PredictionSet> members) {
  if (members.empty()) throw ParameterError("ensemble: no members");
  const Index n = members.front().probs.rows();
  const Index k = members.front().probs.cols();
  for (const auto& m : members) {
    if (m.probs.rows() != n || m.probs.cols() != k) {
      throw DimensionError("ensemble: member '" + m.member_id + "' has shape " +
                           std::to_string(m.probs.rows()) + "x" + std::to_string(m.probs.cols()) +
                           ", expected " + std::to_string(n) + "x" + std::to_string(k));
    }
    validate(m);
  }
}

/// Sum whose result does not depend on the order of the inputs.
inline double order_free_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

inline LabelVector empty_labels(std::span<const PredictionSet> members) {
  LabelVector out;
  out.num_classes = static_cast<std::uint32_t>(members.front().probs.cols());
  out.labels.resize(static_cast<std::size_t>(members.front().probs.rows()));
  return out;
}

}  // namespace detail

/// Argmax of the summed member probabilities.
inline LabelVector average_predict(std::span<const PredictionSet> members) {
  detail::check_members(members);
  const Index n = members.front().probs.rows();
  const Index k = members.front().probs.cols();
  LabelVector out = detail::empty_labels(members);
  Vector sum(k);
  std::vector<double> column(members.size());
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < k; ++c) {
      for (std::size_t m = 0; m < members.size(); ++m) column[m] = members[m].probs(i, c);
      sum(c) = detail::order_free_sum(column);
    }
    out.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(argmax_lowest(sum));
  }
  return out;
}

/// Plurality of member argmaxes. Ties go to the tied class with the largest
/// summed probability, then to the lowest index.
inline LabelVector majority_vote(std::span<const PredictionSet> members) {
  detail::check_members(members);
  const Index n = members.front().probs.rows();
  const Index k = members.front().probs.cols();
  LabelVector out = detail::empty_labels(members);
  std::vector<std::size_t> votes(static_cast<std::size_t>(k));
  std::vector<double> column(members.size());
  for (Index i = 0; i < n; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& m : members) ++votes[static_cast<std::size_t>(argmax_lowest(m.probs.row(i)))];
    const std::size_t top = *std::max_element(votes.begin(), votes.end());
    Index best = -1;
    double best_mass = 0.0;
    for (Index c = 0; c < k; ++c) {
      if (votes[static_cast<std::size_t>(c)] != top) continue;
      for (std::size_t m = 0; m < members.size(); ++m) column[m] = members[m].probs(i, c);
      const double mass = detail::order_free_sum(column);
      if (best < 0 || mass > best_mass) {
        best = c;
        best_mass = mass;
      }
    }
    out.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
  }
  return out;
}

enum class VoteWeighting { confidence, confidence_and_validation };

/// Each member votes for its argmax with weight max-probability (times its
/// validation accuracy in the second mode). Ties go to the lowest index.
inline LabelVector weighted_vote(std::span<const PredictionSet> members, VoteWeighting mode) {
  detail::check_members(members);
  if (mode == VoteWeighting::confidence_and_validation) {
    for (const auto& m : members) {
      if (!m.validation_accuracy) {
        throw ParameterError("weighted_vote: member '" + m.member_id + "' has no validation accuracy");
      }
    }
  }
  const Index n = members.front().probs.rows();
  const Index k = members.front().probs.cols();
  LabelVector out = detail::empty_labels(members);
  Vector score(k);
  std::vector<std::vector<double>> ballots(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    for (auto& b : ballots) b.clear();
    for (const auto& m : members) {
      const Index c = argmax_lowest(m.probs.row(i));
      double weight = m.probs(i, c);
      if (mode == VoteWeighting::confidence_and_validation) weight *= *m.validation_accuracy;
      ballots[static_cast<std::size_t>(c)].push_back(weight);
    }
    for (Index c = 0; c < k; ++c) score(c) = detail::order_free_sum(ballots[static_cast<std::size_t>(c)]);
    out.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(argmax_lowest(score));
  }
  return out;
}

/// n draws with replacement from [0, n).
inline std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParameterError("bootstrap_indices: n must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_index(n));
  return out;
}

}  // namespace pace
