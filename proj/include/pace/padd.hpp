#pragma once

// Projecting away the domain direction. Each round trains a balanced,
// L1-regularized logistic discriminator (labeled -> 0, unlabeled -> 1, no
// bias) and removes its direction from both feature sets.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "pace/coral.hpp"
#include "pace/feature_io.hpp"
#include "pace/linalg.hpp"
#include "pace/optimizer.hpp"

namespace pace {

struct PaddConfig {
  std::size_t rounds = 30;
  std::size_t gd_iters = 200;
  double learning_rate = 4.0;
  double momentum = 0.9;
  double l1_lambda = 2e-4;
};

inline void validate(const PaddConfig& cfg) {
  if (cfg.gd_iters < 1) throw ParameterError("padd: gd_iters must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("padd: learning rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ParameterError("padd: momentum must lie in [0, 1)");
  if (!(cfg.l1_lambda >= 0.0)) throw ParameterError("padd: l1_lambda must be >= 0");
}

namespace detail {

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Smooth part of the discriminator objective and its gradient:
///   1/2 mean_l softplus(x w) + 1/2 mean_u softplus(-x w)
inline double discriminator_smooth_loss(const Vector& w, const FeatureMatrix& labeled,
                                        const FeatureMatrix& unlabeled, Vector* grad) {
  const Vector zl = labeled * w;
  const Vector zu = unlabeled * w;
  const double nl = static_cast<double>(labeled.rows());
  const double nu = static_cast<double>(unlabeled.rows());
  double loss = 0.0;
  Vector coeff_l(zl.size());
  Vector coeff_u(zu.size());
  double sum_l = 0.0;
  for (Index i = 0; i < zl.size(); ++i) {
    sum_l += detail::softplus(zl(i));
    coeff_l(i) = detail::sigmoid(zl(i));
  }
  double sum_u = 0.0;
  for (Index i = 0; i < zu.size(); ++i) {
    sum_u += detail::softplus(-zu(i));
    coeff_u(i) = -detail::sigmoid(-zu(i));
  }
  loss = 0.5 * sum_l / nl + 0.5 * sum_u / nu;
  if (grad) {
    *grad = (0.5 / nl) * (labeled.transpose() * coeff_l) + (0.5 / nu) * (unlabeled.transpose() * coeff_u);
  }
  return loss;
}

/// Full objective including lambda * ||w||_1, with subgradient sign(w) (0 at 0).
inline double discriminator_loss(const Vector& w, const FeatureMatrix& labeled,
                                 const FeatureMatrix& unlabeled, double l1_lambda, Vector* grad) {
  double loss = discriminator_smooth_loss(w, labeled, unlabeled, grad);
  loss += l1_lambda * w.lpNorm<1>();
  if (grad) {
    for (Index j = 0; j < w.size(); ++j) {
      if (w(j) > 0) (*grad)(j) += l1_lambda;
      else if (w(j) < 0) (*grad)(j) -= l1_lambda;
    }
  }
  return loss;
}

struct DiscriminatorResult {
  Vector direction;
  GdTrace trace;
};

/// Trains the domain discriminator from w = 0 with Nesterov momentum.
inline DiscriminatorResult train_domain_discriminator(const FeatureMatrix& labeled,
                                                      const FeatureMatrix& unlabeled,
                                                      const PaddConfig& cfg) {
  validate(cfg);
  if (labeled.rows() == 0 || unlabeled.rows() == 0) {
    throw InsufficientDataError("padd: both domains need at least one sample");
  }
  if (labeled.cols() != unlabeled.cols()) throw DimensionError("padd: domain dimensions differ");
  const GdConfig gd{cfg.learning_rate, cfg.gd_iters, cfg.momentum, true};
  DiscriminatorResult out;
  out.direction = momentum_descent(
      Vector(Vector::Zero(labeled.cols())),
      [&](const Vector& w, Vector& grad) {
        return discriminator_loss(w, labeled, unlabeled, cfg.l1_lambda, &grad);
      },
      gd, &out.trace);
  return out;
}

/// Mean predicted "unlabeled" probability of each domain under direction w.
struct DomainScores {
  double labeled = 0.5;
  double unlabeled = 0.5;
};

inline DomainScores domain_scores(const Vector& w, const FeatureMatrix& labeled, const FeatureMatrix& unlabeled) {
  auto mean_sigmoid = [&](const FeatureMatrix& x) {
    const Vector z = x * w;
    double s = 0.0;
    for (Index i = 0; i < z.size(); ++i) s += detail::sigmoid(z(i));
    return s / static_cast<double>(z.size());
  };
  return {mean_sigmoid(labeled), mean_sigmoid(unlabeled)};
}

struct PaddResult {
  AlignedFeatures features;
  /// Discriminator direction of every round, in order.
  std::vector<Vector> directions;
  /// Scores of the final discriminator on its own training inputs, before
  /// that round's projection.
  DomainScores final_scores_before_projection;
};

/// The data rows always lie in the orthogonal complement of earlier
/// directions, but the L1 subgradient can push w_t outside it. Each round
/// therefore projects along w_t with its components on earlier directions
/// removed: on the data this has the same effect as projecting along w_t
/// (x . w_t becomes 0), and the rows stay orthogonal to every earlier w_s.
inline PaddResult padd_align(const FeatureMatrix& source, const FeatureMatrix& target_labeled,
                             const FeatureMatrix& target_unlabeled, const PaddConfig& cfg,
                             FeatureMatrix* extra_unlabeled = nullptr) {
  validate(cfg);
  if (target_labeled.rows() > 0 && target_labeled.cols() != source.cols()) {
    throw DimensionError("padd: target_labeled dimension differs from source");
  }
  if (target_unlabeled.cols() != source.cols()) {
    throw DimensionError("padd: target_unlabeled dimension differs from source");
  }
  FeatureMatrix labeled = vstack(source, target_labeled);
  FeatureMatrix unlabeled = target_unlabeled;
  std::vector<Vector> basis;
  PaddResult out;
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    DiscriminatorResult disc;
    try {
      disc = train_domain_discriminator(labeled, unlabeled, cfg);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.iteration(), "padd round " + std::to_string(t + 1) + ": " + e.what());
    }
    out.final_scores_before_projection = domain_scores(disc.direction, labeled, unlabeled);
    Vector removed = disc.direction;
    for (const auto& q : basis) removed -= q.dot(removed) * q;
    if (removed.norm() > 1e-12 * disc.direction.norm() && removed.norm() > kDegenerateDirectionNorm) {
      labeled = project_out(labeled, removed);
      unlabeled = project_out(unlabeled, removed);
      if (extra_unlabeled && extra_unlabeled->rows() > 0) {
        *extra_unlabeled = project_out(*extra_unlabeled, removed);
      }
      basis.push_back(removed.normalized());
    }
    out.directions.push_back(std::move(disc.direction));
  }
  out.features.source = labeled.topRows(source.rows());
  out.features.target_labeled = labeled.bottomRows(target_labeled.rows());
  out.features.target_unlabeled = std::move(unlabeled);
  return out;
}

/// Aligns a whole bundle; validation rows receive the same projections.
inline DataBundle padd_align(const DataBundle& bundle, const PaddConfig& cfg) {
  DataBundle out = bundle;
  PaddResult r = padd_align(bundle.source.features, bundle.target_labeled.features,
                            bundle.target_unlabeled, cfg, &out.validation.features);
  out.source.features = std::move(r.features.source);
  out.target_labeled.features = std::move(r.features.target_labeled);
  out.target_unlabeled = std::move(r.features.target_unlabeled);
  return out;
}

}  // namespace pace
