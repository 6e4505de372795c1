#pragma once

// Seeded synthetic domain-shift problems with known ground truth.
//
// Source: Gaussian classes N(mu_c, noise^2 I) with mu_c a random unit vector
// times `separation`, class counts from a uniform prior. Target: the same
// class-conditionals pushed through x -> A x + b, class counts from
// `target_prior`. A = P S: S = Q diag(s) Q^T with Q a random orthogonal basis
// and each scale drawn as cap^{-1/2} or cap^{+1/2} with equal odds, so
// cond(A) <= condition_cap; P rotates every vector by `rotation_angle` radians
// (angle theta in each of d/2 random orthogonal planes).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pace/error.hpp"
#include "pace/feature_io.hpp"
#include "pace/linalg.hpp"
#include "pace/random.hpp"

namespace pace {

struct SynthConfig {
  std::uint32_t num_classes = 10;
  Index dim = 32;
  std::size_t n_source = 2000;
  std::size_t n_target = 2000;
  double separation = 3.0;
  double noise = 1.0;
  double condition_cap = 5.0;
  double shift_scale = 2.0;
  double rotation_angle = 0.0;
  /// Target class priors; empty means geometric decay from 1 down to
  /// 1/prior_ratio across the classes.
  std::vector<double> target_prior;
  double prior_ratio = 4.0;
  double member_sigma = 0.0;
  std::size_t shots = 3;
  std::size_t val_per_class = 3;
  std::uint64_t seed = 0;
};

/// p_c proportional to ratio^{-c/(K-1)}.
inline std::vector<double> geometric_prior(std::uint32_t k, double ratio) {
  std::vector<double> p(k, 1.0);
  if (k > 1) {
    for (std::uint32_t c = 0; c < k; ++c) p[c] = std::pow(ratio, -static_cast<double>(c) / (k - 1));
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

inline std::vector<double> resolved_target_prior(const SynthConfig& cfg) {
  return cfg.target_prior.empty() ? geometric_prior(cfg.num_classes, cfg.prior_ratio) : cfg.target_prior;
}

/// Largest-remainder allocation of n samples to classes.
inline std::vector<std::size_t> allocate_counts(const std::vector<double>& prior, std::size_t n) {
  std::vector<std::size_t> counts(prior.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < prior.size(); ++c) {
    const double exact = prior[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  return counts;
}

inline void validate(const SynthConfig& cfg) {
  if (cfg.num_classes < 2) throw ParameterError("synth: need at least 2 classes");
  if (cfg.dim < 1) throw ParameterError("synth: dimension must be >= 1");
  if (!(cfg.noise >= 0 && cfg.separation >= 0 && cfg.shift_scale >= 0 && cfg.member_sigma >= 0)) {
    throw ParameterError("synth: scales must be >= 0");
  }
  if (!(cfg.condition_cap >= 1.0)) throw ParameterError("synth: condition cap must be >= 1");
  const auto prior = resolved_target_prior(cfg);
  if (prior.size() != cfg.num_classes) throw ParameterError("synth: target prior length differs from K");
  double total = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw ParameterError("synth: target prior has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("synth: target prior does not sum to 1");
  const std::size_t per_class = cfg.shots + cfg.val_per_class + 1;
  if (cfg.n_target < cfg.num_classes * per_class || cfg.n_source < cfg.num_classes) {
    throw ParameterError("synth: sample counts too small for K classes and the requested split");
  }
  for (auto count : allocate_counts(prior, cfg.n_target)) {
    if (count < per_class) {
      throw ParameterError("synth: target prior leaves a class with fewer than shots+val+1 samples");
    }
  }
}

struct SyntheticProblem {
  DataBundle bundle;
  Matrix class_means;   // K x d, source domain
  DenseMatrix transform;  // A
  Vector shift;           // b
};

namespace detail {

inline Vector gaussian_vector(Rng& rng, Index d) {
  Vector v(d);
  for (Index j = 0; j < d; ++j) v(j) = rng.normal();
  return v;
}

inline std::vector<std::uint32_t> shuffled_labels(const std::vector<std::size_t>& counts, Rng& rng) {
  std::vector<std::uint32_t> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<std::uint32_t>(c));
  rng.shuffle(std::span<std::uint32_t>(labels));
  return labels;
}

inline DenseMatrix random_rotation(Rng& rng, Index d) {
  DenseMatrix g(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<DenseMatrix> qr(g);
  DenseMatrix q = qr.householderQ();
  // Fix column signs so Q is a deterministic function of g.
  const DenseMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace detail

inline SyntheticProblem generate_problem(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const Index d = cfg.dim;
  const std::uint32_t k = cfg.num_classes;

  SyntheticProblem out;
  out.class_means.resize(k, d);
  for (std::uint32_t c = 0; c < k; ++c) {
    Vector v = detail::gaussian_vector(rng, d);
    out.class_means.row(c) = cfg.separation * v.normalized().transpose();
  }
  const DenseMatrix basis = detail::random_rotation(rng, d);
  Vector scales(d);
  for (Index j = 0; j < d; ++j) scales(j) = std::pow(cfg.condition_cap, (rng.uniform01() < 0.5 ? -0.5 : 0.5));
  const DenseMatrix planes = detail::random_rotation(rng, d);
  DenseMatrix turn = DenseMatrix::Identity(d, d);
  const double c = std::cos(cfg.rotation_angle);
  const double s = std::sin(cfg.rotation_angle);
  for (Index j = 0; j + 1 < d; j += 2) {
    turn(j, j) = c;
    turn(j, j + 1) = -s;
    turn(j + 1, j) = s;
    turn(j + 1, j + 1) = c;
  }
  out.transform = planes * turn * planes.transpose() * basis * scales.asDiagonal() * basis.transpose();
  out.shift = detail::gaussian_vector(rng, d).normalized() * cfg.shift_scale;

  auto sample = [&](const std::vector<std::uint32_t>& labels, bool target) {
    FeatureMatrix x(static_cast<Index>(labels.size()), d);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Vector v = out.class_means.row(labels[i]).transpose() + cfg.noise * detail::gaussian_vector(rng, d);
      if (target) v = out.transform * v + out.shift;
      x.row(static_cast<Index>(i)) = v.transpose();
    }
    return x;
  };

  const std::vector<double> uniform(k, 1.0 / k);
  LabeledSet source;
  source.labels.num_classes = k;
  source.labels.labels = detail::shuffled_labels(allocate_counts(uniform, cfg.n_source), rng);
  source.features = sample(source.labels.labels, false);

  LabelVector target_labels;
  target_labels.num_classes = k;
  target_labels.labels = detail::shuffled_labels(allocate_counts(resolved_target_prior(cfg), cfg.n_target), rng);
  const FeatureMatrix target_features = sample(target_labels.labels, true);

  const SplitSpec split{cfg.shots, cfg.val_per_class, cfg.seed};
  out.bundle = make_bundle(std::move(source), target_features, target_labels, split);
  return out;
}

inline DataBundle generate(const SynthConfig& cfg) { return generate_problem(cfg).bundle; }

/// Adds independent N(0, sigma^2) noise to every feature matrix of the bundle.
inline DataBundle perturb_member(const DataBundle& bundle, double sigma, std::uint64_t member_seed) {
  if (!(sigma >= 0.0)) throw ParameterError("perturb_member: sigma must be >= 0");
  DataBundle out = bundle;
  if (sigma == 0.0) return out;
  Rng rng(member_seed);
  for (FeatureMatrix* m : {&out.source.features, &out.target_labeled.features, &out.target_unlabeled,
                           &out.validation.features}) {
    for (Index k = 0; k < m->size(); ++k) m->data()[k] += sigma * rng.normal();
  }
  return out;
}

}  // namespace pace
