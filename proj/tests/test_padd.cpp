#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "pace/padd.hpp"

using namespace pace;

namespace {

double reference_smooth_loss(const Vector& w, const FeatureMatrix& l, const FeatureMatrix& u) {
  auto softplus = [](double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0); };
  double a = 0.0;
  double b = 0.0;
  for (Index i = 0; i < l.rows(); ++i) a += softplus(l.row(i).dot(w));
  for (Index i = 0; i < u.rows(); ++i) b += softplus(-u.row(i).dot(w));
  return 0.5 * a / static_cast<double>(l.rows()) + 0.5 * b / static_cast<double>(u.rows());
}

Vector as_vector(const oracle::Mat& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

PaddConfig quick(std::size_t rounds) {
  PaddConfig c;
  c.rounds = rounds;
  return c;
}

}  // namespace

TEST(Discriminator, SmoothGradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMatrix l = oracle::random_matrix(gen, 20, 5);
    FeatureMatrix u = oracle::random_matrix(gen, 13, 5);
    u.array() += 0.5;
    const oracle::Mat w0 = oracle::random_matrix(gen, 5, 1);
    Vector grad;
    const double loss = discriminator_smooth_loss(as_vector(w0), l, u, &grad);
    EXPECT_NEAR(loss, reference_smooth_loss(as_vector(w0), l, u), 1e-12);
    const oracle::Mat fd = oracle::finite_difference(
        [&](const oracle::Mat& w) { return reference_smooth_loss(as_vector(w), l, u); }, w0);
    const oracle::Mat analytic = Eigen::Map<const oracle::Mat>(grad.data(), 5, 1);
    EXPECT_LE(oracle::max_rel_error(analytic, fd), 1e-6);
  }
}

TEST(Discriminator, L1TermUsesSignSubgradient) {
  const FeatureMatrix l = FeatureMatrix::Random(6, 3);
  const FeatureMatrix u = FeatureMatrix::Random(4, 3);
  Vector w(3);
  w << 0.5, 0.0, -2.0;
  Vector g_smooth;
  Vector g_full;
  const double smooth = discriminator_smooth_loss(w, l, u, &g_smooth);
  const double full = discriminator_loss(w, l, u, 0.1, &g_full);
  EXPECT_NEAR(full, smooth + 0.1 * 2.5, 1e-15);
  EXPECT_NEAR(g_full(0) - g_smooth(0), 0.1, 1e-15);
  EXPECT_EQ(g_full(1), g_smooth(1));
  EXPECT_NEAR(g_full(2) - g_smooth(2), -0.1, 1e-15);
}

TEST(Discriminator, IdenticalSetsStayAtChance) {
  std::mt19937_64 gen(2);
  const FeatureMatrix x = oracle::random_matrix(gen, 200, 4);
  const auto r = train_domain_discriminator(x, x, PaddConfig{});
  EXPECT_GE(r.trace.final_loss, std::numbers::ln2 - 1e-6);
}

TEST(Discriminator, SeparatedPointsGetTheRightSign) {
  FeatureMatrix l = FeatureMatrix::Constant(10, 1, -1.0);
  FeatureMatrix u = FeatureMatrix::Constant(10, 1, 1.0);
  const auto r = train_domain_discriminator(l, u, PaddConfig{});
  EXPECT_GT(r.direction(0), 0.0);
  const auto s = domain_scores(r.direction, l, u);
  EXPECT_LT(s.labeled, 0.5);
  EXPECT_GT(s.unlabeled, 0.5);
}

TEST(Padd, ZeroRoundsIsIdentity) {
  std::mt19937_64 gen(3);
  const FeatureMatrix xs = oracle::random_matrix(gen, 10, 3);
  const FeatureMatrix xtl = oracle::random_matrix(gen, 2, 3);
  const FeatureMatrix xtu = oracle::random_matrix(gen, 8, 3);
  const auto r = padd_align(xs, xtl, xtu, quick(0));
  EXPECT_EQ(r.features.source, xs);
  EXPECT_EQ(r.features.target_labeled, xtl);
  EXPECT_EQ(r.features.target_unlabeled, xtu);
  EXPECT_TRUE(r.directions.empty());
}

TEST(Padd, OneRoundRemovesTheSeparatingAxis) {
  std::mt19937_64 gen(4);
  FeatureMatrix l = oracle::random_matrix(gen, 100, 2, 0.3);
  FeatureMatrix u = oracle::random_matrix(gen, 100, 2, 0.3);
  l.col(0).array() -= 1.0;
  u.col(0).array() += 1.0;
  const auto r = padd_align(l, FeatureMatrix(0, 2), u, quick(1));
  ASSERT_EQ(r.directions.size(), 1u);
  const Vector w = r.directions.front().normalized();
  EXPECT_GE(std::abs(w(0)), 0.9);
  EXPECT_LE((r.features.source * w).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((r.features.target_unlabeled * w).cwiseAbs().maxCoeff(), 1e-12);
  const auto again = train_domain_discriminator(r.features.source, r.features.target_unlabeled, PaddConfig{});
  EXPECT_GE(again.trace.final_loss, std::numbers::ln2 - 0.01);
}

TEST(Padd, OutputsOrthogonalToEveryDirectionAndRankBounded) {
  std::mt19937_64 gen(5);
  const Index d = 8;
  FeatureMatrix xs = oracle::random_matrix(gen, 120, d);
  FeatureMatrix xtu = oracle::random_matrix(gen, 90, d, 1.5);
  xtu.array() += 0.4;
  const std::size_t rounds = 5;
  const auto r = padd_align(xs, FeatureMatrix(0, d), xtu, quick(rounds));
  ASSERT_EQ(r.directions.size(), rounds);
  for (const auto& w : r.directions) {
    for (const FeatureMatrix* x : {&r.features.source, &r.features.target_unlabeled}) {
      for (Index i = 0; i < x->rows(); ++i) {
        EXPECT_LE(std::abs(x->row(i).dot(w)), 1e-8 * std::max(1.0, x->row(i).norm() * w.norm()));
      }
    }
  }
  const FeatureMatrix all = vstack(r.features.source, r.features.target_unlabeled);
  const auto sv = oracle::jacobi_eigenvalues(oracle::matmul(oracle::transpose(all), all));
  Index rank = 0;
  for (double s : sv) rank += s > 1e-9 * sv.back() ? 1 : 0;
  EXPECT_GE(rank, d - static_cast<Index>(rounds));
  EXPECT_LE(rank, d);
}

TEST(Padd, EachRoundDoesNotIncreaseNorm) {
  std::mt19937_64 gen(6);
  FeatureMatrix xs = oracle::random_matrix(gen, 60, 5);
  FeatureMatrix xtu = oracle::random_matrix(gen, 60, 5, 2.0);
  xtu.array() += 0.3;
  double prev_l = xs.norm();
  double prev_u = xtu.norm();
  for (std::size_t t = 1; t <= 4; ++t) {
    const auto r = padd_align(xs, FeatureMatrix(0, 5), xtu, quick(t));
    EXPECT_LE(r.features.source.norm(), prev_l + 1e-12);
    EXPECT_LE(r.features.target_unlabeled.norm(), prev_u + 1e-12);
    prev_l = r.features.source.norm();
    prev_u = r.features.target_unlabeled.norm();
  }
}

TEST(Padd, FinalDirectionScoresHalfOnOutputs) {
  std::mt19937_64 gen(7);
  FeatureMatrix xs = oracle::random_matrix(gen, 100, 6);
  FeatureMatrix xtu = oracle::random_matrix(gen, 100, 6);
  xtu.col(1).array() += 1.0;
  const auto r = padd_align(xs, FeatureMatrix(0, 6), xtu, quick(3));
  const auto s = domain_scores(r.directions.back(), r.features.source, r.features.target_unlabeled);
  EXPECT_NEAR(s.labeled, 0.5, 1e-12);
  EXPECT_NEAR(s.unlabeled, 0.5, 1e-12);
}

TEST(Padd, BundleOverloadProjectsValidationToo) {
  std::mt19937_64 gen(8);
  DataBundle b;
  b.num_classes = 2;
  b.source = {oracle::random_matrix(gen, 20, 3), LabelVector{std::vector<std::uint32_t>(20, 0), 2}};
  b.source.labels.labels[1] = 1;
  b.target_labeled.features.resize(0, 3);
  b.target_labeled.labels.num_classes = 2;
  b.target_unlabeled = oracle::random_matrix(gen, 20, 3);
  b.target_unlabeled.col(0).array() += 2.0;
  b.validation = {oracle::random_matrix(gen, 4, 3), LabelVector{{0, 1, 0, 1}, 2}};
  const DataBundle out = padd_align(b, quick(2));
  const auto r = padd_align(b.source.features, b.target_labeled.features, b.target_unlabeled, quick(2));
  for (const auto& w : r.directions) EXPECT_LE((out.validation.features * w).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(out.source.features, r.features.source);
}
