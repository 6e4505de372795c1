#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "pace/ensemble.hpp"

using namespace pace;

namespace {

PredictionSet from_rows(std::string id, std::initializer_list<std::initializer_list<double>> rows,
                        std::optional<double> val = std::nullopt) {
  PredictionSet p;
  p.member_id = std::move(id);
  p.probs.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) p.probs(i, j++) = v;
    ++i;
  }
  p.validation_accuracy = val;
  return p;
}

std::vector<PredictionSet> random_members(std::mt19937_64& gen, std::size_t m, Index n, Index k) {
  std::vector<PredictionSet> out;
  std::uniform_real_distribution<double> acc(0.3, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    PredictionSet p;
    p.member_id = "m" + std::to_string(i);
    p.probs = softmax_probs(oracle::random_matrix(gen, n, k, 2.0));
    p.validation_accuracy = acc(gen);
    out.push_back(std::move(p));
  }
  return out;
}

/// Plurality with the probability-sum then lowest-index tie ladder, counted
/// directly.
std::vector<std::uint32_t> brute_majority(const std::vector<PredictionSet>& members) {
  const Index n = members.front().probs.rows();
  const Index k = members.front().probs.cols();
  std::vector<std::uint32_t> out;
  for (Index i = 0; i < n; ++i) {
    std::vector<int> votes(static_cast<std::size_t>(k));
    std::vector<double> mass(static_cast<std::size_t>(k));
    for (const auto& m : members) {
      ++votes[oracle::first_argmax(oracle::row(m.probs, i))];
      for (Index c = 0; c < k; ++c) mass[static_cast<std::size_t>(c)] += m.probs(i, c);
    }
    const int top = *std::max_element(votes.begin(), votes.end());
    std::uint32_t best = 0;
    bool found = false;
    for (std::uint32_t c = 0; c < k; ++c) {
      if (votes[c] != top) continue;
      if (!found || mass[c] > mass[best] + 1e-12) {
        best = c;
        found = true;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

TEST(Average, SingleMemberIsItsArgmax) {
  std::mt19937_64 gen(1);
  const auto m = random_members(gen, 1, 20, 4);
  const auto labels = average_predict(m);
  for (Index i = 0; i < 20; ++i) {
    EXPECT_EQ(labels[static_cast<std::size_t>(i)], oracle::first_argmax(oracle::row(m[0].probs, i)));
  }
}

TEST(Average, OpposingConfidentMembers) {
  const std::vector<PredictionSet> m{from_rows("a", {{0.9, 0.1}}), from_rows("b", {{0.2, 0.8}})};
  EXPECT_EQ(average_predict(m)[0], 0u);
}

TEST(Average, IdenticalMembersEqualOne) {
  std::mt19937_64 gen(2);
  const auto one = random_members(gen, 1, 15, 3);
  const std::vector<PredictionSet> many(5, one.front());
  EXPECT_EQ(average_predict(many).labels, average_predict(one).labels);
}

TEST(Majority, UnanimousAndTieBreak) {
  const std::vector<PredictionSet> same{from_rows("a", {{0.1, 0.7, 0.2}}), from_rows("b", {{0.3, 0.4, 0.3}})};
  EXPECT_EQ(majority_vote(same)[0], 1u);
  // One vote each for classes 0 and 2; class 2 carries more total probability.
  const std::vector<PredictionSet> tie{from_rows("a", {{0.5, 0.1, 0.4}}), from_rows("b", {{0.3, 0.1, 0.6}})};
  EXPECT_EQ(majority_vote(tie)[0], 2u);
  // Equal mass too: lowest index.
  const std::vector<PredictionSet> flat{from_rows("a", {{0.6, 0.4}}), from_rows("b", {{0.4, 0.6}})};
  EXPECT_EQ(majority_vote(flat)[0], 0u);
}

TEST(Majority, MatchesCountingOracle) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = random_members(gen, 7, 40, 4);
    EXPECT_EQ(majority_vote(m).labels, brute_majority(m));
  }
}

TEST(WeightedVote, EqualConfidenceReducesToMajority) {
  const std::vector<PredictionSet> m{from_rows("a", {{0.6, 0.4, 0.0}}), from_rows("b", {{0.0, 0.6, 0.4}}),
                                     from_rows("c", {{0.0, 0.6, 0.4}})};
  EXPECT_EQ(weighted_vote(m, VoteWeighting::confidence)[0], majority_vote(m)[0]);
}

TEST(WeightedVote, ConfidentMemberWins) {
  const std::vector<PredictionSet> m{from_rows("a", {{0.99, 0.005, 0.005}}), from_rows("b", {{0.33, 0.34, 0.33}}),
                                     from_rows("c", {{0.33, 0.34, 0.33}})};
  EXPECT_EQ(weighted_vote(m, VoteWeighting::confidence)[0], 0u);
  EXPECT_EQ(majority_vote(m)[0], 1u);
}

TEST(WeightedVote, ValidationWeightsSelectOneMember) {
  std::mt19937_64 gen(4);
  auto m = random_members(gen, 5, 30, 4);
  for (auto& p : m) p.validation_accuracy = 0.0;
  m[3].validation_accuracy = 0.8;
  const auto labels = weighted_vote(m, VoteWeighting::confidence_and_validation);
  for (Index i = 0; i < 30; ++i) {
    EXPECT_EQ(labels[static_cast<std::size_t>(i)], oracle::first_argmax(oracle::row(m[3].probs, i)));
  }
}

TEST(WeightedVote, MissingValidationAccuracyIsAnError) {
  auto m = std::vector<PredictionSet>{from_rows("a", {{0.5, 0.5}}, 0.9), from_rows("b", {{0.5, 0.5}})};
  EXPECT_THROW(weighted_vote(m, VoteWeighting::confidence_and_validation), ParameterError);
  EXPECT_NO_THROW(weighted_vote(m, VoteWeighting::confidence));
}

TEST(Combiners, PermutationInvariant) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_members(gen, 6, 50, 5);
    const auto avg = average_predict(m).labels;
    const auto maj = majority_vote(m).labels;
    const auto wc = weighted_vote(m, VoteWeighting::confidence).labels;
    const auto wv = weighted_vote(m, VoteWeighting::confidence_and_validation).labels;
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
      std::shuffle(m.begin(), m.end(), gen);
      EXPECT_EQ(average_predict(m).labels, avg);
      EXPECT_EQ(majority_vote(m).labels, maj);
      EXPECT_EQ(weighted_vote(m, VoteWeighting::confidence).labels, wc);
      EXPECT_EQ(weighted_vote(m, VoteWeighting::confidence_and_validation).labels, wv);
    }
  }
}

TEST(Combiners, RejectBadInputs) {
  EXPECT_THROW(average_predict(std::vector<PredictionSet>{}), ParameterError);
  const std::vector<PredictionSet> shapes{from_rows("a", {{0.5, 0.5}}), from_rows("b", {{0.2, 0.3, 0.5}})};
  EXPECT_THROW(average_predict(shapes), DimensionError);
  const std::vector<PredictionSet> not_prob{from_rows("a", {{0.5, 0.6}})};
  EXPECT_THROW(majority_vote(not_prob), ValidationError);
}

TEST(Bootstrap, Basics) {
  EXPECT_EQ(bootstrap_indices(1, 9), (std::vector<std::size_t>{0}));
  EXPECT_EQ(bootstrap_indices(100, 3), bootstrap_indices(100, 3));
  EXPECT_NE(bootstrap_indices(100, 3), bootstrap_indices(100, 4));
  EXPECT_THROW(bootstrap_indices(0, 1), ParameterError);
}

TEST(Bootstrap, DistinctFractionNearOneMinusInverseE) {
  const auto idx = bootstrap_indices(10000, 17);
  const std::set<std::size_t> distinct(idx.begin(), idx.end());
  EXPECT_NEAR(static_cast<double>(distinct.size()) / 10000.0, 1.0 - std::exp(-1.0), 0.03);
  EXPECT_LT(*std::max_element(idx.begin(), idx.end()), 10000u);
}
