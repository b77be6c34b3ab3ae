#include "specshape/replay.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "specshape/exploration.hpp"

namespace specshape {
namespace {

Transition tagged(float tag) {
  Transition t;
  t.observations = {tag};
  t.next_observations = {tag + 1};
  t.actions = {0};
  t.rewards = {static_cast<double>(tag)};
  t.active = {1};
  t.agent_terminal = {0};
  t.next_noop_only = {0};
  return t;
}

ReplayBuffer filled(std::size_t n, ReplayConfig cfg = {}) {
  ReplayBuffer b(cfg);
  for (std::size_t i = 0; i < n; ++i) b.store(tagged(static_cast<float>(i)));
  return b;
}

// Pearson chi-square critical value at 99% for the given degrees of freedom,
// via the Wilson-Hilferty approximation.
double chi2_critical_99(double dof) {
  const double z = 2.326;
  const double a = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

TEST(ReplayTest, FifoEvictionAtCapacity) {
  ReplayConfig cfg;
  cfg.capacity = 5;
  ReplayBuffer b = filled(7, cfg);
  EXPECT_EQ(b.size(), 5u);
  EXPECT_EQ(b.at(0).observations[0], 5.0f);
  EXPECT_EQ(b.at(1).observations[0], 6.0f);
  EXPECT_EQ(b.at(2).observations[0], 2.0f);
  EXPECT_EQ(b.next_slot(), 2u);
}

TEST(ReplayTest, DefaultCapacity) {
  ReplayBuffer b = filled(20005);
  EXPECT_EQ(b.size(), 20000u);
  EXPECT_EQ(b.capacity(), 20000u);
}

TEST(ReplayTest, FreshEntryGetsMaxPriority) {
  ReplayBuffer b = filled(4);
  EXPECT_EQ(b.priority(3), 1.0);
  b.set_priority(1, 7.5);
  b.store(tagged(9));
  EXPECT_EQ(b.priority(4), 7.5);
  EXPECT_EQ(b.max_priority(), 7.5);
}

TEST(ReplayTest, EmptyAndUnderfullSamplingFails) {
  std::mt19937_64 rng(1);
  ReplayBuffer b;
  EXPECT_THROW(b.sample(1, 0.4, rng), ReplayError);
  b = filled(10);
  EXPECT_THROW(b.sample(64, 0.4, rng), ReplayError);
}

TEST(ReplayTest, EqualPrioritiesSampleUniformlyWithUnitWeights) {
  std::mt19937_64 rng(3);
  ReplayBuffer b = filled(10);
  std::vector<int> hits(10, 0);
  constexpr int kDraws = 20000;
  for (int k = 0; k < kDraws / 10; ++k) {
    const auto s = b.sample(10, 0.7, rng);
    for (double w : s.weights) EXPECT_DOUBLE_EQ(w, 1.0);
    for (auto i : s.indices) ++hits[i];
  }
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - kDraws / 10.0) * (h - kDraws / 10.0) / (kDraws / 10.0);
  EXPECT_LT(chi2, chi2_critical_99(9));
}

TEST(ReplayTest, ProportionalSamplingChiSquare) {
  std::mt19937_64 rng(5);
  ReplayBuffer b = filled(8);
  for (std::size_t i = 0; i < 8; ++i) b.set_priority(i, 0.5 + static_cast<double>(i));
  double norm = 0.0;
  for (std::size_t i = 0; i < 8; ++i) norm += std::pow(0.5 + static_cast<double>(i), 0.6);
  for (std::size_t i = 0; i < 8; ++i)
    EXPECT_NEAR(b.sample_probability(i), std::pow(0.5 + static_cast<double>(i), 0.6) / norm, 1e-12);

  std::vector<int> hits(8, 0);
  constexpr int kDraws = 40000;
  for (int k = 0; k < kDraws / 8; ++k)
    for (auto i : b.sample(8, 0.4, rng).indices) ++hits[i];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = kDraws * b.sample_probability(i);
    chi2 += (hits[i] - expected) * (hits[i] - expected) / expected;
  }
  EXPECT_LT(chi2, chi2_critical_99(7));
}

TEST(ReplayTest, ZeroPriorityNeverSampled) {
  std::mt19937_64 rng(8);
  ReplayBuffer b = filled(6);
  b.set_priority(2, 0.0);
  for (int k = 0; k < 500; ++k)
    for (auto i : b.sample(6, 0.4, rng).indices) ASSERT_NE(i, 2u);
}

TEST(ReplayTest, AlphaZeroIsUniform) {
  ReplayConfig cfg;
  cfg.alpha = 0.0;
  ReplayBuffer b = filled(5, cfg);
  b.set_priority(0, 100.0);
  b.set_priority(1, 0.01);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(b.sample_probability(i), 0.2);
}

TEST(ReplayTest, ImportanceWeights) {
  std::mt19937_64 rng(2);
  ReplayConfig cfg;
  cfg.alpha = 1.0;
  ReplayBuffer b = filled(4, cfg);
  b.set_priority(0, 1.0);
  b.set_priority(1, 1.0);
  b.set_priority(2, 1.0);
  b.set_priority(3, 5.0);
  // P = {1/8, 1/8, 1/8, 5/8}; w_i = (N P_i)^-beta / max_j w_j.
  const double beta = 0.5;
  for (int k = 0; k < 50; ++k) {
    const auto s = b.sample(4, beta, rng);
    double max_raw = 0.0;
    std::vector<double> raw;
    for (auto i : s.indices) {
      raw.push_back(std::pow(4.0 * b.sample_probability(i), -beta));
      max_raw = std::max(max_raw, raw.back());
    }
    for (std::size_t j = 0; j < raw.size(); ++j) EXPECT_NEAR(s.weights[j], raw[j] / max_raw, 1e-12);
  }
}

TEST(ReplayTest, UpdatePrioritiesAddsEpsilon) {
  ReplayBuffer b = filled(3);
  const std::vector<std::size_t> idx{0, 2};
  const std::vector<double> td{-0.5, 2.0};
  b.update_priorities(idx, td);
  EXPECT_DOUBLE_EQ(b.priority(0), 0.5 + 1e-6);
  EXPECT_DOUBLE_EQ(b.priority(2), 2.0 + 1e-6);
  EXPECT_THROW(b.set_priority(0, -1.0), ReplayError);
  EXPECT_THROW(b.set_priority(5, 1.0), ReplayError);
}

TEST(ReplayTest, SaveLoadRoundTrip) {
  ReplayConfig cfg;
  cfg.capacity = 4;
  ReplayBuffer b = filled(6, cfg);
  b.set_priority(1, 3.0);
  std::stringstream s;
  b.save(s);
  const ReplayBuffer back = ReplayBuffer::load(s);
  EXPECT_EQ(back.size(), b.size());
  EXPECT_EQ(back.next_slot(), b.next_slot());
  EXPECT_EQ(back.max_priority(), b.max_priority());
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(back.at(i).observations, b.at(i).observations);
    EXPECT_EQ(back.priority(i), b.priority(i));
    EXPECT_DOUBLE_EQ(back.sample_probability(i), b.sample_probability(i));
  }
}

TEST(ExplorationTest, LinearDecayAndReset) {
  EpsilonSchedule e;
  EXPECT_DOUBLE_EQ(e.value(), 1.0);
  for (int k = 0; k < 500; ++k) e.advance();
  EXPECT_NEAR(e.value(), 0.525, 1e-12);
  double prev = e.value();
  for (int k = 0; k < 600; ++k) {
    e.advance();
    ASSERT_LE(e.value(), prev);
    prev = e.value();
  }
  EXPECT_DOUBLE_EQ(e.value(), 0.05);
  e.reset();
  EXPECT_DOUBLE_EQ(e.value(), 0.25);
  for (int k = 0; k < 1000; ++k) e.advance();
  EXPECT_DOUBLE_EQ(e.value(), 0.05);
}

TEST(ExplorationTest, RejectsBadBounds) {
  EXPECT_THROW(EpsilonSchedule({0.1, 0.5, 100, 0.25}), std::invalid_argument);
  EXPECT_THROW(EpsilonSchedule({1.0, 0.05, 0, 0.25}), std::invalid_argument);
}

}  // namespace
}  // namespace specshape
