#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "toepclt/partitions.hpp"

using namespace toepclt;

namespace {

// Every set partition of [m] as a restricted growth string.
std::vector<std::vector<int>> all_set_partitions(int m) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(static_cast<std::size_t>(m), 0);
  std::function<void(int, int)> rec = [&](int i, int maxv) {
    if (i == m) {
      out.push_back(a);
      return;
    }
    for (int v = 0; v <= maxv + 1; ++v) {
      a[static_cast<std::size_t>(i)] = v;
      rec(i + 1, std::max(maxv, v));
    }
  };
  a[0] = 0;
  rec(1, 0);
  return out;
}

std::vector<std::vector<int>> block_sizes_of(const std::vector<int>& labels) {
  int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> blocks(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) blocks[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i) + 1);
  return blocks;
}

bool brute_pair(const std::vector<int>& labels) {
  for (const auto& b : block_sizes_of(labels))
    if (b.size() != 2) return false;
  return true;
}

bool brute_crossing(const std::vector<int>& labels, int p) {
  if (!brute_pair(labels)) return false;
  for (const auto& b : block_sizes_of(labels))
    if (b[0] <= p && b[1] > p) return true;
  return false;
}

bool brute_p24(const std::vector<int>& labels, int p) {
  int fours = 0;
  for (const auto& b : block_sizes_of(labels)) {
    if (b.size() == 4) {
      ++fours;
      int l = 0;
      for (int e : b) l += e <= p;
      if (l != 2) return false;
    } else if (b.size() == 2) {
      if ((b[0] <= p) != (b[1] <= p)) return false;
    } else {
      return false;
    }
  }
  return fours == 1;
}

}  // namespace

TEST(Partition, CanonicalisesBlocks) {
  auto p = Partition::from_blocks({{4, 2}, {3, 1}});
  EXPECT_EQ(p.to_string(), "{{1,3},{2,4}}");
  EXPECT_EQ(p.block_of(4), 1);
  EXPECT_TRUE(p.is_pair_partition());
  EXPECT_THROW(Partition::from_blocks({{1, 2}, {2, 3}}), ContractViolation);
  EXPECT_THROW(Partition::from_blocks({{1, 3}}), ContractViolation);
}

TEST(PairPartitions, SmallCases) {
  auto two = enumerate_pair_partitions(2);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].partition().to_string(), "{{1,2}}");
  EXPECT_TRUE(enumerate_pair_partitions(3).empty());
  auto four = enumerate_pair_partitions(4);
  ASSERT_EQ(four.size(), 3u);
  EXPECT_EQ(four[0].partition().to_string(), "{{1,2},{3,4}}");
  EXPECT_EQ(four[1].partition().to_string(), "{{1,3},{2,4}}");
  EXPECT_EQ(four[2].partition().to_string(), "{{1,4},{2,3}}");
}

TEST(PairPartitions, DoubleFactorialCounts) {
  for (int k = 1; k <= 6; ++k)
    EXPECT_EQ(static_cast<std::int64_t>(enumerate_pair_partitions(2 * k).size()), double_factorial(2 * k - 1)) << k;
}

TEST(PairPartitions, GuardRejectsLargeSets) {
  EXPECT_THROW((void)enumerate_pair_partitions(22), ContractViolation);
  EXPECT_THROW((void)enumerate_pair_partitions(0), ContractViolation);
}

TEST(CrossingPairs, Examples) {
  EXPECT_EQ(enumerate_crossing_pair_partitions(1, 1).size(), 1u);
  auto c = enumerate_crossing_pair_partitions(2, 2);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].partition().to_string(), "{{1,3},{2,4}}");
  EXPECT_EQ(c[1].partition().to_string(), "{{1,4},{2,3}}");
  EXPECT_TRUE(enumerate_crossing_pair_partitions(2, 1).empty());
}

TEST(P24, Examples) {
  auto a = enumerate_p24(2, 2);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].partition().to_string(), "{{1,2,3,4}}");
  EXPECT_EQ(enumerate_p24(4, 2).size(), 6u);
  EXPECT_TRUE(enumerate_p24(3, 3).empty());
}

TEST(Enumerators, MatchBruteForce) {
  for (int m = 2; m <= 10; ++m) {
    const auto all = all_set_partitions(m);
    for (int p = 1; p < m; ++p) {
      const int q = m - p;
      std::set<std::vector<int>> cross, p24;
      for (const auto& l : all) {
        if (brute_crossing(l, p)) cross.insert(l);
        if (p % 2 == 0 && q % 2 == 0 && brute_p24(l, p)) p24.insert(l);
      }
      std::set<std::vector<int>> got_cross, got_p24;
      for (const auto& pi : enumerate_crossing_pair_partitions(p, q)) got_cross.insert(pi.partition().block_of());
      for (const auto& pi : enumerate_p24(p, q)) got_p24.insert(pi.partition().block_of());
      EXPECT_EQ(got_cross, cross) << p << "," << q;
      EXPECT_EQ(got_p24, p24) << p << "," << q;
      EXPECT_EQ(got_cross.size(), enumerate_crossing_pair_partitions(p, q).size());
      EXPECT_EQ(got_p24.size(), enumerate_p24(p, q).size());

      const auto df = [](int k) { return double_factorial(k); };
      if (p % 2 == 0 && q % 2 == 0) {
        EXPECT_EQ(static_cast<std::int64_t>(cross.size()), df(m - 1) - df(p - 1) * df(q - 1));
        EXPECT_EQ(static_cast<std::int64_t>(p24.size()), df(p - 1) * df(q - 1) * (p / 2) * (q / 2));
      } else if (p % 2 == 1 && q % 2 == 1) {
        EXPECT_EQ(static_cast<std::int64_t>(cross.size()), df(m - 1));
      }
    }
  }
}

TEST(Enumerators, CanonicalOrderWithoutDuplicates) {
  auto v = enumerate_pair_partitions(8);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_TRUE(v[i - 1] < v[i]);
  auto w = enumerate_p24(4, 4);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_TRUE(w[i - 1].partition() < w[i].partition());
}

TEST(Signs, Epsilon) {
  auto pi = PairPartition(Partition::from_blocks({{1, 3}, {2, 4}}));
  EXPECT_EQ(sign_assignment(pi).signs, (std::vector<int>{1, 1, -1, -1}));
  EXPECT_EQ(sign_assignment(PairPartition(Partition::from_blocks({{1, 2}}))).signs, (std::vector<int>{1, -1}));
}

TEST(Signs, Tau) {
  auto pi = FourBlockPartition(Partition::from_blocks({{1, 2, 3, 4}}), 2, 2);
  auto s = sign_assignment(pi);
  EXPECT_EQ(s.kind, SignKind::tau);
  EXPECT_EQ(s.signs, (std::vector<int>{1, -1, -1, 1}));
}

TEST(Signs, KindMismatchIsRejected) {
  auto four = Partition::from_blocks({{1, 2, 3, 4}});
  EXPECT_THROW((void)sign_assignment(four, SignKind::epsilon), ContractViolation);
  auto pairs = Partition::from_blocks({{1, 2}, {3, 4}});
  EXPECT_THROW((void)sign_assignment(pairs, SignKind::tau, 2), ContractViolation);
}

// Substituting y_i = sign(i) x_{pi(i)} makes sum_i y_i vanish identically.
TEST(Signs, IdenticalEquation) {
  auto check = [](const Partition& P, const std::vector<int>& signs) {
    std::vector<int> c(static_cast<std::size_t>(P.num_blocks()), 0);
    for (int e = 1; e <= P.size(); ++e) c[static_cast<std::size_t>(P.block_of(e))] += signs[static_cast<std::size_t>(e - 1)];
    for (int v : c) EXPECT_EQ(v, 0) << P.to_string();
  };
  for (int m = 2; m <= 10; m += 2)
    for (const auto& pi : enumerate_pair_partitions(m)) check(pi.partition(), sign_assignment(pi).signs);
  for (int p = 2; p <= 6; p += 2)
    for (int q = 2; q <= 6; q += 2)
      for (const auto& pi : enumerate_p24(p, q)) check(pi.partition(), sign_assignment(pi).signs);
}

TEST(Coloring, Restriction) {
  auto all = enumerate_pair_partitions(4);
  EXPECT_EQ(restrict_by_color(all, Partition::from_blocks({{1, 2, 3, 4}})).size(), 3u);
  auto a = restrict_by_color(all, Partition::from_blocks({{1, 2}, {3, 4}}));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].partition().to_string(), "{{1,2},{3,4}}");
  auto b = restrict_by_color(all, Partition::from_blocks({{1, 3}, {2, 4}}));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].partition().to_string(), "{{1,3},{2,4}}");
  EXPECT_THROW((void)restrict_by_color(all, Partition::from_blocks({{1, 2, 3}})), ContractViolation);
}

TEST(Coloring, FromWord) {
  const std::vector<int> word{1, 2, 1, 2};
  EXPECT_EQ(coloring_from_word(word).to_string(), "{{1,3},{2,4}}");
}
