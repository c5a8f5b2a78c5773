#pragma once

// Set partitions of [m] = {1, ..., m} and the pair-partition families used by
// the moment and covariance formulas.
//
// Elements are 1-based throughout. A Partition is always stored in canonical
// form: every block is sorted, and blocks are ordered by their smallest
// element, so block ids are determined by the partition itself.

#include <algorithm>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "toepclt/error.hpp"

namespace toepclt {

/// Largest ground set the enumerators accept.
inline constexpr int kMaxEnumerationSize = 20;

class Partition {
 public:
  Partition() = default;

  /// Builds a partition from blocks of 1-based elements, in any order.
  static Partition from_blocks(std::vector<std::vector<int>> blocks) {
    int m = 0;
    for (const auto& b : blocks) m += static_cast<int>(b.size());
    Partition out;
    out.m_ = m;
    out.block_of_.assign(static_cast<std::size_t>(m), -1);
    for (auto& b : blocks) {
      require(!b.empty(), "partition blocks must be non-empty");
      std::sort(b.begin(), b.end());
    }
    std::sort(blocks.begin(), blocks.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });
    for (std::size_t id = 0; id < blocks.size(); ++id) {
      for (int e : blocks[id]) {
        require(e >= 1 && e <= m, "partition element outside [1, m]");
        require(out.block_of_[static_cast<std::size_t>(e - 1)] == -1,
                "partition blocks must be pairwise disjoint");
        out.block_of_[static_cast<std::size_t>(e - 1)] = static_cast<int>(id);
      }
    }
    out.blocks_ = std::move(blocks);
    return out;
  }

  /// Builds a partition from a block label per element; labels need not be canonical.
  static Partition from_labels(std::span<const int> labels) {
    std::vector<std::vector<int>> blocks;
    std::vector<int> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto it = std::find(seen.begin(), seen.end(), labels[i]);
      if (it == seen.end()) {
        seen.push_back(labels[i]);
        blocks.push_back({static_cast<int>(i) + 1});
      } else {
        blocks[static_cast<std::size_t>(it - seen.begin())].push_back(static_cast<int>(i) + 1);
      }
    }
    return from_blocks(std::move(blocks));
  }

  [[nodiscard]] int size() const noexcept { return m_; }
  [[nodiscard]] int num_blocks() const noexcept { return static_cast<int>(blocks_.size()); }
  [[nodiscard]] const std::vector<std::vector<int>>& blocks() const noexcept { return blocks_; }
  [[nodiscard]] const std::vector<int>& block_of() const noexcept { return block_of_; }

  /// 0-based id of the block containing element e (1-based).
  [[nodiscard]] int block_of(int e) const { return block_of_.at(static_cast<std::size_t>(e - 1)); }

  [[nodiscard]] bool same_block(int a, int b) const { return block_of(a) == block_of(b); }

  [[nodiscard]] bool is_pair_partition() const {
    return std::all_of(blocks_.begin(), blocks_.end(), [](const auto& b) { return b.size() == 2; });
  }

  /// True when every block of *this lies inside a block of `coarse`.
  [[nodiscard]] bool refines(const Partition& coarse) const {
    require(coarse.size() == m_, "restriction requires partitions of the same ground set");
    for (const auto& b : blocks_)
      for (int e : b)
        if (coarse.block_of(e) != coarse.block_of(b.front())) return false;
    return true;
  }

  [[nodiscard]] std::string to_string() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (i) os << ',';
      os << '{';
      for (std::size_t j = 0; j < blocks_[i].size(); ++j) {
        if (j) os << ',';
        os << blocks_[i][j];
      }
      os << '}';
    }
    os << '}';
    return os.str();
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.m_ == b.m_ && a.block_of_ == b.block_of_;
  }
  friend bool operator<(const Partition& a, const Partition& b) {
    return a.block_of_ < b.block_of_;
  }

 private:
  int m_ = 0;
  std::vector<int> block_of_;
  std::vector<std::vector<int>> blocks_;
};

/// A partition with every block of size two.
class PairPartition {
 public:
  explicit PairPartition(Partition p) : p_(std::move(p)) {
    require(p_.is_pair_partition(), "not a pair partition");
  }
  [[nodiscard]] const Partition& partition() const noexcept { return p_; }
  [[nodiscard]] int size() const noexcept { return p_.size(); }
  [[nodiscard]] int num_blocks() const noexcept { return p_.num_blocks(); }
  /// The other element of e's pair.
  [[nodiscard]] int partner(int e) const {
    const auto& b = p_.blocks()[static_cast<std::size_t>(p_.block_of(e))];
    return b[0] == e ? b[1] : b[0];
  }
  /// Number of blocks {i, j} with i <= split < j.
  [[nodiscard]] int crossings(int split) const {
    int c = 0;
    for (const auto& b : p_.blocks())
      if (b[0] <= split && b[1] > split) ++c;
    return c;
  }
  friend bool operator==(const PairPartition& a, const PairPartition& b) { return a.p_ == b.p_; }
  friend bool operator<(const PairPartition& a, const PairPartition& b) { return a.p_ < b.p_; }

 private:
  Partition p_;
};

/// A partition of [p+q] with one block of size four (two elements on each side of
/// the split at p) and all other blocks pairs lying on one side.
class FourBlockPartition {
 public:
  FourBlockPartition(Partition p, int left, int right) : p_(std::move(p)), left_(left), right_(right) {
    require(left >= 1 && right >= 1 && left + right == p_.size(), "split does not match ground set");
    require(left % 2 == 0 && right % 2 == 0, "four-block partitions need even p and q");
    int four = -1;
    for (int id = 0; id < p_.num_blocks(); ++id) {
      const auto& b = p_.blocks()[static_cast<std::size_t>(id)];
      if (b.size() == 4) {
        require(four == -1, "more than one block of size four");
        four = id;
        require(b[1] <= left && b[2] > left, "four-block must take two elements from each side");
      } else {
        require(b.size() == 2, "blocks other than the four-block must be pairs");
        require(b[1] <= left || b[0] > left, "pair blocks must not cross the split");
      }
    }
    require(four != -1, "no block of size four");
    four_ = four;
  }
  [[nodiscard]] const Partition& partition() const noexcept { return p_; }
  [[nodiscard]] int four_block_id() const noexcept { return four_; }
  [[nodiscard]] int left() const noexcept { return left_; }
  [[nodiscard]] int right() const noexcept { return right_; }
  friend bool operator==(const FourBlockPartition& a, const FourBlockPartition& b) {
    return a.p_ == b.p_ && a.left_ == b.left_;
  }

 private:
  Partition p_;
  int left_, right_;
  int four_ = -1;
};

enum class SignKind { epsilon, tau };

struct SignAssignment {
  std::vector<int> signs;  // signs[e-1] for element e
  SignKind kind;
};

namespace detail {

inline void pairings_rec(std::vector<int>& label, int next_label, int m,
                         std::vector<Partition>& out) {
  int first = -1;
  for (int i = 0; i < m; ++i)
    if (label[static_cast<std::size_t>(i)] < 0) {
      first = i;
      break;
    }
  if (first < 0) {
    out.push_back(Partition::from_labels(label));
    return;
  }
  label[static_cast<std::size_t>(first)] = next_label;
  for (int j = first + 1; j < m; ++j) {
    if (label[static_cast<std::size_t>(j)] >= 0) continue;
    label[static_cast<std::size_t>(j)] = next_label;
    pairings_rec(label, next_label + 1, m, out);
    label[static_cast<std::size_t>(j)] = -1;
  }
  label[static_cast<std::size_t>(first)] = -1;
}

inline void check_size(int m) {
  require(m >= 1, "ground set size must be positive");
  require(m <= kMaxEnumerationSize, "ground set too large to enumerate");
}

}  // namespace detail

/// All pair partitions of [m], ordered lexicographically by block labels.
[[nodiscard]] inline std::vector<PairPartition> enumerate_pair_partitions(int m) {
  detail::check_size(m);
  std::vector<PairPartition> out;
  if (m % 2 != 0) return out;
  std::vector<Partition> raw;
  std::vector<int> label(static_cast<std::size_t>(m), -1);
  detail::pairings_rec(label, 0, m, raw);
  std::sort(raw.begin(), raw.end());
  out.reserve(raw.size());
  for (auto& p : raw) out.emplace_back(std::move(p));
  return out;
}

/// Pair partitions of [p+q] with at least one block {i, j}, i <= p < j.
[[nodiscard]] inline std::vector<PairPartition> enumerate_crossing_pair_partitions(int p, int q) {
  require(p >= 1 && q >= 1, "p and q must be positive");
  std::vector<PairPartition> out;
  for (auto& pi : enumerate_pair_partitions(p + q))
    if (pi.crossings(p) > 0) out.push_back(std::move(pi));
  return out;
}

/// Partitions with one four-block split two/two across p and pairs elsewhere.
/// Built by pairing each side independently and merging one pair from each side.
[[nodiscard]] inline std::vector<FourBlockPartition> enumerate_p24(int p, int q) {
  require(p >= 1 && q >= 1, "p and q must be positive");
  detail::check_size(p + q);
  std::vector<FourBlockPartition> out;
  if (p % 2 != 0 || q % 2 != 0) return out;
  const auto left = enumerate_pair_partitions(p);
  const auto right = enumerate_pair_partitions(q);
  std::vector<Partition> raw;
  for (const auto& l : left) {
    for (const auto& r : right) {
      for (const auto& lb : l.partition().blocks()) {
        for (const auto& rb : r.partition().blocks()) {
          std::vector<std::vector<int>> blocks;
          std::vector<int> four{lb[0], lb[1], rb[0] + p, rb[1] + p};
          blocks.push_back(four);
          for (const auto& b : l.partition().blocks())
            if (b != lb) blocks.push_back(b);
          for (const auto& b : r.partition().blocks())
            if (b != rb) blocks.push_back({b[0] + p, b[1] + p});
          raw.push_back(Partition::from_blocks(std::move(blocks)));
        }
      }
    }
  }
  std::sort(raw.begin(), raw.end());
  out.reserve(raw.size());
  for (auto& pi : raw) out.emplace_back(std::move(pi), p, q);
  return out;
}

/// epsilon: +1 on the smaller element of each pair, -1 on the larger.
[[nodiscard]] inline SignAssignment sign_assignment(const PairPartition& pi) {
  SignAssignment s{std::vector<int>(static_cast<std::size_t>(pi.size()), 0), SignKind::epsilon};
  for (const auto& b : pi.partition().blocks()) {
    s.signs[static_cast<std::size_t>(b[0] - 1)] = 1;
    s.signs[static_cast<std::size_t>(b[1] - 1)] = -1;
  }
  return s;
}

/// tau: epsilon on pairs; the four-block has +1 at its smallest and largest
/// elements and -1 on the middle two.
[[nodiscard]] inline SignAssignment sign_assignment(const FourBlockPartition& pi) {
  const auto& P = pi.partition();
  SignAssignment s{std::vector<int>(static_cast<std::size_t>(P.size()), 0), SignKind::tau};
  for (const auto& b : P.blocks()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      const bool outer = i == 0 || i + 1 == b.size();
      s.signs[static_cast<std::size_t>(b[i] - 1)] = (b.size() == 2 ? i == 0 : outer) ? 1 : -1;
    }
  }
  return s;
}

/// Generic entry point matching the (partition, kind) contract.
[[nodiscard]] inline SignAssignment sign_assignment(const Partition& pi, SignKind kind, int split = 0) {
  if (kind == SignKind::epsilon) {
    require(pi.is_pair_partition(), "epsilon signs require a pair partition");
    return sign_assignment(PairPartition(pi));
  }
  require(split > 0, "tau signs require the split point p");
  return sign_assignment(FourBlockPartition(pi, split, pi.size() - split));
}

/// Keeps the partitions whose blocks each lie inside one block of `coloring`.
template <class P>
[[nodiscard]] std::vector<P> restrict_by_color(const std::vector<P>& partitions, const Partition& coloring) {
  std::vector<P> out;
  for (const auto& pi : partitions) {
    const Partition* raw;
    if constexpr (std::is_same_v<P, Partition>) raw = &pi;
    else raw = &pi.partition();
    require(raw->size() == coloring.size(), "coloring must partition the same ground set");
    if (raw->refines(coloring)) out.push_back(pi);
  }
  return out;
}

/// Coloring induced by a word of matrix labels: j ~ k iff word[j] == word[k].
[[nodiscard]] inline Partition coloring_from_word(std::span<const int> word) {
  require(!word.empty(), "empty word");
  return Partition::from_labels(word);
}

/// (m-1)!! for odd m >= -1; (2k-1)!! is the number of pair partitions of [2k].
[[nodiscard]] inline constexpr std::int64_t double_factorial(int m) noexcept {
  std::int64_t r = 1;
  for (int k = m; k > 1; k -= 2) r *= k;
  return r;
}

}  // namespace toepclt
