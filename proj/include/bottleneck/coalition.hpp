#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace bottleneck {

/// A subset S of the variables {0, ..., n-1}, stored as one machine word.
class Coalition {
 public:
  static constexpr int kMaxVariables = 64;

  Coalition() = default;
  /// Throws ArgumentError if n is out of range or `bits` has a bit at or above n.
  explicit Coalition(int n, std::uint64_t bits = 0);

  static Coalition empty(int n) { return Coalition(n, 0); }
  static Coalition full(int n);
  static Coalition of(int n, std::initializer_list<int> members);
  static Coalition of(int n, std::span<const int> members);

  int n() const { return n_; }
  std::uint64_t bits() const { return bits_; }
  int size() const { return std::popcount(bits_); }
  bool is_empty() const { return bits_ == 0; }

  bool contains(int i) const;
  Coalition with(int i) const;
  Coalition without(int i) const;
  Coalition complement() const;
  bool is_subset_of(const Coalition& other) const;
  bool is_proper_subset_of(const Coalition& other) const;

  std::vector<int> members() const;

  Coalition operator|(const Coalition& other) const;
  Coalition operator&(const Coalition& other) const;
  /// Set difference.
  Coalition operator-(const Coalition& other) const;

  friend bool operator==(const Coalition&, const Coalition&) = default;

 private:
  int n_ = 0;
  std::uint64_t bits_ = 0;
};

/// Mask with the lowest n bits set (n in [0, 64]).
constexpr std::uint64_t low_bits(int n) { return n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1; }

/// Exact binomial coefficient; throws CapacityError on uint64 overflow.
std::uint64_t binomial(int n, int k);

/// ln C(n, k) for real n, k via log-gamma (the continuous extension).
double log_binomial(double n, double k);

/// Visits every size-m subset of `pool` in increasing order of the compressed
/// mask (Gosper's successor over pool positions).
void for_each_subset_of_size(const Coalition& pool, int m, const std::function<void(const Coalition&)>& visit);

/// All C(|pool|, m) subsets of `pool` of size m, in the visiting order above.
std::vector<Coalition> enumerate_subsets_of_size(const Coalition& pool, int m);

/// The `rank`-th size-m subset of `pool` in the same order as the enumeration.
Coalition unrank_subset(const Coalition& pool, int m, std::uint64_t rank);

}  // namespace bottleneck
