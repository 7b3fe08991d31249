#include "bottleneck/coalition.hpp"

#include <cmath>
#include <string>

#include "bottleneck/errors.hpp"

namespace bottleneck {
namespace {

void check_index(int n, int i) {
  if (i < 0 || i >= n) {
    throw ArgumentError("variable index " + std::to_string(i) + " outside [0, " + std::to_string(n) + ")");
  }
}

void check_same_n(const Coalition& a, const Coalition& b) {
  if (a.n() != b.n()) {
    throw DimensionError("coalitions over different variable counts (" + std::to_string(a.n()) + " vs " +
                         std::to_string(b.n()) + ")");
  }
}

// Scatters the low bits of `compressed` onto the set bits of `pool` (software pdep).
std::uint64_t deposit(std::uint64_t compressed, std::uint64_t pool) {
  std::uint64_t out = 0;
  for (std::uint64_t bit = 1; pool != 0; bit <<= 1) {
    const std::uint64_t lowest = pool & (~pool + 1);
    if (compressed & bit) out |= lowest;
    pool ^= lowest;
  }
  return out;
}

}  // namespace

Coalition::Coalition(int n, std::uint64_t bits) : n_(n), bits_(bits) {
  if (n < 0 || n > kMaxVariables) {
    throw ArgumentError("variable count " + std::to_string(n) + " outside [0, 64]");
  }
  if ((bits & ~low_bits(n)) != 0) {
    throw ArgumentError("coalition has members at or above n = " + std::to_string(n));
  }
}

Coalition Coalition::full(int n) { return Coalition(n, low_bits(n)); }

Coalition Coalition::of(int n, std::initializer_list<int> members) {
  return of(n, std::span<const int>(members.begin(), members.size()));
}

Coalition Coalition::of(int n, std::span<const int> members) {
  Coalition c(n, 0);
  for (int i : members) c = c.with(i);
  return c;
}

bool Coalition::contains(int i) const {
  check_index(n_, i);
  return (bits_ >> i) & 1U;
}

Coalition Coalition::with(int i) const {
  check_index(n_, i);
  Coalition c = *this;
  c.bits_ |= std::uint64_t{1} << i;
  return c;
}

Coalition Coalition::without(int i) const {
  check_index(n_, i);
  Coalition c = *this;
  c.bits_ &= ~(std::uint64_t{1} << i);
  return c;
}

Coalition Coalition::complement() const {
  Coalition c = *this;
  c.bits_ = ~bits_ & low_bits(n_);
  return c;
}

bool Coalition::is_subset_of(const Coalition& other) const {
  check_same_n(*this, other);
  return (bits_ & ~other.bits_) == 0;
}

bool Coalition::is_proper_subset_of(const Coalition& other) const {
  return is_subset_of(other) && bits_ != other.bits_;
}

std::vector<int> Coalition::members() const {
  std::vector<int> out;
  out.reserve(size());
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
  return out;
}

Coalition Coalition::operator|(const Coalition& other) const {
  check_same_n(*this, other);
  Coalition c = *this;
  c.bits_ |= other.bits_;
  return c;
}

Coalition Coalition::operator&(const Coalition& other) const {
  check_same_n(*this, other);
  Coalition c = *this;
  c.bits_ &= other.bits_;
  return c;
}

Coalition Coalition::operator-(const Coalition& other) const {
  check_same_n(*this, other);
  Coalition c = *this;
  c.bits_ &= ~other.bits_;
  return c;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > ~std::uint64_t{0}) throw CapacityError("binomial C(" + std::to_string(n) + ", " + std::to_string(k) + ") overflows");
  }
  return static_cast<std::uint64_t>(r);
}

double log_binomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void for_each_subset_of_size(const Coalition& pool, int m, const std::function<void(const Coalition&)>& visit) {
  const int p = pool.size();
  if (m < 0 || m > p) {
    throw ArgumentError("subset size " + std::to_string(m) + " outside [0, " + std::to_string(p) + "]");
  }
  if (m == 0) {
    visit(Coalition::empty(pool.n()));
    return;
  }
  const std::uint64_t limit_bit = p >= 64 ? 0 : (std::uint64_t{1} << p);
  std::uint64_t c = low_bits(m);
  while (true) {
    visit(Coalition(pool.n(), deposit(c, pool.bits())));
    if (m == p) return;
    // Gosper's hack: next larger integer with the same popcount.
    const std::uint64_t lowest = c & (~c + 1);
    const std::uint64_t ripple = c + lowest;
    if (ripple == 0 || (limit_bit != 0 && (ripple & limit_bit))) return;
    c = (((ripple ^ c) >> 2) / lowest) | ripple;
    if (limit_bit != 0 && c >= limit_bit) return;
  }
}

std::vector<Coalition> enumerate_subsets_of_size(const Coalition& pool, int m) {
  std::vector<Coalition> out;
  if (m >= 0 && m <= pool.size()) out.reserve(binomial(pool.size(), m));
  for_each_subset_of_size(pool, m, [&](const Coalition& s) { out.push_back(s); });
  return out;
}

Coalition unrank_subset(const Coalition& pool, int m, std::uint64_t rank) {
  const int p = pool.size();
  if (m < 0 || m > p) {
    throw ArgumentError("subset size " + std::to_string(m) + " outside [0, " + std::to_string(p) + "]");
  }
  if (rank >= binomial(p, m)) throw ArgumentError("subset rank out of range");
  // Colexicographic unranking: rank = sum_i C(c_i, i) over members c_1 < ... < c_m.
  std::uint64_t compressed = 0;
  int c = p - 1;
  for (int k = m; k >= 1; --k) {
    while (binomial(c, k) > rank) --c;
    compressed |= std::uint64_t{1} << c;
    rank -= binomial(c, k);
    --c;
  }
  return Coalition(pool.n(), deposit(compressed, pool.bits()));
}

}  // namespace bottleneck
