#pragma once

// Shared vocabulary: AS numbers, 16-digit guard-set identifiers, errors and
// seeded random streams.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace guardsets {

struct AsNumber {
  std::uint32_t value{0};

  constexpr AsNumber() = default;
  constexpr explicit AsNumber(std::uint32_t v) : value(v) {}

  constexpr auto operator<=>(const AsNumber&) const = default;
};

inline std::string to_string(AsNumber a) { return std::to_string(a.value); }

// Guard-set identifiers are 16 decimal digits (leading digit nonzero).
using GuardSetId = std::uint64_t;

inline constexpr GuardSetId kMinGuardSetId = 1'000'000'000'000'000ULL;
inline constexpr GuardSetId kMaxGuardSetId = 9'999'999'999'999'999ULL;

constexpr bool is_valid_guard_set_id(GuardSetId id) {
  return id >= kMinGuardSetId && id <= kMaxGuardSetId;
}

// Hierarchy level tags mixed into identifier hashes.
enum class Level : std::uint8_t { superset = 1, set = 2, subset = 3, bw_set = 4 };

// tau_up doubles as the quantum size of the bandwidth design.
struct Thresholds {
  double tau_up{40.0};
  double tau_down{20.0};
  std::size_t n_supersets{50};
  std::size_t exact_packing_limit{20};

  void validate() const {
    if (!(tau_down < tau_up)) throw std::invalid_argument("tau_down must be below tau_up");
    if (tau_down <= 0) throw std::invalid_argument("tau_down must be positive");
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// FNV-1a over bytes, finished with splitmix so short inputs spread well.
class StableHasher {
 public:
  StableHasher& bytes(std::string_view s) {
    for (unsigned char c : s) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    // separator so ("ab","c") != ("a","bc")
    state_ ^= 0xffU;
    state_ *= 0x100000001b3ULL;
    return *this;
  }

  StableHasher& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  std::uint64_t digest() const { return detail::splitmix64(state_); }

 private:
  std::uint64_t state_{0xcbf29ce484222325ULL};
};

inline GuardSetId to_guard_set_id(std::uint64_t hash) {
  return kMinGuardSetId + hash % (kMaxGuardSetId - kMinGuardSetId + 1);
}

// Derive an independent stream seed from a base seed and a list of tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = detail::splitmix64(base);
  for (auto t : tags) s = detail::splitmix64(s ^ detail::splitmix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags = {}) {
  return Rng(derive_seed(base, tags));
}

// Uniform real in [0,1) with 53 random bits; independent of the standard
// library's distribution implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Fisher-Yates using uniform_index so shuffles are reproducible across toolchains.
template <typename It>
void stable_shuffle(It first, It last, Rng& rng) {
  auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

}  // namespace guardsets

template <>
struct std::hash<guardsets::AsNumber> {
  std::size_t operator()(guardsets::AsNumber a) const noexcept { return std::hash<std::uint32_t>{}(a.value); }
};
