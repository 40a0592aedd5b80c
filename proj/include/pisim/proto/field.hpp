#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

namespace pisim::proto {

// Element of the prime field Z_P. Signed interpretation: [0, P/2] non-negative, (P/2, P) negative.
template <std::uint64_t P>
struct Fp {
  static_assert(P > 2 && P < (std::uint64_t{1} << 62), "modulus must be an odd prime below 2^62");
  static constexpr std::uint64_t modulus = P;

  std::uint64_t v = 0;

  constexpr Fp() = default;
  constexpr explicit Fp(std::uint64_t x) : v(x % P) {}

  static constexpr Fp from_signed(std::int64_t x) {
    const auto m = static_cast<std::int64_t>(P);
    std::int64_t r = x % m;
    if (r < 0) r += m;
    return Fp(static_cast<std::uint64_t>(r));
  }
  constexpr std::int64_t to_signed() const {
    return v > P / 2 ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(P) : static_cast<std::int64_t>(v);
  }

  friend constexpr Fp operator+(Fp a, Fp b) {
    std::uint64_t s = a.v + b.v;
    if (s >= P) s -= P;
    Fp r;
    r.v = s;
    return r;
  }
  friend constexpr Fp operator-(Fp a, Fp b) {
    Fp r;
    r.v = a.v >= b.v ? a.v - b.v : a.v + P - b.v;
    return r;
  }
  friend constexpr Fp operator*(Fp a, Fp b) {
    Fp r;
    r.v = static_cast<std::uint64_t>((static_cast<unsigned __int128>(a.v) * b.v) % P);
    return r;
  }
  constexpr Fp operator-() const { return Fp{} - *this; }
  constexpr Fp& operator+=(Fp b) { return *this = *this + b; }
  constexpr Fp& operator-=(Fp b) { return *this = *this - b; }
  constexpr Fp& operator*=(Fp b) { return *this = *this * b; }
  friend constexpr bool operator==(Fp a, Fp b) { return a.v == b.v; }

  friend std::ostream& operator<<(std::ostream& os, Fp a) { return os << a.v; }
};

// 2^61 - 1: products of two reduced elements fit in 128 bits, and signed magnitudes up to
// ~1.15e18 are representable.
inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;
using Elem = Fp<kMersenne61>;

template <class F, class Rng>
F uniform(Rng& rng) {
  std::uniform_int_distribution<std::uint64_t> d(0, F::modulus - 1);
  F r;
  r.v = d(rng);
  return r;
}

template <class F, class Rng>
std::vector<F> uniform_vector(std::size_t n, Rng& rng) {
  std::vector<F> out(n);
  for (auto& x : out) x = uniform<F>(rng);
  return out;
}

}  // namespace pisim::proto
