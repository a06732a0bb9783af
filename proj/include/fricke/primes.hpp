#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "fricke/error.hpp"

namespace fricke {

/// All primes p < bound in increasing order (sieve of Eratosthenes).
inline std::vector<int> primes_below(int bound) {
  if (bound < 2) throw ArgumentError("primes_below: bound must be >= 2");
  std::vector<bool> composite(static_cast<std::size_t>(bound), false);
  std::vector<int> out;
  for (int i = 2; i < bound; ++i) {
    if (composite[i]) continue;
    out.push_back(i);
    for (long long j = static_cast<long long>(i) * i; j < bound; j += i) composite[j] = true;
  }
  return out;
}

/// Distinct prime divisors of n, ascending. Empty for n = 1.
inline std::vector<int> prime_divisors(int n) {
  std::vector<int> out;
  for (int p = 2; static_cast<long long>(p) * p <= n; ++p) {
    if (n % p == 0) {
      out.push_back(p);
      while (n % p == 0) n /= p;
    }
  }
  if (n > 1) out.push_back(n);
  return out;
}

inline bool is_squarefree(int n) {
  for (int p = 2; static_cast<long long>(p) * p <= n; ++p) {
    if (n % (p * p) == 0) return false;
    if (n % p == 0) n /= p;
  }
  return true;
}

inline bool coprime(int a, int b) { return std::gcd(a, b) == 1; }

}  // namespace fricke
