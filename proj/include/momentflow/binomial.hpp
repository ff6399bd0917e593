#pragma once

#include <cstdint>

namespace mf {

/// Largest integer moment order whose binomial row fits exactly in 64 bits.
inline constexpr int kMaxIntegerOrder = 62;

/// Exact C(n, k) by the multiplicative recurrence. Throws MaxOrderExceeded for n > 62.
std::uint64_t binomial_exact(int n, int k);

/// C(n, k) as a double, read from a precomputed table (n <= 62).
double binomial(int n, int k);

/// Row n of the table (entries k = 0..62, zero for k > n). n must lie in 0..62.
const double* binomial_row(int n);

/// Generalized coefficient n(n-1)...(n-k+1)/k! for real n.
double generalized_binomial(double n, int k);

}  // namespace mf
