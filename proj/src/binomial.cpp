#include "momentflow/binomial.hpp"

#include <array>
#include <string>

#include "momentflow/error.hpp"

namespace mf {

namespace {

void check_order(int n, int k) {
  if (n > kMaxIntegerOrder) {
    throw Error(ErrorCode::MaxOrderExceeded, "binomial order " + std::to_string(n) + " exceeds 62");
  }
  if (n < 0 || k < 0) throw Error(ErrorCode::InvalidArgument, "negative binomial argument");
}

using Row = std::array<double, kMaxIntegerOrder + 1>;
using Triangle = std::array<Row, kMaxIntegerOrder + 1>;

const Triangle& table() {
  static const Triangle t = [] {
    Triangle out{};
    for (int n = 0; n <= kMaxIntegerOrder; ++n) {
      for (int k = 0; k <= kMaxIntegerOrder; ++k) {
        out[n][k] = k <= n ? static_cast<double>(binomial_exact(n, k)) : 0.0;
      }
    }
    return out;
  }();
  return t;
}

}  // namespace

std::uint64_t binomial_exact(int n, int k) {
  check_order(n, k);
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  // C(n, j+1) = C(n, j) * (n - j) / (j + 1) is exact at every step.
  unsigned __int128 c = 1;
  for (int j = 0; j < k; ++j) {
    c = c * static_cast<unsigned>(n - j) / static_cast<unsigned>(j + 1);
  }
  return static_cast<std::uint64_t>(c);
}

double binomial(int n, int k) {
  check_order(n, k);
  if (k > n) return 0.0;
  return table()[n][k];
}

const double* binomial_row(int n) {
  check_order(n, 0);
  return table()[n].data();
}

double generalized_binomial(double n, int k) {
  if (k < 0) return 0.0;
  double c = 1.0;
  for (int j = 0; j < k; ++j) {
    c *= (n - j) / static_cast<double>(j + 1);
  }
  return c;
}

}  // namespace mf
