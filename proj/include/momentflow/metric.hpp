#pragma once

#include <cmath>
#include <functional>
#include <charconv>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "momentflow/binomial.hpp"
#include "momentflow/moment_core.hpp"

namespace mf {

inline constexpr int kDefaultMetricCutoff = 14;

/// Taylor coefficients c_0..c_max of g about a center, one column per order (dim x (max+1)).
template <ElementScalar Scalar>
using CoefficientProvider = std::function<Table<Scalar>(const Column<Scalar>& center, int max_order)>;

template <ElementScalar Scalar>
struct MetricSpec {
  std::string name;
  CoefficientProvider<Scalar> provider;
  int n_star = kDefaultMetricCutoff;
};

template <ElementScalar Scalar>
struct MetricResult {
  Element<Scalar> value;
  int truncation_order = 0;
  /// Norm of the last retained term.
  double tail_estimate = 0.0;
  bool converged = false;
};

/// Orders of the double sum in the update: by moment order n (rows) or by shift power k.
enum class SummationOrder { ByOrder, ByShiftPower };

/// g(x) = sum_j a_j x^j, coefficients given about zero.
template <ElementScalar Scalar>
MetricSpec<Scalar> polynomial_metric(std::vector<double> coeffs, int n_star = kDefaultMetricCutoff) {
  if (coeffs.empty()) coeffs.push_back(0.0);
  if (static_cast<int>(coeffs.size()) - 1 > kMaxIntegerOrder) {
    throw Error(ErrorCode::BadProviderSpec, "polynomial degree exceeds 62");
  }
  auto provider = [a = std::move(coeffs)](const Column<Scalar>& center, int max_order) {
    const int degree = static_cast<int>(a.size()) - 1;
    Table<Scalar> c = Table<Scalar>::Zero(center.size(), max_order + 1);
    const Table<Scalar> cp = detail::powers_of(center, degree);
    // c_n = sum_{j >= n} a_j C(j, n) center^(j - n)
    for (int n = 0; n <= std::min(max_order, degree); ++n) {
      for (int j = degree; j >= n; --j) {
        c.col(n) += Scalar(a[j] * binomial(j, n)) * cp.col(j - n);
      }
    }
    return c;
  };
  return {"poly", std::move(provider), n_star};
}

/// g(x) = a exp(b x).
template <ElementScalar Scalar>
MetricSpec<Scalar> exponential_metric(double a, double b, int n_star = kDefaultMetricCutoff) {
  auto provider = [a, b](const Column<Scalar>& center, int max_order) {
    Table<Scalar> c(center.size(), max_order + 1);
    c.col(0) = Scalar(a) * (Scalar(b) * center).exp();
    for (int n = 1; n <= max_order; ++n) c.col(n) = c.col(n - 1) * Scalar(b / n);
    return c;
  };
  return {"exp", std::move(provider), n_star};
}

/// g(x) = a sin(b x).
template <ElementScalar Scalar>
MetricSpec<Scalar> sinusoid_metric(double a, double b, int n_star = kDefaultMetricCutoff) {
  auto provider = [a, b](const Column<Scalar>& center, int max_order) {
    const Column<Scalar> arg = Scalar(b) * center;
    const Column<Scalar> s = arg.sin();
    const Column<Scalar> co = arg.cos();
    Table<Scalar> c(center.size(), max_order + 1);
    double scale = a;
    for (int n = 0; n <= max_order; ++n) {
      if (n > 0) scale *= b / n;
      // n-th derivative of sin cycles through sin, cos, -sin, -cos.
      switch (n % 4) {
        case 0: c.col(n) = Scalar(scale) * s; break;
        case 1: c.col(n) = Scalar(scale) * co; break;
        case 2: c.col(n) = Scalar(-scale) * s; break;
        default: c.col(n) = Scalar(-scale) * co; break;
      }
    }
    return c;
  };
  return {"sin", std::move(provider), n_star};
}

namespace detail {

inline std::vector<double> parse_coefficient_list(std::string_view text, std::string_view spec) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto token = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || end != token.data() + token.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::BadProviderSpec, "bad number '" + std::string(token) + "' in '" + std::string(spec) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parses "poly:c0,c1,...", "exp:a,b" or "sin:a,b".
template <ElementScalar Scalar>
MetricSpec<Scalar> parse_metric_spec(std::string_view spec, int n_star = kDefaultMetricCutoff) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::BadProviderSpec, "expected poly:..., exp:a,b or sin:a,b, got '" + std::string(spec) + "'");
  }
  const auto name = spec.substr(0, colon);
  const auto args = detail::parse_coefficient_list(spec.substr(colon + 1), spec);
  if (name == "poly") return polynomial_metric<Scalar>(args, n_star);
  if (args.size() != 2) throw Error(ErrorCode::BadProviderSpec, std::string(name) + " takes exactly two parameters a,b");
  if (name == "exp") return exponential_metric<Scalar>(args[0], args[1], n_star);
  if (name == "sin") return sinusoid_metric<Scalar>(args[0], args[1], n_star);
  throw Error(ErrorCode::BadProviderSpec, "unknown provider '" + std::string(name) + "'");
}

namespace detail {

template <ElementScalar Scalar>
void check_metric_ladder(const MomentState<Scalar>& state, const MetricSpec<Scalar>& spec) {
  if (spec.n_star < 0 || spec.n_star + 2 > kMaxIntegerOrder) {
    throw Error(ErrorCode::InvalidArgument, "metric cutoff must lie in 0..60");
  }
  if (spec.n_star >= 2 && state.ladder().max_integer_order() < spec.n_star) {
    throw Error(ErrorCode::LadderTooShort, "metric cutoff " + std::to_string(spec.n_star) +
                                               " needs integer orders 2.." + std::to_string(spec.n_star));
  }
}

/// Integer moments 0..n_max as columns, with M0 = 1 and M1 = 0.
template <ElementScalar Scalar>
Table<Scalar> integer_moment_table(const MomentState<Scalar>& state, int n_max) {
  const Index dim = state.type().dim;
  Table<Scalar> m(dim, n_max + 1);
  m.col(0).setOnes();
  if (n_max >= 1) m.col(1).setZero();
  for (int n = 2; n <= n_max; ++n) m.col(n) = state.moments().col(state.ladder().integer_index(n));
  return m;
}

/// Coefficients 0..n_star + 2; the two past the cutoff tell a finite series from a truncated one.
template <ElementScalar Scalar>
Table<Scalar> coefficients_with_lookahead(const MetricSpec<Scalar>& spec, const Column<Scalar>& center) {
  return spec.provider(center, spec.n_star + 2);
}

template <ElementScalar Scalar>
bool ends_before_cutoff(const Table<Scalar>& c, int n_star) {
  return (c.col(n_star + 1) == Scalar(0.0)).all() && (c.col(n_star + 2) == Scalar(0.0)).all();
}

inline bool tail_converged(bool finite_series, double tail, double value_norm) {
  return finite_series || tail == 0.0 || tail <= 1e-12 * value_norm;
}

}  // namespace detail

/// W = sum_{n <= n*} c_n M_n with coefficients taken about the current mean.
template <ElementScalar Scalar>
MetricResult<Scalar> metric_from_moments(const MomentState<Scalar>& state, const MetricSpec<Scalar>& spec) {
  detail::check_metric_ladder(state, spec);
  const int n_star = spec.n_star;
  const Table<Scalar> c = detail::coefficients_with_lookahead(spec, state.mean_column());
  const Table<Scalar> m = detail::integer_moment_table(state, n_star);
  Column<Scalar> w = Column<Scalar>::Zero(state.type().dim);
  for (int n = n_star; n >= 0; --n) w += c.col(n) * m.col(n);
  const double tail = column_norm<Scalar>((c.col(n_star) * m.col(n_star)).eval());
  return {Element<Scalar>(state.type(), w), n_star, tail, detail::tail_converged(detail::ends_before_cutoff(c, n_star), tail, column_norm<Scalar>(w))};
}

/// W' after appending the batch, for a (possibly new) function g' expanded about the new mean.
///
/// The truncated double sum reads only the old moments; g' itself is evaluated on the batch.
template <ElementScalar Scalar>
MetricResult<Scalar> metric_update(const MomentState<Scalar>& state, const Batch<Scalar>& batch,
                                   const MetricSpec<Scalar>& spec_new,
                                   SummationOrder order = SummationOrder::ByOrder) {
  const Index dim = batch.type().dim;
  const auto& w = batch.weights();
  double zp = 0.0;
  Column<Scalar> mean_p;
  Column<Scalar> sum = Column<Scalar>::Zero(dim);
  double tail = 0.0;
  const int n_star = spec_new.n_star;
  // With no old moments the value is a direct evaluation and nothing is truncated.
  bool finite_series = true;

  if (state.empty()) {
    detail::require_compatible(state, batch);
    zp = w.sum();
    detail::check_normalizer(zp, w.abs().maxCoeff());
  } else {
    detail::check_metric_ladder(state, spec_new);
    zp = update_normalizer(state, batch);
    mean_p = update_mean(state, batch, zp).values();
    const Column<Scalar> shift = state.mean_column() - mean_p;
    const Table<Scalar> c = detail::coefficients_with_lookahead(spec_new, mean_p);
    finite_series = detail::ends_before_cutoff(c, n_star);
    const Table<Scalar> m = detail::integer_moment_table(state, n_star);
    const Table<Scalar> sp = detail::powers_of(shift, n_star);
    const Scalar old_fraction(state.normalizer() / zp);

    if (order == SummationOrder::ByOrder) {
      for (int n = n_star; n >= 0; --n) {
        Column<Scalar> row = Column<Scalar>::Zero(dim);
        for (int k = n; k >= 0; --k) row += Scalar(binomial(n, k)) * m.col(n - k) * sp.col(k);
        row *= c.col(n);
        if (n == n_star) tail = column_norm<Scalar>((old_fraction * row).eval());
        sum += row;
      }
    } else {
      for (int k = n_star; k >= 0; --k) {
        Column<Scalar> inner = Column<Scalar>::Zero(dim);
        for (int j = n_star - k; j >= 0; --j) {
          inner += c.col(k + j) * Scalar(binomial(k + j, k)) * m.col(j);
        }
        sum += sp.col(k) * inner;
      }
      Column<Scalar> last = Column<Scalar>::Zero(dim);
      for (int k = n_star; k >= 0; --k) last += Scalar(binomial(n_star, k)) * m.col(n_star - k) * sp.col(k);
      tail = column_norm<Scalar>((old_fraction * c.col(n_star) * last).eval());
    }
    sum *= old_fraction;
  }

  // g'(x_i) is the zeroth Taylor coefficient about x_i itself.
  Column<Scalar> fresh = Column<Scalar>::Zero(dim);
  for (Index i = 0; i < batch.size(); ++i) {
    fresh += Scalar(w(i)) * spec_new.provider(batch.data().col(i), 0).col(0);
  }
  const Column<Scalar> value = sum + fresh / Scalar(zp);
  return {Element<Scalar>(batch.type(), value), n_star, tail,
          detail::tail_converged(finite_series, tail, column_norm<Scalar>(value))};
}

/// W' - W, where W uses the old function about the old mean.
template <ElementScalar Scalar>
Element<Scalar> metric_change(const MomentState<Scalar>& state, const Batch<Scalar>& batch,
                              const MetricSpec<Scalar>& spec_old, const MetricSpec<Scalar>& spec_new) {
  return elem_sub(metric_update(state, batch, spec_new).value, metric_from_moments(state, spec_old).value);
}

struct CoefficientConvergence {
  bool converged = false;
  /// |c_j| for j = n*..probe_depth.
  std::vector<double> tail_profile;
  /// Running sums of tail_profile.
  std::vector<double> partial_sums;
};

/// Advisory probe of whether the coefficient tail past n* is summable.
template <ElementScalar Scalar>
CoefficientConvergence check_coefficient_convergence(const MetricSpec<Scalar>& spec, const Element<Scalar>& center,
                                                     int probe_depth) {
  if (probe_depth < spec.n_star) throw Error(ErrorCode::InvalidArgument, "probe depth must be >= n*");
  const Table<Scalar> c = spec.provider(center.values(), probe_depth);
  CoefficientConvergence out;
  const double threshold = 1e-12 * column_norm<Scalar>(c.col(0).eval()) + 1e-12;
  double running = 0.0;
  for (int j = spec.n_star; j <= probe_depth; ++j) {
    const double delta = column_norm<Scalar>(c.col(j).eval());
    running += delta;
    out.tail_profile.push_back(delta);
    out.partial_sums.push_back(running);
  }
  const auto& d = out.tail_profile;
  const std::size_t m = d.size();
  // Cauchy-like: the final deltas are small and not growing.
  bool shrinking = true;
  for (std::size_t j = m >= 3 ? m - 3 : 0; j + 1 < m; ++j) shrinking = shrinking && d[j + 1] <= d[j];
  out.converged = std::isfinite(running) && shrinking && d.back() < threshold;
  return out;
}

}  // namespace mf
