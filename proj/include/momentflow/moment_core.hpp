#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "momentflow/batch.hpp"
#include "momentflow/binomial.hpp"
#include "momentflow/moment_state.hpp"

namespace mf {

/// Tail monitor output for a truncated fractional series.
struct ConvergenceReport {
  /// Norm of each retained bracket term, indexed by k.
  std::vector<double> term_norms;
  int cutoff = 0;
  /// The series ended exactly (non-negative integer order or zero mean shift).
  bool exact = false;
  bool converged = false;
};

template <ElementScalar Scalar>
struct FractionalUpdate {
  Element<Scalar> value;
  ConvergenceReport report;
};

struct FractionalOptions {
  int n_star = 12;
  double tol = 1e-10;
};

template <ElementScalar Scalar>
struct AppendResult {
  MomentState<Scalar> state;
  /// One report per series (non-recurrence) order, in ladder order.
  std::vector<std::pair<double, ConvergenceReport>> series_reports;
};

namespace detail {

inline void check_normalizer(double z, double max_abs_weight) {
  if (!std::isfinite(z) || !(std::abs(z) > kNormalizerEpsilon * max_abs_weight)) {
    throw Error(ErrorCode::ZeroNormalizer, "|Z| = " + std::to_string(std::abs(z)) + " is below " +
                                               std::to_string(kNormalizerEpsilon) + " * max|weight|");
  }
}

/// Columns of data (dim x N) weighted by w and summed: dim-vector.
template <typename Derived, ElementScalar Scalar = typename Derived::Scalar>
Column<Scalar> weighted_sum(const Eigen::ArrayBase<Derived>& data, const Eigen::ArrayXd& w) {
  if constexpr (is_complex_v<Scalar>) {
    return (data.matrix() * w.matrix().template cast<Scalar>()).array();
  } else {
    return (data.matrix() * w.matrix()).array();
  }
}

template <ElementScalar Scalar>
void require_compatible(const MomentState<Scalar>& state, const Batch<Scalar>& batch) {
  if (!(state.type() == batch.type())) {
    throw Error(ErrorCode::KindMismatch, "state holds " + to_string(state.type()) + ", batch holds " +
                                             to_string(batch.type()));
  }
}

template <ElementScalar Scalar>
Table<Scalar> powers_of(const Column<Scalar>& base, int max_power) {
  Table<Scalar> p(base.size(), max_power + 1);
  p.col(0).setOnes();
  for (int k = 1; k <= max_power; ++k) p.col(k) = p.col(k - 1) * base;
  return p;
}

/// sums[n] = sum over the points of w (x_i - center)^n for 2 <= n <= n_max, one component.
template <ElementScalar Scalar, typename Row>
void central_power_sums(const Row& x, const Eigen::ArrayXd& w, Scalar center, int n_max,
                        std::array<Scalar, kMaxIntegerOrder + 1>& sums) {
  // Few points: one pass over the points with all orders per point avoids temporaries.
  if (x.size() < 16) {
    std::fill(sums.begin(), sums.begin() + n_max + 1, Scalar(0.0));
    for (Index c = 0; c < x.size(); ++c) {
      const Scalar d = x(c) - center;
      Scalar p = w(c) * d * d;
      for (int n = 2; n <= n_max; ++n) {
        sums[n] += p;
        p *= d;
      }
    }
    return;
  }
  using Line = Eigen::Array<Scalar, 1, Eigen::Dynamic>;
  const Line d = x - center;
  Line p = w.transpose().template cast<Scalar>() * d * d;
  for (int n = 2; n <= n_max; ++n) {
    sums[n] = p.sum();
    if (n < n_max) p *= d;
  }
}

/// shifted[n] = sum over k of C(n,k) M_{n-k} s^k, with M_0 = 1, M_1 = 0, summed in descending k.
template <ElementScalar Scalar>
void recenter(const std::array<Scalar, kMaxIntegerOrder + 1>& m, Scalar s, int n_max,
              std::array<Scalar, kMaxIntegerOrder + 1>& shifted) {
  std::array<Scalar, kMaxIntegerOrder + 1> sp;
  sp[0] = Scalar(1.0);
  for (int k = 1; k <= n_max; ++k) sp[k] = sp[k - 1] * s;
  for (int n = 2; n <= n_max; ++n) {
    const double* c = binomial_row(n);
    // k = n contributes C(n,n) M0 s^n; k = n-1 would multiply M1 = 0.
    Scalar acc = sp[n];
    for (int k = n - 2; k >= 0; --k) acc += c[k] * m[n - k] * sp[k];
    shifted[n] = acc;
  }
}

/// Integer orders of one component of a state, indexed by order.
template <ElementScalar Scalar>
void load_orders(const MomentState<Scalar>& state, Index component, std::array<Scalar, kMaxIntegerOrder + 1>& m) {
  const auto& ladder = state.ladder();
  m[0] = Scalar(1.0);
  m[1] = Scalar(0.0);
  for (int n = 2; n <= ladder.max_integer_order(); ++n) m[n] = state.moments()(component, ladder.integer_index(n));
}

/// Largest cutoff K <= n_star for which every term k <= K can be formed from the ladder.
template <ElementScalar Scalar>
int available_cutoff(const MomentState<Scalar>& state, double n, int n_star, bool zero_shift) {
  if (zero_shift) return n_star;
  for (int k = 0; k <= n_star; ++k) {
    const double q = n - k;
    if (q == 0.0 || q == 1.0) continue;
    if (generalized_binomial(n, k) == 0.0) continue;
    if (!state.ladder().contains(q)) return k - 1;
  }
  return n_star;
}

/// The bracket sum over k of C(n,k) M_{n-k} s^k, summed smallest-k-last.
template <ElementScalar Scalar>
Column<Scalar> fractional_bracket(const MomentState<Scalar>& state, const Column<Scalar>& shift, double n, int n_star,
                                  double tol, ConvergenceReport& report) {
  const Index dim = state.type().dim;
  const bool zero_shift = (shift == Scalar(0.0)).all();
  const bool integral_order = n >= 0.0 && n == std::floor(n);
  report = ConvergenceReport{};
  report.cutoff = n_star;
  report.exact = zero_shift || (integral_order && n_star >= n);

  std::vector<Column<Scalar>> terms;
  terms.reserve(static_cast<std::size_t>(n_star) + 1);
  Column<Scalar> shift_power = Column<Scalar>::Ones(dim);
  for (int k = 0; k <= n_star; ++k) {
    if (k > 0) shift_power *= shift;
    const double q = n - k;
    const double c = generalized_binomial(n, k);
    Column<Scalar> term = Column<Scalar>::Zero(dim);
    if (c != 0.0 && q != 1.0 && !(zero_shift && k > 0)) {
      if (q == 0.0) {
        term = Scalar(c) * shift_power;
      } else {
        const auto idx = state.ladder().index_of(q);
        if (!idx) {
          throw Error(ErrorCode::LadderTooShort,
                      "fractional update needs order " + std::to_string(q) + " in ladder " + state.ladder().to_string());
        }
        term = Scalar(c) * state.moments().col(*idx) * shift_power;
      }
    }
    report.term_norms.push_back(column_norm<Scalar>(term));
    terms.push_back(std::move(term));
  }

  Column<Scalar> sum = Column<Scalar>::Zero(dim);
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) sum += *it;

  if (report.exact) {
    report.converged = true;
  } else if (terms.size() >= 3) {
    Column<Scalar> partial = Column<Scalar>::Zero(dim);
    std::vector<double> partial_norms;
    for (const auto& t : terms) {
      partial += t;
      partial_norms.push_back(column_norm<Scalar>(partial));
    }
    const std::size_t m = terms.size();
    report.converged = true;
    for (std::size_t j = m - 3; j < m; ++j) {
      if (!(report.term_norms[j] < tol * partial_norms[j])) report.converged = false;
    }
  }
  return sum;
}

/// Shared advance: Z', mean', recurrence orders, and (optionally) series orders.
template <ElementScalar Scalar>
AppendResult<Scalar> advance(const MomentState<Scalar>& state, const Batch<Scalar>& batch,
                             const FractionalOptions& options);

}  // namespace detail

/// From-scratch evaluation of every ladder order over the batch (the oracle path).
template <ElementScalar Scalar>
MomentState<Scalar> from_batch(const Batch<Scalar>& batch, const OrderLadder& ladder) {
  const auto& w = batch.weights();
  const double max_w = w.abs().maxCoeff();
  const double z = w.sum();
  detail::check_normalizer(z, max_w);
  const Index dim = batch.type().dim;

  Column<Scalar> mean = detail::weighted_sum(batch.data(), w) / Scalar(z);
  Table<Scalar> moments(dim, ladder.size());

  const int n_max = ladder.max_integer_order();
  Column<Scalar> m2;
  if (n_max >= 2) {
    std::array<Scalar, kMaxIntegerOrder + 1> sums;
    for (Index i = 0; i < dim; ++i) {
      detail::central_power_sums(batch.data().row(i), w, mean(i), n_max, sums);
      for (int n = 2; n <= n_max; ++n) moments(i, ladder.integer_index(n)) = sums[n] / z;
    }
    m2 = moments.col(ladder.integer_index(2));
  }

  if (ladder.integer_only()) {
    MomentBody<Scalar> body{z, std::move(mean), static_cast<std::int64_t>(batch.size()), std::move(moments), max_w};
    return MomentState<Scalar>(batch.type(), ladder, std::move(body));
  }

  const Table<Scalar> dev = batch.data().colwise() - mean;
  const auto orders = ladder.orders();
  for (Index j = 0; j < ladder.size(); ++j) {
    const double q = orders[j];
    if (is_recurrence_order(q)) continue;
    if (q < 0.0) {
      if (m2.size() == 0) m2 = detail::weighted_sum((dev * dev).eval(), w) / Scalar(z);
      for (Index i = 0; i < dim; ++i) {
        const double floor = 1e-9 * std::sqrt(std::abs(m2(i)));
        if ((dev.row(i).abs() < floor).any() || (dev.row(i) == Scalar(0.0)).any()) {
          throw Error(ErrorCode::DomainError, "negative order " + std::to_string(q) +
                                                  " requested with a deviation at the pole x = mean");
        }
      }
    }
    Table<Scalar> p(dim, dev.cols());
    for (Index c = 0; c < dev.cols(); ++c) {
      for (Index i = 0; i < dim; ++i) p(i, c) = component_pow(dev(i, c), q);
    }
    moments.col(j) = detail::weighted_sum(p, w) / Scalar(z);
  }

  MomentBody<Scalar> body{z, std::move(mean), static_cast<std::int64_t>(batch.size()), std::move(moments), max_w};
  return MomentState<Scalar>(batch.type(), ladder, std::move(body));
}

/// Z' = Z + sum of the batch weights.
template <ElementScalar Scalar>
double update_normalizer(const MomentState<Scalar>& state, const Batch<Scalar>& batch) {
  detail::require_compatible(state, batch);
  const double zp = state.normalizer() + batch.weights().sum();
  detail::check_normalizer(zp, std::max(state.max_abs_weight(), batch.weights().abs().maxCoeff()));
  return zp;
}

/// mean' = (Z/Z') mean + (1/Z') sum f x over the batch.
template <ElementScalar Scalar>
Element<Scalar> update_mean(const MomentState<Scalar>& state, const Batch<Scalar>& batch, double zp) {
  detail::require_compatible(state, batch);
  const Column<Scalar> mean = Scalar(state.normalizer() / zp) * state.mean_column() +
                              detail::weighted_sum(batch.data(), batch.weights()) / Scalar(zp);
  return Element<Scalar>(state.type(), mean);
}

template <ElementScalar Scalar>
AppendResult<Scalar> detail::advance(const MomentState<Scalar>& state, const Batch<Scalar>& batch,
                                     const FractionalOptions& options) {
  if (state.empty()) {
    detail::require_compatible(state, batch);
    return {from_batch(batch, state.ladder()), {}};
  }
  const double zp = update_normalizer(state, batch);
  const auto& w = batch.weights();
  const double old_fraction = state.normalizer() / zp;
  Column<Scalar> mean_p = Scalar(old_fraction) * state.mean_column();
  if constexpr (is_complex_v<Scalar>) {
    mean_p.matrix().noalias() += batch.data().matrix() * (w / zp).matrix().template cast<Scalar>();
  } else {
    mean_p.matrix().noalias() += batch.data().matrix() * (w / zp).matrix();
  }
  const auto& ladder = state.ladder();
  const Index dim = state.type().dim;

  Table<Scalar> out(dim, ladder.size());
  const int n_max = ladder.max_integer_order();
  if (n_max >= 2) {
    std::array<Scalar, kMaxIntegerOrder + 1> old, shifted, sums;
    for (Index i = 0; i < dim; ++i) {
      detail::load_orders(state, i, old);
      detail::recenter(old, state.mean_column()(i) - mean_p(i), n_max, shifted);
      detail::central_power_sums(batch.data().row(i), w, mean_p(i), n_max, sums);
      for (int n = 2; n <= n_max; ++n) out(i, ladder.integer_index(n)) = old_fraction * shifted[n] + sums[n] / zp;
    }
  }

  std::vector<std::pair<double, ConvergenceReport>> reports;
  if (ladder.integer_only()) {
    MomentBody<Scalar> body{zp, std::move(mean_p), state.count() + batch.size(), std::move(out),
                            std::max(state.max_abs_weight(), w.abs().maxCoeff())};
    return {MomentState<Scalar>(state.type(), ladder, std::move(body)), std::move(reports)};
  }

  const Column<Scalar> shift = state.mean_column() - mean_p;
  const Table<Scalar> dev = batch.data().colwise() - mean_p;
  const auto orders = ladder.orders();
  const bool zero_shift = (shift == Scalar(0.0)).all();
  for (Index j = 0; j < ladder.size(); ++j) {
    const double q = orders[j];
    if (is_recurrence_order(q)) continue;
    const int cutoff = detail::available_cutoff(state, q, options.n_star, zero_shift);
    ConvergenceReport report;
    Column<Scalar> bracket = Column<Scalar>::Zero(dim);
    if (cutoff >= 0) {
      bracket = detail::fractional_bracket(state, shift, q, cutoff, options.tol, report);
    } else {
      report.cutoff = cutoff;
    }
    Table<Scalar> p(dim, dev.cols());
    for (Index c = 0; c < dev.cols(); ++c) {
      for (Index i = 0; i < dim; ++i) p(i, c) = component_pow(dev(i, c), q);
    }
    out.col(j) = Scalar(old_fraction) * bracket + detail::weighted_sum(p, w) / Scalar(zp);
    reports.emplace_back(q, std::move(report));
  }

  MomentBody<Scalar> body{zp, mean_p, state.count() + batch.size(), std::move(out),
                          std::max(state.max_abs_weight(), w.abs().maxCoeff())};
  return {MomentState<Scalar>(state.type(), ladder, std::move(body)), std::move(reports)};
}

/// Binomial re-centering update of every integer order; reads only the batch and the old moments.
template <ElementScalar Scalar>
MomentState<Scalar> update_integer(const MomentState<Scalar>& state, const Batch<Scalar>& batch) {
  if (state.empty()) throw Error(ErrorCode::InvalidArgument, "update_integer needs a non-empty state");
  if (!state.ladder().integer_only()) {
    throw Error(ErrorCode::LadderMismatch, "update_integer needs an integer-only ladder; use append_batch");
  }
  return detail::advance(state, batch, FractionalOptions{}).state;
}

/// Appends a batch to any state: empty states are built from scratch, recurrence orders use
/// the binomial update and series orders the truncated fractional series (cutoff limited by
/// the orders present in the ladder).
template <ElementScalar Scalar>
AppendResult<Scalar> append_batch(const MomentState<Scalar>& state, const Batch<Scalar>& batch,
                                  const FractionalOptions& options = {}) {
  return detail::advance(state, batch, options);
}

/// M_n' for a real order n through the truncated generalized binomial series.
///
/// The state ladder must hold every order n - k (k <= n_star) with a non-zero coefficient,
/// except the implicit orders 0 and 1. Non-convergence is reported, not thrown.
template <ElementScalar Scalar>
FractionalUpdate<Scalar> update_fractional(const MomentState<Scalar>& state, const Batch<Scalar>& batch, double n,
                                           int n_star, double tol) {
  if (state.empty()) throw Error(ErrorCode::InvalidArgument, "update_fractional needs a non-empty state");
  if (n_star < 0) throw Error(ErrorCode::InvalidArgument, "cutoff must be >= 0");
  const double zp = update_normalizer(state, batch);
  const Column<Scalar> mean_p = update_mean(state, batch, zp).values();
  const Column<Scalar> shift = state.mean_column() - mean_p;

  ConvergenceReport report;
  const Column<Scalar> bracket = detail::fractional_bracket(state, shift, n, n_star, tol, report);
  const Table<Scalar> dev = batch.data().colwise() - mean_p;
  Table<Scalar> p(dev.rows(), dev.cols());
  for (Index c = 0; c < dev.cols(); ++c) {
    for (Index i = 0; i < dev.rows(); ++i) p(i, c) = component_pow(dev(i, c), n);
  }
  const Column<Scalar> value =
      Scalar(state.normalizer() / zp) * bracket + detail::weighted_sum(p, batch.weights()) / Scalar(zp);
  return {Element<Scalar>(state.type(), value), std::move(report)};
}

/// Combines two accumulators over disjoint data by re-centering both onto the joint mean.
template <ElementScalar Scalar>
MomentState<Scalar> merge_states(const MomentState<Scalar>& a, const MomentState<Scalar>& b) {
  if (!(a.type() == b.type())) throw Error(ErrorCode::KindMismatch, "cannot merge different kinds");
  if (!(a.ladder() == b.ladder()) || !a.ladder().integer_only()) {
    throw Error(ErrorCode::LadderMismatch, "merge needs identical integer-only ladders");
  }
  if (b.empty()) return a;
  if (a.empty()) return b;

  const double z = a.normalizer() + b.normalizer();
  const double max_w = std::max(a.max_abs_weight(), b.max_abs_weight());
  detail::check_normalizer(z, max_w);
  const double fa = a.normalizer() / z;
  const double fb = b.normalizer() / z;
  const Column<Scalar> mean = Scalar(fa) * a.mean_column() + Scalar(fb) * b.mean_column();

  const auto& ladder = a.ladder();
  const int n_max = ladder.max_integer_order();
  Table<Scalar> out(a.type().dim, ladder.size());
  std::array<Scalar, kMaxIntegerOrder + 1> ma, mb, sa, sb;
  for (Index i = 0; i < a.type().dim; ++i) {
    detail::load_orders(a, i, ma);
    detail::load_orders(b, i, mb);
    detail::recenter(ma, a.mean_column()(i) - mean(i), n_max, sa);
    detail::recenter(mb, b.mean_column()(i) - mean(i), n_max, sb);
    for (int n = 2; n <= n_max; ++n) out(i, ladder.integer_index(n)) = fa * sa[n] + fb * sb[n];
  }
  MomentBody<Scalar> body{z, mean, a.count() + b.count(), std::move(out), max_w};
  return MomentState<Scalar>(a.type(), ladder, std::move(body));
}

/// Largest per-component |value - oracle| / max(|oracle|, |M2|^(order/2)).
template <ElementScalar Scalar>
double relative_moment_error(const Column<Scalar>& value, const Column<Scalar>& oracle, const Column<Scalar>& m2,
                             double order) {
  double worst = 0.0;
  for (Index i = 0; i < value.size(); ++i) {
    const double err = std::abs(value(i) - oracle(i));
    const double scale = std::max(std::abs(oracle(i)), std::pow(std::abs(m2(i)), order / 2.0));
    const double rel = err == 0.0 ? 0.0 : (scale > 0.0 ? err / scale : std::numeric_limits<double>::infinity());
    if (std::isnan(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace mf
