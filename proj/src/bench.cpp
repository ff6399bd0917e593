#include "momentflow/bench.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "momentflow/moment_core.hpp"

namespace mf {

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kWarmups = 3;
constexpr double kMinMeasurementSeconds = 20e-6;
constexpr double kStabilityLimit = 0.5;
constexpr int kCellAttempts = 3;

volatile double g_sink = 0.0;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <typename F>
double seconds_per_call(F&& f, int inner) {
  const auto t0 = Clock::now();
  for (int i = 0; i < inner; ++i) f();
  const std::chrono::duration<double> dt = Clock::now() - t0;
  return dt.count() / inner;
}

/// Inner repetitions so that one measurement lasts at least kMinMeasurementSeconds.
template <typename F>
int calibrate(F&& f) {
  int inner = 1;
  while (inner < (1 << 20)) {
    if (seconds_per_call(f, inner) * inner >= kMinMeasurementSeconds) break;
    inner *= 2;
  }
  return inner;
}

void consume(const MomentState<double>& s) { g_sink = g_sink + s.moments()(0, s.moments().cols() - 1); }

double moment_tolerance(int order) { return order <= 10 ? 1e-8 : 1e-6; }

Batch<double> random_batch(ElementType type, int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Table<double> data(type.dim, size);
  for (Index c = 0; c < size; ++c) {
    for (Index i = 0; i < type.dim; ++i) data(i, c) = unit(rng);
  }
  Eigen::ArrayXd w(size);
  for (Index c = 0; c < size; ++c) w(c) = 1.0 - unit(rng);  // (0, 1]
  return Batch<double>(type, std::move(data), std::move(w));
}

struct CellTiming {
  double t_full = 0.0;
  double t_update = 0.0;
  double probe = 0.0;
  bool stable = true;
};

CellTiming time_cell(const BenchScenario& s, int order, int delta) {
  std::seed_seq seq{s.seed, static_cast<std::uint64_t>(order), static_cast<std::uint64_t>(delta),
                    static_cast<std::uint64_t>(s.base_size), static_cast<std::uint64_t>(s.type.dim)};
  std::mt19937_64 rng(seq);
  const OrderLadder ladder = OrderLadder::integer_range(2, order);

  std::vector<double> full_a, full_b, upd_a, upd_b;
  int inner_full = 0;
  int inner_update = 0;
  CellTiming out;

  for (int r = 0; r < s.repeats; ++r) {
    const Batch<double> base = random_batch(s.type, s.base_size, rng);
    const Batch<double> added = random_batch(s.type, delta, rng);
    const Batch<double> all = base.concat(added);
    const MomentState<double> state = from_batch(base, ladder);

    // Correctness gate: both paths must agree before anything is timed.
    const MomentState<double> updated = update_integer(state, added);
    const MomentState<double> recomputed = from_batch(all, ladder);
    const Column<double> m2 = recomputed.moments().col(ladder.integer_index(2));
    for (int n = 2; n <= order; ++n) {
      const Index j = ladder.integer_index(n);
      const double err = relative_moment_error<double>(updated.moments().col(j), recomputed.moments().col(j), m2, n);
      if (!(err <= moment_tolerance(n))) {
        throw Error(ErrorCode::DomainError, "bench gate: update and recomputation disagree at order " +
                                                std::to_string(n) + " (relative error " + std::to_string(err) + ")");
      }
    }
    if (r == 0) out.probe = updated.moments()(0, ladder.integer_index(order));

    const auto full_path = [&] { consume(from_batch(all, ladder)); };
    const auto update_path = [&] { consume(update_integer(state, added)); };
    for (int i = 0; i < kWarmups; ++i) {
      full_path();
      update_path();
    }
    if (r == 0) {
      inner_full = calibrate(full_path);
      inner_update = calibrate(update_path);
    }
    full_a.push_back(seconds_per_call(full_path, inner_full));
    upd_a.push_back(seconds_per_call(update_path, inner_update));
    full_b.push_back(seconds_per_call(full_path, inner_full));
    upd_b.push_back(seconds_per_call(update_path, inner_update));
  }

  const auto unstable = [](double a, double b) { return std::abs(a - b) > kStabilityLimit * std::min(a, b); };
  out.stable = !unstable(median(full_a), median(full_b)) && !unstable(median(upd_a), median(upd_b));
  full_a.insert(full_a.end(), full_b.begin(), full_b.end());
  upd_a.insert(upd_a.end(), upd_b.begin(), upd_b.end());
  out.t_full = median(std::move(full_a));
  out.t_update = median(std::move(upd_a));
  return out;
}

}  // namespace

void validate_scenario(const BenchScenario& s) {
  if (s.type.is_complex()) throw Error(ErrorCode::BadKindSpec, "bench scenarios use real kinds");
  if (s.repeats < 10) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 10");
  if (s.base_size < 1) throw Error(ErrorCode::InvalidArgument, "base size must be >= 1");
  if (s.deltas.empty()) throw Error(ErrorCode::InvalidArgument, "no deltas given");
  for (int d : s.deltas) {
    if (d < 1) throw Error(ErrorCode::InvalidArgument, "deltas must be >= 1");
  }
  if (s.min_order < 2 || s.max_order < s.min_order) throw Error(ErrorCode::InvalidArgument, "orders must be 2 <= lo <= hi");
  if (s.max_order > kMaxIntegerOrder) {
    throw Error(ErrorCode::MaxOrderExceeded, "bench orders are limited to 62");
  }
  if (s.workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
}

std::vector<BenchRecord> run_scenario(const BenchScenario& s) {
  validate_scenario(s);
  struct Cell {
    int delta;
    int order;
  };
  std::vector<Cell> cells;
  for (int d : s.deltas) {
    for (int n = s.min_order; n <= s.max_order; ++n) cells.push_back({d, n});
  }
  std::vector<BenchRecord> records(cells.size());

  const auto run_cell = [&](std::size_t i) {
    const Cell c = cells[i];
    CellTiming t;
    for (int attempt = 0; attempt < kCellAttempts; ++attempt) {
      t = time_cell(s, c.order, c.delta);
      if (t.stable) break;
    }
    if (!t.stable) {
      throw Error(ErrorCode::TimingUnstable, "timing runs disagree by more than 50% at order " +
                                                 std::to_string(c.order) + ", delta " + std::to_string(c.delta));
    }
    BenchRecord& rec = records[i];
    rec.type = s.type;
    rec.order = c.order;
    rec.delta = c.delta;
    rec.base_size = s.base_size;
    rec.t_full_s = t.t_full;
    rec.t_update_s = t.t_update;
    rec.speedup = t.t_full / t.t_update;
    rec.predicted_threshold = static_cast<double>(s.base_size + c.delta) / c.delta + 1.0;
    rec.seed = s.seed;
    rec.numeric_probe = t.probe;
  };

  if (s.workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    return records;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < s.workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
          try {
            run_cell(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records) {
  out << "kind,N,delta,order,t_full_s,t_update_s,speedup,predicted_threshold,seed\n";
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) {
    out << to_string(r.type) << ',' << r.base_size << ',' << r.delta << ',' << r.order << ',' << r.t_full_s << ','
        << r.t_update_s << ',' << r.speedup << ',' << r.predicted_threshold << ',' << r.seed << '\n';
  }
  out.precision(old_precision);
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "spearman needs paired samples");
  const auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

StorageReport storage_report(Index ladder_size, std::int64_t hypothetical_n, std::int64_t datum_bytes,
                             std::int64_t weight_bytes, std::int64_t delta) {
  StorageReport r;
  r.raw_bytes = hypothetical_n * (datum_bytes + weight_bytes);
  r.moment_bytes = datum_bytes;
  r.ladder_bytes = static_cast<std::int64_t>(ladder_size) * datum_bytes;
  r.update_bytes = r.ladder_bytes + delta * (datum_bytes + weight_bytes);
  r.raw_to_ladder_ratio = static_cast<double>(r.raw_bytes) / static_cast<double>(r.ladder_bytes);
  r.raw_to_moment_ratio = static_cast<double>(r.raw_bytes) / static_cast<double>(r.moment_bytes);
  return r;
}

template <ElementScalar Scalar>
StorageReport storage_report(const MomentState<Scalar>& state, std::int64_t hypothetical_n, std::int64_t datum_bytes,
                             std::int64_t weight_bytes, std::int64_t delta) {
  return storage_report(state.ladder().size(), hypothetical_n, datum_bytes, weight_bytes, delta);
}

template StorageReport storage_report(const MomentState<double>&, std::int64_t, std::int64_t, std::int64_t,
                                      std::int64_t);
template StorageReport storage_report(const MomentState<std::complex<double>>&, std::int64_t, std::int64_t,
                                      std::int64_t, std::int64_t);

std::vector<SweepCell> fractional_convergence_sweep(std::span<const double> spreads, std::span<const double> shifts,
                                                    double order, int n_star_max, double tol) {
  using C = std::complex<double>;
  constexpr double kCenter = 3.0;
  constexpr std::array<double, 6> kOffsets{-1.0, -0.75, -0.5, 0.5, 0.75, 1.0};
  if (n_star_max < 0) throw Error(ErrorCode::InvalidArgument, "n_star_max must be >= 0");

  std::vector<SweepCell> cells;
  for (double spread : spreads) {
    Table<C> data(1, static_cast<Index>(kOffsets.size()));
    for (std::size_t i = 0; i < kOffsets.size(); ++i) data(0, static_cast<Index>(i)) = C(kCenter + spread * kOffsets[i]);
    const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(data.cols());
    const Batch<C> base(ElementType::complex_scalar(), data, ones);
    const MomentState<C> second = from_batch(base, OrderLadder::integer_range(2, 2));
    const C mean = second.mean_column()(0);

    for (double shift : shifts) {
      SweepCell cell;
      cell.spread = spread;
      cell.requested_shift = shift;
      cell.std_dev = std::sqrt(std::abs(second.moments()(0, 0)));
      cell.min_deviation = (data - mean).abs().minCoeff();

      // Equal weight on one point at mean - 2 shift moves the mean by exactly shift.
      Table<C> y(1, 1);
      y(0, 0) = mean - C(2.0 * shift);
      const Batch<C> added(ElementType::complex_scalar(), y, Eigen::ArrayXd::Constant(1, second.normalizer()));

      std::vector<double> orders;
      if (shift == 0.0) {
        orders.push_back(order);
      } else {
        for (int k = 0; k <= n_star_max; ++k) {
          if (order - k != 0.0 && order - k != 1.0) orders.push_back(order - k);
        }
      }
      const OrderLadder ladder(orders);
      try {
        const MomentState<C> state = from_batch(base, ladder);
        const C oracle = from_batch(base.concat(added), OrderLadder({order})).moments()(0, 0);
        cell.shift = std::abs(mean - update_mean(state, added, update_normalizer(state, added))[0]);
        for (int k = 0; k <= n_star_max; ++k) {
          const auto r = update_fractional(state, added, order, k, tol);
          if (r.report.converged && !cell.converging_cutoff) cell.converging_cutoff = k;
          if (k == n_star_max) {
            const double err = std::abs(r.value[0] - oracle);
            cell.terminal_error = std::abs(oracle) > 0.0 ? err / std::abs(oracle) : err;
          }
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DomainError) throw;
        cell.defined = false;
        cell.shift = shift;
        cell.terminal_error = std::numeric_limits<double>::quiet_NaN();
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "spread,std_dev,min_deviation,shift,defined,converging_cutoff,terminal_error\n";
  for (const auto& c : cells) {
    out << c.spread << ',' << c.std_dev << ',' << c.min_deviation << ',' << c.shift << ',' << (c.defined ? 1 : 0)
        << ',' << (c.converging_cutoff ? std::to_string(*c.converging_cutoff) : std::string("none")) << ','
        << c.terminal_error << '\n';
  }
}

}  // namespace mf
