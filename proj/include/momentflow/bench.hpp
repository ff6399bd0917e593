#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "momentflow/moment_state.hpp"

namespace mf {

struct BenchScenario {
  /// scalar or vector:d (real kinds only).
  ElementType type = ElementType::real_scalar();
  int base_size = 16;
  std::vector<int> deltas{1};
  int min_order = 2;
  int max_order = 20;
  int repeats = 100;
  std::uint64_t seed = 7;
  /// Cells run on this many threads; each cell's timing stays single-threaded.
  int workers = 1;
};

struct BenchRecord {
  ElementType type;
  int order = 0;
  int delta = 0;
  int base_size = 0;
  double t_full_s = 0.0;
  double t_update_s = 0.0;
  double speedup = 0.0;
  double predicted_threshold = 0.0;
  std::uint64_t seed = 0;
  /// M_order' of the first repeat via the update path; depends only on the seed.
  double numeric_probe = 0.0;
};

/// Times from_batch on X' against update_integer for every (order, delta) cell.
///
/// The ladder for order n is 2..n. Each repeat draws fresh uniform [0,1] data and
/// weights in (0,1]; both paths must agree numerically before a cell is timed.
/// Records are ordered by delta, then order.
std::vector<BenchRecord> run_scenario(const BenchScenario& scenario);

void validate_scenario(const BenchScenario& scenario);

/// kind,N,delta,order,t_full_s,t_update_s,speedup,predicted_threshold,seed
void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records);

/// Spearman rank correlation; ties get averaged ranks.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct StorageReport {
  std::int64_t raw_bytes = 0;        ///< N (size(x) + size(f))
  std::int64_t moment_bytes = 0;     ///< size of one moment
  std::int64_t ladder_bytes = 0;     ///< every stored moment
  std::int64_t update_bytes = 0;     ///< ladder size * size(M) + delta (size(x) + size(f))
  double raw_to_ladder_ratio = 0.0;
  double raw_to_moment_ratio = 0.0;
};

/// Storage comparison for a state's ladder. A moment has the size of one datum.
template <ElementScalar Scalar>
StorageReport storage_report(const MomentState<Scalar>& state, std::int64_t hypothetical_n, std::int64_t datum_bytes,
                             std::int64_t weight_bytes, std::int64_t delta = 1);

StorageReport storage_report(Index ladder_size, std::int64_t hypothetical_n, std::int64_t datum_bytes,
                             std::int64_t weight_bytes, std::int64_t delta = 1);

struct SweepCell {
  double spread = 0.0;
  double requested_shift = 0.0;
  double std_dev = 0.0;           ///< sqrt |M2| of the base data
  double shift = 0.0;             ///< realized |mean - mean'|
  double min_deviation = 0.0;     ///< min |x_i - mean| of the base data
  bool defined = true;            ///< false when the required moments do not exist
  std::optional<int> converging_cutoff;
  double terminal_error = 0.0;    ///< relative error vs the oracle at n_star_max
};

/// Maps where the truncated fractional series converges, on complex-kind data
/// centered at 3 with offsets spread * {-1, -0.75, -0.5, 0.5, 0.75, 1}.
std::vector<SweepCell> fractional_convergence_sweep(std::span<const double> spreads, std::span<const double> shifts,
                                                    double order, int n_star_max, double tol = 1e-10);

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells);

}  // namespace mf
