#include "momentflow/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "momentflow/bench.hpp"
#include "momentflow/metric.hpp"
#include "momentflow/moment_core.hpp"
#include "momentflow/state_io.hpp"

namespace mf {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DomainError:
    case ErrorCode::ZeroNormalizer:
      return kExitNumeric;
    case ErrorCode::DigestMismatch:
    case ErrorCode::LockError:
    case ErrorCode::BadStateDocument:
      return kExitIntegrity;
    case ErrorCode::TimingUnstable:
      return kExitVerifyFailed;
    default:
      return kExitValidation;
  }
}

namespace {

std::string format_scalar(double v) { return format_decimal(v); }
std::string format_scalar(std::complex<double> v) {
  return "(" + format_decimal(v.real()) + "," + format_decimal(v.imag()) + ")";
}

template <ElementScalar Scalar>
std::string format_element(const Element<Scalar>& e) {
  if (e.type().kind != ElementKind::RealVector) return format_scalar(e[0]);
  std::string out = "[";
  for (Index i = 0; i < e.dim(); ++i) {
    if (i) out += ", ";
    out += format_scalar(e[i]);
  }
  return out + "]";
}

fs::path resolve_state_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MF_STATE"); env && *env) return env;
  throw Error(ErrorCode::InvalidArgument, "no state path: pass --state or set MF_STATE");
}

NumberFormat parse_format(const std::string& f) {
  if (f == "hex") return NumberFormat::HexFloat;
  if (f == "decimal") return NumberFormat::Decimal;
  throw Error(ErrorCode::InvalidArgument, "number format must be hex or decimal");
}

template <ElementScalar Scalar>
const Batch<Scalar>& batch_as(const AnyBatch& b) {
  return std::get<Batch<Scalar>>(b);
}

struct InitOptions {
  std::string state;
  std::string orders;
  std::string kind = "scalar";
  std::string format = "hex";
  bool force = false;
};

int cmd_init(const InitOptions& o, std::ostream& out) {
  const fs::path path = resolve_state_path(o.state);
  const OrderLadder ladder = OrderLadder::parse(o.orders);
  const ElementType type = parse_element_type(o.kind);
  if (fs::exists(path) && !o.force) {
    throw Error(ErrorCode::InvalidArgument, path.string() + " exists; pass --force to overwrite");
  }
  save_state(path, make_empty_state(type, ladder), parse_format(o.format));
  out << "initialized " << path.string() << " kind=" << to_string(type) << " orders=" << ladder.to_string() << " ("
      << ladder.size() << " orders)\n";
  return kExitOk;
}

struct AppendOptions {
  std::string state;
  std::string batch;
  int n_star = 12;
  double tol = 1e-10;
  std::string format = "hex";
};

int cmd_append(const AppendOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path path = resolve_state_path(o.state);
  StateLock lock(path);
  const AnyState state = load_state(path);
  const AnyBatch batch = read_batch_file(o.batch, state_type(state));
  const FractionalOptions fractional{o.n_star, o.tol};
  const AnyState next = std::visit(
      [&](const auto& s) -> AnyState {
        using Scalar = typename std::decay_t<decltype(s.moments())>::Scalar;
        auto result = append_batch(s, batch_as<Scalar>(batch), fractional);
        for (const auto& [order, report] : result.series_reports) {
          if (!report.converged) {
            err << "warning: order " << format_decimal(order) << " series did not converge within cutoff "
                << report.cutoff << "\n";
          }
        }
        return std::move(result.state);
      },
      state);
  save_state(path, next, parse_format(o.format));
  out << "appended " << std::visit([](const auto& b) { return b.size(); }, batch) << " records; count="
      << std::visit([](const auto& s) { return s.count(); }, next) << "\n";
  return kExitOk;
}

struct QueryOptions {
  std::string state;
  std::optional<double> order;
  bool normalizer = false;
  bool mean = false;
  bool count = false;
  std::string format = "plain";
};

int cmd_query(const QueryOptions& o, std::ostream& out) {
  const AnyState state = load_state(resolve_state_path(o.state));
  if (o.format == "full-doc") {
    out << serialize_state(state, NumberFormat::Decimal);
    return kExitOk;
  }
  if (o.format != "plain") throw Error(ErrorCode::InvalidArgument, "format must be plain or full-doc");
  if (!o.order && !o.normalizer && !o.mean && !o.count) {
    throw Error(ErrorCode::InvalidArgument, "query needs --order, --normalizer, --mean or --count");
  }
  std::visit(
      [&](const auto& s) {
        if (o.count) out << s.count() << "\n";
        if (o.normalizer) out << format_decimal(s.normalizer()) << "\n";
        if (o.mean) out << format_element(s.mean()) << "\n";
        if (o.order) {
          if (s.empty() && *o.order != 0.0 && *o.order != 1.0) {
            if (!s.ladder().contains(*o.order)) throw Error(ErrorCode::OrderNotInLadder, "order not in ladder");
            throw Error(ErrorCode::InvalidArgument, "state is empty");
          }
          out << format_element(s.moment(*o.order)) << "\n";
        }
      },
      state);
  return kExitOk;
}

struct VerifyOptions {
  std::string state;
  std::string data;
  double tol = 1e-9;
};

int cmd_verify(const VerifyOptions& o, std::ostream& out) {
  const AnyState state = load_state(resolve_state_path(o.state));
  const AnyBatch data = read_batch_file(o.data, state_type(state));
  return std::visit(
      [&](const auto& s) {
        using Scalar = typename std::decay_t<decltype(s.moments())>::Scalar;
        const Batch<Scalar>& full = batch_as<Scalar>(data);
        bool ok = true;
        if (s.empty()) {
          out << "count 0 expected " << full.size() << " MISMATCH\n";
          return static_cast<int>(kExitVerifyFailed);
        }
        const MomentState<Scalar> oracle = from_batch(full, s.ladder());
        const Column<Scalar> m2 = from_batch(full, OrderLadder::integer_range(2, 2)).moments().col(0);

        const bool count_ok = s.count() == oracle.count();
        ok = ok && count_ok;
        out << "count " << s.count() << " expected " << oracle.count() << (count_ok ? " ok" : " MISMATCH") << "\n";

        const auto report = [&](const std::string& label, double rel) {
          const bool pass = rel <= o.tol;
          ok = ok && pass;
          out << label << " rel_err=" << rel << (pass ? " ok" : " MISMATCH") << "\n";
        };
        report("normalizer", std::abs(s.normalizer() - oracle.normalizer()) / std::abs(oracle.normalizer()));
        {
          const double scale = std::max(column_norm<Scalar>(oracle.mean_column()), std::sqrt(column_norm<Scalar>(m2)));
          const double diff = column_norm<Scalar>((s.mean_column() - oracle.mean_column()).eval());
          report("mean", diff == 0.0 ? 0.0 : diff / scale);
        }
        const auto orders = s.ladder().orders();
        for (Index j = 0; j < s.ladder().size(); ++j) {
          report("order " + format_decimal(orders[j]),
                 relative_moment_error<Scalar>(s.moments().col(j), oracle.moments().col(j), m2, orders[j]));
        }
        return static_cast<int>(ok ? kExitOk : kExitVerifyFailed);
      },
      state);
}

struct MetricOptions {
  std::string state;
  std::string provider;
  std::string batch;
  int n_star = kDefaultMetricCutoff;
};

int cmd_metric(const MetricOptions& o, std::ostream& out) {
  const AnyState state = load_state(resolve_state_path(o.state));
  std::visit(
      [&](const auto& s) {
        using Scalar = typename std::decay_t<decltype(s.moments())>::Scalar;
        const MetricSpec<Scalar> spec = parse_metric_spec<Scalar>(o.provider, o.n_star);
        std::optional<MetricResult<Scalar>> result;
        if (o.batch.empty()) {
          if (s.empty()) throw Error(ErrorCode::InvalidArgument, "state is empty; pass --batch");
          result = metric_from_moments(s, spec);
        } else {
          const AnyBatch b = read_batch_file(o.batch, s.type());
          result = metric_update(s, batch_as<Scalar>(b), spec);
        }
        out << "value " << format_element(result->value) << "\n"
            << "n_star " << result->truncation_order << "\n"
            << "tail_estimate " << format_decimal(result->tail_estimate) << "\n"
            << "converged " << (result->converged ? "true" : "false") << "\n";
      },
      state);
  return kExitOk;
}

struct BenchOptions {
  std::string kind = "scalar";
  int base_size = 16;
  std::string orders = "2..20";
  std::vector<int> deltas{1};
  int repeats = 100;
  std::uint64_t seed = 7;
  int workers = 1;
  std::string out = "-";
};

int cmd_bench(const BenchOptions& o, std::ostream& out) {
  BenchScenario s;
  s.type = parse_element_type(o.kind);
  s.base_size = o.base_size;
  const OrderLadder ladder = OrderLadder::parse(o.orders);
  if (!ladder.integer_only()) throw Error(ErrorCode::BadLadderSpec, "bench orders must be integers");
  s.min_order = static_cast<int>(ladder.orders().front());
  s.max_order = ladder.max_integer_order();
  s.deltas = o.deltas;
  s.repeats = o.repeats;
  s.seed = o.seed;
  s.workers = o.workers;
  validate_scenario(s);
  const auto records = run_scenario(s);
  if (o.out == "-") {
    write_bench_csv(out, records);
  } else {
    std::ostringstream csv;
    write_bench_csv(csv, records);
    write_file_atomic(o.out, csv.str());
    out << "wrote " << records.size() << " rows to " << o.out << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming weighted central moments with O(batch) updates", "mf"};
  app.require_subcommand(1);

  InitOptions init;
  auto* init_cmd = app.add_subcommand("init", "Create an empty state document");
  init_cmd->add_option("--state,--out", init.state, "State file (default: $MF_STATE)");
  init_cmd->add_option("--orders", init.orders, "Ladder, e.g. 2..20 or 2..3,2.5")->required();
  init_cmd->add_option("--kind", init.kind, "scalar | complex | vector:d");
  init_cmd->add_option("--format", init.format, "hex | decimal");
  init_cmd->add_flag("--force", init.force, "Overwrite an existing file");

  AppendOptions append;
  auto* append_cmd = app.add_subcommand("append", "Append a CSV batch to a state");
  append_cmd->add_option("--state", append.state, "State file (default: $MF_STATE)");
  append_cmd->add_option("--batch", append.batch, "Batch CSV")->required();
  append_cmd->add_option("--n-star", append.n_star, "Cutoff for fractional orders");
  append_cmd->add_option("--tol", append.tol, "Series tail tolerance for fractional orders");
  append_cmd->add_option("--format", append.format, "hex | decimal");

  QueryOptions query;
  auto* query_cmd = app.add_subcommand("query", "Print moments or state fields");
  query_cmd->add_option("--state", query.state, "State file (default: $MF_STATE)");
  query_cmd->add_option("--order", query.order, "Moment order (0 and 1 always allowed)");
  query_cmd->add_flag("--normalizer", query.normalizer, "Print Z");
  query_cmd->add_flag("--mean", query.mean, "Print the weighted mean");
  query_cmd->add_flag("--count", query.count, "Print N");
  query_cmd->add_option("--format", query.format, "plain | full-doc");

  MetricOptions metric;
  auto* metric_cmd = app.add_subcommand("metric", "Evaluate a Taylor metric from the stored moments");
  metric_cmd->add_option("--state", metric.state, "State file (default: $MF_STATE)");
  metric_cmd->add_option("--provider", metric.provider, "poly:c0,c1,... | exp:a,b | sin:a,b")->required();
  metric_cmd->add_option("--batch", metric.batch, "Evaluate after appending this batch (state unchanged)");
  metric_cmd->add_option("--n-star", metric.n_star, "Truncation order");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Recompute from the full dataset and compare");
  verify_cmd->add_option("--state", verify.state, "State file (default: $MF_STATE)");
  verify_cmd->add_option("--data", verify.data, "Complete dataset CSV")->required();
  verify_cmd->add_option("--tol", verify.tol, "Relative tolerance");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time recomputation against incremental update");
  bench_cmd->add_option("--kind", bench.kind, "scalar | vector:d");
  bench_cmd->add_option("--N", bench.base_size, "Base dataset size");
  bench_cmd->add_option("--orders", bench.orders, "Order range lo..hi");
  bench_cmd->add_option("--deltas", bench.deltas, "Batch sizes")->delimiter(',');
  bench_cmd->add_option("--repeats", bench.repeats, "Repeats per cell (>= 10)");
  bench_cmd->add_option("--seed", bench.seed, "RNG seed");
  bench_cmd->add_option("--workers", bench.workers, "Cells timed in parallel");
  bench_cmd->add_option("--out", bench.out, "CSV path or - for stdout");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*init_cmd) return cmd_init(init, out);
    if (*append_cmd) return cmd_append(append, out, err);
    if (*query_cmd) return cmd_query(query, out);
    if (*metric_cmd) return cmd_metric(metric, out);
    if (*verify_cmd) return cmd_verify(verify, out);
    if (*bench_cmd) return cmd_bench(bench, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace mf
