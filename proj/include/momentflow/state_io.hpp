#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>

#include "momentflow/batch.hpp"
#include "momentflow/moment_state.hpp"

namespace mf {

using RealState = MomentState<double>;
using ComplexState = MomentState<std::complex<double>>;
using AnyState = std::variant<RealState, ComplexState>;
using AnyBatch = std::variant<Batch<double>, Batch<std::complex<double>>>;

inline constexpr int kStateFormatVersion = 1;

/// Hex-float is the normative encoding; decimal uses shortest round-trip digits.
enum class NumberFormat { HexFloat, Decimal };

std::string format_number(double v, NumberFormat format);
/// Accepts hex-float ("0x1.8p+1", "-0x1p-3") and decimal forms; throws BadStateDocument.
double parse_number(std::string_view text);

/// Shortest round-trip decimal, for human-facing output.
std::string format_decimal(double v);

AnyState make_empty_state(ElementType type, OrderLadder ladder);
ElementType state_type(const AnyState& state);

/// JSON document with a SHA-256 content digest over its canonical form.
std::string serialize_state(const AnyState& state, NumberFormat format = NumberFormat::HexFloat);
/// Throws DigestMismatch when the digest does not match, BadStateDocument on malformed input.
AnyState parse_state(std::string_view text);

std::string sha256_hex(std::string_view data);

/// Writes to a sibling temp file, fsyncs, then renames over the target.
/// before_rename runs between the fsync and the rename (fault-injection point).
void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       const std::function<void()>& before_rename = {});

AnyState load_state(const std::filesystem::path& path);
void save_state(const std::filesystem::path& path, const AnyState& state, NumberFormat format = NumberFormat::HexFloat,
                const std::function<void()>& before_rename = {});

/// CSV with header: scalar "x,weight"; complex "re,im,weight"; vector:d "x0,...,x{d-1},weight".
AnyBatch parse_batch_csv(std::istream& in, ElementType type);
AnyBatch read_batch_file(const std::filesystem::path& path, ElementType type);
std::string batch_csv_header(ElementType type);

/// Exclusive advisory lock on "<state>.lock"; throws LockError if already held.
class StateLock {
 public:
  explicit StateLock(const std::filesystem::path& state_path);
  ~StateLock();
  StateLock(const StateLock&) = delete;
  StateLock& operator=(const StateLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace mf
