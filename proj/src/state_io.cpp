#include "momentflow/state_io.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace mf {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad_document(const std::string& what) { throw Error(ErrorCode::BadStateDocument, what); }

template <ElementScalar Scalar>
json encode_column(const Column<Scalar>& c, const ElementType& type, NumberFormat fmt) {
  if constexpr (is_complex_v<Scalar>) {
    return json::array({format_number(c(0).real(), fmt), format_number(c(0).imag(), fmt)});
  } else {
    if (type.kind == ElementKind::RealScalar) return format_number(c(0), fmt);
    json arr = json::array();
    for (Index i = 0; i < c.size(); ++i) arr.push_back(format_number(c(i), fmt));
    return arr;
  }
}

std::string number_text(const json& j) {
  if (!j.is_string()) bad_document("numbers must be encoded as strings");
  return j.get<std::string>();
}

template <ElementScalar Scalar>
Column<Scalar> decode_column(const json& j, const ElementType& type) {
  Column<Scalar> c(type.dim);
  if constexpr (is_complex_v<Scalar>) {
    if (!j.is_array() || j.size() != 2) bad_document("complex values are [re, im] pairs");
    c(0) = Scalar(parse_number(number_text(j[0])), parse_number(number_text(j[1])));
  } else {
    if (type.kind == ElementKind::RealScalar) {
      c(0) = parse_number(number_text(j));
    } else {
      if (!j.is_array() || static_cast<Index>(j.size()) != type.dim) bad_document("vector value has wrong length");
      for (Index i = 0; i < type.dim; ++i) c(i) = parse_number(number_text(j[static_cast<std::size_t>(i)]));
    }
  }
  return c;
}

template <ElementScalar Scalar>
json encode_state(const MomentState<Scalar>& s, NumberFormat fmt) {
  const ElementType& type = s.type();
  json doc;
  doc["format_version"] = kStateFormatVersion;
  doc["element_kind"] = type.kind == ElementKind::RealVector ? "vector" : to_string(type);
  if (type.kind == ElementKind::RealVector) doc["vector_dim"] = type.dim;
  doc["number_format"] = fmt == NumberFormat::HexFloat ? "hex" : "decimal";
  json ladder = json::array();
  for (double o : s.ladder().orders()) ladder.push_back(format_number(o, fmt));
  doc["ladder"] = ladder;
  doc["empty"] = s.empty();
  if (!s.empty()) {
    doc["normalizer"] = format_number(s.normalizer(), fmt);
    doc["max_abs_weight"] = format_number(s.max_abs_weight(), fmt);
    doc["count"] = s.count();
    doc["mean"] = encode_column<Scalar>(s.mean_column(), type, fmt);
    json moments = json::array();
    const auto orders = s.ladder().orders();
    for (Index j = 0; j < s.ladder().size(); ++j) {
      moments.push_back({{"order", format_number(orders[j], fmt)},
                         {"value", encode_column<Scalar>(s.moments().col(j), type, fmt)}});
    }
    doc["moments"] = moments;
  }
  return doc;
}

template <ElementScalar Scalar>
MomentState<Scalar> decode_state(const json& doc, const ElementType& type, const OrderLadder& ladder) {
  if (doc.at("empty").get<bool>()) return MomentState<Scalar>(type, ladder);
  MomentBody<Scalar> body;
  body.normalizer = parse_number(number_text(doc.at("normalizer")));
  body.max_abs_weight = parse_number(number_text(doc.at("max_abs_weight")));
  body.count = doc.at("count").get<std::int64_t>();
  body.mean = decode_column<Scalar>(doc.at("mean"), type);
  const json& moments = doc.at("moments");
  if (!moments.is_array() || static_cast<Index>(moments.size()) != ladder.size()) {
    bad_document("moment list does not match ladder");
  }
  body.moments.resize(type.dim, ladder.size());
  for (const json& m : moments) {
    const double order = parse_number(number_text(m.at("order")));
    const auto idx = ladder.index_of(order);
    if (!idx) bad_document("moment order outside ladder");
    body.moments.col(*idx) = decode_column<Scalar>(m.at("value"), type);
  }
  return MomentState<Scalar>(type, ladder, std::move(body));
}

std::string canonical_form(json doc) {
  doc.erase("content_digest");
  return doc.dump();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_finite_decimal(const std::string& text, std::size_t line_no) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::BadBatchFile, "line " + std::to_string(line_no) + ": '" + text + "' is not a finite number");
  }
  return v;
}

}  // namespace

std::string format_number(double v, NumberFormat format) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  if (format == NumberFormat::Decimal) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  }
  const bool negative = std::signbit(v);
  const auto res = std::to_chars(buf, buf + sizeof(buf), std::abs(v), std::chars_format::hex);
  return (negative ? "-0x" : "0x") + std::string(buf, res.ptr);
}

std::string format_decimal(double v) { return format_number(v, NumberFormat::Decimal); }

double parse_number(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  bool negative = false;
  std::string_view body = text;
  if (body.starts_with('-')) {
    negative = true;
    body.remove_prefix(1);
  }
  double v = 0.0;
  std::from_chars_result res{};
  if (body.starts_with("0x") || body.starts_with("0X")) {
    body.remove_prefix(2);
    res = std::from_chars(body.data(), body.data() + body.size(), v, std::chars_format::hex);
  } else {
    res = std::from_chars(body.data(), body.data() + body.size(), v);
  }
  if (body.empty() || body.starts_with('-') || res.ec != std::errc() || res.ptr != body.data() + body.size()) {
    bad_document("malformed number '" + std::string(text) + "'");
  }
  return negative ? -v : v;
}

AnyState make_empty_state(ElementType type, OrderLadder ladder) {
  if (type.is_complex()) return ComplexState(type, std::move(ladder));
  return RealState(type, std::move(ladder));
}

ElementType state_type(const AnyState& state) {
  return std::visit([](const auto& s) { return s.type(); }, state);
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::BadStateDocument, "digest computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string serialize_state(const AnyState& state, NumberFormat format) {
  json doc = std::visit([&](const auto& s) { return encode_state(s, format); }, state);
  doc["content_digest"] = sha256_hex(canonical_form(doc));
  return doc.dump(2) + "\n";
}

AnyState parse_state(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    bad_document(std::string("not a JSON document: ") + e.what());
  }
  try {
    if (!doc.is_object()) bad_document("state document must be a JSON object");
    if (!doc.contains("content_digest") || !doc["content_digest"].is_string()) bad_document("missing content_digest");
    if (doc["content_digest"].get<std::string>() != sha256_hex(canonical_form(doc))) {
      throw Error(ErrorCode::DigestMismatch, "content digest does not match the document");
    }
    if (doc.at("format_version").get<int>() != kStateFormatVersion) bad_document("unsupported format_version");
    const std::string kind = doc.at("element_kind").get<std::string>();
    ElementType type;
    if (kind == "vector") {
      type = ElementType::real_vector(doc.at("vector_dim").get<Index>());
    } else {
      type = parse_element_type(kind);
    }
    std::vector<double> orders;
    for (const json& o : doc.at("ladder")) orders.push_back(parse_number(number_text(o)));
    const OrderLadder ladder(std::move(orders));
    if (type.is_complex()) return decode_state<std::complex<double>>(doc, type, ladder);
    return decode_state<double>(doc, type, ladder);
  } catch (const json::exception& e) {
    bad_document(std::string("malformed state document: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content,
                       const std::function<void()>& before_rename) {
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < content.size()) {
    const ssize_t n = ::write(fd, content.data() + written, content.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw Error(ErrorCode::InvalidArgument, "write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw Error(ErrorCode::InvalidArgument, "fsync failed: " + std::string(std::strerror(errno)));
  }
  if (before_rename) {
    try {
      before_rename();
    } catch (...) {
      ::unlink(tmp.c_str());
      throw;
    }
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw Error(ErrorCode::InvalidArgument, "rename failed: " + std::string(std::strerror(errno)));
  }
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY); dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

AnyState load_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open state file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_state(ss.str());
}

void save_state(const std::filesystem::path& path, const AnyState& state, NumberFormat format,
                const std::function<void()>& before_rename) {
  write_file_atomic(path, serialize_state(state, format), before_rename);
}

std::string batch_csv_header(ElementType type) {
  switch (type.kind) {
    case ElementKind::RealScalar: return "x,weight";
    case ElementKind::ComplexScalar: return "re,im,weight";
    case ElementKind::RealVector: {
      std::string h;
      for (Index i = 0; i < type.dim; ++i) h += "x" + std::to_string(i) + ",";
      return h + "weight";
    }
  }
  return {};
}

AnyBatch parse_batch_csv(std::istream& in, ElementType type) {
  const std::size_t columns = type.is_complex() ? 3 : static_cast<std::size_t>(type.dim) + 1;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (!have_header) {
      const auto expected = split_csv_line(batch_csv_header(type));
      if (fields != expected) {
        throw Error(ErrorCode::BadBatchFile, "header '" + line + "' does not match kind " + to_string(type) +
                                                 " (expected '" + batch_csv_header(type) + "')");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != columns) {
      throw Error(ErrorCode::BadBatchFile, "line " + std::to_string(line_no) + " has " +
                                               std::to_string(fields.size()) + " columns, expected " +
                                               std::to_string(columns));
    }
    for (const auto& f : fields) values.push_back(parse_finite_decimal(f, line_no));
  }
  if (!have_header) throw Error(ErrorCode::EmptyBatch, "batch file is empty");
  const Index rows = static_cast<Index>(values.size() / columns);
  if (rows == 0) throw Error(ErrorCode::EmptyBatch, "batch file has no data rows");

  Eigen::ArrayXd weights(rows);
  const auto at = [&](Index r, std::size_t c) { return values[static_cast<std::size_t>(r) * columns + c]; };
  for (Index r = 0; r < rows; ++r) weights(r) = at(r, columns - 1);
  if (type.is_complex()) {
    Table<std::complex<double>> data(1, rows);
    for (Index r = 0; r < rows; ++r) data(0, r) = {at(r, 0), at(r, 1)};
    return Batch<std::complex<double>>(type, std::move(data), std::move(weights));
  }
  Table<double> data(type.dim, rows);
  for (Index r = 0; r < rows; ++r) {
    for (Index i = 0; i < type.dim; ++i) data(i, r) = at(r, static_cast<std::size_t>(i));
  }
  return Batch<double>(type, std::move(data), std::move(weights));
}

AnyBatch read_batch_file(const std::filesystem::path& path, ElementType type) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadBatchFile, "cannot open batch file " + path.string());
  return parse_batch_csv(in, type);
}

StateLock::StateLock(const std::filesystem::path& state_path) {
  const std::string lock_path = state_path.string() + ".lock";
  fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw Error(ErrorCode::LockError, "cannot open lock file " + lock_path);
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::LockError, "state file is locked by another writer");
  }
}

StateLock::~StateLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace mf
