#include "momentflow/ladder.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "momentflow/binomial.hpp"

namespace mf {

namespace {

std::string format_order(double order) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), order);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_order(std::string_view token) {
  token = trim(token);
  // Accept the unicode minus some shells and documents produce.
  std::string text(token);
  if (text.starts_with("\xE2\x88\x92")) text = "-" + text.substr(3);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::BadLadderSpec, "cannot parse order '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

bool is_recurrence_order(double order) { return order >= 2.0 && order == std::floor(order); }

OrderLadder::OrderLadder(std::vector<double> orders) {
  auto data = std::make_shared<Data>();
  auto& orders_ = data->orders;
  auto& integer_columns_ = data->integer_columns;
  auto& max_integer_order_ = data->max_integer_order;
  orders_ = std::move(orders);
  if (orders_.empty()) throw Error(ErrorCode::BadLadderSpec, "ladder is empty");
  std::sort(orders_.begin(), orders_.end());
  if (std::adjacent_find(orders_.begin(), orders_.end()) != orders_.end()) {
    throw Error(ErrorCode::BadLadderSpec, "duplicate order in ladder");
  }
  for (double o : orders_) {
    if (!std::isfinite(o)) throw Error(ErrorCode::BadLadderSpec, "non-finite order");
    if (o == 0.0 || o == 1.0) {
      throw Error(ErrorCode::BadLadderSpec, "orders 0 and 1 are implicit (M0 = 1, M1 = 0)");
    }
    if (is_recurrence_order(o)) max_integer_order_ = std::max(max_integer_order_, static_cast<int>(o));
  }
  if (max_integer_order_ > kMaxIntegerOrder) {
    throw Error(ErrorCode::MaxOrderExceeded, "integer order " + std::to_string(max_integer_order_) + " exceeds 62");
  }
  integer_columns_.assign(static_cast<std::size_t>(max_integer_order_) + 1, -1);
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    if (is_recurrence_order(orders_[i])) integer_columns_[static_cast<std::size_t>(orders_[i])] = static_cast<Index>(i);
  }
  for (int n = 2; n <= max_integer_order_; ++n) {
    if (integer_columns_[n] < 0) {
      throw Error(ErrorCode::BadLadderSpec, "integer order " + std::to_string(max_integer_order_) +
                                                " requires every order 2.." + std::to_string(max_integer_order_));
    }
  }
  data->integer_only = std::all_of(data->orders.begin(), data->orders.end(), is_recurrence_order);
  data_ = std::move(data);
}

OrderLadder OrderLadder::integer_range(int lo, int hi) {
  std::vector<double> orders;
  for (int n = lo; n <= hi; ++n) orders.push_back(n);
  return OrderLadder(std::move(orders));
}

OrderLadder OrderLadder::parse(std::string_view spec) {
  std::vector<double> orders;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto token = trim(spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (token.empty()) throw Error(ErrorCode::BadLadderSpec, "empty entry in '" + std::string(spec) + "'");
    if (const auto dots = token.find(".."); dots != std::string_view::npos) {
      const double lo = parse_order(token.substr(0, dots));
      const double hi = parse_order(token.substr(dots + 2));
      if (lo != std::floor(lo) || hi != std::floor(hi) || lo > hi || hi - lo > 1000) {
        throw Error(ErrorCode::BadLadderSpec, "range '" + std::string(token) + "' must be integer lo..hi");
      }
      for (double o = lo; o <= hi; o += 1.0) orders.push_back(o);
    } else {
      orders.push_back(parse_order(token));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return OrderLadder(std::move(orders));
}

std::optional<Index> OrderLadder::index_of(double order) const {
  const auto& orders = data_->orders;
  const auto it = std::lower_bound(orders.begin(), orders.end(), order);
  if (it == orders.end() || *it != order) return std::nullopt;
  return static_cast<Index>(it - orders.begin());
}

std::string OrderLadder::to_string() const {
  std::string out;
  const auto& orders = data_->orders;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (i) out += ',';
    out += format_order(orders[i]);
  }
  return out;
}

}  // namespace mf
