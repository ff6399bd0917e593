#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "momentflow/element.hpp"

namespace mf {

/// True for the orders maintained by the binomial recurrence: integers >= 2.
bool is_recurrence_order(double order);

/// Sorted set of moment orders an accumulator keeps.
///
/// Integer orders must form the contiguous run 2..n_max. Other entries
/// (fractional or negative) are series orders used by fractional updates.
/// Orders 0 and 1 are never stored. Copies share the immutable order table.
class OrderLadder {
 public:
  explicit OrderLadder(std::vector<double> orders);

  static OrderLadder integer_range(int lo, int hi);

  /// Parses "2..20", "2,3,4", "2..3,2.5,-0.5"; throws BadLadderSpec.
  static OrderLadder parse(std::string_view spec);

  [[nodiscard]] std::span<const double> orders() const { return data_->orders; }
  [[nodiscard]] Index size() const { return static_cast<Index>(data_->orders.size()); }
  [[nodiscard]] int max_integer_order() const { return data_->max_integer_order; }
  [[nodiscard]] bool integer_only() const { return data_->integer_only; }
  [[nodiscard]] bool contains(double order) const { return index_of(order).has_value(); }
  [[nodiscard]] std::optional<Index> index_of(double order) const;

  /// Column of integer order n in 2..max_integer_order(); -1 otherwise.
  [[nodiscard]] Index integer_index(int n) const {
    return (n >= 2 && n <= data_->max_integer_order) ? data_->integer_columns[n] : -1;
  }

  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const OrderLadder& a, const OrderLadder& b) {
    return a.data_ == b.data_ || a.data_->orders == b.data_->orders;
  }

 private:
  struct Data {
    std::vector<double> orders;
    std::vector<Index> integer_columns;
    int max_integer_order = 0;
    bool integer_only = true;
  };
  std::shared_ptr<const Data> data_;
};

}  // namespace mf
