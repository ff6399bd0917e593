#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "momentflow/element.hpp"

namespace mf {

/// One record of the dataset together with its weight f(x_i).
template <ElementScalar Scalar>
struct WeightedDatum {
  Element<Scalar> x;
  double weight;
};

/// Appended data, stored column-per-datum: data is dim x size.
///
/// Invariants: size >= 1, all weights finite, every column of the declared type.
template <ElementScalar Scalar>
class Batch {
 public:
  Batch(ElementType type, Table<Scalar> data, Eigen::ArrayXd weights)
      : type_(type), data_(std::move(data)), weights_(std::move(weights)) {
    check_kind_for_scalar(type_, is_complex_v<Scalar>);
    if (data_.cols() == 0) throw Error(ErrorCode::EmptyBatch, "batch has no data");
    if (data_.rows() != type_.dim) {
      throw Error(ErrorCode::KindMismatch, "batch rows do not match " + to_string(type_));
    }
    if (weights_.size() != data_.cols()) {
      throw Error(ErrorCode::InvalidArgument, "weight count differs from datum count");
    }
    if (!weights_.isFinite().all()) throw Error(ErrorCode::InvalidArgument, "weights must be finite");
  }

  static Batch from_data(std::span<const WeightedDatum<Scalar>> data) {
    if (data.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no data");
    const ElementType type = data.front().x.type();
    Table<Scalar> values(type.dim, static_cast<Index>(data.size()));
    Eigen::ArrayXd weights(static_cast<Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!(data[i].x.type() == type)) throw Error(ErrorCode::KindMismatch, "mixed element kinds in batch");
      values.col(static_cast<Index>(i)) = data[i].x.values();
      weights(static_cast<Index>(i)) = data[i].weight;
    }
    return Batch(type, std::move(values), std::move(weights));
  }

  /// Scalar-kind convenience.
  static Batch from_scalars(std::span<const Scalar> xs, std::span<const double> weights) {
    if (xs.size() != weights.size()) throw Error(ErrorCode::InvalidArgument, "weight count differs from datum count");
    Table<Scalar> values(1, static_cast<Index>(xs.size()));
    Eigen::ArrayXd w(static_cast<Index>(weights.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      values(0, static_cast<Index>(i)) = xs[i];
      w(static_cast<Index>(i)) = weights[i];
    }
    return Batch(is_complex_v<Scalar> ? ElementType::complex_scalar() : ElementType::real_scalar(), std::move(values),
                 std::move(w));
  }

  [[nodiscard]] const ElementType& type() const { return type_; }
  [[nodiscard]] Index size() const { return data_.cols(); }
  [[nodiscard]] const Table<Scalar>& data() const { return data_; }
  [[nodiscard]] const Eigen::ArrayXd& weights() const { return weights_; }
  [[nodiscard]] Element<Scalar> datum(Index i) const { return Element<Scalar>(type_, data_.col(i)); }

  /// Concatenation, used to build the full dataset for oracle comparisons.
  [[nodiscard]] Batch concat(const Batch& other) const {
    if (!(other.type_ == type_)) throw Error(ErrorCode::KindMismatch, "cannot concatenate different kinds");
    Table<Scalar> values(type_.dim, size() + other.size());
    values << data_, other.data_;
    Eigen::ArrayXd w(size() + other.size());
    w << weights_, other.weights_;
    return Batch(type_, std::move(values), std::move(w));
  }

  [[nodiscard]] Batch slice(Index first, Index count) const {
    return Batch(type_, data_.middleCols(first, count), weights_.segment(first, count));
  }

 private:
  ElementType type_;
  Table<Scalar> data_;
  Eigen::ArrayXd weights_;
};

}  // namespace mf
