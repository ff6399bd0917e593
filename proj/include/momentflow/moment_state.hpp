#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "momentflow/element.hpp"
#include "momentflow/ladder.hpp"

namespace mf {

/// Relative floor for the normalizer: |Z| must exceed this times the largest |weight| seen.
inline constexpr double kNormalizerEpsilon = 1e-12;

/// Contents of a non-empty accumulator.
template <ElementScalar Scalar>
struct MomentBody {
  double normalizer = 0.0;
  Column<Scalar> mean;
  std::int64_t count = 0;
  /// dim x ladder.size(); column j holds M at ladder.orders()[j].
  Table<Scalar> moments;
  double max_abs_weight = 0.0;
};

/// The compact moment state: Z, the weighted mean, N, and central moments on a ladder.
///
/// M0 = 1 and M1 = 0 are never stored. An empty state keeps only its type and ladder.
template <ElementScalar Scalar>
class MomentState {
 public:
  MomentState(ElementType type, OrderLadder ladder) : type_(type), ladder_(std::move(ladder)) {
    check_kind_for_scalar(type_, is_complex_v<Scalar>);
  }

  MomentState(ElementType type, OrderLadder ladder, MomentBody<Scalar> body)
      : MomentState(type, std::move(ladder)) {
    if (body.mean.size() != type_.dim || body.moments.rows() != type_.dim || body.moments.cols() != ladder_.size()) {
      throw Error(ErrorCode::KindMismatch, "moment body shape does not match type and ladder");
    }
    if (body.count < 1) throw Error(ErrorCode::InvalidArgument, "non-empty state needs count >= 1");
    if (!std::isfinite(body.normalizer) || !(std::abs(body.normalizer) > kNormalizerEpsilon * body.max_abs_weight)) {
      throw Error(ErrorCode::ZeroNormalizer, "normalizer vanishes");
    }
    body_ = std::move(body);
  }

  [[nodiscard]] bool empty() const { return !body_.has_value(); }
  [[nodiscard]] const ElementType& type() const { return type_; }
  [[nodiscard]] const OrderLadder& ladder() const { return ladder_; }

  [[nodiscard]] double normalizer() const { return body().normalizer; }
  [[nodiscard]] std::int64_t count() const { return body_ ? body_->count : 0; }
  [[nodiscard]] double max_abs_weight() const { return body().max_abs_weight; }
  [[nodiscard]] const Column<Scalar>& mean_column() const { return body().mean; }
  [[nodiscard]] Element<Scalar> mean() const { return Element<Scalar>(type_, body().mean); }
  [[nodiscard]] const Table<Scalar>& moments() const { return body().moments; }
  [[nodiscard]] const MomentBody<Scalar>& body() const {
    if (!body_) throw Error(ErrorCode::InvalidArgument, "state is empty");
    return *body_;
  }

  /// M at the given order; 0 and 1 return the exact identity and zero.
  [[nodiscard]] Element<Scalar> moment(double order) const {
    if (order == 0.0) return Element<Scalar>::one(type_);
    if (order == 1.0) return Element<Scalar>::zero(type_);
    const auto idx = ladder_.index_of(order);
    if (!idx) throw Error(ErrorCode::OrderNotInLadder, "order not in ladder " + ladder_.to_string());
    return Element<Scalar>(type_, body().moments.col(*idx));
  }

 private:
  ElementType type_;
  OrderLadder ladder_;
  std::optional<MomentBody<Scalar>> body_;
};

}  // namespace mf
