#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include <Eigen/Dense>

#include "momentflow/error.hpp"

namespace mf {

using Index = Eigen::Index;

/// Smallest base accepted for non-integer or negative powers of real components.
inline constexpr double kPowEpsilon = 1e-300;

enum class ElementKind { RealScalar, ComplexScalar, RealVector };

/// Kind plus component count. Scalars always have dim 1.
struct ElementType {
  ElementKind kind = ElementKind::RealScalar;
  Index dim = 1;

  static ElementType real_scalar() { return {ElementKind::RealScalar, 1}; }
  static ElementType complex_scalar() { return {ElementKind::ComplexScalar, 1}; }
  static ElementType real_vector(Index d);

  [[nodiscard]] bool is_complex() const { return kind == ElementKind::ComplexScalar; }

  friend bool operator==(const ElementType&, const ElementType&) = default;
};

/// "scalar", "complex" or "vector:d".
std::string to_string(const ElementType& type);
ElementType parse_element_type(std::string_view spec);

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

template <typename Scalar>
concept ElementScalar = std::is_same_v<Scalar, double> || std::is_same_v<Scalar, std::complex<double>>;

template <ElementScalar Scalar>
using Column = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <ElementScalar Scalar>
using Table = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline void check_kind_for_scalar(const ElementType& type, bool complex_scalar) {
  if (type.is_complex() != complex_scalar) {
    throw Error(ErrorCode::KindMismatch, "element kind " + to_string(type) + " does not match storage scalar");
  }
  if (type.dim < 1 || (type.kind != ElementKind::RealVector && type.dim != 1)) {
    throw Error(ErrorCode::KindMismatch, "invalid dimension for kind " + to_string(type));
  }
}

/// One data object of the datatype field: a tagged column of components.
template <ElementScalar Scalar>
class Element {
 public:
  using scalar_type = Scalar;

  Element(ElementType type, Column<Scalar> values) : type_(type), values_(std::move(values)) {
    check_kind_for_scalar(type_, is_complex_v<Scalar>);
    if (values_.size() != type_.dim) {
      throw Error(ErrorCode::KindMismatch, "component count does not match " + to_string(type_));
    }
  }

  static Element scalar(Scalar v) {
    Column<Scalar> c(1);
    c(0) = v;
    return Element(is_complex_v<Scalar> ? ElementType::complex_scalar() : ElementType::real_scalar(), std::move(c));
  }

  static Element zero(ElementType type) { return Element(type, Column<Scalar>::Zero(type.dim)); }
  static Element one(ElementType type) { return Element(type, Column<Scalar>::Ones(type.dim)); }

  [[nodiscard]] const ElementType& type() const { return type_; }
  [[nodiscard]] const Column<Scalar>& values() const { return values_; }
  [[nodiscard]] Scalar operator[](Index i) const { return values_(i); }
  [[nodiscard]] Index dim() const { return values_.size(); }

  friend bool operator==(const Element& a, const Element& b) {
    return a.type_ == b.type_ && (a.values_ == b.values_).all();
  }

 private:
  ElementType type_;
  Column<Scalar> values_;
};

namespace detail {

inline void require_same_type(const ElementType& a, const ElementType& b) {
  if (!(a == b)) {
    throw Error(ErrorCode::KindMismatch, to_string(a) + " vs " + to_string(b));
  }
}

inline bool is_integral_order(double n) {
  return std::isfinite(n) && n == std::floor(n) && std::abs(n) < 9.0e15;
}

template <typename Scalar>
Scalar pow_uint(Scalar base, std::uint64_t e) {
  Scalar result(1.0);
  while (e != 0) {
    if (e & 1U) result *= base;
    e >>= 1U;
    if (e != 0) base *= base;
  }
  return result;
}

}  // namespace detail

/// Scalar power under the element-algebra domain rules.
///
/// Non-negative integer orders use repeated multiplication. Real bases must
/// exceed kPowEpsilon for negative or non-integer orders; complex bases use the
/// principal branch, and only a zero complex base is rejected for negative orders.
template <ElementScalar Scalar>
Scalar component_pow(Scalar base, double n) {
  if (!std::isfinite(n)) throw Error(ErrorCode::DomainError, "non-finite power order");
  const bool integral = detail::is_integral_order(n);
  if (integral && n >= 0.0) return detail::pow_uint(base, static_cast<std::uint64_t>(n));
  if constexpr (is_complex_v<Scalar>) {
    if (std::abs(base) == 0.0) {
      if (n > 0.0) return Scalar(0.0);
      throw Error(ErrorCode::DomainError, "zero complex base with non-positive order");
    }
    if (integral) return Scalar(1.0) / detail::pow_uint(base, static_cast<std::uint64_t>(-n));
    return std::pow(base, n);
  } else {
    if (!(base > kPowEpsilon)) {
      throw Error(ErrorCode::DomainError,
                  "real base " + std::to_string(base) + " outside domain of power " + std::to_string(n));
    }
    if (integral) return 1.0 / detail::pow_uint(base, static_cast<std::uint64_t>(-n));
    return std::pow(base, n);
  }
}

template <ElementScalar Scalar>
Element<Scalar> elem_add(const Element<Scalar>& a, const Element<Scalar>& b) {
  detail::require_same_type(a.type(), b.type());
  return Element<Scalar>(a.type(), a.values() + b.values());
}

template <ElementScalar Scalar>
Element<Scalar> elem_sub(const Element<Scalar>& a, const Element<Scalar>& b) {
  detail::require_same_type(a.type(), b.type());
  return Element<Scalar>(a.type(), a.values() - b.values());
}

/// Componentwise (Hadamard) product.
template <ElementScalar Scalar>
Element<Scalar> elem_mul(const Element<Scalar>& a, const Element<Scalar>& b) {
  detail::require_same_type(a.type(), b.type());
  return Element<Scalar>(a.type(), a.values() * b.values());
}

template <ElementScalar Scalar>
Element<Scalar> elem_pow(const Element<Scalar>& a, double n) {
  Column<Scalar> out(a.dim());
  for (Index i = 0; i < a.dim(); ++i) out(i) = component_pow(a[i], n);
  return Element<Scalar>(a.type(), std::move(out));
}

/// Euclidean norm; the modulus for complex scalars.
template <ElementScalar Scalar>
double elem_norm(const Element<Scalar>& a) {
  if (a.dim() == 1) return std::abs(a[0]);
  return a.values().matrix().norm();
}

template <ElementScalar Scalar>
double column_norm(const Column<Scalar>& c) {
  if (c.size() == 1) return std::abs(c(0));
  return c.matrix().norm();
}

}  // namespace mf
