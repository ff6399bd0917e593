#include "momentflow/element.hpp"

#include <charconv>

namespace mf {

ElementType ElementType::real_vector(Index d) {
  if (d < 1) throw Error(ErrorCode::BadKindSpec, "vector dimension must be >= 1");
  return {ElementKind::RealVector, d};
}

std::string to_string(const ElementType& type) {
  switch (type.kind) {
    case ElementKind::RealScalar: return "scalar";
    case ElementKind::ComplexScalar: return "complex";
    case ElementKind::RealVector: return "vector:" + std::to_string(type.dim);
  }
  return "unknown";
}

ElementType parse_element_type(std::string_view spec) {
  if (spec == "scalar") return ElementType::real_scalar();
  if (spec == "complex") return ElementType::complex_scalar();
  constexpr std::string_view prefix = "vector:";
  if (spec.starts_with(prefix)) {
    const auto digits = spec.substr(prefix.size());
    long long d = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (ec == std::errc() && end == digits.data() + digits.size() && d >= 1 && d <= 1'000'000) {
      return ElementType::real_vector(static_cast<Index>(d));
    }
  }
  throw Error(ErrorCode::BadKindSpec, "expected scalar, complex or vector:d, got '" + std::string(spec) + "'");
}

}  // namespace mf
