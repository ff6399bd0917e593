#include <gtest/gtest.h>

#include "momentflow/binomial.hpp"
#include "momentflow/error.hpp"
#include "momentflow/ladder.hpp"

using namespace mf;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Binomial, SmallValues) {
  EXPECT_EQ(binomial_exact(0, 0), 1u);
  EXPECT_EQ(binomial_exact(5, 2), 10u);
  EXPECT_EQ(binomial_exact(20, 10), 184756u);
  EXPECT_EQ(binomial_exact(4, 7), 0u);
  EXPECT_EQ(binomial(6, 3), 20.0);
}

TEST(Binomial, LargestOrderIsExact) {
  EXPECT_EQ(binomial_exact(62, 31), 465428353255261088ull);
  EXPECT_EQ(binomial_exact(62, 1), 62u);
}

TEST(Binomial, PascalRule) {
  for (int n = 1; n <= kMaxIntegerOrder; ++n) {
    for (int k = 1; k < n; ++k) {
      EXPECT_EQ(binomial_exact(n, k), binomial_exact(n - 1, k - 1) + binomial_exact(n - 1, k));
    }
  }
}

TEST(Binomial, RowMatchesTable) {
  const double* row = binomial_row(12);
  for (int k = 0; k <= 12; ++k) EXPECT_EQ(row[k], binomial(12, k));
}

TEST(Binomial, OrderAbove62Throws) {
  EXPECT_EQ(code_of([] { (void)binomial_exact(63, 2); }), ErrorCode::MaxOrderExceeded);
  EXPECT_EQ(code_of([] { (void)binomial(70, 0); }), ErrorCode::MaxOrderExceeded);
}

TEST(Binomial, Generalized) {
  EXPECT_DOUBLE_EQ(generalized_binomial(0.5, 2), -0.125);
  EXPECT_DOUBLE_EQ(generalized_binomial(-1.0, 3), -1.0);
  EXPECT_EQ(generalized_binomial(3.0, 4), 0.0);
  EXPECT_EQ(generalized_binomial(7.0, 3), 35.0);
}

TEST(Ladder, IntegerRange) {
  const auto l = OrderLadder::integer_range(2, 20);
  EXPECT_EQ(l.size(), 19);
  EXPECT_EQ(l.max_integer_order(), 20);
  EXPECT_TRUE(l.integer_only());
  EXPECT_EQ(l.integer_index(2), 0);
  EXPECT_EQ(l.integer_index(20), 18);
}

TEST(Ladder, ParseMixed) {
  const auto l = OrderLadder::parse("2..3,2.5,-0.5");
  EXPECT_EQ(l.size(), 4);
  EXPECT_FALSE(l.integer_only());
  EXPECT_TRUE(l.contains(2.5));
  EXPECT_TRUE(l.contains(-0.5));
  EXPECT_EQ(l.max_integer_order(), 3);
  EXPECT_EQ(OrderLadder::parse("2..3,2.5,−0.5"), l);
}

TEST(Ladder, Rejections) {
  EXPECT_EQ(code_of([] { OrderLadder::parse("1..5"); }), ErrorCode::BadLadderSpec);
  EXPECT_EQ(code_of([] { OrderLadder({2.0, 2.0}); }), ErrorCode::BadLadderSpec);
  EXPECT_EQ(code_of([] { OrderLadder({2.0, 4.0}); }), ErrorCode::BadLadderSpec);
  EXPECT_EQ(code_of([] { OrderLadder::integer_range(2, 63); }), ErrorCode::MaxOrderExceeded);
  EXPECT_EQ(code_of([] { OrderLadder::parse("abc"); }), ErrorCode::BadLadderSpec);
}
