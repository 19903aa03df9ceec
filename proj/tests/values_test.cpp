#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "agsynth/values.hpp"

using namespace agsynth;

namespace {

Value bi(Builtin op, const Value& x, const Value& y) {
  Value args[2] = {x, y};
  return apply_builtin(op, args, 2);
}

Value un(Builtin op, const Value& x) { return apply_builtin(op, &x, 1); }

}  // namespace

TEST_CASE("value_eq tolerance semantics") {
  CHECK(value_eq(make_dual(26.0000004, 10.0), make_dual(26.0, 10.0), 1e-6));
  CHECK_FALSE(value_eq(make_dual(26.1, 10.0), make_dual(26.0, 10.0), 1e-6));
  CHECK_FALSE(value_eq(make_int(3), make_real(3.0), 1e-6));
  CHECK(value_eq(make_tag("USD", 12.28), make_tag("USD", 12.2800001), 1e-6));
  CHECK_FALSE(value_eq(make_tag("USD", 12.28), make_tag("EUR", 12.28), 1e-6));
  CHECK(value_eq(make_bool(true), make_bool(true), 0.0));
  CHECK_FALSE(value_eq(make_bool(true), make_bool(false), 0.0));

  // tol = 0 is exact comparison
  CHECK(value_eq(make_real(0.5), make_real(0.5), 0.0));
  CHECK_FALSE(value_eq(make_real(0.5), make_real(0.5 + 1e-15), 0.0));

  // relative scale: near zero the bound degrades to absolute tol
  CHECK(value_eq(make_real(0.0), make_real(5e-7), 1e-6));
  CHECK_FALSE(value_eq(make_real(0.0), make_real(5e-6), 1e-6));
}

TEST_CASE("dual arithmetic matches direct forward-mode formulas") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    double a = d(rng), b = d(rng), c = d(rng), e = d(rng);
    Value x = make_dual(a, b), y = make_dual(c, e);
    Value m = bi(Builtin::Mul, x, y);
    CHECK(m.a == a * c);
    CHECK(m.b == a * e + b * c);
    Value s = bi(Builtin::Add, x, y);
    CHECK(s.a == a + c);
    CHECK(s.b == b + e);
    Value sn = un(Builtin::Sin, x);
    CHECK(sn.a == std::sin(a));
    CHECK(sn.b == b * std::cos(a));
    Value cs = un(Builtin::Cos, x);
    CHECK(cs.a == std::cos(a));
    CHECK(cs.b == -b * std::sin(a));
    if (c != 0) {
      Value q = bi(Builtin::Div, x, y);
      CHECK(q.a == a / c);
      CHECK(q.b == (b * c - a * e) / (c * c));
    }
  }
}

TEST_CASE("dual pow golden values") {
  // d/dx x^3 at x=2: value 8, derivative 12
  Value r = bi(Builtin::Pow, make_dual(2, 1), make_int(3));
  CHECK(value_eq(r, make_dual(8, 12), 1e-12));
  // exponent zero kills the derivative
  Value one = bi(Builtin::Pow, make_dual(5, 1), make_int(0));
  CHECK(value_eq(one, make_dual(1, 0), 0.0));
  // (x + eps)^2 = x^2 + 2x eps
  Value sq = bi(Builtin::Pow, make_dual(4, 1), make_int(2));
  CHECK(value_eq(sq, make_dual(16, 8), 0.0));
}

TEST_CASE("integer semantics") {
  CHECK(bi(Builtin::Div, make_int(7), make_int(-2)).i == -3);   // truncates toward zero
  CHECK(bi(Builtin::Div, make_int(-7), make_int(2)).i == -3);
  CHECK(bi(Builtin::Pow, make_int(2), make_int(10)).i == 1024);
  CHECK_THROWS_AS(bi(Builtin::Div, make_int(1), make_int(0)), EvalError);
  CHECK_THROWS_AS(bi(Builtin::Pow, make_int(2), make_int(-1)), EvalError);
  CHECK_THROWS_AS(bi(Builtin::Mul, make_int(INT64_MAX), make_int(2)), EvalError);
  // Int and Real never coerce
  CHECK_THROWS_AS(bi(Builtin::Add, make_int(1), make_real(1.0)), EvalError);
}

TEST_CASE("currency arithmetic uses the rate table") {
  Value r = bi(Builtin::Add, make_tag("USD", 3), make_tag("EUR", 8));
  CHECK(value_eq(r, make_tag("USD", 12.28), 1e-9));
  Value l = bi(Builtin::Add, make_tag("EUR", 1), make_tag("USD", 1.16));
  CHECK(value_eq(l, make_tag("EUR", 2.0), 1e-9));
  Value sc = bi(Builtin::Mul, make_tag("USD", 2.5), make_int(4));
  CHECK(value_eq(sc, make_tag("USD", 10.0), 0.0));
  Value sc2 = bi(Builtin::Mul, make_int(4), make_tag("USD", 2.5));
  CHECK(value_eq(sc2, make_tag("USD", 10.0), 0.0));
  CHECK_THROWS_AS(bi(Builtin::Add, make_tag("USD", 1), make_tag("XYZ", 1)), EvalError);
}

TEST_CASE("comparisons and ite") {
  CHECK(bi(Builtin::Eq, make_int(7), make_int(7)).i == 1);
  CHECK(bi(Builtin::Lt, make_real(1.0), make_real(2.0)).i == 1);
  CHECK_THROWS_AS(bi(Builtin::Eq, make_int(1), make_real(1.0)), EvalError);
  Value args[3] = {make_bool(false), make_int(44), make_int(73)};
  CHECK(apply_builtin(Builtin::Ite, args, 3).i == 73);
  args[0] = make_bool(true);
  CHECK(apply_builtin(Builtin::Ite, args, 3).i == 44);
}

TEST_CASE("Dual constructor lifts int components") {
  Value args[2] = {make_int(3), make_int(0)};
  Value d = apply_builtin(Builtin::MkDual, args, 2);
  CHECK(d.kind == ValueKind::Dual);
  CHECK(d.a == 3.0);
  CHECK(d.b == 0.0);
}

TEST_CASE("non-finite construction is rejected") {
  CHECK_THROWS_AS(make_real(std::numeric_limits<double>::infinity()), EvalError);
  CHECK_THROWS_AS(make_dual(0, std::nan("")), EvalError);
  CHECK_THROWS_AS(make_tag("", 1.0), EvalError);
  // overflow inside pow surfaces as EvalError, not inf
  CHECK_THROWS_AS(bi(Builtin::Pow, make_real(1e308), make_int(9)), EvalError);
}

TEST_CASE("JSON round trip is exact") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  std::uniform_int_distribution<std::int64_t> di(-1000000, 1000000);
  auto roundtrip = [](const Value& v) {
    Value back = parse_value(format_value(v));
    REQUIRE(value_identical(back, v));
  };
  for (int k = 0; k < 200; ++k) {
    roundtrip(make_int(di(rng)));
    roundtrip(make_real(d(rng)));
    roundtrip(make_dual(d(rng), d(rng)));
    roundtrip(make_tag(k % 2 ? "USD" : "EUR", d(rng)));
    roundtrip(make_bool(k % 2 == 0));
  }
  roundtrip(make_real(0.1));
  roundtrip(make_real(1.0 / 3.0));
  CHECK(format_value(make_dual(26, 10)) == "{\"dual\":[26.0,10.0]}");
  CHECK(format_value(make_int(3)) == "{\"int\":3}");
}

TEST_CASE("JSON rejects malformed input") {
  CHECK_THROWS_AS(parse_value("{"), EvalError);
  CHECK_THROWS_AS(parse_value("{\"frob\":1}"), EvalError);
  CHECK_THROWS_AS(parse_value("{\"int\":1.5}"), EvalError);
  CHECK_THROWS_AS(parse_value("{\"dual\":[1]}"), EvalError);
  CHECK_THROWS_AS(parse_value("{\"tag\":[3,\"USD\"]}"), EvalError);
  CHECK_THROWS_AS(parse_value("{\"int\":1,\"real\":2.0}"), EvalError);
}

TEST_CASE("fmt_real keeps reals distinguishable from ints") {
  CHECK(fmt_real(2.0) == "2.0");
  CHECK(fmt_real(-1.0) == "-1.0");
  CHECK(fmt_real(0.5) == "0.5");
}
