#pragma once
// Value domain shared by grammar actions, traces, and the hole DSL:
// exact ints, reals, booleans, dual numbers (a + b*eps with eps^2 = 0),
// and currency-tagged amounts.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace agsynth {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ValueKind { Int, Real, Bool, Dual, Tag };

inline const char* kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::Int: return "int";
    case ValueKind::Real: return "real";
    case ValueKind::Bool: return "bool";
    case ValueKind::Dual: return "dual";
    case ValueKind::Tag: return "tag";
  }
  return "?";
}

inline std::optional<ValueKind> parse_kind(const std::string& s) {
  if (s == "int") return ValueKind::Int;
  if (s == "real") return ValueKind::Real;
  if (s == "bool") return ValueKind::Bool;
  if (s == "dual") return ValueKind::Dual;
  if (s == "tag") return ValueKind::Tag;
  return std::nullopt;
}

struct Value {
  ValueKind kind = ValueKind::Int;
  std::int64_t i = 0;       // Int payload; Bool stores 0/1 here
  double a = 0.0;           // Real value, Dual real part, Tag amount
  double b = 0.0;           // Dual derivative part
  std::string label;        // Tag currency label

  bool is_numeric() const { return kind == ValueKind::Int || kind == ValueKind::Real; }
};

inline Value make_int(std::int64_t v) {
  Value r;
  r.kind = ValueKind::Int;
  r.i = v;
  return r;
}

inline Value make_bool(bool v) {
  Value r;
  r.kind = ValueKind::Bool;
  r.i = v ? 1 : 0;
  return r;
}

inline Value make_real(double v) {
  if (!std::isfinite(v)) throw EvalError("non-finite real");
  Value r;
  r.kind = ValueKind::Real;
  r.a = v;
  return r;
}

inline Value make_dual(double re, double du) {
  if (!std::isfinite(re) || !std::isfinite(du)) throw EvalError("non-finite dual");
  Value r;
  r.kind = ValueKind::Dual;
  r.a = re;
  r.b = du;
  return r;
}

inline Value make_tag(const std::string& label, double amount) {
  if (label.empty()) throw EvalError("empty currency label");
  if (!std::isfinite(amount)) throw EvalError("non-finite amount");
  Value r;
  r.kind = ValueKind::Tag;
  r.label = label;
  r.a = amount;
  return r;
}

// Relative tolerance: |x - y| <= tol * max(1, |x|, |y|). tol = 0 is exact.
inline bool close_enough(double x, double y, double tol) {
  double m = std::max(1.0, std::max(std::fabs(x), std::fabs(y)));
  return std::fabs(x - y) <= tol * m;
}

inline bool value_eq(const Value& x, const Value& y, double tol) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case ValueKind::Int:
    case ValueKind::Bool: return x.i == y.i;
    case ValueKind::Real: return close_enough(x.a, y.a, tol);
    case ValueKind::Dual:
      return close_enough(x.a, y.a, tol) && close_enough(x.b, y.b, tol);
    case ValueKind::Tag:
      return x.label == y.label && close_enough(x.a, y.a, tol);
  }
  return false;
}

// Exchange rates expressed as "1 unit of label = rate units of the base".
using CurrencyTable = std::map<std::string, double>;

inline const CurrencyTable& default_currency_table() {
  static const CurrencyTable t{{"USD", 1.0}, {"EUR", 1.16}};
  return t;
}

inline bool currency_rate(const CurrencyTable& t, const std::string& label, double& out) {
  auto it = t.find(label);
  if (it == t.end()) return false;
  out = it->second;
  return true;
}

// Convert amount from one currency to another through the base rate.
inline bool convert_amount(const CurrencyTable& t, double amount, const std::string& from,
                           const std::string& to, double& out) {
  double rf = 0, rt = 0;
  if (!currency_rate(t, from, rf) || !currency_rate(t, to, rt) || rt == 0) return false;
  out = amount * rf / rt;
  return true;
}

enum class Builtin {
  Add, Sub, Mul, Div, Neg, Sin, Cos, Pow, MkDual,
  Eq, Ne, Lt, Le, Gt, Ge, Ite
};

inline const char* builtin_name(Builtin b) {
  switch (b) {
    case Builtin::Add: return "add";
    case Builtin::Sub: return "sub";
    case Builtin::Mul: return "mul";
    case Builtin::Div: return "div";
    case Builtin::Neg: return "neg";
    case Builtin::Sin: return "sin";
    case Builtin::Cos: return "cos";
    case Builtin::Pow: return "pow";
    case Builtin::MkDual: return "Dual";
    case Builtin::Eq: return "eq";
    case Builtin::Ne: return "ne";
    case Builtin::Lt: return "lt";
    case Builtin::Le: return "le";
    case Builtin::Gt: return "gt";
    case Builtin::Ge: return "ge";
    case Builtin::Ite: return "ite";
  }
  return "?";
}

inline std::optional<Builtin> lookup_builtin(const std::string& s) {
  static const std::map<std::string, Builtin> m{
      {"add", Builtin::Add}, {"sub", Builtin::Sub}, {"mul", Builtin::Mul},
      {"div", Builtin::Div}, {"neg", Builtin::Neg}, {"sin", Builtin::Sin},
      {"cos", Builtin::Cos}, {"pow", Builtin::Pow}, {"Dual", Builtin::MkDual},
      {"eq", Builtin::Eq},   {"ne", Builtin::Ne},   {"lt", Builtin::Lt},
      {"le", Builtin::Le},   {"gt", Builtin::Gt},   {"ge", Builtin::Ge},
      {"ite", Builtin::Ite}};
  auto it = m.find(s);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

inline int builtin_arity(Builtin b) {
  switch (b) {
    case Builtin::Neg:
    case Builtin::Sin:
    case Builtin::Cos: return 1;
    case Builtin::Ite: return 3;
    default: return 2;
  }
}

namespace detail {

inline bool finite_or_fail(double v) { return std::isfinite(v); }

inline bool as_real_component(const Value& v, double& out) {
  if (v.kind == ValueKind::Real) { out = v.a; return true; }
  if (v.kind == ValueKind::Int) { out = static_cast<double>(v.i); return true; }
  return false;
}

inline bool int_pow(std::int64_t base, std::int64_t exp, std::int64_t& out) {
  if (exp < 0) return false;
  std::int64_t acc = 1;
  for (std::int64_t k = 0; k < exp; ++k) {
    if (__builtin_mul_overflow(acc, base, &acc)) return false;
  }
  out = acc;
  return true;
}

}  // namespace detail

// Exception-free builtin application; returns false on any type or domain
// error. The throwing apply_builtin wraps this for diagnostic paths.
inline bool try_apply(Builtin op, const Value* args, std::size_t n, Value& out,
                      const CurrencyTable& rates = default_currency_table()) {
  using K = ValueKind;
  if (static_cast<int>(n) != builtin_arity(op)) return false;
  switch (op) {
    case Builtin::Add:
    case Builtin::Sub: {
      const Value& x = args[0];
      const Value& y = args[1];
      bool sub = op == Builtin::Sub;
      if (x.kind == K::Int && y.kind == K::Int) {
        std::int64_t r;
        bool ovf = sub ? __builtin_sub_overflow(x.i, y.i, &r)
                       : __builtin_add_overflow(x.i, y.i, &r);
        if (ovf) return false;
        out = make_int(r);
        return true;
      }
      if (x.kind == K::Real && y.kind == K::Real) {
        double r = sub ? x.a - y.a : x.a + y.a;
        if (!detail::finite_or_fail(r)) return false;
        out = make_real(r);
        return true;
      }
      if (x.kind == K::Dual && y.kind == K::Dual) {
        double ra = sub ? x.a - y.a : x.a + y.a;
        double rb = sub ? x.b - y.b : x.b + y.b;
        if (!detail::finite_or_fail(ra) || !detail::finite_or_fail(rb)) return false;
        out = make_dual(ra, rb);
        return true;
      }
      if (x.kind == K::Tag && y.kind == K::Tag) {
        double conv;
        if (!convert_amount(rates, y.a, y.label, x.label, conv)) return false;
        double r = sub ? x.a - conv : x.a + conv;
        if (!detail::finite_or_fail(r)) return false;
        out = make_tag(x.label, r);
        return true;
      }
      return false;
    }
    case Builtin::Mul: {
      const Value& x = args[0];
      const Value& y = args[1];
      if (x.kind == K::Int && y.kind == K::Int) {
        std::int64_t r;
        if (__builtin_mul_overflow(x.i, y.i, &r)) return false;
        out = make_int(r);
        return true;
      }
      if (x.kind == K::Real && y.kind == K::Real) {
        double r = x.a * y.a;
        if (!detail::finite_or_fail(r)) return false;
        out = make_real(r);
        return true;
      }
      if (x.kind == K::Dual && y.kind == K::Dual) {
        // (a + b eps)(c + d eps) = ac + (ad + bc) eps since eps^2 = 0.
        double ra = x.a * y.a;
        double rb = x.a * y.b + x.b * y.a;
        if (!detail::finite_or_fail(ra) || !detail::finite_or_fail(rb)) return false;
        out = make_dual(ra, rb);
        return true;
      }
      if (x.kind == K::Tag && y.is_numeric()) {
        double s;
        detail::as_real_component(y, s);
        double r = x.a * s;
        if (!detail::finite_or_fail(r)) return false;
        out = make_tag(x.label, r);
        return true;
      }
      if (x.is_numeric() && y.kind == K::Tag) {
        double s;
        detail::as_real_component(x, s);
        double r = s * y.a;
        if (!detail::finite_or_fail(r)) return false;
        out = make_tag(y.label, r);
        return true;
      }
      return false;
    }
    case Builtin::Div: {
      const Value& x = args[0];
      const Value& y = args[1];
      if (x.kind == K::Int && y.kind == K::Int) {
        if (y.i == 0) return false;
        if (x.i == INT64_MIN && y.i == -1) return false;
        out = make_int(x.i / y.i);  // truncates toward zero
        return true;
      }
      if (x.kind == K::Real && y.kind == K::Real) {
        if (y.a == 0) return false;
        double r = x.a / y.a;
        if (!detail::finite_or_fail(r)) return false;
        out = make_real(r);
        return true;
      }
      if (x.kind == K::Dual && y.kind == K::Dual) {
        if (y.a == 0) return false;
        double ra = x.a / y.a;
        double rb = (x.b * y.a - x.a * y.b) / (y.a * y.a);
        if (!detail::finite_or_fail(ra) || !detail::finite_or_fail(rb)) return false;
        out = make_dual(ra, rb);
        return true;
      }
      if (x.kind == K::Tag && y.is_numeric()) {
        double s;
        detail::as_real_component(y, s);
        if (s == 0) return false;
        double r = x.a / s;
        if (!detail::finite_or_fail(r)) return false;
        out = make_tag(x.label, r);
        return true;
      }
      return false;
    }
    case Builtin::Neg: {
      const Value& x = args[0];
      if (x.kind == K::Int) {
        if (x.i == INT64_MIN) return false;
        out = make_int(-x.i);
        return true;
      }
      if (x.kind == K::Real) { out = make_real(-x.a); return true; }
      if (x.kind == K::Dual) { out = make_dual(-x.a, -x.b); return true; }
      return false;
    }
    case Builtin::Sin:
    case Builtin::Cos: {
      const Value& x = args[0];
      bool sine = op == Builtin::Sin;
      if (x.kind == K::Real) {
        out = make_real(sine ? std::sin(x.a) : std::cos(x.a));
        return true;
      }
      if (x.kind == K::Dual) {
        // sin(a + b eps) = sin a + b cos a eps; cos(a + b eps) = cos a - b sin a eps.
        double ra = sine ? std::sin(x.a) : std::cos(x.a);
        double rb = sine ? x.b * std::cos(x.a) : -x.b * std::sin(x.a);
        out = make_dual(ra, rb);
        return true;
      }
      return false;
    }
    case Builtin::Pow: {
      const Value& x = args[0];
      const Value& y = args[1];
      if (y.kind != K::Int) return false;
      if (x.kind == K::Int) {
        std::int64_t r;
        if (!detail::int_pow(x.i, y.i, r)) return false;
        out = make_int(r);
        return true;
      }
      if (x.kind == K::Real) {
        if (x.a == 0 && y.i < 0) return false;
        double r = std::pow(x.a, static_cast<double>(y.i));
        if (!detail::finite_or_fail(r)) return false;
        out = make_real(r);
        return true;
      }
      if (x.kind == K::Dual) {
        // (a + b eps)^n = a^n + n a^(n-1) b eps.
        if (x.a == 0 && y.i < 1) return false;
        double n = static_cast<double>(y.i);
        double ra = std::pow(x.a, n);
        double rb = n * std::pow(x.a, n - 1.0) * x.b;
        if (y.i == 0) rb = 0.0;
        if (!detail::finite_or_fail(ra) || !detail::finite_or_fail(rb)) return false;
        out = make_dual(ra, rb);
        return true;
      }
      return false;
    }
    case Builtin::MkDual: {
      double re, du;
      if (!detail::as_real_component(args[0], re)) return false;
      if (!detail::as_real_component(args[1], du)) return false;
      out = make_dual(re, du);
      return true;
    }
    case Builtin::Eq:
    case Builtin::Ne:
    case Builtin::Lt:
    case Builtin::Le:
    case Builtin::Gt:
    case Builtin::Ge: {
      const Value& x = args[0];
      const Value& y = args[1];
      if (x.kind != y.kind) return false;
      int cmp;
      if (x.kind == K::Int || x.kind == K::Bool) {
        cmp = x.i < y.i ? -1 : x.i > y.i ? 1 : 0;
        if (x.kind == K::Bool && op != Builtin::Eq && op != Builtin::Ne) return false;
      } else if (x.kind == K::Real) {
        cmp = x.a < y.a ? -1 : x.a > y.a ? 1 : 0;
      } else {
        return false;
      }
      bool r = false;
      switch (op) {
        case Builtin::Eq: r = cmp == 0; break;
        case Builtin::Ne: r = cmp != 0; break;
        case Builtin::Lt: r = cmp < 0; break;
        case Builtin::Le: r = cmp <= 0; break;
        case Builtin::Gt: r = cmp > 0; break;
        case Builtin::Ge: r = cmp >= 0; break;
        default: return false;
      }
      out = make_bool(r);
      return true;
    }
    case Builtin::Ite: {
      if (args[0].kind != K::Bool) return false;
      if (args[1].kind != args[2].kind) return false;
      out = args[0].i ? args[1] : args[2];
      return true;
    }
  }
  return false;
}

inline Value apply_builtin(Builtin op, const Value* args, std::size_t n,
                           const CurrencyTable& rates = default_currency_table()) {
  Value out;
  if (!try_apply(op, args, n, out, rates)) {
    std::string msg = std::string("builtin ") + builtin_name(op) + "(";
    for (std::size_t k = 0; k < n; ++k) {
      if (k) msg += ", ";
      msg += kind_name(args[k].kind);
    }
    msg += ") failed: type or domain error";
    throw EvalError(msg);
  }
  return out;
}

// Deterministic shortest round-trip formatting; always carries a decimal
// point or exponent so reparsing restores Real, never Int.
inline std::string fmt_real(double v) { return nlohmann::json(v).dump(); }

inline nlohmann::json value_to_json(const Value& v) {
  nlohmann::json j;
  switch (v.kind) {
    case ValueKind::Int: j["int"] = v.i; break;
    case ValueKind::Real: j["real"] = v.a; break;
    case ValueKind::Bool: j["bool"] = v.i != 0; break;
    case ValueKind::Dual: j["dual"] = {v.a, v.b}; break;
    case ValueKind::Tag: j["tag"] = {v.label, v.a}; break;
  }
  return j;
}

inline Value value_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) throw EvalError("value JSON must be a one-key object");
  if (j.contains("int")) {
    const auto& x = j["int"];
    if (!x.is_number_integer()) throw EvalError("\"int\" wants an integer");
    return make_int(x.get<std::int64_t>());
  }
  if (j.contains("real")) {
    const auto& x = j["real"];
    if (!x.is_number()) throw EvalError("\"real\" wants a number");
    return make_real(x.get<double>());
  }
  if (j.contains("bool")) {
    const auto& x = j["bool"];
    if (!x.is_boolean()) throw EvalError("\"bool\" wants a boolean");
    return make_bool(x.get<bool>());
  }
  if (j.contains("dual")) {
    const auto& x = j["dual"];
    if (!x.is_array() || x.size() != 2 || !x[0].is_number() || !x[1].is_number())
      throw EvalError("\"dual\" wants [re, du]");
    return make_dual(x[0].get<double>(), x[1].get<double>());
  }
  if (j.contains("tag")) {
    const auto& x = j["tag"];
    if (!x.is_array() || x.size() != 2 || !x[0].is_string() || !x[1].is_number())
      throw EvalError("\"tag\" wants [label, amount]");
    return make_tag(x[0].get<std::string>(), x[1].get<double>());
  }
  throw EvalError("unknown value kind in JSON");
}

inline std::string format_value(const Value& v) { return value_to_json(v).dump(); }

inline Value parse_value(const std::string& s) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string("bad value JSON: ") + e.what());
  }
  return value_from_json(j);
}

// Human-oriented rendering for reports and error messages.
inline std::string describe(const Value& v) {
  switch (v.kind) {
    case ValueKind::Int: return std::to_string(v.i);
    case ValueKind::Real: return fmt_real(v.a);
    case ValueKind::Bool: return v.i ? "true" : "false";
    case ValueKind::Dual: return "Dual(" + fmt_real(v.a) + ", " + fmt_real(v.b) + ")";
    case ValueKind::Tag: return v.label + " " + fmt_real(v.a);
  }
  return "?";
}

// Bit-exact key for observational-equivalence grouping. Canonicalizes -0.0
// so two candidates differing only in signed zero collapse.
inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
}

inline std::uint64_t double_bits(double d) {
  if (d == 0.0) d = 0.0;  // normalize -0.0
  std::uint64_t u;
  static_assert(sizeof(u) == sizeof(d));
  __builtin_memcpy(&u, &d, sizeof(u));
  return u;
}

inline std::uint64_t value_obs_hash(const Value& v) {
  std::uint64_t h = static_cast<std::uint64_t>(v.kind) + 1;
  switch (v.kind) {
    case ValueKind::Int:
    case ValueKind::Bool: hash_mix(h, static_cast<std::uint64_t>(v.i)); break;
    case ValueKind::Real: hash_mix(h, double_bits(v.a)); break;
    case ValueKind::Dual:
      hash_mix(h, double_bits(v.a));
      hash_mix(h, double_bits(v.b));
      break;
    case ValueKind::Tag:
      for (char c : v.label) hash_mix(h, static_cast<unsigned char>(c));
      hash_mix(h, double_bits(v.a));
      break;
  }
  return h;
}

inline bool value_identical(const Value& x, const Value& y) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case ValueKind::Int:
    case ValueKind::Bool: return x.i == y.i;
    case ValueKind::Real: return double_bits(x.a) == double_bits(y.a);
    case ValueKind::Dual:
      return double_bits(x.a) == double_bits(y.a) && double_bits(x.b) == double_bits(y.b);
    case ValueKind::Tag: return x.label == y.label && double_bits(x.a) == double_bits(y.a);
  }
  return false;
}

}  // namespace agsynth
