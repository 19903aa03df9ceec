#pragma once
// Hole DSL: typed expression grammars, candidate expressions, evaluation,
// and bottom-up enumeration with observational-equivalence dedup.

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "agsynth/rng.hpp"
#include "agsynth/values.hpp"

namespace agsynth {

using Env = std::vector<Value>;

// ---------------------------------------------------------------------------
// Hole signatures. A Dual parameter k is destructured into two real-valued
// scalar names a_k (value part) and d_k (derivative part); scalar parameters
// get one name each: c_k (int), x_k (real), b_k (bool), t_k (tag).

struct HoleSignature {
  std::vector<ValueKind> params;
  ValueKind ret = ValueKind::Dual;
  std::string entry;                  // DSL entry nonterminal

  std::vector<std::string> env_names; // slot -> scalar name
  std::vector<ValueKind> env_kinds;   // slot -> scalar kind
  std::vector<int> param_slot;        // param index -> first slot
};

inline HoleSignature make_signature(std::vector<ValueKind> params, ValueKind ret,
                                    std::string entry) {
  HoleSignature s;
  s.params = std::move(params);
  s.ret = ret;
  s.entry = std::move(entry);
  for (std::size_t k = 0; k < s.params.size(); ++k) {
    std::string idx = std::to_string(k + 1);
    s.param_slot.push_back(static_cast<int>(s.env_names.size()));
    switch (s.params[k]) {
      case ValueKind::Dual:
        s.env_names.push_back("a_" + idx);
        s.env_kinds.push_back(ValueKind::Real);
        s.env_names.push_back("d_" + idx);
        s.env_kinds.push_back(ValueKind::Real);
        break;
      case ValueKind::Int:
        s.env_names.push_back("c_" + idx);
        s.env_kinds.push_back(ValueKind::Int);
        break;
      case ValueKind::Real:
        s.env_names.push_back("x_" + idx);
        s.env_kinds.push_back(ValueKind::Real);
        break;
      case ValueKind::Bool:
        s.env_names.push_back("b_" + idx);
        s.env_kinds.push_back(ValueKind::Bool);
        break;
      case ValueKind::Tag:
        s.env_names.push_back("t_" + idx);
        s.env_kinds.push_back(ValueKind::Tag);
        break;
    }
  }
  return s;
}

inline int sig_slot(const HoleSignature& s, const std::string& name) {
  for (std::size_t i = 0; i < s.env_names.size(); ++i)
    if (s.env_names[i] == name) return static_cast<int>(i);
  return -1;
}

// Checks arg kinds against the declaration and fills the scalar env.
inline bool destructure_args(const HoleSignature& sig, const std::vector<Value>& args,
                             Env& env) {
  if (args.size() != sig.params.size()) return false;
  env.clear();
  env.reserve(sig.env_names.size());
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k].kind != sig.params[k]) return false;
    if (sig.params[k] == ValueKind::Dual) {
      env.push_back(make_real(args[k].a));
      env.push_back(make_real(args[k].b));
    } else {
      env.push_back(args[k]);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Candidate expressions.

struct DslExpr;
using DslExprPtr = std::shared_ptr<const DslExpr>;

struct DslExpr {
  enum class K { Const, Param, App };
  K k = K::Const;
  Value cval;                   // Const
  int slot = -1;                // Param: signature env slot
  std::string pname;            // Param: display name
  bool lift = false;            // Param: int slot read as a real
  Builtin op = Builtin::Add;    // App
  std::vector<DslExprPtr> kids;
  int size = 1;                 // node count
};

inline DslExprPtr dsl_const(Value v) {
  auto e = std::make_shared<DslExpr>();
  e->k = DslExpr::K::Const;
  e->cval = std::move(v);
  return e;
}

inline DslExprPtr dsl_param(int slot, std::string name, bool lift = false) {
  auto e = std::make_shared<DslExpr>();
  e->k = DslExpr::K::Param;
  e->slot = slot;
  e->pname = std::move(name);
  e->lift = lift;
  return e;
}

inline DslExprPtr dsl_app(Builtin op, std::vector<DslExprPtr> kids) {
  auto e = std::make_shared<DslExpr>();
  e->k = DslExpr::K::App;
  e->op = op;
  int sz = 1;
  for (auto& c : kids) sz += c->size;
  e->kids = std::move(kids);
  e->size = sz;
  return e;
}

inline bool try_eval_dsl(const DslExpr& e, const Env& env, Value& out,
                         const CurrencyTable& rates = default_currency_table()) {
  switch (e.k) {
    case DslExpr::K::Const: out = e.cval; return true;
    case DslExpr::K::Param:
      if (e.slot < 0 || e.slot >= static_cast<int>(env.size())) return false;
      out = env[e.slot];
      if (e.lift) {
        if (out.kind == ValueKind::Int) out = make_real(static_cast<double>(out.i));
        else if (out.kind != ValueKind::Real) return false;
      }
      return true;
    case DslExpr::K::App: {
      Value args[3];
      std::size_t n = e.kids.size();
      if (n > 3) return false;
      for (std::size_t i = 0; i < n; ++i)
        if (!try_eval_dsl(*e.kids[i], env, args[i], rates)) return false;
      return try_apply(e.op, args, n, out, rates);
    }
  }
  return false;
}

inline Value eval_expr(const DslExpr& e, const Env& env,
                       const CurrencyTable& rates = default_currency_table()) {
  Value out;
  if (!try_eval_dsl(e, env, out, rates)) throw EvalError("DSL evaluation failed");
  return out;
}

// Applies a hole body to call-site argument values.
inline bool try_apply_body(const HoleSignature& sig, const DslExpr& body,
                           const std::vector<Value>& args, Value& out,
                           const CurrencyTable& rates = default_currency_table()) {
  Env env;
  if (!destructure_args(sig, args, env)) return false;
  if (!try_eval_dsl(body, env, out, rates)) return false;
  return out.kind == sig.ret;
}

inline std::string print_dsl(const DslExpr& e) {
  switch (e.k) {
    case DslExpr::K::Const:
      return describe(e.cval);
    case DslExpr::K::Param:
      return e.lift ? "real(" + e.pname + ")" : e.pname;
    case DslExpr::K::App: {
      std::string s = builtin_name(e.op);
      s += "(";
      for (std::size_t i = 0; i < e.kids.size(); ++i) {
        if (i) s += ", ";
        s += print_dsl(*e.kids[i]);
      }
      s += ")";
      return s;
    }
  }
  return "?";
}

inline bool dsl_equal(const DslExpr& x, const DslExpr& y) {
  if (x.k != y.k || x.size != y.size) return false;
  switch (x.k) {
    case DslExpr::K::Const: return value_identical(x.cval, y.cval);
    case DslExpr::K::Param: return x.slot == y.slot && x.lift == y.lift;
    case DslExpr::K::App: {
      if (x.op != y.op || x.kids.size() != y.kids.size()) return false;
      for (std::size_t i = 0; i < x.kids.size(); ++i)
        if (!dsl_equal(*x.kids[i], *y.kids[i])) return false;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// DSL grammars. `param` and `lit` are kind-polymorphic pseudo-leaves: as a
// bare alternative they take the host nonterminal's kind; as an App child
// they are int-kind (the pow-exponent position).

struct DslAlt {
  enum class K { ConstInt, ConstBool, ParamLeaf, LitLeaf, App };
  K k = K::ConstInt;
  long long n = 0;
  bool bval = false;
  Builtin op = Builtin::Add;
  std::vector<std::string> children;  // NT names or "lit"/"param"
};

struct DslNt {
  std::string name;
  ValueKind kind = ValueKind::Real;
  std::vector<DslAlt> alts;
};

struct DslGrammar {
  std::vector<DslNt> nts;
  std::vector<long long> lit_pool{-1, 0, 1, 2};

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nts.size(); ++i)
      if (nts[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

// Adds a literal to the pool if new (sketch-declared literals join the
// default pool {-1, 0, 1, 2}).
inline void pool_add(DslGrammar& g, long long n) {
  for (long long v : g.lit_pool)
    if (v == n) return;
  g.lit_pool.push_back(n);
}

inline std::optional<ValueKind> dsl_alt_result_kind(const DslGrammar& g, const DslAlt& a,
                                                    ValueKind host) {
  auto child_kind = [&](const std::string& c) -> std::optional<ValueKind> {
    if (c == "lit" || c == "param") return ValueKind::Int;
    int id = g.index_of(c);
    if (id < 0) return std::nullopt;
    return g.nts[id].kind;
  };
  switch (a.k) {
    case DslAlt::K::ConstInt:
    case DslAlt::K::LitLeaf:
      return (host == ValueKind::Int || host == ValueKind::Real) ? std::optional(host)
                                                                 : std::nullopt;
    case DslAlt::K::ConstBool: return ValueKind::Bool;
    case DslAlt::K::ParamLeaf: return host;
    case DslAlt::K::App: {
      std::vector<ValueKind> ks;
      for (auto& c : a.children) {
        auto k = child_kind(c);
        if (!k) return std::nullopt;
        ks.push_back(*k);
      }
      if (static_cast<int>(ks.size()) != builtin_arity(a.op)) return std::nullopt;
      switch (a.op) {
        case Builtin::MkDual: return ValueKind::Dual;
        case Builtin::Eq:
        case Builtin::Ne:
        case Builtin::Lt:
        case Builtin::Le:
        case Builtin::Gt:
        case Builtin::Ge: return ValueKind::Bool;
        case Builtin::Ite: return ks[1];
        case Builtin::Pow: return ks[0];
        case Builtin::Mul:
        case Builtin::Div:
          if (ks[0] == ValueKind::Tag || ks[1] == ValueKind::Tag) return ValueKind::Tag;
          return ks[0];
        default: return ks[0];
      }
    }
  }
  return std::nullopt;
}

// Structural validation: children resolvable, result kinds match the host
// nonterminal, every nonterminal can derive a finite expression.
inline void validate_dsl(const DslGrammar& g) {
  for (auto& nt : g.nts) {
    if (nt.alts.empty()) throw EvalError("DSL nonterminal " + nt.name + " has no alternatives");
    for (auto& a : nt.alts) {
      if (a.k == DslAlt::K::App) {
        for (auto& c : a.children) {
          if (c != "lit" && c != "param" && g.index_of(c) < 0)
            throw EvalError("DSL alternative in " + nt.name + " references unknown " + c);
        }
      }
      auto rk = dsl_alt_result_kind(g, a, nt.kind);
      if (!rk || *rk != nt.kind)
        throw EvalError("DSL alternative in " + nt.name + " does not produce kind " +
                        kind_name(nt.kind));
    }
  }
  // productivity: assume leaf alternatives are inhabited, iterate to fixpoint
  std::vector<bool> productive(g.nts.size(), false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < g.nts.size(); ++i) {
      if (productive[i]) continue;
      for (auto& a : g.nts[i].alts) {
        bool ok = true;
        if (a.k == DslAlt::K::App) {
          for (auto& c : a.children) {
            if (c == "lit" || c == "param") continue;
            int id = g.index_of(c);
            if (id < 0 || !productive[id]) { ok = false; break; }
          }
        }
        if (ok) { productive[i] = true; changed = true; break; }
      }
    }
  }
  for (std::size_t i = 0; i < g.nts.size(); ++i)
    if (!productive[i]) throw EvalError("DSL nonterminal " + g.nts[i].name + " is unproductive");
}

// ---------------------------------------------------------------------------
// Bottom-up enumeration. Pools are per-nonterminal, per-size, deduplicated by
// the candidate's value fingerprint on the probe envs; the canonical order is
// alternative declaration order, then size compositions lexicographically,
// then child indices lexicographically.

namespace detail {

// Size splits (re, du) of a wrapped-dual body with total t, balanced pairs
// first so the large pool levels of a lopsided split are only materialized
// once the cheaper splits are spent.
inline std::vector<std::pair<int, int>> dual_splits(int t, int max_comp) {
  std::vector<std::pair<int, int>> out;
  for (int sr = 1; sr <= t - 2; ++sr) {
    int sd = t - 1 - sr;
    if (sr > max_comp || sd > max_comp) continue;
    out.push_back({sr, sd});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::max(a.first, a.second) < std::max(b.first, b.second);
  });
  return out;
}

}  // namespace detail

struct PoolEntry {
  DslExprPtr e;
  std::uint64_t obs = 0;   // fingerprint over probe envs
};

class DslPool {
 public:
  DslPool(const DslGrammar& g, const HoleSignature& sig, std::vector<Env> probes,
          CurrencyTable rates = default_currency_table())
      : g_(g), sig_(sig), probes_(std::move(probes)), rates_(std::move(rates)) {
    entry_ = g_.index_of(sig_.entry);
    if (entry_ < 0) throw EvalError("unknown DSL entry nonterminal " + sig_.entry);
    ValueKind ek = g_.nts[entry_].kind;
    dual_wrap_ = sig_.ret == ValueKind::Dual && ek != ValueKind::Dual;
    if (!dual_wrap_ && ek != sig_.ret)
      throw EvalError("DSL entry kind does not match hole return kind");
    pools_.resize(g_.nts.size());
    seen_.resize(g_.nts.size());
    leaf_cache_built_ = false;
  }

  const DslGrammar& grammar() const { return g_; }
  const HoleSignature& signature() const { return sig_; }
  bool dual_wrap() const { return dual_wrap_; }
  int entry_nt() const { return entry_; }
  const std::vector<Env>& probes() const { return probes_; }
  const CurrencyTable& rates() const { return rates_; }

  // Minimum size of any complete hole body.
  int min_body_size() {
    int m = min_size(entry_);
    if (m == kInf) return kInf;
    return dual_wrap_ ? 1 + 2 * m : m;
  }

  const std::vector<PoolEntry>& level(int nt, int size) {
    build_to(nt, size);
    return pools_[nt][size];
  }

  // Enumerates complete hole bodies of exactly `size` in canonical order;
  // the callback returns false to stop. Returns false if stopped early.
  bool bodies_of_size(int size, const std::function<bool(const DslExprPtr&)>& f) {
    if (!dual_wrap_) {
      for (auto& pe : level(entry_, size))
        if (!f(pe.e)) return false;
      return true;
    }
    if (size < 3) return true;
    for (int sr = 1; sr <= size - 2; ++sr) {
      int sd = size - 1 - sr;
      auto& rs = level(entry_, sr);
      if (rs.empty()) continue;
      auto& ds = level(entry_, sd);
      if (ds.empty()) continue;
      for (auto& r : rs)
        for (auto& d : ds)
          if (!f(dsl_app(Builtin::MkDual, {r.e, d.e}))) return false;
    }
    return true;
  }

  static constexpr int kInf = std::numeric_limits<int>::max() / 4;

  int min_size(int nt) {
    compute_min_sizes();
    return min_size_[nt];
  }

 private:
  void compute_min_sizes() {
    if (!min_size_.empty()) return;
    min_size_.assign(g_.nts.size(), kInf);
    build_leaf_cache();
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < g_.nts.size(); ++i) {
        for (auto& a : g_.nts[i].alts) {
          int s = alt_min_size(static_cast<int>(i), a);
          if (s < min_size_[i]) { min_size_[i] = s; changed = true; }
        }
      }
    }
  }

  int alt_min_size(int nt, const DslAlt& a) {
    switch (a.k) {
      case DslAlt::K::ConstInt:
      case DslAlt::K::ConstBool: return 1;
      case DslAlt::K::ParamLeaf:
        return has_param_leaf(g_.nts[nt].kind) ? 1 : kInf;
      case DslAlt::K::LitLeaf:
        return g_.lit_pool.empty() ? kInf : 1;
      case DslAlt::K::App: {
        int s = 1;
        for (auto& c : a.children) {
          int cs;
          if (c == "lit") cs = g_.lit_pool.empty() ? kInf : 1;
          else if (c == "param") cs = int_param_slots_.empty() ? kInf : 1;
          else cs = min_size_[g_.index_of(c)];
          if (cs >= kInf) return kInf;
          s += cs;
        }
        return s;
      }
    }
    return kInf;
  }

  void build_leaf_cache() {
    if (leaf_cache_built_) return;
    leaf_cache_built_ = true;
    for (std::size_t s = 0; s < sig_.env_kinds.size(); ++s) {
      if (sig_.env_kinds[s] == ValueKind::Int)
        int_param_slots_.push_back(static_cast<int>(s));
    }
    // int-kind leaf lists used by "lit"/"param" App children
    for (long long n : g_.lit_pool)
      lit_child_leaves_.push_back(entry_of(dsl_const(make_int(n))));
    for (int s : int_param_slots_)
      param_child_leaves_.push_back(entry_of(dsl_param(s, sig_.env_names[s])));
  }

  // Int params are usable as real leaves (a real context reads the int as a
  // real); all other kinds must match exactly.
  bool has_param_leaf(ValueKind k) const {
    for (auto pk : sig_.env_kinds)
      if (pk == k || (k == ValueKind::Real && pk == ValueKind::Int)) return true;
    return false;
  }

  PoolEntry entry_of(DslExprPtr e) {
    PoolEntry pe;
    pe.obs = fingerprint(*e);
    pe.e = std::move(e);
    return pe;
  }

  std::uint64_t fingerprint(const DslExpr& e) {
    std::uint64_t h = 0xabcdef12345ull;
    bool any_ok = false;
    Value out;
    for (auto& env : probes_) {
      if (try_eval_dsl(e, env, out, rates_)) {
        any_ok = true;
        hash_mix(h, value_obs_hash(out));
      } else {
        hash_mix(h, 0xdeadull);
      }
    }
    return any_ok ? h : 0;  // 0 marks error-on-every-probe
  }

  void build_to(int nt, int size) {
    compute_min_sizes();
    auto& levels = pools_[nt];
    while (static_cast<int>(levels.size()) <= size) {
      int s = static_cast<int>(levels.size());
      if (s == 0) { levels.emplace_back(); continue; }
      levels.emplace_back();
      build_level(nt, s);
    }
  }

  void add_candidate(int nt, int s, DslExprPtr e) {
    PoolEntry pe = entry_of(std::move(e));
    if (pe.obs == 0) return;  // never evaluates on any probe
    if (!seen_[nt].insert(pe.obs).second) return;
    pools_[nt][s].push_back(std::move(pe));
  }

  void build_level(int nt, int s) {
    ValueKind host = g_.nts[nt].kind;
    build_leaf_cache();
    for (auto& a : g_.nts[nt].alts) {
      switch (a.k) {
        case DslAlt::K::ConstInt:
          if (s == 1) add_candidate(nt, s, dsl_const(lift_const(a.n, host)));
          break;
        case DslAlt::K::ConstBool:
          if (s == 1) add_candidate(nt, s, dsl_const(make_bool(a.bval)));
          break;
        case DslAlt::K::LitLeaf:
          if (s == 1 && (host == ValueKind::Int || host == ValueKind::Real))
            for (long long n : g_.lit_pool)
              add_candidate(nt, s, dsl_const(lift_const(n, host)));
          break;
        case DslAlt::K::ParamLeaf:
          if (s == 1) {
            for (std::size_t slot = 0; slot < sig_.env_kinds.size(); ++slot) {
              ValueKind pk = sig_.env_kinds[slot];
              if (pk == host)
                add_candidate(nt, s, dsl_param(static_cast<int>(slot), sig_.env_names[slot]));
              else if (host == ValueKind::Real && pk == ValueKind::Int)
                add_candidate(nt, s,
                              dsl_param(static_cast<int>(slot), sig_.env_names[slot], true));
            }
          }
          break;
        case DslAlt::K::App: {
          int m = static_cast<int>(a.children.size());
          if (s < 1 + m) break;
          std::vector<int> comp(m, 1);
          // iterate compositions of (s - 1) into m positive parts, lex order
          std::function<void(int, int)> rec = [&](int idx, int rest) {
            if (idx == m - 1) {
              comp[idx] = rest;
              emit_apps(nt, s, a, comp);
              return;
            }
            for (int v = 1; v <= rest - (m - 1 - idx); ++v) {
              comp[idx] = v;
              rec(idx + 1, rest - v);
            }
          };
          rec(0, s - 1);
          break;
        }
      }
    }
  }

  void emit_apps(int nt, int s, const DslAlt& a, const std::vector<int>& comp) {
    int m = static_cast<int>(a.children.size());
    std::vector<const std::vector<PoolEntry>*> lists(m);
    for (int i = 0; i < m; ++i) {
      const std::string& c = a.children[i];
      if (c == "lit" || c == "param") {
        if (comp[i] != 1) return;
        lists[i] = c == "lit" ? &lit_child_leaves_ : &param_child_leaves_;
      } else {
        int cid = g_.index_of(c);
        if (comp[i] < min_size_[cid]) return;
        build_to(cid, comp[i]);
        lists[i] = &pools_[cid][comp[i]];
      }
      if (lists[i]->empty()) return;
    }
    std::vector<std::size_t> idx(m, 0);
    std::vector<DslExprPtr> kids(m);
    while (true) {
      for (int i = 0; i < m; ++i) kids[i] = (*lists[i])[idx[i]].e;
      add_candidate(nt, s, dsl_app(a.op, kids));
      int i = m - 1;
      while (i >= 0) {
        if (++idx[i] < lists[i]->size()) break;
        idx[i] = 0;
        --i;
      }
      if (i < 0) break;
    }
  }

  static Value lift_const(long long n, ValueKind host) {
    return host == ValueKind::Real ? make_real(static_cast<double>(n))
                                   : make_int(n);
  }

  const DslGrammar& g_;
  HoleSignature sig_;
  std::vector<Env> probes_;
  CurrencyTable rates_;
  int entry_ = -1;
  bool dual_wrap_ = false;
  // deque levels: growing a nonterminal's level list must not invalidate
  // references into already-built levels (enumeration is reentrant)
  std::vector<std::deque<std::vector<PoolEntry>>> pools_;  // [nt][size]
  std::vector<std::unordered_set<std::uint64_t>> seen_;
  std::vector<int> min_size_;
  std::vector<int> int_param_slots_;
  std::vector<PoolEntry> lit_child_leaves_, param_child_leaves_;
  bool leaf_cache_built_ = false;
};

// Materialized canonical candidate stream (mainly for tests; synthesis walks
// DslPool levels directly).
inline std::vector<DslExprPtr> enumerate_candidates(const DslGrammar& g,
                                                    const HoleSignature& sig, int max_size,
                                                    const std::vector<Env>& probes,
                                                    const CurrencyTable& rates
                                                    = default_currency_table(),
                                                    std::size_t limit = SIZE_MAX) {
  DslPool pool(g, sig, probes, rates);
  std::vector<DslExprPtr> out;
  for (int s = 1; s <= max_size && out.size() < limit; ++s) {
    pool.bodies_of_size(s, [&](const DslExprPtr& e) {
      out.push_back(e);
      return out.size() < limit;
    });
  }
  return out;
}

// Default observational probe envs for a signature: a small structured grid
// plus seeded random draws. Used both for enumeration dedup and as candidate
// distinguishers.
inline std::vector<Env> make_probe_envs(const HoleSignature& sig, int count,
                                        std::uint64_t seed,
                                        const CurrencyTable& rates = default_currency_table()) {
  static const double grid_re[] = {1, 0, 2, -1, 3, 0.5};
  static const double grid_du[] = {0, 1, 1, 2, -1, -2};
  static const std::int64_t grid_int[] = {0, 1, 2, -1, 3, -2};
  Rng rng(seed ^ 0x5eedf00dull);
  std::vector<std::string> labels;
  for (auto& kv : rates) labels.push_back(kv.first);
  if (labels.empty()) labels.push_back("USD");
  std::vector<Env> envs;
  for (int n = 0; n < count; ++n) {
    Env env;
    bool grid = n < 6;
    for (std::size_t s = 0; s < sig.env_kinds.size(); ++s) {
      switch (sig.env_kinds[s]) {
        case ValueKind::Real: {
          double v;
          if (grid) {
            // alternate value/derivative flavors so dual pairs look natural
            v = (s % 2 == 0) ? grid_re[n] : grid_du[n];
            v += static_cast<double>(s / 2);  // decorrelate repeated params
          } else {
            v = rng.uniform_real(-3.0, 3.0);
          }
          env.push_back(make_real(v));
          break;
        }
        case ValueKind::Int:
          env.push_back(make_int(grid ? grid_int[(n + s) % 6] : rng.uniform_int(-4, 6)));
          break;
        case ValueKind::Bool:
          env.push_back(make_bool(grid ? (n + s) % 2 == 0 : rng.chance(0.5)));
          break;
        case ValueKind::Dual:
          env.push_back(make_dual(grid ? grid_re[n] : rng.uniform_real(-3, 3),
                                  grid ? grid_du[n] : rng.uniform_real(-3, 3)));
          break;
        case ValueKind::Tag:
          env.push_back(make_tag(labels[(n + s) % labels.size()],
                                 grid ? 1.0 + n : rng.uniform_real(0.5, 20.0)));
          break;
      }
    }
    envs.push_back(std::move(env));
  }
  return envs;
}

}  // namespace agsynth
