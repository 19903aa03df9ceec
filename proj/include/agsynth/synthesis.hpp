#pragma once

// Hole synthesis from example traces.
//
// The core solver takes trace constraints (one per example), the bodies of
// holes that are already fixed, and a search budget, and looks for the
// canonically smallest assignment of DSL bodies to the remaining holes that
// satisfies every constraint. Holes are first grouped into connected
// components (holes co-occurring in some trace share a component), then each
// component is solved by the cheapest applicable strategy:
//
//   * single hole: every constraint where the hole is called exactly once
//     with concretely known arguments yields an output requirement. When the
//     call is the final output the requirement is the expected value itself;
//     otherwise the trace suffix is probed numerically and, when it responds
//     affinely to the hole output, inverted. Requirements turn the search
//     into a filtered scan of the candidate pool.
//   * two holes where one feeds the other and the downstream hole carries
//     requirements of its own: downstream candidates are enumerated first
//     and each induces requirements for the upstream hole.
//   * anything else: a plain product over the per-hole candidate streams in
//     order of total size.
//
// Requirement filters compare at a slightly relaxed tolerance; a full
// evaluation of every constraint at the caller's tolerance remains the final
// arbiter before a candidate is accepted. A failed search distinguishes a
// proven-exhausted space (Unsat) from one abandoned because of budget or
// structural gaps (Budget).
//
// On top of the solver sit the grammar-level drivers: all-at-once synthesis
// (one solver call over every example) and the incremental loop that picks
// examples touching the fewest hole-bearing productions first, freezes
// solved holes, and evicts bindings refuted by later examples.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "example.hpp"

namespace agsynth {

struct SynthesisBudget {
  int max_dsl_size = 12;               // per scalar DSL component
  long long max_candidates = 5000000;  // complete hole-body tuples verified per run
  int max_refutations = 16;            // eviction events before the driver gives up
  std::uint64_t seed = 1;
  double tol = 1e-6;          // output comparison tolerance
  int max_pool_level = 7;     // largest fully materialized pool level
  int probe_count = 14;       // observational-equivalence probe envs
  long long max_scan_ops = 300000000;  // composed-scan evaluations per solver call
};

struct SynthStats {
  long long candidates = 0;  // complete hole-body tuples checked against constraints
  int synth_calls = 0;
  int refutations = 0;
};

enum class SynthStatus { Success, Unsat, Budget };

inline const char* synth_status_name(SynthStatus s) {
  switch (s) {
    case SynthStatus::Success: return "success";
    case SynthStatus::Unsat: return "unsat";
    case SynthStatus::Budget: return "budget";
  }
  return "?";
}

struct SynthResult {
  SynthStatus status = SynthStatus::Unsat;
  HoleBodies bindings;  // newly solved holes on Success
  SynthStats stats;
  std::string detail;  // human-readable note on failure paths
};

struct Constraint {
  Trace trace;
  Value expected;
  std::string label;  // example input, for diagnostics
};

namespace detail {

constexpr double kFilterSlack = 4.0;   // requirement filters compare at tol * slack
constexpr double kAffineEps = 1e-7;    // relative affineness check epsilon
constexpr double kSingularEps = 1e-9;  // relative singularity threshold
constexpr double kRank1Eps = 1e-3;     // residual-off-the-line threshold for rank-1 suffixes
constexpr int kMaxValidPerSize = 64;   // filtered candidates kept per component size
constexpr int kRawSpanCap = 4;         // unfiltered partner sweeps stop this far above minimum size

// ---------------------------------------------------------------------------
// Traces compiled to register form for fast repeated evaluation. Step i of a
// trace defines register i; variable references become register reads and
// hole calls become indices into a per-call body table.

struct CompiledExpr {
  enum class K { Const, Reg, Op, Hole };
  K k = K::Const;
  Value cval;
  int reg = -1;
  Builtin op = Builtin::Add;
  int hole = -1;
  const HoleSignature* sig = nullptr;
  std::vector<CompiledExpr> kids;
};

struct HoleTable {
  std::vector<std::string> names;
  std::map<std::string, int> index;

  int id(const std::string& n) {
    auto it = index.find(n);
    if (it != index.end()) return it->second;
    int k = static_cast<int>(names.size());
    names.push_back(n);
    index.emplace(n, k);
    return k;
  }
};

struct CompiledConstraint {
  std::vector<CompiledExpr> steps;
  int out_reg = -1;
  Value expected;
  std::string label;

  // unbound-call metadata, relative to the frozen set of one solver call
  std::vector<int> usites;      // steps whose whole rhs is an unbound hole call
  std::vector<int> usite_hole;  // parallel hole ids
  std::vector<int> uholes;      // sorted unique unbound hole ids, any position
  std::map<int, int> occ;       // unbound hole id -> occurrence count
  bool nested_unbound = false;  // unbound call somewhere inside a larger rhs
};

inline CompiledExpr compile_trace_expr(const TraceExpr& e, const std::map<std::string, int>& regs,
                                       HoleTable& holes, const HoleSigs& sigs) {
  CompiledExpr c;
  switch (e.k) {
    case TraceExpr::K::Const:
      c.k = CompiledExpr::K::Const;
      c.cval = e.cval;
      break;
    case TraceExpr::K::Var: {
      auto it = regs.find(e.name);
      if (it == regs.end()) throw EvalError("trace reads undefined variable " + e.name);
      c.k = CompiledExpr::K::Reg;
      c.reg = it->second;
      break;
    }
    case TraceExpr::K::Builtin:
      c.k = CompiledExpr::K::Op;
      c.op = e.op;
      for (auto& a : e.args) c.kids.push_back(compile_trace_expr(*a, regs, holes, sigs));
      break;
    case TraceExpr::K::Holecall: {
      auto it = sigs.find(e.name);
      if (it == sigs.end()) throw EvalError("trace calls undeclared hole " + e.name);
      c.k = CompiledExpr::K::Hole;
      c.hole = holes.id(e.name);
      c.sig = &it->second;
      for (auto& a : e.args) c.kids.push_back(compile_trace_expr(*a, regs, holes, sigs));
      break;
    }
  }
  return c;
}

inline CompiledConstraint compile_constraint(const Constraint& con, HoleTable& holes,
                                             const HoleSigs& sigs) {
  CompiledConstraint cc;
  cc.expected = con.expected;
  cc.label = con.label;
  std::map<std::string, int> regs;
  for (std::size_t i = 0; i < con.trace.steps.size(); ++i) {
    const TraceStep& st = con.trace.steps[i];
    cc.steps.push_back(compile_trace_expr(*st.rhs, regs, holes, sigs));
    regs[st.var] = static_cast<int>(i);
    if (st.var == con.trace.out) cc.out_reg = static_cast<int>(i);
  }
  if (cc.out_reg < 0) throw EvalError("trace output " + con.trace.out + " is never assigned");
  return cc;
}

// Recomputes the unbound-call metadata for the given frozen set.
inline void classify_constraint(CompiledConstraint& cc, const std::vector<char>& unbound) {
  cc.usites.clear();
  cc.usite_hole.clear();
  cc.uholes.clear();
  cc.occ.clear();
  cc.nested_unbound = false;
  std::function<void(const CompiledExpr&, bool)> walk = [&](const CompiledExpr& e, bool top) {
    if (e.k == CompiledExpr::K::Hole && unbound[e.hole]) {
      cc.occ[e.hole]++;
      if (!top) cc.nested_unbound = true;
    }
    for (auto& k : e.kids) walk(k, false);
  };
  for (std::size_t i = 0; i < cc.steps.size(); ++i) {
    const CompiledExpr& e = cc.steps[i];
    walk(e, true);
    if (e.k == CompiledExpr::K::Hole && unbound[e.hole]) {
      cc.usites.push_back(static_cast<int>(i));
      cc.usite_hole.push_back(e.hole);
    }
  }
  for (auto& [h, n] : cc.occ) cc.uholes.push_back(h);
}

struct EvalScratch {
  std::vector<Value> regs;
  std::vector<char> has;

  void reset(std::size_t n) {
    regs.assign(n, Value{});
    has.assign(n, 0);
  }
};

inline bool eval_compiled_expr(const CompiledExpr& e, const std::vector<const DslExpr*>& bodies,
                               const CurrencyTable& rates, const EvalScratch& sc, Value& out) {
  switch (e.k) {
    case CompiledExpr::K::Const:
      out = e.cval;
      return true;
    case CompiledExpr::K::Reg:
      if (!sc.has[e.reg]) return false;
      out = sc.regs[e.reg];
      return true;
    case CompiledExpr::K::Op: {
      Value args[3];
      if (e.kids.size() > 3) return false;
      for (std::size_t i = 0; i < e.kids.size(); ++i)
        if (!eval_compiled_expr(e.kids[i], bodies, rates, sc, args[i])) return false;
      return try_apply(e.op, args, e.kids.size(), out, rates);
    }
    case CompiledExpr::K::Hole: {
      const DslExpr* body = bodies[e.hole];
      if (!body) return false;
      std::vector<Value> args(e.kids.size());
      for (std::size_t i = 0; i < e.kids.size(); ++i)
        if (!eval_compiled_expr(e.kids[i], bodies, rates, sc, args[i])) return false;
      Env env;
      if (!destructure_args(*e.sig, args, env)) return false;
      return try_eval_dsl(*body, env, out, rates);
    }
  }
  return false;
}

// Evaluates steps [from, to); registers persist in the scratch.
inline bool eval_compiled_steps(const CompiledConstraint& cc,
                                const std::vector<const DslExpr*>& bodies,
                                const CurrencyTable& rates, EvalScratch& sc, int from, int to) {
  for (int i = from; i < to; ++i) {
    Value v;
    if (!eval_compiled_expr(cc.steps[i], bodies, rates, sc, v)) return false;
    sc.regs[i] = std::move(v);
    sc.has[i] = 1;
  }
  return true;
}

inline bool eval_full_constraint(const CompiledConstraint& cc,
                                 const std::vector<const DslExpr*>& bodies,
                                 const CurrencyTable& rates, EvalScratch& sc, Value& out) {
  sc.reset(cc.steps.size());
  if (!eval_compiled_steps(cc, bodies, rates, sc, 0, static_cast<int>(cc.steps.size())))
    return false;
  out = sc.regs[cc.out_reg];
  return true;
}

// ---------------------------------------------------------------------------
// Output requirements. For a constraint with exactly one unresolved call,
// whose arguments are computable from the steps before it, the call output
// that would make the whole trace produce the expected value can often be
// recovered: directly when the call is the output step, or by numerically
// inverting the trace suffix when it responds affinely to the output.

struct Requirement {
  Env env;       // hole argument environment at the call site
  Value target;  // required hole output
};

enum class ReqStatus {
  Direct,    // requirement extracted, call is the output step
  Solved,    // requirement extracted by inverting the suffix
  NoFilter,  // constraint kept verify-only (suffix opaque to the probe)
  Hopeless,  // probes say the suffix ignores the output yet misses the target
  HardFail   // constraint can never pass regardless of the hole body
};

// Evaluates the trace with register `site` forced to y. The prefix [0, site)
// must already be materialized in the scratch.
inline bool probe_suffix(const CompiledConstraint& cc, int site,
                         const std::vector<const DslExpr*>& bodies, const CurrencyTable& rates,
                         EvalScratch& sc, const Value& y, Value& out) {
  sc.regs[site] = y;
  sc.has[site] = 1;
  if (!eval_compiled_steps(cc, bodies, rates, sc, site + 1, static_cast<int>(cc.steps.size())))
    return false;
  if (!sc.has[cc.out_reg]) return false;
  out = sc.regs[cc.out_reg];
  return true;
}

inline bool near_rel(double x, double y, double eps, double scale) {
  return std::fabs(x - y) <= eps * std::max(1.0, scale);
}

// Requires the prefix [0, site) to be evaluated in `sc` already and the call
// arguments to be concretely computable; fills req.env from them.
inline ReqStatus extract_requirement(const CompiledConstraint& cc, int site,
                                     const std::vector<const DslExpr*>& bodies,
                                     const CurrencyTable& rates, double filter_tol,
                                     EvalScratch& sc, Requirement& req) {
  const CompiledExpr& call = cc.steps[site];
  std::vector<Value> args(call.kids.size());
  for (std::size_t i = 0; i < call.kids.size(); ++i)
    if (!eval_compiled_expr(call.kids[i], bodies, rates, sc, args[i]))
      return ReqStatus::HardFail;  // argument evaluation cannot be fixed by any body
  if (!destructure_args(*call.sig, args, req.env)) return ReqStatus::HardFail;

  const Value& v = cc.expected;
  ValueKind ret = call.sig->ret;

  if (site == cc.out_reg) {
    if (v.kind != ret) return ReqStatus::HardFail;  // no body output can match the kind
    req.target = v;
    return ReqStatus::Direct;
  }

  auto G = [&](const Value& y, Value& out) {
    return probe_suffix(cc, site, bodies, rates, sc, y, out);
  };

  switch (ret) {
    case ValueKind::Dual: {
      if (v.kind != ValueKind::Dual) return ReqStatus::NoFilter;
      Value e00, e10, e01, e11, e23;
      if (!G(make_dual(0, 0), e00) || !G(make_dual(1, 0), e10) || !G(make_dual(0, 1), e01) ||
          !G(make_dual(1, 1), e11) || !G(make_dual(2, 3), e23))
        return ReqStatus::NoFilter;
      if (e00.kind != ValueKind::Dual || e10.kind != ValueKind::Dual ||
          e01.kind != ValueKind::Dual || e11.kind != ValueKind::Dual ||
          e23.kind != ValueKind::Dual)
        return ReqStatus::NoFilter;
      if (value_eq(e00, e10, filter_tol) && value_eq(e00, e01, filter_tol) &&
          value_eq(e00, e11, filter_tol) && value_eq(e00, e23, filter_tol))
        return value_eq(e00, v, filter_tol) ? ReqStatus::NoFilter : ReqStatus::Hopeless;
      double ax = e10.a - e00.a, bx = e01.a - e00.a;  // d out.re / d y.{re,du}
      double ay = e10.b - e00.b, by = e01.b - e00.b;  // d out.du / d y.{re,du}
      double scale = 0;
      for (const Value* p : std::initializer_list<const Value*>{&e00, &e10, &e01, &e11, &e23, &v})
        scale = std::max(scale, std::max(std::fabs(p->a), std::fabs(p->b)));
      // two-point affineness check: predictions at (1,1) and (2,3)
      if (!near_rel(e11.a, e00.a + ax + bx, kAffineEps, scale) ||
          !near_rel(e11.b, e00.b + ay + by, kAffineEps, scale) ||
          !near_rel(e23.a, e00.a + 2 * ax + 3 * bx, kAffineEps, scale) ||
          !near_rel(e23.b, e00.b + 2 * ay + 3 * by, kAffineEps, scale))
        return ReqStatus::NoFilter;
      double det = ax * by - bx * ay;
      if (std::fabs(det) <= kSingularEps * std::max(1.0, scale * scale)) {
        // Affine but rank-deficient: the reachable outputs form a line (or a
        // point). If the residual clearly leaves that line, no output works.
        double rx0 = v.a - e00.a, ry0 = v.b - e00.b;
        double n1 = std::fabs(ax) + std::fabs(ay), n2 = std::fabs(bx) + std::fabs(by);
        double cx = n1 >= n2 ? ax : bx, cy = n1 >= n2 ? ay : by;
        if (std::max(n1, n2) <= kSingularEps * std::max(1.0, scale)) {
          // zero response: output is pinned at e00
          return value_eq(e00, v, filter_tol) ? ReqStatus::NoFilter : ReqStatus::Hopeless;
        }
        double cross = cx * ry0 - cy * rx0;
        if (std::fabs(cross) > kRank1Eps * std::max(1.0, scale * scale))
          return ReqStatus::Hopeless;
        return ReqStatus::NoFilter;
      }
      double rx = v.a - e00.a, ry = v.b - e00.b;
      double yre = (by * rx - bx * ry) / det;
      double ydu = (-ay * rx + ax * ry) / det;
      if (!std::isfinite(yre) || !std::isfinite(ydu)) return ReqStatus::NoFilter;
      Value check;
      if (!G(make_dual(yre, ydu), check) || !value_eq(check, v, filter_tol))
        return ReqStatus::NoFilter;
      req.target = make_dual(yre, ydu);
      return ReqStatus::Solved;
    }
    case ValueKind::Real: {
      if (v.kind != ValueKind::Real) return ReqStatus::NoFilter;
      Value e0, e1, e2;
      if (!G(make_real(0), e0) || !G(make_real(1), e1) || !G(make_real(2), e2))
        return ReqStatus::NoFilter;
      if (e0.kind != ValueKind::Real || e1.kind != ValueKind::Real || e2.kind != ValueKind::Real)
        return ReqStatus::NoFilter;
      if (value_eq(e0, e1, filter_tol) && value_eq(e0, e2, filter_tol))
        return value_eq(e0, v, filter_tol) ? ReqStatus::NoFilter : ReqStatus::Hopeless;
      double scale = std::max({std::fabs(e0.a), std::fabs(e1.a), std::fabs(e2.a), std::fabs(v.a)});
      if (!near_rel(e2.a, 2 * e1.a - e0.a, kAffineEps, scale)) return ReqStatus::NoFilter;
      double slope = e1.a - e0.a;
      if (std::fabs(slope) <= kSingularEps * std::max(1.0, scale)) return ReqStatus::NoFilter;
      double r = (v.a - e0.a) / slope;
      if (!std::isfinite(r)) return ReqStatus::NoFilter;
      Value check;
      if (!G(make_real(r), check) || !value_eq(check, v, filter_tol)) return ReqStatus::NoFilter;
      req.target = make_real(r);
      return ReqStatus::Solved;
    }
    case ValueKind::Int: {
      if (v.kind != ValueKind::Int) return ReqStatus::NoFilter;
      Value e0, e1, e2;
      if (!G(make_int(0), e0) || !G(make_int(1), e1) || !G(make_int(2), e2))
        return ReqStatus::NoFilter;
      if (e0.kind != ValueKind::Int || e1.kind != ValueKind::Int || e2.kind != ValueKind::Int)
        return ReqStatus::NoFilter;
      long long slope = e1.i - e0.i;
      if (slope == 0 && e2.i == e0.i)
        return e0.i == v.i ? ReqStatus::NoFilter : ReqStatus::Hopeless;
      if (e2.i - e1.i != slope || slope == 0) return ReqStatus::NoFilter;
      if ((v.i - e0.i) % slope != 0) return ReqStatus::NoFilter;
      long long r = (v.i - e0.i) / slope;
      Value check;
      if (!G(make_int(r), check) || !value_eq(check, v, filter_tol)) return ReqStatus::NoFilter;
      req.target = make_int(r);
      return ReqStatus::Solved;
    }
    case ValueKind::Bool: {
      Value ef, et;
      bool okf = G(make_bool(false), ef) && value_eq(ef, v, filter_tol);
      bool okt = G(make_bool(true), et) && value_eq(et, v, filter_tol);
      if (okf && okt) return ReqStatus::NoFilter;
      if (!okf && !okt) return ReqStatus::HardFail;  // neither boolean output can pass
      req.target = make_bool(okt);
      return ReqStatus::Solved;
    }
    case ValueKind::Tag:
      return ReqStatus::NoFilter;
  }
  return ReqStatus::NoFilter;
}

// ---------------------------------------------------------------------------
// Filtered candidate scans. Candidate values on the fixed scan envs are
// cached per pool level, so repeated scans with fresh targets (the chain
// solver swaps targets per downstream candidate) only pay for comparisons.
// Sizes above the materialized pool levels are scanned compositionally, and
// only that part is metered: it is the one place the work can explode.

struct ScanCounters {
  long long ops = 0;
  long long limit = 0;
  bool capped = false;

  bool spend(long long n) {
    ops += n;
    if (ops > limit) {
      capped = true;
      return false;
    }
    return true;
  }
};

class HoleScan {
 public:
  HoleScan(DslPool& pool, std::vector<Env> envs, const SynthesisBudget& budget, ScanCounters& ops)
      : pool_(pool), envs_(std::move(envs)), ops_(ops) {
    comp_cap_ = std::min(budget.max_pool_level, budget.max_dsl_size);
  }

  int comp_cap() const { return comp_cap_; }
  const std::vector<Env>& envs() const { return envs_; }

  // Candidates of component `nt` at exact size `s` matching every requirement
  // (env index, required value). Numeric mode compares scalar components of a
  // wrapped dual numerically; exact mode uses kind-aware equality.
  std::vector<DslExprPtr> filtered(int nt, int s, const std::vector<std::pair<int, Value>>& reqs,
                                   bool numeric, double rtol, bool& complete) {
    std::vector<DslExprPtr> out;
    if (s < pool_.min_size(nt)) return out;
    if (s <= comp_cap_) {
      const auto& lvl = pool_.level(nt, s);
      for (std::size_t i = 0; i < lvl.size(); ++i) {
        bool match = true;
        for (auto& [env, want] : reqs) {
          const Row& r = table(nt, s, env)[i];
          if (!r.ok || !matches(r.v, want, numeric, rtol)) {
            match = false;
            break;
          }
        }
        if (match) {
          out.push_back(lvl[i].e);
          if (static_cast<int>(out.size()) >= kMaxValidPerSize) {
            complete = false;
            return out;
          }
        }
      }
      return out;
    }
    scan_composed(nt, s, reqs, numeric, rtol, out, complete);
    return out;
  }

 private:
  struct Row {
    char ok = 0;
    Value v;
  };

  static bool matches(const Value& got, const Value& want, bool numeric, double rtol) {
    if (!numeric) return value_eq(got, want, rtol);
    double g;
    if (got.kind == ValueKind::Real) g = got.a;
    else if (got.kind == ValueKind::Int) g = static_cast<double>(got.i);
    else return false;
    double w = want.kind == ValueKind::Int ? static_cast<double>(want.i) : want.a;
    return close_enough(g, w, rtol);
  }

  const std::vector<Row>& table(int nt, int s, int env) {
    auto key = std::make_tuple(nt, s, env);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
    const auto& lvl = pool_.level(nt, s);
    std::vector<Row> rows(lvl.size());
    for (std::size_t i = 0; i < lvl.size(); ++i)
      rows[i].ok = try_eval_dsl(*lvl[i].e, envs_[env], rows[i].v, pool_.rates()) ? 1 : 0;
    return tables_.emplace(key, std::move(rows)).first->second;
  }

  // Child candidate list plus its cached per-env values.
  struct ChildList {
    std::vector<DslExprPtr> exprs;
    std::vector<std::vector<Row>> vals;  // [env][idx]
  };

  bool leaf_list(const std::string& kind, ChildList& cl) {
    // mirrors the pool's int-kind leaf caches for "lit"/"param" children
    cl.exprs.clear();
    if (kind == "lit") {
      for (long long n : pool_.grammar().lit_pool) cl.exprs.push_back(dsl_const(make_int(n)));
    } else {
      const HoleSignature& sig = pool_.signature();
      for (std::size_t slot = 0; slot < sig.env_kinds.size(); ++slot)
        if (sig.env_kinds[slot] == ValueKind::Int)
          cl.exprs.push_back(dsl_param(static_cast<int>(slot), sig.env_names[slot]));
    }
    if (cl.exprs.empty()) return false;
    cl.vals.assign(envs_.size(), {});
    for (std::size_t e = 0; e < envs_.size(); ++e) {
      cl.vals[e].resize(cl.exprs.size());
      for (std::size_t i = 0; i < cl.exprs.size(); ++i)
        cl.vals[e][i].ok =
            try_eval_dsl(*cl.exprs[i], envs_[e], cl.vals[e][i].v, pool_.rates()) ? 1 : 0;
    }
    return true;
  }

  // Sizes above the materialized levels: compose a root operator over pooled
  // children, in the same order the pool itself would enumerate (alternatives
  // as declared, compositions lexicographic, children rightmost-fastest).
  void scan_composed(int nt, int s, const std::vector<std::pair<int, Value>>& reqs, bool numeric,
                     double rtol, std::vector<DslExprPtr>& out, bool& complete) {
    const DslGrammar& g = pool_.grammar();
    for (const DslAlt& a : g.nts[nt].alts) {
      if (a.k != DslAlt::K::App) continue;  // leaves only exist at size 1
      int m = static_cast<int>(a.children.size());
      if (s < 1 + m) continue;
      std::vector<int> comp(m, 1);
      std::function<bool(int, int)> rec = [&](int idx, int rest) -> bool {
        if (idx == m - 1) {
          comp[idx] = rest;
          return emit_composed(a, comp, reqs, numeric, rtol, out, complete);
        }
        for (int v = 1; v <= rest - (m - 1 - idx); ++v) {
          comp[idx] = v;
          if (!rec(idx + 1, rest - v)) return false;
        }
        return true;
      };
      if (!rec(0, s - 1)) return;  // stopped early: list full or scan capped
    }
  }

  bool emit_composed(const DslAlt& a, const std::vector<int>& comp,
                     const std::vector<std::pair<int, Value>>& reqs, bool numeric, double rtol,
                     std::vector<DslExprPtr>& out, bool& complete) {
    int m = static_cast<int>(a.children.size());
    if (m > 3) return true;
    std::vector<ChildList> owned(m);
    std::vector<const std::vector<DslExprPtr>*> exprs(m);
    std::vector<std::vector<const Row*>> vals(envs_.size(), std::vector<const Row*>(m));
    std::vector<std::size_t> sizes(m);
    for (int i = 0; i < m; ++i) {
      const std::string& c = a.children[i];
      if (c == "lit" || c == "param") {
        if (comp[i] != 1) return true;
        if (!leaf_list(c, owned[i])) return true;
        exprs[i] = &owned[i].exprs;
        for (std::size_t e = 0; e < envs_.size(); ++e) vals[e][i] = owned[i].vals[e].data();
      } else {
        int cid = pool_.grammar().index_of(c);
        if (cid < 0) return true;
        if (comp[i] < pool_.min_size(cid)) return true;
        if (comp[i] > comp_cap_) {
          complete = false;  // child slice lives beyond the materialized levels
          return true;
        }
        const auto& lvl = pool_.level(cid, comp[i]);
        if (lvl.empty()) return true;
        owned[i].exprs.reserve(lvl.size());
        for (auto& pe : lvl) owned[i].exprs.push_back(pe.e);
        exprs[i] = &owned[i].exprs;
        for (std::size_t e = 0; e < envs_.size(); ++e)
          vals[e][i] = table(cid, comp[i], static_cast<int>(e)).data();
      }
      sizes[i] = exprs[i]->size();
      if (sizes[i] == 0) return true;
    }
    std::vector<std::size_t> idx(m, 0);
    Value args[3], got;
    while (true) {
      bool match = !reqs.empty();
      for (auto& [env, want] : reqs) {
        if (!ops_.spend(1)) {
          complete = false;
          return false;
        }
        bool ok = true;
        for (int i = 0; ok && i < m; ++i) {
          const Row& r = vals[env][i][idx[i]];
          if (!r.ok) ok = false;
          else args[i] = r.v;
        }
        if (!ok || !try_apply(a.op, args, static_cast<std::size_t>(m), got, pool_.rates()) ||
            !matches(got, want, numeric, rtol)) {
          match = false;
          break;
        }
      }
      if (match) {
        std::vector<DslExprPtr> kids(m);
        for (int i = 0; i < m; ++i) kids[i] = (*exprs[i])[idx[i]];
        out.push_back(dsl_app(a.op, kids));
        if (static_cast<int>(out.size()) >= kMaxValidPerSize) {
          complete = false;
          return false;
        }
      }
      int i = m - 1;
      while (i >= 0) {
        if (++idx[i] < sizes[i]) break;
        idx[i] = 0;
        --i;
      }
      if (i < 0) break;
    }
    return true;
  }

  DslPool& pool_;
  std::vector<Env> envs_;
  ScanCounters& ops_;
  int comp_cap_;
  std::map<std::tuple<int, int, int>, std::vector<Row>> tables_;
};

// Lazy per-total candidate stream for one hole, filtered by requirements.
// Wrapped duals split each requirement into numeric targets for the two
// scalar components; per-component lists are memoized so ascending totals
// never rescan a size.
class FilteredStream {
 public:
  FilteredStream(DslPool& pool, HoleScan& scan, const std::vector<Requirement>& reqs,
                 const std::vector<int>& req_envs, int max_size, double rtol)
      : pool_(pool), scan_(scan), n_(max_size), rtol_(rtol) {
    if (pool_.dual_wrap()) {
      for (std::size_t r = 0; r < reqs.size(); ++r) {
        re_reqs_.emplace_back(req_envs[r], make_real(reqs[r].target.a));
        du_reqs_.emplace_back(req_envs[r], make_real(reqs[r].target.b));
      }
    } else {
      for (std::size_t r = 0; r < reqs.size(); ++r)
        sc_reqs_.emplace_back(req_envs[r], reqs[r].target);
    }
  }

  int min_total() const { return pool_.min_body_size(); }
  int max_total() const { return pool_.dual_wrap() ? 1 + 2 * n_ : n_; }
  bool complete() const { return complete_; }

  std::vector<DslExprPtr> at_total(int t) {
    if (!pool_.dual_wrap()) {
      if (t < 1 || t > n_) return {};
      return scan_.filtered(pool_.entry_nt(), t, sc_reqs_, false, rtol_, complete_);
    }
    std::vector<DslExprPtr> pairs;
    if (t < 3) return pairs;
    for (auto [sr, sd] : dual_splits(t, n_)) {
      const auto& re = component(sr, re_reqs_, re_memo_);
      if (re.empty()) continue;
      const auto& du = component(sd, du_reqs_, du_memo_);
      for (auto& r : re)
        for (auto& d : du) pairs.push_back(dsl_app(Builtin::MkDual, {r, d}));
    }
    return pairs;
  }

 private:
  const std::vector<DslExprPtr>& component(int s, const std::vector<std::pair<int, Value>>& reqs,
                                           std::map<int, std::vector<DslExprPtr>>& memo) {
    auto it = memo.find(s);
    if (it != memo.end()) return it->second;
    auto got = scan_.filtered(pool_.entry_nt(), s, reqs, true, rtol_, complete_);
    return memo.emplace(s, std::move(got)).first->second;
  }

  DslPool& pool_;
  HoleScan& scan_;
  int n_;
  double rtol_;
  bool complete_ = true;
  std::vector<std::pair<int, Value>> sc_reqs_, re_reqs_, du_reqs_;
  std::map<int, std::vector<DslExprPtr>> re_memo_, du_memo_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// The solver engine. Candidate pools are cached per hole signature, so one
// engine should live for the whole synthesis run.

class SynthEngine {
 public:
  SynthEngine(const Sketch& s, SynthesisBudget budget)
      : sk_(s), budget_(std::move(budget)), sigs_(hole_sigs(s)) {
    for (std::size_t i = 0; i < s.holes.size(); ++i)
      decl_index_[s.holes[i].name] = static_cast<int>(i);
  }

  const SynthesisBudget& budget() const { return budget_; }
  const HoleSigs& signatures() const { return sigs_; }

  DslPool& pool_for(const std::string& hole) {
    auto sit = sigs_.find(hole);
    if (sit == sigs_.end()) throw EvalError("unknown hole " + hole);
    const HoleSignature& sig = sit->second;
    std::string key = sig.entry + "/" + std::string(1, "irbdt"[static_cast<int>(sig.ret)]);
    for (auto k : sig.params) key += "irbdt"[static_cast<int>(k)];
    auto it = pools_.find(key);
    if (it == pools_.end()) {
      auto probes = make_probe_envs(sig, budget_.probe_count, budget_.seed, sk_.rates);
      it = pools_
               .emplace(key, std::make_unique<DslPool>(sk_.dsl, sig, std::move(probes), sk_.rates))
               .first;
    }
    return *it->second;
  }

  // Searches for bodies of every hole that occurs unbound in the constraints.
  // `frozen` holds the bodies the traces are evaluated under; bindings
  // returned on success cover exactly the unbound holes.
  SynthResult synthesize(const std::vector<Constraint>& cons, const HoleBodies& frozen,
                         SynthStats& stats) {
    using namespace detail;
    stats.synth_calls++;
    SynthResult res;

    HoleTable ht;
    std::vector<CompiledConstraint> ccs;
    ccs.reserve(cons.size());
    for (const Constraint& c : cons) ccs.push_back(compile_constraint(c, ht, sigs_));

    std::vector<const DslExpr*> bodies(ht.names.size(), nullptr);
    std::vector<char> unbound(ht.names.size(), 0);
    for (std::size_t h = 0; h < ht.names.size(); ++h) {
      auto it = frozen.find(ht.names[h]);
      if (it != frozen.end()) bodies[h] = it->second.get();
      else unbound[h] = 1;
    }
    for (auto& cc : ccs) classify_constraint(cc, unbound);

    // constraints with no unbound call must already pass as-is
    EvalScratch sc;
    for (const auto& cc : ccs) {
      if (!cc.uholes.empty()) continue;
      Value out;
      if (!eval_full_constraint(cc, bodies, sk_.rates, sc, out) ||
          !value_eq(out, cc.expected, budget_.tol)) {
        res.status = SynthStatus::Unsat;
        res.detail = "example " + cc.label + " fails under the current bindings";
        res.stats = stats;
        return res;
      }
    }

    // connected components over the unbound holes
    std::vector<int> rep(ht.names.size());
    for (std::size_t i = 0; i < rep.size(); ++i) rep[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int x) { return rep[x] == x ? x : rep[x] = find(rep[x]); };
    for (const auto& cc : ccs)
      for (std::size_t i = 1; i < cc.uholes.size(); ++i)
        rep[find(cc.uholes[0])] = find(cc.uholes[i]);

    std::map<int, std::vector<int>> comp_holes;  // representative -> hole ids
    for (std::size_t h = 0; h < ht.names.size(); ++h)
      if (unbound[h] && mentioned(ccs, static_cast<int>(h)))
        comp_holes[find(static_cast<int>(h))].push_back(static_cast<int>(h));

    if (comp_holes.empty()) {
      res.status = SynthStatus::Success;
      res.stats = stats;
      return res;
    }

    // deterministic component order: by earliest hole declaration
    std::vector<std::vector<int>> comps;
    for (auto& [r, hs] : comp_holes) comps.push_back(hs);
    auto decl_of = [&](int h) {
      auto it = decl_index_.find(ht.names[h]);
      return it == decl_index_.end() ? static_cast<int>(decl_index_.size()) : it->second;
    };
    for (auto& hs : comps)
      std::sort(hs.begin(), hs.end(), [&](int a, int b) { return decl_of(a) < decl_of(b); });
    std::sort(comps.begin(), comps.end(),
              [&](const auto& a, const auto& b) { return decl_of(a[0]) < decl_of(b[0]); });

    HoleBodies found;
    for (const auto& hs : comps) {
      std::vector<int> cidx;
      for (std::size_t i = 0; i < ccs.size(); ++i)
        if (!ccs[i].uholes.empty() && std::find(hs.begin(), hs.end(), ccs[i].uholes[0]) != hs.end())
          cidx.push_back(static_cast<int>(i));
      SynthStatus st = solve_component(ht, ccs, cidx, hs, bodies, stats, found, res.detail);
      if (st != SynthStatus::Success) {
        res.status = st;
        res.stats = stats;
        return res;
      }
    }
    res.status = SynthStatus::Success;
    res.bindings = std::move(found);
    res.stats = stats;
    return res;
  }

 private:
  static bool mentioned(const std::vector<detail::CompiledConstraint>& ccs, int h) {
    for (const auto& cc : ccs)
      if (cc.occ.count(h)) return true;
    return false;
  }

  enum class VerifyR { Pass, Fail, Stop };

  VerifyR verify_tuple(const std::vector<detail::CompiledConstraint>& ccs,
                       const std::vector<int>& cidx, std::vector<const DslExpr*>& bodies,
                       SynthStats& stats, std::vector<detail::EvalScratch>& scratch) {
    if (stats.candidates >= budget_.max_candidates) return VerifyR::Stop;
    stats.candidates++;
    for (std::size_t k = 0; k < cidx.size(); ++k) {
      const auto& cc = ccs[cidx[k]];
      Value out;
      if (!detail::eval_full_constraint(cc, bodies, sk_.rates, scratch[k], out) ||
          !value_eq(out, cc.expected, budget_.tol))
        return VerifyR::Fail;
    }
    return VerifyR::Pass;
  }

  // Enumerates complete bodies of exactly total size t in canonical order,
  // with both components of a wrapped dual held to the materialized levels.
  bool for_each_body(DslPool& pool, int t, bool& complete,
                     const std::function<bool(const DslExprPtr&)>& f) {
    int cap = std::min(budget_.max_pool_level, budget_.max_dsl_size);
    if (!pool.dual_wrap()) {
      if (t > cap) {
        complete = false;  // beyond the materialized levels
        return true;
      }
      for (auto& pe : pool.level(pool.entry_nt(), t))
        if (!f(pe.e)) return false;
      return true;
    }
    if (t < 3) return true;
    for (auto [sr, sd] : detail::dual_splits(t, budget_.max_dsl_size)) {
      if (sr > cap || sd > cap) {
        complete = false;
        continue;
      }
      auto& rs = pool.level(pool.entry_nt(), sr);
      if (rs.empty()) continue;
      auto& ds = pool.level(pool.entry_nt(), sd);
      if (ds.empty()) continue;
      for (auto& r : rs)
        for (auto& d : ds)
          if (!f(dsl_app(Builtin::MkDual, {r.e, d.e}))) return false;
    }
    return true;
  }

  int max_total(DslPool& pool) const {
    return pool.dual_wrap() ? 1 + 2 * budget_.max_dsl_size : budget_.max_dsl_size;
  }

  SynthStatus solve_component(detail::HoleTable& ht, std::vector<detail::CompiledConstraint>& ccs,
                              const std::vector<int>& cidx, const std::vector<int>& holes,
                              std::vector<const DslExpr*>& bodies, SynthStats& stats,
                              HoleBodies& found, std::string& detail_out) {
    if (holes.size() == 1)
      return solve_single(ht, ccs, cidx, holes[0], bodies, stats, found, detail_out);
    if (holes.size() == 2) {
      SynthStatus st = SynthStatus::Budget;
      if (try_solve_chain(ht, ccs, cidx, holes, bodies, stats, found, detail_out, st)) return st;
    }
    return solve_joint(ht, ccs, cidx, holes, bodies, stats, found, detail_out);
  }

  // Gathers requirements for `hole` from every constraint where it is the
  // only unbound hole and is called exactly once, at a top-level step.
  // `any_eligible` reports whether such a constraint existed at all.
  // Returns false (and sets status) on a hard failure.
  bool gather_requirements(std::vector<detail::CompiledConstraint>& ccs,
                           const std::vector<int>& cidx, int hole, const std::string& name,
                           std::vector<const DslExpr*>& bodies,
                           std::vector<detail::Requirement>& reqs, bool& any_eligible,
                           SynthStatus& status, std::string& detail_out) {
    using namespace detail;
    EvalScratch sc;
    for (int ci : cidx) {
      const CompiledConstraint& cc = ccs[ci];
      if (cc.uholes.size() != 1 || cc.uholes[0] != hole) continue;
      if (cc.usites.size() != 1 || cc.occ.at(hole) != 1) continue;
      any_eligible = true;
      int site = cc.usites[0];
      sc.reset(cc.steps.size());
      if (!eval_compiled_steps(cc, bodies, sk_.rates, sc, 0, site)) {
        status = SynthStatus::Unsat;
        detail_out = "example " + cc.label + " fails before the call of hole " + name +
                     " under the current bindings";
        return false;
      }
      Requirement req;
      switch (
          extract_requirement(cc, site, bodies, sk_.rates, budget_.tol * kFilterSlack, sc, req)) {
        case ReqStatus::Direct:
        case ReqStatus::Solved:
          reqs.push_back(std::move(req));
          break;
        case ReqStatus::NoFilter:
          break;
        case ReqStatus::Hopeless:
          // Probes (not a proof) say the suffix ignores this hole's output and
          // still misses the target: some frozen binding downstream is wrong.
          status = SynthStatus::Budget;
          detail_out = "the frozen bindings pin example " + cc.label +
                       " away from its expected value; hole " + name + " cannot fix it";
          return false;
        case ReqStatus::HardFail:
          status = SynthStatus::Unsat;
          detail_out = "example " + cc.label + " admits no output of hole " + name +
                       " that could satisfy it";
          return false;
      }
    }
    return true;
  }

  SynthStatus solve_single(detail::HoleTable& ht, std::vector<detail::CompiledConstraint>& ccs,
                           const std::vector<int>& cidx, int hole,
                           std::vector<const DslExpr*>& bodies, SynthStats& stats,
                           HoleBodies& found, std::string& detail_out) {
    using namespace detail;
    const std::string& name = ht.names[hole];
    DslPool& pool = pool_for(name);

    std::vector<Requirement> reqs;
    bool any_eligible = false;
    SynthStatus status = SynthStatus::Budget;
    if (!gather_requirements(ccs, cidx, hole, name, bodies, reqs, any_eligible, status,
                             detail_out))
      return status;
    if (reqs.empty()) {
      // Every call site sits in a trace whose suffix gave no usable numeric
      // filter. If some site was at least eligible, a blind sweep is almost
      // certainly pointless here (typically a frozen co-hole swallows the
      // output), so hand the decision back as a budget outcome and let the
      // caller refute and retry with more holes open. Only when no site was
      // eligible at all (e.g. the hole occurs twice in every trace) is an
      // unfiltered sweep the right tool.
      if (any_eligible) {
        detail_out = "no usable output requirement for hole " + name +
                     "; skipping unfiltered search";
        return SynthStatus::Budget;
      }
      return solve_joint(ht, ccs, cidx, {hole}, bodies, stats, found, detail_out);
    }

    ScanCounters ops{0, budget_.max_scan_ops, false};
    std::vector<Env> envs;
    std::vector<int> req_envs;
    for (std::size_t r = 0; r < reqs.size(); ++r) {
      envs.push_back(reqs[r].env);
      req_envs.push_back(static_cast<int>(r));
    }
    HoleScan scan(pool, std::move(envs), budget_, ops);
    FilteredStream stream(pool, scan, reqs, req_envs, budget_.max_dsl_size,
                          budget_.tol * kFilterSlack);

    std::vector<EvalScratch> scratch(cidx.size());
    bool stopped = false;
    for (int t = stream.min_total(); t <= stream.max_total() && !stopped; ++t) {
      for (const DslExprPtr& body : stream.at_total(t)) {
        bodies[hole] = body.get();
        VerifyR vr = verify_tuple(ccs, cidx, bodies, stats, scratch);
        if (vr == VerifyR::Pass) {
          found[name] = body;
          return SynthStatus::Success;
        }
        if (vr == VerifyR::Stop) {
          stopped = true;
          break;
        }
      }
    }
    bodies[hole] = nullptr;
    if (!stopped && stream.complete() && !ops.capped) {
      detail_out = "no body of hole " + name + " within size " +
                   std::to_string(budget_.max_dsl_size) + " satisfies the examples";
      return SynthStatus::Unsat;
    }
    detail_out = stopped
                     ? "candidate budget exhausted while solving hole " + name
                     : "search space for hole " + name + " not fully covered within the budget";
    return SynthStatus::Budget;
  }

  // Chain: both holes are called at most once per constraint, every
  // constraint calling both has the anchor as the later call, and the anchor
  // carries at least one requirement of its own. Anchor candidates are
  // enumerated first; each induces requirements for the partner, whose
  // argument envs are fixed (the partner call precedes any unbound step).
  // Returns false when the component does not fit this shape.
  bool try_solve_chain(detail::HoleTable& ht, std::vector<detail::CompiledConstraint>& ccs,
                       const std::vector<int>& cidx, const std::vector<int>& holes,
                       std::vector<const DslExpr*>& bodies, SynthStats& stats, HoleBodies& found,
                       std::string& detail_out, SynthStatus& status_out) {
    using namespace detail;
    int h0 = holes[0], h1 = holes[1];
    std::vector<int> chain_ccs;
    for (int ci : cidx) {
      const auto& cc = ccs[ci];
      if (cc.nested_unbound) return false;
      for (auto& [h, n] : cc.occ)
        if (n > 1) return false;
      if (cc.usites.size() == 1) continue;
      if (cc.usites.size() != 2 || cc.usite_hole[0] == cc.usite_hole[1]) return false;
      chain_ccs.push_back(ci);
    }
    if (chain_ccs.empty()) return false;

    auto later_everywhere = [&](int h) {
      for (int ci : chain_ccs)
        if (ccs[ci].usite_hole[1] != h) return false;
      return true;
    };
    SynthStatus st = SynthStatus::Budget;
    std::string det;
    std::vector<Requirement> reqs0, reqs1;
    bool elig0 = false, elig1 = false;
    if (!gather_requirements(ccs, cidx, h0, ht.names[h0], bodies, reqs0, elig0, st, det) ||
        !gather_requirements(ccs, cidx, h1, ht.names[h1], bodies, reqs1, elig1, st, det)) {
      status_out = st;
      detail_out = det;
      return true;  // hard failure decides the component
    }
    int anchor = -1, partner = -1;
    if (!reqs0.empty() && later_everywhere(h0)) {
      anchor = h0;
      partner = h1;
    } else if (!reqs1.empty() && later_everywhere(h1)) {
      anchor = h1;
      partner = h0;
    }
    if (anchor < 0) return false;
    const std::vector<Requirement>& anchor_reqs = anchor == h0 ? reqs0 : reqs1;
    const std::vector<Requirement>& partner_own = anchor == h0 ? reqs1 : reqs0;

    const std::string& aname = ht.names[anchor];
    const std::string& pname = ht.names[partner];
    DslPool& apool = pool_for(aname);
    DslPool& ppool = pool_for(pname);
    double rtol = budget_.tol * kFilterSlack;

    // fixed partner envs: its own requirement envs plus one per chain constraint
    std::vector<Env> penvs;
    for (auto& r : partner_own) penvs.push_back(r.env);
    std::vector<int> chain_site(chain_ccs.size());
    std::vector<int> chain_env(chain_ccs.size());
    {
      EvalScratch sc;
      for (std::size_t k = 0; k < chain_ccs.size(); ++k) {
        const auto& cc = ccs[chain_ccs[k]];
        int psite = cc.usites[0];  // the partner call is the earlier one
        chain_site[k] = psite;
        sc.reset(cc.steps.size());
        if (!eval_compiled_steps(cc, bodies, sk_.rates, sc, 0, psite)) {
          status_out = SynthStatus::Unsat;
          detail_out =
              "example " + cc.label + " fails before the hole calls under the current bindings";
          return true;
        }
        const CompiledExpr& call = cc.steps[psite];
        std::vector<Value> args(call.kids.size());
        for (std::size_t i = 0; i < call.kids.size(); ++i)
          if (!eval_compiled_expr(call.kids[i], bodies, sk_.rates, sc, args[i])) {
            status_out = SynthStatus::Unsat;
            detail_out = "example " + cc.label + " has unevaluable arguments for hole " + pname;
            return true;
          }
        Env env;
        if (!destructure_args(*call.sig, args, env)) {
          status_out = SynthStatus::Unsat;
          detail_out =
              "example " + cc.label + " passes arguments of the wrong shape to hole " + pname;
          return true;
        }
        chain_env[k] = static_cast<int>(penvs.size());
        penvs.push_back(std::move(env));
      }
    }

    ScanCounters aops{0, budget_.max_scan_ops, false};
    std::vector<Env> aenvs;
    std::vector<int> areq_envs;
    for (std::size_t r = 0; r < anchor_reqs.size(); ++r) {
      aenvs.push_back(anchor_reqs[r].env);
      areq_envs.push_back(static_cast<int>(r));
    }
    HoleScan ascan(apool, std::move(aenvs), budget_, aops);
    FilteredStream astream(apool, ascan, anchor_reqs, areq_envs, budget_.max_dsl_size, rtol);

    ScanCounters pops{0, budget_.max_scan_ops, false};
    HoleScan pscan(ppool, penvs, budget_, pops);

    std::vector<EvalScratch> scratch(cidx.size());
    bool complete = true;
    bool stopped = false;
    EvalScratch sc;

    for (int at = astream.min_total(); at <= astream.max_total() && !stopped; ++at) {
      for (const DslExprPtr& ga : astream.at_total(at)) {
        bodies[anchor] = ga.get();
        // per-candidate requirements for the partner
        std::vector<Requirement> preq = partner_own;
        std::vector<int> preq_envs;
        for (std::size_t r = 0; r < partner_own.size(); ++r)
          preq_envs.push_back(static_cast<int>(r));
        bool usable = true;
        for (std::size_t k = 0; k < chain_ccs.size(); ++k) {
          const auto& cc = ccs[chain_ccs[k]];
          int psite = chain_site[k];
          sc.reset(cc.steps.size());
          if (!eval_compiled_steps(cc, bodies, sk_.rates, sc, 0, psite)) {
            usable = false;
            break;
          }
          Requirement req;
          switch (extract_requirement(cc, psite, bodies, sk_.rates, rtol, sc, req)) {
            case ReqStatus::Direct:
            case ReqStatus::Solved:
              preq.push_back(std::move(req));
              preq_envs.push_back(chain_env[k]);
              break;
            case ReqStatus::NoFilter:
              break;
            case ReqStatus::Hopeless:  // probes rule this anchor candidate out
            case ReqStatus::HardFail:
              usable = false;
              break;
          }
        }
        if (!usable) {
          // probe evidence, not proof: record the gap
          complete = false;
          continue;
        }
        bool hit = false;
        if (preq.empty()) {
          // Nothing to filter the partner with (the suffix responds to its
          // output in some way the probes cannot invert), so enumerate the
          // partner outright and let verification decide. The sweep stops a
          // few sizes above the minimum so one fruitless anchor candidate
          // cannot drain the whole budget.
          int pt_cap = std::min(max_total(ppool), ppool.min_body_size() + kRawSpanCap);
          if (pt_cap < max_total(ppool)) complete = false;
          for (int pt = ppool.min_body_size(); pt <= pt_cap && !stopped && !hit; ++pt) {
            for_each_body(ppool, pt, complete, [&](const DslExprPtr& gp) {
              bodies[partner] = gp.get();
              VerifyR vr = verify_tuple(ccs, cidx, bodies, stats, scratch);
              if (vr == VerifyR::Pass) {
                found[aname] = ga;
                found[pname] = gp;
                hit = true;
                return false;
              }
              if (vr == VerifyR::Stop) {
                stopped = true;
                return false;
              }
              return true;
            });
          }
          if (hit) {
            status_out = SynthStatus::Success;
            return true;
          }
          bodies[partner] = nullptr;
          if (stopped) break;
          continue;
        }
        ValueKind want = sigs_.at(pname).ret;
        bool impossible = false;
        for (auto& r : preq)
          if (r.target.kind != want) impossible = true;
        if (impossible) continue;  // this anchor candidate admits no partner

        FilteredStream pstream(ppool, pscan, preq, preq_envs, budget_.max_dsl_size, rtol);
        for (int pt = pstream.min_total(); pt <= pstream.max_total() && !stopped; ++pt) {
          for (const DslExprPtr& gp : pstream.at_total(pt)) {
            bodies[partner] = gp.get();
            VerifyR vr = verify_tuple(ccs, cidx, bodies, stats, scratch);
            if (vr == VerifyR::Pass) {
              found[aname] = ga;
              found[pname] = gp;
              status_out = SynthStatus::Success;
              return true;
            }
            if (vr == VerifyR::Stop) {
              stopped = true;
              break;
            }
          }
        }
        if (!pstream.complete()) complete = false;
        bodies[partner] = nullptr;
        if (stopped) break;
      }
    }
    bodies[anchor] = nullptr;
    bodies[partner] = nullptr;
    if (!astream.complete() || aops.capped || pops.capped) complete = false;
    if (!stopped && complete) {
      status_out = SynthStatus::Unsat;
      detail_out = "no bodies of holes " + aname + ", " + pname + " within size " +
                   std::to_string(budget_.max_dsl_size) + " satisfy the examples";
    } else {
      status_out = SynthStatus::Budget;
      detail_out = stopped
                       ? "candidate budget exhausted while solving holes " + aname + ", " + pname
                       : "search space for holes " + aname + ", " + pname +
                             " not fully covered within the budget";
    }
    return true;
  }

  // Plain product over the per-hole candidate streams: total size ascending,
  // size allocations lexicographic in hole declaration order, candidate
  // streams nested in the same order.
  SynthStatus solve_joint(detail::HoleTable& ht, std::vector<detail::CompiledConstraint>& ccs,
                          const std::vector<int>& cidx, const std::vector<int>& holes,
                          std::vector<const DslExpr*>& bodies, SynthStats& stats,
                          HoleBodies& found, std::string& detail_out) {
    using namespace detail;
    int m = static_cast<int>(holes.size());
    std::vector<DslPool*> pools(m);
    std::vector<int> mins(m), maxs(m);
    bool complete = true;
    for (int i = 0; i < m; ++i) {
      pools[i] = &pool_for(ht.names[holes[i]]);
      mins[i] = pools[i]->min_body_size();
      if (mins[i] >= DslPool::kInf) {
        detail_out = "hole " + ht.names[holes[i]] + " has no complete bodies";
        return SynthStatus::Unsat;
      }
      maxs[i] = max_total(*pools[i]);
    }
    long long lo = 0, hi = 0;
    for (int i = 0; i < m; ++i) {
      lo += mins[i];
      hi += maxs[i];
    }

    std::vector<EvalScratch> scratch(cidx.size());
    std::vector<DslExprPtr> current(m);
    bool stopped = false, found_one = false;

    std::function<bool(int, int)> place = [&](int i, int rest) -> bool {
      long long min_rest = 0, max_rest = 0;
      for (int j = i + 1; j < m; ++j) {
        min_rest += mins[j];
        max_rest += maxs[j];
      }
      int from = static_cast<int>(std::max<long long>(mins[i], rest - max_rest));
      int to = static_cast<int>(std::min<long long>(maxs[i], rest - min_rest));
      for (int s = from; s <= to; ++s) {
        bool ok = for_each_body(*pools[i], s, complete, [&](const DslExprPtr& b) {
          current[i] = b;
          bodies[holes[i]] = b.get();
          if (i + 1 < m) return place(i + 1, rest - s);
          VerifyR vr = verify_tuple(ccs, cidx, bodies, stats, scratch);
          if (vr == VerifyR::Pass) {
            found_one = true;
            return false;
          }
          if (vr == VerifyR::Stop) {
            stopped = true;
            return false;
          }
          return true;
        });
        if (!ok) return false;
      }
      return true;
    };

    for (long long t = lo; t <= hi && !stopped && !found_one; ++t) place(0, static_cast<int>(t));

    if (found_one) {
      for (int i = 0; i < m; ++i) found[ht.names[holes[i]]] = current[i];
      return SynthStatus::Success;
    }
    for (int i = 0; i < m; ++i) bodies[holes[i]] = nullptr;
    std::string names;
    for (int i = 0; i < m; ++i) names += (i ? ", " : "") + ht.names[holes[i]];
    if (!stopped && complete) {
      detail_out = "no bodies of holes " + names + " within size " +
                   std::to_string(budget_.max_dsl_size) + " satisfy the examples";
      return SynthStatus::Unsat;
    }
    detail_out = stopped
                     ? "candidate budget exhausted while solving holes " + names
                     : "search space for holes " + names + " not fully covered within the budget";
    return SynthStatus::Budget;
  }

  const Sketch& sk_;
  SynthesisBudget budget_;
  HoleSigs sigs_;
  std::map<std::string, int> decl_index_;
  std::map<std::string, std::unique_ptr<DslPool>> pools_;
};

// ---------------------------------------------------------------------------
// Constraint assembly and the grammar-level drivers.

inline std::vector<Constraint> build_constraints(const Sketch& s, const std::vector<Example>& es) {
  std::vector<Constraint> out;
  out.reserve(es.size());
  for (const Example& e : es) {
    PTree t = must_parse(s, e.input);
    try {
      out.push_back({gen_trace(s, t, e.context), e.output, e.input});
    } catch (const EvalError& ex) {
      throw EvalError(std::string(ex.what()) + " (example: " + e.input + ")");
    }
  }
  return out;
}

// One solver call over the given examples with the ready set frozen. Returned
// bindings cover only newly solved holes.
inline SynthResult synth_holes(SynthEngine& eng, const Sketch& s, const std::vector<Example>& es,
                               const HoleBodies& ready, SynthStats& stats) {
  Sketch bound = bind_holes(s, ready);
  auto cons = build_constraints(bound, es);
  return eng.synthesize(cons, bound.defs, stats);
}

// Hole-bearing productions used by the derivation of `input`, in production
// id order. Holes already bound in the sketch do not make a production
// sketchy.
inline std::vector<int> get_sketchy_prods(const Sketch& s, const std::string& input) {
  PTree t = must_parse(s, input);
  std::set<int> ps = prod_set(t);
  std::vector<int> out;
  for (int p : sketchy_prods(s))
    if (ps.count(p)) out.push_back(p);
  return out;
}

// Two inputs are derivation-congruent when their parse trees use the same
// set of productions.
inline bool derivation_congruent(const Sketch& s, const std::string& a, const std::string& b) {
  return prod_set(must_parse(s, a)) == prod_set(must_parse(s, b));
}

// Picks the example whose derivation touches the fewest hole-bearing
// productions that are not yet resolved by `ready`; ties break on token
// count, then on the input string.
inline std::size_t select_example(const Sketch& s, const std::vector<Example>& pending,
                                  const HoleBodies& ready = {}) {
  if (pending.empty()) throw EvalError("select_example on an empty set");
  std::size_t best = 0;
  int bz = -1, bt = -1;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    int z = 0;
    for (int p : get_sketchy_prods(s, pending[i].input)) {
      for (const std::string& h : holes_called_in(s.prods[p - 1]))
        if (!s.defs.count(h) && !ready.count(h)) {
          z++;
          break;
        }
    }
    int t = static_cast<int>(tokenize(s, pending[i].input).size());
    if (bz < 0 || z < bz ||
        (z == bz && (t < bt || (t == bt && pending[i].input < pending[best].input)))) {
      best = i;
      bz = z;
      bt = t;
    }
  }
  return best;
}

// All-at-once synthesis: one solver call over every example. On success the
// bindings merge `initial` with the newly solved holes.
inline SynthResult synth_all_at_once(const Sketch& s, const std::vector<Example>& es,
                                     const SynthesisBudget& budget, HoleBodies initial = {}) {
  SynthEngine eng(s, budget);
  SynthStats stats;
  SynthResult r = synth_holes(eng, s, es, initial, stats);
  if (r.status == SynthStatus::Success)
    for (auto& [k, v] : initial) r.bindings.emplace(k, v);
  r.stats = stats;
  return r;
}

// Incremental synthesis: examples are tested and solved in order of how many
// hole-bearing productions they touch; solved holes freeze, and bindings
// refuted by later examples are evicted and re-synthesized over everything
// accumulated so far.
inline SynthResult synth_attr_grammar(const Sketch& s, const std::vector<Example>& es,
                                      const SynthesisBudget& budget, HoleBodies initial = {}) {
  SynthEngine eng(s, budget);
  SynthStats stats;

  struct Info {
    PTree tree;
    std::set<int> pset;
    std::vector<int> zprods;       // sketchy productions in the derivation
    std::set<std::string> zholes;  // unbound holes of the touched sketchy prods
    int tokens = 0;
    bool done = false;
  };
  std::vector<int> sketchy = sketchy_prods(s);
  std::map<int, std::set<std::string>> prod_holes;
  for (int p : sketchy) {
    std::set<std::string> hs;
    for (const std::string& h : holes_called_in(s.prods[p - 1]))
      if (!s.defs.count(h)) hs.insert(h);
    prod_holes[p] = std::move(hs);
  }

  std::vector<Info> infos(es.size());
  for (std::size_t i = 0; i < es.size(); ++i) {
    infos[i].tree = must_parse(s, es[i].input);
    infos[i].pset = prod_set(infos[i].tree);
    for (int p : sketchy)
      if (infos[i].pset.count(p)) {
        infos[i].zprods.push_back(p);
        infos[i].zholes.insert(prod_holes[p].begin(), prod_holes[p].end());
      }
    infos[i].tokens = static_cast<int>(tokenize(s, es[i].input).size());
  }

  HoleBodies R = std::move(initial);
  std::map<std::string, int> evictions;

  auto refute = [&](const std::set<std::string>& zh) {
    int evicted = 0;
    for (const std::string& h : zh)
      if (R.erase(h)) {
        evictions[h]++;
        evicted++;
      }
    if (evicted == 0) return;
    stats.refutations++;
    if (stats.refutations > budget.max_refutations) {
      std::vector<std::pair<int, std::string>> worst;
      for (auto& [h, n] : evictions) worst.push_back({-n, h});
      std::sort(worst.begin(), worst.end());
      std::ostringstream msg;
      msg << "refutation limit (" << budget.max_refutations << ") reached; thrashing holes:";
      for (auto& [n, h] : worst) msg << " " << h << " (" << -n << ")";
      throw EvalError(msg.str());
    }
  };

  // a trace-generation failure under the current bindings refutes them the
  // same way a failing synthesis does
  auto try_synth = [&](const std::vector<std::size_t>& idx) {
    std::vector<Example> batch;
    for (std::size_t i : idx) batch.push_back(es[i]);
    try {
      return synth_holes(eng, s, batch, R, stats);
    } catch (const EvalError& ex) {
      SynthResult r;
      r.status = SynthStatus::Unsat;
      r.detail = ex.what();
      r.stats = stats;
      return r;
    }
  };

  // a production still counts against an example only while some hole it
  // calls is unresolved; resolved productions no longer make it hard
  auto unready_count = [&](const Info& inf) {
    int n = 0;
    for (int p : inf.zprods) {
      for (const std::string& h : prod_holes[p])
        if (!R.count(h)) {
          n++;
          break;
        }
    }
    return n;
  };

  std::size_t remaining = es.size();
  while (remaining > 0) {
    // select the pending example touching the fewest unresolved sketchy
    // productions
    std::size_t pick = es.size();
    int pick_z = 0;
    for (std::size_t i = 0; i < es.size(); ++i) {
      if (infos[i].done) continue;
      int z = unready_count(infos[i]);
      if (pick == es.size()) {
        pick = i;
        pick_z = z;
        continue;
      }
      const Info& a = infos[i];
      const Info& b = infos[pick];
      if (z != pick_z ? z < pick_z
                      : (a.tokens != b.tokens ? a.tokens < b.tokens
                                              : es[i].input < es[pick].input)) {
        pick = i;
        pick_z = z;
      }
    }
    Info& info = infos[pick];

    std::vector<std::size_t> done_idx;
    for (std::size_t i = 0; i < es.size(); ++i)
      if (infos[i].done) done_idx.push_back(i);

    bool ready = true;
    for (const std::string& h : info.zholes)
      if (!R.count(h)) {
        ready = false;
        break;
      }

    std::vector<std::size_t> te_idx;
    if (ready) {
      // fast path: test the example under the current bindings
      bool pass = false;
      try {
        Value out = eval_concrete(bind_holes(s, R), info.tree, es[pick].context);
        pass = value_eq(out, es[pick].output, budget.tol);
      } catch (const EvalError&) {
        pass = false;
      }
      if (pass) {
        info.done = true;
        remaining--;
        continue;
      }
      refute(info.zholes);
      te_idx = done_idx;
      te_idx.push_back(pick);
    } else {
      for (std::size_t i = 0; i < es.size(); ++i)
        if (infos[i].pset == info.pset) te_idx.push_back(i);
    }

    SynthResult b = try_synth(te_idx);
    if (b.status != SynthStatus::Success) {
      bool any_bound = false;
      for (const std::string& h : info.zholes)
        if (R.count(h)) any_bound = true;
      if (any_bound) {
        refute(info.zholes);
        std::vector<std::size_t> all_idx = done_idx;
        for (std::size_t i : te_idx)
          if (std::find(all_idx.begin(), all_idx.end(), i) == all_idx.end()) all_idx.push_back(i);
        b = try_synth(all_idx);
      }
      if (b.status != SynthStatus::Success) {
        SynthResult res;
        res.status = b.status;
        res.detail = b.detail;
        res.stats = stats;
        return res;
      }
    }
    for (auto& [h, body] : b.bindings) R[h] = body;
    for (std::size_t i : te_idx)
      if (!infos[i].done) {
        infos[i].done = true;
        remaining--;
      }

#ifndef NDEBUG
    // every accepted example keeps passing under the grown ready set
    for (std::size_t i = 0; i < es.size(); ++i) {
      if (!infos[i].done) continue;
      Value out = eval_concrete(bind_holes(s, R), infos[i].tree, es[i].context);
      assert(value_eq(out, es[i].output, budget.tol));
    }
#endif
  }

  SynthResult res;
  res.status = SynthStatus::Success;
  res.bindings = std::move(R);
  res.stats = stats;
  return res;
}

}  // namespace agsynth
