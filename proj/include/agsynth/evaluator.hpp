#pragma once

// Attribute evaluation over parse trees: per-tree dependency scheduling,
// concrete evaluation of fully bound sketches, and symbolic trace generation
// where unbound hole calls become straight-line holecall steps.

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "parser.hpp"

namespace agsynth {

using Context = std::map<std::string, Value>;

// ---------------------------------------------------------------------------
// Traces: loop-free straight-line programs with symbolic hole calls.

struct TraceExpr;
using TraceExprPtr = std::shared_ptr<const TraceExpr>;

struct TraceExpr {
    enum class K { Const, Var, Builtin, Holecall };
    K k = K::Const;
    Value cval;                      // Const
    std::string name;                // Var id or hole name
    Builtin op = Builtin::Add;       // Builtin
    std::vector<TraceExprPtr> args;  // Builtin / Holecall
};

inline TraceExprPtr tr_const(Value v) {
    auto e = std::make_shared<TraceExpr>();
    e->k = TraceExpr::K::Const;
    e->cval = std::move(v);
    return e;
}
inline TraceExprPtr tr_var(std::string name) {
    auto e = std::make_shared<TraceExpr>();
    e->k = TraceExpr::K::Var;
    e->name = std::move(name);
    return e;
}
inline TraceExprPtr tr_builtin(Builtin op, std::vector<TraceExprPtr> args) {
    auto e = std::make_shared<TraceExpr>();
    e->k = TraceExpr::K::Builtin;
    e->op = op;
    e->args = std::move(args);
    return e;
}
inline TraceExprPtr tr_holecall(std::string hole, std::vector<TraceExprPtr> args) {
    auto e = std::make_shared<TraceExpr>();
    e->k = TraceExpr::K::Holecall;
    e->name = std::move(hole);
    e->args = std::move(args);
    return e;
}

struct TraceStep {
    std::string var;
    TraceExprPtr rhs;
};

struct Trace {
    std::vector<TraceStep> steps;
    std::string out;  // the variable holding the tree's output
};

inline std::string format_trace_expr(const TraceExpr& e) {
    switch (e.k) {
        case TraceExpr::K::Const: return "const " + describe(e.cval);
        case TraceExpr::K::Var: return e.name;
        case TraceExpr::K::Builtin:
        case TraceExpr::K::Holecall: {
            std::string s = e.k == TraceExpr::K::Holecall ? "holecall " + e.name
                                                          : std::string(builtin_name(e.op));
            s += "(";
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += format_trace_expr(*e.args[i]);
            }
            return s + ")";
        }
    }
    return "?";
}

inline std::string format_trace(const Trace& t) {
    std::string s;
    for (const auto& st : t.steps) s += st.var + " := " + format_trace_expr(*st.rhs) + "\n";
    s += "return " + t.out + "\n";
    return s;
}

template <typename F>
inline void walk_trace_expr_uses(const TraceExprPtr& e, F&& fn) {
    if (!e) return;
    if (e->k == TraceExpr::K::Var) fn(e->name);
    for (const auto& a : e->args) walk_trace_expr_uses(a, fn);
}

// Structural sanity: single assignment, uses refer to earlier steps, and the
// out variable is assigned.
inline bool check_trace(const Trace& t, std::string* why = nullptr) {
    std::set<std::string> assigned;
    auto complain = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    for (const auto& st : t.steps) {
        bool ok = true;
        std::string missing;
        walk_trace_expr_uses(st.rhs, [&](const std::string& use) {
            if (!assigned.count(use)) { ok = false; missing = use; }
        });
        if (!ok) return complain("step " + st.var + " uses " + missing + " before assignment");
        if (!assigned.insert(st.var).second) return complain("variable " + st.var + " assigned twice");
    }
    if (!assigned.count(t.out)) return complain("out variable " + t.out + " never assigned");
    return true;
}

inline std::set<std::string> trace_holes(const Trace& t) {
    std::set<std::string> out;
    for (const auto& st : t.steps)
        if (st.rhs->k == TraceExpr::K::Holecall) out.insert(st.rhs->name);
    return out;
}

// ---------------------------------------------------------------------------
// Tree flattening and instance scheduling.

struct FlatTree {
    std::vector<const PNode*> nodes;        // preorder
    std::vector<std::vector<int>> kids;     // node id -> child node ids
    std::vector<const Production*> prods;   // per node, null for leaves
};

inline int flatten_rec(const Sketch& sk, const PTree& t, FlatTree& out) {
    int id = int(out.nodes.size());
    out.nodes.push_back(t.get());
    out.kids.emplace_back();
    out.prods.push_back(t->is_leaf() ? nullptr : sk.find_prod(t->prod));
    if (!t->is_leaf() && !out.prods[id])
        throw EvalError("tree references unknown production " + std::to_string(t->prod));
    for (const auto& k : t->kids) {
        int kid = flatten_rec(sk, k, out);
        out.kids[id].push_back(kid);
    }
    return id;
}

inline FlatTree flatten(const Sketch& sk, const PTree& t) {
    FlatTree out;
    flatten_rec(sk, t, out);
    return out;
}

using InstKey = std::pair<int, std::string>;  // (preorder node id, attribute)

inline std::string inst_name(const Sketch& sk, const FlatTree& ft, const InstKey& k) {
    return sk.symbols[ft.nodes[k.first]->sym].name + "#" + std::to_string(k.first) + "." + k.second;
}

struct ScheduleItem {
    InstKey inst;
    int owner;                 // node whose production carries the rule
    const SemanticRule* rule;
};

struct Schedule {
    std::vector<ScheduleItem> order;  // topological, deterministic
};

inline constexpr const char* kOutAttr = "~out";

inline Schedule build_schedule(const Sketch& sk, const FlatTree& ft) {
    std::map<InstKey, ScheduleItem> defs;
    auto target_of = [&](int node, const SemanticRule& r) -> InstKey {
        if (r.is_output) return {0, kOutAttr};
        int tn = r.target.occ == 0 ? node : ft.kids[node][r.target.occ - 1];
        return {tn, r.target.attr};
    };

    for (size_t n = 0; n < ft.nodes.size(); ++n) {
        const Production* p = ft.prods[n];
        if (!p) continue;
        for (const auto& r : p->rules) {
            if (r.is_output && n != 0) continue;  // inner start-headed nodes have no output
            InstKey key = target_of(int(n), r);
            auto [it, fresh] = defs.emplace(key, ScheduleItem{key, int(n), &r});
            if (!fresh)
                throw EvalError("multiple definitions of " + inst_name(sk, ft, key));
        }
    }

    // dependency edges from rhs attribute references
    std::map<InstKey, std::vector<InstKey>> fwd;  // dep -> dependents
    std::map<InstKey, int> indeg;
    for (auto& [key, item] : defs) indeg[key] = 0;
    for (auto& [key, item] : defs) {
        walk_action(item.rule->rhs, [&](const ActionExpr& e) {
            if (e.k != ActionExpr::K::Attr) return;
            int dn = e.aref.occ == 0 ? item.owner : ft.kids[item.owner][e.aref.occ - 1];
            InstKey dep{dn, e.aref.attr};
            if (!defs.count(dep))
                throw EvalError("missing rule for " + inst_name(sk, ft, dep) + " read by " +
                                inst_name(sk, ft, key));
            fwd[dep].push_back(key);
            indeg[key]++;
        });
    }

    // deterministic Kahn order: by (node, attr), with the output instance held
    // until the very end so it closes the trace
    auto heap_key = [](const InstKey& k) {
        return k.second == kOutAttr ? InstKey{INT32_MAX, k.second} : k;
    };
    auto cmp = [&](const InstKey& a, const InstKey& b) { return heap_key(a) > heap_key(b); };
    std::priority_queue<InstKey, std::vector<InstKey>, decltype(cmp)> ready(cmp);
    for (auto& [key, d] : indeg)
        if (d == 0) ready.push(key);

    Schedule out;
    while (!ready.empty()) {
        InstKey key = ready.top();
        ready.pop();
        out.order.push_back(defs.at(key));
        auto it = fwd.find(key);
        if (it == fwd.end()) continue;
        for (const auto& next : it->second)
            if (--indeg[next] == 0) ready.push(next);
    }
    if (out.order.size() != defs.size()) {
        std::string msg = "circular attribute dependencies among:";
        for (auto& [key, d] : indeg)
            if (d > 0) msg += " " + inst_name(sk, ft, key);
        throw EvalError(msg);
    }
    return out;
}

inline std::map<std::string, HoleSignature> hole_sigs(const Sketch& sk) {
    std::map<std::string, HoleSignature> out;
    for (const auto& h : sk.holes) out.emplace(h.name, hole_signature(sk, h));
    return out;
}

// ---------------------------------------------------------------------------
// Concrete evaluation (all holes bound).

namespace detail {

inline Value eval_action_concrete(const Sketch& sk, const FlatTree& ft, int node,
                                  const ActionExprPtr& e, const std::map<InstKey, Value>& vals,
                                  const Context& ctx) {
    switch (e->k) {
        case ActionExpr::K::Const: return e->cval;
        case ActionExpr::K::Attr: {
            int dn = e->aref.occ == 0 ? node : ft.kids[node][e->aref.occ - 1];
            return vals.at({dn, e->aref.attr});
        }
        case ActionExpr::K::GetVal: {
            const Token& tok = ft.nodes[ft.kids[node][e->occ - 1]]->tok;
            return make_int(std::stoll(tok.text));
        }
        case ActionExpr::K::LookUp: {
            const Token& tok = ft.nodes[ft.kids[node][e->occ - 1]]->tok;
            auto it = ctx.find(tok.text);
            if (it == ctx.end()) throw EvalError("unbound variable " + tok.text);
            return it->second;
        }
        case ActionExpr::K::TagMake: {
            const Token& tok = ft.nodes[ft.kids[node][e->occ - 1]]->tok;
            Value amount = eval_action_concrete(sk, ft, node, e->args[0], vals, ctx);
            if (!amount.is_numeric())
                throw EvalError("tag amount must be numeric, got " + describe(amount));
            double x = amount.kind == ValueKind::Int ? double(amount.i) : amount.a;
            return make_tag(tok.text, x);
        }
        case ActionExpr::K::Call: {
            std::vector<Value> args;
            args.reserve(e->args.size());
            for (const auto& a : e->args)
                args.push_back(eval_action_concrete(sk, ft, node, a, vals, ctx));
            return apply_builtin(e->op, args.data(), args.size(), sk.rates);
        }
        case ActionExpr::K::Hole: {
            auto bit = sk.defs.find(e->hole);
            if (bit == sk.defs.end()) throw EvalError("unbound hole " + e->hole);
            const HoleDecl* decl = sk.find_hole(e->hole);
            std::vector<Value> args;
            args.reserve(e->args.size());
            for (const auto& a : e->args)
                args.push_back(eval_action_concrete(sk, ft, node, a, vals, ctx));
            Value out;
            if (!try_apply_body(hole_signature(sk, *decl), *bit->second, args, out, sk.rates))
                throw EvalError("hole " + e->hole + " body failed on its arguments");
            return out;
        }
    }
    throw EvalError("unreachable action kind");
}

}  // namespace detail

inline Value eval_concrete(const Sketch& sk, const PTree& t, const Context& ctx) {
    FlatTree ft = flatten(sk, t);
    Schedule sched = build_schedule(sk, ft);
    std::map<InstKey, Value> vals;
    for (const auto& item : sched.order)
        vals[item.inst] = detail::eval_action_concrete(sk, ft, item.owner, item.rule->rhs, vals, ctx);
    auto it = vals.find({0, kOutAttr});
    if (it == vals.end()) throw EvalError("tree has no output rule");
    return it->second;
}

// ---------------------------------------------------------------------------
// Trace generation. Concrete subcomputations fold to consts; a rule whose rhs
// folded but consumed a context lookup materializes as an x-step; unbound (or
// symbolically applied) hole calls always materialize as a-steps; residual
// builtin expressions at rule level materialize as t-steps. The output rule
// claims the variable name "out", renaming the step it copies if needed.

namespace detail {

struct TraceGen {
    const Sketch& sk;
    const FlatTree& ft;
    const Context& ctx;
    std::vector<TraceStep> steps;
    int nx = 0, na = 0, nt = 0;

    TraceGen(const Sketch& s, const FlatTree& f, const Context& c) : sk(s), ft(f), ctx(c) {}

    std::string push_step(const std::string& prefix, int& counter, TraceExprPtr rhs) {
        std::string var = prefix + std::to_string(++counter);
        steps.push_back({var, std::move(rhs)});
        return var;
    }

    static bool is_const(const TraceExprPtr& e) { return e->k == TraceExpr::K::Const; }

    TraceExprPtr eval(int node, const ActionExprPtr& e,
                      const std::map<InstKey, TraceExprPtr>& vals, bool& used_lookup) {
        switch (e->k) {
            case ActionExpr::K::Const: return tr_const(e->cval);
            case ActionExpr::K::Attr: {
                int dn = e->aref.occ == 0 ? node : ft.kids[node][e->aref.occ - 1];
                return vals.at({dn, e->aref.attr});
            }
            case ActionExpr::K::GetVal: {
                const Token& tok = ft.nodes[ft.kids[node][e->occ - 1]]->tok;
                return tr_const(make_int(std::stoll(tok.text)));
            }
            case ActionExpr::K::LookUp: {
                const Token& tok = ft.nodes[ft.kids[node][e->occ - 1]]->tok;
                auto it = ctx.find(tok.text);
                if (it == ctx.end()) throw EvalError("unbound variable " + tok.text);
                used_lookup = true;
                return tr_const(it->second);
            }
            case ActionExpr::K::TagMake: {
                const Token& tok = ft.nodes[ft.kids[node][e->occ - 1]]->tok;
                TraceExprPtr amount = eval(node, e->args[0], vals, used_lookup);
                if (is_const(amount)) {
                    const Value& v = amount->cval;
                    if (!v.is_numeric())
                        throw EvalError("tag amount must be numeric, got " + describe(v));
                    return tr_const(make_tag(tok.text, v.kind == ValueKind::Int ? double(v.i) : v.a));
                }
                // symbolic amount: scale a unit tag, which multiplies amounts
                return tr_builtin(Builtin::Mul, {tr_const(make_tag(tok.text, 1.0)), amount});
            }
            case ActionExpr::K::Call: {
                std::vector<TraceExprPtr> args;
                bool all_const = true;
                for (const auto& a : e->args) {
                    args.push_back(eval(node, a, vals, used_lookup));
                    all_const = all_const && is_const(args.back());
                }
                if (all_const) {
                    std::vector<Value> vs;
                    for (const auto& a : args) vs.push_back(a->cval);
                    return tr_const(apply_builtin(e->op, vs.data(), vs.size(), sk.rates));
                }
                return tr_builtin(e->op, std::move(args));
            }
            case ActionExpr::K::Hole: {
                std::vector<TraceExprPtr> args;
                bool all_const = true;
                for (const auto& a : e->args) {
                    args.push_back(eval(node, a, vals, used_lookup));
                    all_const = all_const && is_const(args.back());
                }
                auto bit = sk.defs.find(e->hole);
                if (bit != sk.defs.end() && all_const) {
                    std::vector<Value> vs;
                    for (const auto& a : args) vs.push_back(a->cval);
                    Value out;
                    if (!try_apply_body(hole_signature(sk, *sk.find_hole(e->hole)), *bit->second,
                                        vs, out, sk.rates))
                        throw EvalError("hole " + e->hole + " body failed on its arguments");
                    return tr_const(out);
                }
                // unbound holes and symbolic applications become steps so the
                // trace stays straight-line with named intermediates
                std::string var = push_step("a", na, tr_holecall(e->hole, std::move(args)));
                return tr_var(var);
            }
        }
        throw EvalError("unreachable action kind");
    }
};

inline TraceExprPtr rename_var(const TraceExprPtr& e, const std::string& from, const std::string& to) {
    if (e->k == TraceExpr::K::Var)
        return e->name == from ? tr_var(to) : e;
    if (e->args.empty()) return e;
    bool touched = false;
    std::vector<TraceExprPtr> args;
    args.reserve(e->args.size());
    for (const auto& a : e->args) {
        args.push_back(rename_var(a, from, to));
        touched = touched || args.back() != a;
    }
    if (!touched) return e;
    auto n = std::make_shared<TraceExpr>(*e);
    n->args = std::move(args);
    return n;
}

}  // namespace detail

inline Trace gen_trace(const Sketch& sk, const PTree& t, const Context& ctx) {
    FlatTree ft = flatten(sk, t);
    Schedule sched = build_schedule(sk, ft);
    detail::TraceGen gen(sk, ft, ctx);
    std::map<InstKey, TraceExprPtr> vals;

    Trace trace;
    trace.out = "out";
    for (const auto& item : sched.order) {
        bool used_lookup = false;
        TraceExprPtr v = gen.eval(item.owner, item.rule->rhs, vals, used_lookup);
        if (item.rule->is_output) {
            if (v->k == TraceExpr::K::Var) {
                // claim the copied step's name
                for (auto& st : gen.steps) {
                    st.rhs = detail::rename_var(st.rhs, v->name, "out");
                    if (st.var == v->name) st.var = "out";
                }
            } else {
                gen.steps.push_back({"out", v});
            }
            break;  // the output instance is scheduled last
        }
        if (v->k == TraceExpr::K::Const && used_lookup) {
            v = tr_var(gen.push_step("x", gen.nx, v));
        } else if (v->k == TraceExpr::K::Builtin) {
            v = tr_var(gen.push_step("t", gen.nt, v));
        }
        vals[item.inst] = v;
    }
    trace.steps = std::move(gen.steps);
    return trace;
}

// ---------------------------------------------------------------------------
// Trace evaluation under candidate hole bodies.

using HoleBodies = std::map<std::string, DslExprPtr>;
using HoleSigs = std::map<std::string, HoleSignature>;

namespace detail {

inline bool try_eval_trace_expr(const TraceExpr& e, const std::map<std::string, Value>& env,
                                const HoleBodies& bodies, const HoleSigs& sigs,
                                const CurrencyTable& rates, Value& out) {
    switch (e.k) {
        case TraceExpr::K::Const: out = e.cval; return true;
        case TraceExpr::K::Var: {
            auto it = env.find(e.name);
            if (it == env.end()) return false;
            out = it->second;
            return true;
        }
        case TraceExpr::K::Builtin: {
            std::vector<Value> args(e.args.size());
            for (size_t i = 0; i < e.args.size(); ++i)
                if (!try_eval_trace_expr(*e.args[i], env, bodies, sigs, rates, args[i])) return false;
            return try_apply(e.op, args.data(), args.size(), out, rates);
        }
        case TraceExpr::K::Holecall: {
            auto bit = bodies.find(e.name);
            auto sit = sigs.find(e.name);
            if (bit == bodies.end() || sit == sigs.end() || !bit->second) return false;
            std::vector<Value> args(e.args.size());
            for (size_t i = 0; i < e.args.size(); ++i)
                if (!try_eval_trace_expr(*e.args[i], env, bodies, sigs, rates, args[i])) return false;
            return try_apply_body(sit->second, *bit->second, args, out, rates);
        }
    }
    return false;
}

}  // namespace detail

inline bool try_eval_trace(const Trace& t, const HoleBodies& bodies, const HoleSigs& sigs,
                           const CurrencyTable& rates, Value& out) {
    std::map<std::string, Value> env;
    for (const auto& st : t.steps) {
        Value v;
        if (!detail::try_eval_trace_expr(*st.rhs, env, bodies, sigs, rates, v)) return false;
        env[st.var] = v;
    }
    auto it = env.find(t.out);
    if (it == env.end()) return false;
    out = it->second;
    return true;
}

inline Value eval_trace(const Trace& t, const HoleBodies& bodies, const HoleSigs& sigs,
                        const CurrencyTable& rates = default_currency_table()) {
    std::map<std::string, Value> env;
    for (size_t i = 0; i < t.steps.size(); ++i) {
        Value v;
        if (!detail::try_eval_trace_expr(*t.steps[i].rhs, env, bodies, sigs, rates, v))
            throw EvalError("trace step " + std::to_string(i) + " (" + t.steps[i].var + ") failed");
        env[t.steps[i].var] = v;
    }
    auto it = env.find(t.out);
    if (it == env.end()) throw EvalError("trace out variable " + t.out + " never assigned");
    return it->second;
}

}  // namespace agsynth
