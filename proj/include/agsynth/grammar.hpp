#pragma once

// Attribute-grammar sketches: symbols, productions, semantic rules with typed
// holes, plus structural validation and hole binding/completion.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dsl.hpp"
#include "values.hpp"

namespace agsynth {

enum class LexKind { None, IntLex, IdentLex };

struct Symbol {
    std::string name;
    bool terminal = false;
    std::string pattern;   // literal text, or regex source when is_regex
    bool is_regex = false;
    LexKind lex = LexKind::None;
};

// Attribute reference: occurrence 0 is the production head, occurrence k >= 1
// is the k-th symbol of the body (absolute position, 1-based).
struct AttrRef {
    int occ = 0;
    std::string attr;

    bool operator==(const AttrRef& o) const { return occ == o.occ && attr == o.attr; }
    bool operator<(const AttrRef& o) const {
        if (occ != o.occ) return occ < o.occ;
        return attr < o.attr;
    }
};

struct ActionExpr;
using ActionExprPtr = std::shared_ptr<const ActionExpr>;

struct ActionExpr {
    enum class K { Const, Attr, GetVal, LookUp, TagMake, Call, Hole };
    K k = K::Const;

    Value cval;                        // Const
    AttrRef aref;                      // Attr
    int occ = 0;                       // GetVal / LookUp / TagMake: terminal occurrence
    Builtin op = Builtin::Add;         // Call
    std::string hole;                  // Hole: declared hole name
    std::vector<ActionExprPtr> args;   // Call / Hole / TagMake (single amount arg)
};

inline ActionExprPtr ae_const(Value v) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::Const;
    e->cval = std::move(v);
    return e;
}
inline ActionExprPtr ae_attr(int occ, std::string attr) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::Attr;
    e->aref = AttrRef{occ, std::move(attr)};
    return e;
}
inline ActionExprPtr ae_getval(int occ) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::GetVal;
    e->occ = occ;
    return e;
}
inline ActionExprPtr ae_lookup(int occ) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::LookUp;
    e->occ = occ;
    return e;
}
inline ActionExprPtr ae_tag(int occ, ActionExprPtr amount) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::TagMake;
    e->occ = occ;
    e->args.push_back(std::move(amount));
    return e;
}
inline ActionExprPtr ae_call(Builtin op, std::vector<ActionExprPtr> args) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::Call;
    e->op = op;
    e->args = std::move(args);
    return e;
}
inline ActionExprPtr ae_hole(std::string name, std::vector<ActionExprPtr> args) {
    auto e = std::make_shared<ActionExpr>();
    e->k = ActionExpr::K::Hole;
    e->hole = std::move(name);
    e->args = std::move(args);
    return e;
}

// A semantic rule either defines an attribute instance (target := rhs) or the
// tree output (output(rhs)), which is only legal on start-headed productions.
struct SemanticRule {
    bool is_output = false;
    AttrRef target;
    ActionExprPtr rhs;
};

struct Production {
    int id = 0;                 // 1-based, stable; used in derivations and coverage
    int head = -1;              // symbol index
    std::vector<int> body;      // symbol indices, possibly empty
    std::vector<SemanticRule> rules;
};

struct HoleDecl {
    std::string name;
    std::vector<ValueKind> params;
    ValueKind ret = ValueKind::Dual;
    std::string dsl_entry;      // DSL nonterminal the body is drawn from
};

struct Sketch {
    std::vector<Symbol> symbols;
    std::map<std::string, int> sym_index;
    int start = -1;
    std::vector<Production> prods;
    std::vector<HoleDecl> holes;
    std::map<std::string, DslExprPtr> defs;   // bound hole bodies
    DslGrammar dsl;
    CurrencyTable rates = default_currency_table();
    std::vector<std::string> var_pool = {"x"};

    int symbol_of(const std::string& name) const {
        auto it = sym_index.find(name);
        return it == sym_index.end() ? -1 : it->second;
    }
    int intern_symbol(const Symbol& s) {
        auto it = sym_index.find(s.name);
        if (it != sym_index.end()) return it->second;
        symbols.push_back(s);
        int idx = int(symbols.size()) - 1;
        sym_index.emplace(s.name, idx);
        return idx;
    }
    const HoleDecl* find_hole(const std::string& name) const {
        for (const auto& h : holes)
            if (h.name == name) return &h;
        return nullptr;
    }
    const Production* find_prod(int id) const {
        for (const auto& p : prods)
            if (p.id == id) return &p;
        return nullptr;
    }
};

template <typename F>
inline void walk_action(const ActionExprPtr& e, F&& fn) {
    if (!e) return;
    fn(*e);
    for (const auto& a : e->args) walk_action(a, fn);
}

inline void collect_hole_names(const ActionExprPtr& e, std::set<std::string>& out) {
    walk_action(e, [&](const ActionExpr& n) {
        if (n.k == ActionExpr::K::Hole) out.insert(n.hole);
    });
}

inline std::set<std::string> holes_called_in(const Production& p) {
    std::set<std::string> out;
    for (const auto& r : p.rules) collect_hole_names(r.rhs, out);
    return out;
}

// Productions whose rules call at least one hole with no bound body yet.
inline std::vector<int> sketchy_prods(const Sketch& s) {
    std::vector<int> out;
    for (const auto& p : s.prods) {
        bool sketchy = false;
        for (const auto& h : holes_called_in(p))
            if (!s.defs.count(h)) { sketchy = true; break; }
        if (sketchy) out.push_back(p.id);
    }
    return out;
}

inline std::set<std::string> unbound_holes(const Sketch& s) {
    std::set<std::string> out;
    for (const auto& h : s.holes)
        if (!s.defs.count(h.name)) out.insert(h.name);
    return out;
}

// Extends the binding map; holes already bound keep their old body only if the
// new map does not override them (bindings replace, matching resynthesis).
inline Sketch bind_holes(const Sketch& s, const std::map<std::string, DslExprPtr>& bindings) {
    Sketch out = s;
    for (const auto& [name, body] : bindings) out.defs[name] = body;
    return out;
}

// Full completion: every declared hole must end up bound.
inline Sketch complete(const Sketch& s, const std::map<std::string, DslExprPtr>& bindings) {
    Sketch out = bind_holes(s, bindings);
    for (const auto& h : out.holes)
        if (!out.defs.count(h.name))
            throw EvalError("complete: missing binding for hole " + h.name);
    return out;
}

inline HoleSignature hole_signature(const Sketch& s, const HoleDecl& decl) {
    return make_signature(decl.params, decl.ret, decl.dsl_entry);
}

namespace detail {

inline void validate_action(const Sketch& s, const Production& p, const ActionExprPtr& e,
                            std::vector<std::string>& errs, const std::string& where) {
    if (!e) {
        errs.push_back(where + ": empty expression");
        return;
    }
    auto occ_ok = [&](int occ) { return occ >= 1 && occ <= int(p.body.size()); };
    switch (e->k) {
        case ActionExpr::K::Const:
            break;
        case ActionExpr::K::Attr: {
            int occ = e->aref.occ;
            if (occ == 0) {
                if (s.symbols[p.head].terminal)
                    errs.push_back(where + ": attribute on terminal head");
            } else if (!occ_ok(occ)) {
                errs.push_back(where + ": attribute occurrence " + std::to_string(occ) + " out of range");
            } else if (s.symbols[p.body[occ - 1]].terminal) {
                errs.push_back(where + ": attributes live on nonterminals; use getVal/lookUp for terminals");
            }
            break;
        }
        case ActionExpr::K::GetVal:
        case ActionExpr::K::LookUp:
        case ActionExpr::K::TagMake: {
            if (!occ_ok(e->occ)) {
                errs.push_back(where + ": terminal occurrence " + std::to_string(e->occ) + " out of range");
                break;
            }
            const Symbol& sym = s.symbols[p.body[e->occ - 1]];
            if (!sym.terminal) {
                errs.push_back(where + ": occurrence " + std::to_string(e->occ) + " is not a terminal");
                break;
            }
            if (e->k == ActionExpr::K::GetVal && sym.lex != LexKind::IntLex)
                errs.push_back(where + ": getVal needs an int-lexeme terminal, got " + sym.name);
            if (e->k == ActionExpr::K::LookUp && sym.lex != LexKind::IdentLex)
                errs.push_back(where + ": lookUp needs an ident-lexeme terminal, got " + sym.name);
            if (e->k == ActionExpr::K::TagMake && e->args.size() != 1)
                errs.push_back(where + ": tag takes exactly one amount expression");
            break;
        }
        case ActionExpr::K::Call: {
            size_t want = builtin_arity(e->op);
            if (e->args.size() != want)
                errs.push_back(where + ": " + builtin_name(e->op) + " expects " + std::to_string(want) +
                               " args, got " + std::to_string(e->args.size()));
            break;
        }
        case ActionExpr::K::Hole: {
            const HoleDecl* d = s.find_hole(e->hole);
            if (!d) {
                errs.push_back(where + ": undeclared hole " + e->hole);
            } else if (e->args.size() != d->params.size()) {
                errs.push_back(where + ": hole " + e->hole + " expects " + std::to_string(d->params.size()) +
                               " args, got " + std::to_string(e->args.size()));
            }
            break;
        }
    }
    for (const auto& a : e->args) validate_action(s, p, a, errs, where);
}

}  // namespace detail

inline std::vector<std::string> validate_sketch(const Sketch& s) {
    std::vector<std::string> errs;

    std::set<std::string> seen;
    for (const auto& sym : s.symbols)
        if (!seen.insert(sym.name).second)
            errs.push_back("duplicate symbol name " + sym.name);
    if (s.start < 0 || s.start >= int(s.symbols.size()))
        errs.push_back("missing start symbol");
    else if (s.symbols[s.start].terminal)
        errs.push_back("start symbol must be a nonterminal");

    std::set<std::string> hole_names;
    for (const auto& h : s.holes) {
        if (!hole_names.insert(h.name).second) errs.push_back("duplicate hole " + h.name);
        if (s.dsl.index_of(h.dsl_entry) < 0)
            errs.push_back("hole " + h.name + ": unknown DSL entry " + h.dsl_entry);
    }

    std::set<int> prod_ids;
    for (const auto& p : s.prods) {
        std::string where = "prod " + std::to_string(p.id);
        if (p.id <= 0 || !prod_ids.insert(p.id).second) errs.push_back(where + ": bad or duplicate id");
        if (p.head < 0 || p.head >= int(s.symbols.size()) || s.symbols[p.head].terminal) {
            errs.push_back(where + ": head must be a nonterminal");
            continue;
        }
        bool body_ok = true;
        for (int b : p.body)
            if (b < 0 || b >= int(s.symbols.size())) { body_ok = false; break; }
        if (!body_ok) {
            errs.push_back(where + ": body symbol out of range");
            continue;
        }

        int output_rules = 0;
        std::set<AttrRef> targets;
        for (const auto& r : p.rules) {
            if (r.is_output) {
                output_rules++;
            } else {
                const AttrRef& t = r.target;
                if (t.occ < 0 || t.occ > int(p.body.size())) {
                    errs.push_back(where + ": rule target occurrence out of range");
                } else {
                    int sym = t.occ == 0 ? p.head : p.body[t.occ - 1];
                    if (s.symbols[sym].terminal)
                        errs.push_back(where + ": rule target on terminal occurrence");
                }
                if (!targets.insert(t).second)
                    errs.push_back(where + ": duplicate rule for " + t.attr + " at occurrence " +
                                   std::to_string(t.occ));
            }
            detail::validate_action(s, p, r.rhs, errs, where);
        }
        bool start_headed = p.head == s.start;
        if (start_headed && output_rules != 1)
            errs.push_back(where + ": start-headed productions need exactly one output rule");
        if (!start_headed && output_rules != 0)
            errs.push_back(where + ": output rules are only legal on start-headed productions");
    }

    for (const auto& [name, body] : s.defs) {
        if (!s.find_hole(name)) errs.push_back("binding for undeclared hole " + name);
        if (!body) errs.push_back("empty binding for hole " + name);
    }

    try {
        validate_dsl(s.dsl);
    } catch (const EvalError& e) {
        errs.push_back(std::string("dsl: ") + e.what());
    }
    return errs;
}

inline void ensure_valid(const Sketch& s) {
    auto errs = validate_sketch(s);
    if (!errs.empty()) {
        std::string msg = "invalid sketch:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw EvalError(msg);
    }
}

}  // namespace agsynth
