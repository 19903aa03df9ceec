#pragma once

// Derivation coverage and coverage-guided example generation.
//
// The coverage unit is the production set of an input's derivation. A suite
// of strings W achieves the set-of-sets Q1 = {prod_set(w) | w in W}; its
// derivation coverage is |Q1| / 2^|P|, reported in log2 form because the
// denominator is astronomical for any real grammar. The generator grows Q1
// by random grammar walks biased toward untouched productions, accepting a
// walk only when its production set is new, then asks an oracle for the
// expected output. A separate validation pass hunts for alternate hole
// bodies that agree with the accepted examples but disagree somewhere else;
// any such disagreement, checked against the oracle, becomes a new example
// that pins the ambiguity down.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evaluator.hpp"
#include "oracle.hpp"
#include "parser.hpp"
#include "rng.hpp"

namespace agsynth {

// ---------------------------------------------------------------------------
// Coverage bookkeeping.

struct CoverageState {
    std::set<std::set<int>> q1;   // production sets achieved so far
    std::map<int, int> hits;      // per-production acceptance counts

    bool contains(const std::set<int>& deriv) const { return q1.count(deriv) != 0; }
    void add(const std::set<int>& deriv) {
        q1.insert(deriv);
        for (int p : deriv) ++hits[p];
    }
    bool touched(int prod_id) const {
        auto it = hits.find(prod_id);
        return it != hits.end() && it->second > 0;
    }
};

struct CoverageSummary {
    int q1_count = 0;
    std::set<int> covered;    // union of the production sets
    double fraction_log2 = -std::numeric_limits<double>::infinity();
};

inline CoverageSummary derivation_coverage(const Sketch& s, const std::vector<std::string>& W) {
    CoverageSummary out;
    std::set<std::set<int>> q1;
    for (const auto& w : W) {
        PTree t;
        try {
            t = must_parse(s, w);
        } catch (const std::exception& ex) {
            throw EvalError("coverage input \"" + w + "\" does not parse: " + ex.what());
        }
        std::set<int> ps = prod_set(t);
        out.covered.insert(ps.begin(), ps.end());
        q1.insert(std::move(ps));
    }
    out.q1_count = static_cast<int>(q1.size());
    if (!q1.empty())
        out.fraction_log2 = std::log2(static_cast<double>(q1.size())) -
                            static_cast<double>(s.prods.size());
    return out;
}

// ---------------------------------------------------------------------------
// Context sampling: uniform small integers, so oracle values stay small and
// the resulting synthesis constraints stay discriminating.

inline Context sample_context(const std::set<std::string>& vars, Rng& rng) {
    Context ctx;
    for (const auto& v : vars) ctx[v] = make_int(rng.uniform_int(-5, 5));
    return ctx;
}

inline Context sample_context(const std::set<std::string>& vars, std::uint64_t seed) {
    Rng rng(seed);
    return sample_context(vars, rng);
}

namespace detail {

constexpr int kDepthInf = std::numeric_limits<int>::max() / 4;
constexpr int kContextResampleLimit = 20;

// Fewest nested expansions needed to reach an all-terminal string from each
// symbol (terminals take zero). Used to keep random walks terminating.
inline std::vector<int> symbol_min_depth(const Sketch& s) {
    std::vector<int> d(s.symbols.size(), kDepthInf);
    for (std::size_t i = 0; i < s.symbols.size(); ++i)
        if (s.symbols[i].terminal) d[i] = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& p : s.prods) {
            int need = 0;
            for (int sym : p.body) need = std::max(need, d[sym]);
            if (need >= kDepthInf) continue;
            if (need + 1 < d[p.head]) {
                d[p.head] = need + 1;
                changed = true;
            }
        }
    }
    return d;
}

inline int prod_depth_need(const Sketch& s, const Production& p, const std::vector<int>& d) {
    int need = 0;
    for (int sym : p.body) {
        if (d[sym] >= kDepthInf) return kDepthInf;
        need = std::max(need, d[sym]);
    }
    return need + 1;
}

// One random derivation walk. Expansion picks productions epsilon-greedily:
// most of the time prefer an alternative that introduces a production this
// walk has not used and acceptance has not covered; near the depth budget,
// fall back to the shallowest alternatives so the walk always bottoms out.
struct GenWalk {
    const Sketch& s;
    const std::vector<int>& min_depth;
    const CoverageState& cov;
    Rng& rng;
    int depth_budget;
    const std::set<int>* allowed = nullptr;   // optional production filter

    std::set<int> deriv;
    std::vector<std::string> tokens;
    std::set<std::string> vars;

    bool expand(int sym, int remaining) {
        const Symbol& S = s.symbols[sym];
        if (S.terminal) {
            tokens.push_back(sample_lexeme(S));
            return true;
        }
        if (remaining <= 0) return false;
        std::vector<const Production*> eligible;
        for (const auto& p : s.prods) {
            if (p.head != sym) continue;
            if (allowed && !allowed->count(p.id)) continue;
            if (prod_depth_need(s, p, min_depth) <= remaining) eligible.push_back(&p);
        }
        if (eligible.empty()) return false;
        const Production* pick = select(eligible, remaining);
        deriv.insert(pick->id);
        for (int child : pick->body)
            if (!expand(child, remaining - 1)) return false;
        return true;
    }

    const Production* select(const std::vector<const Production*>& eligible, int remaining) {
        // Tail guard: past 80% of the budget only the shallowest options remain.
        if (remaining * 5 <= depth_budget) {
            int best = kDepthInf;
            for (const Production* p : eligible)
                best = std::min(best, prod_depth_need(s, *p, min_depth));
            std::vector<const Production*> shallow;
            for (const Production* p : eligible)
                if (prod_depth_need(s, *p, min_depth) == best) shallow.push_back(p);
            return shallow[rng.pick_index(shallow.size())];
        }
        std::vector<const Production*> novel;
        for (const Production* p : eligible)
            if (!deriv.count(p->id) && !cov.touched(p->id)) novel.push_back(p);
        if (!novel.empty() && rng.chance(0.7)) return novel[rng.pick_index(novel.size())];
        return eligible[rng.pick_index(eligible.size())];
    }

    std::string sample_lexeme(const Symbol& S) {
        switch (S.lex) {
            case LexKind::IntLex:
                return std::to_string(rng.uniform_int(0, 9));
            case LexKind::IdentLex: {
                const std::string& v = s.var_pool[rng.pick_index(s.var_pool.size())];
                vars.insert(v);
                return v;
            }
            case LexKind::None:
                if (S.is_regex)
                    throw EvalError("cannot sample a lexeme for pattern terminal " + S.name);
                return S.pattern;
        }
        throw EvalError("unreachable lexeme kind");
    }
};

inline std::string join_tokens(const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += toks[i];
    }
    return out;
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    Rng r(master ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return r.next();
}

}   // namespace detail

// ---------------------------------------------------------------------------
// One generation attempt: random walk from `start_sym`, accepted only if its
// production set is new. On acceptance the oracle is queried (resampling the
// context on domain errors) and the coverage state absorbs the new set.
// Returns nullopt on rejection: depth exhaustion, an already-covered set, or
// a context that never evaluates cleanly.

inline std::optional<Example> generate_example(const Sketch& s, int start_sym,
                                               const Oracle& oracle, CoverageState& cov,
                                               std::uint64_t seed, int depth_budget) {
    if (depth_budget < 1) throw EvalError("generation depth budget must be at least 1");
    Rng rng(seed);
    std::vector<int> md = detail::symbol_min_depth(s);
    detail::GenWalk walk{s, md, cov, rng, depth_budget};
    if (!walk.expand(start_sym, depth_budget)) return std::nullopt;
    if (cov.contains(walk.deriv)) return std::nullopt;
    std::string input = detail::join_tokens(walk.tokens);
    for (int attempt = 0; attempt < detail::kContextResampleLimit; ++attempt) {
        Context ctx = sample_context(walk.vars, rng);
        Value v;
        try {
            v = oracle(input, ctx);
        } catch (const EvalError&) {
            continue;   // domain error: try another context
        }
        cov.add(walk.deriv);
        return Example{std::move(input), std::move(ctx), std::move(v)};
    }
    return std::nullopt;
}

inline std::optional<Example> generate_example(const Sketch& s, const Oracle& oracle,
                                               CoverageState& cov, std::uint64_t seed,
                                               int depth_budget) {
    return generate_example(s, s.start, oracle, cov, seed, depth_budget);
}

// ---------------------------------------------------------------------------
// Suite generation: repeated attempts on disjoint seed streams until the
// requested number of distinct production sets is reached (or attempts run
// out, which flags the result as partial). Smaller derivations and shorter
// inputs sort first.

struct SuiteResult {
    std::vector<Example> examples;
    CoverageState cov;
    bool target_reached = false;
    int attempts = 0;
};

inline SuiteResult generate_suite(const Sketch& s, const Oracle& oracle, int target_q1,
                                  int max_attempts, std::uint64_t seed, int depth_budget = 10) {
    if (target_q1 < 1) throw EvalError("suite target must be at least 1");
    SuiteResult out;
    struct Row {
        std::size_t set_size;
        std::size_t tokens;
        Example ex;
    };
    std::vector<Row> rows;
    while (out.attempts < max_attempts &&
           static_cast<int>(out.cov.q1.size()) < target_q1) {
        std::uint64_t attempt_seed = detail::stream_seed(seed, out.attempts);
        ++out.attempts;
        auto ex = generate_example(s, oracle, out.cov, attempt_seed, depth_budget);
        if (!ex) continue;
        PTree t = must_parse(s, ex->input);
        rows.push_back(Row{prod_set(t).size(), tokenize(s, ex->input).size(), std::move(*ex)});
    }
    out.target_reached = static_cast<int>(out.cov.q1.size()) >= target_q1;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.set_size != b.set_size) return a.set_size < b.set_size;
        if (a.tokens != b.tokens) return a.tokens < b.tokens;
        return a.ex.input < b.ex.input;
    });
    out.examples.reserve(rows.size());
    for (auto& r : rows) out.examples.push_back(std::move(r.ex));
    return out;
}

// ---------------------------------------------------------------------------
// Distinguishing-input validation. Given bindings R that pass the examples E,
// look for an alternate body of some example-exercised hole that also passes
// E yet disagrees with R somewhere in the language both completions can
// evaluate. A disagreement is resolved by the oracle and returned as a new
// example; running out of alternates or probes within the bounds yields
// UNIQUE-WITHIN-BOUNDS, which is explicitly not a uniqueness proof.

struct ValidateBounds {
    int max_dsl_size = 12;          // per scalar component, as in synthesis
    long long max_bodies = 200000;   // bodies enumerated per hole
    int max_alternates = 64;         // E-passing alternates probed per hole
    int probe_strings = 24;          // K: probe inputs (example inputs first)
    int probe_contexts = 4;          // C: contexts sampled per probe input
    int max_depth = 10;
    double tol = 1e-6;
};

struct ValidateResult {
    bool unique = true;   // UNIQUE-WITHIN-BOUNDS when no disagreement surfaced
    bool zero_probe = false;
    std::optional<Example> distinguishing;
    std::string alt_hole;    // hole whose alternate body disagreed
    std::string alt_body;    // that body, pretty-printed
    long long alternates_tried = 0;
    long long bodies_enumerated = 0;
};

namespace detail {

struct Probe {
    std::string input;
    PTree tree;
    Context ctx;
    Value base;
};

// Probe inputs: every example input first, then fresh walks over the
// productions both completions can evaluate (holes all bound).
inline std::vector<std::string> probe_inputs(const Sketch& s, const std::set<int>& ready,
                                             const std::vector<Example>& E, int want,
                                             int max_depth, Rng& rng) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : E) {
        if (static_cast<int>(out.size()) >= want) break;
        if (seen.insert(e.input).second) out.push_back(e.input);
    }
    std::vector<int> md = symbol_min_depth(s);
    CoverageState diversity;
    for (int tries = 0; tries < 20 * want && static_cast<int>(out.size()) < want; ++tries) {
        GenWalk walk{s, md, diversity, rng, max_depth, &ready};
        if (!walk.expand(s.start, max_depth)) continue;
        std::string input = join_tokens(walk.tokens);
        if (!diversity.contains(walk.deriv)) diversity.add(walk.deriv);
        if (seen.insert(input).second) out.push_back(input);
    }
    return out;
}

}   // namespace detail

inline ValidateResult validate(const Sketch& s, const HoleBodies& R,
                               const std::vector<Example>& E, const DslGrammar& D,
                               const Oracle& oracle, const ValidateBounds& bounds,
                               std::uint64_t seed) {
    ValidateResult out;
    if (bounds.probe_strings <= 0 || bounds.probe_contexts <= 0) {
        out.zero_probe = true;
        return out;
    }
    Rng rng(seed ^ 0xd15717c75ull);

    // Holes worth second-guessing: bound in R and exercised by some example.
    // A hole no example touches is trivially ambiguous and says nothing.
    std::set<std::string> exercised;
    for (const auto& e : E)
        for (int pid : prod_set(must_parse(s, e.input)))
            for (const auto& h : holes_called_in(*s.find_prod(pid)))
                if (R.count(h)) exercised.insert(h);

    // Productions both completions can evaluate.
    std::set<int> ready;
    for (const auto& p : s.prods) {
        bool ok = true;
        for (const auto& h : holes_called_in(p))
            if (!R.count(h)) ok = false;
        if (ok) ready.insert(p.id);
    }

    Sketch base = bind_holes(s, R);

    // Probe set: (input, context) pairs with the base completion's value.
    std::vector<detail::Probe> probes;
    for (const std::string& input :
         detail::probe_inputs(s, ready, E, bounds.probe_strings, bounds.max_depth, rng)) {
        PTree t = must_parse(s, input);
        std::set<std::string> vars;
        for (const auto& tok : tokenize(s, input))
            if (s.symbols[tok.sym].lex == LexKind::IdentLex) vars.insert(tok.text);
        for (int c = 0; c < bounds.probe_contexts; ++c) {
            for (int tries = 0; tries < 10; ++tries) {
                Context ctx = sample_context(vars, rng);
                try {
                    Value v = eval_concrete(base, t, ctx);
                    probes.push_back(detail::Probe{input, t, std::move(ctx), std::move(v)});
                    break;
                } catch (const EvalError&) {
                    continue;   // domain fault under this context; resample
                }
            }
        }
    }

    // Cached example trees for the pass-E check.
    std::vector<PTree> etrees;
    etrees.reserve(E.size());
    for (const auto& e : E) etrees.push_back(must_parse(s, e.input));

    for (const auto& decl : s.holes) {
        if (!exercised.count(decl.name)) continue;
        const std::string ref_text = print_dsl(*R.at(decl.name));
        HoleSignature sig = hole_signature(s, decl);
        DslPool pool(D, sig, make_probe_envs(sig, 14, seed, s.rates), s.rates);
        Sketch alt = bind_holes(s, R);
        long long bodies = 0;
        long long alternates = 0;
        int mn = pool.min_size(pool.entry_nt());
        if (mn >= DslPool::kInf) continue;
        int lo = pool.dual_wrap() ? 1 + 2 * mn : mn;
        int hi = pool.dual_wrap() ? 1 + 2 * bounds.max_dsl_size : bounds.max_dsl_size;
        for (int total = lo; total <= hi; ++total) {
            if (bodies >= bounds.max_bodies || alternates >= bounds.max_alternates) break;
            bool stop = false;
            auto consider = [&](const DslExprPtr& body) -> bool {
                if (++bodies > bounds.max_bodies) return false;
                alt.defs[decl.name] = body;
                for (std::size_t i = 0; i < E.size(); ++i) {
                    Value got;
                    try {
                        got = eval_concrete(alt, etrees[i], E[i].context);
                    } catch (const EvalError&) {
                        return true;
                    }
                    if (!value_eq(got, E[i].output, bounds.tol)) return true;
                }
                if (print_dsl(*body) == ref_text) return true;
                ++alternates;
                ++out.alternates_tried;
                for (const auto& pr : probes) {
                    Value got;
                    try {
                        got = eval_concrete(alt, pr.tree, pr.ctx);
                    } catch (const EvalError&) {
                        continue;
                    }
                    if (value_eq(got, pr.base, bounds.tol)) continue;
                    Value truth;
                    try {
                        truth = oracle(pr.input, pr.ctx);
                    } catch (const EvalError&) {
                        continue;   // oracle domain error at this probe
                    }
                    out.unique = false;
                    out.distinguishing = Example{pr.input, pr.ctx, std::move(truth)};
                    out.alt_hole = decl.name;
                    out.alt_body = print_dsl(*body);
                    stop = true;
                    return false;
                }
                return alternates < bounds.max_alternates;
            };
            if (!pool.dual_wrap()) {
                for (const auto& pe : pool.level(pool.entry_nt(), total))
                    if (!consider(pe.e)) { stop = true; break; }
            } else {
                for (auto [sr, sd] : detail::dual_splits(total, bounds.max_dsl_size)) {
                    if (stop) break;
                    const auto& rs = pool.level(pool.entry_nt(), sr);
                    if (rs.empty()) continue;
                    const auto& ds = pool.level(pool.entry_nt(), sd);
                    if (ds.empty()) continue;
                    for (const auto& r : rs) {
                        for (const auto& d : ds)
                            if (!consider(dsl_app(Builtin::MkDual, {r.e, d.e}))) { stop = true; break; }
                        if (stop) break;
                    }
                }
            }
            if (out.distinguishing) return out;
            if (stop) break;
        }
        out.bodies_enumerated += bodies;
    }
    return out;
}

}   // namespace agsynth
