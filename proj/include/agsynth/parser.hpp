#pragma once

// Lexing and parsing of example inputs against a sketch's context-free core.
//
// The lexer is maximal-munch: longest match wins, ties go to the earliest
// declared token. The parser is an Earley recognizer (membership plus the
// furthest position reached, for error reporting) paired with a capped
// derivation-counting DP that decides ambiguity and drives deterministic
// first-tree extraction (production order, then smallest split first).

#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "grammar.hpp"

namespace agsynth {

struct LexError : std::runtime_error {
    size_t pos;
    explicit LexError(size_t p)
        : std::runtime_error("no token matches at position " + std::to_string(p)), pos(p) {}
};

struct Token {
    int sym = -1;       // terminal symbol index
    std::string text;
    size_t pos = 0;     // byte offset in the input
};

inline std::vector<Token> tokenize(const Sketch& sk, const std::string& input) {
    std::vector<std::pair<int, std::regex>> regexes;
    for (size_t i = 0; i < sk.symbols.size(); ++i)
        if (sk.symbols[i].terminal && sk.symbols[i].is_regex)
            regexes.emplace_back(int(i), std::regex(sk.symbols[i].pattern));

    std::vector<Token> out;
    size_t pos = 0;
    while (pos < input.size()) {
        if (std::isspace(static_cast<unsigned char>(input[pos]))) { pos++; continue; }
        int best_sym = -1;
        size_t best_len = 0;
        for (size_t i = 0; i < sk.symbols.size(); ++i) {
            const Symbol& s = sk.symbols[i];
            if (!s.terminal || s.is_regex) continue;
            if (!s.pattern.empty() && input.compare(pos, s.pattern.size(), s.pattern) == 0 &&
                s.pattern.size() > best_len) {
                best_sym = int(i);
                best_len = s.pattern.size();
            }
        }
        for (const auto& [idx, re] : regexes) {
            std::smatch m;
            if (std::regex_search(input.cbegin() + pos, input.cend(), m, re,
                                  std::regex_constants::match_continuous)) {
                size_t len = size_t(m[0].length());
                if (len > best_len) {
                    best_sym = idx;
                    best_len = len;
                } else if (len == best_len && len > 0 && best_sym >= 0 && idx < best_sym &&
                           !sk.symbols[best_sym].is_regex) {
                    // literal vs regex tie keeps whichever was declared first
                    best_sym = idx;
                }
            }
        }
        if (best_sym < 0 || best_len == 0) throw LexError(pos);
        out.push_back(Token{best_sym, input.substr(pos, best_len), pos});
        pos += best_len;
    }
    return out;
}

struct PNode;
using PTree = std::shared_ptr<const PNode>;

struct PNode {
    int sym = -1;             // symbol index
    int prod = -1;            // production id for internal nodes, -1 for leaves
    Token tok;                // leaves only
    std::vector<PTree> kids;  // internal only
    bool is_leaf() const { return prod < 0; }
};

inline void leftmost_derivation_rec(const PTree& t, std::vector<int>& out) {
    if (!t || t->is_leaf()) return;
    out.push_back(t->prod);
    for (const auto& k : t->kids) leftmost_derivation_rec(k, out);
}

// Preorder production ids; for a context-free derivation this is exactly the
// sequence of rules applied in a leftmost derivation.
inline std::vector<int> leftmost_derivation(const PTree& t) {
    std::vector<int> out;
    leftmost_derivation_rec(t, out);
    return out;
}

inline std::set<int> prod_set(const PTree& t) {
    auto d = leftmost_derivation(t);
    return std::set<int>(d.begin(), d.end());
}

struct ParseResult {
    enum class Status { Ok, Ambiguous, NoParse };
    Status status = Status::NoParse;
    PTree tree;             // only for Ok
    int trees = 0;          // derivation count capped at 2
    int furthest_token = 0; // token index progress stopped at (NoParse)
    size_t furthest_byte = 0;
};

namespace detail {

// Earley recognizer; returns {accepted, furthest chart index with any state}.
inline std::pair<bool, int> earley(const Sketch& sk, const std::vector<Token>& toks) {
    const int n = int(toks.size());
    const int naug = int(sk.prods.size());  // augmented start production index

    auto body_size = [&](int p) { return p == naug ? 1 : int(sk.prods[p].body.size()); };
    auto body_at = [&](int p, int k) { return p == naug ? sk.start : sk.prods[p].body[k]; };
    auto head_of = [&](int p) { return p == naug ? -1 : sk.prods[p].head; };

    auto key = [&](int p, int dot, int origin) {
        return (static_cast<long long>(p) * 64 + dot) * (n + 1) + origin;
    };

    std::vector<std::vector<std::array<int, 3>>> chart(n + 1);
    std::vector<std::set<long long>> seen(n + 1);
    auto add = [&](int pos, int p, int dot, int origin) {
        if (seen[pos].insert(key(p, dot, origin)).second)
            chart[pos].push_back({p, dot, origin});
    };

    add(0, naug, 0, 0);
    int furthest = 0;
    for (int pos = 0; pos <= n; ++pos) {
        if (!chart[pos].empty()) furthest = pos;
        for (size_t idx = 0; idx < chart[pos].size(); ++idx) {
            auto [p, dot, origin] = chart[pos][idx];
            if (dot == body_size(p)) {
                // complete: advance every state waiting on this head at origin
                int h = head_of(p);
                if (h < 0) continue;
                for (size_t past = 0; past < chart[origin].size(); ++past) {
                    auto [q, qdot, qorig] = chart[origin][past];
                    if (qdot < body_size(q) && body_at(q, qdot) == h)
                        add(pos, q, qdot + 1, qorig);
                }
                continue;
            }
            int next = body_at(p, dot);
            if (sk.symbols[next].terminal) {
                if (pos < n && toks[pos].sym == next) add(pos + 1, p, dot + 1, origin);
            } else {
                for (size_t q = 0; q < sk.prods.size(); ++q)
                    if (sk.prods[q].head == next) add(pos, int(q), 0, pos);
            }
        }
    }
    bool ok = seen[n].count(key(naug, 1, 0)) > 0;
    return {ok, furthest};
}

// Derivation-count DP, capped at 2, with a per-span-length fixpoint so unit
// and empty cycles converge (a productive cycle saturates the cap, which is
// the right answer: infinitely many trees).
struct CountDP {
    const Sketch& sk;
    const std::vector<Token>& toks;
    int n;
    int nsym;
    std::vector<int> max_dot;
    // cnt_sym[sym][i*(n+1)+j], cnt_ways[p][k][i*(n+1)+j]
    std::vector<std::vector<unsigned char>> cnt_sym;
    std::vector<std::vector<std::vector<unsigned char>>> cnt_ways;

    CountDP(const Sketch& s, const std::vector<Token>& t) : sk(s), toks(t) {
        n = int(toks.size());
        nsym = int(sk.symbols.size());
        size_t cells = size_t(n + 1) * (n + 1);
        cnt_sym.assign(nsym, std::vector<unsigned char>(cells, 0));
        cnt_ways.resize(sk.prods.size());
        for (size_t p = 0; p < sk.prods.size(); ++p)
            cnt_ways[p].assign(sk.prods[p].body.size() + 1,
                               std::vector<unsigned char>(cells, 0));
        for (int i = 0; i < n; ++i) cnt_sym[toks[i].sym][at(i, i + 1)] = 1;
        run();
    }

    size_t at(int i, int j) const { return size_t(i) * (n + 1) + j; }
    int sym_count(int sym, int i, int j) const { return cnt_sym[sym][at(i, j)]; }
    int ways_count(int p, int k, int i, int j) const { return cnt_ways[p][k][at(i, j)]; }

    static unsigned char cap(int v) { return (unsigned char)(v > 2 ? 2 : v); }

    void run() {
        for (int len = 0; len <= n; ++len) {
            bool changed = true;
            while (changed) {
                changed = false;
                for (int i = 0; i + len <= n; ++i) {
                    int j = i + len;
                    for (size_t p = 0; p < sk.prods.size(); ++p) {
                        const auto& body = sk.prods[p].body;
                        for (int k = int(body.size()); k >= 0; --k) {
                            int v;
                            if (k == int(body.size())) {
                                v = (i == j) ? 1 : 0;
                            } else {
                                int sum = 0;
                                for (int m = i; m <= j; ++m) {
                                    int a = cnt_sym[body[k]][at(i, m)];
                                    if (!a) continue;
                                    int b = cnt_ways[p][k + 1][at(m, j)];
                                    if (!b) continue;
                                    sum += a * b;
                                    if (sum >= 2) { sum = 2; break; }
                                }
                                v = sum;
                            }
                            if (cap(v) > cnt_ways[p][k][at(i, j)]) {
                                cnt_ways[p][k][at(i, j)] = cap(v);
                                changed = true;
                            }
                        }
                    }
                    for (int sym = 0; sym < nsym; ++sym) {
                        if (sk.symbols[sym].terminal) continue;
                        int sum = 0;
                        for (size_t p = 0; p < sk.prods.size() && sum < 2; ++p)
                            if (sk.prods[p].head == sym) sum += cnt_ways[p][0][at(i, j)];
                        if (cap(sum) > cnt_sym[sym][at(i, j)]) {
                            cnt_sym[sym][at(i, j)] = cap(sum);
                            changed = true;
                        }
                    }
                }
            }
        }
    }

    // Only called when the root count is exactly 1; counts of 1 cannot sit on
    // a productive cycle, so the descent terminates.
    PTree build(int sym, int i, int j) const {
        if (sk.symbols[sym].terminal) {
            auto node = std::make_shared<PNode>();
            node->sym = sym;
            node->tok = toks[i];
            return node;
        }
        for (size_t p = 0; p < sk.prods.size(); ++p) {
            if (sk.prods[p].head != sym || !cnt_ways[p][0][at(i, j)]) continue;
            auto node = std::make_shared<PNode>();
            node->sym = sym;
            node->prod = sk.prods[p].id;
            int pos = i;
            const auto& body = sk.prods[p].body;
            for (size_t k = 0; k < body.size(); ++k) {
                for (int m = pos; m <= j; ++m) {
                    if (cnt_sym[body[k]][at(pos, m)] && cnt_ways[p][k + 1][at(m, j)]) {
                        node->kids.push_back(build(body[k], pos, m));
                        pos = m;
                        break;
                    }
                }
            }
            return node;
        }
        throw EvalError("tree extraction reached an underivable span");
    }
};

}  // namespace detail

inline ParseResult parse_tokens(const Sketch& sk, const std::vector<Token>& toks) {
    ParseResult r;
    auto [ok, furthest] = detail::earley(sk, toks);
    if (!ok) {
        r.status = ParseResult::Status::NoParse;
        r.furthest_token = furthest;
        r.furthest_byte = furthest < int(toks.size()) ? toks[furthest].pos
                          : toks.empty()              ? 0
                                                      : toks.back().pos + toks.back().text.size();
        return r;
    }
    detail::CountDP dp(sk, toks);
    r.trees = dp.sym_count(sk.start, 0, int(toks.size()));
    if (r.trees >= 2) {
        r.status = ParseResult::Status::Ambiguous;
        return r;
    }
    r.status = ParseResult::Status::Ok;
    r.tree = dp.build(sk.start, 0, int(toks.size()));
    return r;
}

inline ParseResult parse_input(const Sketch& sk, const std::string& input) {
    return parse_tokens(sk, tokenize(sk, input));
}

inline PTree must_parse(const Sketch& sk, const std::string& input) {
    ParseResult r = parse_input(sk, input);
    if (r.status == ParseResult::Status::Ambiguous)
        throw EvalError("ambiguous parse for input: " + input);
    if (r.status != ParseResult::Status::Ok)
        throw EvalError("no parse for input: " + input + " (stuck at byte " +
                        std::to_string(r.furthest_byte) + ")");
    return r.tree;
}

}  // namespace agsynth
