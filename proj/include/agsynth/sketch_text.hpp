#pragma once

// Text format for attribute-grammar sketches.
//
//   # comment
//   %start S
//   %token PLUS "+"
//   %token num /[0-9]+/ int
//   %token var /[a-z]+/ ident
//   %dsl C : real ::= param | lit | add(C, C) | mul(C, C) | pow(C, I)
//       | neg(C)
//   %dsl I : int ::= param | lit | sub(I, I)
//   %hole h1 (dual, dual) -> dual in C
//   %def h2 = Dual(sub(a_1, a_2), sub(d_1, d_2))
//   %vars x y
//   %currency USD 1.0
//   S -> E : output(E.val)
//   E -> E PLUS F : E0.val := ?h1(E1.val, F.val)
//
// Occurrences in rules: a bare symbol name when unambiguous, otherwise the
// name with a suffix (0 = head, k = k-th occurrence of that name in the body).
// Lines whose first character is '|' continue the previous %dsl line.

#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grammar.hpp"

namespace agsynth {

namespace text {

inline ValueKind parse_kind(const std::string& s, int line) {
    if (s == "int") return ValueKind::Int;
    if (s == "real") return ValueKind::Real;
    if (s == "bool") return ValueKind::Bool;
    if (s == "dual") return ValueKind::Dual;
    if (s == "tag") return ValueKind::Tag;
    throw EvalError("sketch line " + std::to_string(line) + ": unknown kind '" + s + "'");
}

inline std::string format_kind(ValueKind k) {
    switch (k) {
        case ValueKind::Int: return "int";
        case ValueKind::Real: return "real";
        case ValueKind::Bool: return "bool";
        case ValueKind::Dual: return "dual";
        case ValueKind::Tag: return "tag";
    }
    return "?";
}

// Comment stripping that leaves "..." and /.../ spans alone.
inline std::string strip_comment(const std::string& line) {
    bool in_q = false, in_rx = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if ((in_q || in_rx) && c == '\\') { i++; continue; }
        if (in_q) {
            if (c == '"') in_q = false;
        } else if (in_rx) {
            if (c == '/') in_rx = false;
        } else if (c == '"') {
            in_q = true;
        } else if (c == '/') {
            in_rx = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Tok {
    enum class K { Ident, Num, Punct, Quoted, Regex, End };
    K k = K::End;
    std::string s;
};

// Tokenizer shared by directive and rule parsing.
struct Lexer {
    std::string src;
    size_t pos = 0;
    int line = 0;
    Tok cur;

    Lexer(std::string s, int ln) : src(std::move(s)), line(ln) { advance(); }

    [[noreturn]] void fail(const std::string& msg) const {
        throw EvalError("sketch line " + std::to_string(line) + ": " + msg);
    }

    void advance() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) pos++;
        cur = Tok{};
        if (pos >= src.size()) { cur.k = Tok::K::End; return; }
        char c = src[pos];
        if (c == '"' || c == '/') {
            char delim = c;
            std::string out;
            pos++;
            while (pos < src.size() && src[pos] != delim) {
                if (src[pos] == '\\' && pos + 1 < src.size()) {
                    // keep regex escapes verbatim, unescape only \" and \\ in quotes
                    if (delim == '"' && (src[pos + 1] == '"' || src[pos + 1] == '\\')) {
                        out += src[pos + 1];
                        pos += 2;
                        continue;
                    }
                    out += src[pos];
                    out += src[pos + 1];
                    pos += 2;
                    continue;
                }
                out += src[pos++];
            }
            if (pos >= src.size()) fail(std::string("unterminated ") + (delim == '"' ? "literal" : "regex"));
            pos++;
            cur.k = delim == '"' ? Tok::K::Quoted : Tok::K::Regex;
            cur.s = out;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t b = pos;
            while (pos < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
                pos++;
            cur.k = Tok::K::Ident;
            cur.s = src.substr(b, pos - b);
            return;
        }
        bool neg_num = c == '-' && pos + 1 < src.size() &&
                       (std::isdigit(static_cast<unsigned char>(src[pos + 1])) || src[pos + 1] == '.');
        if (std::isdigit(static_cast<unsigned char>(c)) || neg_num) {
            size_t b = pos;
            if (c == '-') pos++;
            bool dot = false;
            while (pos < src.size() &&
                   (std::isdigit(static_cast<unsigned char>(src[pos])) || (!dot && src[pos] == '.'))) {
                if (src[pos] == '.') dot = true;
                pos++;
            }
            cur.k = Tok::K::Num;
            cur.s = src.substr(b, pos - b);
            return;
        }
        // multi-char punctuation first
        static const char* two[] = {":=", "->", "::"};
        for (const char* t : two) {
            if (src.compare(pos, 2, t) == 0) {
                // "::=" is three chars; grab the '=' too
                if (src.compare(pos, 3, "::=") == 0) {
                    cur.k = Tok::K::Punct;
                    cur.s = "::=";
                    pos += 3;
                    return;
                }
                cur.k = Tok::K::Punct;
                cur.s = t;
                pos += 2;
                return;
            }
        }
        cur.k = Tok::K::Punct;
        cur.s = std::string(1, c);
        pos++;
        return;
    }

    bool at(Tok::K k, const std::string& s = "") const {
        return cur.k == k && (s.empty() || cur.s == s);
    }
    std::string expect(Tok::K k, const std::string& what) {
        if (cur.k != k) fail("expected " + what + ", got '" + cur.s + "'");
        std::string s = cur.s;
        advance();
        return s;
    }
    void expect_punct(const std::string& p) {
        if (!at(Tok::K::Punct, p)) fail("expected '" + p + "', got '" + cur.s + "'");
        advance();
    }
    bool eat_punct(const std::string& p) {
        if (at(Tok::K::Punct, p)) { advance(); return true; }
        return false;
    }
};

inline Value parse_number(const std::string& s) {
    if (s.find('.') != std::string::npos) return make_real(std::stod(s));
    return make_int(std::stoll(s));
}

// Occurrence resolution within one production. Returns 0 for head, else the
// absolute 1-based body position.
inline int resolve_occ(const Sketch& sk, const Production& p, const std::string& name, Lexer& lx) {
    auto matches = [&](const std::string& base) {
        std::vector<int> cand;
        if (sk.symbols[p.head].name == base) cand.push_back(0);
        for (size_t i = 0; i < p.body.size(); ++i)
            if (sk.symbols[p.body[i]].name == base) cand.push_back(int(i) + 1);
        return cand;
    };
    // exact name first (a symbol may itself end in digits)
    if (sk.symbol_of(name) >= 0) {
        auto cand = matches(name);
        if (cand.size() == 1) return cand[0];
        if (cand.size() > 1)
            lx.fail("ambiguous occurrence '" + name + "'; add a suffix (0 = head)");
        lx.fail("symbol '" + name + "' does not occur in this production");
    }
    size_t cut = name.size();
    while (cut > 0 && std::isdigit(static_cast<unsigned char>(name[cut - 1]))) cut--;
    if (cut == 0 || cut == name.size())
        lx.fail("unknown occurrence '" + name + "'");
    std::string base = name.substr(0, cut);
    int k = std::stoi(name.substr(cut));
    if (sk.symbol_of(base) < 0) lx.fail("unknown symbol '" + base + "' in occurrence '" + name + "'");
    if (k == 0) {
        if (sk.symbols[p.head].name != base)
            lx.fail("occurrence '" + name + "': head is " + sk.symbols[p.head].name);
        return 0;
    }
    int seen = 0;
    for (size_t i = 0; i < p.body.size(); ++i) {
        if (sk.symbols[p.body[i]].name == base && ++seen == k) return int(i) + 1;
    }
    lx.fail("occurrence '" + name + "' out of range");
}

inline ActionExprPtr parse_action(const Sketch& sk, const Production& p, Lexer& lx);

inline std::vector<ActionExprPtr> parse_action_args(const Sketch& sk, const Production& p, Lexer& lx) {
    std::vector<ActionExprPtr> args;
    lx.expect_punct("(");
    if (!lx.eat_punct(")")) {
        do {
            args.push_back(parse_action(sk, p, lx));
        } while (lx.eat_punct(","));
        lx.expect_punct(")");
    }
    return args;
}

inline ActionExprPtr parse_action(const Sketch& sk, const Production& p, Lexer& lx) {
    if (lx.at(Tok::K::Num)) {
        Value v = parse_number(lx.cur.s);
        lx.advance();
        return ae_const(v);
    }
    if (lx.at(Tok::K::Punct, "?")) {
        lx.advance();
        std::string name = lx.expect(Tok::K::Ident, "hole name");
        return ae_hole(name, parse_action_args(sk, p, lx));
    }
    std::string name = lx.expect(Tok::K::Ident, "expression");
    if (name == "true") return ae_const(make_bool(true));
    if (name == "false") return ae_const(make_bool(false));
    if (name == "getVal" || name == "lookUp") {
        lx.expect_punct("(");
        std::string occ_name = lx.expect(Tok::K::Ident, "terminal occurrence");
        int occ = resolve_occ(sk, p, occ_name, lx);
        if (occ == 0) lx.fail(name + " cannot reference the head");
        lx.expect_punct(")");
        return name == "getVal" ? ae_getval(occ) : ae_lookup(occ);
    }
    if (name == "tag") {
        lx.expect_punct("(");
        std::string occ_name = lx.expect(Tok::K::Ident, "terminal occurrence");
        int occ = resolve_occ(sk, p, occ_name, lx);
        if (occ == 0) lx.fail("tag cannot reference the head");
        lx.expect_punct(",");
        auto amount = parse_action(sk, p, lx);
        lx.expect_punct(")");
        return ae_tag(occ, amount);
    }
    if (lx.at(Tok::K::Punct, "(")) {
        auto op = lookup_builtin(name);
        if (!op) lx.fail("unknown function '" + name + "'");
        return ae_call(*op, parse_action_args(sk, p, lx));
    }
    // attribute reference: OCC.attr
    int occ = resolve_occ(sk, p, name, lx);
    lx.expect_punct(".");
    std::string attr = lx.expect(Tok::K::Ident, "attribute name");
    return ae_attr(occ, attr);
}

// DSL body text for %def lines; names resolve against the hole's signature.
inline DslExprPtr parse_dsl_expr(const HoleSignature& sig, Lexer& lx) {
    if (lx.at(Tok::K::Num)) {
        Value v = parse_number(lx.cur.s);
        lx.advance();
        return dsl_const(v);
    }
    std::string name = lx.expect(Tok::K::Ident, "DSL expression");
    if (name == "true") return dsl_const(make_bool(true));
    if (name == "false") return dsl_const(make_bool(false));
    if (name == "real" && lx.at(Tok::K::Punct, "(")) {
        lx.advance();
        std::string pname = lx.expect(Tok::K::Ident, "parameter name");
        lx.expect_punct(")");
        int slot = sig_slot(sig, pname);
        if (slot < 0) lx.fail("unknown parameter '" + pname + "'");
        if (sig.env_kinds[slot] != ValueKind::Int) lx.fail("real() lifts int parameters only");
        return dsl_param(slot, pname, true);
    }
    if (lx.at(Tok::K::Punct, "(")) {
        auto op = lookup_builtin(name);
        if (!op) lx.fail("unknown DSL function '" + name + "'");
        std::vector<DslExprPtr> kids;
        lx.advance();
        if (!lx.eat_punct(")")) {
            do {
                kids.push_back(parse_dsl_expr(sig, lx));
            } while (lx.eat_punct(","));
            lx.expect_punct(")");
        }
        return dsl_app(*op, std::move(kids));
    }
    int slot = sig_slot(sig, name);
    if (slot < 0) lx.fail("unknown parameter '" + name + "'");
    return dsl_param(slot, name);
}

inline DslExprPtr parse_dsl_body(const HoleSignature& sig, const std::string& src, int line) {
    Lexer lx(src, line);
    auto e = parse_dsl_expr(sig, lx);
    if (!lx.at(Tok::K::End)) lx.fail("trailing text after DSL expression");
    return e;
}

}  // namespace text

inline Sketch load_sketch(const std::string& source) {
    using namespace text;

    // logical lines: strip comments, fold '|' continuations into %dsl lines
    struct Line { int no; std::string s; };
    std::vector<Line> lines;
    {
        std::istringstream in(source);
        std::string raw;
        int no = 0;
        while (std::getline(in, raw)) {
            no++;
            std::string s = trim(strip_comment(raw));
            if (s.empty()) continue;
            if (s[0] == '|') {
                if (lines.empty())
                    throw EvalError("sketch line " + std::to_string(no) + ": continuation without a previous line");
                lines.back().s += " " + s;
            } else {
                lines.push_back({no, s});
            }
        }
    }

    Sketch sk;
    sk.dsl.nts.clear();
    std::string start_name;
    bool currency_seen = false;
    struct DefLine { int no; std::string hole; std::string body; };
    std::vector<DefLine> defs;
    struct ProdLine { int no; std::string s; };
    std::vector<ProdLine> prod_lines;

    // pass 1: directives in order; production lines deferred until all
    // symbols, holes, and DSL nonterminals are known
    for (const auto& ln : lines) {
        Lexer lx(ln.s, ln.no);
        if (lx.at(Tok::K::Punct, "%")) {
            lx.advance();
            std::string dir = lx.expect(Tok::K::Ident, "directive");
            if (dir == "start") {
                start_name = lx.expect(Tok::K::Ident, "start symbol");
            } else if (dir == "token") {
                Symbol sym;
                sym.terminal = true;
                sym.name = lx.expect(Tok::K::Ident, "token name");
                if (lx.at(Tok::K::Quoted)) {
                    sym.pattern = lx.cur.s;
                    sym.is_regex = false;
                    lx.advance();
                } else if (lx.at(Tok::K::Regex)) {
                    sym.pattern = lx.cur.s;
                    sym.is_regex = true;
                    lx.advance();
                } else {
                    lx.fail("token needs a \"literal\" or /regex/ pattern");
                }
                if (lx.at(Tok::K::Ident)) {
                    std::string k = lx.expect(Tok::K::Ident, "lex kind");
                    if (k == "int") sym.lex = LexKind::IntLex;
                    else if (k == "ident") sym.lex = LexKind::IdentLex;
                    else lx.fail("lex kind must be 'int' or 'ident'");
                }
                if (sk.symbol_of(sym.name) >= 0) lx.fail("duplicate token " + sym.name);
                sk.intern_symbol(sym);
            } else if (dir == "dsl") {
                DslNt nt;
                nt.name = lx.expect(Tok::K::Ident, "DSL nonterminal");
                nt.kind = ValueKind::Real;
                if (lx.eat_punct(":"))
                    nt.kind = parse_kind(lx.expect(Tok::K::Ident, "kind"), ln.no);
                lx.expect_punct("::=");
                do {
                    DslAlt alt;
                    if (lx.at(Tok::K::Num)) {
                        if (lx.cur.s.find('.') != std::string::npos) lx.fail("DSL constants are integers");
                        alt.k = DslAlt::K::ConstInt;
                        alt.n = std::stoll(lx.cur.s);
                        lx.advance();
                    } else {
                        std::string aname = lx.expect(Tok::K::Ident, "alternative");
                        if (aname == "param" ) {
                            alt.k = DslAlt::K::ParamLeaf;
                        } else if (aname == "lit") {
                            alt.k = DslAlt::K::LitLeaf;
                        } else if (aname == "true" || aname == "false") {
                            alt.k = DslAlt::K::ConstBool;
                            alt.bval = aname == "true";
                        } else {
                            auto op = lookup_builtin(aname);
                            if (!op) lx.fail("unknown DSL operator '" + aname + "'");
                            alt.k = DslAlt::K::App;
                            alt.op = *op;
                            lx.expect_punct("(");
                            do {
                                alt.children.push_back(lx.expect(Tok::K::Ident, "child nonterminal"));
                            } while (lx.eat_punct(","));
                            lx.expect_punct(")");
                        }
                    }
                    nt.alts.push_back(std::move(alt));
                } while (lx.eat_punct("|"));
                if (!lx.at(Tok::K::End)) lx.fail("trailing text in %dsl");
                sk.dsl.nts.push_back(std::move(nt));
            } else if (dir == "hole") {
                HoleDecl h;
                h.name = lx.expect(Tok::K::Ident, "hole name");
                lx.expect_punct("(");
                if (!lx.eat_punct(")")) {
                    do {
                        h.params.push_back(parse_kind(lx.expect(Tok::K::Ident, "kind"), ln.no));
                    } while (lx.eat_punct(","));
                    lx.expect_punct(")");
                }
                lx.expect_punct("->");
                h.ret = parse_kind(lx.expect(Tok::K::Ident, "return kind"), ln.no);
                std::string kw = lx.expect(Tok::K::Ident, "'in'");
                if (kw != "in") lx.fail("expected 'in <dsl-entry>'");
                h.dsl_entry = lx.expect(Tok::K::Ident, "DSL entry");
                sk.holes.push_back(std::move(h));
            } else if (dir == "def") {
                std::string hole = lx.expect(Tok::K::Ident, "hole name");
                size_t eq = ln.s.find('=', ln.s.find(hole));
                if (eq == std::string::npos) lx.fail("%def needs '='");
                defs.push_back({ln.no, hole, trim(ln.s.substr(eq + 1))});
            } else if (dir == "vars") {
                sk.var_pool.clear();
                while (lx.at(Tok::K::Ident)) {
                    sk.var_pool.push_back(lx.cur.s);
                    lx.advance();
                }
                if (sk.var_pool.empty()) lx.fail("%vars needs at least one name");
            } else if (dir == "currency") {
                if (!currency_seen) { sk.rates.clear(); currency_seen = true; }
                std::string label = lx.expect(Tok::K::Ident, "currency label");
                std::string rate = lx.expect(Tok::K::Num, "rate");
                sk.rates[label] = std::stod(rate);
            } else {
                lx.fail("unknown directive %" + dir);
            }
        } else {
            prod_lines.push_back({ln.no, ln.s});
        }
    }

    // pass 2: productions (intern nonterminals on first sight)
    for (const auto& pl : prod_lines) {
        Lexer lx(pl.s, pl.no);
        Production p;
        p.id = int(sk.prods.size()) + 1;
        std::string head = lx.expect(Tok::K::Ident, "production head");
        {
            Symbol s;
            s.name = head;
            int idx = sk.intern_symbol(s);
            if (sk.symbols[idx].terminal) lx.fail("head " + head + " is a token");
            p.head = idx;
        }
        lx.expect_punct("->");
        while (lx.at(Tok::K::Ident)) {
            Symbol s;
            s.name = lx.cur.s;
            p.body.push_back(sk.intern_symbol(s));
            lx.advance();
        }
        if (!lx.at(Tok::K::End)) {
            lx.expect_punct(":");
            while (!lx.at(Tok::K::End)) {
                SemanticRule r;
                if (lx.at(Tok::K::Ident, "output")) {
                    // lookahead: output( is the output rule, output.attr an occurrence
                    size_t save = lx.pos;
                    Tok tok = lx.cur;
                    lx.advance();
                    if (lx.at(Tok::K::Punct, "(")) {
                        lx.advance();
                        r.is_output = true;
                        r.rhs = parse_action(sk, p, lx);
                        lx.expect_punct(")");
                    } else {
                        lx.pos = save;
                        lx.cur = tok;
                    }
                }
                if (!r.is_output) {
                    std::string tname = lx.expect(Tok::K::Ident, "rule target");
                    r.target.occ = resolve_occ(sk, p, tname, lx);
                    lx.expect_punct(".");
                    r.target.attr = lx.expect(Tok::K::Ident, "attribute name");
                    lx.expect_punct(":=");
                    r.rhs = parse_action(sk, p, lx);
                }
                p.rules.push_back(std::move(r));
                if (!lx.eat_punct(";")) break;
            }
            if (!lx.at(Tok::K::End)) lx.fail("trailing text after rules");
        }
        sk.prods.push_back(std::move(p));
    }

    if (start_name.empty()) throw EvalError("sketch: missing %start");
    sk.start = sk.symbol_of(start_name);
    if (sk.start < 0) throw EvalError("sketch: start symbol " + start_name + " never appears");

    // literal pool: integers and reals written in semantic rules join the
    // default pool so hole bodies can mention the sketch's own constants
    for (const auto& p : sk.prods)
        for (const auto& r : p.rules)
            walk_action(r.rhs, [&](const ActionExpr& e) {
                if (e.k != ActionExpr::K::Const) return;
                if (e.cval.kind == ValueKind::Int)
                    pool_add(sk.dsl, e.cval.i);
                else if (e.cval.kind == ValueKind::Real && e.cval.a == static_cast<long long>(e.cval.a))
                    pool_add(sk.dsl, static_cast<long long>(e.cval.a));
            });

    for (const auto& d : defs) {
        const HoleDecl* decl = sk.find_hole(d.hole);
        if (!decl)
            throw EvalError("sketch line " + std::to_string(d.no) + ": %def for undeclared hole " + d.hole);
        auto sig = hole_signature(sk, *decl);
        sk.defs[d.hole] = text::parse_dsl_body(sig, d.body, d.no);
    }

    ensure_valid(sk);
    return sk;
}

// ---------------------------------------------------------------------------
// Formatting (the inverse of load_sketch, up to whitespace).

namespace text {

inline std::string occ_name(const Sketch& sk, const Production& p, int occ) {
    const std::string& base = occ == 0 ? sk.symbols[p.head].name : sk.symbols[p.body[occ - 1]].name;
    int in_body = 0;
    for (int b : p.body)
        if (sk.symbols[b].name == base) in_body++;
    bool head_match = sk.symbols[p.head].name == base;
    int candidates = in_body + (head_match ? 1 : 0);
    if (candidates <= 1) return base;
    if (occ == 0) return base + "0";
    int k = 0;
    for (int i = 0; i < occ; ++i)
        if (sk.symbols[p.body[i]].name == base) k++;
    return base + std::to_string(k);
}

inline std::string format_action(const Sketch& sk, const Production& p, const ActionExprPtr& e) {
    switch (e->k) {
        case ActionExpr::K::Const: return describe(e->cval);
        case ActionExpr::K::Attr: return occ_name(sk, p, e->aref.occ) + "." + e->aref.attr;
        case ActionExpr::K::GetVal: return "getVal(" + occ_name(sk, p, e->occ) + ")";
        case ActionExpr::K::LookUp: return "lookUp(" + occ_name(sk, p, e->occ) + ")";
        case ActionExpr::K::TagMake:
            return "tag(" + occ_name(sk, p, e->occ) + ", " + format_action(sk, p, e->args[0]) + ")";
        case ActionExpr::K::Call:
        case ActionExpr::K::Hole: {
            std::string s = e->k == ActionExpr::K::Hole ? "?" + e->hole : builtin_name(e->op);
            s += "(";
            for (size_t i = 0; i < e->args.size(); ++i) {
                if (i) s += ", ";
                s += format_action(sk, p, e->args[i]);
            }
            return s + ")";
        }
    }
    return "?";
}

inline std::string quote_literal(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string format_dsl_alt(const DslAlt& a) {
    switch (a.k) {
        case DslAlt::K::ConstInt: return std::to_string(a.n);
        case DslAlt::K::ConstBool: return a.bval ? "true" : "false";
        case DslAlt::K::ParamLeaf: return "param";
        case DslAlt::K::LitLeaf: return "lit";
        case DslAlt::K::App: {
            std::string s = builtin_name(a.op);
            s += "(";
            for (size_t i = 0; i < a.children.size(); ++i) {
                if (i) s += ", ";
                s += a.children[i];
            }
            return s + ")";
        }
    }
    return "?";
}

}  // namespace text

inline std::string format_sketch(const Sketch& sk) {
    using namespace text;
    std::ostringstream out;
    out << "%start " << sk.symbols[sk.start].name << "\n";
    for (const auto& s : sk.symbols) {
        if (!s.terminal) continue;
        out << "%token " << s.name << " ";
        if (s.is_regex) out << "/" << s.pattern << "/";
        else out << quote_literal(s.pattern);
        if (s.lex == LexKind::IntLex) out << " int";
        if (s.lex == LexKind::IdentLex) out << " ident";
        out << "\n";
    }
    for (const auto& nt : sk.dsl.nts) {
        out << "%dsl " << nt.name << " : " << format_kind(nt.kind) << " ::= ";
        for (size_t i = 0; i < nt.alts.size(); ++i) {
            if (i) out << " | ";
            out << format_dsl_alt(nt.alts[i]);
        }
        out << "\n";
    }
    for (const auto& h : sk.holes) {
        out << "%hole " << h.name << " (";
        for (size_t i = 0; i < h.params.size(); ++i) {
            if (i) out << ", ";
            out << format_kind(h.params[i]);
        }
        out << ") -> " << format_kind(h.ret) << " in " << h.dsl_entry << "\n";
    }
    for (const auto& [name, body] : sk.defs)
        out << "%def " << name << " = " << print_dsl(*body) << "\n";
    if (sk.var_pool != std::vector<std::string>{"x"}) {
        out << "%vars";
        for (const auto& v : sk.var_pool) out << " " << v;
        out << "\n";
    }
    if (sk.rates != default_currency_table())
        for (const auto& [label, rate] : sk.rates)
            out << "%currency " << label << " " << fmt_real(rate) << "\n";
    for (const auto& p : sk.prods) {
        out << sk.symbols[p.head].name << " ->";
        for (int b : p.body) out << " " << sk.symbols[b].name;
        if (!p.rules.empty()) {
            out << " :";
            for (size_t i = 0; i < p.rules.size(); ++i) {
                out << (i ? " ; " : " ");
                const auto& r = p.rules[i];
                if (r.is_output) {
                    out << "output(" << format_action(sk, p, r.rhs) << ")";
                } else {
                    out << occ_name(sk, p, r.target.occ) << "." << r.target.attr << " := "
                        << format_action(sk, p, r.rhs);
                }
            }
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace agsynth
