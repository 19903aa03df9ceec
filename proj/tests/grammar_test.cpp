#include <catch2/catch_amalgamated.hpp>

#include "agsynth/sketch_text.hpp"
#include "diffcalc_fixture.hpp"

using namespace agsynth;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("loading the differentiating calculator sketch") {
    Sketch s = load_sketch(kDiffCalc);

    REQUIRE(s.prods.size() == 11);
    REQUIRE(s.symbols[s.start].name == "S");
    REQUIRE(s.holes.size() == 6);
    REQUIRE(s.defs.empty());
    REQUIRE(s.var_pool == std::vector<std::string>{"x"});

    // production ids are 1-based in declaration order
    for (size_t i = 0; i < s.prods.size(); ++i) REQUIRE(s.prods[i].id == int(i) + 1);

    // prod 2: E -> E PLUS F with a single hole rule targeting the head
    const Production& p2 = s.prods[1];
    REQUIRE(s.symbols[p2.head].name == "E");
    REQUIRE(p2.body.size() == 3);
    REQUIRE(s.symbols[p2.body[1]].name == "PLUS");
    REQUIRE(p2.rules.size() == 1);
    REQUIRE_FALSE(p2.rules[0].is_output);
    REQUIRE(p2.rules[0].target == AttrRef{0, "val"});
    REQUIRE(p2.rules[0].rhs->k == ActionExpr::K::Hole);
    REQUIRE(p2.rules[0].rhs->hole == "h1");
    REQUIRE(p2.rules[0].rhs->args.size() == 2);
    REQUIRE(p2.rules[0].rhs->args[0]->aref == AttrRef{1, "val"});
    REQUIRE(p2.rules[0].rhs->args[1]->aref == AttrRef{3, "val"});
    REQUIRE(holes_called_in(p2) == std::set<std::string>{"h1"});

    // prod 7: exponent read through getVal on the num occurrence
    const Production& p7 = s.prods[6];
    REQUIRE(p7.rules[0].rhs->hole == "h4");
    REQUIRE(p7.rules[0].rhs->args[1]->k == ActionExpr::K::GetVal);
    REQUIRE(p7.rules[0].rhs->args[1]->occ == 3);

    // prod 10/11: dual constants built from terminal lexemes
    const Production& p10 = s.prods[9];
    REQUIRE(p10.rules[0].rhs->k == ActionExpr::K::Call);
    REQUIRE(p10.rules[0].rhs->op == Builtin::MkDual);
    REQUIRE(p10.rules[0].rhs->args[0]->k == ActionExpr::K::GetVal);
    REQUIRE(p10.rules[0].rhs->args[1]->cval.kind == ValueKind::Real);

    // output rule only on the start production
    REQUIRE(s.prods[0].rules.size() == 1);
    REQUIRE(s.prods[0].rules[0].is_output);

    REQUIRE(sketchy_prods(s) == std::vector<int>{2, 3, 5, 7, 8, 9});
    REQUIRE(unbound_holes(s).size() == 6);

    // terminals keep declaration order (matters for lexing tie-breaks)
    REQUIRE(s.symbols[0].name == "PLUS");
    REQUIRE(s.symbols[8].name == "num");
    REQUIRE(s.symbols[8].lex == LexKind::IntLex);
    REQUIRE(s.symbols[9].name == "var");
    REQUIRE(s.symbols[9].lex == LexKind::IdentLex);

    // the DSL carries both nonterminals and the sketch literals joined the pool
    REQUIRE(s.dsl.nts.size() == 2);
    REQUIRE(s.dsl.nts[0].kind == ValueKind::Real);
    REQUIRE(s.dsl.nts[1].kind == ValueKind::Int);
    REQUIRE(s.dsl.lit_pool == std::vector<long long>{-1, 0, 1, 2});
}

TEST_CASE("hole binding, completion, and sketchiness") {
    Sketch s = load_sketch(kDiffCalc);
    auto bodies = diffcalc_reference_bodies(s);

    std::map<std::string, DslExprPtr> partial{{"h3", bodies["h3"]}};
    Sketch sb = bind_holes(s, partial);
    REQUIRE(sb.defs.size() == 1);
    REQUIRE(sketchy_prods(sb) == std::vector<int>{2, 3, 7, 8, 9});
    REQUIRE(unbound_holes(sb) == std::set<std::string>{"h1", "h2", "h4", "h5", "h6"});

    REQUIRE_THROWS_AS(complete(s, partial), EvalError);
    Sketch sc = complete(s, bodies);
    REQUIRE(sketchy_prods(sc).empty());
    REQUIRE(unbound_holes(sc).empty());
    REQUIRE_NOTHROW(ensure_valid(sc));

    // rebinding replaces the old body
    Sketch sr = bind_holes(sc, {{"h3", bodies["h1"]}});
    REQUIRE(dsl_equal(*sr.defs["h3"], *bodies["h1"]));
}

TEST_CASE("signatures derive from hole declarations") {
    Sketch s = load_sketch(kDiffCalc);
    auto sig = hole_signature(s, *s.find_hole("h4"));
    REQUIRE(sig.env_names == std::vector<std::string>{"a_1", "d_1", "c_2"});
    REQUIRE(sig.ret == ValueKind::Dual);
    REQUIRE(sig.entry == "C");
    auto sig1 = hole_signature(s, *s.find_hole("h5"));
    REQUIRE(sig1.env_names == std::vector<std::string>{"a_1", "d_1"});
}

TEST_CASE("sketch text round-trips through format and reload") {
    Sketch s = complete(load_sketch(kDiffCalc), diffcalc_reference_bodies(load_sketch(kDiffCalc)));
    std::string once = format_sketch(s);
    Sketch s2 = load_sketch(once);
    std::string twice = format_sketch(s2);
    REQUIRE(once == twice);

    // bound bodies survive the trip structurally
    for (const auto& [name, body] : s.defs) REQUIRE(dsl_equal(*body, *s2.defs.at(name)));
    REQUIRE(s2.prods.size() == s.prods.size());
    REQUIRE(sketchy_prods(s2).empty());
}

TEST_CASE("occurrence resolution accepts bare names only when unambiguous") {
    const char* ambiguous = R"(
%start E
%token PLUS "+"
%token num /[0-9]+/ int
E -> E PLUS E : E.val := getVal(num)
)";
    REQUIRE_THROWS_WITH(load_sketch(ambiguous), ContainsSubstring("ambiguous"));

    const char* suffixed = R"(
%start S
%token PLUS "+"
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> E PLUS E : E0.val := add(E1.val, E2.val)
E -> num : E.val := getVal(num)
)";
    Sketch s = load_sketch(suffixed);
    const auto& r = s.prods[1].rules[0];
    REQUIRE(r.target.occ == 0);
    REQUIRE(r.rhs->args[0]->aref.occ == 1);
    REQUIRE(r.rhs->args[1]->aref.occ == 3);

    const char* out_of_range = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : E.val := getVal(num2)
)";
    REQUIRE_THROWS_WITH(load_sketch(out_of_range), ContainsSubstring("out of range"));
}

TEST_CASE("validation rejects malformed sketches") {
    SECTION("undeclared hole") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : E.val := ?mystery(getVal(num))
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("undeclared hole"));
    }
    SECTION("getVal needs an int lexeme") {
        const char* t = R"(
%start S
%token var /[a-z]+/ ident
S -> E : output(E.val)
E -> var : E.val := getVal(var)
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("getVal"));
    }
    SECTION("lookUp needs an ident lexeme") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : E.val := lookUp(num)
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("lookUp"));
    }
    SECTION("duplicate rule target") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : E.val := getVal(num) ; E.val := getVal(num)
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("duplicate rule"));
    }
    SECTION("output rules belong to start-headed productions") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : output(getVal(num))
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("output rules"));
    }
    SECTION("start-headed productions need an output rule") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E
E -> num : E.val := getVal(num)
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("exactly one output rule"));
    }
    SECTION("builtin arity is checked") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : E.val := add(getVal(num))
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("expects 2 args"));
    }
    SECTION("hole arity is checked") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
%dsl C : int ::= param | lit
%hole h (int, int) -> int in C
S -> E : output(E.val)
E -> num : E.val := ?h(getVal(num))
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("expects 2 args"));
    }
    SECTION("hole DSL entry must exist") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
%hole h (int) -> int in Nowhere
S -> E : output(E.val)
E -> num : E.val := ?h(getVal(num))
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("unknown DSL entry"));
    }
    SECTION("attributes cannot sit on terminals") {
        const char* t = R"(
%start S
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> num : E.val := num.val
)";
        REQUIRE_THROWS_WITH(load_sketch(t), ContainsSubstring("getVal/lookUp"));
    }
}

TEST_CASE("vars, currency, and literal pool directives") {
    const char* t = R"(
%start S
%token cur /[A-Z][A-Z][A-Z]/ ident
%token num /[0-9]+/ int
%vars x y z
%currency USD 1.0
%currency EUR 1.16
%currency GBP 1.31
S -> E : output(E.val)
E -> cur num : E.val := tag(cur, mul(getVal(num), 7))
)";
    Sketch s = load_sketch(t);
    REQUIRE(s.var_pool == std::vector<std::string>{"x", "y", "z"});
    REQUIRE(s.rates.size() == 3);
    REQUIRE(s.rates.at("GBP") == 1.31);
    REQUIRE(s.rates.at("USD") == 1.0);

    // the literal 7 joined the default pool
    REQUIRE(s.dsl.lit_pool == std::vector<long long>{-1, 0, 1, 2, 7});

    // tag expression parsed with the right occurrence
    const auto& rhs = s.prods[1].rules[0].rhs;
    REQUIRE(rhs->k == ActionExpr::K::TagMake);
    REQUIRE(rhs->occ == 1);
    REQUIRE(rhs->args[0]->k == ActionExpr::K::Call);

    // round-trip keeps the replaced currency table and var pool
    Sketch s2 = load_sketch(format_sketch(s));
    REQUIRE(s2.rates == s.rates);
    REQUIRE(s2.var_pool == s.var_pool);
    REQUIRE(s2.dsl.lit_pool == s.dsl.lit_pool);
}

TEST_CASE("comments and quoting interact safely") {
    const char* t = "%start S  # trailing comment\n"
                    "%token hash \"#\"  # a literal hash token\n"
                    "%token re /[a#b]+/ ident  # hash inside a regex\n"
                    "S -> hash re : output(lookUp(re))  # done\n";
    Sketch s = load_sketch(t);
    REQUIRE(s.symbols[0].pattern == "#");
    REQUIRE(s.symbols[1].pattern == "[a#b]+");
    REQUIRE(s.prods.size() == 1);
}

TEST_CASE("def bodies parse against the hole signature") {
    Sketch s = load_sketch(kDiffCalc);
    std::string text(kDiffCalc);
    text += "%def h4 = Dual(pow(a_1, c_2), mul(mul(real(c_2), d_1), pow(a_1, sub(c_2, 1))))\n";
    Sketch sd = load_sketch(text);
    REQUIRE(sd.defs.size() == 1);
    const DslExpr& body = *sd.defs.at("h4");
    REQUIRE(body.k == DslExpr::K::App);
    REQUIRE(body.op == Builtin::MkDual);
    // the lifted exponent parameter round-trips through real(...)
    REQUIRE(print_dsl(body) ==
            "Dual(pow(a_1, c_2), mul(mul(real(c_2), d_1), pow(a_1, sub(c_2, 1))))");

    Value out;
    auto sig = hole_signature(sd, *sd.find_hole("h4"));
    REQUIRE(try_apply_body(sig, body, {make_dual(2, 1), make_int(3)}, out));
    REQUIRE(value_identical(out, make_dual(8, 12)));

    // unknown parameter names are rejected
    std::string bad(kDiffCalc);
    bad += "%def h5 = Dual(q_9, d_1)\n";
    REQUIRE_THROWS_WITH(load_sketch(bad), ContainsSubstring("unknown parameter"));

    // defs for undeclared holes are rejected
    std::string ghost(kDiffCalc);
    ghost += "%def nosuch = Dual(a_1, d_1)\n";
    REQUIRE_THROWS_WITH(load_sketch(ghost), ContainsSubstring("undeclared hole"));
}

TEST_CASE("reference bodies compute the worked examples") {
    Sketch s = load_sketch(kDiffCalc);
    auto bodies = diffcalc_reference_bodies(s);
    auto sig2 = hole_signature(s, *s.find_hole("h1"));
    auto sig1 = hole_signature(s, *s.find_hole("h5"));

    Value out;
    REQUIRE(try_apply_body(sig2, *bodies["h3"], {make_dual(4, 1), make_dual(4, 1)}, out));
    REQUIRE(value_identical(out, make_dual(16, 8)));
    REQUIRE(try_apply_body(sig2, *bodies["h1"], {make_dual(3, 1), make_dual(6, 0)}, out));
    REQUIRE(value_identical(out, make_dual(9, 1)));
    REQUIRE(try_apply_body(sig1, *bodies["h5"], {make_dual(2, 1)}, out));
    REQUIRE(value_eq(out, make_dual(std::sin(2.0), std::cos(2.0)), 1e-12));
    REQUIRE(try_apply_body(sig1, *bodies["h6"], {make_dual(2, 1)}, out));
    REQUIRE(value_eq(out, make_dual(std::cos(2.0), -std::sin(2.0)), 1e-12));
}
