#include <catch2/catch_amalgamated.hpp>

#include "agsynth/evaluator.hpp"
#include "diffcalc_fixture.hpp"

using namespace agsynth;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kPlainCalc = R"gram(# hole-free integer calculator
%start S
%token PLUS "+"
%token STAR "*"
%token num /[0-9]+/ int
S -> E : output(E.val)
E -> E PLUS F : E0.val := add(E1.val, F.val)
E -> F : E.val := F.val
F -> F STAR K : F0.val := mul(F1.val, K.val)
F -> K : F.val := K.val
K -> num : K.val := getVal(num)
)gram";

std::string step_text(const Trace& tr, size_t i) {
    return tr.steps[i].var + " := " + format_trace_expr(*tr.steps[i].rhs);
}

std::vector<std::string> holecall_names(const Trace& tr) {
    std::vector<std::string> out;
    for (const auto& st : tr.steps)
        if (st.rhs->k == TraceExpr::K::Holecall) out.push_back(st.rhs->name);
    return out;
}

}  // namespace

TEST_CASE("trace generation folds constants and names hole calls") {
    Sketch s = load_sketch(kDiffCalc);
    Context ctx{{"x", make_int(2)}};
    Trace tr = gen_trace(s, must_parse(s, "3*x+6"), ctx);

    REQUIRE(tr.steps.size() == 3);
    CHECK(step_text(tr, 0) == "x1 := const Dual(2.0, 1.0)");
    CHECK(step_text(tr, 1) == "a1 := holecall h3(const Dual(3.0, 0.0), x1)");
    CHECK(step_text(tr, 2) == "out := holecall h1(a1, const Dual(6.0, 0.0))");
    CHECK(tr.out == "out");

    std::string why;
    CHECK(check_trace(tr, &why));
    CHECK(trace_holes(tr) == std::set<std::string>{"h1", "h3"});
}

TEST_CASE("trace hole calls appear in schedule order") {
    Sketch s = load_sketch(kDiffCalc);
    Context ctx{{"x", make_int(3)}};
    Trace tr = gen_trace(s, must_parse(s, "x^2-2*x"), ctx);

    CHECK(holecall_names(tr) == std::vector<std::string>{"h4", "h3", "h2"});
    CHECK(check_trace(tr));
}

TEST_CASE("hole-free traces are a single constant") {
    Sketch s = load_sketch(kPlainCalc);
    for (const char* input : {"2+3*4", "7", "2*2*2+1"}) {
        auto t = must_parse(s, input);
        Trace tr = gen_trace(s, t, {});
        CHECK(trace_holes(tr).empty());
        REQUIRE(tr.steps.size() == 1);
        CHECK(tr.steps.back().var == "out");
        REQUIRE(tr.steps.back().rhs->k == TraceExpr::K::Const);

        // trace/concrete agreement is exact for hole-free grammars
        Value direct = eval_concrete(s, t, {});
        CHECK(value_identical(tr.steps.back().rhs->cval, direct));
        CHECK(value_identical(eval_trace(tr, {}, {}), direct));
    }
}

TEST_CASE("concrete evaluation matches hand-computed dual results") {
    Sketch base = load_sketch(kDiffCalc);
    Sketch s = complete(base, diffcalc_reference_bodies(base));

    Value v = eval_concrete(s, must_parse(s, "x^2+4*x+5"), {{"x", make_int(3)}});
    CHECK(value_eq(v, make_dual(26, 10), 1e-9));

    v = eval_concrete(s, must_parse(s, "x^3"), {{"x", make_int(2)}});
    CHECK(value_eq(v, make_dual(8, 12), 1e-9));

    v = eval_concrete(s, must_parse(s, "3-x"), {{"x", make_int(7)}});
    CHECK(value_eq(v, make_dual(-4, -1), 1e-9));
}

TEST_CASE("trace evaluation runs candidate bodies over recorded steps") {
    Sketch s = load_sketch(kDiffCalc);
    auto bodies = diffcalc_reference_bodies(s);
    auto sigs = hole_sigs(s);

    // t1: the 3*x+6 trace under the reference bodies
    Trace t1 = gen_trace(s, must_parse(s, "3*x+6"), {{"x", make_int(2)}});
    CHECK(value_eq(eval_trace(t1, bodies, sigs), make_dual(12, 3), 1e-9));

    // the wrong product rule lands on the correct value for x*x at x=4
    Trace sq = gen_trace(s, must_parse(s, "x*x"), {{"x", make_int(4)}});
    HoleBodies wrong = bodies;
    wrong["h3"] = diffcalc_wrong_h3(s);
    CHECK(value_eq(eval_trace(sq, wrong, sigs), make_dual(16, 8), 1e-9));
    CHECK(value_eq(eval_trace(sq, bodies, sigs), make_dual(16, 8), 1e-9));

    // but not at x=3, where the two rules disagree
    Trace sq3 = gen_trace(s, must_parse(s, "x*x"), {{"x", make_int(3)}});
    CHECK(value_eq(eval_trace(sq3, bodies, sigs), make_dual(9, 6), 1e-9));
    CHECK(value_eq(eval_trace(sq3, wrong, sigs), make_dual(9, 7), 1e-9));
}

TEST_CASE("trace evaluation reports the failing step") {
    Sketch s = load_sketch(kDiffCalc);
    Trace tr = gen_trace(s, must_parse(s, "x*x"), {{"x", make_int(4)}});

    // no binding for h3: the holecall step cannot be evaluated
    try {
        eval_trace(tr, {}, hole_sigs(s));
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("step 2"));
    }

    Value out;
    CHECK_FALSE(try_eval_trace(tr, {}, hole_sigs(s), default_currency_table(), out));
    CHECK(try_eval_trace(tr, diffcalc_reference_bodies(s), hole_sigs(s), default_currency_table(), out));
    CHECK(value_eq(out, make_dual(16, 8), 1e-9));
}

TEST_CASE("completion commutes with trace generation") {
    Sketch s = load_sketch(kDiffCalc);
    auto bodies = diffcalc_reference_bodies(s);
    auto sigs = hole_sigs(s);
    Sketch done = complete(s, bodies);

    const char* inputs[] = {"x",
                            "3",
                            "x+x",
                            "x*x",
                            "2*x+1",
                            "x^2",
                            "sin(x)",
                            "cos(x^2)",
                            "x*cos(x)",
                            "sin(x^2)+3*x",
                            "x^3-2*x^2+x-5",
                            "sin(cos(x))*x^2"};
    Value xs[] = {make_int(3), make_int(-2), make_real(0.5), make_int(7)};

    for (const char* input : inputs) {
        auto t = must_parse(s, input);
        for (const Value& x : xs) {
            Context ctx{{"x", x}};
            Trace tr = gen_trace(s, t, ctx);
            std::string why;
            INFO(input << " with x = " << describe(x) << "; trace:\n" << format_trace(tr));
            REQUIRE(check_trace(tr, &why));
            Value via_trace = eval_trace(tr, bodies, sigs);
            Value direct = eval_concrete(done, t, ctx);
            CHECK(value_eq(via_trace, direct, 1e-6));
        }
    }
}

TEST_CASE("symbolic tag amounts survive trace generation") {
    Sketch s = load_sketch(R"gram(
%start S
%token UNIT /[A-Z]+/ ident
%token num /[0-9]+/ int
%dsl N : int ::= param | lit | add(N, N)
%hole hh (int) -> int in N
S -> UNIT num : output(tag(UNIT, ?hh(getVal(num))))
)gram");
    auto sig = hole_signature(s, *s.find_hole("hh"));
    HoleBodies bodies{{"hh", text::parse_dsl_body(sig, "add(c_1, c_1)", 0)}};

    auto t = must_parse(s, "USD 3");
    Trace tr = gen_trace(s, t, {});
    CHECK(check_trace(tr));
    CHECK(trace_holes(tr) == std::set<std::string>{"hh"});

    Value via_trace = eval_trace(tr, bodies, hole_sigs(s));
    Value direct = eval_concrete(complete(s, bodies), t, {});
    CHECK(value_eq(via_trace, make_tag("USD", 6.0), 1e-9));
    CHECK(value_identical(via_trace, direct));
}

TEST_CASE("inherited attributes schedule left to right") {
    Sketch s = load_sketch(R"gram(
%start S
%token INT "int"
%token CHAR "char"
%token COMMA ","
%token SEMI ";"
%token id /[a-z]+/ ident
S -> D : output(D.end)
D -> INT L SEMI : L.off := 0 ; L.sz := 4 ; D.end := L.end
D -> CHAR L SEMI : L.off := 0 ; L.sz := 1 ; D.end := L.end
L -> L COMMA id : L1.off := L0.off ; L1.sz := L0.sz ; L0.end := add(L1.end, L0.sz)
L -> id : L.end := add(L.off, L.sz)
)gram");

    auto t = must_parse(s, "int a , b ;");
    CHECK(value_identical(eval_concrete(s, t, {}), make_int(8)));
    CHECK(value_identical(eval_concrete(s, must_parse(s, "char a , b , c ;"), {}), make_int(3)));
    CHECK(value_identical(eval_concrete(s, must_parse(s, "int a ;"), {}), make_int(4)));

    // the inner declaration's end is computed before the outer one that
    // consumes it, and the whole schedule is the documented interleaving
    FlatTree ft = flatten(s, t);
    Schedule sched = build_schedule(s, ft);
    std::vector<InstKey> order;
    for (const auto& item : sched.order) order.push_back(item.inst);
    std::vector<InstKey> expect{{3, "off"}, {3, "sz"},  {4, "off"},    {4, "sz"},
                                {4, "end"}, {3, "end"}, {1, "end"},    {0, kOutAttr}};
    CHECK(order == expect);
}

TEST_CASE("scheduling rejects cyclic, missing, and duplicated definitions") {
    Sketch cyc = load_sketch(R"gram(
%start S
%token a "a"
S -> X : output(X.v)
X -> a : X.u := X.w ; X.w := X.u ; X.v := 1
)gram");
    CHECK_THROWS_WITH(eval_concrete(cyc, must_parse(cyc, "a"), {}),
                      ContainsSubstring("circular"));

    Sketch missing = load_sketch(R"gram(
%start S
%token a "a"
S -> X : output(X.v)
X -> a : X.v := X.ghost
)gram");
    CHECK_THROWS_WITH(eval_concrete(missing, must_parse(missing, "a"), {}),
                      ContainsSubstring("missing rule"));

    Sketch dup = load_sketch(R"gram(
%start S
%token a "a"
S -> X : X.v := 1 ; output(X.v)
X -> a : X.v := 2
)gram");
    CHECK_THROWS_WITH(eval_concrete(dup, must_parse(dup, "a"), {}),
                      ContainsSubstring("multiple definitions"));
}

TEST_CASE("trace structure checks catch malformed programs") {
    Trace bad;
    bad.out = "out";
    bad.steps.push_back({"a1", tr_var("ghost")});
    std::string why;
    CHECK_FALSE(check_trace(bad, &why));
    CHECK_THAT(why, ContainsSubstring("ghost"));

    Trace dup;
    dup.out = "out";
    dup.steps.push_back({"out", tr_const(make_int(1))});
    dup.steps.push_back({"out", tr_const(make_int(2))});
    CHECK_FALSE(check_trace(dup, &why));
    CHECK_THAT(why, ContainsSubstring("assigned twice"));

    Trace noout;
    noout.out = "out";
    noout.steps.push_back({"x1", tr_const(make_int(1))});
    CHECK_FALSE(check_trace(noout, &why));
    CHECK_THAT(why, ContainsSubstring("never assigned"));

    Trace ok;
    ok.out = "out";
    ok.steps.push_back({"x1", tr_const(make_int(1))});
    ok.steps.push_back({"out", tr_builtin(Builtin::Add, {tr_var("x1"), tr_const(make_int(2))})});
    CHECK(check_trace(ok, &why));
    CHECK(value_identical(eval_trace(ok, {}, {}), make_int(3)));
}

TEST_CASE("unbound context variables fail cleanly") {
    Sketch s = load_sketch(kDiffCalc);
    auto t = must_parse(s, "x+x");
    CHECK_THROWS_WITH(gen_trace(s, t, {}), ContainsSubstring("unbound variable x"));
    Sketch done = complete(s, diffcalc_reference_bodies(s));
    CHECK_THROWS_WITH(eval_concrete(done, t, {}), ContainsSubstring("unbound variable x"));
}
