#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <string>
#include <vector>

#include "agsynth/examplegen.hpp"
#include "diffcalc_fixture.hpp"

using namespace agsynth;
using Catch::Matchers::ContainsSubstring;

namespace {

// Intended-semantics oracle for the calculator fixture: evaluate under the
// reference rule bodies.
Oracle reference_oracle(const Sketch& s) {
    Sketch done = complete(s, diffcalc_reference_bodies(s));
    return make_function_oracle("builtin:test-reference",
                                [done](const std::string& input, const Context& ctx) {
                                    return eval_concrete(done, must_parse(done, input), ctx);
                                });
}

const char* kUnitGrammar = R"gram(
%start S
%token a "a"
S -> a : output(7)
)gram";

}   // namespace

TEST_CASE("derivation coverage counts distinct production sets") {
    Sketch s = load_sketch(kDiffCalc);
    std::vector<std::string> W = {"x^2+4*x+5"};
    CoverageSummary one = derivation_coverage(s, W);
    CHECK(one.q1_count == 1);
    CHECK(one.covered == std::set<int>{1, 2, 4, 5, 6, 7, 10, 11});
    CHECK(one.fraction_log2 == -11.0);

    W.push_back("x^2+7*x+sin(x)");
    CoverageSummary two = derivation_coverage(s, W);
    CHECK(two.q1_count == 2);
    CHECK(two.covered.count(8) == 1);
    CHECK(two.fraction_log2 == -10.0);

    W.push_back("x^3+5*x");
    CoverageSummary three = derivation_coverage(s, W);
    CHECK(three.q1_count == 2);
    CHECK(three.covered == two.covered);
}

TEST_CASE("coverage reports a parse failure by its input") {
    Sketch s = load_sketch(kDiffCalc);
    CHECK_THROWS_WITH(derivation_coverage(s, {"x*x", "x*+3"}), ContainsSubstring("x*+3"));
}

TEST_CASE("context sampling is deterministic and stays in range") {
    std::set<std::string> vars = {"x", "y"};
    Context a = sample_context(vars, 42);
    Context b = sample_context(vars, 42);
    REQUIRE(a.size() == 2);
    for (const auto& [name, v] : a) {
        REQUIRE(v.kind == ValueKind::Int);
        CHECK(v.i >= -5);
        CHECK(v.i <= 5);
        CHECK(value_eq(v, b.at(name), 0.0));
    }
    CHECK(sample_context({}, 7).empty());
}

TEST_CASE("an accepted example is new, parses, and replays through the oracle") {
    Sketch s = load_sketch(kDiffCalc);
    Oracle oracle = reference_oracle(s);
    CoverageState cov;
    std::optional<Example> ex;
    for (std::uint64_t seed = 1; seed <= 20 && !ex; ++seed)
        ex = generate_example(s, oracle, cov, seed, 10);
    REQUIRE(ex.has_value());
    PTree t = must_parse(s, ex->input);
    CHECK(cov.q1.size() == 1);
    CHECK(cov.contains(prod_set(t)));
    CHECK(value_eq(oracle(ex->input, ex->context), ex->output, 1e-9));
}

TEST_CASE("a covered production set is rejected") {
    Sketch s = load_sketch(kUnitGrammar);
    Oracle oracle = make_function_oracle(
        "builtin:const7", [](const std::string&, const Context&) { return make_int(7); });
    CoverageState cov;
    auto first = generate_example(s, oracle, cov, 1, 5);
    REQUIRE(first.has_value());
    CHECK(first->input == "a");
    CHECK(value_eq(first->output, make_int(7), 0.0));
    // the whole language has one production set, so every later walk rejects
    for (std::uint64_t seed = 2; seed < 8; ++seed)
        CHECK_FALSE(generate_example(s, oracle, cov, seed, 5).has_value());
}

TEST_CASE("suite generation reaches its target and covers every production") {
    Sketch s = load_sketch(kDiffCalc);
    Oracle oracle = reference_oracle(s);
    SuiteResult suite = generate_suite(s, oracle, 8, 500, 1, 10);
    REQUIRE(suite.target_reached);
    REQUIRE(static_cast<int>(suite.cov.q1.size()) >= 8);
    REQUIRE(suite.examples.size() == suite.cov.q1.size());

    std::vector<std::string> inputs;
    std::set<int> covered;
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    for (const auto& e : suite.examples) {
        inputs.push_back(e.input);
        PTree t = must_parse(s, e.input);
        auto ps = prod_set(t);
        covered.insert(ps.begin(), ps.end());
        keys.emplace_back(ps.size(), tokenize(s, e.input).size());
        CHECK(value_eq(oracle(e.input, e.context), e.output, 1e-9));
    }
    CHECK(static_cast<int>(covered.size()) == 11);
    CHECK(std::is_sorted(keys.begin(), keys.end()));

    SuiteResult again = generate_suite(s, oracle, 8, 500, 1, 10);
    std::vector<std::string> inputs2;
    for (const auto& e : again.examples) inputs2.push_back(e.input);
    CHECK(inputs == inputs2);
}

TEST_CASE("attempt exhaustion returns a partial suite") {
    Sketch s = load_sketch(kUnitGrammar);
    Oracle oracle = make_function_oracle(
        "builtin:const7", [](const std::string&, const Context&) { return make_int(7); });
    SuiteResult suite = generate_suite(s, oracle, 2, 25, 3, 5);
    CHECK_FALSE(suite.target_reached);
    CHECK(suite.examples.size() == 1);
    CHECK(suite.attempts == 25);
}

TEST_CASE("validation finds a distinguishing multiplication input") {
    Sketch s = load_sketch(kDiffCalc);
    Oracle oracle = reference_oracle(s);
    HoleBodies R;
    R["h3"] = diffcalc_wrong_h3(s);
    std::vector<Example> E = {
        Example{"x*x", {{"x", make_int(4)}}, make_dual(16, 8)}};

    ValidateBounds bounds;
    bounds.max_dsl_size = 7;
    bounds.max_bodies = 50000;
    bounds.max_alternates = 32;
    bounds.probe_strings = 10;
    bounds.probe_contexts = 3;
    bounds.max_depth = 8;
    ValidateResult r = validate(s, R, E, s.dsl, oracle, bounds, 5);

    REQUIRE_FALSE(r.unique);
    REQUIRE(r.distinguishing.has_value());
    CHECK(r.alt_hole == "h3");
    const Example& d = *r.distinguishing;
    // probes can only use productions the bindings cover, so the witness is a
    // multiplication-language string, and its value comes from the oracle
    CHECK(value_eq(oracle(d.input, d.context), d.output, 1e-9));
    Sketch base = bind_holes(s, R);
    Value base_val = eval_concrete(base, must_parse(s, d.input), d.context);
    CHECK_FALSE(value_eq(base_val, d.output, bounds.tol));
    // the correct rule agrees with the witness, so appending it evicts the
    // wrong body without excluding the right one
    Sketch good = complete(s, diffcalc_reference_bodies(s));
    CHECK(value_eq(eval_concrete(good, must_parse(s, d.input), d.context), d.output, 1e-7));
}

TEST_CASE("pinning examples make validation return unique within bounds") {
    Sketch s = load_sketch(kDiffCalc);
    Oracle oracle = reference_oracle(s);
    HoleBodies R = diffcalc_reference_bodies(s);
    std::vector<std::pair<std::string, int>> picks = {
        {"x+x", 13}, {"x+x+x", 2}, {"3-x", 7}, {"x-3", 5}, {"x*x", 4},
        {"x*cos(x)", 4}, {"x^3", 2}, {"sin(x^2)", 3}, {"cos(x^2)", 2}};
    std::vector<Example> E;
    for (const auto& [input, x] : picks) {
        Context ctx = {{"x", make_int(x)}};
        E.push_back(Example{input, ctx, oracle(input, ctx)});
    }

    ValidateBounds bounds;
    bounds.max_dsl_size = 5;
    bounds.max_bodies = 8000;
    bounds.max_alternates = 16;
    bounds.probe_strings = 8;
    bounds.probe_contexts = 2;
    bounds.max_depth = 8;
    ValidateResult r = validate(s, R, E, s.dsl, oracle, bounds, 11);
    CHECK(r.unique);
    CHECK_FALSE(r.zero_probe);
    CHECK_FALSE(r.distinguishing.has_value());
}

TEST_CASE("zero probe bounds short-circuit as vacuously unique") {
    Sketch s = load_sketch(kDiffCalc);
    Oracle oracle = reference_oracle(s);
    HoleBodies R = diffcalc_reference_bodies(s);
    ValidateBounds bounds;
    bounds.probe_strings = 0;
    ValidateResult r = validate(s, R, {}, s.dsl, oracle, bounds, 1);
    CHECK(r.unique);
    CHECK(r.zero_probe);
    CHECK(r.alternates_tried == 0);
}
