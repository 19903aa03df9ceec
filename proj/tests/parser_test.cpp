#include <catch2/catch_amalgamated.hpp>

#include "agsynth/parser.hpp"
#include "diffcalc_fixture.hpp"

using namespace agsynth;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<std::string> token_names(const Sketch& s, const std::vector<Token>& toks) {
    std::vector<std::string> out;
    for (const auto& t : toks) out.push_back(s.symbols[t.sym].name);
    return out;
}

void collect_leaves(const PTree& t, std::vector<std::string>& out) {
    if (t->is_leaf()) {
        out.push_back(t->tok.text);
        return;
    }
    for (const auto& k : t->kids) collect_leaves(k, out);
}

}  // namespace

TEST_CASE("lexer is maximal munch with declaration-order ties") {
    Sketch s = load_sketch(kDiffCalc);

    auto toks = tokenize(s, "sin(x)");
    CHECK(token_names(s, toks) == std::vector<std::string>{"SIN", "LPAREN", "var", "RPAREN"});

    // longest match wins: a longer identifier swallows the keyword prefix
    toks = tokenize(s, "sinx");
    REQUIRE(toks.size() == 1);
    CHECK(s.symbols[toks[0].sym].name == "var");
    CHECK(toks[0].text == "sinx");

    // equal-length tie goes to the earlier declaration (SIN before var)
    toks = tokenize(s, "sin");
    REQUIRE(toks.size() == 1);
    CHECK(s.symbols[toks[0].sym].name == "SIN");

    toks = tokenize(s, "42*x");
    REQUIRE(toks.size() == 3);
    CHECK(toks[0].text == "42");
    CHECK(s.symbols[toks[0].sym].name == "num");
    CHECK(toks[0].pos == 0);
    CHECK(toks[1].pos == 2);
    CHECK(toks[2].pos == 3);

    // whitespace only separates; it never becomes a token
    toks = tokenize(s, "  sin ( x )  ");
    CHECK(token_names(s, toks) == std::vector<std::string>{"SIN", "LPAREN", "var", "RPAREN"});
}

TEST_CASE("lexer ties involving regexes also follow declaration order") {
    Sketch s = load_sketch(R"gram(
%start S
%token word /[a-z]+/ ident
%token IF "if"
%token num /[0-9]+/ int
S -> word : output(1)
)gram");
    // the regex is declared before the literal, so the equal-length match
    // "if" lexes as word
    auto toks = tokenize(s, "if");
    REQUIRE(toks.size() == 1);
    CHECK(s.symbols[toks[0].sym].name == "word");
}

TEST_CASE("lexer reports the first unmatchable byte") {
    Sketch s = load_sketch(kDiffCalc);
    try {
        tokenize(s, "x$3");
        FAIL("expected LexError");
    } catch (const LexError& e) {
        CHECK(e.pos == 1);
        CHECK_THAT(e.what(), ContainsSubstring("position 1"));
    }
    CHECK_THROWS_AS(tokenize(s, "@"), LexError);
}

TEST_CASE("leftmost derivations match hand-computed rule sequences") {
    Sketch s = load_sketch(kDiffCalc);

    auto t = must_parse(s, "x");
    CHECK(leftmost_derivation(t) == std::vector<int>{1, 4, 6, 11});

    t = must_parse(s, "x+x");
    CHECK(leftmost_derivation(t) == std::vector<int>{1, 2, 4, 6, 11, 6, 11});

    t = must_parse(s, "x^2+4*x+5");
    CHECK(prod_set(t) == std::set<int>{1, 2, 4, 5, 6, 7, 10, 11});

    t = must_parse(s, "sin(x^2)");
    CHECK(prod_set(t) == std::set<int>{1, 4, 6, 8, 7, 11});
}

TEST_CASE("parse trees keep the token sequence as their frontier") {
    Sketch s = load_sketch(kDiffCalc);
    for (const char* input : {"x*cos(x)", "x^3-2*x^2+1", "3*x+6"}) {
        auto t = must_parse(s, input);
        std::vector<std::string> leaves;
        collect_leaves(t, leaves);
        std::vector<std::string> expect;
        for (const auto& tok : tokenize(s, input)) expect.push_back(tok.text);
        CHECK(leaves == expect);
    }
}

TEST_CASE("extraction is deterministic across repeated parses") {
    Sketch s = load_sketch(kDiffCalc);
    auto a = leftmost_derivation(must_parse(s, "x^2+4*x+5"));
    auto b = leftmost_derivation(must_parse(s, "x^2+4*x+5"));
    CHECK(a == b);
}

TEST_CASE("ambiguous grammars are detected") {
    Sketch s = load_sketch(R"gram(
%start E
%token PLUS "+"
%token num /[0-9]+/ int
E -> E PLUS E : E0.v := add(E1.v, E2.v) ; output(E0.v)
E -> num : E.v := getVal(num) ; output(E.v)
)gram");
    auto r = parse_input(s, "1+2+3");
    CHECK(r.status == ParseResult::Status::Ambiguous);
    CHECK(r.trees == 2);

    // a single sum has only one tree
    r = parse_input(s, "1+2");
    CHECK(r.status == ParseResult::Status::Ok);

    CHECK_THROWS_WITH(must_parse(s, "1+2+3"), ContainsSubstring("ambiguous"));
}

TEST_CASE("productive unit cycles count as ambiguity, not divergence") {
    Sketch s = load_sketch(R"gram(
%start A
%token num /[0-9]+/ int
A -> B : A.v := B.v ; output(A.v)
B -> A : B.v := A.v
A -> num : A.v := getVal(num) ; output(A.v)
)gram");
    auto r = parse_input(s, "5");
    CHECK(r.status == ParseResult::Status::Ambiguous);
}

TEST_CASE("no-parse reports the furthest position reached") {
    Sketch s = load_sketch(kDiffCalc);

    // dangling operator: progress reaches past the whole input
    auto r = parse_input(s, "x+");
    CHECK(r.status == ParseResult::Status::NoParse);
    CHECK(r.furthest_byte == 2);

    // two adjacent primaries: the second var token is never consumable
    r = parse_input(s, "x x");
    CHECK(r.status == ParseResult::Status::NoParse);
    CHECK(r.furthest_token == 1);
    CHECK(r.furthest_byte == 2);

    r = parse_input(s, "");
    CHECK(r.status == ParseResult::Status::NoParse);
    CHECK(r.furthest_byte == 0);

    CHECK_THROWS_WITH(must_parse(s, "x+"), ContainsSubstring("stuck at byte 2"));
}
