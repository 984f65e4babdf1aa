#include "doctest.h"

#include "nppx/engine.hpp"
#include "nppx/error.hpp"
#include "oracles.hpp"

#include "json.hpp"

#include <random>

using namespace nppx;

namespace {

GroundProgram ground_text(std::string_view text) { return ground(parse_program(text)); }

Interpretation interp(const GroundProgram& gp, std::initializer_list<const char*> atoms) {
    Interpretation i(gp.universe_size());
    for (auto a : atoms) i.insert(*gp.find(a));
    return i;
}

std::vector<std::string> names(const GroundProgram& gp, const Interpretation& i) {
    std::vector<std::string> out;
    for (const auto& a : sorted_atoms(gp, i)) out.push_back(a.to_string());
    return out;
}

using Strings = std::vector<std::string>;

}  // namespace

TEST_CASE("pump trip rule grounds to one instance") {
    const char* src =
        "it_happened(trip,P,T):- pump(P), time(T), pump_flow(P,F,T-1), pump_flow(P,0,T), F>0.\n"
        "pump(condensate_pump_a). time(1). pump_flow(condensate_pump_a,100,0). pump_flow(condensate_pump_a,0,1).\n";
    auto gp = ground_text(src);
    int instances = 0;
    for (const auto& r : gp.rules()) {
        if (r.source != 0) continue;
        ++instances;
        CHECK(gp.atom_string(*r.head) == "it_happened(trip,condensate_pump_a,1)");
        CHECK(r.pos.size() == 4);
        CHECK(r.comparisons == Strings{"100>0"});
    }
    CHECK(instances == 1);
}

TEST_CASE("variable-free program grounds to itself") {
    auto gp = ground_text("a. b :- a, not c. :- b, a.");
    REQUIRE(gp.rules().size() == 3);
    CHECK(gp.rules()[0].is_fact());
    CHECK(gp.atom_string(*gp.rules()[1].head) == "b");
    CHECK(gp.rules()[1].neg.size() == 1);
    CHECK_FALSE(gp.rules()[2].head.has_value());
    // A body atom that nothing can derive leaves no instance.
    CHECK(ground_text("a. :- c.").rules().size() == 1);
}

TEST_CASE("comparisons drop instances") {
    auto gp = ground_text("n(1..5). big(X) :- n(X), X>3. pair(X,Y) :- n(X), n(Y), Y=X+1.");
    const auto model = answer_sets(gp).front();
    CHECK(names(gp, model) == Strings{"big(4)", "big(5)", "n(1)", "n(2)", "n(3)", "n(4)", "n(5)", "pair(1,2)",
                                      "pair(2,3)", "pair(3,4)", "pair(4,5)"});
}

TEST_CASE("extra facts join the program") {
    std::vector<GroundAtom> extra{parse_ground_atom("q(1)"), parse_ground_atom("q(2)")};
    auto gp = ground(parse_program("p(X) :- q(X), not r(X)."), extra);
    auto sets = answer_sets(gp);
    REQUIRE(sets.size() == 1);
    CHECK(names(gp, sets[0]) == Strings{"p(1)", "p(2)", "q(1)", "q(2)"});
}

TEST_CASE("ground rule guard names the rule") {
    GroundOptions opts;
    opts.max_ground_rules = 50;
    try {
        ground(parse_program("n(1..10). pair(X,Y) :- n(X), n(Y)."), {}, opts);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Limit);
        CHECK(std::string(e.what()).find("pair(X,Y) :- n(X), n(Y).") != std::string::npos);
    }
}

TEST_CASE("recursion reaches the fixpoint") {
    auto gp = ground_text("e(1,2). e(2,3). e(3,4). e(4,2). path(X,Y) :- e(X,Y). path(X,Z) :- path(X,Y), e(Y,Z).");
    auto sets = answer_sets(gp);
    REQUIRE(sets.size() == 1);
    int paths = 0;
    for (const auto& a : sorted_atoms(gp, sets[0])) paths += a.predicate.name() == "path";
    CHECK(paths == 12);  // each of 1..4 reaches 2, 3 and 4
}

TEST_CASE("reduct examples") {
    auto gp = ground_text("a :- not b.");
    auto r = reduct(gp, interp(gp, {"a"}));
    REQUIRE(r.rules().size() == 1);
    CHECK(r.rules()[0].neg.empty());
    CHECK(gp.atom_string(*r.rules()[0].head) == "a");

    auto gp2 = ground_text("a :- not b. b :- not a.");
    auto r2 = reduct(gp2, interp(gp2, {"a"}));
    REQUIRE(r2.rules().size() == 1);
    CHECK(gp2.atom_string(*r2.rules()[0].head) == "a");
    CHECK(r2.rules()[0].neg.empty());
}

TEST_CASE("least model examples") {
    auto gp = ground_text("a. b :- a.");
    CHECK(names(gp, least_model(gp)) == Strings{"a", "b"});
    CHECK(least_model(GroundProgram{}).size() == 0);
    CHECK_THROWS_AS(least_model(ground_text("a :- not b.")), Error);
}

TEST_CASE("answer set examples") {
    auto even = ground_text("a :- not b. b :- not a.");
    CHECK(is_answer_set(even, interp(even, {"a"})));
    auto sets = answer_sets(even);
    REQUIRE(sets.size() == 2);
    CHECK(names(even, sets[0]) == Strings{"a"});
    CHECK(names(even, sets[1]) == Strings{"b"});
    CHECK(answer_sets(even, 1).size() == 1);

    auto odd = ground_text("a :- not a.");
    CHECK_FALSE(is_answer_set(odd, interp(odd, {})));
    CHECK_FALSE(is_answer_set(odd, interp(odd, {"a"})));
    CHECK(answer_sets(odd).empty());

    auto constrained = ground_text("a :- not b. b :- not a. :- a.");
    CHECK(answer_sets(constrained).size() == 1);
    CHECK_THROWS_AS(answer_sets(even, 0), Error);
}

TEST_CASE("nant examples") {
    auto gp = ground_text("a :- not b.");
    REQUIRE(nant(gp).size() == 1);
    CHECK(gp.atom_string(nant(gp)[0]) == "b");
    CHECK(nant(ground_text("a. b :- a.")).empty());
}

TEST_CASE("fallback refuses programs above the bound") {
    std::string src;
    for (int i = 0; i < 5; ++i) src += "p" + std::to_string(i) + " :- not q" + std::to_string(i) + ". q" +
                                       std::to_string(i) + " :- not p" + std::to_string(i) + ".\n";
    SolveOptions opts;
    opts.nant_bound = 8;
    try {
        answer_sets(ground_text(src), SIZE_MAX, opts);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Limit);
        CHECK(std::string(e.what()).find("too hard for exact enumeration") != std::string::npos);
    }
    opts.nant_bound = 10;
    CHECK(answer_sets(ground_text(src), SIZE_MAX, opts).size() == 32);
}

TEST_CASE("cautious consequences") {
    auto gp = ground_text("a :- not b. b :- not a. c.");
    auto c = cautious_consequences(gp);
    CHECK(names(gp, c.plus) == Strings{"c"});
    CHECK(c.minus.size() == 0);
    CHECK_FALSE(c.no_answer_set);

    // a0. a1 :- a0. a2 :- a3.
    auto pos = oracle::to_ground({4, {{0, 0, 0}, {1, 1, 0}, {2, 8, 0}}});
    auto cp = cautious_consequences(pos);
    CHECK(names(pos, cp.plus) == Strings{"a0", "a1"});
    CHECK(names(pos, cp.minus) == Strings{"a2", "a3"});

    auto odd = ground_text("a :- not a. b.");
    auto co = cautious_consequences(odd);
    CHECK(co.no_answer_set);
    CHECK(co.plus.size() == odd.universe_size());
    CHECK(co.minus.size() == odd.universe_size());
}

TEST_CASE("assumption sets") {
    auto strat = ground_text("a. b :- a, not c.");
    auto sets = assumption_sets(strat, answer_sets(strat).front());
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].empty());

    auto even = ground_text("a :- not b. b :- not a.");
    auto us = assumption_sets(even, interp(even, {"a"}));
    REQUIRE(us.size() == 1);
    REQUIRE(us[0].size() == 1);
    CHECK(even.atom_string(us[0][0]) == "b");

    CHECK_THROWS_AS(assumption_sets(even, interp(even, {"a", "b"})), Error);
}

TEST_CASE("answer set serialization") {
    auto gp = ground_text("p(10). p(9). p(b). q. p(a).");
    auto a = answer_sets(gp).front();
    CHECK(answer_set_text(gp, a) == "p(9)\np(10)\np(a)\np(b)\nq\n");
    CHECK(answer_set_json(gp, a) == R"J({"format_version":1,"atoms":["p(9)","p(10)","p(a)","p(b)","q"]})J");
    auto doc = nlohmann::json::parse(answer_set_json(gp, a));
    CHECK(doc["atoms"].size() == 5);
}

TEST_CASE("property: least model equals the minimal model by enumeration") {
    std::mt19937_64 rng(1);
    for (int iter = 0; iter < 300; ++iter) {
        const int n = std::uniform_int_distribution<int>(1, 12)(rng);
        auto p = oracle::random_positive(rng, n, std::uniform_int_distribution<int>(0, 14)(rng));
        CHECK(oracle::to_mask(least_model(oracle::to_ground(p))) == oracle::minimal_model_by_enumeration(p));
    }
}

TEST_CASE("property: least model is monotone in the facts") {
    std::mt19937_64 rng(2);
    for (int iter = 0; iter < 200; ++iter) {
        auto p = oracle::random_positive(rng, 10, 12);
        auto q = p;
        q.rules.push_back({std::uniform_int_distribution<int>(0, 9)(rng), 0, 0});
        const auto a = oracle::to_mask(least_model(oracle::to_ground(p)));
        const auto b = oracle::to_mask(least_model(oracle::to_ground(q)));
        CHECK((a & b) == a);
    }
}

TEST_CASE("property: answer_sets agrees with exhaustive interpretation checking") {
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 500; ++iter) {
        const int n = std::uniform_int_distribution<int>(1, 10)(rng);
        auto p = oracle::random_program(rng, n, std::uniform_int_distribution<int>(1, 12)(rng), true);
        auto gp = oracle::to_ground(p);
        std::set<oracle::Mask> got;
        for (const auto& s : answer_sets(gp)) got.insert(oracle::to_mask(s));
        const auto expected = oracle::answer_sets_by_enumeration(p);
        REQUIRE(got == expected);
        // is_answer_set agrees pointwise as well.
        for (oracle::Mask m = 0; m < (oracle::Mask{1} << n); ++m)
            REQUIRE(is_answer_set(gp, oracle::to_interpretation(p, m)) == (expected.count(m) > 0));
        // Reduct output never carries negation.
        const auto red = reduct(gp, oracle::to_interpretation(p, 0));
        for (const auto& r : red.rules()) CHECK(r.neg.empty());
    }
}

TEST_CASE("property: stratified path agrees with guess-and-check") {
    std::mt19937_64 rng(4);
    int checked = 0;
    for (int iter = 0; iter < 250; ++iter) {
        const int n = std::uniform_int_distribution<int>(2, 16)(rng);
        auto p = oracle::random_stratified(rng, n, std::uniform_int_distribution<int>(1, 20)(rng));
        auto gp = oracle::to_ground(p);
        REQUIRE(is_stratified(gp));
        REQUIRE(nant(gp).size() <= 24);
        auto fast = answer_sets(gp);
        auto slow = answer_sets_by_guessing(gp);
        REQUIRE(fast.size() == 1);
        REQUIRE(slow.size() == 1);
        CHECK(fast[0] == slow[0]);
        ++checked;
    }
    CHECK(checked >= 200);
}

TEST_CASE("property: assumption sets pass the independent check") {
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 150; ++iter) {
        const int n = std::uniform_int_distribution<int>(1, 7)(rng);
        auto p = oracle::random_program(rng, n, std::uniform_int_distribution<int>(1, 9)(rng), false);
        auto gp = oracle::to_ground(p);
        const auto cons = cautious_consequences(gp);
        const auto negs = nant(gp);
        for (const auto& a : answer_sets(gp)) {
            const auto us = assumption_sets(gp, a);
            for (const auto& u : us) {
                for (auto x : u) {
                    CHECK(std::find(negs.begin(), negs.end(), x) != negs.end());
                    CHECK_FALSE(a.contains(x));
                    CHECK_FALSE(cons.plus.contains(x));
                    CHECK_FALSE(cons.minus.contains(x));
                }
                // Reduced program, solved by enumeration: a is its only answer set.
                oracle::PropProgram reduced{p.atoms, {}};
                for (const auto& r : p.rules)
                    if (r.head < 0 || std::find(u.begin(), u.end(), static_cast<AtomId>(r.head)) == u.end())
                        reduced.rules.push_back(r);
                const auto sets = oracle::answer_sets_by_enumeration(reduced);
                CHECK(sets == std::set<oracle::Mask>{oracle::to_mask(a)});
            }
            // Minimality: no returned set contains another.
            for (std::size_t i = 0; i < us.size(); ++i)
                for (std::size_t j = 0; j < us.size(); ++j)
                    if (i != j)
                        CHECK_FALSE(std::includes(us[j].begin(), us[j].end(), us[i].begin(), us[i].end()));
        }
    }
}

TEST_CASE("property: grounding matches naive instantiation") {
    std::mt19937_64 rng(6);
    const char* templates[] = {
        "p(X) :- e(X,Y).",
        "q(X,Y) :- e(X,Y), not p(Y).",
        "r(X) :- p(X), X<3.",
        "s(Y) :- e(X,Z), Y=X+Z, n(Y).",
        "t(X) :- n(X), n(X-1), not r(X).",
        "e(Y,X) :- q(X,Y), X!=Y.",
        ":- r(X), s(X).",
        "u(X,Z) :- e(X,Y), e(Y,Z).",
        "v :- n(X), X>=4.",
        "p(Y) :- n(X), n(Y), e(X,Y+1).",
    };
    for (int iter = 0; iter < 150; ++iter) {
        std::string src = "n(0..4).\n";
        const int edges = std::uniform_int_distribution<int>(0, 6)(rng);
        for (int i = 0; i < edges; ++i)
            src += "e(" + std::to_string(rng() % 5) + "," + std::to_string(rng() % 5) + ").\n";
        const int rules = std::uniform_int_distribution<int>(1, 5)(rng);
        for (int i = 0; i < rules; ++i) src += std::string(templates[rng() % 10]) + "\n";
        const Program prog = parse_program(src);
        const auto gp = ground(prog);
        REQUIRE_MESSAGE(oracle::render_ground(gp) == oracle::naive_ground(prog), src);
        CHECK(gp.rules().size() <= 10000);
    }
}
