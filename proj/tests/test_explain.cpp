#include "doctest.h"

#include "nppx/error.hpp"
#include "nppx/explain.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>

using namespace nppx;

namespace {

GroundProgram ground_text(std::string_view text) { return ground(parse_program(text)); }

struct Solved {
    GroundProgram gp;
    Interpretation a;
    AssumptionSet u;
};

Solved solve_unique(std::string_view text) {
    auto gp = ground_text(text);
    auto sets = answer_sets(gp);
    REQUIRE(sets.size() == 1);
    return {gp, sets[0], {}};
}

GraphSet explain(const Solved& s, std::string_view atom) {
    return explanation_graphs(s.gp, s.a, s.u, *s.gp.find(atom));
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

const char* kPumpTrip =
    "it_happened(trip,P,T):- pump(P), time(T), pump_flow(P,F,T-1), pump_flow(P,0,T), F>0.\n"
    "pump(condensate_pump_a). time(1). pump_flow(condensate_pump_a,100,0). pump_flow(condensate_pump_a,0,1).\n";

ExplanationGraph pump_trip_graph() {
    using N = ExplanationNode;
    ExplanationGraph g;
    const auto root = N::positive("it_happened(trip,condensate_pump_a,1)");
    g.add_node(root);
    for (const char* f : {"pump(condensate_pump_a)", "time(1)", "pump_flow(condensate_pump_a,100,0)",
                          "pump_flow(condensate_pump_a,0,1)"}) {
        g.add_edge(root, N::positive(f), EdgeLabel::Plus);
        g.add_edge(N::positive(f), N::top(), EdgeLabel::Plus);
    }
    g.add_edge(root, N::comparison("100>0"), EdgeLabel::Plus);
    g.add_edge(N::comparison("100>0"), N::top(), EdgeLabel::Plus);
    return g;
}

}  // namespace

TEST_CASE("pump trip has one graph of facts and a comparison") {
    auto s = solve_unique(kPumpTrip);
    auto set = explain(s, "it_happened(trip,condensate_pump_a,1)");
    CHECK_FALSE(set.truncated);
    REQUIRE(set.graphs.size() == 1);
    const auto& g = set.graphs[0];
    CHECK(same_structure(g, pump_trip_graph()));
    CHECK(g.nodes.size() == 7);
    CHECK(g.edges.size() == 10);
    CHECK(g.nodes[g.root] == ExplanationNode::positive("it_happened(trip,condensate_pump_a,1)"));
    CHECK(validate_graph(g, s.gp, s.a, s.u).empty());
}

TEST_CASE("a fact has the single graph to top") {
    auto s = solve_unique("f.");
    auto set = explain(s, "f");
    REQUIRE(set.graphs.size() == 1);
    ExplanationGraph expected;
    expected.add_edge(ExplanationNode::positive("f"), ExplanationNode::top(), EdgeLabel::Plus);
    CHECK(same_structure(set.graphs[0], expected));
}

TEST_CASE("an atom without rules links to bottom") {
    auto s = solve_unique("a :- not p.");
    auto set = explain(s, "p");
    REQUIRE(set.graphs.size() == 1);
    ExplanationGraph expected;
    expected.add_edge(ExplanationNode::negative("p"), ExplanationNode::bottom(), EdgeLabel::Plus);
    CHECK(same_structure(set.graphs[0], expected));

    auto for_a = explain(s, "a");
    REQUIRE(for_a.graphs.size() == 1);
    ExplanationGraph chain;
    chain.add_edge(ExplanationNode::positive("a"), ExplanationNode::negative("p"), EdgeLabel::Minus);
    chain.add_edge(ExplanationNode::negative("p"), ExplanationNode::bottom(), EdgeLabel::Plus);
    CHECK(same_structure(for_a.graphs[0], chain));
}

TEST_CASE("even cycle explains through an assumption") {
    auto gp = ground_text("a :- not b. b :- not a.");
    Interpretation a(gp.universe_size());
    a.insert(*gp.find("a"));
    auto us = assumption_sets(gp, a);
    REQUIRE(us.size() == 1);
    REQUIRE(us[0] == AssumptionSet{*gp.find("b")});

    auto set = explanation_graphs(gp, a, us[0], *gp.find("a"));
    REQUIRE(set.graphs.size() == 1);
    ExplanationGraph expected;
    expected.add_edge(ExplanationNode::positive("a"), ExplanationNode::negative("b"), EdgeLabel::Minus);
    expected.add_edge(ExplanationNode::negative("b"), ExplanationNode::assume(), EdgeLabel::Circle);
    CHECK(same_structure(set.graphs[0], expected));

    CHECK_THROWS_AS(explanation_graphs(gp, a, {}, *gp.find("a")), Error);
    CHECK(explain_atom(gp, a, "b").graphs.size() == 1);
}

TEST_CASE("refutations are minimal hitting sets") {
    auto s = solve_unique("y. z. x :- not y, not z.");
    auto set = explain(s, "x");
    REQUIRE(set.graphs.size() == 2);
    for (const auto& g : set.graphs) {
        CHECK(g.nodes.size() == 3);
        CHECK(validate_graph(g, s.gp, s.a, s.u).empty());
    }

    ExplanationGraph both;
    both.add_edge(ExplanationNode::negative("x"), ExplanationNode::positive("y"), EdgeLabel::Minus);
    both.add_edge(ExplanationNode::negative("x"), ExplanationNode::positive("z"), EdgeLabel::Minus);
    both.add_edge(ExplanationNode::positive("y"), ExplanationNode::top(), EdgeLabel::Plus);
    both.add_edge(ExplanationNode::positive("z"), ExplanationNode::top(), EdgeLabel::Plus);
    CHECK(any_contains(validate_graph(both, s.gp, s.a, s.u), "not minimal"));
}

TEST_CASE("validator reports a relabeled fact edge") {
    auto s = solve_unique(kPumpTrip);
    auto g = pump_trip_graph();
    for (auto& e : g.edges)
        if (g.nodes[e.from].atom == "time(1)") e.label = EdgeLabel::Minus;
    auto v = validate_graph(g, s.gp, s.a, s.u);
    CHECK(any_contains(v, "must link to ⊤ with +"));
    CHECK(any_contains(v, "fact time(1)"));
}

TEST_CASE("validator reports other violations") {
    auto s = solve_unique(kPumpTrip);

    SUBCASE("unreachable node") {
        auto g = pump_trip_graph();
        g.add_edge(ExplanationNode::negative("zzz"), ExplanationNode::bottom(), EdgeLabel::Plus);
        CHECK(any_contains(validate_graph(g, s.gp, s.a, s.u), "not reachable"));
    }
    SUBCASE("missing body atom") {
        auto g = pump_trip_graph();
        g.edges.erase(g.edges.begin() + 2);  // root -> time(1)
        auto v = validate_graph(g, s.gp, s.a, s.u);
        CHECK(any_contains(v, "matches no rule"));
    }
    SUBCASE("edge out of top") {
        auto g = pump_trip_graph();
        g.add_edge(ExplanationNode::top(), ExplanationNode::positive("time(1)"), EdgeLabel::Plus);
        CHECK(any_contains(validate_graph(g, s.gp, s.a, s.u), "no edge may leave ⊤"));
    }
    SUBCASE("root of the wrong polarity") {
        auto g = pump_trip_graph();
        g.nodes[g.root].kind = NodeKind::Negative;
        CHECK(any_contains(validate_graph(g, s.gp, s.a, s.u), "is true and must appear as"));
    }
}

TEST_CASE("validator reports a cycle through a true atom") {
    auto s = solve_unique("p :- q. q :- p. r :- p. p :- r. q.");
    ExplanationGraph g;
    g.add_edge(ExplanationNode::positive("r"), ExplanationNode::positive("p"), EdgeLabel::Plus);
    g.add_edge(ExplanationNode::positive("p"), ExplanationNode::positive("r"), EdgeLabel::Plus);
    auto v = validate_graph(g, s.gp, s.a, s.u);
    CHECK(any_contains(v, "cycle through true atom p"));
    CHECK(any_contains(v, "cycle through true atom r"));

    // The generator never builds it.
    auto set = explain(s, "r");
    REQUIRE(set.graphs.size() == 1);
    CHECK(set.graphs[0].nodes.size() == 4);  // r, p, q, top
}

TEST_CASE("enumeration is truncated at max_graphs") {
    std::string text;
    for (int i = 0; i < 40; ++i) text += "q" + std::to_string(i) + ". p :- q" + std::to_string(i) + ".\n";
    auto s = solve_unique(text);
    auto set = explain(s, "p");
    CHECK(set.truncated);
    CHECK(set.graphs.size() == 32);
    CHECK(std::is_sorted(set.graphs.begin(), set.graphs.end(),
                         [](const auto& x, const auto& y) { return canonical_less(x, y); }));

    ExplainOptions wide;
    wide.max_graphs = 40;
    auto all = explanation_graphs(s.gp, s.a, s.u, *s.gp.find("p"), wide);
    CHECK_FALSE(all.truncated);
    CHECK(all.graphs.size() == 40);
}

TEST_CASE("DOT rendering") {
    auto g = pump_trip_graph();
    const auto dot = to_dot(g);
    CHECK(dot.rfind("// format_version 1\n", 0) == 0);
    CHECK(count(dot, "shape=box") == 5);
    CHECK(count(dot, "style=dashed\"") == 0);
    CHECK(count(dot, "->") == 5);
    CHECK(count(dot, "-> ") == count(dot, "[style=solid, label=\"+\"]"));
    CHECK(count(dot, "⊤") == 0);

    DotOptions full;
    full.elide_top_edges = false;
    const auto plain = to_dot(g, full);
    CHECK(count(plain, "->") == 10);
    CHECK(count(plain, "doublecircle") == 1);

    ExplanationGraph fact;
    fact.add_edge(ExplanationNode::positive("f"), ExplanationNode::top(), EdgeLabel::Plus);
    const auto fdot = to_dot(fact);
    CHECK(count(fdot, "[label=") == 1);
    CHECK(count(fdot, "->") == 0);

    ExplanationGraph mixed;
    mixed.add_edge(ExplanationNode::positive("a"), ExplanationNode::negative("b"), EdgeLabel::Minus);
    mixed.add_edge(ExplanationNode::negative("b"), ExplanationNode::assume(), EdgeLabel::Circle);
    const auto mdot = to_dot(mixed);
    CHECK(count(mdot, "style=dashed, label=\"-\"") == 1);
    CHECK(count(mdot, "style=dotted, label=\"o\"") == 1);
    CHECK(count(mdot, "shape=diamond") == 1);
}

TEST_CASE("property: DOT output is identical for structurally equal graphs") {
    std::mt19937_64 rng(11);
    auto base = pump_trip_graph();
    const auto expected = to_dot(base);
    for (int trial = 0; trial < 100; ++trial) {
        ExplanationGraph g;
        std::vector<std::size_t> order(base.nodes.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> where(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            where[order[i]] = i;
            g.nodes.push_back(base.nodes[order[i]]);
        }
        g.root = where[base.root];
        for (const auto& e : base.edges) g.edges.push_back({where[e.from], where[e.to], e.label});
        std::shuffle(g.edges.begin(), g.edges.end(), rng);
        CHECK(to_dot(g) == expected);
        CHECK(same_structure(g, base));
    }
}

TEST_CASE("JSON documents round trip") {
    auto g = pump_trip_graph();
    g.canonicalize();
    const auto text = to_json(g);
    CHECK(text.rfind("{\"format_version\":1,\"root\":", 0) == 0);
    CHECK(graph_from_json(text) == g);

    CHECK_THROWS_AS(graph_from_json("{"), Error);
    CHECK_THROWS_AS(graph_from_json(R"({"format_version":2,"root":0,"nodes":[],"edges":[]})"), Error);
    CHECK_THROWS_AS(graph_from_json(R"({"format_version":1,"root":0,"nodes":[],"edges":[]})"), Error);
    CHECK_THROWS_AS(
        graph_from_json(
            R"({"format_version":1,"root":0,"nodes":[{"id":0,"kind":"top","atom":null}],"edges":[{"from":0,"to":0,"label":"x"}]})"),
        Error);
}

TEST_CASE("explain_atom rejects unknown atoms") {
    auto s = solve_unique("f.");
    CHECK_THROWS_AS(explain_atom(s.gp, s.a, "nope"), Error);
}

TEST_CASE("property: generator equals exhaustive valid-graph search") {
    std::mt19937_64 rng(2024);
    int compared = 0, graphs = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int atoms = 2 + trial % 6;  // 2..7
        auto p = oracle::random_program(rng, atoms, 2 + static_cast<int>(rng() % 7), true);
        auto gp = oracle::to_ground(p);
        ExplainOptions opts;
        opts.max_graphs = 100000;
        for (const auto& a : answer_sets(gp, 3)) {
            auto us = assumption_sets(gp, a);
            REQUIRE_FALSE(us.empty());
            for (const auto& u : {us.front(), us.back()}) {
                for (AtomId x = 0; x < gp.universe_size(); ++x) {
                    auto set = explanation_graphs(gp, a, u, x, opts);
                    std::set<std::string> produced;
                    for (const auto& g : set.graphs) {
                        INFO(to_json(g));
                        CHECK(validate_graph(g, gp, a, u).empty());
                        produced.insert(to_json(g));
                    }
                    CHECK(produced.size() == set.graphs.size());
                    CHECK(produced == oracle::explanation_graphs_by_search(gp, a, u, x));
                    ++compared;
                    graphs += static_cast<int>(set.graphs.size());
                }
            }
        }
    }
    MESSAGE("compared " << compared << " atoms, " << graphs << " graphs");
    CHECK(compared > 500);
}

TEST_CASE("property: every emitted graph validates on larger programs") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = oracle::random_program(rng, 10, 14, true);
        auto gp = oracle::to_ground(p);
        for (const auto& a : answer_sets(gp, 2)) {
            auto us = assumption_sets(gp, a);
            REQUIRE_FALSE(us.empty());
            for (AtomId x = 0; x < gp.universe_size(); ++x)
                for (const auto& g : explanation_graphs(gp, a, us.front(), x).graphs)
                    CHECK(validate_graph(g, gp, a, us.front()).empty());
        }
    }
}

TEST_CASE("property: stratified programs need no assumptions") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = trial % 2 ? oracle::random_stratified(rng, 7, 10) : oracle::random_positive(rng, 7, 10);
        auto gp = oracle::to_ground(p);
        auto sets = answer_sets(gp);
        REQUIRE(sets.size() == 1);
        const auto& a = sets[0];
        auto us = assumption_sets(gp, a);
        REQUIRE(us.size() == 1);
        CHECK(us[0].empty());
        for (auto x : a.atoms()) {
            for (const auto& g : explanation_graphs(gp, a, {}, x).graphs) {
                std::vector<bool> has_out(g.nodes.size(), false);
                for (const auto& e : g.edges) has_out[e.from] = true;
                for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                    CHECK(g.nodes[i].kind != NodeKind::Assume);
                    if (has_out[i]) continue;
                    // Leaves are top, or bottom under an atom that has no rule.
                    if (trial % 2 == 0) CHECK(g.nodes[i].kind == NodeKind::Top);
                    else CHECK((g.nodes[i].kind == NodeKind::Top || g.nodes[i].kind == NodeKind::Bottom));
                }
            }
        }
    }
}
