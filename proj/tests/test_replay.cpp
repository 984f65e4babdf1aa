#include "doctest.h"

#include "nppx/error.hpp"
#include "nppx/npp_kb.hpp"
#include "nppx/replay.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace nppx;

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::string diff(const std::set<std::string>& got, const std::set<std::string>& want) {
    std::string out;
    for (const auto& g : got)
        if (!want.count(g)) out += " +" + g;
    for (const auto& w : want)
        if (!got.count(w)) out += " -" + w;
    return out;
}

std::vector<SensorSample> constant_streams(long long value) {
    std::vector<SensorSample> out;
    for (const auto& b : variable_bindings()) out.push_back({0, b.stream, value});
    return out;
}

const Program& default_kb() {
    static const Program kb = build_kb();
    return kb;
}

}  // namespace

TEST_CASE("sensor rows") {
    const auto s = ingest_sensors("time,variable,value\n0,condensate_pump_a_flow,100\n");
    REQUIRE(s.size() == 1);
    CHECK(s[0] == SensorSample{0, "condensate_pump_a_flow", 100});
    CHECK(ingest_sensors("time,variable,value\n").empty());
    CHECK(ingest_sensors("time,variable,value\r\n\r\n 5 , turbine_power , -3 \r\n").at(0) == SensorSample{5, "turbine_power", -3});
    const auto sorted = ingest_sensors("time,variable,value\n9,turbine_power,1\n2,reactor_power,1\n2,turbine_power,0\n");
    CHECK(sorted[0] == SensorSample{2, "reactor_power", 1});
    CHECK(sorted[1] == SensorSample{2, "turbine_power", 0});
    CHECK(sorted[2] == SensorSample{9, "turbine_power", 1});
}

TEST_CASE("sensor row errors name the line") {
    CHECK_THROWS_WITH_AS(ingest_sensors("time,variable,value\n0,foo,1\n"), doctest::Contains("line 2: unknown variable 'foo'"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors("time,variable,value\n0,turbine_power,1.5\n"), doctest::Contains("line 2: value is not an integer"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors("time,variable,value\n\nx,turbine_power,1\n"), doctest::Contains("line 3: time"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors("time,variable,value\n0,turbine_power\n"), doctest::Contains("line 2: expected 3 fields"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors("t,v,x\n"), doctest::Contains("line 1: expected header"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors(""), doctest::Contains("missing header"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors("time,variable,value\n-1,turbine_power,1\n"), doctest::Contains("negative"), Error);
    CHECK_THROWS_WITH_AS(ingest_sensors("time,variable,value\n1,turbine_power,1\n1,turbine_power,2\n"),
                         doctest::Contains("duplicate"), Error);
}

TEST_CASE("action rows") {
    const auto a = ingest_actions("time,procedure,component\n7,open,pressurizer_pilot_operated_relief_valve\n");
    REQUIRE(a.size() == 1);
    CHECK(a[0].atom().to_string() == "attempted(open,pressurizer_pilot_operated_relief_valve,7)");
    CHECK(ingest_actions("time,procedure,component\n").empty());
    CHECK_THROWS_WITH_AS(ingest_actions("time,procedure,component\n7,Open,x\n"), doctest::Contains("line 2"), Error);
    CHECK_THROWS_WITH_AS(ingest_actions("time,procedure,component\n7,open\n"), doctest::Contains("line 2"), Error);
}

TEST_CASE("csv round trip (property)") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const auto c = oracle::random_case(rng);
        CHECK(ingest_sensors(sensors_csv(c.sensors)) == c.sensors);
        CHECK(ingest_actions(actions_csv(c.actions)) == c.actions);
    }
}

TEST_CASE("zero-order hold") {
    const std::vector<SensorSample> s{{5, "turbine_power", 100}, {9, "turbine_power", 0}, {2, "reactor_power", 7}};
    const SensorStore store(s);
    CHECK_FALSE(store.value_at("turbine_power", 4));
    CHECK(store.value_at("turbine_power", 5) == 100);
    CHECK(store.value_at("turbine_power", 8) == 100);
    CHECK(store.value_at("turbine_power", 9) == 0);
    CHECK(store.value_at("turbine_power", 1000) == 0);
    CHECK_FALSE(store.value_at("reactor_coolant_system_pressure", 5));
    CHECK(store.has_variable("reactor_power"));
    CHECK(store.last_time() == 9);
    CHECK(store.series("turbine_power", 0, 8).size() == 1);
    CHECK(store.series("turbine_power", 0, 9).size() == 2);
}

TEST_CASE("window schedule") {
    const auto w = window_schedule(60, 8521);
    CHECK(w.size() == 142);
    CHECK(w.front() == 60);
    CHECK(w[140] == 8460);
    CHECK(w.back() == 8521);
    CHECK(window_schedule(60, 0).empty());
    CHECK(window_schedule(60, -5).empty());
    CHECK(window_schedule(60, 120) == std::vector<long long>{60, 120});
    CHECK(window_schedule(60, 59) == std::vector<long long>{59});
    CHECK_THROWS_AS(window_schedule(0, 10), Error);
    for (long long step = 1; step <= 70; step += 3)
        for (long long h = 1; h <= 300; h += 7) {
            const auto s = window_schedule(step, h);
            CHECK(s.back() == h);
            CHECK(std::is_sorted(s.begin(), s.end()));
            CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
            CHECK(static_cast<long long>(s.size()) == std::max(1LL, h / step));
        }
}

TEST_CASE("window bounds") {
    const SensorStore store(constant_streams(1));
    const EventStore none;
    auto s = window_slice(store, {}, none, 60);
    CHECK(s.lo == 1);
    CHECK(s.hi == 60);
    s = window_slice(store, {}, none, 30);
    CHECK(s.lo == 0);
    CHECK(s.hi == 30);
    for (long long t = 0; t < 400; t += 13) {
        s = window_slice(store, {}, none, t);
        CHECK((t >= 59 ? s.hi - s.lo == 59 : s.lo == 0));
    }
    CHECK_THROWS_AS(window_slice(store, {}, none, -1), Error);
    CHECK_THROWS_AS(window_slice(store, {}, none, 10, 9), Error);
    s = window_slice(store, {}, none, 8461, 8521);
    CHECK(s.lo == 8461);
    CHECK(s.hi == 8521);
}

TEST_CASE("window starts") {
    const auto w = window_schedule(60, 8521);
    CHECK(window_start(w, 0) == 1);
    CHECK(window_start(w, 1) == 61);
    CHECK(window_start(w, 140) == 8401);
    CHECK(window_start(w, 141) == 8461);  // 61 seconds: 8461 belongs to no other window
    CHECK(window_start(window_schedule(60, 59), 0) == 0);
    CHECK(window_start(window_schedule(70, 300), 1) == 71);
    CHECK(window_start(window_schedule(30, 300), 1) == 1);
    CHECK_THROWS_AS(window_start(w, 142), Error);

    // Every second from the first window's start to the horizon lies in some
    // window, and no window is shorter than 60 seconds unless it starts at 0.
    for (long long step = 1; step <= 130; step += 3)
        for (long long h = 1; h <= 400; h += 11) {
            const auto s = window_schedule(step, h);
            std::vector<bool> covered(static_cast<std::size_t>(h) + 1, false);
            for (std::size_t i = 0; i < s.size(); ++i) {
                const long long lo = window_start(s, i);
                CHECK((lo == 0 || s[i] - lo >= 59));
                for (long long t = lo; t <= s[i]; ++t) covered[static_cast<std::size_t>(t)] = true;
            }
            const long long first = window_start(s, 0);
            for (long long t = first; t <= h; ++t) CHECK_MESSAGE(covered[static_cast<std::size_t>(t)], step << " " << h << " " << t);
        }
}

TEST_CASE("slice contents") {
    const SensorStore store(std::vector<SensorSample>{{0, "turbine_power", 100}, {1190, "turbine_power", 0}});
    const std::vector<AttemptedAction> actions{{499, "open", "auxiliary_feedwater_a_block_valve"},
                                               {1300, "open", "auxiliary_feedwater_b_block_valve"}};
    EventStore events;
    events.add(parse_ground_atom("it_happened(trip,condensate_pump_a,1)"));
    events.add(parse_ground_atom("it_happened(trip,turbine1,1190)"));
    const auto s = window_slice(store, actions, events, 1201);
    std::set<std::string> facts;
    for (const auto& f : s.facts) facts.insert(f.to_string());
    CHECK(facts.count("it_happened(trip,condensate_pump_a,1)") == 1);
    CHECK(facts.count("it_happened(trip,turbine1,1190)") == 0);  // inside the window: derived again
    CHECK(facts.count("attempted(open,auxiliary_feedwater_a_block_valve,499)") == 1);
    CHECK(facts.count("attempted(open,auxiliary_feedwater_b_block_valve,1300)") == 0);
    CHECK(facts.count("time(1141)") == 0);
    CHECK(facts.count("time(1142)") == 1);
    CHECK(facts.count("anytime(0)") == 1);
    CHECK(facts.count("anytime(1201)") == 1);
    CHECK(facts.count("power(turbine1,100,1140)") == 0);
    CHECK(facts.count("power(turbine1,100,1141)") == 1);  // the sample before the window
    CHECK(facts.count("power(turbine1,0,1201)") == 1);
}

TEST_CASE("window evaluation on a simple trip") {
    std::vector<SensorSample> s{{0, "condensate_pump_a_flow", 100}, {1, "condensate_pump_a_flow", 0}};
    const SensorStore store(s);
    const EventStore none;
    const auto ev = evaluate_window(default_kb(), window_slice(store, {}, none, 60));
    CHECK(ev.output.window_end == 60);
    CHECK(ev.output.window_start == 1);
    CHECK(ev.output.inferred_actions == std::vector<std::string>{"it_happened(trip,condensate_pump_a,1)"});
    REQUIRE(ev.events.size() == 1);
    CHECK(ev.events[0].to_string() == "it_happened(trip,condensate_pump_a,1)");
    CHECK(ev.output.recommendations.empty());
    CHECK(ev.output.other_atoms.empty());
    const auto verbose = evaluate_window(default_kb(), window_slice(store, {}, none, 60), true);
    CHECK_FALSE(verbose.output.other_atoms.empty());
    CHECK(as_set(verbose.output.other_atoms).count("time(60)") == 1);
}

TEST_CASE("constant streams") {
    // Every reading zero: no edges, and the only threshold met is the HPIS one
    // (pressure 0 is below the actuation pressure while HPIS flow is 0).
    const EventStore none;
    const auto zero = evaluate_window(default_kb(), window_slice(SensorStore(constant_streams(0)), {}, none, 60));
    CHECK(zero.output.inferred_actions.empty());
    for (const auto& r : zero.output.recommendations)
        CHECK(r.rfind("recommendation(turn_on,high_pressure_injection_pump,", 0) == 0);
    CHECK(zero.output.recommendations.size() == 60);
    // Same with nominal pressure: nothing at all.
    auto nominal = constant_streams(0);
    for (auto& s : nominal)
        if (s.variable == "reactor_coolant_system_pressure") s.value = 2155;
    const auto ev = evaluate_window(default_kb(), window_slice(SensorStore(nominal), {}, none, 60));
    CHECK(ev.output.inferred_actions.empty());
    CHECK(ev.output.recommendations.empty());
    CHECK(ev.output.inferred_vars.empty());
}

TEST_CASE("replay basics") {
    std::vector<SensorSample> s{{0, "condensate_pump_a_flow", 100}, {70, "condensate_pump_a_flow", 0},
                                {0, "reactor_coolant_system_pressure", 2155}};
    CHECK(replay(default_kb(), s, {}, {60, 0}).outputs.empty());
    const auto r = replay(default_kb(), s, {}, {60, 180});
    REQUIRE(r.outputs.size() == 3);
    CHECK(r.outputs[0].inferred_actions.empty());
    CHECK(r.outputs[1].inferred_actions == std::vector<std::string>{"it_happened(trip,condensate_pump_a,70)"});
    CHECK(r.outputs[2].inferred_actions.empty());
    CHECK(r.events.size() == 1);
    CHECK_THROWS_AS(replay(default_kb(), s, {}, {0, 180}), Error);
}

TEST_CASE("window documents") {
    DiagnosisOutput out;
    out.window_end = 60;
    out.window_start = 1;
    out.recommendations = {"recommendation(open,auxiliary_feedwater_a_block_valve,2)"};
    out.inferred_actions = {"it_happened(trip,condensate_pump_a,1)"};
    const auto json = to_json(out);
    CHECK(json.rfind("{\"format_version\":1,\"window_end\":60,\"window_start\":1,\"recommendations\":", 0) == 0);
    CHECK(json.find("other_atoms") == std::string::npos);
    CHECK(diagnosis_from_json(json) == out);
    out.other_atoms = {"time(60)"};
    CHECK(diagnosis_from_json(to_json(out)) == out);
    CHECK(to_text(out) ==
          "60 it_happened(trip,condensate_pump_a,1)\n"
          "60 recommendation(open,auxiliary_feedwater_a_block_valve,2)\n"
          "60 time(60)\n");
    CHECK_THROWS_AS(diagnosis_from_json("{"), Error);
    CHECK_THROWS_AS(diagnosis_from_json("{\"format_version\":2}"), Error);
    CHECK_THROWS_AS(diagnosis_from_json("{\"format_version\":1,\"window_end\":\"x\"}"), Error);
}

TEST_CASE("replay agrees with a direct scan of the streams (property)") {
    std::mt19937_64 rng(20261019);
    int windows = 0;
    for (int i = 0; i < 60; ++i) {
        const auto c = oracle::random_case(rng);
        const Program kb = build_kb(c.cfg);
        ReplayOptions opts;
        opts.step = c.step;
        opts.horizon = c.horizon;
        const auto r = replay(kb, c.sensors, c.actions, opts);
        const auto schedule = window_schedule(c.step, c.horizon);
        REQUIRE(r.outputs.size() == schedule.size());

        const SensorStore store(c.sensors);
        std::set<std::string> earlier;
        EventStore threaded;
        for (std::size_t w = 0; w < schedule.size(); ++w) {
            const auto& out = r.outputs[w];
            const long long hi = schedule[w];
            const long long lo = std::max(0LL, std::min(hi - 59, (w == 0 ? 0 : schedule[w - 1]) + 1));
            CHECK(out.window_end == hi);
            const auto want = oracle::window_by_scan(c.sensors, c.actions, c.cfg, lo, hi, earlier);
            CHECK_MESSAGE(as_set(out.recommendations) == want.recommendations, "case " << i << " window " << hi << diff(as_set(out.recommendations), want.recommendations));
            CHECK_MESSAGE(as_set(out.inferred_vars) == want.inferred_vars, "case " << i << " window " << hi << diff(as_set(out.inferred_vars), want.inferred_vars));
            CHECK_MESSAGE(as_set(out.inferred_actions) == want.inferred_actions, "case " << i << " window " << hi << diff(as_set(out.inferred_actions), want.inferred_actions));
            earlier.insert(want.inferred_actions.begin(), want.inferred_actions.end());

            // Each window's ground program is stratified.
            const auto ev = evaluate_window(kb, window_slice(store, c.actions, threaded, lo, hi));
            CHECK(is_stratified(ev.program));
            CHECK(ev.output == out);
            const auto before = threaded.size();
            for (const auto& e : ev.events) threaded.add(e);
            CHECK(threaded.size() >= before);
            ++windows;
        }
        // The event store only grows, in window order.
        CHECK(threaded == r.events);
    }
    CHECK(windows > 100);
}

TEST_CASE("suppression and edge invariants (property)") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 40; ++i) {
        const auto c = oracle::random_case(rng);
        const auto r = replay(build_kb(c.cfg), c.sensors, c.actions, {c.step, c.horizon});
        const SensorStore store(c.sensors);
        std::set<std::string> recs, actions;
        for (const auto& o : r.outputs) {
            recs.insert(o.recommendations.begin(), o.recommendations.end());
            actions.insert(o.inferred_actions.begin(), o.inferred_actions.end());
        }
        for (const auto& a : c.actions) {
            if (a.procedure != "open" || a.component.find("auxiliary_feedwater") == std::string::npos) continue;
            for (long long t = a.time; t <= a.time + c.cfg.action_execution_time_range; ++t)
                CHECK(recs.count("recommendation(open," + a.component + "," + std::to_string(t) + ")") == 0);
        }
        // Trips and starts of pumps sit exactly on flow edges.
        for (const auto& s : actions) {
            const auto atom = parse_ground_atom(s);
            const auto comp = atom.args[1].to_string();
            const long long t = atom.args[2].as_integer();
            if (comp.find("pump") == std::string::npos) continue;
            const auto before = store.value_at(comp + "_flow", t - 1);
            const auto now = store.value_at(comp + "_flow", t);
            REQUIRE(before);
            REQUIRE(now);
            if (atom.args[0].to_string() == "trip") CHECK((*before > 0 && *now == 0));
            else CHECK((*before == 0 && *now > 0));
        }
    }
}

TEST_CASE("concurrent windows equal sequential windows (property)") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 12; ++i) {
        const auto c = oracle::random_case(rng);
        const Program kb = build_kb(c.cfg);
        ReplayOptions seq{c.step, c.horizon};
        ReplayOptions par = seq;
        par.concurrent = true;
        par.threads = 1 + static_cast<unsigned>(i % 4);
        const auto a = replay(kb, c.sensors, c.actions, seq);
        const auto b = replay(kb, c.sensors, c.actions, par);
        CHECK(a.outputs == b.outputs);
        CHECK(a.events == b.events);
    }
}

TEST_CASE("replay is deterministic") {
    std::mt19937_64 rng(9);
    const auto c = oracle::random_case(rng);
    const Program kb = build_kb(c.cfg);
    const auto a = replay(kb, c.sensors, c.actions, {c.step, c.horizon});
    const auto b = replay(build_kb(c.cfg), c.sensors, c.actions, {c.step, c.horizon});
    CHECK(a.outputs == b.outputs);
    for (std::size_t i = 0; i < a.outputs.size(); ++i) CHECK(to_json(a.outputs[i]) == to_json(b.outputs[i]));
}
