#include "nppx/scenario.hpp"
#include "nppx/error.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace nppx {

const std::vector<ScenarioEvent>& tmi2_events() {
    static const std::vector<ScenarioEvent> events{
        {0, "Normal operation", 0, {}},
        {1, "Condensate pumps trip", 1, {"condensate_pump_a_flow", "condensate_pump_b_flow"}},
        {2, "Feedwater pumps trip", 2, {"feedwater_pump_a_flow", "feedwater_pump_b_flow"}},
        {2, "Turbine trips", 2, {"turbine_power"}},
        {2, "Auxiliary feedwater pumps start", 2, {"auxiliary_feedwater_pump_a_flow", "auxiliary_feedwater_pump_b_flow"}},
        {7, "Pressurizer PORV opens due to high primary loop pressure", 7, {"reactor_coolant_system_pressure"}},
        {11, "Reactor trips", 11, {"reactor_power"}},
        {11, "Primary loop pressure starts decreasing, but the PORV remains open", 12,
         {"reactor_coolant_system_pressure"}},
        {122, "HPIS system starts", 122, {"high_pressure_injection_pump_flow"}},
        {279, "Operators throttle HPIS pumps", 278, {"high_pressure_injection_pump_flow"}},
        {499, "The auxiliary feedwater line block valve is opened (loop A)", 499, {"auxiliary_feedwater_pump_a_flow"}},
        {500, "The auxiliary feedwater line block valve is opened (loop B)", 500, {"auxiliary_feedwater_pump_b_flow"}},
        {4402, "Primary pump is tripped (loop A)", 4403, {"primary_pump_a_flow"}},
        {6036, "Primary pump is tripped (loop B)", 6037, {"primary_pump_b_flow"}},
        {8521, "Pressurizer block valve is closed", 8521, {"reactor_coolant_system_pressure"}},
    };
    return events;
}

long long Trace::value_at(long long t) const {
    if (points.empty()) throw Error(ErrorKind::Internal, "trace " + variable + " has no waypoints");
    if (t <= points.front().time) return points.front().value;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto& a = points[i - 1];
        const auto& b = points[i];
        if (t > b.time) continue;
        const long long num = (b.value - a.value) * (t - a.time);
        const long long den = b.time - a.time;
        long long q = num / den;
        if (num % den != 0 && num < 0) --q;
        return a.value + q;
    }
    return points.back().value;
}

const std::vector<Trace>& tmi2_traces() {
    // Waypoints: pressure 2255 at 7, 1213 at 901 and the 1257 < 1258 crossing
    // at 847; level 20 at 1201; flow edges on the event times.
    static const std::vector<Trace> traces{
        {"reactor_coolant_system_pressure",
         {{0, 2155}, {7, 2255}, {11, 2355}, {18, 2131}, {117, 1600}, {846, 1258}, {847, 1257}, {901, 1213},
          {3000, 1050}, {8520, 1000}, {8521, 1100}}},
        {"steam_generator_a_level", {{0, 60}, {1, 60}, {2, 20}, {1260, 20}, {1500, 60}}},
        {"steam_generator_b_level", {{0, 60}, {1, 60}, {2, 20}, {1260, 20}, {1500, 60}}},
        {"primary_pump_a_flow", {{0, 100}, {4402, 100}, {4403, 0}}},
        {"primary_pump_b_flow", {{0, 100}, {6036, 100}, {6037, 0}}},
        {"rcs_inlet_temperature_a", {{0, 557}, {11, 557}, {700, 573}}},
        {"rcs_inlet_temperature_b", {{0, 557}}},
        {"condensate_pump_a_flow", {{0, 100}, {1, 0}}},
        {"condensate_pump_b_flow", {{0, 100}, {1, 0}}},
        {"feedwater_pump_a_flow", {{0, 100}, {1, 100}, {2, 0}}},
        {"feedwater_pump_b_flow", {{0, 100}, {1, 100}, {2, 0}}},
        {"auxiliary_feedwater_pump_a_flow", {{0, 0}, {1, 0}, {2, 10}, {498, 10}, {499, 100}}},
        {"auxiliary_feedwater_pump_b_flow", {{0, 0}, {1, 0}, {2, 10}, {499, 10}, {500, 100}}},
        {"high_pressure_injection_pump_flow", {{0, 0}, {121, 0}, {122, 100}, {277, 100}, {278, 0}}},
        {"reactor_power", {{0, 100}, {10, 100}, {11, 0}}},
        {"turbine_power", {{0, 100}, {1, 100}, {2, 0}}},
    };
    return traces;
}

const std::vector<AttemptedAction>& tmi2_actions() {
    static const std::vector<AttemptedAction> actions{
        {7, "open", "pressurizer_pilot_operated_relief_valve"},
        {11, "close", "pressurizer_pilot_operated_relief_valve"},
        {279, "turn_off", "high_pressure_injection_pump"},
        {499, "open", "auxiliary_feedwater_a_block_valve"},
        {500, "open", "auxiliary_feedwater_b_block_valve"},
        {4402, "turn_off", "primary_pump_a"},
        {6036, "turn_off", "primary_pump_b"},
        {8521, "close", "pressurizer_block_valve"},
    };
    return actions;
}

namespace {

const Trace& trace(std::string_view variable) {
    for (const auto& t : tmi2_traces())
        if (t.variable == variable) return t;
    throw Error(ErrorKind::Internal, "no trace for " + std::string(variable));
}

// First t in [from, horizon] with pred(t), or -1.
long long first_time(long long from, const std::function<bool(long long)>& pred) {
    for (long long t = from; t <= kTmi2Horizon; ++t)
        if (pred(t)) return t;
    return -1;
}

void require_crossing(const char* key, long long found, long long expected) {
    if (found != expected)
        throw Error(ErrorKind::InvalidArgument,
                    std::string("infeasible configuration: ") + key + " moves the crossing at t=" +
                        std::to_string(expected) + " to " + (found < 0 ? "never" : "t=" + std::to_string(found)));
}

void check_feasible(const KbConfig& cfg) {
    cfg.validate();
    const auto& p = trace("reactor_coolant_system_pressure");
    const auto& level_a = trace("steam_generator_a_level");
    const auto& level_b = trace("steam_generator_b_level");
    require_crossing("upper_pressure_boundary_primary_loop",
                     first_time(0, [&](long long t) { return p.value_at(t) >= cfg.upper_pressure_boundary_primary_loop; }),
                     7);
    require_crossing("porv_closure_setpoint",
                     first_time(7, [&](long long t) { return p.value_at(t) < cfg.porv_closure_setpoint; }), 16);
    const long long stuck = cfg.porv_closure_setpoint - cfg.stuck_open_margin;
    require_crossing("stuck_open_margin", first_time(12, [&](long long t) { return p.value_at(t) < stuck; }), 18);
    require_crossing("hpis_actuation_pressure",
                     first_time(0, [&](long long t) { return p.value_at(t) < cfg.hpis_actuation_pressure; }), 118);
    for (const auto* level : {&level_a, &level_b}) {
        require_crossing("water_level_minimum",
                         first_time(0, [&](long long t) { return level->value_at(t) < cfg.water_level_minimum; }), 2);
        if (level->value_at(kTmi2Horizon) < cfg.water_level_minimum)
            throw Error(ErrorKind::InvalidArgument,
                        "infeasible configuration: water_level_minimum keeps the steam generators starved at the end");
    }
}

}  // namespace

SynthesizedScenario synthesize_tmi2(const KbConfig& cfg) {
    check_feasible(cfg);
    SynthesizedScenario s;
    for (const auto& b : variable_bindings()) {
        const auto& tr = trace(b.stream);
        long long last = 0;
        for (long long t = 0; t <= kTmi2Horizon; ++t) {
            const long long v = tr.value_at(t);
            if (t == 0 || v != last) s.sensors.push_back({t, b.stream, v});
            last = v;
        }
    }
    std::stable_sort(s.sensors.begin(), s.sensors.end(), [](const SensorSample& a, const SensorSample& b) {
        return std::tie(a.time, a.variable) < std::tie(b.time, b.variable);
    });
    s.actions = tmi2_actions();
    return s;
}

namespace {

constexpr const char* kAuxA = "auxiliary_feedwater_a_block_valve";
constexpr const char* kAuxB = "auxiliary_feedwater_b_block_valve";
constexpr const char* kPorv = "pressurizer_power_operated_relief_valve";
constexpr const char* kBackup = "pressurizer_backup_block_valve";
constexpr const char* kHpi = "high_pressure_injection_pump";

std::string atom(const std::string& pred, std::initializer_list<std::string> args) {
    std::string s = pred + "(";
    bool first = true;
    for (const auto& a : args) {
        if (!first) s += ",";
        s += a;
        first = false;
    }
    return s + ")";
}

std::string rec(const char* proc, const char* comp, long long t) {
    return atom("recommendation", {proc, comp, std::to_string(t)});
}

// Graph builder over node texts; facts and comparisons get their ⊤ edge.
struct Builder {
    ExplanationGraph g;

    explicit Builder(const std::string& root) { g.root = g.add_node(ExplanationNode::positive(root)); }

    Builder& derived(const std::string& from, const std::string& to) {
        g.add_edge(ExplanationNode::positive(from), ExplanationNode::positive(to), EdgeLabel::Plus);
        return *this;
    }
    Builder& fact(const std::string& from, const std::string& to) {
        derived(from, to);
        g.add_edge(ExplanationNode::positive(to), ExplanationNode::top(), EdgeLabel::Plus);
        return *this;
    }
    Builder& comparison(const std::string& from, const std::string& text) {
        g.add_edge(ExplanationNode::positive(from), ExplanationNode::comparison(text), EdgeLabel::Plus);
        g.add_edge(ExplanationNode::comparison(text), ExplanationNode::top(), EdgeLabel::Plus);
        return *this;
    }
    Builder& absent(const std::string& from, const std::string& to) {
        g.add_edge(ExplanationNode::positive(from), ExplanationNode::negative(to), EdgeLabel::Minus);
        g.add_edge(ExplanationNode::negative(to), ExplanationNode::bottom(), EdgeLabel::Plus);
        return *this;
    }
    ExplanationGraph done() {
        g.canonicalize();
        return g;
    }
};

// Open-valve recommendation for valve A at 1201 through the trip of `pump`
// (condensate or feedwater) at `trip_time`.
ExplanationGraph open_valve_graph(const std::string& pump_class, const std::string& pump, long long trip_time) {
    const std::string root = rec("open", kAuxA, 1201);
    const std::string closed = atom("closed", {kAuxA, "1201"});
    const std::string lack = atom("lack_of_water_supply", {"secondary_loop_A", "1201"});
    const std::string aux_valve = atom("aux_fw_valve", {kAuxA});
    Builder b(root);
    b.fact(root, aux_valve).fact(root, "anytime(1201)").derived(root, closed);
    b.absent(root, atom("suppressed", {"open", kAuxA, "1201"}));
    b.fact(closed, aux_valve)
        .fact(closed, atom("loop_component", {"secondary_loop_A", kAuxA}))
        .derived(closed, lack)
        .fact(closed, "aux_fw_pump(auxiliary_feedwater_pump_a)")
        .fact(closed, "loop_component(secondary_loop_A,auxiliary_feedwater_pump_a)")
        .fact(closed, "pump_flow(auxiliary_feedwater_pump_a,100,1201)")
        .comparison(closed, "100>0");
    b.fact(lack, "secondary_loop(secondary_loop_A)")
        .fact(lack, "time(1201)")
        .fact(lack, atom(pump_class, {pump}))
        .fact(lack, atom("loop_component", {"secondary_loop_A", pump}))
        .fact(lack, atom("it_happened", {"trip", pump, std::to_string(trip_time)}))
        .comparison(lack, std::to_string(trip_time) + "<=1201")
        .fact(lack, "steam_generator(steam_generator_secondary_a)")
        .fact(lack, "loop_component(secondary_loop_A,steam_generator_secondary_a)")
        .fact(lack, "water_level(steam_generator_secondary_a,20,1201)")
        .fact(lack, "water_level_minimum(30)")
        .comparison(lack, "20<30");
    return b.done();
}

ExpectedOutputs build_expected() {
    ExpectedOutputs e;
    e.recommendations[2] = {rec("open", kAuxA, 2), rec("open", kAuxB, 2)};
    e.recommendations[16] = {rec("close", kBackup, 16), rec("close", kPorv, 16), rec("open", kAuxA, 16),
                             rec("open", kAuxB, 16)};
    e.recommendations[118] = {rec("close", kBackup, 118), rec("close", kPorv, 118), rec("open", kAuxA, 118),
                              rec("open", kAuxB, 118), rec("turn_on", kHpi, 118)};
    e.recommendations[8521] = {rec("close", kBackup, 8521), rec("close", kPorv, 8521), rec("turn_on", kHpi, 8521)};

    auto shortage = [](long long t) {
        const auto ts = std::to_string(t);
        return std::vector<std::string>{atom("closed", {kAuxA, ts}), atom("closed", {kAuxB, ts}),
                                        atom("lack_of_water_supply", {"secondary_loop_A", ts}),
                                        atom("lack_of_water_supply", {"secondary_loop_B", ts})};
    };
    e.inferred_vars[2] = shortage(2);
    e.inferred_vars[18] = shortage(18);
    e.inferred_vars[18].push_back(atom("stuck_open", {kPorv, "18"}));
    e.inferred_vars[847] = shortage(847);
    e.inferred_vars[847].push_back("steam(primary_loop_A,847)");
    e.inferred_vars[847].push_back(atom("stuck_open", {kPorv, "847"}));
    e.inferred_vars[8521] = {atom("stuck_open", {kPorv, "8521"})};

    e.inferred_actions = {
        "it_happened(trip,condensate_pump_a,1)",
        "it_happened(trip,condensate_pump_b,1)",
        "it_happened(trip,feedwater_pump_a,2)",
        "it_happened(trip,feedwater_pump_b,2)",
        "it_happened(trip,turbine1,2)",
        "it_happened(start,auxiliary_feedwater_pump_a,2)",
        "it_happened(start,auxiliary_feedwater_pump_b,2)",
        "it_happened(trip,reactor1,11)",
        "it_happened(start,high_pressure_injection_pump,122)",
        "it_happened(trip,high_pressure_injection_pump,278)",
        "it_happened(trip,primary_pump_a,4403)",
        "it_happened(trip,primary_pump_b,6037)",
    };

    {
        const std::string root = "it_happened(trip,condensate_pump_a,1)";
        Builder b(root);
        b.fact(root, "pump(condensate_pump_a)")
            .fact(root, "time(1)")
            .fact(root, "pump_flow(condensate_pump_a,100,0)")
            .fact(root, "pump_flow(condensate_pump_a,0,1)")
            .comparison(root, "100>0");
        e.graphs.push_back({"figure6_left", 60, root, 8521, {b.done()}, {"figure6_left"}});
    }
    {
        const std::string root = "steam(primary_loop_A,901)";
        Builder b(root);
        b.fact(root, "anytime(901)")
            .fact(root, "inlet_temperature_a(573,901)")
            .fact(root, "primary_loop_pressure(1213,901)")
            .fact(root, "saturation(573,1258)")
            .comparison(root, "1213<1258");
        e.graphs.push_back({"figure6_right", 960, root, 8521, {b.done()}, {"figure6_right"}});
    }
    {
        auto via_condensate = open_valve_graph("condensate_pump", "condensate_pump_a", 1);
        auto via_feedwater = open_valve_graph("feedwater_pump", "feedwater_pump_a", 2);
        PinnedGraphs pg{"figure7_8", 1260, rec("open", kAuxA, 1201), kGraphProfileRange, {}, {}};
        if (canonical_less(via_feedwater, via_condensate)) {
            pg.graphs = {via_feedwater, via_condensate};
            pg.figures = {"figure8", "figure7"};
        } else {
            pg.graphs = {via_condensate, via_feedwater};
            pg.figures = {"figure7", "figure8"};
        }
        e.graphs.push_back(std::move(pg));
    }
    return e;
}

std::string lines(const std::map<long long, std::vector<std::string>>& by_time) {
    std::string out;
    for (const auto& [t, atoms] : by_time)
        for (const auto& a : atoms) out += a + "\n";
    return out;
}

}  // namespace

const ExpectedOutputs& expected_outputs() {
    static const ExpectedOutputs e = build_expected();
    return e;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Internal, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> tmi2_fixture_files() {
    const auto s = synthesize_tmi2();
    const auto& e = expected_outputs();
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("sensors.csv", sensors_csv(s.sensors));
    files.emplace_back("actions.csv", actions_csv(s.actions));
    files.emplace_back("expected/figure4a.txt", lines(e.recommendations));
    files.emplace_back("expected/figure4b.txt", lines(e.inferred_vars));
    std::string fig5;
    for (const auto& a : e.inferred_actions) fig5 += a + "\n";
    files.emplace_back("expected/figure5.txt", fig5);
    for (const auto& pg : e.graphs)
        for (std::size_t i = 0; i < pg.graphs.size(); ++i)
            files.emplace_back("expected/graphs/" + pg.figures[i] + ".json", to_json(pg.graphs[i]) + "\n");
    std::string meta =
        "# Synthetic traces, not instrument data. The waypoints pin the times and values\n"
        "# required by the event log and the reported atoms; between waypoints values are\n"
        "# linear with floor rounding, and flat after the last one.\n";
    for (const auto& tr : tmi2_traces()) {
        meta += tr.variable + ":";
        for (const auto& w : tr.points) meta += " " + std::to_string(w.time) + "=" + std::to_string(w.value);
        meta += "\n";
    }
    files.emplace_back("metadata.txt", meta);
    KbConfig profile;
    profile.action_execution_time_range = kGraphProfileRange;
    files.emplace_back("profile_graphs.conf",
                       "# Profile for the t=1201 open-valve graphs; the default range suppresses them.\n" +
                           profile.to_text());
    std::sort(files.begin(), files.end());
    std::string manifest;
    for (const auto& [path, content] : files) manifest += sha256_hex(content) + "  " + path + "\n";
    files.emplace_back("MANIFEST.sha256", manifest);
    return files;
}

namespace {

std::string read_fixture(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> atom_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

}  // namespace

FixtureReport check_fixtures(const std::filesystem::path& dir) {
    FixtureReport r;
    auto check = [&](bool ok, const std::string& what) { (ok ? r.passed : r.failures).push_back(what); };
    auto guarded = [&](const std::string& what, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            r.failures.push_back(what + ": " + e.what());
        }
    };

    guarded("manifest", [&] {
        std::istringstream manifest(read_fixture(dir / "MANIFEST.sha256"));
        std::string hash, path;
        int listed = 0;
        while (manifest >> hash >> path) {
            check(sha256_hex(read_fixture(dir / path)) == hash, "checksum " + path);
            ++listed;
        }
        check(listed > 0, "manifest lists files");
    });
    guarded("generator", [&] {
        for (const auto& [path, content] : tmi2_fixture_files())
            check(read_fixture(dir / path) == content, "generated " + path);
    });

    guarded("replay", [&] {
        const auto sensors = ingest_sensors(read_fixture(dir / "sensors.csv"));
        const auto actions = ingest_actions(read_fixture(dir / "actions.csv"));
        const auto result = replay(build_kb(), sensors, actions, {60, kTmi2Horizon});
        check(result.outputs.size() == 142, "142 windows");
        std::set<std::string> recs, vars, acts;
        for (const auto& o : result.outputs) {
            recs.insert(o.recommendations.begin(), o.recommendations.end());
            vars.insert(o.inferred_vars.begin(), o.inferred_vars.end());
            acts.insert(o.inferred_actions.begin(), o.inferred_actions.end());
        }
        const auto fig5 = atom_lines(read_fixture(dir / "expected/figure5.txt"));
        check(acts == std::set<std::string>(fig5.begin(), fig5.end()), "inferred actions equal figure5.txt");
        bool all = true;
        for (const auto& a : atom_lines(read_fixture(dir / "expected/figure4a.txt"))) all = all && recs.count(a);
        check(all, "figure4a.txt recommendations derived");
        all = true;
        for (const auto& a : atom_lines(read_fixture(dir / "expected/figure4b.txt"))) all = all && vars.count(a);
        check(all, "figure4b.txt variables derived");
        bool late_open = false;
        for (const auto& a : recs) {
            const auto g = parse_ground_atom(a);
            late_open = late_open || (g.args[0].to_string() == "open" && g.args[2].as_integer() > 500);
        }
        check(!late_open, "no open-valve recommendation after 500");

        for (const auto& pg : expected_outputs().graphs) {
            KbConfig cfg;
            if (pg.action_execution_time_range != cfg.action_execution_time_range)
                cfg = KbConfig::load(dir / "profile_graphs.conf");
            const Program kb = build_kb(cfg);
            const auto events = cfg == KbConfig{} ? result.events
                                                  : replay(kb, sensors, actions, {60, kTmi2Horizon}).events;
            const auto ev = evaluate_window(kb, window_slice(SensorStore(sensors), actions, events, pg.window_end));
            auto got = Explainer(ev.program, ev.answer_set).explain(pg.atom).graphs;
            std::sort(got.begin(), got.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });
            bool same = got.size() == pg.graphs.size();
            for (std::size_t i = 0; same && i < got.size(); ++i) {
                const auto want = graph_from_json(read_fixture(dir / ("expected/graphs/" + pg.figures[i] + ".json")));
                same = same_structure(got[i], want);
            }
            check(same, "graphs of " + pg.atom + " at window " + std::to_string(pg.window_end));
        }
    });
    return r;
}

}  // namespace nppx
