#pragma once

// The TMI-2 scenario: synthetic sensor traces pinned to the reported
// waypoints, the attempted actions, and the expected outputs.

#include "nppx/explain.hpp"
#include "nppx/npp_kb.hpp"
#include "nppx/replay.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace nppx {

struct ScenarioEvent {
    long long time = 0;         // as reported in the event log
    std::string description;
    long long observed_at = 0;  // where the traces show it (edge or crossing)
    std::vector<std::string> streams;
};

/// The 15 rows of the accident's key sequence of events.
const std::vector<ScenarioEvent>& tmi2_events();

struct Waypoint {
    long long time;
    long long value;
};

/// Integer piecewise-linear trace: between waypoints the value is
/// v0 + floor((v1 - v0) * (t - t0) / (t1 - t0)); flat after the last one.
struct Trace {
    std::string variable;
    std::vector<Waypoint> points;

    long long value_at(long long t) const;
};

/// One trace per bound variable, in binding order.
const std::vector<Trace>& tmi2_traces();
const std::vector<AttemptedAction>& tmi2_actions();

constexpr long long kTmi2Horizon = 8521;

struct SynthesizedScenario {
    /// Only change points (plus t=0); zero-order hold restores every second.
    std::vector<SensorSample> sensors;
    std::vector<AttemptedAction> actions;
};

/// Throws InvalidArgument when a threshold of `cfg` would move one of the
/// pinned crossings (e.g. a closure setpoint the trace never crosses at t=16).
SynthesizedScenario synthesize_tmi2(const KbConfig& cfg = {});

struct PinnedGraphs {
    std::string name;
    long long window_end = 0;
    std::string atom;
    long long action_execution_time_range = 8521;  // profile the graph was taken under
    std::vector<ExplanationGraph> graphs;          // canonical, in canonical order
    std::vector<std::string> figures;              // fixture file stem per graph
};

struct ExpectedOutputs {
    std::map<long long, std::vector<std::string>> recommendations;  // time -> atoms
    std::map<long long, std::vector<std::string>> inferred_vars;
    std::vector<std::string> inferred_actions;
    std::vector<PinnedGraphs> graphs;
};

const ExpectedOutputs& expected_outputs();

/// Action-execution range under which the t=1201 recommendation is not
/// suppressed (the default range suppresses it).
constexpr long long kGraphProfileRange = 600;

/// Relative path -> content for every file under scenario/tmi2/, including
/// MANIFEST.sha256 (sha256sum format, sorted by path).
std::vector<std::pair<std::string, std::string>> tmi2_fixture_files();

std::string sha256_hex(std::string_view data);

struct FixtureReport {
    std::vector<std::string> passed;
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};

/// Checks a fixture directory: manifest checksums, files equal to what the
/// generator produces, and a replay of its streams against the expected atoms
/// and graphs.
FixtureReport check_fixtures(const std::filesystem::path& dir);

}  // namespace nppx
