#pragma once

// Sensor and action streams, sliding windows and per-window diagnosis.

#include "nppx/engine.hpp"
#include "nppx/rulelang.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nppx {

struct SensorSample {
    long long time = 0;
    std::string variable;
    long long value = 0;

    bool operator==(const SensorSample&) const = default;
};

struct AttemptedAction {
    long long time = 0;
    std::string procedure;
    std::string component;

    /// attempted(procedure,component,time)
    GroundAtom atom() const;
    bool operator==(const AttemptedAction&) const = default;
};

/// CSV with header `time,variable,value`; result sorted by (time, variable).
std::vector<SensorSample> ingest_sensors(std::string_view csv);
/// CSV with header `time,procedure,component`; result sorted by time (stable).
std::vector<AttemptedAction> ingest_actions(std::string_view csv);
std::string sensors_csv(std::span<const SensorSample> samples);
std::string actions_csv(std::span<const AttemptedAction> actions);

/// Per-variable series with zero-order hold lookup.
class SensorStore {
public:
    SensorStore() = default;
    explicit SensorStore(std::span<const SensorSample> samples);

    /// Latest value at or before `time`; nullopt before the first sample.
    std::optional<long long> value_at(std::string_view variable, long long time) const;
    /// Raw samples of one variable within [from, to].
    std::vector<std::pair<long long, long long>> series(std::string_view variable, long long from, long long to) const;
    bool has_variable(std::string_view variable) const;
    long long last_time() const { return last_time_; }

private:
    std::map<std::string, std::vector<std::pair<long long, long long>>, std::less<>> series_;
    long long last_time_ = -1;
};

/// Window ends step, 2*step, ..., k*step for k < horizon/step, then horizon.
/// With step 60 and horizon 8521 that is 60..8460 and 8521 (142 windows).
/// Empty when horizon <= 0.
std::vector<long long> window_schedule(long long step, long long horizon);

/// First second of the index-th window: the end minus 59, or earlier when the
/// previous window ended before that. The final window of the default
/// schedule is [8461, 8521], so no second after the first window is skipped.
long long window_start(std::span<const long long> schedule, std::size_t index);

struct WindowSlice {
    long long lo = 0;
    long long hi = 0;
    /// time/anytime facts, sensor facts over [lo-1, hi], attempts up to hi
    /// and persisted events before lo.
    std::vector<GroundAtom> facts;

    bool operator==(const WindowSlice&) const = default;
};

/// Persisted it_happened atoms, in insertion order without duplicates.
class EventStore {
public:
    /// True when the atom was new.
    bool add(const GroundAtom& atom);
    const std::vector<GroundAtom>& events() const { return events_; }
    std::vector<GroundAtom> up_to(long long time) const;
    std::size_t size() const { return events_.size(); }
    bool operator==(const EventStore& o) const { return events_ == o.events_; }

private:
    std::vector<GroundAtom> events_;
};

/// Slice of the window [max(0, t-59), t].
WindowSlice window_slice(const SensorStore& sensors, std::span<const AttemptedAction> actions,
                         const EventStore& persisted, long long t);
WindowSlice window_slice(const SensorStore& sensors, std::span<const AttemptedAction> actions,
                         const EventStore& persisted, long long lo, long long hi);

struct DiagnosisOutput {
    long long window_end = 0;
    long long window_start = 0;
    std::vector<std::string> recommendations;   // recommendation/3
    std::vector<std::string> inferred_vars;     // allow-listed non-observed predicates
    std::vector<std::string> inferred_actions;  // it_happened/3 derived in this window
    std::vector<std::string> other_atoms;       // everything else, filled only when verbose

    bool operator==(const DiagnosisOutput&) const = default;
};

/// Predicates reported as inferred variables.
const std::vector<std::string>& inferred_variable_predicates();

struct WindowEvaluation {
    DiagnosisOutput output;
    GroundProgram program;
    Interpretation answer_set;
    std::vector<GroundAtom> events;  // it_happened atoms derived in this window
};

WindowEvaluation evaluate_window(const Program& kb, const WindowSlice& slice, bool verbose = false);

struct ReplayOptions {
    long long step = 60;
    long long horizon = 8521;
    bool concurrent = false;
    unsigned threads = 0;  // 0: hardware concurrency
    bool verbose = false;
};

struct ReplayResult {
    std::vector<DiagnosisOutput> outputs;
    EventStore events;
};

ReplayResult replay(const Program& kb, std::span<const SensorSample> sensors, std::span<const AttemptedAction> actions,
                    const ReplayOptions& options = {});

/// {"format_version":1,"window_end":..,"window_start":..,"recommendations":[..],
///  "inferred_vars":[..],"inferred_actions":[..]} (+ "other_atoms" when present)
std::string to_json(const DiagnosisOutput& out);
DiagnosisOutput diagnosis_from_json(std::string_view text);
/// One "window_end atom" line per atom, sorted.
std::string to_text(const DiagnosisOutput& out);

}  // namespace nppx
