#include "nppx/replay.hpp"
#include "nppx/error.hpp"
#include "nppx/npp_kb.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

namespace nppx {

GroundAtom AttemptedAction::atom() const {
    return GroundAtom{Symbol::intern("attempted"),
                      {Value::symbol(procedure), Value::symbol(component), Value::integer(time)}};
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits CSV text into trimmed fields per non-empty line; checks the header.
std::vector<std::pair<int, std::vector<std::string_view>>> csv_rows(std::string_view text, std::string_view header) {
    std::vector<std::pair<int, std::vector<std::string_view>>> rows;
    int line_no = 0;
    bool seen_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        if (!seen_header) {
            if (line != header)
                throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(line_no) + ": expected header '" +
                                                            std::string(header) + "'");
            seen_header = true;
            continue;
        }
        std::vector<std::string_view> fields;
        for (std::size_t start = 0;;) {
            const auto comma = line.find(',', start);
            fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 3)
            throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(line_no) + ": expected 3 fields");
        rows.emplace_back(line_no, std::move(fields));
    }
    if (!seen_header) throw Error(ErrorKind::InvalidArgument, "missing header '" + std::string(header) + "'");
    return rows;
}

long long to_integer(std::string_view s, int line_no, const char* what) {
    long long v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
        throw Error(ErrorKind::InvalidArgument,
                    "line " + std::to_string(line_no) + ": " + what + " is not an integer: '" + std::string(s) + "'");
    return v;
}

bool is_identifier(std::string_view s) {
    if (s.empty() || !(s[0] >= 'a' && s[0] <= 'z')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

}  // namespace

std::vector<SensorSample> ingest_sensors(std::string_view csv) {
    std::vector<SensorSample> out;
    for (const auto& [line_no, f] : csv_rows(csv, "time,variable,value")) {
        SensorSample s;
        s.time = to_integer(f[0], line_no, "time");
        if (s.time < 0) throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(line_no) + ": negative time");
        if (!find_binding(f[1]))
            throw Error(ErrorKind::InvalidArgument,
                        "line " + std::to_string(line_no) + ": unknown variable '" + std::string(f[1]) + "'");
        s.variable = std::string(f[1]);
        s.value = to_integer(f[2], line_no, "value");
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const SensorSample& a, const SensorSample& b) {
        return std::tie(a.time, a.variable) < std::tie(b.time, b.variable);
    });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].time == out[i - 1].time && out[i].variable == out[i - 1].variable)
            throw Error(ErrorKind::InvalidArgument, "duplicate sample for " + out[i].variable + " at time " +
                                                        std::to_string(out[i].time));
    return out;
}

std::vector<AttemptedAction> ingest_actions(std::string_view csv) {
    std::vector<AttemptedAction> out;
    for (const auto& [line_no, f] : csv_rows(csv, "time,procedure,component")) {
        AttemptedAction a;
        a.time = to_integer(f[0], line_no, "time");
        if (a.time < 0) throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(line_no) + ": negative time");
        if (!is_identifier(f[1]) || !is_identifier(f[2]))
            throw Error(ErrorKind::InvalidArgument,
                        "line " + std::to_string(line_no) + ": procedure and component must be lowercase identifiers");
        a.procedure = std::string(f[1]);
        a.component = std::string(f[2]);
        out.push_back(std::move(a));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    return out;
}

std::string sensors_csv(std::span<const SensorSample> samples) {
    std::string out = "time,variable,value\n";
    for (const auto& s : samples)
        out += std::to_string(s.time) + "," + s.variable + "," + std::to_string(s.value) + "\n";
    return out;
}

std::string actions_csv(std::span<const AttemptedAction> actions) {
    std::string out = "time,procedure,component\n";
    for (const auto& a : actions) out += std::to_string(a.time) + "," + a.procedure + "," + a.component + "\n";
    return out;
}

SensorStore::SensorStore(std::span<const SensorSample> samples) {
    for (const auto& s : samples) {
        series_[s.variable].emplace_back(s.time, s.value);
        last_time_ = std::max(last_time_, s.time);
    }
    for (auto& [name, v] : series_) std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first < b.first; });
}

std::optional<long long> SensorStore::value_at(std::string_view variable, long long time) const {
    auto it = series_.find(variable);
    if (it == series_.end()) return std::nullopt;
    const auto& v = it->second;
    auto pos = std::upper_bound(v.begin(), v.end(), time, [](long long t, const auto& p) { return t < p.first; });
    if (pos == v.begin()) return std::nullopt;
    return std::prev(pos)->second;
}

std::vector<std::pair<long long, long long>> SensorStore::series(std::string_view variable, long long from,
                                                                 long long to) const {
    std::vector<std::pair<long long, long long>> out;
    auto it = series_.find(variable);
    if (it == series_.end()) return out;
    for (const auto& p : it->second)
        if (p.first >= from && p.first <= to) out.push_back(p);
    return out;
}

bool SensorStore::has_variable(std::string_view variable) const { return series_.count(variable) > 0; }

std::vector<long long> window_schedule(long long step, long long horizon) {
    if (step < 1) throw Error(ErrorKind::InvalidArgument, "step must be at least 1");
    std::vector<long long> out;
    if (horizon <= 0) return out;
    // The last window ends at the horizon; when horizon/step is not whole, the
    // seconds between the previous window and its start get no time(T) fact.
    for (long long k = 1; k < horizon / step; ++k) out.push_back(k * step);
    out.push_back(horizon);
    return out;
}

bool EventStore::add(const GroundAtom& atom) {
    if (std::find(events_.begin(), events_.end(), atom) != events_.end()) return false;
    events_.push_back(atom);
    return true;
}

namespace {

long long atom_time(const GroundAtom& a) {
    if (a.args.empty() || !a.args.back().is_integer()) return -1;
    return a.args.back().as_integer();
}

}  // namespace

std::vector<GroundAtom> EventStore::up_to(long long time) const {
    std::vector<GroundAtom> out;
    for (const auto& e : events_)
        if (atom_time(e) <= time) out.push_back(e);
    return out;
}

long long window_start(std::span<const long long> schedule, std::size_t index) {
    if (index >= schedule.size()) throw Error(ErrorKind::InvalidArgument, "window index out of range");
    const long long hi = schedule[index];
    const long long previous_end = index == 0 ? 0 : schedule[index - 1];
    return std::max(0LL, std::min(hi - 59, previous_end + 1));
}

WindowSlice window_slice(const SensorStore& sensors, std::span<const AttemptedAction> actions,
                         const EventStore& persisted, long long t) {
    return window_slice(sensors, actions, persisted, std::max(0LL, t - 59), t);
}

WindowSlice window_slice(const SensorStore& sensors, std::span<const AttemptedAction> actions,
                         const EventStore& persisted, long long lo, long long hi) {
    if (lo < 0 || hi < lo) throw Error(ErrorKind::InvalidArgument, "window bounds must satisfy 0 <= lo <= hi");
    WindowSlice s;
    s.hi = hi;
    s.lo = lo;
    const auto time = Symbol::intern("time");
    const auto anytime = Symbol::intern("anytime");
    for (long long x = s.lo; x <= s.hi; ++x) s.facts.push_back({time, {Value::integer(x)}});
    for (long long x = 0; x <= s.hi; ++x) s.facts.push_back({anytime, {Value::integer(x)}});
    // One sample before the window so edge rules can look at T-1 at T=lo.
    for (long long x = std::max(0LL, s.lo - 1); x <= s.hi; ++x)
        for (const auto& b : variable_bindings())
            if (auto v = sensors.value_at(b.stream, x)) s.facts.push_back(sensor_atom(b, *v, x));
    for (const auto& a : actions)
        if (a.time <= s.hi) s.facts.push_back(a.atom());
    // Events inside the window are derived again, so only earlier ones are
    // facts. This also makes the slice independent of later windows.
    if (s.lo > 0)
        for (const auto& e : persisted.up_to(s.lo - 1)) s.facts.push_back(e);
    return s;
}

const std::vector<std::string>& inferred_variable_predicates() {
    static const std::vector<std::string> preds{"closed", "lack_of_water_supply", "leakage", "steam", "stuck_open"};
    return preds;
}

WindowEvaluation evaluate_window(const Program& kb, const WindowSlice& slice, bool verbose) {
    GroundProgram gp = ground(kb, slice.facts);
    auto sets = answer_sets(gp, 1);
    if (sets.empty())
        throw Error(ErrorKind::Conflict, "window " + std::to_string(slice.hi) + " has no answer set");
    WindowEvaluation ev{{}, std::move(gp), std::move(sets.front()), {}};
    ev.output.window_end = slice.hi;
    ev.output.window_start = slice.lo;
    const auto& vars = inferred_variable_predicates();
    for (const auto& atom : sorted_atoms(ev.program, ev.answer_set)) {
        const std::string& pred = atom.predicate.name();
        if (pred == "recommendation" && atom.args.size() == 3) {
            ev.output.recommendations.push_back(atom.to_string());
        } else if (pred == "it_happened" && atom.args.size() == 3) {
            // Events of earlier windows are facts here and are not reported again.
            if (atom_time(atom) < slice.lo) {
                if (verbose) ev.output.other_atoms.push_back(atom.to_string());
                continue;
            }
            ev.output.inferred_actions.push_back(atom.to_string());
            ev.events.push_back(atom);
        } else if (std::find(vars.begin(), vars.end(), pred) != vars.end()) {
            ev.output.inferred_vars.push_back(atom.to_string());
        } else if (verbose) {
            ev.output.other_atoms.push_back(atom.to_string());
        }
    }
    return ev;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

ReplayResult replay(const Program& kb, std::span<const SensorSample> sensors, std::span<const AttemptedAction> actions,
                    const ReplayOptions& options) {
    const auto schedule = window_schedule(options.step, options.horizon);
    const SensorStore store(sensors);
    ReplayResult result;

    if (!options.concurrent) {
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            auto ev = evaluate_window(kb, window_slice(store, actions, result.events, window_start(schedule, i), schedule[i]),
                                      options.verbose);
            for (const auto& e : ev.events) result.events.add(e);
            result.outputs.push_back(std::move(ev.output));
        }
        return result;
    }

    // Every window is evaluated against the event store of the previous
    // round until the store stops changing.
    EventStore store_in;
    for (std::size_t round = 0; round <= schedule.size(); ++round) {
        std::vector<WindowEvaluation> evs(schedule.size());
        std::vector<DiagnosisOutput> outputs(schedule.size());
        std::vector<std::vector<GroundAtom>> events(schedule.size());
        parallel_for(schedule.size(), options.threads, [&](std::size_t i) {
            auto ev = evaluate_window(kb, window_slice(store, actions, store_in, window_start(schedule, i), schedule[i]),
                                      options.verbose);
            outputs[i] = std::move(ev.output);
            events[i] = std::move(ev.events);
        });
        EventStore store_out;
        for (const auto& es : events)
            for (const auto& e : es) store_out.add(e);
        if (store_out == store_in) {
            result.outputs = std::move(outputs);
            result.events = std::move(store_out);
            return result;
        }
        store_in = std::move(store_out);
    }
    throw Error(ErrorKind::Internal, "concurrent replay did not converge");
}

std::string to_json(const DiagnosisOutput& out) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["window_end"] = out.window_end;
    doc["window_start"] = out.window_start;
    doc["recommendations"] = out.recommendations;
    doc["inferred_vars"] = out.inferred_vars;
    doc["inferred_actions"] = out.inferred_actions;
    if (!out.other_atoms.empty()) doc["other_atoms"] = out.other_atoms;
    return doc.dump();
}

DiagnosisOutput diagnosis_from_json(std::string_view text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.value("format_version", 0) != 1)
            throw Error(ErrorKind::InvalidArgument, "unsupported window document version");
        DiagnosisOutput out;
        out.window_end = doc.at("window_end").get<long long>();
        out.window_start = doc.at("window_start").get<long long>();
        out.recommendations = doc.at("recommendations").get<std::vector<std::string>>();
        out.inferred_vars = doc.at("inferred_vars").get<std::vector<std::string>>();
        out.inferred_actions = doc.at("inferred_actions").get<std::vector<std::string>>();
        if (doc.contains("other_atoms")) out.other_atoms = doc.at("other_atoms").get<std::vector<std::string>>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed window document: ") + e.what());
    }
}

std::string to_text(const DiagnosisOutput& out) {
    std::vector<std::string> lines;
    const auto prefix = std::to_string(out.window_end) + " ";
    for (const auto* group : {&out.recommendations, &out.inferred_vars, &out.inferred_actions, &out.other_atoms})
        for (const auto& a : *group) lines.push_back(prefix + a);
    std::sort(lines.begin(), lines.end());
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    return text;
}

}  // namespace nppx
