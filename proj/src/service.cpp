#include "nppx/service.hpp"
#include "nppx/error.hpp"
#include "nppx/scenario.hpp"

#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

#include <spdlog/spdlog.h>

namespace nppx {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Slices on the wire: time/anytime facts follow from the bounds.

bool is_clock_fact(const GroundAtom& a) {
    return a.args.size() == 1 && (a.predicate.name() == "time" || a.predicate.name() == "anytime");
}

json slice_json(const WindowSlice& s) {
    json facts = json::array();
    for (const auto& f : s.facts)
        if (!is_clock_fact(f)) facts.push_back(f.to_string());
    return json{{"window_start", s.lo}, {"window_end", s.hi}, {"facts", std::move(facts)}};
}

WindowSlice slice_from_json(const json& j) {
    WindowSlice s;
    s.lo = j.at("window_start").get<long long>();
    s.hi = j.at("window_end").get<long long>();
    if (s.lo < 0 || s.hi < s.lo) throw Error(ErrorKind::InvalidArgument, "bad window bounds");
    const auto time = Symbol::intern("time");
    const auto anytime = Symbol::intern("anytime");
    for (long long x = s.lo; x <= s.hi; ++x) s.facts.push_back({time, {Value::integer(x)}});
    for (long long x = 0; x <= s.hi; ++x) s.facts.push_back({anytime, {Value::integer(x)}});
    for (const auto& f : j.at("facts")) s.facts.push_back(parse_ground_atom(f.get<std::string>()));
    return s;
}

json graph_json(const ExplanationGraph& g) { return json::parse(to_json(g)); }

template <class Fn>
auto parse_document(std::string_view text, const char* what, Fn&& fn) {
    try {
        return fn(json::parse(text));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

std::string to_json(const ExplainRequest& req) {
    json j{{"id", req.id}, {"window_end", req.window_end}, {"atoms", req.atoms}};
    if (req.slice) j["slice"] = slice_json(*req.slice);
    return j.dump();
}

ExplainRequest explain_request_from_json(std::string_view text) {
    return parse_document(text, "explain request", [](const json& j) {
        if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "malformed explain request: not an object");
        ExplainRequest req;
        req.id = j.at("id").get<long long>();
        req.window_end = j.at("window_end").get<long long>();
        if (j.contains("atoms")) req.atoms = j.at("atoms").get<std::vector<std::string>>();
        if (j.contains("slice")) {
            req.slice = slice_from_json(j.at("slice"));
            if (req.slice->hi != req.window_end)
                throw Error(ErrorKind::InvalidArgument, "slice does not belong to window_end");
        }
        return req;
    });
}

std::string to_json(const ExplainResponse& resp) {
    json atoms = json::array();
    for (const auto& a : resp.atoms) {
        json graphs = json::array();
        for (const auto& g : a.graphs) graphs.push_back(graph_json(g));
        json item{{"atom", a.atom}, {"graphs", std::move(graphs)}, {"truncated", a.truncated}};
        if (!a.error.empty()) item["error"] = a.error;
        atoms.push_back(std::move(item));
    }
    json j{{"id", resp.id}, {"window_end", resp.window_end}, {"atoms", std::move(atoms)}};
    if (!resp.error.empty()) j["error"] = resp.error;
    return j.dump();
}

ExplainResponse explain_response_from_json(std::string_view text) {
    return parse_document(text, "explain response", [](const json& j) {
        ExplainResponse resp;
        resp.id = j.at("id").get<long long>();
        resp.window_end = j.at("window_end").get<long long>();
        resp.error = j.value("error", "");
        for (const auto& item : j.at("atoms")) {
            AtomExplanation a;
            a.atom = item.at("atom").get<std::string>();
            a.truncated = item.at("truncated").get<bool>();
            a.error = item.value("error", "");
            for (const auto& g : item.at("graphs")) a.graphs.push_back(graph_from_json(g.dump()));
            resp.atoms.push_back(std::move(a));
        }
        return resp;
    });
}

std::optional<long long> salvage_request_id(std::string_view text) {
    try {
        const auto j = json::parse(text);
        if (j.is_object() && j.contains("id") && j["id"].is_number_integer()) return j["id"].get<long long>();
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

ExplainResponse answer_request(const Program& kb, const ExplainRequest& req, const SliceLookup& lookup,
                               const ExplainOptions& options) {
    ExplainResponse resp;
    resp.id = req.id;
    resp.window_end = req.window_end;
    std::optional<WindowEvaluation> ev;
    try {
        WindowSlice slice;
        if (req.slice) {
            slice = *req.slice;
        } else if (lookup) {
            slice = lookup(req.window_end);
        } else {
            throw Error(ErrorKind::InvalidArgument, "request carries no window facts");
        }
        ev = evaluate_window(kb, slice);
    } catch (const std::exception& e) {
        resp.error = e.what();
        return resp;
    }

    std::vector<std::string> atoms = req.atoms;
    if (atoms.empty()) {
        const auto& o = ev->output;
        for (const auto* list : {&o.recommendations, &o.inferred_vars, &o.inferred_actions})
            atoms.insert(atoms.end(), list->begin(), list->end());
    }
    std::optional<Explainer> explainer;
    std::string setup_error;
    try {
        explainer.emplace(ev->program, ev->answer_set);
    } catch (const std::exception& e) {
        setup_error = e.what();
    }
    for (const auto& text : atoms) {
        AtomExplanation item;
        item.atom = text;
        try {
            if (!explainer) throw Error(ErrorKind::Internal, setup_error);
            item.atom = parse_ground_atom(text).to_string();
            auto set = explainer->explain(item.atom, options);
            item.graphs = std::move(set.graphs);
            item.truncated = set.truncated;
        } catch (const std::exception& e) {
            item.error = e.what();
        }
        resp.atoms.push_back(std::move(item));
    }
    return resp;
}

// ---------------------------------------------------------------------------
// Worker

ExplanationWorker::ExplanationWorker(Program kb, SliceLookup lookup, WorkerOptions options, Respond respond)
    : kb_(std::move(kb)), lookup_(std::move(lookup)), options_(options), respond_(std::move(respond)) {
    thread_ = std::thread([this] { run(); });
}

ExplanationWorker::~ExplanationWorker() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
}

void ExplanationWorker::submit(ExplainRequest req) {
    {
        std::lock_guard lock(mu_);
        queue_.push_back({std::move(req), {}});
        max_depth_ = std::max(max_depth_, queue_.size());
    }
    cv_.notify_one();
}

void ExplanationWorker::submit_error(long long id, std::string message) {
    {
        std::lock_guard lock(mu_);
        Job job;
        job.req.id = id;
        job.error = std::move(message);
        queue_.push_back(std::move(job));
        max_depth_ = std::max(max_depth_, queue_.size());
    }
    cv_.notify_one();
}

std::size_t ExplanationWorker::queue_depth() const {
    std::lock_guard lock(mu_);
    return queue_.size();
}

std::size_t ExplanationWorker::max_queue_depth() const {
    std::lock_guard lock(mu_);
    return max_depth_;
}

void ExplanationWorker::drain() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void ExplanationWorker::run() {
    for (;;) {
        Job job;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
            // Stop only once the queue is empty: no request is dropped.
            if (queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop_front();
            busy_ = true;
        }
        if (options_.delay.count() > 0) std::this_thread::sleep_for(options_.delay);
        ExplainResponse resp;
        if (!job.error.empty()) {
            resp.id = job.req.id;
            resp.error = job.error;
        } else {
            resp = answer_request(kb_, job.req, lookup_, options_.explain);
        }
        try {
            respond_(resp);
        } catch (const std::exception& e) {
            spdlog::error("explanation worker: cannot deliver response {}: {}", resp.id, e.what());
        }
        {
            std::lock_guard lock(mu_);
            busy_ = false;
        }
        idle_cv_.notify_all();
    }
}

// ---------------------------------------------------------------------------
// Sockets

namespace {

void write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorKind::Io, std::string("socket write failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    /// False at end of stream. A trailing line without newline still counts.
    bool next(std::string& line) {
        for (;;) {
            const auto nl = buf_.find('\n', scanned_);
            if (nl != std::string::npos) {
                line.assign(buf_, 0, nl);
                buf_.erase(0, nl + 1);
                scanned_ = 0;
                return true;
            }
            scanned_ = buf_.size();
            char chunk[65536];
            const ssize_t n = ::read(fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                if (buf_.empty()) return false;
                line = std::move(buf_);
                buf_.clear();
                scanned_ = 0;
                return true;
            }
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_;
    std::string buf_;
    std::size_t scanned_ = 0;
};

sockaddr_un unix_address(const fs::path& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    const std::string p = path.string();
    if (p.size() >= sizeof addr.sun_path) throw Error(ErrorKind::InvalidArgument, "socket path too long: " + p);
    std::memcpy(addr.sun_path, p.c_str(), p.size() + 1);
    return addr;
}

Program load_rules(const KbConfig& config, const std::optional<fs::path>& rules_dir) {
    return rules_dir ? load_kb_dir(*rules_dir, config) : build_kb(config);
}

class Fd {
public:
    explicit Fd(int fd = -1) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    int get() const { return fd_; }
    int release() { return std::exchange(fd_, -1); }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_;
};

}  // namespace

int serve_explanations(int fd, const ExplanationProcessOptions& options) {
    // On Linux this applies to the calling thread; the worker inherits it.
    if (options.niceness != 0 && ::setpriority(PRIO_PROCESS, 0, options.niceness) != 0)
        spdlog::debug("cannot lower explanation priority: {}", std::strerror(errno));
    std::mutex write_mu;
    {
        ExplanationWorker worker(load_rules(options.config, options.rules_dir), {}, options.worker,
                                 [&](const ExplainResponse& resp) {
                                     std::lock_guard lock(write_mu);
                                     write_all(fd, to_json(resp) + "\n");
                                 });
        LineReader reader(fd);
        std::string line;
        while (reader.next(line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                worker.submit(explain_request_from_json(line));
            } catch (const std::exception& e) {
                worker.submit_error(salvage_request_id(line).value_or(-1), e.what());
            }
        }
        worker.drain();
    }
    ::shutdown(fd, SHUT_WR);
    return 0;
}

int run_explanation_process(const fs::path& socket_path, const ExplanationProcessOptions& options) {
    Fd listener(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (listener.get() < 0) throw Error(ErrorKind::Io, std::string("socket: ") + std::strerror(errno));
    const auto addr = unix_address(socket_path);
    ::unlink(addr.sun_path);
    if (::bind(listener.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(listener.get(), 1) < 0)
        throw Error(ErrorKind::Io, "cannot listen on " + socket_path.string() + ": " + std::strerror(errno));
    Fd peer;
    for (;;) {
        peer = Fd(::accept(listener.get(), nullptr, nullptr));
        if (peer.get() >= 0) break;
        if (errno != EINTR) throw Error(ErrorKind::Io, std::string("accept: ") + std::strerror(errno));
    }
    listener.reset();
    ::unlink(addr.sun_path);
    return serve_explanations(peer.get(), options);
}

namespace {

int connect_with_retry(const std::string& path, int attempts, std::chrono::milliseconds backoff) {
    const auto addr = unix_address(path);
    for (int i = 0; i < attempts; ++i) {
        Fd fd(::socket(AF_UNIX, SOCK_STREAM, 0));
        if (fd.get() >= 0 && ::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
            return fd.release();
        }
        spdlog::debug("explanation peer {} not reachable (attempt {} of {})", path, i + 1, attempts);
        if (i + 1 < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    return -1;
}

/// Outbound lines are written by their own thread so window evaluation never
/// waits for the socket.
class Sender {
public:
    explicit Sender(int fd) : fd_(fd), thread_([this] { run(); }) {}
    ~Sender() { close(); }

    void send(std::string line) {
        {
            std::lock_guard lock(mu_);
            queue_.push_back(std::move(line));
        }
        cv_.notify_one();
    }

    /// Flushes what is queued and joins.
    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_one();
        if (thread_.joinable()) thread_.join();
    }

private:
    void run() {
        for (;;) {
            std::string line;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
                if (queue_.empty()) return;
                line = std::move(queue_.front());
                queue_.pop_front();
            }
            if (failed_) continue;
            try {
                write_all(fd_, line);
            } catch (const std::exception& e) {
                spdlog::warn("explanation peer lost: {}", e.what());
                failed_ = true;
            }
        }
    }

    int fd_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    bool closed_ = false;
    bool failed_ = false;
    std::thread thread_;
};

}  // namespace

DiagnosisReport run_diagnosis_process(const Program& kb, std::span<const SensorSample> sensors,
                                      std::span<const AttemptedAction> actions,
                                      const DiagnosisProcessOptions& options) {
    DiagnosisReport report;
    const SensorStore store(sensors);
    const long long horizon = options.horizon.value_or(store.last_time());
    const auto schedule = window_schedule(options.step, horizon);

    Fd fd;
    std::thread local;
    if (options.endpoint == kSpawnLocal) {
        int pair[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM, 0, pair) < 0)
            throw Error(ErrorKind::Io, std::string("socketpair: ") + std::strerror(errno));
        fd = Fd(pair[0]);
        local = std::thread([peer = pair[1], opts = options.local] {
            try {
                serve_explanations(peer, opts);
            } catch (const std::exception& e) {
                spdlog::error("local explanation role failed: {}", e.what());
            }
            ::close(peer);
        });
    } else if (!options.endpoint.empty()) {
        fd = Fd(connect_with_retry(options.endpoint, std::max(1, options.connect_attempts), options.initial_backoff));
        if (fd.get() < 0) {
            spdlog::warn("explanation peer {} unreachable; continuing diagnosis-only", options.endpoint);
            report.degraded = true;
        }
    }

    // Response lines are only collected while windows are evaluated and
    // parsed at the end.
    std::vector<std::string> lines;
    std::thread receiver;
    std::optional<Sender> sender;
    if (fd.get() >= 0) {
        sender.emplace(fd.get());
        receiver = std::thread([&lines, in = fd.get()] {
            LineReader reader(in);
            std::string line;
            while (reader.next(line)) lines.push_back(std::move(line));
        });
    }

    EventStore events;
    long long next_id = 1;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const long long t = schedule[i];
        const auto start = std::chrono::steady_clock::now();
        auto slice = window_slice(store, actions, events, window_start(schedule, i), t);
        auto ev = evaluate_window(kb, slice);
        for (const auto& e : ev.events) events.add(e);
        report.diagnosis_time += std::chrono::steady_clock::now() - start;
        report.outputs.push_back(std::move(ev.output));
        if (sender) {
            ExplainRequest req;
            req.id = next_id++;
            req.window_end = t;
            req.slice = std::move(slice);
            report.request_ids.push_back(req.id);
            sender->send(to_json(req) + "\n");
        }
    }

    if (sender) {
        sender->close();
        ::shutdown(fd.get(), SHUT_WR);
        receiver.join();
    }
    if (local.joinable()) local.join();
    for (const auto& line : lines) {
        try {
            report.responses.push_back(explain_response_from_json(line));
        } catch (const std::exception& e) {
            spdlog::warn("unreadable explain response: {}", e.what());
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Sessions

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    out << text;
    if (!out.flush()) throw Error(ErrorKind::Io, "cannot write " + p.string());
}

/// Write then rename, so readers never see half a manifest.
void replace_text(const fs::path& p, std::string_view text) {
    fs::path tmp = p;
    tmp += ".tmp";
    write_text(tmp, text);
    fs::rename(tmp, p);
}

std::string window_file(long long window_end, long long revision) {
    char name[64];
    if (revision == 0)
        std::snprintf(name, sizeof name, "windows/w%06lld.json", window_end);
    else
        std::snprintf(name, sizeof name, "windows/w%06lld.r%lld.json", window_end, revision);
    return name;
}

json config_json(const KbConfig& cfg) {
    json j = json::object();
    std::istringstream in(cfg.to_text());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (value == "true" || value == "false")
            j[key] = value == "true";
        else
            j[key] = std::stoll(value);
    }
    return j;
}

json action_json(const AttemptedAction& a) {
    return json{{"time", a.time}, {"procedure", a.procedure}, {"component", a.component}};
}

bool is_lower_identifier(std::string_view s) {
    if (s.empty() || !(s[0] >= 'a' && s[0] <= 'z')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; });
}

std::string session_id(const SessionSpec& spec) {
    std::string key = spec.config.to_text();
    key += "\nstep=" + std::to_string(spec.step) + "\nhorizon=" + std::to_string(spec.horizon);
    key += "\nrules=" + (spec.rules_dir ? spec.rules_dir->string() : std::string("embedded"));
    key += "\n" + sensors_csv(spec.sensors) + actions_csv(spec.actions);
    return sha256_hex(key).substr(0, 16);
}

}  // namespace

Session::Session(SessionSpec spec, std::optional<fs::path> dir)
    : spec_(std::move(spec)),
      kb_(load_rules(spec_.config, spec_.rules_dir)),
      store_(spec_.sensors),
      schedule_(window_schedule(spec_.step, spec_.horizon)),
      id_(session_id(spec_)),
      dir_(std::move(dir)) {
    auto s = std::make_shared<SessionSnapshot>();
    s->actions = spec_.actions;
    s->finished = schedule_.empty();
    if (dir_) {
        if (fs::exists(*dir_) && !fs::is_empty(*dir_))
            throw Error(ErrorKind::Io, "session directory is not empty: " + dir_->string());
        fs::create_directories(*dir_ / "windows");
        fs::create_directories(*dir_ / "inputs");
        write_text(*dir_ / "inputs/config.txt", spec_.config.to_text());
        write_text(*dir_ / "inputs/sensors.csv", sensors_csv(spec_.sensors));
        write_text(*dir_ / "inputs/actions.csv", actions_csv(spec_.actions));
        write_manifest(*s);
    }
    snap_ = std::move(s);
}

std::shared_ptr<const SessionSnapshot> Session::snapshot() const {
    std::lock_guard lock(mu_);
    return snap_;
}

bool Session::advance() {
    std::lock_guard lock(write_mu_);
    const auto cur = snapshot();
    if (cur->outputs.size() >= schedule_.size()) return false;
    const std::size_t index = cur->outputs.size();
    EventStore events;
    for (const auto& w : cur->window_events)
        for (const auto& e : w) events.add(e);
    auto ev = evaluate_window(kb_, window_slice(store_, cur->actions, events, window_start(schedule_, index),
                                                schedule_[index]));
    append(std::move(ev.output), std::move(ev.events));
    return true;
}

void Session::append(DiagnosisOutput output, std::vector<GroundAtom> events) {
    auto next = std::make_shared<SessionSnapshot>(*snapshot());
    next->playhead = output.window_end;
    next->outputs.push_back(std::move(output));
    next->window_events.push_back(std::move(events));
    next->finished = next->outputs.size() == schedule_.size();
    if (dir_) persist_window(*next);
    std::lock_guard slock(mu_);
    snap_ = std::move(next);
}

void Session::run_to_end() {
    while (advance()) {
    }
}

void Session::inject(const AttemptedAction& action) {
    if (!is_lower_identifier(action.procedure))
        throw Error(ErrorKind::InvalidArgument, "procedure must be a lowercase identifier: " + action.procedure);
    if (!is_known_component(action.component))
        throw Error(ErrorKind::InvalidArgument, "unknown component: " + action.component);
    if (action.time < 0 || action.time > spec_.horizon)
        throw Error(ErrorKind::InvalidArgument, "time outside the session: " + std::to_string(action.time));
    std::lock_guard lock(write_mu_);
    const auto cur = snapshot();
    if (cur->finished) throw Error(ErrorKind::Conflict, "session has finished");
    auto next = std::make_shared<SessionSnapshot>(*cur);
    next->actions.push_back(action);
    std::stable_sort(next->actions.begin(), next->actions.end(),
                     [](const AttemptedAction& a, const AttemptedAction& b) { return a.time < b.time; });
    next->injected.push_back(action);
    ++next->revision;
    // Windows ending at or after the attempt see it; they are evaluated again.
    std::size_t keep = 0;
    while (keep < next->outputs.size() && next->outputs[keep].window_end < action.time) ++keep;
    next->outputs.resize(keep);
    next->window_events.resize(keep);
    next->playhead = keep == 0 ? 0 : next->outputs.back().window_end;
    if (dir_) {
        files_.resize(keep);
        write_manifest(*next);
    }
    std::lock_guard slock(mu_);
    snap_ = std::move(next);
}

WindowSlice Session::slice(long long window_end) const {
    const auto s = snapshot();
    const auto it = std::find_if(s->outputs.begin(), s->outputs.end(),
                                 [&](const DiagnosisOutput& o) { return o.window_end == window_end; });
    if (it == s->outputs.end())
        throw Error(ErrorKind::NotFound, "no evaluated window ends at " + std::to_string(window_end));
    EventStore events;
    for (const auto& w : s->window_events)
        for (const auto& e : w) events.add(e);
    const auto index = static_cast<std::size_t>(it - s->outputs.begin());
    return window_slice(store_, s->actions, events, window_start(schedule_, index), window_end);
}

ExplainResponse Session::explain(const ExplainRequest& req, const ExplainOptions& options) const {
    return answer_request(kb_, req, [this](long long t) { return slice(t); }, options);
}

void Session::persist_window(const SessionSnapshot& s) {
    const auto& out = s.outputs.back();
    const std::string file = window_file(out.window_end, s.revision);
    write_text(*dir_ / file, to_json(out) + "\n");
    files_.push_back(file);
    write_manifest(s);
}

void Session::write_manifest(const SessionSnapshot& s) const {
    json windows = json::array();
    for (std::size_t i = 0; i < s.outputs.size(); ++i)
        windows.push_back({{"window_end", s.outputs[i].window_end},
                           {"file", files_.at(i)},
                           {"sha256", sha256_hex(to_json(s.outputs[i]) + "\n")}});
    json injected = json::array();
    for (const auto& a : s.injected) injected.push_back(action_json(a));
    json m{{"format_version", 1},
           {"session_id", id_},
           {"scenario", spec_.scenario},
           {"status", s.finished ? "finished" : "live"},
           {"revision", s.revision},
           {"playhead", s.playhead},
           {"step", spec_.step},
           {"horizon", spec_.horizon},
           {"window_count", schedule_.size()},
           {"rules", spec_.rules_dir ? spec_.rules_dir->string() : std::string("embedded")},
           {"config", config_json(spec_.config)},
           {"inputs",
            {{"config", "inputs/config.txt"},
             {"sensors", "inputs/sensors.csv"},
             {"sensors_sha256", sha256_hex(sensors_csv(spec_.sensors))},
             {"actions", "inputs/actions.csv"},
             {"actions_sha256", sha256_hex(actions_csv(spec_.actions))}}},
           {"injected_actions", std::move(injected)},
           {"windows", std::move(windows)}};
    replace_text(*dir_ / "manifest.json", m.dump(2) + "\n");
}

std::unique_ptr<Session> Session::load(const fs::path& dir) {
    const auto m = parse_document(read_text(dir / "manifest.json"), "session manifest", [](json j) { return j; });
    try {
        if (m.at("format_version").get<int>() != 1) throw Error(ErrorKind::InvalidArgument, "unsupported session format");
        SessionSpec spec;
        spec.config = KbConfig::parse(read_text(dir / "inputs/config.txt"));
        spec.sensors = ingest_sensors(read_text(dir / "inputs/sensors.csv"));
        spec.actions = ingest_actions(read_text(dir / "inputs/actions.csv"));
        spec.step = m.at("step").get<long long>();
        spec.horizon = m.at("horizon").get<long long>();
        spec.scenario = m.at("scenario").get<std::string>();
        const auto rules = m.at("rules").get<std::string>();
        if (rules != "embedded") spec.rules_dir = rules;

        auto session = std::make_unique<Session>(std::move(spec));
        auto s = std::make_shared<SessionSnapshot>();
        s->actions = session->spec_.actions;
        for (const auto& a : m.at("injected_actions")) {
            AttemptedAction act{a.at("time").get<long long>(), a.at("procedure").get<std::string>(),
                                a.at("component").get<std::string>()};
            s->actions.push_back(act);
            s->injected.push_back(act);
        }
        std::stable_sort(s->actions.begin(), s->actions.end(),
                         [](const AttemptedAction& a, const AttemptedAction& b) { return a.time < b.time; });
        for (const auto& w : m.at("windows")) {
            const auto file = w.at("file").get<std::string>();
            const auto text = read_text(dir / file);
            if (sha256_hex(text) != w.at("sha256").get<std::string>())
                throw Error(ErrorKind::InvalidArgument, "checksum mismatch: " + file);
            auto out = diagnosis_from_json(text);
            std::vector<GroundAtom> events;
            for (const auto& e : out.inferred_actions) events.push_back(parse_ground_atom(e));
            s->outputs.push_back(std::move(out));
            s->window_events.push_back(std::move(events));
            session->files_.push_back(file);
        }
        s->revision = m.at("revision").get<long long>();
        s->playhead = m.at("playhead").get<long long>();
        s->finished = m.at("status").get<std::string>() == "finished";
        session->dir_ = dir;
        session->snap_ = std::move(s);
        return session;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed session manifest: ") + e.what());
    }
}

void write_session_dir(const fs::path& dir, const SessionSpec& spec, bool concurrent, unsigned threads) {
    Session session(spec, dir);
    if (!concurrent) return session.run_to_end();
    ReplayOptions opts{spec.step, spec.horizon};
    opts.concurrent = true;
    opts.threads = threads;
    auto result = replay(session.kb_, spec.sensors, spec.actions, opts);
    std::lock_guard lock(session.write_mu_);
    for (auto& out : result.outputs) {
        std::vector<GroundAtom> events;
        for (const auto& e : out.inferred_actions) events.push_back(parse_ground_atom(e));
        session.append(std::move(out), std::move(events));
    }
}

// ---------------------------------------------------------------------------
// HTTP

int default_port() {
    if (const char* env = std::getenv("NPPX_PORT")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v > 0 && v < 65536) return static_cast<int>(v);
        spdlog::warn("ignoring NPPX_PORT={}", env);
    }
    return 8600;
}

struct HttpApi::Impl {
    std::shared_ptr<Session> session;
    httplib::Server server;

    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }
    static void send_error(httplib::Response& res, int status, const std::string& message) {
        send_json(res, status, json{{"error", message}});
    }

    void routes();
};

namespace {

json window_doc(const DiagnosisOutput& o) { return json::parse(to_json(o)); }

std::optional<long long> parse_integer(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || *end != '\0') return std::nullopt;
    return v;
}

}  // namespace

void HttpApi::Impl::routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    server.Get("/timeline", [this](const httplib::Request&, httplib::Response& res) {
        const auto s = session->snapshot();
        json windows = json::array();
        for (const auto& o : s->outputs) windows.push_back(window_doc(o));
        json markers = json::array();
        if (session->spec().scenario == "tmi2")
            for (const auto& e : tmi2_events())
                markers.push_back({{"time", e.time}, {"description", e.description}, {"observed_at", e.observed_at}});
        json injected = json::array();
        for (const auto& a : s->injected) injected.push_back(action_json(a));
        send_json(res, 200,
                  json{{"session", session->id()},
                       {"scenario", session->spec().scenario},
                       {"status", s->finished ? "finished" : "live"},
                       {"revision", s->revision},
                       {"playhead", s->playhead},
                       {"horizon", session->spec().horizon},
                       {"window_count", session->schedule().size()},
                       {"markers", std::move(markers)},
                       {"injected_actions", std::move(injected)},
                       {"windows", std::move(windows)}});
    });

    server.Get(R"(/window/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto t = parse_integer(req.matches[1]);
        const auto s = session->snapshot();
        for (const auto& o : s->outputs)
            if (t && o.window_end == *t) return send_json(res, 200, window_doc(o));
        send_error(res, 404, "no evaluated window ends at " + std::string(req.matches[1]));
    });

    server.Get(R"(/variables/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        const auto* b = find_binding(name);
        if (!b || !session->sensors().has_variable(name)) return send_error(res, 404, "unknown variable: " + name);
        long long from = 0;
        long long to = session->spec().horizon;
        for (auto [key, target] : {std::pair{"from", &from}, std::pair{"to", &to}}) {
            if (!req.has_param(key)) continue;
            const auto v = parse_integer(req.get_param_value(key));
            if (!v || *v < 0) return send_error(res, 400, std::string(key) + " must be a non-negative integer");
            *target = *v;
        }
        if (from > to) return send_error(res, 400, "from must not exceed to");
        json points = json::array();
        auto samples = session->sensors().series(name, from, to);
        // The held value at `from` opens the series.
        if (samples.empty() || samples.front().first != from)
            if (auto v = session->sensors().value_at(name, from)) points.push_back({from, *v});
        for (const auto& [t, v] : samples) points.push_back({t, v});
        send_json(res, 200,
                  json{{"variable", name},
                       {"description", b->description},
                       {"predicate", b->predicate},
                       {"from", from},
                       {"to", to},
                       {"points", std::move(points)}});
    });

    server.Get("/config", [this](const httplib::Request&, httplib::Response& res) {
        const auto& spec = session->spec();
        json vars = json::array();
        for (const auto& b : variable_bindings())
            vars.push_back({{"name", b.stream}, {"description", b.description}, {"predicate", b.predicate}});
        send_json(res, 200,
                  json{{"session", session->id()},
                       {"scenario", spec.scenario},
                       {"step", spec.step},
                       {"horizon", spec.horizon},
                       {"rules", spec.rules_dir ? spec.rules_dir->string() : std::string("embedded")},
                       {"kb", config_json(spec.config)},
                       {"variables", std::move(vars)},
                       {"components", known_component_names()}});
    });

    server.Post("/explain", [this](const httplib::Request& req, httplib::Response& res) {
        ExplainRequest er;
        try {
            er = explain_request_from_json(req.body);
        } catch (const std::exception& e) {
            return send_error(res, 400, e.what());
        }
        if (!er.slice) {
            try {
                er.slice = session->slice(er.window_end);
            } catch (const Error& e) {
                return send_error(res, 404, e.what());
            }
        }
        send_json(res, 200, json::parse(to_json(session->explain(er))));
    });

    server.Post("/actions", [this](const httplib::Request& req, httplib::Response& res) {
        AttemptedAction a;
        try {
            const auto j = json::parse(req.body);
            a.time = j.at("time").get<long long>();
            a.procedure = j.at("procedure").get<std::string>();
            a.component = j.at("component").get<std::string>();
        } catch (const json::exception& e) {
            return send_error(res, 400, std::string("malformed action: ") + e.what());
        }
        try {
            session->inject(a);
        } catch (const Error& e) {
            return send_error(res, e.kind() == ErrorKind::Conflict ? 409 : 400, e.what());
        }
        const auto s = session->snapshot();
        send_json(res, 200, json{{"accepted", true}, {"revision", s->revision}, {"playhead", s->playhead}});
    });

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        const std::string message = res.status == 404 ? "not found: " + req.path : "HTTP " + std::to_string(res.status);
        res.set_content(json{{"error", message}}.dump(), "application/json");
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_error(res, 500, what);
    });
}

HttpApi::HttpApi(std::shared_ptr<Session> session) : impl_(std::make_unique<Impl>()) {
    impl_->session = std::move(session);
    impl_->routes();
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpApi::listen() { impl_->server.listen_after_bind(); }

void HttpApi::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace nppx
