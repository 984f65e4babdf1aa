#pragma once

// Diagnosis and explanation as cooperating processes, the explain request
// protocol, replay sessions and their on-disk form, and the HTTP API.

#include "nppx/explain.hpp"
#include "nppx/npp_kb.hpp"
#include "nppx/replay.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace nppx {

// ---------------------------------------------------------------------------
// Protocol

struct ExplainRequest {
    long long id = 0;
    long long window_end = 0;
    /// Empty: the window's recommendations, inferred variables and inferred
    /// actions.
    std::vector<std::string> atoms;
    /// The window's input facts. The diagnosis process always sends them so
    /// the explanation process needs no access to the streams; HTTP clients
    /// leave them out and the session fills them in.
    std::optional<WindowSlice> slice;

    bool operator==(const ExplainRequest&) const = default;
};

struct AtomExplanation {
    std::string atom;
    std::vector<ExplanationGraph> graphs;
    bool truncated = false;
    std::string error;  // empty on success

    bool operator==(const AtomExplanation&) const = default;
};

struct ExplainResponse {
    long long id = 0;
    long long window_end = 0;
    std::vector<AtomExplanation> atoms;
    std::string error;  // request-level failure; atoms is then empty

    bool operator==(const ExplainResponse&) const = default;
};

/// Single-line JSON documents (one per line on the wire).
std::string to_json(const ExplainRequest& req);
ExplainRequest explain_request_from_json(std::string_view text);
std::string to_json(const ExplainResponse& resp);
ExplainResponse explain_response_from_json(std::string_view text);

/// Best effort id of a request that failed to parse; nullopt if none.
std::optional<long long> salvage_request_id(std::string_view text);

/// Slice used when a request carries none; throws NotFound for unknown windows.
using SliceLookup = std::function<WindowSlice(long long window_end)>;

/// Computes the response to one request. Problems with the request or with
/// single atoms end up in the response, never as exceptions.
ExplainResponse answer_request(const Program& kb, const ExplainRequest& req, const SliceLookup& lookup = {},
                               const ExplainOptions& options = {});

// ---------------------------------------------------------------------------
// Explanation worker: unbounded FIFO queue and one computing thread.

struct WorkerOptions {
    ExplainOptions explain;
    /// Fault injection: the worker sleeps this long before each request.
    std::chrono::milliseconds delay{0};
};

class ExplanationWorker {
public:
    using Respond = std::function<void(const ExplainResponse&)>;

    ExplanationWorker(Program kb, SliceLookup lookup, WorkerOptions options, Respond respond);
    /// Drains the queue first.
    ~ExplanationWorker();
    ExplanationWorker(const ExplanationWorker&) = delete;
    ExplanationWorker& operator=(const ExplanationWorker&) = delete;

    void submit(ExplainRequest req);
    /// Queues an error response for a request that could not be parsed, so
    /// it keeps its place in the response order.
    void submit_error(long long id, std::string message);
    std::size_t queue_depth() const;
    std::size_t max_queue_depth() const;
    /// Blocks until every queued request has been answered.
    void drain();

private:
    struct Job {
        ExplainRequest req;
        std::string error;
    };
    void run();

    Program kb_;
    SliceLookup lookup_;
    WorkerOptions options_;
    Respond respond_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<Job> queue_;
    std::size_t max_depth_ = 0;
    bool busy_ = false;
    bool stop_ = false;
    std::thread thread_;
};

// ---------------------------------------------------------------------------
// Processes

struct ExplanationProcessOptions {
    KbConfig config;
    std::optional<std::filesystem::path> rules_dir;
    WorkerOptions worker;
    /// Scheduling niceness of the serving threads. Explanations are
    /// background work; diagnosis keeps the CPU when both compete.
    int niceness = 19;
};

/// Serves one connected stream socket: a receiving thread reads request
/// lines into the worker's queue, the worker writes response lines. Returns
/// 0 after the peer has closed its side and every request was answered.
int serve_explanations(int fd, const ExplanationProcessOptions& options);

/// Listens on a Unix socket path, serves the first peer, then exits.
int run_explanation_process(const std::filesystem::path& socket_path, const ExplanationProcessOptions& options);

/// Endpoint value that runs the explanation role on a thread of the calling
/// process, connected through a socket pair.
inline constexpr const char* kSpawnLocal = "spawn-local";

struct DiagnosisProcessOptions {
    long long step = 60;
    /// Defaults to the time of the last sensor sample.
    std::optional<long long> horizon;
    /// Unix socket path, kSpawnLocal, or empty for diagnosis only.
    std::string endpoint;
    int connect_attempts = 5;
    std::chrono::milliseconds initial_backoff{20};
    /// Options of the spawned explanation role.
    ExplanationProcessOptions local;
};

struct DiagnosisReport {
    std::vector<DiagnosisOutput> outputs;
    std::vector<long long> request_ids;    // in send order
    std::vector<ExplainResponse> responses;  // in arrival order
    bool degraded = false;                 // peer unreachable
    std::chrono::nanoseconds diagnosis_time{0};  // window evaluation only
};

/// Replays the windows sequentially; after each window sends an explain
/// request without waiting for the answer. Returns once the peer has answered
/// everything. When the peer cannot be reached after the retries the run
/// continues diagnosis-only.
DiagnosisReport run_diagnosis_process(const Program& kb, std::span<const SensorSample> sensors,
                                      std::span<const AttemptedAction> actions,
                                      const DiagnosisProcessOptions& options);

// ---------------------------------------------------------------------------
// Sessions

struct SessionSpec {
    KbConfig config;
    std::optional<std::filesystem::path> rules_dir;
    std::vector<SensorSample> sensors;
    std::vector<AttemptedAction> actions;
    long long step = 60;
    long long horizon = 8521;
    std::string scenario;  // "tmi2" adds the event markers to the timeline
};

struct SessionSnapshot {
    long long revision = 0;  // bumped by every injection
    long long playhead = 0;  // end of the last evaluated window, 0 before the first
    bool finished = false;
    std::vector<DiagnosisOutput> outputs;
    std::vector<std::vector<GroundAtom>> window_events;  // parallel to outputs
    std::vector<AttemptedAction> actions;
    std::vector<AttemptedAction> injected;
};

/// A replay that advances one window at a time. Readers get immutable
/// snapshots; advancing and injection are serialized.
class Session {
public:
    /// With a directory, inputs, window documents and the manifest are written
    /// there as the replay advances.
    explicit Session(SessionSpec spec, std::optional<std::filesystem::path> dir = {});

    /// Attaches to a directory written by a previous session.
    static std::unique_ptr<Session> load(const std::filesystem::path& dir);

    /// Evaluates the next window; false when there is none.
    bool advance();
    void run_to_end();

    std::shared_ptr<const SessionSnapshot> snapshot() const;
    const SessionSpec& spec() const { return spec_; }
    const Program& kb() const { return kb_; }
    const SensorStore& sensors() const { return store_; }
    const std::vector<long long>& schedule() const { return schedule_; }
    /// Deterministic: a hash of the inputs.
    const std::string& id() const { return id_; }

    /// Adds an attempted action. Windows ending at or after its time are
    /// dropped and evaluated again by later advance() calls. Throws Conflict
    /// when the replay has finished and InvalidArgument for unknown
    /// components or bad times.
    void inject(const AttemptedAction& action);

    /// Input facts of a window of the current revision; NotFound if the
    /// window has not been evaluated.
    WindowSlice slice(long long window_end) const;
    ExplainResponse explain(const ExplainRequest& req, const ExplainOptions& options = {}) const;

private:
    friend void write_session_dir(const std::filesystem::path&, const SessionSpec&, bool, unsigned);
    /// Publishes the next window's result.
    void append(DiagnosisOutput output, std::vector<GroundAtom> events);
    void persist_window(const SessionSnapshot& s);
    void write_manifest(const SessionSnapshot& s) const;

    SessionSpec spec_;
    Program kb_;
    SensorStore store_;
    std::vector<long long> schedule_;
    std::string id_;
    std::optional<std::filesystem::path> dir_;
    std::vector<std::string> files_;  // current document per evaluated window
    std::mutex write_mu_;  // advance and inject
    mutable std::mutex mu_;  // snap_
    std::shared_ptr<const SessionSnapshot> snap_;
};

/// Writes a complete replay as a session directory (manifest.json,
/// inputs/, windows/). The contents depend only on the inputs, not on
/// whether the windows were evaluated concurrently.
void write_session_dir(const std::filesystem::path& dir, const SessionSpec& spec, bool concurrent = false,
                       unsigned threads = 0);

// ---------------------------------------------------------------------------
// HTTP API

/// NPPX_PORT, else 8600.
int default_port();

class HttpApi {
public:
    explicit HttpApi(std::shared_ptr<Session> session);
    ~HttpApi();
    HttpApi(const HttpApi&) = delete;
    HttpApi& operator=(const HttpApi&) = delete;

    /// Binds (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); blocking.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace nppx
