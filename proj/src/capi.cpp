#include "nppx.h"

#include "nppx/engine.hpp"
#include "nppx/error.hpp"
#include "nppx/scenario.hpp"
#include "nppx/service.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"

#include <spdlog/spdlog.h>

using namespace nppx;
namespace fs = std::filesystem;

struct nppx_session {
    std::shared_ptr<Session> session;
};

namespace {

thread_local std::string last_error;

nppx_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Syntax: return NPPX_ERR_SYNTAX;
        case ErrorKind::Safety: return NPPX_ERR_SAFETY;
        case ErrorKind::Arity: return NPPX_ERR_ARITY;
        case ErrorKind::Interval: return NPPX_ERR_INTERVAL;
        case ErrorKind::Limit: return NPPX_ERR_LIMIT;
        case ErrorKind::NotFound: return NPPX_ERR_NOT_FOUND;
        case ErrorKind::InvalidArgument: return NPPX_ERR_INVALID_ARGUMENT;
        case ErrorKind::Io: return NPPX_ERR_IO;
        case ErrorKind::Conflict: return NPPX_ERR_CONFLICT;
        case ErrorKind::Internal: return NPPX_ERR_INTERNAL;
    }
    return NPPX_ERR_INTERNAL;
}

template <class Fn>
nppx_status guard(Fn&& fn) {
    try {
        fn();
        last_error.clear();
        return NPPX_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const fs::filesystem_error& e) {
        last_error = e.what();
        return NPPX_ERR_IO;
    } catch (const std::exception& e) {
        last_error = e.what();
        return NPPX_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

SessionSpec spec_from(const nppx_session_config& c) {
    SessionSpec spec;
    if (c.config_text) spec.config = KbConfig::parse(c.config_text);
    if (c.rules_dir) spec.rules_dir = fs::path(c.rules_dir);
    require(c.sensors_csv, "sensors_csv");
    spec.sensors = ingest_sensors(c.sensors_csv);
    if (c.actions_csv) spec.actions = ingest_actions(c.actions_csv);
    spec.step = c.step;
    spec.horizon = c.horizon;
    if (c.scenario) spec.scenario = c.scenario;
    return spec;
}

SessionSpec tmi2_spec(const char* config_text) {
    SessionSpec spec;
    if (config_text) spec.config = KbConfig::parse(config_text);
    const auto s = synthesize_tmi2(spec.config);
    spec.sensors = s.sensors;
    spec.actions = s.actions;
    spec.horizon = kTmi2Horizon;
    spec.scenario = "tmi2";
    return spec;
}

void write_file(const fs::path& p, std::string_view text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw Error(ErrorKind::Io, "cannot write " + p.string());
}

}  // namespace

extern "C" {

const char* nppx_version(void) { return "1.0.0"; }

const char* nppx_last_error(void) { return last_error.c_str(); }

void nppx_string_free(char* s) { std::free(s); }

nppx_status nppx_default_config(char** out) {
    return guard([&] {
        require(out, "out");
        *out = dup_string(KbConfig{}.to_text());
    });
}

nppx_status nppx_session_open_tmi2(const char* config_text, nppx_session** out) {
    return guard([&] {
        require(out, "out");
        *out = new nppx_session{std::make_shared<Session>(tmi2_spec(config_text))};
    });
}

nppx_status nppx_session_open(const nppx_session_config* config, nppx_session** out) {
    return guard([&] {
        require(config, "config");
        require(out, "out");
        std::optional<fs::path> dir;
        if (config->session_dir) dir = fs::path(config->session_dir);
        *out = new nppx_session{std::make_shared<Session>(spec_from(*config), dir)};
    });
}

void nppx_session_close(nppx_session* session) { delete session; }

nppx_status nppx_session_advance(nppx_session* session, int* advanced) {
    return guard([&] {
        require(session, "session");
        const bool more = session->session->advance();
        if (advanced) *advanced = more ? 1 : 0;
    });
}

nppx_status nppx_session_run(nppx_session* session) {
    return guard([&] {
        require(session, "session");
        session->session->run_to_end();
    });
}

nppx_status nppx_session_playhead(const nppx_session* session, long long* out) {
    return guard([&] {
        require(session, "session");
        require(out, "out");
        *out = session->session->snapshot()->playhead;
    });
}

nppx_status nppx_session_window_count(const nppx_session* session, size_t* out) {
    return guard([&] {
        require(session, "session");
        require(out, "out");
        *out = session->session->snapshot()->outputs.size();
    });
}

nppx_status nppx_session_window_json(const nppx_session* session, size_t index, char** out) {
    return guard([&] {
        require(session, "session");
        require(out, "out");
        const auto s = session->session->snapshot();
        if (index >= s->outputs.size())
            throw Error(ErrorKind::NotFound, "window index " + std::to_string(index) + " not evaluated");
        *out = dup_string(to_json(s->outputs[index]));
    });
}

nppx_status nppx_session_inject(nppx_session* session, long long time, const char* procedure, const char* component) {
    return guard([&] {
        require(session, "session");
        require(procedure, "procedure");
        require(component, "component");
        session->session->inject({time, procedure, component});
    });
}

nppx_status nppx_session_explain(const nppx_session* session, long long window_end, const char* atom,
                                 nppx_format format, size_t max_graphs, char** out) {
    return guard([&] {
        require(session, "session");
        require(atom, "atom");
        require(out, "out");
        if (format != NPPX_FORMAT_DOT && format != NPPX_FORMAT_DOC)
            throw Error(ErrorKind::InvalidArgument, "unknown format");
        parse_ground_atom(atom);  // syntax errors surface with their own code
        ExplainRequest req;
        req.window_end = window_end;
        req.atoms = {atom};
        req.slice = session->session->slice(window_end);
        ExplainOptions opts;
        if (max_graphs > 0) opts.max_graphs = max_graphs;
        const auto resp = session->session->explain(req, opts);
        if (!resp.error.empty()) throw Error(ErrorKind::Internal, resp.error);
        const auto& item = resp.atoms.at(0);
        if (!item.error.empty()) throw Error(ErrorKind::NotFound, item.error);
        std::string text;
        if (format == NPPX_FORMAT_DOT) {
            for (std::size_t i = 0; i < item.graphs.size(); ++i) {
                if (i) text += "\n";
                text += to_dot(item.graphs[i]);
            }
            if (item.truncated) text += "// truncated after " + std::to_string(item.graphs.size()) + " graphs\n";
        } else {
            nlohmann::ordered_json graphs = nlohmann::ordered_json::array();
            for (const auto& g : item.graphs) graphs.push_back(nlohmann::ordered_json::parse(to_json(g)));
            text = nlohmann::ordered_json{{"atom", item.atom},
                                          {"window_end", window_end},
                                          {"truncated", item.truncated},
                                          {"graphs", std::move(graphs)}}
                       .dump(2) +
                   "\n";
        }
        *out = dup_string(text);
    });
}

nppx_status nppx_replay_to_dir(const nppx_session_config* config, const char* dir, int concurrent, unsigned threads) {
    return guard([&] {
        require(config, "config");
        require(dir, "dir");
        write_session_dir(dir, spec_from(*config), concurrent != 0, threads);
    });
}

nppx_status nppx_synth_tmi2(const char* dir) {
    return guard([&] {
        require(dir, "dir");
        for (const auto& [path, content] : tmi2_fixture_files()) write_file(fs::path(dir) / path, content);
    });
}

nppx_status nppx_check_fixtures(const char* dir, char** report) {
    FixtureReport r;
    const auto st = guard([&] {
        require(dir, "dir");
        r = check_fixtures(dir);
        if (report) {
            std::string text;
            for (const auto& p : r.passed) text += "ok   " + p + "\n";
            for (const auto& f : r.failures) text += "FAIL " + f + "\n";
            *report = dup_string(text);
        }
    });
    if (st != NPPX_OK) return st;
    if (!r.ok()) {
        last_error = std::to_string(r.failures.size()) + " fixture check(s) failed";
        return NPPX_ERR_CONFLICT;
    }
    return NPPX_OK;
}

nppx_status nppx_run_explanation_process(const char* socket_path, const char* config_text, long long delay_ms) {
    return guard([&] {
        require(socket_path, "socket_path");
        ExplanationProcessOptions opts;
        if (config_text) opts.config = KbConfig::parse(config_text);
        opts.worker.delay = std::chrono::milliseconds(std::max(0LL, delay_ms));
        if (run_explanation_process(socket_path, opts) != 0) throw Error(ErrorKind::Io, "explanation process failed");
    });
}

nppx_status nppx_run_diagnosis(const nppx_session_config* config, const char* endpoint, const char* out_dir,
                               char** summary) {
    return guard([&] {
        require(config, "config");
        const auto spec = spec_from(*config);
        const Program kb = spec.rules_dir ? load_kb_dir(*spec.rules_dir, spec.config) : build_kb(spec.config);
        DiagnosisProcessOptions opts;
        opts.step = spec.step;
        opts.horizon = spec.horizon;
        if (endpoint) opts.endpoint = endpoint;
        opts.local.config = spec.config;
        opts.local.rules_dir = spec.rules_dir;
        const auto rep = run_diagnosis_process(kb, spec.sensors, spec.actions, opts);

        bool fifo = rep.responses.size() == rep.request_ids.size();
        for (std::size_t i = 0; fifo && i < rep.responses.size(); ++i) fifo = rep.responses[i].id == rep.request_ids[i];
        if (out_dir) {
            const fs::path dir(out_dir);
            for (const auto& o : rep.outputs) {
                char name[64];
                std::snprintf(name, sizeof name, "windows/w%06lld.json", o.window_end);
                write_file(dir / name, to_json(o) + "\n");
            }
            std::string transcript;
            for (const auto& r : rep.responses) transcript += to_json(r) + "\n";
            write_file(dir / "explain_transcript.ndjson", transcript);
        }
        if (summary)
            *summary = dup_string(nlohmann::ordered_json{{"windows", rep.outputs.size()},
                                                         {"requests", rep.request_ids.size()},
                                                         {"responses", rep.responses.size()},
                                                         {"fifo", fifo},
                                                         {"degraded", rep.degraded},
                                                         {"diagnosis_ms", rep.diagnosis_time.count() / 1000000}}
                                      .dump());
    });
}

nppx_status nppx_serve(nppx_session* session, const char* attach_dir, const char* host, int port, long long pace_ms) {
    return guard([&] {
        std::shared_ptr<Session> s;
        if (attach_dir) {
            s = Session::load(attach_dir);
        } else {
            require(session, "session");
            s = session->session;
            if (pace_ms <= 0) s->run_to_end();
        }
        HttpApi api(s);
        const int bound = api.bind(host ? host : "127.0.0.1", port < 0 ? default_port() : port);
        spdlog::info("serving session {} on http://{}:{}", s->id(), host ? host : "127.0.0.1", bound);
        std::atomic<bool> done{false};
        std::thread player;
        if (pace_ms > 0 && !attach_dir)
            player = std::thread([&] {
                while (!done) {
                    try {
                        s->advance();
                    } catch (const std::exception& e) {
                        spdlog::error("replay stopped: {}", e.what());
                        return;
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(pace_ms));
                }
            });
        api.listen();
        done = true;
        if (player.joinable()) player.join();
    });
}

int nppx_default_port(void) { return default_port(); }

}  // extern "C"
