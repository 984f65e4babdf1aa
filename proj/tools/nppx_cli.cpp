// Command-line front end. Uses only the C interface of libnppx.

#include "nppx.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

namespace {

struct Failure {
    int code;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "nppx: cannot read " << path << "\n";
        throw Failure{2};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check(nppx_status st, const char* what) {
    if (st == NPPX_OK) return;
    std::cerr << "nppx: " << what << ": " << nppx_last_error() << "\n";
    throw Failure{st == NPPX_ERR_CONFLICT ? 3 : 1};
}

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { nppx_string_free(p); }
};

struct SessionHandle {
    nppx_session* p = nullptr;
    ~SessionHandle() { nppx_session_close(p); }
};

// Inputs shared by the subcommands that replay streams.
struct Inputs {
    std::string rules;
    std::string sensors;
    std::string actions;
    std::string config;
    long long step = 60;
    long long horizon = 8521;

    // Texts must outlive the config struct.
    std::string sensors_text, actions_text, config_text;

    void add_to(CLI::App* app, bool streams_required) {
        app->add_option("--rules", rules, "Directory with the rule files (default: compiled in)")->check(CLI::ExistingDirectory);
        auto* s = app->add_option("--sensors", sensors, "Sensor CSV (time,variable,value)")->check(CLI::ExistingFile);
        app->add_option("--actions", actions, "Attempted-action CSV (time,procedure,component)")->check(CLI::ExistingFile);
        app->add_option("--config", config, "key=value configuration file")->check(CLI::ExistingFile);
        app->add_option("--step", step, "Window step in seconds")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--horizon", horizon, "Last second of the replay")->capture_default_str();
        if (streams_required) s->required();
    }

    nppx_session_config load() {
        sensors_text = read_file(sensors);
        if (!actions.empty()) actions_text = read_file(actions);
        if (!config.empty()) config_text = read_file(config);
        nppx_session_config c{};
        c.config_text = config.empty() ? nullptr : config_text.c_str();
        c.rules_dir = rules.empty() ? nullptr : rules.c_str();
        c.sensors_csv = sensors_text.c_str();
        c.actions_csv = actions.empty() ? nullptr : actions_text.c_str();
        c.step = step;
        c.horizon = horizon;
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rule-based plant diagnosis with explanation graphs"};
    app.require_subcommand(0, 1);
    bool show_config = false;
    app.add_flag("--show-config", show_config, "Print the default configuration and exit");
    app.set_version_flag("--version", nppx_version());

    Inputs replay_in;
    std::string replay_out;
    bool concurrent = false;
    unsigned threads = 0;
    auto* replay = app.add_subcommand("replay", "Replay streams and write a session directory");
    replay_in.add_to(replay, true);
    replay->add_option("--out", replay_out, "Output directory (must not exist or be empty)")->required();
    replay->add_flag("--concurrent", concurrent, "Evaluate windows concurrently");
    replay->add_option("--threads", threads, "Worker threads for --concurrent (0: all cores)");

    Inputs explain_in;
    std::string atom, format = "dot", scenario = "tmi2";
    long long window = 0;
    std::size_t max_graphs = 0;
    auto* explain = app.add_subcommand("explain", "Explanation graphs of one atom");
    explain_in.add_to(explain, false);
    explain->add_option("--atom", atom, "Ground atom, e.g. steam(primary_loop_A,901)")->required();
    explain->add_option("--window", window, "Window end")->required();
    explain->add_option("--format", format, "dot or doc")->check(CLI::IsMember({"dot", "doc"}))->capture_default_str();
    explain->add_option("--max-graphs", max_graphs, "Stop after this many graphs (0: default)");
    explain->add_option("--scenario", scenario, "Built-in scenario used when --sensors is absent")
        ->check(CLI::IsMember({"tmi2"}));

    Inputs serve_in;
    int port = -1;
    std::string host = "127.0.0.1", attach, session_dir;
    long long pace_ms = 0;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve_in.add_to(serve, false);
    serve->add_option("--port", port, "Port (default: $NPPX_PORT or 8600)");
    serve->add_option("--host", host, "Address to bind")->capture_default_str();
    serve->add_option("--scenario", scenario, "Built-in scenario used when --sensors is absent")
        ->check(CLI::IsMember({"tmi2"}));
    serve->add_option("--pace-ms", pace_ms, "Play the replay live, one window per interval");
    serve->add_option("--session-dir", session_dir, "Persist the session into this directory");
    serve->add_option("--attach", attach, "Serve a session directory written earlier")->check(CLI::ExistingDirectory);

    std::string synth_out;
    auto* synth = app.add_subcommand("synth-tmi2", "Write the TMI-2 fixture files");
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::string fixtures_dir = "scenario/tmi2";
    auto* fixtures = app.add_subcommand("check-fixtures", "Verify a fixture directory against the build");
    fixtures->add_option("--dir", fixtures_dir, "Fixture directory")->capture_default_str();

    std::string socket_path;
    long long delay_ms = 0;
    std::string xconfig;
    auto* xserver = app.add_subcommand("explain-server", "Run the explanation process on a Unix socket");
    xserver->add_option("--socket", socket_path, "Socket path")->required();
    xserver->add_option("--config", xconfig, "key=value configuration file")->check(CLI::ExistingFile);
    xserver->add_option("--delay-ms", delay_ms, "Sleep before each request (fault injection)");

    Inputs diag_in;
    std::string endpoint, diag_out;
    auto* diagnose = app.add_subcommand("diagnose", "Run the diagnosis process, sending explain requests");
    diag_in.add_to(diagnose, true);
    diagnose->add_option("--endpoint", endpoint, "Socket path of the explanation process, or spawn-local");
    diagnose->add_option("--out", diag_out, "Write window documents and the response transcript here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (show_config) {
            OwnedString text;
            check(nppx_default_config(&text.p), "config");
            std::cout << text.p;
            return 0;
        }
        if (*replay) {
            auto c = replay_in.load();
            check(nppx_replay_to_dir(&c, replay_out.c_str(), concurrent ? 1 : 0, threads), "replay");
            return 0;
        }
        if (*explain) {
            SessionHandle s;
            if (explain_in.sensors.empty()) {
                const std::string cfg = explain_in.config.empty() ? std::string() : read_file(explain_in.config);
                check(nppx_session_open_tmi2(explain_in.config.empty() ? nullptr : cfg.c_str(), &s.p), "scenario");
            } else {
                auto c = explain_in.load();
                check(nppx_session_open(&c, &s.p), "session");
            }
            // Evaluate up to the requested window; earlier windows feed its events.
            for (long long playhead = 0;;) {
                check(nppx_session_playhead(s.p, &playhead), "replay");
                if (playhead >= window) break;
                int more = 0;
                check(nppx_session_advance(s.p, &more), "replay");
                if (!more) break;
            }
            OwnedString out;
            check(nppx_session_explain(s.p, window, atom.c_str(), format == "dot" ? NPPX_FORMAT_DOT : NPPX_FORMAT_DOC,
                                       max_graphs, &out.p),
                  "explain");
            std::cout << out.p;
            return 0;
        }
        if (*serve) {
            SessionHandle s;
            if (attach.empty()) {
                if (serve_in.sensors.empty()) {
                    if (!session_dir.empty()) {
                        std::cerr << "nppx: --session-dir needs --sensors\n";
                        return 2;
                    }
                    const std::string cfg = serve_in.config.empty() ? std::string() : read_file(serve_in.config);
                    check(nppx_session_open_tmi2(serve_in.config.empty() ? nullptr : cfg.c_str(), &s.p), "scenario");
                } else {
                    auto c = serve_in.load();
                    if (!session_dir.empty()) c.session_dir = session_dir.c_str();
                    check(nppx_session_open(&c, &s.p), "session");
                }
            }
            check(nppx_serve(s.p, attach.empty() ? nullptr : attach.c_str(), host.c_str(), port, pace_ms), "serve");
            return 0;
        }
        if (*synth) {
            check(nppx_synth_tmi2(synth_out.c_str()), "synth-tmi2");
            return 0;
        }
        if (*fixtures) {
            OwnedString report;
            const auto st = nppx_check_fixtures(fixtures_dir.c_str(), &report.p);
            if (report.p) std::cout << report.p;
            check(st, "check-fixtures");
            return 0;
        }
        if (*xserver) {
            const std::string cfg = xconfig.empty() ? std::string() : read_file(xconfig);
            check(nppx_run_explanation_process(socket_path.c_str(), xconfig.empty() ? nullptr : cfg.c_str(), delay_ms),
                  "explain-server");
            return 0;
        }
        if (*diagnose) {
            auto c = diag_in.load();
            OwnedString summary;
            check(nppx_run_diagnosis(&c, endpoint.empty() ? nullptr : endpoint.c_str(),
                                     diag_out.empty() ? nullptr : diag_out.c_str(), &summary.p),
                  "diagnose");
            std::cout << summary.p << "\n";
            return 0;
        }
        std::cout << app.help();
        return 0;
    } catch (const Failure& f) {
        return f.code;
    }
}
