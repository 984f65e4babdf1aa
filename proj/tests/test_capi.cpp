// Exercises libnppx through its C header only.
#include "doctest.h"

#include "nppx.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Str {
    char* p = nullptr;
    ~Str() { nppx_string_free(p); }
    std::string s() const { return p ? p : ""; }
};

struct Handle {
    nppx_session* p = nullptr;
    ~Handle() { nppx_session_close(p); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const char* name) {
    auto p = fs::temp_directory_path() / (std::string("nppx_capi_") + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

const fs::path kFixtures = NPPX_SOURCE_DIR "/scenario/tmi2";

}  // namespace

TEST_CASE("null arguments and per-thread errors") {
    CHECK(nppx_session_open(nullptr, nullptr) == NPPX_ERR_INVALID_ARGUMENT);
    CHECK(std::string(nppx_last_error()).find("must not be null") != std::string::npos);

    std::string other = "unset";
    std::thread([&] { other = nppx_last_error(); }).join();
    CHECK(other.empty());

    Str s;
    CHECK(nppx_default_config(&s.p) == NPPX_OK);
    CHECK(std::string(nppx_last_error()).empty());
    CHECK(s.s().find("=") != std::string::npos);
    nppx_string_free(nullptr);
    nppx_session_close(nullptr);
}

TEST_CASE("default configuration text opens a session") {
    Str cfg;
    REQUIRE(nppx_default_config(&cfg.p) == NPPX_OK);
    Handle h;
    CHECK(nppx_session_open_tmi2(cfg.p, &h.p) == NPPX_OK);

    Handle bad;
    CHECK(nppx_session_open_tmi2("no equals sign here\n", &bad.p) != NPPX_OK);
    CHECK(bad.p == nullptr);
}

TEST_CASE("session lifecycle") {
    Handle h;
    REQUIRE(nppx_session_open_tmi2(nullptr, &h.p) == NPPX_OK);
    long long playhead = -1;
    CHECK(nppx_session_playhead(h.p, &playhead) == NPPX_OK);
    CHECK(playhead == 0);

    int more = 0;
    REQUIRE(nppx_session_advance(h.p, &more) == NPPX_OK);
    CHECK(more == 1);
    CHECK(nppx_session_playhead(h.p, &playhead) == NPPX_OK);
    CHECK(playhead == 60);

    CHECK(nppx_session_inject(h.p, 120, "open", "no_such_valve") == NPPX_ERR_INVALID_ARGUMENT);
    CHECK(nppx_session_inject(h.p, 120, "Open", "auxiliary_feedwater_a_block_valve") == NPPX_ERR_INVALID_ARGUMENT);

    REQUIRE(nppx_session_run(h.p) == NPPX_OK);
    size_t n = 0;
    CHECK(nppx_session_window_count(h.p, &n) == NPPX_OK);
    CHECK(n == 142);
    CHECK(nppx_session_playhead(h.p, &playhead) == NPPX_OK);
    CHECK(playhead == 8521);

    Str doc;
    REQUIRE(nppx_session_window_json(h.p, 0, &doc.p) == NPPX_OK);
    const auto j = json::parse(doc.s());
    CHECK(j["window_start"] == 1);
    CHECK(j["window_end"] == 60);

    Str missing;
    CHECK(nppx_session_window_json(h.p, 142, &missing.p) == NPPX_ERR_NOT_FOUND);
    CHECK(missing.p == nullptr);

    CHECK(nppx_session_advance(h.p, &more) == NPPX_OK);
    CHECK(more == 0);
    CHECK(nppx_session_inject(h.p, 120, "open", "auxiliary_feedwater_a_block_valve") == NPPX_ERR_CONFLICT);
}

TEST_CASE("explanations in both formats") {
    Handle h;
    REQUIRE(nppx_session_open_tmi2(nullptr, &h.p) == NPPX_OK);
    int more = 1;
    long long playhead = 0;
    while (more && playhead < 960) {
        REQUIRE(nppx_session_advance(h.p, &more) == NPPX_OK);
        REQUIRE(nppx_session_playhead(h.p, &playhead) == NPPX_OK);
    }

    Str dot;
    REQUIRE(nppx_session_explain(h.p, 960, "steam(primary_loop_A,901)", NPPX_FORMAT_DOT, 0, &dot.p) == NPPX_OK);
    CHECK(dot.s().find("digraph explanation {") != std::string::npos);
    CHECK(dot.s().find("1213<1258") != std::string::npos);

    Str doc;
    REQUIRE(nppx_session_explain(h.p, 960, "steam(primary_loop_A,901)", NPPX_FORMAT_DOC, 1, &doc.p) == NPPX_OK);
    const auto j = json::parse(doc.s());
    CHECK(j["atom"] == "steam(primary_loop_A,901)");
    CHECK(j["window_end"] == 960);
    CHECK(j["graphs"].size() == 1);

    Str out;
    CHECK(nppx_session_explain(h.p, 960, "steam(primary_loop_A,", NPPX_FORMAT_DOT, 0, &out.p) == NPPX_ERR_SYNTAX);
    CHECK(nppx_session_explain(h.p, 960, "steam(nowhere,1)", NPPX_FORMAT_DOT, 0, &out.p) == NPPX_ERR_NOT_FOUND);
    CHECK(nppx_session_explain(h.p, 960, "steam(primary_loop_A,901)", static_cast<nppx_format>(7), 0, &out.p) ==
          NPPX_ERR_INVALID_ARGUMENT);
    CHECK(out.p == nullptr);
}

TEST_CASE("replay to a directory") {
    const std::string sensors = slurp(kFixtures / "sensors.csv");
    const std::string actions = slurp(kFixtures / "actions.csv");
    nppx_session_config c{};
    c.sensors_csv = sensors.c_str();
    c.actions_csv = actions.c_str();
    c.step = 60;
    c.horizon = 8521;

    const auto dir = scratch("replay");
    REQUIRE(nppx_replay_to_dir(&c, dir.c_str(), 0, 0) == NPPX_OK);
    std::size_t docs = 0;
    for (const auto& e : fs::directory_iterator(dir / "windows")) docs += e.path().extension() == ".json";
    CHECK(docs == 142);
    CHECK(json::parse(slurp(dir / "manifest.json")).is_object());

    CHECK(nppx_replay_to_dir(&c, dir.c_str(), 0, 0) == NPPX_ERR_IO);

    c.sensors_csv = "time,variable,value\nzero,x,1\n";
    const auto bad = scratch("bad");
    CHECK(nppx_replay_to_dir(&c, bad.c_str(), 0, 0) != NPPX_OK);
    CHECK(!std::string(nppx_last_error()).empty());
    fs::remove_all(dir);
    fs::remove_all(bad);
}

TEST_CASE("fixture check through the C interface") {
    Str report;
    CHECK(nppx_check_fixtures(kFixtures.c_str(), &report.p) == NPPX_OK);
    CHECK(report.s().find("FAIL") == std::string::npos);

    const auto copy = scratch("fixtures");
    fs::copy(kFixtures, copy, fs::copy_options::recursive);
    {
        std::ofstream out(copy / "expected/figure5.txt", std::ios::app);
        out << "it_happened(open,nothing,1)\n";
    }
    Str tampered;
    CHECK(nppx_check_fixtures(copy.c_str(), &tampered.p) == NPPX_ERR_CONFLICT);
    CHECK(tampered.s().find("FAIL checksum expected/figure5.txt") != std::string::npos);
    fs::remove_all(copy);

    const auto fresh = scratch("synth");
    REQUIRE(nppx_synth_tmi2(fresh.c_str()) == NPPX_OK);
    for (const auto& e : fs::recursive_directory_iterator(kFixtures)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), kFixtures);
        CHECK_MESSAGE(slurp(fresh / rel) == slurp(e.path()), rel.string());
    }
    fs::remove_all(fresh);
}
