/* C interface of libnppx: replay sessions, explanations, fixtures and the
 * two-process and HTTP front ends.
 *
 * Strings returned through `char** out` are allocated by the library and
 * released with nppx_string_free. Every function returns NPPX_OK or an error
 * code; the message of the last failure on the calling thread is available
 * from nppx_last_error. */
#ifndef NPPX_H
#define NPPX_H

#include <stddef.h>

#if defined(NPPX_BUILDING_LIBRARY)
#define NPPX_API __attribute__((visibility("default")))
#else
#define NPPX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nppx_status {
    NPPX_OK = 0,
    NPPX_ERR_SYNTAX = 1,
    NPPX_ERR_SAFETY = 2,
    NPPX_ERR_ARITY = 3,
    NPPX_ERR_INTERVAL = 4,
    NPPX_ERR_LIMIT = 5,
    NPPX_ERR_NOT_FOUND = 6,
    NPPX_ERR_INVALID_ARGUMENT = 7,
    NPPX_ERR_IO = 8,
    NPPX_ERR_CONFLICT = 9,
    NPPX_ERR_INTERNAL = 10
} nppx_status;

typedef enum nppx_format {
    NPPX_FORMAT_DOT = 0, /* one digraph per explanation graph */
    NPPX_FORMAT_DOC = 1  /* {"atom","window_end","truncated","graphs":[...]} */
} nppx_format;

typedef struct nppx_session nppx_session;

typedef struct nppx_session_config {
    const char* config_text;  /* key=value lines; NULL for the defaults */
    const char* rules_dir;    /* NULL for the compiled-in rule files */
    const char* sensors_csv;  /* time,variable,value */
    const char* actions_csv;  /* time,procedure,component; NULL for none */
    long long step;
    long long horizon;
    const char* scenario;     /* "tmi2" or NULL */
    const char* session_dir;  /* persist the session here; NULL for none */
} nppx_session_config;

NPPX_API const char* nppx_version(void);
NPPX_API const char* nppx_last_error(void);
NPPX_API void nppx_string_free(char* s);

/* Default configuration as key=value lines. */
NPPX_API nppx_status nppx_default_config(char** out);

/* A session built from the synthesized TMI-2 streams; config_text may be NULL. */
NPPX_API nppx_status nppx_session_open_tmi2(const char* config_text, nppx_session** out);
NPPX_API nppx_status nppx_session_open(const nppx_session_config* config, nppx_session** out);
NPPX_API void nppx_session_close(nppx_session* session);

/* Evaluates the next window; *advanced is 0 once every window is done. */
NPPX_API nppx_status nppx_session_advance(nppx_session* session, int* advanced);
NPPX_API nppx_status nppx_session_run(nppx_session* session);
/* End of the last evaluated window, 0 before the first. */
NPPX_API nppx_status nppx_session_playhead(const nppx_session* session, long long* out);
NPPX_API nppx_status nppx_session_window_count(const nppx_session* session, size_t* out);
/* Window document of the index-th evaluated window. */
NPPX_API nppx_status nppx_session_window_json(const nppx_session* session, size_t index, char** out);
NPPX_API nppx_status nppx_session_inject(nppx_session* session, long long time, const char* procedure, const char* component);
/* Explains one atom of an evaluated window; max_graphs 0 means the default. */
NPPX_API nppx_status nppx_session_explain(const nppx_session* session, long long window_end, const char* atom,
                                 nppx_format format, size_t max_graphs, char** out);

/* Full replay written as a session directory (must not exist or be empty). */
NPPX_API nppx_status nppx_replay_to_dir(const nppx_session_config* config, const char* dir, int concurrent, unsigned threads);

NPPX_API nppx_status nppx_synth_tmi2(const char* dir);
/* Report lines "ok ..." / "FAIL ..."; NPPX_ERR_CONFLICT when a check fails. */
NPPX_API nppx_status nppx_check_fixtures(const char* dir, char** report);

/* Explanation process on a Unix socket; serves one peer, then returns. */
NPPX_API nppx_status nppx_run_explanation_process(const char* socket_path, const char* config_text, long long delay_ms);
/* Diagnosis process: endpoint is a socket path, "spawn-local" or NULL for
 * diagnosis only. The summary is JSON: windows, requests, responses,
 * fifo, degraded. With out_dir the window documents are written there. */
NPPX_API nppx_status nppx_run_diagnosis(const nppx_session_config* config, const char* endpoint, const char* out_dir,
                               char** summary);

/* Serves the HTTP API; pace_ms > 0 plays the replay live, one window per
 * pace_ms, otherwise the session is evaluated before serving. attach_dir
 * loads a session directory instead (session may then be NULL). Blocks. */
NPPX_API nppx_status nppx_serve(nppx_session* session, const char* attach_dir, const char* host, int port, long long pace_ms);
NPPX_API int nppx_default_port(void);

#ifdef __cplusplus
}
#endif

#endif
