#pragma once

// The plant knowledge base: configuration, rule files, steam table and the
// mapping from sensor streams to predicates.

#include "nppx/engine.hpp"
#include "nppx/rulelang.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nppx {

struct KbConfig {
    long long action_execution_time_range = 8521;  // M, seconds
    long long water_level_minimum = 30;            // cm
    long long upper_pressure_boundary_primary_loop = 2255;  // psi
    long long porv_closure_setpoint = 2205;        // psi
    long long hpis_actuation_pressure = 1600;      // psi
    long long stuck_open_margin = 50;              // psi below the setpoint
    bool literal_suppression_rule = false;

    /// Throws InvalidArgument when a value is not positive or the margin
    /// reaches the setpoint.
    void validate() const;

    /// `key=value` lines; `#` starts a comment. Unknown keys are errors.
    static KbConfig parse(std::string_view text);
    static KbConfig load(const std::filesystem::path& file);
    /// Every key with its value, one per line, in a fixed order.
    std::string to_text() const;

    bool operator==(const KbConfig&) const = default;
};

/// The numeric settings as facts, e.g. `action_execution_time_range(8521).`
std::string config_facts(const KbConfig& cfg);

/// Names of the shipped rule files, in load order.
std::vector<std::string> kb_file_names(const KbConfig& cfg);
/// Contents of one shipped rule file (compiled into the library).
std::string_view embedded_kb_file(std::string_view name);

/// Embedded rule files plus the configuration facts.
Program build_kb(const KbConfig& cfg = {});
/// Same as build_kb but reads the rule files from `dir`.
Program load_kb_dir(const std::filesystem::path& dir, const KbConfig& cfg = {});

struct SteamTableEntry {
    int temperature;  // degF
    int pressure;     // psia
};

/// Parsed from the embedded steam table; sorted by temperature.
const std::vector<SteamTableEntry>& steam_table();
/// Entry at the greatest tabulated temperature <= temp. Throws
/// InvalidArgument("temperature below table") below the first entry.
int saturation_pressure(int temp);

struct VariableBinding {
    std::string stream;       // CSV variable name
    std::string description;  // row of the variable table
    std::string predicate;
    std::string component;    // empty for the (value, time) layout
};

/// The 16 measured streams.
const std::vector<VariableBinding>& variable_bindings();
const VariableBinding* find_binding(std::string_view stream);
/// predicate(value,time) or predicate(component,value,time).
GroundAtom sensor_atom(const VariableBinding& binding, long long value, long long time);

/// Component names and their aliases, taken from the names/2 facts.
const std::vector<std::string>& known_component_names();
bool is_known_component(std::string_view name);

}  // namespace nppx
