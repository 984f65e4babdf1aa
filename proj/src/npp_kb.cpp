#include "nppx/npp_kb.hpp"
#include "nppx/error.hpp"
#include "kb_embed.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace nppx {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

long long parse_int(std::string_view key, std::string_view text) {
    long long v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size())
        throw Error(ErrorKind::InvalidArgument, "config: " + std::string(key) + " expects an integer, got '" +
                                                    std::string(text) + "'");
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(ErrorKind::InvalidArgument, "config: " + std::string(key) + " expects true or false");
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void KbConfig::validate() const {
    const std::pair<const char*, long long> values[] = {
        {"action_execution_time_range", action_execution_time_range},
        {"water_level_minimum", water_level_minimum},
        {"upper_pressure_boundary_primary_loop", upper_pressure_boundary_primary_loop},
        {"porv_closure_setpoint", porv_closure_setpoint},
        {"hpis_actuation_pressure", hpis_actuation_pressure},
        {"stuck_open_margin", stuck_open_margin},
    };
    for (const auto& [key, v] : values)
        if (v <= 0) throw Error(ErrorKind::InvalidArgument, std::string("config: ") + key + " must be positive");
    if (stuck_open_margin >= porv_closure_setpoint)
        throw Error(ErrorKind::InvalidArgument, "config: stuck_open_margin must be below porv_closure_setpoint");
}

KbConfig KbConfig::parse(std::string_view text) {
    KbConfig cfg;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "action_execution_time_range") cfg.action_execution_time_range = parse_int(key, value);
        else if (key == "water_level_minimum") cfg.water_level_minimum = parse_int(key, value);
        else if (key == "upper_pressure_boundary_primary_loop") cfg.upper_pressure_boundary_primary_loop = parse_int(key, value);
        else if (key == "porv_closure_setpoint") cfg.porv_closure_setpoint = parse_int(key, value);
        else if (key == "hpis_actuation_pressure") cfg.hpis_actuation_pressure = parse_int(key, value);
        else if (key == "stuck_open_margin") cfg.stuck_open_margin = parse_int(key, value);
        else if (key == "literal_suppression_rule") cfg.literal_suppression_rule = parse_bool(key, value);
        else
            throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": unknown key '" +
                                                        std::string(key) + "'");
    }
    cfg.validate();
    return cfg;
}

KbConfig KbConfig::load(const std::filesystem::path& file) { return parse(read_file(file)); }

std::string KbConfig::to_text() const {
    std::string out;
    auto put = [&](const char* key, const std::string& v) { out += std::string(key) + "=" + v + "\n"; };
    put("action_execution_time_range", std::to_string(action_execution_time_range));
    put("water_level_minimum", std::to_string(water_level_minimum));
    put("upper_pressure_boundary_primary_loop", std::to_string(upper_pressure_boundary_primary_loop));
    put("porv_closure_setpoint", std::to_string(porv_closure_setpoint));
    put("hpis_actuation_pressure", std::to_string(hpis_actuation_pressure));
    put("stuck_open_margin", std::to_string(stuck_open_margin));
    put("literal_suppression_rule", literal_suppression_rule ? "true" : "false");
    return out;
}

std::string config_facts(const KbConfig& cfg) {
    cfg.validate();
    std::string out;
    auto fact = [&](const char* pred, long long v) { out += std::string(pred) + "(" + std::to_string(v) + ").\n"; };
    fact("action_execution_time_range", cfg.action_execution_time_range);
    fact("water_level_minimum", cfg.water_level_minimum);
    fact("upper_pressure_boundary_primary_loop", cfg.upper_pressure_boundary_primary_loop);
    fact("porv_closure_setpoint", cfg.porv_closure_setpoint);
    fact("hpis_actuation_pressure", cfg.hpis_actuation_pressure);
    fact("stuck_open_margin", cfg.stuck_open_margin);
    return out;
}

std::vector<std::string> kb_file_names(const KbConfig& cfg) {
    return {"facts.kb",
            "steam_table.kb",
            cfg.literal_suppression_rule ? "recommendations_literal.kb" : "recommendations_open.kb",
            "recommendations.kb",
            "nonobserved.kb",
            "actions.kb"};
}

std::string_view embedded_kb_file(std::string_view name) {
    for (std::size_t i = 0; i < detail::kEmbeddedKbCount; ++i)
        if (detail::kEmbeddedKb[i].name == name) return detail::kEmbeddedKb[i].text;
    throw Error(ErrorKind::NotFound, "no embedded rule file " + std::string(name));
}

namespace {

template <typename Source>
Program assemble(const KbConfig& cfg, Source&& source) {
    Program program;
    for (const auto& name : kb_file_names(cfg)) program.append(parse_program(source(name), name));
    program.append(parse_program(config_facts(cfg), "config"));
    return program;
}

}  // namespace

Program build_kb(const KbConfig& cfg) {
    return assemble(cfg, [](const std::string& name) { return std::string(embedded_kb_file(name)); });
}

Program load_kb_dir(const std::filesystem::path& dir, const KbConfig& cfg) {
    return assemble(cfg, [&](const std::string& name) { return read_file(dir / name); });
}

const std::vector<SteamTableEntry>& steam_table() {
    static const std::vector<SteamTableEntry> table = [] {
        std::vector<SteamTableEntry> t;
        const Program p = parse_program(embedded_kb_file("steam_table.kb"), "steam_table.kb");
        for (const auto& r : p.rules()) {
            if (!r.head || r.head->predicate != "saturation" || r.head->args.size() != 2) continue;
            t.push_back({static_cast<int>(r.head->args[0].number), static_cast<int>(r.head->args[1].number)});
        }
        std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.temperature < b.temperature; });
        return t;
    }();
    return table;
}

int saturation_pressure(int temp) {
    const auto& t = steam_table();
    auto it = std::upper_bound(t.begin(), t.end(), temp,
                               [](int v, const SteamTableEntry& e) { return v < e.temperature; });
    if (it == t.begin()) throw Error(ErrorKind::InvalidArgument, "temperature below table");
    return std::prev(it)->pressure;
}

const std::vector<VariableBinding>& variable_bindings() {
    static const std::vector<VariableBinding> bindings{
        {"reactor_coolant_system_pressure", "Reactor coolant system pressure", "primary_loop_pressure", ""},
        {"steam_generator_a_level", "Steam generator water level (loop A)", "water_level", "steam_generator_secondary_a"},
        {"steam_generator_b_level", "Steam generator water level (loop B)", "water_level", "steam_generator_secondary_b"},
        {"primary_pump_a_flow", "Primary pumps' flow rates (loop A)", "pump_flow", "primary_pump_a"},
        {"primary_pump_b_flow", "Primary pumps' flow rates (loop B)", "pump_flow", "primary_pump_b"},
        {"rcs_inlet_temperature_a", "RCS inlet temperature (loop A)", "inlet_temperature_a", ""},
        {"rcs_inlet_temperature_b", "RCS inlet temperature (loop B)", "inlet_temperature_b", ""},
        {"condensate_pump_a_flow", "Condensate pump flow rate (loop A)", "pump_flow", "condensate_pump_a"},
        {"condensate_pump_b_flow", "Condensate pump flow rate (loop B)", "pump_flow", "condensate_pump_b"},
        {"feedwater_pump_a_flow", "Feedwater pump flow rate (loop A)", "pump_flow", "feedwater_pump_a"},
        {"feedwater_pump_b_flow", "Feedwater pump flow rate (loop B)", "pump_flow", "feedwater_pump_b"},
        {"auxiliary_feedwater_pump_a_flow", "Emergency feedwater pump flow rate (loop A)", "pump_flow",
         "auxiliary_feedwater_pump_a"},
        {"auxiliary_feedwater_pump_b_flow", "Emergency feedwater pump flow rate (loop B)", "pump_flow",
         "auxiliary_feedwater_pump_b"},
        {"high_pressure_injection_pump_flow", "HPIS pump flow rate", "pump_flow", "high_pressure_injection_pump"},
        {"reactor_power", "Reactor power", "power", "reactor1"},
        {"turbine_power", "Turbine power", "power", "turbine1"},
    };
    return bindings;
}

const VariableBinding* find_binding(std::string_view stream) {
    for (const auto& b : variable_bindings())
        if (b.stream == stream) return &b;
    return nullptr;
}

GroundAtom sensor_atom(const VariableBinding& binding, long long value, long long time) {
    GroundAtom a;
    a.predicate = Symbol::intern(binding.predicate);
    if (!binding.component.empty()) a.args.push_back(Value::symbol(binding.component));
    a.args.push_back(Value::integer(value));
    a.args.push_back(Value::integer(time));
    return a;
}

const std::vector<std::string>& known_component_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        const Program facts = parse_program(embedded_kb_file("facts.kb"), "facts.kb");
        for (const auto& r : facts.rules())
            if (r.is_fact() && r.head->predicate == "names") out.push_back(r.head->args.at(0).to_string());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }();
    return names;
}

bool is_known_component(std::string_view name) {
    const auto& names = known_component_names();
    return std::binary_search(names.begin(), names.end(), name, std::less<>());
}

}  // namespace nppx
