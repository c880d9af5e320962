#pragma once

// Flat key = value protocol configuration with command-line overrides.
//
//   # comment
//   state = example1
//   epsilon = 0.5
//   cutoff = 12
//
// Unknown keys and out-of-domain values are configuration errors.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gaussify/error.hpp"
#include "gaussify/measures.hpp"
#include "gaussify/prep.hpp"
#include "gaussify/serialization.hpp"

namespace gaussify {

/// Raised for malformed or out-of-domain configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class OutputFormat { Csv, Json };

struct ProtocolConfig {
    // initial state: example1 | example2 | example3 | prepared | tmss | file
    std::string state = "example1";
    double epsilon = 0.5;
    double lambda = 0.5;
    double theta = 1.0;
    std::string state_file;

    int cutoff = 12;
    int steps = 4;
    double eta = 1.0;
    int loss_photon_limit = -1;
    double p_min = kMinSuccessProbability;
    bool fast = false;

    bool measure_log_negativity = true;
    bool measure_entropy = true;
    bool measure_purity = true;
    bool measure_squeezing = true;

    // sweep axis: epsilon | eta | lambda | theta
    std::string sweep_axis = "epsilon";
    double sweep_min = 0.05;
    double sweep_max = 0.95;
    int sweep_count = 19;

    // Wigner: reduced state of `wigner_mode` after each listed step
    int wigner_mode = 0;
    std::vector<int> wigner_steps{0, 1, 2};
    WignerGridSpec wigner_grid;

    std::string out;
    OutputFormat format = OutputFormat::Csv;

    friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
    return x;
}

inline int parse_int(const std::string& key, const std::string& v) {
    int x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
    if (out.empty()) throw ConfigError("config: " + key + " expects a comma-separated list");
    return out;
}

} // namespace detail

/// Applies one key = value assignment.
inline void apply_setting(ProtocolConfig& c, const std::string& key_in, const std::string& value_in) {
    using namespace detail;
    const std::string key = trim(key_in);
    const std::string v = trim(value_in);
    if (key == "state") c.state = v;
    else if (key == "epsilon") c.epsilon = parse_double(key, v);
    else if (key == "lambda") c.lambda = parse_double(key, v);
    else if (key == "theta") c.theta = parse_double(key, v);
    else if (key == "state_file") c.state_file = v;
    else if (key == "cutoff") c.cutoff = parse_int(key, v);
    else if (key == "steps") c.steps = parse_int(key, v);
    else if (key == "eta") c.eta = parse_double(key, v);
    else if (key == "loss_photon_limit") c.loss_photon_limit = parse_int(key, v);
    else if (key == "p_min") c.p_min = parse_double(key, v);
    else if (key == "fast") c.fast = parse_bool(key, v);
    else if (key == "measure_log_negativity") c.measure_log_negativity = parse_bool(key, v);
    else if (key == "measure_entropy") c.measure_entropy = parse_bool(key, v);
    else if (key == "measure_purity") c.measure_purity = parse_bool(key, v);
    else if (key == "measure_squeezing") c.measure_squeezing = parse_bool(key, v);
    else if (key == "sweep_axis") c.sweep_axis = v;
    else if (key == "sweep_min") c.sweep_min = parse_double(key, v);
    else if (key == "sweep_max") c.sweep_max = parse_double(key, v);
    else if (key == "sweep_count") c.sweep_count = parse_int(key, v);
    else if (key == "wigner_mode") c.wigner_mode = parse_int(key, v);
    else if (key == "wigner_steps") c.wigner_steps = parse_int_list(key, v);
    else if (key == "wigner_q_min") c.wigner_grid.q_min = parse_double(key, v);
    else if (key == "wigner_q_max") c.wigner_grid.q_max = parse_double(key, v);
    else if (key == "wigner_p_min") c.wigner_grid.p_min = parse_double(key, v);
    else if (key == "wigner_p_max") c.wigner_grid.p_max = parse_double(key, v);
    else if (key == "wigner_q_samples") c.wigner_grid.q_samples = parse_int(key, v);
    else if (key == "wigner_p_samples") c.wigner_grid.p_samples = parse_int(key, v);
    else if (key == "out") c.out = v;
    else if (key == "format") {
        if (v == "csv") c.format = OutputFormat::Csv;
        else if (v == "json") c.format = OutputFormat::Json;
        else throw ConfigError("config: format must be csv or json");
    } else
        throw ConfigError("config: unknown key '" + key + "'");
}

/// "key=value" as given to --set.
inline void apply_override(ProtocolConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    apply_setting(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

inline ProtocolConfig parse_config(std::istream& in, ProtocolConfig c = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
    }
    return c;
}

inline ProtocolConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ProtocolConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

/// Ordered (key, value) pairs; feeding them back through apply_setting
/// reproduces the config exactly.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ProtocolConfig& c) {
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    auto i = [](int x) { return std::to_string(x); };
    std::string steps;
    for (std::size_t k = 0; k < c.wigner_steps.size(); ++k) steps += (k ? "," : "") + std::to_string(c.wigner_steps[k]);
    return {
        {"state", c.state},
        {"epsilon", format_double(c.epsilon)},
        {"lambda", format_double(c.lambda)},
        {"theta", format_double(c.theta)},
        {"state_file", c.state_file},
        {"cutoff", i(c.cutoff)},
        {"steps", i(c.steps)},
        {"eta", format_double(c.eta)},
        {"loss_photon_limit", i(c.loss_photon_limit)},
        {"p_min", format_double(c.p_min)},
        {"fast", b(c.fast)},
        {"measure_log_negativity", b(c.measure_log_negativity)},
        {"measure_entropy", b(c.measure_entropy)},
        {"measure_purity", b(c.measure_purity)},
        {"measure_squeezing", b(c.measure_squeezing)},
        {"sweep_axis", c.sweep_axis},
        {"sweep_min", format_double(c.sweep_min)},
        {"sweep_max", format_double(c.sweep_max)},
        {"sweep_count", i(c.sweep_count)},
        {"wigner_mode", i(c.wigner_mode)},
        {"wigner_steps", steps},
        {"wigner_q_min", format_double(c.wigner_grid.q_min)},
        {"wigner_q_max", format_double(c.wigner_grid.q_max)},
        {"wigner_p_min", format_double(c.wigner_grid.p_min)},
        {"wigner_p_max", format_double(c.wigner_grid.p_max)},
        {"wigner_q_samples", i(c.wigner_grid.q_samples)},
        {"wigner_p_samples", i(c.wigner_grid.p_samples)},
        {"out", c.out},
        {"format", c.format == OutputFormat::Csv ? "csv" : "json"},
    };
}

inline std::string config_to_text(const ProtocolConfig& c) {
    std::string s;
    for (const auto& [k, v] : config_entries(c)) s += k + " = " + v + "\n";
    return s;
}

inline json config_to_json(const ProtocolConfig& c) {
    json j = json::object();
    for (const auto& [k, v] : config_entries(c)) j[k] = v;
    return j;
}

/// Domain checks shared by every command.
inline void validate(const ProtocolConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    static const std::vector<std::string> states{"example1", "example2", "example3", "prepared", "tmss", "file"};
    if (std::find(states.begin(), states.end(), c.state) == states.end()) fail("unknown state '" + c.state + "'");
    if (c.cutoff < 2 || c.cutoff > 40) fail("cutoff must lie in [2, 40]");
    if (c.steps < 0) fail("steps must be non-negative");
    if (!(c.eta >= 0.0 && c.eta <= 1.0)) fail("eta must lie in [0, 1]");
    if (!(c.p_min > 0.0 && c.p_min < 1.0)) fail("p_min must lie in (0, 1)");
    if (c.state == "file" && c.state_file.empty()) fail("state = file needs state_file");
    if (c.wigner_mode != 0 && c.wigner_mode != 1) fail("wigner_mode must be 0 or 1");
    for (int s : c.wigner_steps)
        if (s < 0) fail("wigner_steps must be non-negative");
    try {
        c.wigner_grid.validate();
    } catch (const DomainError& e) {
        fail(e.what());
    }
}

/// The initial two-mode state selected by the config, unit trace.
inline FockOperator initial_state(const ProtocolConfig& c) {
    try {
        if (c.state == "example1") return example_state({ExampleKind::Example1, c.epsilon}, c.cutoff);
        if (c.state == "example2") return example_state({ExampleKind::Example2, c.epsilon}, c.cutoff);
        if (c.state == "example3") return example_state({ExampleKind::Example3, c.epsilon}, c.cutoff);
        if (c.state == "prepared") return prepared_family(c.lambda, c.theta, c.cutoff);
        if (c.state == "tmss") {
            FockOperator rho = normalized(tmss_fock(c.lambda, c.cutoff));
            rho.mark_hermitian(0.0);
            return rho;
        }
        FockOperator rho = read_state_file(c.state_file);
        if (rho.modes() != 2) throw ConfigError("state file must hold a two-mode operator");
        if (!rho.hermitian()) throw ConfigError("state file operator is not hermitian");
        return rho;
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

} // namespace gaussify
