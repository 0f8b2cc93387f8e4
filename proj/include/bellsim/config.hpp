#pragma once

#include "bellsim/correlator.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bellsim {

// ---------------------------------------------------------------------------
// Run configuration files
//
// Flat `key = value` text with '#' comment lines. Unknown and duplicate keys
// are rejected with their line number; physics keys carry their unit in the
// name. Analyzer settings come from the `settings` list, naming builtins
// (rectilinear, diagonal, circular, chsh) or labels defined through
// `setting.<label> = <xx chain> | <x chain>` with chain elements hwp@deg,
// qwp@deg, pol@deg.
// ---------------------------------------------------------------------------

/// Gate request as configured: widths required to gate, centers optional
/// (resolved from the arrival-time peaks when absent).
struct GateSpec {
    std::optional<double> xx_width_ns;
    std::optional<double> x_width_ns;
    std::optional<double> xx_center_ns;
    std::optional<double> x_center_ns;

    bool requested() const {
        return xx_width_ns || x_width_ns || xx_center_ns || x_center_ns;
    }

    GateWindows resolve(const std::vector<DetectionEvent>& events, double rep_period_ns) const {
        if (!xx_width_ns || !x_width_ns)
            throw std::invalid_argument("gating needs both gate widths (gate_xx_width_ns and "
                                        "gate_x_width_ns)");
        return resolve_gate(events, rep_period_ns, *xx_width_ns, *x_width_ns, xx_center_ns,
                            x_center_ns);
    }
};

struct RunSpec {
    RunManifest manifest;
    GateSpec gate;
    std::string events_out; // empty when the config names no output file
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] inline void config_error(std::size_t line, const std::string& what) {
    throw std::runtime_error("config line " + std::to_string(line) + ": " + what);
}

inline double config_double(const std::string& value, const std::string& key, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (trim(value.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    config_error(line, "cannot parse value '" + value + "' for key '" + key + "' as a number");
}

inline std::uint64_t config_u64(const std::string& value, const std::string& key,
                                std::size_t line) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (trim(value.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    config_error(line, "cannot parse value '" + value + "' for key '" + key +
                           "' as an unsigned integer");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) parts.push_back(trim(item));
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

inline JonesOperator parse_chain_element(const std::string& token, std::size_t line) {
    const std::size_t at = token.find('@');
    if (at == std::string::npos)
        config_error(line, "chain element '" + token + "' needs the form name@angle_deg");
    const std::string name = trim(token.substr(0, at));
    const double angle = config_double(trim(token.substr(at + 1)), token, line);
    if (name == "hwp") return waveplate(WaveplateKind::half, angle);
    if (name == "qwp") return waveplate(WaveplateKind::quarter, angle);
    if (name == "pol") return polarizer(angle);
    config_error(line, "unknown chain element '" + name + "' (use hwp, qwp, or pol)");
}

inline MeasurementBasis parse_chain(const std::string& text, const std::string& label,
                                    std::size_t line) {
    std::vector<JonesOperator> chain;
    for (const std::string& token : split(text, ',')) {
        if (token.empty()) config_error(line, "empty chain element in setting '" + label + "'");
        chain.push_back(parse_chain_element(token, line));
    }
    try {
        return chain_basis(chain);
    } catch (const std::exception& err) {
        config_error(line, "setting '" + label + "': " + err.what());
    }
}

} // namespace detail

inline RunSpec parse_run_config(std::istream& is) {
    struct Entry {
        std::string value;
        std::size_t line = 0;
        bool used = false;
    };
    std::map<std::string, Entry> entries;
    std::vector<std::string> order;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            detail::config_error(line_no, "expected 'key = value', got '" + text + "'");
        const std::string key = detail::trim(text.substr(0, eq));
        if (key.empty()) detail::config_error(line_no, "missing key before '='");
        if (entries.count(key))
            detail::config_error(line_no, "duplicate key '" + key + "' (first on line " +
                                              std::to_string(entries[key].line) + ")");
        entries[key] = {detail::trim(text.substr(eq + 1)), line_no, false};
        order.push_back(key);
    }

    const auto take = [&](const std::string& key) -> Entry* {
        const auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    };
    const auto require = [&](const std::string& key) -> Entry& {
        Entry* e = take(key);
        if (!e) throw std::runtime_error("config is missing required key '" + key + "'");
        return *e;
    };
    const auto number = [&](Entry& e, const std::string& key) {
        return detail::config_double(e.value, key, e.line);
    };

    RunSpec spec;
    SourceConfig& src = spec.manifest.source;
    src.splitting_ueV = number(require("splitting_ueV"), "splitting_ueV");
    src.tau_xx_ns = number(require("tau_xx_ns"), "tau_xx_ns");
    src.tau_x_ns = number(require("tau_x_ns"), "tau_x_ns");
    src.pulse_width_ns = number(require("pulse_width_ns"), "pulse_width_ns");
    src.rep_period_ns = number(require("rep_period_ns"), "rep_period_ns");
    src.detect_efficiency = number(require("detect_efficiency"), "detect_efficiency");

    const auto optional_number = [&](const std::string& key, double fallback) {
        Entry* e = take(key);
        return e ? number(*e, key) : fallback;
    };
    src.background_fraction = optional_number("background_fraction", src.background_fraction);
    src.tau_bg_ns = optional_number("tau_bg_ns", src.tau_bg_ns);
    src.reexcite_prob = optional_number("reexcite_prob", src.reexcite_prob);
    src.dark_rate_hz = optional_number("dark_rate_hz", src.dark_rate_hz);
    src.emit_prob = optional_number("emit_prob", src.emit_prob);
    src.singlet_prob = optional_number("singlet_prob", src.singlet_prob);
    src.singlet_tau_x_ns = optional_number("singlet_tau_x_ns", src.singlet_tau_x_ns);

    Entry& pulses = require("pulses_per_setting");
    spec.manifest.pulses_per_setting = detail::config_u64(pulses.value, "pulses_per_setting",
                                                          pulses.line);
    if (Entry* e = take("seed"))
        spec.manifest.seed = detail::config_u64(e->value, "seed", e->line);
    if (Entry* e = take("events_out")) spec.events_out = e->value;

    const auto gate_value = [&](const std::string& key) -> std::optional<double> {
        Entry* e = take(key);
        if (!e) return std::nullopt;
        return number(*e, key);
    };
    spec.gate.xx_width_ns = gate_value("gate_xx_width_ns");
    spec.gate.x_width_ns = gate_value("gate_x_width_ns");
    spec.gate.xx_center_ns = gate_value("gate_xx_center_ns");
    spec.gate.x_center_ns = gate_value("gate_x_center_ns");
    if (spec.gate.requested() && (!spec.gate.xx_width_ns || !spec.gate.x_width_ns))
        throw std::runtime_error(
            "config: gate keys need both gate_xx_width_ns and gate_x_width_ns");

    Entry& settings = require("settings");
    const std::vector<std::string> tokens = detail::split(settings.value, ',');
    for (const std::string& token : tokens) {
        if (token.empty())
            detail::config_error(settings.line, "empty entry in the settings list");
        if (token == "rectilinear") {
            spec.manifest.settings.push_back(setting_rectilinear());
        } else if (token == "diagonal") {
            spec.manifest.settings.push_back(setting_diagonal());
        } else if (token == "circular") {
            spec.manifest.settings.push_back(setting_circular());
        } else if (token == "chsh") {
            for (AnalyzerSetting& s : chsh_settings())
                spec.manifest.settings.push_back(std::move(s));
        } else {
            Entry* def = take("setting." + token);
            if (!def)
                detail::config_error(settings.line,
                                     "setting '" + token +
                                         "' is neither builtin (rectilinear, diagonal, circular, "
                                         "chsh) nor defined via setting." +
                                         token);
            const std::vector<std::string> chains = detail::split(def->value, '|');
            if (chains.size() != 2)
                detail::config_error(def->line, "setting '" + token +
                                                    "' needs two chains separated by '|' "
                                                    "(XX channel | X channel)");
            AnalyzerSetting s;
            s.label = token;
            s.bases.channel1 = detail::parse_chain(chains[0], token, def->line);
            s.bases.channel2 = detail::parse_chain(chains[1], token, def->line);
            spec.manifest.settings.push_back(std::move(s));
        }
    }

    // Custom setting definitions are known keys even when unreferenced.
    for (auto& [key, entry] : entries)
        if (key.rfind("setting.", 0) == 0) entry.used = true;
    for (const std::string& key : order) {
        const Entry& e = entries[key];
        if (!e.used) detail::config_error(e.line, "unknown key '" + key + "'");
    }

    spec.manifest.validate();
    for (std::size_t i = 0; i < spec.manifest.settings.size(); ++i)
        for (std::size_t j = i + 1; j < spec.manifest.settings.size(); ++j)
            if (spec.manifest.settings[i].label == spec.manifest.settings[j].label)
                throw std::runtime_error("config: setting label '" +
                                         spec.manifest.settings[i].label + "' appears twice");
    return spec;
}

inline RunSpec parse_run_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    return parse_run_config(is);
}

} // namespace bellsim
