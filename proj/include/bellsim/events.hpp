#pragma once

#include "bellsim/source.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace bellsim {

inline constexpr std::uint64_t k_default_seed = 48657;

enum class Channel : std::uint8_t { xx = 0, x = 1 };
enum class Outcome : std::uint8_t { orthogonal = 0, pass = 1 };
enum class Origin : std::uint8_t { cascade = 0, singlet = 1, reexcite = 2, background = 3, dark = 4 };

inline const char* channel_name(Channel c) { return c == Channel::xx ? "XX" : "X"; }

inline const char* origin_name(Origin o) {
    switch (o) {
        case Origin::cascade: return "cascade";
        case Origin::singlet: return "singlet";
        case Origin::reexcite: return "reexcite";
        case Origin::background: return "background";
        case Origin::dark: return "dark";
    }
    return "?";
}

/// One detected photon: which pulse and channel it was seen in, its arrival
/// time within the repetition period, the analyzer setting in force, and
/// which analyzer port fired.
struct DetectionEvent {
    std::uint64_t pulse_index = 0;
    double time_ns = 0.0;
    std::uint32_t setting_id = 0;
    Channel channel = Channel::xx;
    Outcome outcome = Outcome::pass;
    Origin origin = Origin::cascade;
};

/// Stable event order inside a run: pulse, then channel (XX first), then
/// arrival time.
inline bool event_order(const DetectionEvent& a, const DetectionEvent& b) {
    if (a.pulse_index != b.pulse_index) return a.pulse_index < b.pulse_index;
    if (a.channel != b.channel) return a.channel < b.channel;
    return a.time_ns < b.time_ns;
}

/// Effective two-port basis of an analyzer chain: zero or more waveplates
/// followed by exactly one polarizer. A photon that would pass the chain is
/// projected onto `pass`, the other port collects `orthogonal`.
inline MeasurementBasis chain_basis(const std::vector<JonesOperator>& chain) {
    if (chain.empty()) throw std::invalid_argument("analyzer chain must not be empty");
    Matrix2cd u = Matrix2cd::Identity();
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        if (chain[i].kind == JonesKind::polarizer)
            throw std::invalid_argument("analyzer chain may only end with a polarizer");
        u = chain[i].m * u;
    }
    const JonesOperator& last = chain.back();
    if (last.kind != JonesKind::polarizer || !last.angle_deg)
        throw std::invalid_argument("analyzer chain must end with a polarizer");
    const Eigen::Vector2d p = linear_axis(*last.angle_deg);
    const Vector2cd pass(p.x(), p.y());
    const Vector2cd orth(-p.y(), p.x());
    MeasurementBasis b{u.adjoint() * pass, u.adjoint() * orth};
    b.validate(1e-9);
    return b;
}

/// One analyzer configuration for both channels, identified by a label that
/// names what the pair of analyzers measures.
struct AnalyzerSetting {
    std::string label;
    BasisPair bases;

    void validate() const {
        if (label.empty()) throw std::invalid_argument("analyzer setting label must not be empty");
        for (char ch : label) {
            const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' ||
                            ch == '.' || ch == '+';
            if (!ok)
                throw std::invalid_argument(
                    "analyzer setting labels may only use letters, digits, '-', '_', '.', '+'");
        }
        bases.validate(1e-9);
    }
};

inline AnalyzerSetting setting_rectilinear() {
    return {"rectilinear", basis_pair(PolLabel::H, PolLabel::V, PolLabel::H, PolLabel::V)};
}

inline AnalyzerSetting setting_diagonal() {
    return {"diagonal", basis_pair(PolLabel::D, PolLabel::A, PolLabel::D, PolLabel::A)};
}

inline AnalyzerSetting setting_circular() {
    return {"circular", basis_pair(PolLabel::L, PolLabel::R, PolLabel::L, PolLabel::R)};
}

/// Linear analyzer realized as a half-wave plate at `hwp_deg` in front of a
/// fixed polarizer at 0 (the plate doubles the analysis angle).
inline MeasurementBasis hwp_analyzer_basis(double hwp_deg) {
    return chain_basis({waveplate(WaveplateKind::half, hwp_deg), polarizer(0.0)});
}

/// The four standard two-channel settings of a four-setting Bell run:
/// plate angles (11.25, 33.75) degrees on the first channel against
/// (0, 22.5) on the second, i.e. polarization analysis angles (22.5, 67.5)
/// against (0, 45).
inline std::vector<AnalyzerSetting> chsh_settings() {
    const MeasurementBasis a = hwp_analyzer_basis(11.25);
    const MeasurementBasis ap = hwp_analyzer_basis(33.75);
    const MeasurementBasis b = hwp_analyzer_basis(0.0);
    const MeasurementBasis bp = hwp_analyzer_basis(22.5);
    return {{"chsh-a-b", BasisPair{a, b}},
            {"chsh-ap-b", BasisPair{ap, b}},
            {"chsh-a-bp", BasisPair{a, bp}},
            {"chsh-ap-bp", BasisPair{ap, bp}}};
}

/// The three canonical correlation settings in their conventional order.
inline std::vector<AnalyzerSetting> canonical_settings() {
    return {setting_rectilinear(), setting_diagonal(), setting_circular()};
}

/// Complete description of one simulated run: source physics, the analyzer
/// settings cycled through, pulses per setting, and the RNG seed.
struct RunManifest {
    SourceConfig source;
    std::vector<AnalyzerSetting> settings;
    std::uint64_t pulses_per_setting = 0;
    std::uint64_t seed = k_default_seed;

    void validate() const {
        source.validate();
        if (settings.empty()) throw std::invalid_argument("run needs at least one analyzer setting");
        for (const auto& s : settings) s.validate();
        if (pulses_per_setting == 0) throw std::invalid_argument("pulses_per_setting must be > 0");
    }

    /// Canonical serialization covered by the digest. Doubles are written
    /// with round-trip precision so equal manifests hash equally and any
    /// parameter change shows.
    std::string canonical_text() const {
        std::ostringstream os;
        os.precision(17);
        const SourceConfig& c = source;
        os << "splitting_ueV=" << c.splitting_ueV << '\n'
           << "tau_xx_ns=" << c.tau_xx_ns << '\n'
           << "tau_x_ns=" << c.tau_x_ns << '\n'
           << "pulse_width_ns=" << c.pulse_width_ns << '\n'
           << "rep_period_ns=" << c.rep_period_ns << '\n'
           << "background_fraction=" << c.background_fraction << '\n'
           << "tau_bg_ns=" << c.tau_bg_ns << '\n'
           << "reexcite_prob=" << c.reexcite_prob << '\n'
           << "dark_rate_hz=" << c.dark_rate_hz << '\n'
           << "detect_efficiency=" << c.detect_efficiency << '\n'
           << "emit_prob=" << c.emit_prob << '\n'
           << "singlet_prob=" << c.singlet_prob << '\n'
           << "singlet_tau_x_ns=" << c.singlet_tau_x_ns << '\n'
           << "pulses_per_setting=" << pulses_per_setting << '\n'
           << "seed=" << seed << '\n';
        for (std::size_t i = 0; i < settings.size(); ++i) {
            os << "setting." << i << '=' << settings[i].label;
            const Vector2cd vecs[4] = {settings[i].bases.channel1.pass,
                                       settings[i].bases.channel1.orthogonal,
                                       settings[i].bases.channel2.pass,
                                       settings[i].bases.channel2.orthogonal};
            for (const auto& v : vecs)
                for (int j = 0; j < 2; ++j)
                    os << ',' << v(j).real() << ',' << v(j).imag();
            os << '\n';
        }
        return os.str();
    }

    std::uint64_t digest() const {
        const std::string text = canonical_text();
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char ch : text) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// Event file format
//
// One header line, then one CSV row per detection:
//
//   # bellsim-events v1 digest=<16 hex> seed=<u64> pulses_per_setting=<u64>
//     rep_period_ns=<double> settings=<id>:<label>,...
//   pulse_index,channel,time_ns,setting_id,outcome[,origin]
//
// channel is XX or X, outcome is 1 (pass port) or 0 (orthogonal port),
// time is printed with six decimals (femtosecond grain), and the origin
// column appears only when requested. Rows are ordered by pulse, channel,
// time.
// ---------------------------------------------------------------------------

struct EventFileHeader {
    std::uint64_t digest = 0;
    std::uint64_t seed = 0;
    std::uint64_t pulses_per_setting = 0;
    double rep_period_ns = 0.0;
    std::vector<std::pair<std::uint32_t, std::string>> settings;
};

inline void write_events(std::ostream& os, const RunManifest& manifest,
                         const std::vector<DetectionEvent>& events, bool tag_origin = false) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(manifest.digest()));
    os << "# bellsim-events v1 digest=" << buf << " seed=" << manifest.seed
       << " pulses_per_setting=" << manifest.pulses_per_setting;
    std::snprintf(buf, sizeof buf, "%.9g", manifest.source.rep_period_ns);
    os << " rep_period_ns=" << buf << " settings=";
    for (std::size_t i = 0; i < manifest.settings.size(); ++i) {
        if (i) os << ',';
        os << i << ':' << manifest.settings[i].label;
    }
    os << '\n';
    for (const DetectionEvent& e : events) {
        std::snprintf(buf, sizeof buf, "%.6f", e.time_ns);
        os << e.pulse_index << ',' << channel_name(e.channel) << ',' << buf << ',' << e.setting_id
           << ',' << (e.outcome == Outcome::pass ? '1' : '0');
        if (tag_origin) os << ',' << origin_name(e.origin);
        os << '\n';
    }
}

inline void write_events_file(const std::string& path, const RunManifest& manifest,
                              const std::vector<DetectionEvent>& events, bool tag_origin = false) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_events(os, manifest, events, tag_origin);
    if (!os) throw std::runtime_error("failed while writing: " + path);
}

struct EventFileData {
    EventFileHeader header;
    std::vector<DetectionEvent> events;
};

namespace detail {

inline std::string header_field(const std::string& line, const std::string& key) {
    const std::string needle = key + "=";
    const auto pos = line.find(needle);
    if (pos == std::string::npos)
        throw std::runtime_error("event file header lacks field '" + key + "'");
    const auto start = pos + needle.size();
    auto end = line.find(' ', start);
    if (end == std::string::npos) end = line.size();
    return line.substr(start, end - start);
}

} // namespace detail

inline EventFileData read_events(std::istream& is) {
    EventFileData data;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# bellsim-events v1 ", 0) != 0)
        throw std::runtime_error("not a bellsim-events v1 file");

    data.header.digest = std::stoull(detail::header_field(line, "digest"), nullptr, 16);
    data.header.seed = std::stoull(detail::header_field(line, "seed"));
    data.header.pulses_per_setting = std::stoull(detail::header_field(line, "pulses_per_setting"));
    data.header.rep_period_ns = std::stod(detail::header_field(line, "rep_period_ns"));
    const std::string settings = detail::header_field(line, "settings");
    std::istringstream ss(settings);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("malformed settings list in event file header");
        data.header.settings.emplace_back(
            static_cast<std::uint32_t>(std::stoul(item.substr(0, colon))), item.substr(colon + 1));
    }

    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        DetectionEvent e;
        try {
            if (!std::getline(row, field, ',')) throw std::runtime_error("missing pulse index");
            e.pulse_index = std::stoull(field);
            if (!std::getline(row, field, ',')) throw std::runtime_error("missing channel");
            if (field == "XX")
                e.channel = Channel::xx;
            else if (field == "X")
                e.channel = Channel::x;
            else
                throw std::runtime_error("channel must be XX or X");
            if (!std::getline(row, field, ',')) throw std::runtime_error("missing time");
            e.time_ns = std::stod(field);
            if (!std::getline(row, field, ',')) throw std::runtime_error("missing setting id");
            e.setting_id = static_cast<std::uint32_t>(std::stoul(field));
            if (!std::getline(row, field, ',')) throw std::runtime_error("missing outcome");
            if (field == "1")
                e.outcome = Outcome::pass;
            else if (field == "0")
                e.outcome = Outcome::orthogonal;
            else
                throw std::runtime_error("outcome must be 0 or 1");
            if (std::getline(row, field, ',')) {
                bool known = false;
                for (Origin o : {Origin::cascade, Origin::singlet, Origin::reexcite,
                                 Origin::background, Origin::dark}) {
                    if (field == origin_name(o)) {
                        e.origin = o;
                        known = true;
                        break;
                    }
                }
                if (!known) throw std::runtime_error("unknown origin '" + field + "'");
            }
        } catch (const std::exception& ex) {
            throw std::runtime_error("event file line " + std::to_string(line_no) + ": " + ex.what());
        }
        data.events.push_back(e);
    }
    return data;
}

inline EventFileData read_events_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return read_events(is);
}

} // namespace bellsim
