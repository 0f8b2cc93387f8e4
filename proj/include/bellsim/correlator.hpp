#pragma once

#include "bellsim/events.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bellsim {

// ---------------------------------------------------------------------------
// Coincidence analysis
//
// A pulsed source makes pulse-index pairing exact: every XX event is paired
// with every X event up to `max_offset` pulses away, and the offset-0 bin
// collects the same-pulse coincidences. Pairs with identical outcome flags
// (both pass or both orthogonal) are co-polarized, the rest cross-polarized.
// Zero-delay g2 values normalize the offset-0 count to the mean side peak,
// using offsets |k| in [2, max_offset]: the |k| = 1 peaks are excluded
// because re-excitation can contaminate adjacent pulses.
// ---------------------------------------------------------------------------

struct CoincidenceHistogram {
    int max_offset = 10;
    std::uint32_t setting_id = 0;
    bool gated = false;
    std::uint64_t pulses = 0;      // pulse span of the contributing events
    std::uint64_t xx_accepted = 0; // events surviving the gate, per channel
    std::uint64_t x_accepted = 0;
    std::vector<std::uint64_t> co;    // indexed by offset + max_offset
    std::vector<std::uint64_t> cross;

    std::uint64_t co_at(int offset) const { return co.at(std::size_t(offset + max_offset)); }
    std::uint64_t cross_at(int offset) const { return cross.at(std::size_t(offset + max_offset)); }
    std::uint64_t total_at(int offset) const { return co_at(offset) + cross_at(offset); }

    /// Fold two partial histograms. Exact when the underlying event chunks
    /// do not interleave within max_offset pulses of each other (e.g. the
    /// per-setting blocks of one run).
    void merge(const CoincidenceHistogram& other) {
        if (other.max_offset != max_offset || other.setting_id != setting_id ||
            other.gated != gated)
            throw std::invalid_argument("cannot merge histograms with different metadata");
        for (std::size_t i = 0; i < co.size(); ++i) {
            co[i] += other.co[i];
            cross[i] += other.cross[i];
        }
        pulses += other.pulses;
        xx_accepted += other.xx_accepted;
        x_accepted += other.x_accepted;
    }
};

inline CoincidenceHistogram build_histogram(const std::vector<DetectionEvent>& events,
                                            std::uint32_t setting_id, double rep_period_ns,
                                            const std::optional<GateWindows>& gate = {},
                                            int max_offset = 10) {
    if (max_offset < 10) throw std::invalid_argument("max_offset must be at least 10");
    Window xx_win{0.0, rep_period_ns};
    Window x_win{0.0, rep_period_ns};
    if (gate) {
        gate->validate(rep_period_ns);
        xx_win = gate->xx_window(rep_period_ns);
        x_win = gate->x_window(rep_period_ns);
    }

    std::vector<std::uint64_t> xx_pulse, x_pulse;
    std::vector<std::uint8_t> xx_pass, x_pass;
    std::uint64_t last_pulse = 0;
    bool sorted = true, first = true;
    for (const DetectionEvent& e : events) {
        if (e.setting_id != setting_id) continue;
        if (!first && e.pulse_index < last_pulse) sorted = false;
        last_pulse = e.pulse_index;
        first = false;
        const bool pass = e.outcome == Outcome::pass;
        if (e.channel == Channel::xx && xx_win.contains(e.time_ns)) {
            xx_pulse.push_back(e.pulse_index);
            xx_pass.push_back(pass);
        } else if (e.channel == Channel::x && x_win.contains(e.time_ns)) {
            x_pulse.push_back(e.pulse_index);
            x_pass.push_back(pass);
        }
    }
    if (!sorted) throw std::invalid_argument("events must be sorted by pulse index");
    if (xx_pulse.empty())
        throw std::runtime_error("no XX events for this setting survive the gate");
    if (x_pulse.empty()) throw std::runtime_error("no X events for this setting survive the gate");

    CoincidenceHistogram hist;
    hist.max_offset = max_offset;
    hist.setting_id = setting_id;
    hist.gated = gate.has_value();
    hist.co.assign(std::size_t(2 * max_offset + 1), 0);
    hist.cross.assign(std::size_t(2 * max_offset + 1), 0);
    hist.xx_accepted = xx_pulse.size();
    hist.x_accepted = x_pulse.size();
    const std::uint64_t lo_pulse = std::min(xx_pulse.front(), x_pulse.front());
    const std::uint64_t hi_pulse = std::max(xx_pulse.back(), x_pulse.back());
    hist.pulses = hi_pulse - lo_pulse + 1;

    const std::uint64_t k = std::uint64_t(max_offset);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < xx_pulse.size(); ++i) {
        const std::uint64_t p = xx_pulse[i];
        while (lo < x_pulse.size() && x_pulse[lo] + k < p) ++lo;
        for (std::size_t j = lo; j < x_pulse.size() && x_pulse[j] <= p + k; ++j) {
            const int offset = int(std::int64_t(x_pulse[j]) - std::int64_t(p));
            auto& bins = (xx_pass[i] == x_pass[j]) ? hist.co : hist.cross;
            ++bins[std::size_t(offset + max_offset)];
        }
    }
    return hist;
}

enum class Polarity { co, cross, total };

/// Zero-delay g2: the offset-0 count over the mean side peak, with the
/// Poisson error of both.
struct G2Result {
    double value = 0.0;
    double sigma = 0.0;
    std::uint64_t zero_count = 0;
    double side_mean = 0.0;
    std::uint64_t side_total = 0;
    int side_bins = 0;
};

inline G2Result g2_zero(const CoincidenceHistogram& hist, Polarity polarity = Polarity::total) {
    const auto count_at = [&](int offset) -> std::uint64_t {
        switch (polarity) {
            case Polarity::co: return hist.co_at(offset);
            case Polarity::cross: return hist.cross_at(offset);
            case Polarity::total: return hist.total_at(offset);
        }
        return 0;
    };
    G2Result r;
    r.zero_count = count_at(0);
    for (int k = 2; k <= hist.max_offset; ++k) {
        r.side_total += count_at(k) + count_at(-k);
        r.side_bins += 2;
    }
    if (r.side_total == 0)
        throw std::runtime_error("g2 normalization undefined: side peaks are empty");
    r.side_mean = double(r.side_total) / double(r.side_bins);
    r.value = double(r.zero_count) / r.side_mean;
    const double n0 = double(r.zero_count > 0 ? r.zero_count : 1);
    r.sigma = std::sqrt(n0 / (r.side_mean * r.side_mean) +
                        r.value * r.value / double(r.side_total));
    return r;
}

/// Degree of polarization correlation in one basis, with the normalized
/// zero-delay g2 values it came from.
struct CorrelationResult {
    std::string basis;
    double g2_co = 0.0;
    double g2_cross = 0.0;
    double C = 0.0;
    double sigma_C = 0.0;
    std::uint64_t n_co = 0;    // raw offset-0 counts behind the g2 values
    std::uint64_t n_cross = 0;
    bool gated = false;
};

inline CorrelationResult degree_of_correlation(const G2Result& co, const G2Result& cross,
                                               const std::string& basis = "",
                                               bool gated = false) {
    if (co.value + cross.value <= 0.0)
        throw std::runtime_error("correlation undefined: no coincidences in either polarity");
    CorrelationResult r;
    r.basis = basis;
    r.gated = gated;
    r.g2_co = co.value;
    r.g2_cross = cross.value;
    r.C = (co.value - cross.value) / (co.value + cross.value);
    r.n_co = co.zero_count;
    r.n_cross = cross.zero_count;
    const double n = double(r.n_co + r.n_cross);
    r.sigma_C = n > 0.0 ? 2.0 * std::sqrt(double(r.n_co) * double(r.n_cross) / (n * n * n)) : 0.0;
    return r;
}

inline CorrelationResult measure_correlation(const std::vector<DetectionEvent>& events,
                                             std::uint32_t setting_id, const std::string& basis,
                                             double rep_period_ns,
                                             const std::optional<GateWindows>& gate = {},
                                             int max_offset = 10) {
    const CoincidenceHistogram hist =
        build_histogram(events, setting_id, rep_period_ns, gate, max_offset);
    return degree_of_correlation(g2_zero(hist, Polarity::co), g2_zero(hist, Polarity::cross),
                                 basis, gate.has_value());
}

struct ValueWithError {
    double value = 0.0;
    double sigma = 0.0;
};

/// f(psi+) = (1 + C_rect + C_diag - C_circ) / 4 with the quadrature error.
inline ValueWithError fidelity(const CorrelationResult& rect, const CorrelationResult& diag,
                               const CorrelationResult& circ) {
    ValueWithError f;
    f.value = 0.25 * (1.0 + rect.C + diag.C - circ.C);
    f.sigma = 0.25 * std::sqrt(rect.sigma_C * rect.sigma_C + diag.sigma_C * diag.sigma_C +
                               circ.sigma_C * circ.sigma_C);
    return f;
}

enum class BellPlane { rc, dc, rd };

/// Two-setting Bell parameter from two correlation degrees:
/// S_RC = sqrt(2)(C_rect - C_circ), S_DC = sqrt(2)(C_diag - C_circ),
/// S_RD = sqrt(2)(C_rect + C_diag); classical bound 2 in each plane.
inline ValueWithError bell_two_setting(const CorrelationResult& a, const CorrelationResult& b,
                                       BellPlane plane) {
    const double s2 = std::sqrt(2.0);
    ValueWithError r;
    r.value = plane == BellPlane::rd ? s2 * (a.C + b.C) : s2 * (a.C - b.C);
    r.sigma = s2 * std::sqrt(a.sigma_C * a.sigma_C + b.sigma_C * b.sigma_C);
    return r;
}

/// The paper-style summary of one run: three correlation degrees, the three
/// two-setting Bell parameters, and the fidelity.
struct BellResult {
    CorrelationResult rect;
    CorrelationResult diag;
    CorrelationResult circ;
    ValueWithError s_rc;
    ValueWithError s_dc;
    ValueWithError s_rd;
    ValueWithError f;
    bool gated = false;
};

inline BellResult bell_from_correlations(const CorrelationResult& rect,
                                         const CorrelationResult& diag,
                                         const CorrelationResult& circ) {
    BellResult r;
    r.rect = rect;
    r.diag = diag;
    r.circ = circ;
    r.s_rc = bell_two_setting(rect, circ, BellPlane::rc);
    r.s_dc = bell_two_setting(diag, circ, BellPlane::dc);
    r.s_rd = bell_two_setting(rect, diag, BellPlane::rd);
    r.f = fidelity(rect, diag, circ);
    r.gated = rect.gated;
    return r;
}

inline std::uint32_t find_setting(const RunManifest& m, const std::string& label) {
    for (std::size_t i = 0; i < m.settings.size(); ++i)
        if (m.settings[i].label == label) return static_cast<std::uint32_t>(i);
    throw std::runtime_error("run has no setting labeled '" + label + "'");
}

/// Full two-setting Bell analysis of a run holding the three canonical
/// settings.
inline BellResult measure_bell(const std::vector<DetectionEvent>& events, const RunManifest& m,
                               const std::optional<GateWindows>& gate = {}, int max_offset = 10) {
    const double period = m.source.rep_period_ns;
    const auto one = [&](const char* label) {
        return measure_correlation(events, find_setting(m, label), label, period, gate,
                                   max_offset);
    };
    return bell_from_correlations(one("rectilinear"), one("diagonal"), one("circular"));
}

// ---------------------------------------------------------------------------
// Four-setting CHSH
// ---------------------------------------------------------------------------

struct ChshTerm {
    std::string setting_label;
    double e = 0.0;
    double sigma = 0.0;
};

/// Signs applied to the four correlation terms, in setting order. The
/// convention is part of the result so a reported S is unambiguous.
struct SignConvention {
    std::array<int, 4> signs{+1, -1, +1, +1};
    std::string description;
};

/// The convention calibrated on the ideal state: at the standard plate
/// angles the (a', b) correlation is negative, and subtracting it yields
/// +2 sqrt(2).
inline SignConvention chsh_sign_convention() {
    return {{+1, -1, +1, +1}, "S = E(a,b) - E(ap,b) + E(a,bp) + E(ap,bp)"};
}

/// For terms tabulated as magnitudes (the negative correlation already
/// sign-folded), every term adds.
inline SignConvention chsh_tabulated_convention() {
    return {{+1, +1, +1, +1}, "S = sum of sign-folded tabulated terms"};
}

struct ChshResult {
    std::array<ChshTerm, 4> terms;
    SignConvention convention;
    double s = 0.0;
    double sigma = 0.0;
};

inline ChshResult chsh(const std::array<ChshTerm, 4>& terms, const SignConvention& convention) {
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            if (terms[i].setting_label == terms[j].setting_label)
                throw std::invalid_argument("chsh needs four distinct setting labels, got '" +
                                            terms[i].setting_label + "' twice");
    ChshResult r;
    r.terms = terms;
    r.convention = convention;
    double var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        r.s += convention.signs[i] * terms[i].e;
        var += terms[i].sigma * terms[i].sigma;
    }
    r.sigma = std::sqrt(var);
    return r;
}

inline const std::array<const char*, 4>& chsh_labels() {
    static const std::array<const char*, 4> labels{"chsh-a-b", "chsh-ap-b", "chsh-a-bp",
                                                   "chsh-ap-bp"};
    return labels;
}

/// CHSH from a run holding the four standard settings; each E is the
/// degree of correlation measured in that setting.
inline ChshResult measure_chsh(const std::vector<DetectionEvent>& events, const RunManifest& m,
                               const std::optional<GateWindows>& gate = {}, int max_offset = 10) {
    std::array<ChshTerm, 4> terms;
    for (std::size_t i = 0; i < 4; ++i) {
        const char* label = chsh_labels()[i];
        const CorrelationResult c = measure_correlation(events, find_setting(m, label), label,
                                                        m.source.rep_period_ns, gate, max_offset);
        terms[i] = {label, c.C, c.sigma_C};
    }
    return chsh(terms, chsh_sign_convention());
}

inline std::uint32_t find_setting(const EventFileHeader& h, const std::string& label) {
    for (const auto& [id, name] : h.settings)
        if (name == label) return id;
    throw std::runtime_error("event file has no setting labeled '" + label + "'");
}

/// All wanted settings or an error listing every missing label.
inline void require_settings(const EventFileHeader& h, const std::vector<std::string>& labels) {
    std::string missing;
    for (const std::string& label : labels) {
        bool found = false;
        for (const auto& entry : h.settings) found = found || entry.second == label;
        if (!found) missing += (missing.empty() ? "" : ", ") + label;
    }
    if (!missing.empty()) throw std::runtime_error("event file lacks settings: " + missing);
}

inline BellResult measure_bell(const EventFileData& data,
                               const std::optional<GateWindows>& gate = {}, int max_offset = 10) {
    require_settings(data.header, {"rectilinear", "diagonal", "circular"});
    const auto one = [&](const char* label) {
        return measure_correlation(data.events, find_setting(data.header, label), label,
                                   data.header.rep_period_ns, gate, max_offset);
    };
    return bell_from_correlations(one("rectilinear"), one("diagonal"), one("circular"));
}

inline ChshResult measure_chsh(const EventFileData& data,
                               const std::optional<GateWindows>& gate = {}, int max_offset = 10) {
    require_settings(data.header,
                     {chsh_labels()[0], chsh_labels()[1], chsh_labels()[2], chsh_labels()[3]});
    std::array<ChshTerm, 4> terms;
    for (std::size_t i = 0; i < 4; ++i) {
        const char* label = chsh_labels()[i];
        const CorrelationResult c =
            measure_correlation(data.events, find_setting(data.header, label), label,
                                data.header.rep_period_ns, gate, max_offset);
        terms[i] = {label, c.C, c.sigma_C};
    }
    return chsh(terms, chsh_sign_convention());
}

// ---------------------------------------------------------------------------
// Analytic path: the same observables evaluated directly on a two-photon
// state, for calibration and for oracle tests of the event pipeline.
// ---------------------------------------------------------------------------

/// CorrelationResult for a known state: C is exact, and the g2 fields carry
/// the ideal normalized levels 1 +- C of an unpolarized source.
inline CorrelationResult correlation_of_state(const TwoPhotonState& s, const BasisPair& pair,
                                              const std::string& basis) {
    CorrelationResult r;
    r.basis = basis;
    r.C = correlation_E(s, pair);
    r.g2_co = 1.0 + r.C;
    r.g2_cross = 1.0 - r.C;
    return r;
}

inline BellResult analytic_bell(const TwoPhotonState& s) {
    return bell_from_correlations(
        correlation_of_state(s, basis_pair(PolLabel::H, PolLabel::V, PolLabel::H, PolLabel::V),
                             "rectilinear"),
        correlation_of_state(s, basis_pair(PolLabel::D, PolLabel::A, PolLabel::D, PolLabel::A),
                             "diagonal"),
        correlation_of_state(s, basis_pair(PolLabel::L, PolLabel::R, PolLabel::L, PolLabel::R),
                             "circular"));
}

inline ChshResult analytic_chsh(const TwoPhotonState& s) {
    std::array<ChshTerm, 4> terms;
    const auto settings = chsh_settings();
    for (std::size_t i = 0; i < 4; ++i)
        terms[i] = {settings[i].label, correlation_E(s, settings[i].bases), 0.0};
    return chsh(terms, chsh_sign_convention());
}

/// Checks the identity S = sqrt(2)(E(D,D) - E(C,C)) for an unpolarized
/// state: the left side from the two correlation degrees, the right side as
/// the four-setting CHSH value at diagonal/circular analysis on channel 1
/// against the two elliptical bases on channel 2.
inline std::pair<double, double> bell_equivalence_check(const TwoPhotonState& rho) {
    rho.validate(1e-9, 1e-9);
    const double pol1 = polarization_degree(reduced_state_1(rho));
    const double pol2 = polarization_degree(reduced_state_2(rho));
    if (pol1 > 1e-9 || pol2 > 1e-9) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "state is polarized (degrees %.3e, %.3e): the two-setting shortcut needs an "
                      "unpolarized source",
                      pol1, pol2);
        throw std::invalid_argument(buf);
    }

    const BasisPair dd = basis_pair(PolLabel::D, PolLabel::A, PolLabel::D, PolLabel::A);
    const BasisPair cc = basis_pair(PolLabel::L, PolLabel::R, PolLabel::L, PolLabel::R);
    const double lhs = std::sqrt(2.0) * (correlation_E(rho, dd) - correlation_E(rho, cc));

    const double r = 1.0 / std::sqrt(2.0);
    const MeasurementBasis a = poincare_basis(Eigen::Vector3d(0, 1, 0));
    const MeasurementBasis ap = poincare_basis(Eigen::Vector3d(0, 0, 1));
    const MeasurementBasis b = poincare_basis(Eigen::Vector3d(0, r, r));
    const MeasurementBasis bp = poincare_basis(Eigen::Vector3d(0, r, -r));
    const double rhs = correlation_E(rho, BasisPair{a, b}) - correlation_E(rho, BasisPair{ap, b}) +
                       correlation_E(rho, BasisPair{a, bp}) + correlation_E(rho, BasisPair{ap, bp});
    return {lhs, rhs};
}

// ---------------------------------------------------------------------------
// Gate resolution
// ---------------------------------------------------------------------------

/// Gate windows from requested widths, centered on each channel's arrival
/// time peak (the mode of a 250-bin in-period histogram) unless an explicit
/// center is given.
inline GateWindows resolve_gate(const std::vector<DetectionEvent>& events, double rep_period_ns,
                                double xx_width_ns, double x_width_ns,
                                std::optional<double> xx_center_ns = {},
                                std::optional<double> x_center_ns = {}) {
    const auto peak = [&](Channel ch) {
        constexpr int bins = 250;
        std::array<std::uint64_t, bins> hist{};
        std::uint64_t n = 0;
        for (const DetectionEvent& e : events) {
            if (e.channel != ch) continue;
            const int b = std::min(bins - 1, int(e.time_ns / rep_period_ns * bins));
            ++hist[std::size_t(std::max(0, b))];
            ++n;
        }
        if (n == 0)
            throw std::runtime_error(std::string("cannot center gate: no events on channel ") +
                                     channel_name(ch));
        int best = 0;
        for (int i = 1; i < bins; ++i)
            if (hist[std::size_t(i)] > hist[std::size_t(best)]) best = i;
        return (best + 0.5) * rep_period_ns / bins;
    };

    GateWindows g;
    g.xx_width_ns = xx_width_ns;
    g.x_width_ns = x_width_ns;
    g.xx_center_ns = xx_center_ns ? *xx_center_ns : peak(Channel::xx);
    g.x_center_ns = x_center_ns ? *x_center_ns : peak(Channel::x);
    g.validate(rep_period_ns);
    return g;
}

} // namespace bellsim
