#pragma once

#include "bellsim/correlator.hpp"
#include "bellsim/splitting.hpp"

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace bellsim {

// ---------------------------------------------------------------------------
// Reports: ordered `key = value` lines plus comma-separated tables. All
// numbers print with fixed precision so reruns are bit-identical.
// ---------------------------------------------------------------------------

inline std::string format_fixed(double value, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, value);
    return buf;
}

struct Report {
    std::vector<std::pair<std::string, std::string>> lines;

    void add(const std::string& key, const std::string& value) {
        lines.emplace_back(key, value);
    }
    void add(const std::string& key, double value, int precision = 6) {
        add(key, format_fixed(value, precision));
    }
    void add_u64(const std::string& key, std::uint64_t value) {
        add(key, std::to_string(value));
    }
    void add_hex(const std::string& key, std::uint64_t value) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
        add(key, std::string(buf));
    }
    void add_flag(const std::string& key, bool value) { add(key, value ? "true" : "false"); }

    std::string text() const {
        std::string out;
        for (const auto& [key, value] : lines) {
            out += key;
            out += " = ";
            out += value;
            out += '\n';
        }
        return out;
    }
};

inline void add_correlation(Report& r, const std::string& key, const CorrelationResult& c) {
    r.add(key, c.C);
    r.add(key + "_sigma", c.sigma_C);
}

inline void add_value(Report& r, const std::string& key, const ValueWithError& v) {
    r.add(key, v.value);
    r.add(key + "_sigma", v.sigma);
}

inline Report bell_report(const BellResult& b) {
    Report r;
    r.add_flag("gated", b.gated);
    add_correlation(r, "c_rect", b.rect);
    add_correlation(r, "c_diag", b.diag);
    add_correlation(r, "c_circ", b.circ);
    add_value(r, "fidelity", b.f);
    add_value(r, "s_rc", b.s_rc);
    add_value(r, "s_dc", b.s_dc);
    add_value(r, "s_rd", b.s_rd);
    return r;
}

inline std::string bell_csv(const BellResult& b) {
    std::string out = "basis,C,sigma_C,g2_co,g2_cross,n_co,n_cross,gated\n";
    for (const CorrelationResult* c : {&b.rect, &b.diag, &b.circ}) {
        out += c->basis + ',' + format_fixed(c->C) + ',' + format_fixed(c->sigma_C) + ',' +
               format_fixed(c->g2_co) + ',' + format_fixed(c->g2_cross) + ',' +
               std::to_string(c->n_co) + ',' + std::to_string(c->n_cross) + ',' +
               (c->gated ? "true" : "false") + '\n';
    }
    return out;
}

inline Report chsh_report(const ChshResult& c) {
    Report r;
    r.add("sign_convention", c.convention.description);
    for (std::size_t i = 0; i < 4; ++i) {
        r.add("e_" + c.terms[i].setting_label, c.terms[i].e);
        r.add("e_" + c.terms[i].setting_label + "_sigma", c.terms[i].sigma);
    }
    r.add("s_chsh", c.s);
    r.add("s_chsh_sigma", c.sigma);
    return r;
}

inline std::string chsh_csv(const ChshResult& c) {
    std::string out = "setting,sign,E,sigma_E\n";
    for (std::size_t i = 0; i < 4; ++i) {
        out += c.terms[i].setting_label + ',' + (c.convention.signs[i] > 0 ? "+1" : "-1") + ',' +
               format_fixed(c.terms[i].e) + ',' + format_fixed(c.terms[i].sigma) + '\n';
    }
    return out;
}

inline Report splitting_report(const SplittingFit& fit, double mean_energy_ueV) {
    Report r;
    r.add("splitting_ueV", fit.s_ueV);
    r.add("splitting_sigma_ueV", fit.sigma_s_ueV);
    r.add("phase_deg", fit.phase_deg);
    r.add("offset_ueV", fit.offset_ueV);
    r.add("rms_residual_ueV", fit.rms_residual_ueV);
    r.add("mean_energy_ueV", mean_energy_ueV);
    r.add_flag("meets_entanglement_threshold", fit.meets_entanglement_threshold());
    return r;
}

} // namespace bellsim
