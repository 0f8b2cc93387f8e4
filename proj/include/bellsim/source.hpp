#pragma once

#include "bellsim/detail/quadrature.hpp"
#include "bellsim/two_photon.hpp"

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>

namespace bellsim {

// ---------------------------------------------------------------------------
// Source model
// ---------------------------------------------------------------------------
//
// A pulsed two-photon cascade: every excitation (probability emit_prob per
// pulse) starts a cascade at t_xx = U(0, pulse_width) + Exp(tau_xx); the
// second photon follows after an exponential delay tau ~ Exp(tau_x). While
// the intermediate level is occupied the fine-structure splitting S makes
// the pair state precess,
//
//     |psi(tau)> = (|H1 H2> + exp(i S tau / hbar) |V1 V2>) / sqrt(2),
//
// so averaging over the (possibly gate-truncated) delay distribution
// suppresses the HH-VV coherence by gamma = <exp(i S tau / hbar)>; for an
// untruncated exponential delay Re(gamma) = 1 / (1 + (S tau_x / hbar)^2).
//
// With probability singlet_prob a cascade instead emits the polarization
// singlet (spin-scattered intermediate state), with its own exciton
// lifetime singlet_tau_x_ns: anti-correlated in every basis, and gated
// differently from the entangled pairs when the lifetimes differ.
//
// Uncorrelated light on top of the dot signal: wetting-layer background
// (Poisson per channel, mean background_fraction, transient Exp(tau_bg)),
// re-excitation partners (an extra unpolarized X-channel photon distributed
// like a fresh cascade arrival), and uniform dark counts. Every photon is
// thinned by detect_efficiency; dark counts are detector artifacts and are
// not thinned.
//
// All cascade arrivals are resampled until they land inside one repetition
// period, and the analytic integrals condition on the same event, so the
// Monte-Carlo generator and the closed/quadrature forms here agree at the
// probability level, not only asymptotically.
// ---------------------------------------------------------------------------

struct SourceConfig {
    double splitting_ueV = 0.0;      // fine-structure splitting S, >= 0
    double tau_xx_ns = 0.4;          // first-photon lifetime, > 0
    double tau_x_ns = 0.8;           // intermediate (second-photon) lifetime, > 0
    double pulse_width_ns = 0.1;     // excitation window, >= 0
    double rep_period_ns = 12.5;     // pulse repetition period, > tau_xx_ns
    double background_fraction = 0.0; // mean background photons per channel per pulse, [0, 1]
    double tau_bg_ns = 0.2;          // background transient lifetime, > 0
    double reexcite_prob = 0.0;      // extra uncorrelated X-channel partner probability, [0, 1]
    double dark_rate_hz = 0.0;       // per-channel dark count rate, >= 0
    double detect_efficiency = 1.0;  // per-photon detection probability, (0, 1]
    double emit_prob = 1.0;          // cascade emission probability per pulse, [0, 1]
    double singlet_prob = 0.0;       // spin-scattered (singlet) cascade fraction, [0, 1]
    double singlet_tau_x_ns = 0.0;   // singlet exciton lifetime; 0 means tau_x_ns

    double singlet_tau() const { return singlet_tau_x_ns > 0.0 ? singlet_tau_x_ns : tau_x_ns; }

    void validate() const {
        if (splitting_ueV < 0.0) throw std::invalid_argument("splitting_ueV must be >= 0");
        if (tau_xx_ns <= 0.0) throw std::invalid_argument("tau_xx_ns must be > 0");
        if (tau_x_ns <= 0.0) throw std::invalid_argument("tau_x_ns must be > 0");
        if (pulse_width_ns < 0.0) throw std::invalid_argument("pulse_width_ns must be >= 0");
        if (rep_period_ns <= 0.0) throw std::invalid_argument("rep_period_ns must be > 0");
        if (rep_period_ns <= tau_xx_ns)
            throw std::invalid_argument("rep_period_ns must exceed tau_xx_ns (pulses must be well separated)");
        if (pulse_width_ns >= rep_period_ns)
            throw std::invalid_argument("pulse_width_ns must be smaller than rep_period_ns");
        if (background_fraction < 0.0 || background_fraction > 1.0)
            throw std::invalid_argument("background_fraction must be in [0, 1]");
        if (tau_bg_ns <= 0.0) throw std::invalid_argument("tau_bg_ns must be > 0");
        if (reexcite_prob < 0.0 || reexcite_prob > 1.0)
            throw std::invalid_argument("reexcite_prob must be in [0, 1]");
        if (dark_rate_hz < 0.0) throw std::invalid_argument("dark_rate_hz must be >= 0");
        if (detect_efficiency <= 0.0 || detect_efficiency > 1.0)
            throw std::invalid_argument("detect_efficiency must be in (0, 1]");
        if (emit_prob < 0.0 || emit_prob > 1.0) throw std::invalid_argument("emit_prob must be in [0, 1]");
        if (singlet_prob < 0.0 || singlet_prob > 1.0)
            throw std::invalid_argument("singlet_prob must be in [0, 1]");
        if (singlet_tau_x_ns < 0.0) throw std::invalid_argument("singlet_tau_x_ns must be >= 0");
    }
};

/// Half-open acceptance interval in time-within-period.
struct Window {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi > lo ? hi - lo : 0.0; }
    bool contains(double t) const { return t >= lo && t < hi; }
};

/// Temporal gates applied to each channel, given as center + width and
/// clipped to [0, rep_period] when converted to acceptance windows.
struct GateWindows {
    double xx_center_ns = 0.0;
    double xx_width_ns = 0.0;
    double x_center_ns = 0.0;
    double x_width_ns = 0.0;

    Window xx_window(double period) const { return clip(xx_center_ns, xx_width_ns, period); }
    Window x_window(double period) const { return clip(x_center_ns, x_width_ns, period); }

    void validate(double period) const {
        if (xx_width_ns <= 0.0 || x_width_ns <= 0.0)
            throw std::invalid_argument("gate widths must be > 0");
        if (xx_center_ns < 0.0 || xx_center_ns > period || x_center_ns < 0.0 || x_center_ns > period)
            throw std::invalid_argument("gate centers must lie within one repetition period");
        if (xx_window(period).width() <= 0.0 || x_window(period).width() <= 0.0)
            throw std::invalid_argument("gate windows clip to zero width");
    }

private:
    static Window clip(double center, double width, double period) {
        Window w{center - 0.5 * width, center + 0.5 * width};
        w.lo = std::max(0.0, w.lo);
        w.hi = std::min(period, w.hi);
        return w;
    }
};

/// Pure pair state after the intermediate level lived for tau_ns:
/// (|H1H2> + exp(i S tau / hbar) |V1V2>) / sqrt(2).
inline TwoPhotonState evolved_pure_state(double splitting_ueV, double tau_ns) {
    const double phi = splitting_ueV * tau_ns / k_hbar_uev_ns;
    Vector4cd psi;
    psi << 1.0, 0.0, 0.0, std::exp(complexd(0.0, phi));
    return state_from_pure(psi);
}

namespace detail {

/// Density of t = U(0, w) + Exp(tau) at t >= 0 (no period conditioning).
inline double pulse_exp_pdf(double t, double w, double tau) {
    if (t < 0.0) return 0.0;
    if (w <= 1e-12) return std::exp(-t / tau) / tau;
    const double upper = std::exp(-std::max(t - w, 0.0) / tau);
    return (upper - std::exp(-t / tau)) / w;
}

/// CDF of U(0, w) + Exp(tau).
inline double pulse_exp_cdf(double t, double w, double tau) {
    if (t <= 0.0) return 0.0;
    if (w <= 1e-12) return 1.0 - std::exp(-t / tau);
    const double m = std::min(t, w);
    return (m - tau * (std::exp(-(t - m) / tau) - std::exp(-t / tau))) / w;
}

/// Integral of exp(i k s) * exp(-s / tau) / tau over s in [lo, hi], lo
/// clamped at 0; zero when the interval is empty.
inline complexd exp_phase_integral(double lo, double hi, double tau, double k) {
    lo = std::max(lo, 0.0);
    if (hi <= lo) return 0.0;
    const complexd z(-1.0 / tau, k);
    return (std::exp(z * hi) - std::exp(z * lo)) / (z * tau);
}

/// Double integral over the cascade joint density
///   f(t) dt * exp(-d / tau_delay)/tau_delay dd
/// restricted to t in w1, t + d in w2, t + d <= period, weighted by
/// exp(i k d). All cascade-level acceptances and the phase average reduce
/// to ratios of this quantity.
inline complexd cascade_integral(const SourceConfig& cfg, const Window& w1, const Window& w2,
                                 double tau_delay, double k) {
    const double period = cfg.rep_period_ns;
    const double w = cfg.pulse_width_ns;
    const double t_lo = std::max(0.0, w1.lo);
    const double t_hi = std::min({w1.hi, period, w2.hi});
    if (t_hi <= t_lo) return 0.0;
    const double d_hi_cap = std::min(w2.hi, period);
    const auto integrand = [&](double t) {
        return pulse_exp_pdf(t, w, cfg.tau_xx_ns) *
               exp_phase_integral(w2.lo - t, d_hi_cap - t, tau_delay, k);
    };
    return bellsim::detail::integrate(integrand, t_lo, t_hi, {w, w2.lo, w2.hi}, 1e-12);
}

/// Unnormalized in-window mass of one conditioned single-photon transient
/// (background): P(U + Exp(tau) in window) / P(U + Exp(tau) <= period).
inline double single_transient_acceptance(const SourceConfig& cfg, const Window& win, double tau) {
    const double z = pulse_exp_cdf(cfg.rep_period_ns, cfg.pulse_width_ns, tau);
    if (z <= 0.0) return 0.0;
    const double hi = pulse_exp_cdf(std::min(win.hi, cfg.rep_period_ns), cfg.pulse_width_ns, tau);
    const double lo = pulse_exp_cdf(std::max(win.lo, 0.0), cfg.pulse_width_ns, tau);
    return std::max(0.0, hi - lo) / z;
}

/// Conditioned cascade distribution for one delay lifetime. Ratios of
/// cascade_integral against the full-period normalization give joint and
/// marginal acceptances plus the phase average.
struct CascadeDist {
    const SourceConfig* cfg;
    double tau_delay;
    Window full;
    double z;

    CascadeDist(const SourceConfig& c, double tau)
        : cfg(&c), tau_delay(tau), full{0.0, c.rep_period_ns} {
        z = cascade_integral(c, full, full, tau, 0.0).real();
        if (z <= 0.0) throw std::runtime_error("cascade cannot fit inside the repetition period");
    }

    double joint(const Window& w1, const Window& w2) const {
        return cascade_integral(*cfg, w1, w2, tau_delay, 0.0).real() / z;
    }

    /// <exp(i k tau)> over pairs accepted by (w1, w2).
    complexd phase_average(const Window& w1, const Window& w2, double k) const {
        const double mass = cascade_integral(*cfg, w1, w2, tau_delay, 0.0).real();
        if (mass <= 0.0) throw std::runtime_error("gate accepts no cascade pairs");
        return cascade_integral(*cfg, w1, w2, tau_delay, k) / mass;
    }
};

} // namespace detail

/// Expected per-pulse accepted singles and pair rates, split by origin.
/// fraction is b_eff: the probability that a same-pulse coincidence is NOT
/// a correlated cascade pair.
struct NoiseBudget {
    double xx_dot = 0.0;
    double xx_background = 0.0;
    double xx_dark = 0.0;
    double x_dot = 0.0;
    double x_reexcite = 0.0;
    double x_background = 0.0;
    double x_dark = 0.0;
    double correlated_pairs = 0.0;
    double total_pairs = 0.0;
    double fraction = 1.0;

    double xx_singles() const { return xx_dot + xx_background + xx_dark; }
    double x_singles() const { return x_dot + x_reexcite + x_background + x_dark; }
};

inline NoiseBudget noise_budget(const SourceConfig& cfg, const std::optional<GateWindows>& gate = {}) {
    cfg.validate();
    const double period = cfg.rep_period_ns;
    const Window full{0.0, period};
    Window w1 = full, w2 = full;
    if (gate) {
        gate->validate(period);
        w1 = gate->xx_window(period);
        w2 = gate->x_window(period);
    }

    const double e = cfg.emit_prob;
    const double eps = cfg.detect_efficiency;
    const double q = cfg.singlet_prob;

    const detail::CascadeDist normal(cfg, cfg.tau_x_ns);
    double a1 = (1.0 - q) * normal.joint(w1, full);
    double a2 = (1.0 - q) * normal.joint(full, w2);
    double joint = (1.0 - q) * normal.joint(w1, w2);
    if (q > 0.0) {
        const detail::CascadeDist singlet(cfg, cfg.singlet_tau());
        a1 += q * singlet.joint(w1, full);
        a2 += q * singlet.joint(full, w2);
        joint += q * singlet.joint(w1, w2);
    }

    NoiseBudget nb;
    nb.xx_dot = e * eps * a1;
    nb.x_dot = e * eps * a2;
    nb.correlated_pairs = e * eps * eps * joint;
    // Re-excitation partners arrive like a fresh cascade X photon.
    nb.x_reexcite = e * cfg.reexcite_prob * eps * normal.joint(full, w2);
    nb.xx_background =
        cfg.background_fraction * eps * detail::single_transient_acceptance(cfg, w1, cfg.tau_bg_ns);
    nb.x_background =
        cfg.background_fraction * eps * detail::single_transient_acceptance(cfg, w2, cfg.tau_bg_ns);
    nb.xx_dark = cfg.dark_rate_hz * w1.width() * 1e-9;
    nb.x_dark = cfg.dark_rate_hz * w2.width() * 1e-9;

    // E[N_xx * N_x] = Cov(cascade detections) + E[N_xx] E[N_x]; every
    // non-cascade product is independent. Second-order products are kept,
    // so the fraction is exact for the generator model, not a first-order
    // sum of noise terms.
    const double cov = nb.correlated_pairs - e * e * eps * eps * a1 * a2;
    nb.total_pairs = cov + nb.xx_singles() * nb.x_singles();
    nb.fraction = nb.total_pairs > 0.0 ? 1.0 - nb.correlated_pairs / nb.total_pairs : 1.0;
    return nb;
}

/// b_eff: fraction of same-pulse coincidences that are uncorrelated.
inline double uncorrelated_fraction(const SourceConfig& cfg, const std::optional<GateWindows>& gate = {}) {
    return noise_budget(cfg, gate).fraction;
}

/// <exp(i S tau / hbar)> over the entangled cascades accepted by the gate.
inline complexd phase_suppression(const SourceConfig& cfg, const std::optional<GateWindows>& gate = {}) {
    cfg.validate();
    const double period = cfg.rep_period_ns;
    const Window full{0.0, period};
    Window w1 = full, w2 = full;
    if (gate) {
        gate->validate(period);
        w1 = gate->xx_window(period);
        w2 = gate->x_window(period);
    }
    const detail::CascadeDist normal(cfg, cfg.tau_x_ns);
    return normal.phase_average(w1, w2, cfg.splitting_ueV / k_hbar_uev_ns);
}

/// Effective time-averaged two-photon state seen by the analysis inside the
/// gate: phase-averaged entangled pairs, the gated singlet admixture, and
/// the uncorrelated fraction as white noise,
///   rho = (1 - b) [ (1 - q') rho_phase + q' rho_singlet ] + b I/4.
inline TwoPhotonState time_averaged_state(const SourceConfig& cfg,
                                          const std::optional<GateWindows>& gate = {}) {
    const NoiseBudget nb = noise_budget(cfg, gate);
    const double b = nb.fraction;

    TwoPhotonState dot = maximally_mixed_state();
    if (cfg.emit_prob > 0.0 && nb.correlated_pairs > 0.0) {
        const double period = cfg.rep_period_ns;
        const Window full{0.0, period};
        Window w1 = full, w2 = full;
        if (gate) {
            w1 = gate->xx_window(period);
            w2 = gate->x_window(period);
        }
        const double q = cfg.singlet_prob;
        const detail::CascadeDist normal(cfg, cfg.tau_x_ns);
        const double j_n = (1.0 - q) * normal.joint(w1, w2);
        double j_s = 0.0;
        if (q > 0.0) {
            const detail::CascadeDist singlet(cfg, cfg.singlet_tau());
            j_s = q * singlet.joint(w1, w2);
        }
        const double j_mix = j_n + j_s;
        if (j_mix <= 0.0) throw std::runtime_error("gate accepts no cascade pairs");
        const double q_eff = j_s / j_mix;

        Matrix4cd phase = Matrix4cd::Zero();
        if (j_n > 0.0) {
            const complexd gamma = normal.phase_average(w1, w2, cfg.splitting_ueV / k_hbar_uev_ns);
            phase(0, 0) = 0.5;
            phase(3, 3) = 0.5;
            phase(0, 3) = 0.5 * std::conj(gamma);
            phase(3, 0) = 0.5 * gamma;
        }
        dot.rho = (1.0 - q_eff) * phase + q_eff * singlet_state().rho;
    }

    TwoPhotonState out;
    out.rho = (1.0 - b) * dot.rho + b * maximally_mixed_state().rho;
    out.validate(1e-10, 1e-9);
    return out;
}

/// The three canonical correlation degrees of a state.
struct CorrelationTriple {
    double c_rect = 0.0;
    double c_diag = 0.0;
    double c_circ = 0.0;
};

inline CorrelationTriple analytic_correlations(const TwoPhotonState& s) {
    return {correlation_E(s, basis_pair(PolLabel::H, PolLabel::V, PolLabel::H, PolLabel::V)),
            correlation_E(s, basis_pair(PolLabel::D, PolLabel::A, PolLabel::D, PolLabel::A)),
            correlation_E(s, basis_pair(PolLabel::L, PolLabel::R, PolLabel::L, PolLabel::R))};
}

/// f(psi+) from the three correlation degrees.
inline double fidelity_value(double c_rect, double c_diag, double c_circ) {
    return 0.25 * (1.0 + c_rect + c_diag - c_circ);
}

inline double fidelity_value(const CorrelationTriple& c) {
    return fidelity_value(c.c_rect, c.c_diag, c.c_circ);
}

} // namespace bellsim
