#pragma once

#include "bellsim/events.hpp"
#include "bellsim/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bellsim {

// ---------------------------------------------------------------------------
// Monte-Carlo event generation
//
// Pulses are numbered globally: setting s owns pulse indices
// [s * pulses_per_setting, (s + 1) * pulses_per_setting). Every pulse draws
// from its own counter-keyed RNG stream (seed, setting, pulse index), so a
// run can be generated in chunks, in any partition, and concatenation
// reproduces the single-pass run byte for byte.
//
// Draw order inside one pulse is part of the reproducibility contract:
//   1. emission coin               (only when 0 < emit_prob < 1)
//   2. singlet coin                (only when singlet_prob > 0)
//   3. cascade arrival times       {pulse offset, XX delay, X delay},
//                                  redrawn until the pair fits the period
//   4. joint outcome uniform
//   5. XX and X efficiency coins   (only when detect_efficiency < 1)
//   6. re-excitation coin          (only when reexcite_prob > 0), then the
//                                  partner's arrival triple, port coin,
//                                  efficiency coin
//   7. per-channel background      count, then per photon arrival pair,
//                                  port coin, efficiency coin
//   8. per-channel dark counts     count, then per count arrival, port coin
// Draw presence depends only on configuration values, never on sampled
// data, except for counts and the resampling loops, which consume a
// data-dependent number of draws inside their own step.
// ---------------------------------------------------------------------------

/// One accepted cascade: arrival times of both photons and how many
/// attempts were discarded to fit the repetition period.
struct EmissionTimes {
    double t_xx = 0.0;
    double t_x = 0.0;
    std::uint64_t resamples = 0;
};

namespace detail {

inline constexpr int k_max_resamples = 10000;

inline double draw_pulse_offset(const SourceConfig& cfg, PulseRng& rng) {
    return cfg.pulse_width_ns > 0.0 ? rng.uniform(cfg.pulse_width_ns) : 0.0;
}

} // namespace detail

/// Cascade arrival pair conditioned on both photons landing inside one
/// repetition period; `tau_x` picks the intermediate lifetime (normal or
/// singlet cascade).
inline EmissionTimes sample_emission_times(const SourceConfig& cfg, double tau_x, PulseRng& rng) {
    EmissionTimes out;
    for (int attempt = 0; attempt < detail::k_max_resamples; ++attempt) {
        const double u = detail::draw_pulse_offset(cfg, rng);
        const double t_xx = u + rng.exponential(cfg.tau_xx_ns);
        const double t_x = t_xx + rng.exponential(tau_x);
        if (t_x < cfg.rep_period_ns) {
            out.t_xx = t_xx;
            out.t_x = t_x;
            return out;
        }
        ++out.resamples;
    }
    throw std::runtime_error("cascade arrivals keep overflowing the repetition period");
}

namespace detail {

/// Background arrival conditioned on landing inside the period.
inline double sample_transient(const SourceConfig& cfg, double tau, PulseRng& rng,
                               std::uint64_t& resamples) {
    for (int attempt = 0; attempt < k_max_resamples; ++attempt) {
        const double t = draw_pulse_offset(cfg, rng) + rng.exponential(tau);
        if (t < cfg.rep_period_ns) return t;
        ++resamples;
    }
    throw std::runtime_error("background arrivals keep overflowing the repetition period");
}

/// Per-setting outcome tables: the joint amplitude of the evolved pair
/// state in this analyzer pair needs only two precomputed coefficients per
/// outcome, and the singlet outcome distribution is fixed.
struct SettingKernel {
    complexd c00[4];
    complexd c11[4];
    double singlet_cum[4];

    explicit SettingKernel(const BasisPair& pair) {
        const Vector2cd ports1[2] = {pair.channel1.pass, pair.channel1.orthogonal};
        const Vector2cd ports2[2] = {pair.channel2.pass, pair.channel2.orthogonal};
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        double cum = 0.0;
        for (int i = 0; i < 4; ++i) {
            const Vector2cd& v1 = ports1[i >> 1];
            const Vector2cd& v2 = ports2[i & 1];
            c00[i] = std::conj(v1(0)) * std::conj(v2(0)) * inv_sqrt2;
            c11[i] = std::conj(v1(1)) * std::conj(v2(1)) * inv_sqrt2;
            const complexd amp_singlet =
                (std::conj(v1(0)) * std::conj(v2(1)) - std::conj(v1(1)) * std::conj(v2(0))) *
                inv_sqrt2;
            cum += std::norm(amp_singlet);
            singlet_cum[i] = cum;
        }
    }

    /// Outcome index in {0: pass/pass, 1: pass/orth, 2: orth/pass,
    /// 3: orth/orth} for an entangled pair with splitting phase `phi`.
    int pick_evolved(double phi, double u) const {
        const complexd phase = std::polar(1.0, phi);
        double cum = 0.0;
        for (int i = 0; i < 3; ++i) {
            cum += std::norm(c00[i] + phase * c11[i]);
            if (u < cum) return i;
        }
        return 3;
    }

    int pick_singlet(double u) const {
        for (int i = 0; i < 3; ++i)
            if (u < singlet_cum[i]) return i;
        return 3;
    }
};

} // namespace detail

struct RunResult {
    std::vector<DetectionEvent> events;
    std::uint64_t resamples = 0;
};

inline std::uint64_t total_pulses(const RunManifest& m) {
    return m.settings.size() * m.pulses_per_setting;
}

namespace detail {

inline void generate_pulse(const SourceConfig& cfg, const SettingKernel& kernel,
                           std::uint32_t setting_id, std::uint64_t pulse, std::uint64_t seed,
                           std::vector<DetectionEvent>& out, std::uint64_t& resamples) {
    PulseRng rng(seed, setting_id, pulse);
    const std::size_t pulse_start = out.size();
    const double eps = cfg.detect_efficiency;

    bool emitted = cfg.emit_prob > 0.0;
    if (cfg.emit_prob > 0.0 && cfg.emit_prob < 1.0) emitted = rng.bernoulli(cfg.emit_prob);

    if (emitted) {
        const bool is_singlet = cfg.singlet_prob > 0.0 && rng.bernoulli(cfg.singlet_prob);
        const double tau = is_singlet ? cfg.singlet_tau() : cfg.tau_x_ns;
        const EmissionTimes et = sample_emission_times(cfg, tau, rng);
        resamples += et.resamples;

        const double u_out = rng.uniform();
        int outcome;
        if (is_singlet) {
            outcome = kernel.pick_singlet(u_out);
        } else {
            const double phi = cfg.splitting_ueV * (et.t_x - et.t_xx) / k_hbar_uev_ns;
            outcome = kernel.pick_evolved(phi, u_out);
        }
        const bool det_xx = eps >= 1.0 || rng.bernoulli(eps);
        const bool det_x = eps >= 1.0 || rng.bernoulli(eps);
        const Origin orig = is_singlet ? Origin::singlet : Origin::cascade;
        if (det_xx)
            out.push_back({pulse, et.t_xx, setting_id, Channel::xx,
                           (outcome & 2) ? Outcome::orthogonal : Outcome::pass, orig});
        if (det_x)
            out.push_back({pulse, et.t_x, setting_id, Channel::x,
                           (outcome & 1) ? Outcome::orthogonal : Outcome::pass, orig});

        if (cfg.reexcite_prob > 0.0 && rng.bernoulli(cfg.reexcite_prob)) {
            const EmissionTimes partner = sample_emission_times(cfg, cfg.tau_x_ns, rng);
            resamples += partner.resamples;
            const Outcome port = rng.bernoulli(0.5) ? Outcome::pass : Outcome::orthogonal;
            if (eps >= 1.0 || rng.bernoulli(eps))
                out.push_back({pulse, partner.t_x, setting_id, Channel::x, port, Origin::reexcite});
        }
    }

    if (cfg.background_fraction > 0.0) {
        for (Channel ch : {Channel::xx, Channel::x}) {
            const int n = rng.poisson(cfg.background_fraction);
            for (int i = 0; i < n; ++i) {
                const double t = sample_transient(cfg, cfg.tau_bg_ns, rng, resamples);
                const Outcome port = rng.bernoulli(0.5) ? Outcome::pass : Outcome::orthogonal;
                if (eps >= 1.0 || rng.bernoulli(eps))
                    out.push_back({pulse, t, setting_id, ch, port, Origin::background});
            }
        }
    }

    if (cfg.dark_rate_hz > 0.0) {
        const double mean = cfg.dark_rate_hz * cfg.rep_period_ns * 1e-9;
        for (Channel ch : {Channel::xx, Channel::x}) {
            const int n = rng.poisson(mean);
            for (int i = 0; i < n; ++i) {
                const double t = rng.uniform(cfg.rep_period_ns);
                const Outcome port = rng.bernoulli(0.5) ? Outcome::pass : Outcome::orthogonal;
                out.push_back({pulse, t, setting_id, ch, port, Origin::dark});
            }
        }
    }

    std::sort(out.begin() + pulse_start, out.end(), event_order);
}

} // namespace detail

/// Events for the global pulse range [first_pulse, first_pulse + count),
/// clamped to the run's extent. Concatenating chunks that partition the
/// range reproduces generate_run exactly.
inline RunResult generate_chunk(const RunManifest& m, std::uint64_t first_pulse,
                                std::uint64_t count) {
    m.validate();
    const std::uint64_t total = total_pulses(m);
    const std::uint64_t begin = std::min(first_pulse, total);
    const std::uint64_t end = std::min(begin + count, total);

    std::vector<detail::SettingKernel> kernels;
    kernels.reserve(m.settings.size());
    for (const auto& s : m.settings) kernels.emplace_back(s.bases);

    RunResult result;
    const NoiseBudget nb = noise_budget(m.source);
    const double per_pulse = nb.xx_singles() + nb.x_singles();
    result.events.reserve(static_cast<std::size_t>(double(end - begin) * (per_pulse + 0.05)));

    for (std::uint64_t pulse = begin; pulse < end; ++pulse) {
        const auto setting = static_cast<std::uint32_t>(pulse / m.pulses_per_setting);
        detail::generate_pulse(m.source, kernels[setting], setting, pulse, m.seed, result.events,
                               result.resamples);
    }
    return result;
}

inline RunResult generate_run(const RunManifest& m) {
    return generate_chunk(m, 0, total_pulses(m));
}

} // namespace bellsim
