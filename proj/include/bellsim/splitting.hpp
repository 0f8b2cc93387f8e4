#pragma once

#include "bellsim/polarization.hpp"
#include "bellsim/rng.hpp"

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bellsim {

// ---------------------------------------------------------------------------
// Fine-structure splitting probe
//
// Rotating a half-wave plate in the emission path makes the exciton minus
// biexciton photon energy difference oscillate as S * cos(4(theta - phi)):
// the plate rotates polarization by twice its angle and the energy
// difference is antisymmetric between the two exciton eigenstates, so one
// plate turn covers four oscillation periods. The fit is linear in
// (A cos 4phi, A sin 4phi, offset), so least squares is exact and needs no
// iteration.
// ---------------------------------------------------------------------------

struct SplittingSample {
    double angle_deg = 0.0;
    double delta_e_ueV = 0.0;
    double sigma_ueV = 0.0; // 0 means unknown; all-or-none across a scan
};

struct SplittingScan {
    std::vector<SplittingSample> samples;
    double mean_energy_ueV = 0.0; // energy-difference reference the samples are relative to

    void validate() const {
        if (samples.size() < 8)
            throw std::invalid_argument("splitting scan needs at least 8 samples");
        double lo = samples.front().angle_deg, hi = lo;
        bool weighted = samples.front().sigma_ueV > 0.0;
        for (const SplittingSample& s : samples) {
            if (!(s.angle_deg >= 0.0) || s.angle_deg >= 180.0)
                throw std::invalid_argument("scan angles must lie in [0, 180) degrees");
            if (s.sigma_ueV < 0.0)
                throw std::invalid_argument("sample sigma must be >= 0");
            if ((s.sigma_ueV > 0.0) != weighted)
                throw std::invalid_argument(
                    "either every sample or no sample may carry a noise sigma");
            lo = std::min(lo, s.angle_deg);
            hi = std::max(hi, s.angle_deg);
        }
        if (hi - lo < 90.0 - 1e-9)
            throw std::invalid_argument(
                "scan must span at least one oscillation period (90 degrees)");
    }
};

/// `count` angles evenly covering [0, 180) degrees.
inline std::vector<double> scan_angles(int count = 20) {
    if (count < 8) throw std::invalid_argument("a scan needs at least 8 angles");
    std::vector<double> angles(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) angles[std::size_t(i)] = 180.0 * i / count;
    return angles;
}

inline SplittingScan simulate_scan(double splitting_ueV, double phase_deg,
                                   double noise_sigma_ueV, const std::vector<double>& angles,
                                   std::uint64_t seed = k_default_seed) {
    if (splitting_ueV < 0.0) throw std::invalid_argument("splitting must be >= 0");
    if (noise_sigma_ueV < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    SplittingScan scan;
    scan.samples.reserve(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i) {
        const double theta = angles[i];
        double value = splitting_ueV * std::cos(4.0 * deg_to_rad(theta - phase_deg));
        if (noise_sigma_ueV > 0.0)
            value += PulseRng(seed, 0x5ca2u, i).normal(0.0, noise_sigma_ueV);
        scan.samples.push_back({theta, value, noise_sigma_ueV});
    }
    scan.validate();
    return scan;
}

struct SplittingFit {
    double s_ueV = 0.0;         // oscillation amplitude, >= 0 by convention
    double phase_deg = 0.0;     // in [0, 90), the oscillation period
    double sigma_s_ueV = 0.0;
    double offset_ueV = 0.0;    // fitted constant; residual diagnostic, ~0 for real scans
    double rms_residual_ueV = 0.0;

    /// Entanglement needs the splitting resolved below half a microvolt;
    /// true only when the fit allows that with two-sigma room.
    bool meets_entanglement_threshold() const { return s_ueV + 2.0 * sigma_s_ueV < 0.5; }
};

/// Exact weighted least squares of delta_E = A cos(4(theta - phi)) + c via
/// the linear form b1 cos(4 theta) + b2 sin(4 theta) + c.
inline SplittingFit fit_splitting(const SplittingScan& scan) {
    scan.validate();
    const std::size_t n = scan.samples.size();
    const bool weighted = scan.samples.front().sigma_ueV > 0.0;

    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    double mean = 0.0, wsum = 0.0;
    for (const SplittingSample& s : scan.samples) {
        const double w = weighted ? 1.0 / (s.sigma_ueV * s.sigma_ueV) : 1.0;
        const Eigen::Vector3d x(std::cos(4.0 * deg_to_rad(s.angle_deg)),
                                std::sin(4.0 * deg_to_rad(s.angle_deg)), 1.0);
        m += w * x * x.transpose();
        rhs += w * x * s.delta_e_ueV;
        mean += w * s.delta_e_ueV;
        wsum += w;
    }
    mean /= wsum;

    const Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (lu.rank() < 3) {
        double spread = 0.0;
        for (const SplittingSample& s : scan.samples) {
            const double r = s.delta_e_ueV - mean;
            spread += r * r;
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "splitting fit failed: the scan angles are degenerate modulo the 90 degree "
                      "period; rms residual about the mean is %.4g ueV",
                      std::sqrt(spread / double(n)));
        throw std::runtime_error(buf);
    }
    const Eigen::Vector3d beta = lu.solve(rhs);

    double ssr = 0.0;
    for (const SplittingSample& s : scan.samples) {
        const double model = beta(0) * std::cos(4.0 * deg_to_rad(s.angle_deg)) +
                             beta(1) * std::sin(4.0 * deg_to_rad(s.angle_deg)) + beta(2);
        const double r = s.delta_e_ueV - model;
        ssr += r * r;
    }

    // Covariance of beta: the inverse normal matrix, scaled by the residual
    // variance when the per-point sigma is unknown.
    Eigen::Matrix3d cov = lu.inverse();
    if (!weighted) cov *= n > 3 ? ssr / double(n - 3) : 0.0;

    SplittingFit fit;
    fit.s_ueV = std::hypot(beta(0), beta(1));
    fit.offset_ueV = beta(2);
    fit.rms_residual_ueV = std::sqrt(ssr / double(n));
    double phase = std::atan2(beta(1), beta(0)) * (180.0 / k_pi) / 4.0;
    phase = std::fmod(phase + 90.0, 90.0);
    fit.phase_deg = phase < 0.0 ? phase + 90.0 : phase;
    if (fit.s_ueV > 1e-12) {
        const double var = (beta(0) * beta(0) * cov(0, 0) + 2.0 * beta(0) * beta(1) * cov(0, 1) +
                            beta(1) * beta(1) * cov(1, 1)) /
                           (fit.s_ueV * fit.s_ueV);
        fit.sigma_s_ueV = std::sqrt(std::max(var, 0.0));
    } else {
        fit.sigma_s_ueV = std::sqrt(std::max(0.5 * (cov(0, 0) + cov(1, 1)), 0.0));
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Scan files: angle_deg,delta_e_ueV,sigma_ueV rows behind a tagged header.
// ---------------------------------------------------------------------------

inline void write_scan(std::ostream& os, const SplittingScan& scan) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "# bellsim-scan v1 mean_energy_ueV=%.9g\n",
                  scan.mean_energy_ueV);
    os << buf << "angle_deg,delta_e_ueV,sigma_ueV\n";
    for (const SplittingSample& s : scan.samples) {
        std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g\n", s.angle_deg, s.delta_e_ueV,
                      s.sigma_ueV);
        os << buf;
    }
}

inline void write_scan_file(const std::string& path, const SplittingScan& scan) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open scan file for writing: " + path);
    write_scan(os, scan);
    if (!os) throw std::runtime_error("failed while writing scan file: " + path);
}

inline SplittingScan read_scan(std::istream& is) {
    SplittingScan scan;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string tag = "mean_energy_ueV=";
            const std::size_t pos = line.find(tag);
            if (pos != std::string::npos)
                scan.mean_energy_ueV = std::stod(line.substr(pos + tag.size()));
            continue;
        }
        if (line.find("angle_deg") == 0) continue;
        std::istringstream row(line);
        std::string field;
        double values[3] = {0.0, 0.0, 0.0};
        int count = 0;
        while (std::getline(row, field, ',')) {
            if (count >= 3)
                throw std::runtime_error("scan file line " + std::to_string(line_no) +
                                         ": expected 3 comma-separated fields");
            try {
                std::size_t used = 0;
                values[count] = std::stod(field, &used);
                while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used])))
                    ++used;
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw std::runtime_error("scan file line " + std::to_string(line_no) +
                                         ": cannot parse '" + field + "' as a number");
            }
            ++count;
        }
        if (count != 3)
            throw std::runtime_error("scan file line " + std::to_string(line_no) +
                                     ": expected 3 comma-separated fields");
        scan.samples.push_back({values[0], values[1], values[2]});
    }
    if (scan.samples.empty()) throw std::runtime_error("scan file holds no samples");
    return scan;
}

inline SplittingScan read_scan_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open scan file: " + path);
    return read_scan(is);
}

} // namespace bellsim
