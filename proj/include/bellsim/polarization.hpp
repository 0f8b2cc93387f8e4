#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

namespace bellsim {

using complexd = std::complex<double>;
using Eigen::Matrix2cd;
using Eigen::Vector2cd;

inline constexpr double k_pi = 3.14159265358979323846;

/// Reduced Planck constant in the units used throughout: ueV * ns.
inline constexpr double k_hbar_uev_ns = 0.6582119;

inline double deg_to_rad(double deg) { return deg * k_pi / 180.0; }

// ---------------------------------------------------------------------------
// Polarization conventions (fixed project-wide; tests pin all of them)
// ---------------------------------------------------------------------------
//
//   * Jones vectors live in the (H, V) component basis: index 0 = horizontal,
//     index 1 = vertical.
//   * All optic angles are in DEGREES, measured from the lab-vertical axis.
//     A linear polarization at angle t has direction (-sin t, cos t) in
//     (H, V) components, so angle 0 is V and angle 90 is (minus) H. The sign
//     of the rotation sense is fixed by the calibration below.
//   * Circular handedness: L = (H + iV)/sqrt(2), R = (H - iV)/sqrt(2).
//     With this choice the cascade state (|L1 R2> + |R1 L2>)/sqrt(2) equals
//     (|H1 H2> + |V1 V2>)/sqrt(2): co-polarized in the rectilinear and
//     diagonal bases, anti-correlated in the circular basis.
//   * Calibration of the rotation sense: a half-wave plate at 22.5 deg maps
//     H -> D and V -> A (up to global phase); a quarter-wave plate at 45 deg
//     maps H to a circular state.
//   * States are compared up to global phase: |<a|b>| = 1 means equal.
//
// Poincare axes implied by the above, as (H,V)-basis Pauli matrices:
// rectilinear = sigma_z (H is +1), diagonal = sigma_x (D is +1),
// circular = sigma_y (L is +1).
// ---------------------------------------------------------------------------

enum class PolLabel { H, V, D, A, L, R };

/// Unit Jones vector of one of the six canonical polarizations.
inline Vector2cd basis_vector(PolLabel label) {
    const double s = 1.0 / std::sqrt(2.0);
    switch (label) {
        case PolLabel::H: return Vector2cd(1.0, 0.0);
        case PolLabel::V: return Vector2cd(0.0, 1.0);
        case PolLabel::D: return Vector2cd(s, s);
        case PolLabel::A: return Vector2cd(s, -s);
        case PolLabel::L: return Vector2cd(complexd(s, 0.0), complexd(0.0, s));
        case PolLabel::R: return Vector2cd(complexd(s, 0.0), complexd(0.0, -s));
    }
    throw std::invalid_argument("unknown polarization label");
}

inline const char* pol_label_name(PolLabel label) {
    switch (label) {
        case PolLabel::H: return "H";
        case PolLabel::V: return "V";
        case PolLabel::D: return "D";
        case PolLabel::A: return "A";
        case PolLabel::L: return "L";
        case PolLabel::R: return "R";
    }
    return "?";
}

/// Direction of a linear polarization at `angle_deg` from lab-vertical.
inline Eigen::Vector2d linear_axis(double angle_deg) {
    const double t = deg_to_rad(angle_deg);
    return Eigen::Vector2d(-std::sin(t), std::cos(t));
}

/// True when two Jones vectors describe the same physical state
/// (equal up to global phase) within `tol`.
inline bool same_state(const Vector2cd& a, const Vector2cd& b, double tol = 1e-12) {
    return std::abs(std::abs(complexd(a.dot(b))) - 1.0) <= tol;
}

enum class JonesKind { half_wave, quarter_wave, polarizer, composite };

/// One optical element of an analyzer chain: a wave plate (unitary) or a
/// linear polarizer (rank-1 projector), plus the tag and angle it was built
/// from. Composition products carry kind = composite and no angle.
struct JonesOperator {
    Matrix2cd m = Matrix2cd::Identity();
    JonesKind kind = JonesKind::composite;
    std::optional<double> angle_deg;

    bool is_unitary(double tol = 1e-12) const {
        return (m.adjoint() * m - Matrix2cd::Identity()).cwiseAbs().maxCoeff() <= tol;
    }

    bool is_projector(double tol = 1e-12) const {
        const bool hermitian = (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
        const bool idempotent = (m * m - m).cwiseAbs().maxCoeff() <= tol;
        const bool rank1 = std::abs(m.trace().real() - 1.0) <= tol;
        return hermitian && idempotent && rank1;
    }

    Vector2cd apply(const Vector2cd& v) const { return m * v; }
};

enum class WaveplateKind { half, quarter };

/// Wave plate with fast axis at `angle_deg` from lab-vertical. Symmetric
/// retarder convention: exp(-i G/2) on the fast axis, exp(+i G/2) on the
/// slow axis, G = pi (half) or pi/2 (quarter). Unitary by construction.
inline JonesOperator waveplate(WaveplateKind kind, double angle_deg) {
    const double gamma = (kind == WaveplateKind::half) ? k_pi : k_pi / 2.0;
    const Eigen::Vector2d f = linear_axis(angle_deg);
    const Eigen::Vector2d s(f.y(), -f.x());
    const Matrix2cd fast = (f * f.transpose()).cast<complexd>();
    const Matrix2cd slow = (s * s.transpose()).cast<complexd>();
    JonesOperator op;
    op.m = std::exp(complexd(0.0, -gamma / 2.0)) * fast + std::exp(complexd(0.0, gamma / 2.0)) * slow;
    op.kind = (kind == WaveplateKind::half) ? JonesKind::half_wave : JonesKind::quarter_wave;
    op.angle_deg = angle_deg;
    return op;
}

/// Linear polarizer transmitting the axis at `angle_deg` from lab-vertical
/// (angle 0 transmits V). Rank-1 Hermitian projector.
inline JonesOperator polarizer(double angle_deg) {
    const Eigen::Vector2d d = linear_axis(angle_deg);
    JonesOperator op;
    op.m = (d * d.transpose()).cast<complexd>();
    op.kind = JonesKind::polarizer;
    op.angle_deg = angle_deg;
    return op;
}

/// Product "b after a": light passes a first, then b.
inline JonesOperator compose(const JonesOperator& a, const JonesOperator& b) {
    JonesOperator op;
    op.m = b.m * a.m;
    op.kind = JonesKind::composite;
    return op;
}

/// Orthonormal single-photon measurement basis (transmitted state plus its
/// orthogonal complement), e.g. the two output ports of an analyzer.
struct MeasurementBasis {
    Vector2cd pass;
    Vector2cd orthogonal;

    void validate(double tol = 1e-12) const {
        if (std::abs(pass.norm() - 1.0) > tol || std::abs(orthogonal.norm() - 1.0) > tol)
            throw std::invalid_argument("measurement basis vectors must be unit norm");
        if (std::abs(complexd(pass.dot(orthogonal))) > tol)
            throw std::invalid_argument("measurement basis vectors must be orthogonal");
    }
};

inline MeasurementBasis basis_of(PolLabel pass, PolLabel orthogonal) {
    MeasurementBasis b{basis_vector(pass), basis_vector(orthogonal)};
    b.validate();
    return b;
}

/// Pauli matrices on the Poincare axes of this project's conventions:
/// axis 1 rectilinear (H = +1), axis 2 diagonal (D = +1),
/// axis 3 circular (L = +1).
inline Matrix2cd poincare_sigma(int axis) {
    Matrix2cd s;
    switch (axis) {
        case 1: s << 1, 0, 0, -1; return s;
        case 2: s << 0, 1, 1, 0; return s;
        case 3: s << 0, complexd(0, -1), complexd(0, 1), 0; return s;
        default: throw std::invalid_argument("poincare axis must be 1..3");
    }
}

/// Measurement basis whose transmitted state has the given unit Poincare
/// vector (n1 rectilinear, n2 diagonal, n3 circular); used for elliptical
/// analyzer settings.
inline MeasurementBasis poincare_basis(const Eigen::Vector3d& n) {
    if (std::abs(n.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("poincare vector must be unit length");
    Matrix2cd m = n.x() * poincare_sigma(1) + n.y() * poincare_sigma(2) + n.z() * poincare_sigma(3);
    Eigen::SelfAdjointEigenSolver<Matrix2cd> es(m);
    // Eigenvalues ascend: column 0 is -1 (orthogonal port), column 1 is +1.
    MeasurementBasis b{es.eigenvectors().col(1), es.eigenvectors().col(0)};
    b.validate(1e-9);
    return b;
}

} // namespace bellsim
