#pragma once

#include "bellsim/polarization.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

namespace bellsim {

using Eigen::Matrix4cd;
using Eigen::Vector4cd;

/// Two-photon component ordering: {H1H2, H1V2, V1H2, V1V2}.
/// Index = 2 * (photon-1 component) + (photon-2 component), H = 0, V = 1.
inline Vector4cd tensor(const Vector2cd& a, const Vector2cd& b) {
    Vector4cd v;
    v << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
    return v;
}

inline Matrix4cd tensor(const Matrix2cd& a, const Matrix2cd& b) {
    Matrix4cd m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            m.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return m;
}

/// Two-photon polarization density matrix in the {H1H2, H1V2, V1H2, V1V2}
/// basis. Valid states are Hermitian, unit trace, and positive semidefinite
/// up to the documented tolerances (eigenvalues >= -1e-10, clamped on use).
struct TwoPhotonState {
    Matrix4cd rho = Matrix4cd::Zero();

    bool is_hermitian(double tol = 1e-12) const {
        return (rho - rho.adjoint()).cwiseAbs().maxCoeff() <= tol;
    }

    bool has_unit_trace(double tol = 1e-12) const {
        return std::abs(rho.trace() - complexd(1.0, 0.0)) <= tol;
    }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Matrix4cd> es(0.5 * (rho + rho.adjoint()));
        return es.eigenvalues().minCoeff();
    }

    void validate(double psd_tol = 1e-10, double tol = 1e-12) const {
        if (!is_hermitian(tol)) throw std::invalid_argument("two-photon state is not Hermitian");
        if (!has_unit_trace(tol)) throw std::invalid_argument("two-photon state trace differs from 1");
        if (min_eigenvalue() < -psd_tol)
            throw std::invalid_argument("two-photon state has a negative eigenvalue beyond tolerance");
    }
};

inline TwoPhotonState state_from_pure(const Vector4cd& psi) {
    const double n = psi.norm();
    if (n <= 0.0) throw std::invalid_argument("pure state amplitude vector is zero");
    Vector4cd u = psi / n;
    return TwoPhotonState{u * u.adjoint()};
}

/// (|H1H2> + |V1V2>)/sqrt(2); identically (|L1R2> + |R1L2>)/sqrt(2) under
/// this project's handedness convention.
inline TwoPhotonState bell_state_psi_plus() {
    Vector4cd psi;
    psi << 1.0, 0.0, 0.0, 1.0;
    return state_from_pure(psi);
}

/// Polarization singlet (|H1V2> - |V1H2>)/sqrt(2): rotationally invariant,
/// anti-correlated in every basis.
inline TwoPhotonState singlet_state() {
    Vector4cd psi;
    psi << 0.0, 1.0, -1.0, 0.0;
    return state_from_pure(psi);
}

inline TwoPhotonState maximally_mixed_state() {
    return TwoPhotonState{0.25 * Matrix4cd::Identity()};
}

/// p * psi_plus + (1 - p) * I/4.
inline TwoPhotonState werner_state(double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("werner parameter must be in [0, 1]");
    TwoPhotonState s;
    s.rho = p * bell_state_psi_plus().rho + (1.0 - p) * 0.25 * Matrix4cd::Identity();
    return s;
}

/// rho -> (J1 x J2) rho (J1 x J2)^dagger. For unitary J this preserves
/// validity; for projectors the result is unnormalized.
inline TwoPhotonState apply_local(const TwoPhotonState& s, const JonesOperator& j1, const JonesOperator& j2) {
    const Matrix4cd u = tensor(j1.m, j2.m);
    return TwoPhotonState{u * s.rho * u.adjoint()};
}

/// Analyzer choice for both channels: photon 1 measured in (a, a_orth),
/// photon 2 in (b, b_orth).
struct BasisPair {
    MeasurementBasis channel1;
    MeasurementBasis channel2;

    void validate(double tol = 1e-12) const {
        channel1.validate(tol);
        channel2.validate(tol);
    }
};

inline BasisPair basis_pair(PolLabel a, PolLabel a_orth, PolLabel b, PolLabel b_orth) {
    return BasisPair{basis_of(a, a_orth), basis_of(b, b_orth)};
}

/// The two analyzer output ports.
enum class Port { pass, orthogonal };

inline const Vector2cd& port_vector(const MeasurementBasis& basis, Port p) {
    return p == Port::pass ? basis.pass : basis.orthogonal;
}

/// Rank-1 projector |e1 e2><e1 e2| onto one joint outcome of a basis pair.
inline Matrix4cd pair_projector(const BasisPair& pair, Port p1, Port p2) {
    const Vector4cd v = tensor(port_vector(pair.channel1, p1), port_vector(pair.channel2, p2));
    return v * v.adjoint();
}

/// Tr(rho P), clamped to [0, 1]. Raw values outside [-1e-9, 1 + 1e-9]
/// indicate an invalid state or projector and raise.
inline double probability(const TwoPhotonState& s, const Matrix4cd& projector) {
    const complexd t = (s.rho * projector).trace();
    const double p = t.real();
    if (p < -1e-9 || p > 1.0 + 1e-9)
        throw std::domain_error("projection probability outside [0, 1] beyond tolerance");
    return std::min(1.0, std::max(0.0, p));
}

/// Joint-outcome probabilities over the four ports, in order
/// (pass,pass), (pass,orth), (orth,pass), (orth,orth). Sums to 1.
inline std::array<double, 4> outcome_probabilities(const TwoPhotonState& s, const BasisPair& pair) {
    return {probability(s, pair_projector(pair, Port::pass, Port::pass)),
            probability(s, pair_projector(pair, Port::pass, Port::orthogonal)),
            probability(s, pair_projector(pair, Port::orthogonal, Port::pass)),
            probability(s, pair_projector(pair, Port::orthogonal, Port::orthogonal))};
}

/// Correlation E(a, b) = P(a,b) + P(a_,b_) - P(a,b_) - P(a_,b) in [-1, 1].
inline double correlation_E(const TwoPhotonState& s, const BasisPair& pair) {
    const auto p = outcome_probabilities(s, pair);
    return p[0] + p[3] - p[1] - p[2];
}

inline Matrix2cd reduced_state_1(const TwoPhotonState& s) {
    Matrix2cd r = Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                r(i, j) += s.rho(2 * i + k, 2 * j + k);
    return r;
}

inline Matrix2cd reduced_state_2(const TwoPhotonState& s) {
    Matrix2cd r = Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                r(i, j) += s.rho(2 * k + i, 2 * k + j);
    return r;
}

/// Bloch-vector length of a single-photon reduced state (0 = unpolarized).
inline double polarization_degree(const Matrix2cd& r) {
    double sum = 0.0;
    for (int axis = 1; axis <= 3; ++axis) {
        const double c = (r * poincare_sigma(axis)).trace().real();
        sum += c * c;
    }
    return std::sqrt(sum);
}

/// Both single-photon marginals maximally mixed within tol.
inline bool is_unpolarized(const TwoPhotonState& s, double tol = 1e-9) {
    const Matrix2cd half = 0.5 * Matrix2cd::Identity();
    return (reduced_state_1(s) - half).cwiseAbs().maxCoeff() <= tol &&
           (reduced_state_2(s) - half).cwiseAbs().maxCoeff() <= tol;
}

} // namespace bellsim
