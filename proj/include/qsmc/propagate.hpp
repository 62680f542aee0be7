#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qsmc/state.hpp"

namespace qsmc {

inline void require_hermitian(const Mat& H, double tol = 1e-10) {
    if (H.rows() != H.cols() || H.rows() < 1) throw ModelError("Hamiltonian must be square");
    if ((H - H.adjoint()).cwiseAbs().maxCoeff() > tol)
        throw ModelError("Hamiltonian must be Hermitian");
}

inline void require_unitary(const Mat& U, double tol = 1e-9) {
    if (U.rows() != U.cols() || U.rows() < 1) throw ModelError("unitary must be square");
    Mat d = U.adjoint() * U - Mat::Identity(U.rows(), U.cols());
    if (d.cwiseAbs().maxCoeff() > tol) throw ModelError("matrix is not unitary");
}

// exp(-i H t) by eigendecomposition. Exact up to floating point; no stepping
// error, so the unitarity drift of long segment chains stays at rounding level.
// Dim 2 short-circuits to the Pauli decomposition H = a I + v . sigma:
// exp(-i H t) = e^{-i a t} (cos(|v| t) I - i sin(|v| t) v . sigma / |v|).
inline Mat propagator(const Mat& H, double t) {
    require_hermitian(H);
    if (H.rows() == 2) {
        double a = 0.5 * (H(0, 0).real() + H(1, 1).real());
        double vx = H(0, 1).real(), vy = -H(0, 1).imag();
        double vz = 0.5 * (H(0, 0).real() - H(1, 1).real());
        double r = std::sqrt(vx * vx + vy * vy + vz * vz);
        Complex ph = std::exp(Complex(0.0, -a * t));
        double c = std::cos(r * t);
        double sn = r > 0.0 ? std::sin(r * t) / r : t;  // sin(rt)/r -> t as r -> 0
        Mat U(2, 2);
        U(0, 0) = ph * Complex(c, -sn * vz);
        U(1, 1) = ph * Complex(c, sn * vz);
        U(0, 1) = ph * (Complex(0.0, -sn) * Complex(vx, -vy));
        U(1, 0) = ph * (Complex(0.0, -sn) * Complex(vx, vy));
        return U;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    if (es.info() != Eigen::Success) throw ModelError("eigendecomposition failed");
    const auto& V = es.eigenvectors();
    Vec phases(H.rows());
    for (Eigen::Index k = 0; k < H.rows(); ++k)
        phases(k) = std::exp(Complex(0.0, -es.eigenvalues()(k) * t));
    return V * phases.asDiagonal() * V.adjoint();
}

inline StateVector propagate(const StateVector& psi, const Mat& H, double t) {
    if (H.rows() != psi.dim()) throw ModelError("Hamiltonian dimension does not match state");
    return StateVector(propagator(H, t) * psi.amplitudes());
}

// One piece of a piecewise-constant Hamiltonian.
struct HamiltonianSegment {
    Mat H;
    double dt = 0.0;
};

inline StateVector propagate_segments(const StateVector& psi,
                                      const std::vector<HamiltonianSegment>& segments) {
    StateVector s = psi;
    for (const auto& seg : segments) {
        if (seg.dt < 0.0) throw ModelError("segment duration must be nonnegative");
        if (seg.dt == 0.0) continue;
        s = propagate(s, seg.H, seg.dt);
    }
    return s;
}

// Product propagator of a segment chain (applied left to right in time order).
inline Mat segments_propagator(int dim, const std::vector<HamiltonianSegment>& segments) {
    Mat U = Mat::Identity(dim, dim);
    for (const auto& seg : segments) {
        if (seg.dt < 0.0) throw ModelError("segment duration must be nonnegative");
        if (seg.dt == 0.0) continue;
        if (seg.H.rows() != dim) throw ModelError("segment dimension mismatch");
        U = propagator(seg.H, seg.dt) * U;
    }
    return U;
}

// Projective measurement in the basis the model is written in (the eigenbasis
// of the free Hamiltonian). Consumes exactly one uniform draw per call.
struct MeasurementOutcome {
    int index = 0;
    double probability = 0.0;
    StateVector collapsed;
};

inline MeasurementOutcome measure_projective(const StateVector& psi, RngStream& rng) {
    double u = rng.next_double();
    double cum = 0.0;
    int dim = psi.dim();
    for (int j = 0; j < dim; ++j) {
        double p = psi.population(j);
        cum += p;
        if (u < cum || j == dim - 1)
            return MeasurementOutcome{j, p, StateVector::basis(dim, j)};
    }
    throw ConsistencyError("measurement sampling fell through");  // unreachable
}

}  // namespace qsmc
