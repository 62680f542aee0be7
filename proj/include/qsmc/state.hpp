#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "qsmc/rng.hpp"

namespace qsmc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally invalid physical input: wrong dimensions, non-Hermitian
// Hamiltonian, non-normalizable state, and the like.
struct ModelError : Error {
    using Error::Error;
};

// Malformed user-facing input (scenario config, CLI arguments).
struct ConfigError : Error {
    using Error::Error;
};

// A synthesis problem with no solution meeting the requested tolerance.
struct InfeasibleError : Error {
    using Error::Error;
};

// An iteration or search budget ran out before the goal was met.
struct BudgetError : Error {
    using Error::Error;
};

// A cross-check that should hold by construction failed at runtime.
struct ConsistencyError : Error {
    using Error::Error;
};

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Pure state. Unit norm is an invariant: amplitudes are renormalized on
// construction and must already be within 1e-6 of unit norm.
class StateVector {
public:
    explicit StateVector(Vec amplitudes) : c_(std::move(amplitudes)) {
        if (c_.size() < 1) throw ModelError("state dimension must be at least 1");
        double n = c_.norm();
        if (std::abs(n - 1.0) > 1e-6)
            throw ModelError("state norm deviates from 1 by more than 1e-6 (got " +
                             std::to_string(n) + "); use StateVector::normalized");
        c_ /= n;
    }

    // Rescales an arbitrary nonzero vector to unit norm.
    static StateVector normalized(Vec amplitudes) {
        double n = amplitudes.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw ModelError("cannot normalize a zero or non-finite vector");
        StateVector s;
        s.c_ = amplitudes / n;
        return s;
    }

    static StateVector basis(int dim, int index) {
        if (dim < 1) throw ModelError("state dimension must be at least 1");
        if (index < 0 || index >= dim) throw ModelError("basis index out of range");
        Vec c = Vec::Zero(dim);
        c(index) = 1.0;
        return StateVector(std::move(c));
    }

    // Haar-uniform random pure state.
    static StateVector haar_random(int dim, RngStream& rng) {
        if (dim < 1) throw ModelError("state dimension must be at least 1");
        Vec c(dim);
        for (int i = 0; i < dim; ++i) c(i) = Complex(rng.normal(), rng.normal());
        return normalized(std::move(c));
    }

    int dim() const { return static_cast<int>(c_.size()); }
    const Vec& amplitudes() const { return c_; }

    // <this|other>
    Complex overlap(const StateVector& other) const {
        if (other.dim() != dim()) throw ModelError("overlap between states of different dimension");
        return c_.dot(other.c_);
    }

    double population(int index) const {
        if (index < 0 || index >= dim()) throw ModelError("population index out of range");
        return std::norm(c_(index));
    }

    double norm_deviation() const { return std::abs(c_.norm() - 1.0); }

private:
    StateVector() = default;
    Vec c_;
};

struct BlochVector {
    double x = 0.0, y = 0.0, z = 0.0;
    double length() const { return std::sqrt(x * x + y * y + z * z); }
};

// Density operator. Hermitian, unit trace, positive semidefinite (to 1e-9).
class DensityMatrix {
public:
    explicit DensityMatrix(Mat rho) : rho_(std::move(rho)) {
        if (rho_.rows() != rho_.cols() || rho_.rows() < 1)
            throw ModelError("density matrix must be square");
        if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
            throw ModelError("density matrix must be Hermitian");
        if (std::abs(rho_.trace().real() - 1.0) > 1e-9 || std::abs(rho_.trace().imag()) > 1e-9)
            throw ModelError("density matrix must have unit trace");
        Eigen::SelfAdjointEigenSolver<Mat> es(rho_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9)
            throw ModelError("density matrix must be positive semidefinite");
    }

    static DensityMatrix from_state(const StateVector& psi) {
        return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
    }

    // rho = (I + b . sigma) / 2; requires |b| <= 1. Pure iff |b| = 1.
    static DensityMatrix from_bloch(const BlochVector& b) {
        if (b.length() > 1.0 + 1e-12) throw ModelError("Bloch vector length exceeds 1");
        Mat rho(2, 2);
        rho(0, 0) = Complex(0.5 * (1.0 + b.z), 0.0);
        rho(1, 1) = Complex(0.5 * (1.0 - b.z), 0.0);
        rho(0, 1) = Complex(0.5 * b.x, -0.5 * b.y);
        rho(1, 0) = Complex(0.5 * b.x, 0.5 * b.y);
        return DensityMatrix(std::move(rho));
    }

    const Mat& matrix() const { return rho_; }
    int dim() const { return static_cast<int>(rho_.rows()); }

    double purity() const { return (rho_ * rho_).trace().real(); }

private:
    Mat rho_;
};

// Bloch vector of a two-level pure state: b_k = <psi|sigma_k|psi>.
inline BlochVector bloch_from_state(const StateVector& psi) {
    if (psi.dim() != 2) throw ModelError("Bloch vector is defined for two-level states only");
    Complex c0 = psi.amplitudes()(0), c1 = psi.amplitudes()(1);
    Complex cross = std::conj(c0) * c1;
    return BlochVector{2.0 * cross.real(), 2.0 * cross.imag(), std::norm(c0) - std::norm(c1)};
}

inline BlochVector bloch_from_density(const DensityMatrix& rho) {
    if (rho.dim() != 2) throw ModelError("Bloch vector is defined for two-level systems only");
    const Mat& r = rho.matrix();
    return BlochVector{2.0 * r(1, 0).real(), 2.0 * r(1, 0).imag(), (r(0, 0) - r(1, 1)).real()};
}

}  // namespace qsmc
