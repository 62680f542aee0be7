#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "qsmc/propagate.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

// Gate fidelity F(U0, U) = min over pure states of |<psi| U0^dag U |psi>|.
//
// For dim 2 the minimum is exact: with W = U0^dag U = e^{i phi} (cos(d) I + ...),
// the overlap traces the segment between the two eigenphases, so
// F = |cos(d)| = |tr W| / 2.
//
// For dim > 2 the value is a deterministic upper bound: minimum over a fixed
// pseudo-random state grid followed by shrinking-radius local refinement.
inline double gate_fidelity(const Mat& U0, const Mat& U, int grid_samples = 4096) {
    require_unitary(U0);
    require_unitary(U);
    if (U0.rows() != U.rows()) throw ModelError("gate fidelity requires equal dimensions");
    Mat W = U0.adjoint() * U;
    int n = static_cast<int>(W.rows());
    if (n == 2) return 0.5 * std::abs(W.trace());

    auto overlap = [&](const Vec& c) { return std::abs(Complex(c.dot(W * c))); };

    RngStream rng(0x5EEDF1DE11717ull);  // fixed: the bound is deterministic
    Vec best(n);
    double fmin = 2.0;
    for (int s = 0; s < grid_samples; ++s) {
        StateVector psi = StateVector::haar_random(n, rng);
        double f = overlap(psi.amplitudes());
        if (f < fmin) {
            fmin = f;
            best = psi.amplitudes();
        }
    }
    // Local refinement: random perturbations with geometrically shrinking radius.
    double radius = 0.1;
    while (radius > 1e-7) {
        bool improved = false;
        for (int k = 0; k < 64; ++k) {
            Vec pert(n);
            for (int i = 0; i < n; ++i) pert(i) = Complex(rng.normal(), rng.normal());
            Vec cand = best + radius * pert;
            cand /= cand.norm();
            double f = overlap(cand);
            if (f < fmin) {
                fmin = f;
                best = cand;
                improved = true;
            }
        }
        if (!improved) radius *= 0.5;
    }
    return fmin;
}

inline double gate_error(const Mat& U0, const Mat& U, int grid_samples = 4096) {
    return 1.0 - gate_fidelity(U0, U, grid_samples);
}

}  // namespace qsmc
