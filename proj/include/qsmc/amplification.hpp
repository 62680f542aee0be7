#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <vector>

#include "qsmc/propagate.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

// I - (1 - e^{i phi}) sum_{x in marked} |x><x|
inline Mat phase_oracle(int dim, const std::vector<int>& marked, double phi) {
    if (dim < 1) throw ModelError("dimension must be at least 1");
    std::set<int> seen;
    for (int x : marked) {
        if (x < 0 || x >= dim) throw ModelError("marked index out of range");
        if (!seen.insert(x).second) throw ModelError("marked set has duplicate indices");
    }
    Mat P = Mat::Identity(dim, dim);
    Complex f = Complex(1.0, 0.0) - std::exp(Complex(0.0, phi));
    for (int x : marked) P(x, x) -= f;
    return P;
}

// Amplitude-amplification operator Q = -U P0(phi1) U^{-1} Pgood(phi2), built
// around a preparation unitary U with U|0> = prepared state.
inline Mat grover_operator(const Mat& U, const std::vector<int>& good, double phi1, double phi2) {
    require_unitary(U);
    int n = static_cast<int>(U.rows());
    Mat P0 = phase_oracle(n, {0}, phi1);
    Mat Pg = phase_oracle(n, good, phi2);
    return -(U * P0 * U.adjoint() * Pg);
}

// Completes the normalized amplitude vector to a unitary whose first column
// prepares it (Gram-Schmidt over the remaining basis vectors).
inline Mat preparation_from_amplitudes(const Vec& amplitudes) {
    int n = static_cast<int>(amplitudes.size());
    if (n < 1) throw ModelError("amplitude vector must be nonempty");
    StateVector psi = StateVector::normalized(amplitudes);
    Mat U = Mat::Zero(n, n);
    U.col(0) = psi.amplitudes();
    int col = 1;
    for (int j = 0; j < n && col < n; ++j) {
        Vec v = Vec::Zero(n);
        v(j) = 1.0;
        for (int k = 0; k < col; ++k) v -= U.col(k).dot(v) * U.col(k);
        double nv = v.norm();
        if (nv < 1e-9) continue;  // basis vector already spanned
        U.col(col++) = v / nv;
    }
    if (col != n) throw ConsistencyError("Gram-Schmidt completion failed");
    require_unitary(U);
    return U;
}

struct AmplificationDesign {
    Mat U;                  // preparation unitary; U|0> is the prepared state
    std::vector<int> good;  // indices whose weight is amplified
    double phi1 = kPi_amp;
    double phi2 = kPi_amp;

    static constexpr double kPi_amp = 3.141592653589793238463;

    void validate() const {
        require_unitary(U);
        std::set<int> seen;
        if (good.empty()) throw ModelError("good set must be nonempty");
        for (int g : good) {
            if (g < 0 || g >= U.rows()) throw ModelError("good index out of range");
            if (!seen.insert(g).second) throw ModelError("good set has duplicate indices");
        }
        if (static_cast<int>(good.size()) >= U.rows())
            throw ModelError("good set must be a proper subset of the basis");
    }
};

inline StateVector prepared_state(const AmplificationDesign& d) {
    return StateVector(d.U.col(0));
}

inline double good_weight(const StateVector& psi, const std::vector<int>& good) {
    double w = 0.0;
    for (int g : good) w += psi.population(g);
    return w;
}

// State after L amplification rounds: Q^L U |0>.
inline StateVector amplified_state(const AmplificationDesign& d, int L) {
    d.validate();
    if (L < 0) throw ModelError("iteration count must be nonnegative");
    Mat Q = grover_operator(d.U, d.good, d.phi1, d.phi2);
    Vec v = d.U.col(0);
    for (int k = 0; k < L; ++k) v = Q * v;
    return StateVector(std::move(v));
}

inline double bad_probability(const AmplificationDesign& d, int L) {
    return 1.0 - good_weight(amplified_state(d, L), d.good);
}

// Smallest L with bad probability <= p0. The initial good weight must be
// positive (nothing to amplify otherwise). Exceeding max_iterations raises a
// budget error carrying the best probability achieved.
inline int select_iteration_count(const AmplificationDesign& d, double p0,
                                  int max_iterations = 10000) {
    d.validate();
    if (!(p0 > 0.0) || !(p0 < 1.0)) throw ModelError("p0 must lie in (0, 1)");
    if (max_iterations < 0) throw ModelError("iteration budget must be nonnegative");
    StateVector psi = prepared_state(d);
    if (good_weight(psi, d.good) <= 0.0)
        throw InfeasibleError("prepared state has no weight on the good set");
    Mat Q = grover_operator(d.U, d.good, d.phi1, d.phi2);
    Vec v = psi.amplitudes();
    double best = 1.0;
    for (int L = 0; L <= max_iterations; ++L) {
        double bad = 1.0 - good_weight(StateVector(v), d.good);
        if (bad <= p0) return L;
        best = std::min(best, bad);
        v = Q * v;
    }
    throw BudgetError("no iteration count within budget reaches the target (best bad probability " +
                      std::to_string(best) + ")");
}

// Closed-form good probability after L rounds for the reflective case
// (phi1 = phi2 = pi): sin^2((2L+1) theta) with sin^2(theta) = g.
inline double grover_closed_form(double g, int L) {
    if (!(g >= 0.0) || !(g <= 1.0)) throw ModelError("good weight must lie in [0, 1]");
    if (L < 0) throw ModelError("iteration count must be nonnegative");
    double theta = std::asin(std::sqrt(g));
    double s = std::sin((2.0 * L + 1.0) * theta);
    return s * s;
}

}  // namespace qsmc
