#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "qsmc/models.hpp"
#include "qsmc/propagate.hpp"
#include "qsmc/schedule.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

// Sliding mode descriptor: the good eigenstate set and the domain half-width.
// A state is in the domain when the weight outside `good` is at most p0.
struct SlidingMode {
    std::vector<int> good;
    double p0 = 0.0;

    void validate(int dim) const {
        if (good.empty()) throw ModelError("good set must be nonempty");
        std::set<int> seen;
        for (int g : good) {
            if (g < 0 || g >= dim) throw ModelError("good index out of range");
            if (!seen.insert(g).second) throw ModelError("good set has duplicate indices");
        }
        if (static_cast<int>(good.size()) >= dim)
            throw ModelError("good set must be a proper subset of the basis");
        if (!(p0 > 0.0) || !(p0 < 1.0)) throw ModelError("p0 must lie in (0, 1)");
    }
};

// S(psi) = 1 - sum_{j in good} |c_j|^2. Zero on the sliding surface,
// invariant under global phase, always in [0, 1].
inline double surface_value(const StateVector& psi, const SlidingMode& mode) {
    double w = 0.0;
    for (int g : mode.good) w += psi.population(g);
    return std::max(0.0, 1.0 - w);
}

inline bool in_domain(const StateVector& psi, const SlidingMode& mode) {
    return surface_value(psi, mode) <= mode.p0;
}

// Haar-uniform state supported on the good subspace.
inline StateVector random_surface_state(int dim, const SlidingMode& mode, RngStream& rng) {
    Vec c = Vec::Zero(dim);
    for (int g : mode.good) c(g) = Complex(rng.normal(), rng.normal());
    return StateVector::normalized(std::move(c));
}

struct InvarianceReport {
    double max_drift = 0.0;  // max surface value reached from on-surface starts
    bool violated = false;
    int states_checked = 0;
};

// Checks that nominal dynamics keep the good subspace invariant: plays
// `sched` (then coasts on the hold Hamiltonian until `horizon`) from Haar
// random on-surface states and records the worst surface drift at every
// segment boundary and at 0.1-spaced points along the coast.
inline InvarianceReport verify_invariance(const HamiltonianModel& m, const SlidingMode& mode,
                                          const ControlSchedule& sched, double horizon,
                                          double tol, int n_states = 16,
                                          std::uint64_t seed = 0) {
    m.validate();
    mode.validate(m.dim());
    if (horizon < 0.0) throw ModelError("horizon must be nonnegative");
    sched.validate();
    if (!sched.instantaneous && !sched.segments.empty() && m.controls.empty())
        throw ModelError("schedule requires a model with at least one control");

    RngStream rng = RngStream::for_trial(seed, 0x1face);
    InvarianceReport rep;
    rep.states_checked = n_states;
    Mat hold = m.hold_hamiltonian();

    for (int s = 0; s < n_states; ++s) {
        StateVector psi = random_surface_state(m.dim(), mode, rng);
        double t = 0.0;
        if (sched.instantaneous) {
            psi = apply_schedule(psi, m, sched);
            rep.max_drift = std::max(rep.max_drift, surface_value(psi, mode));
        } else {
            for (const auto& seg : sched.segments) {
                psi = propagate(psi, m.H0 + seg.u * m.controls[0], seg.dt);
                t += seg.dt;
                rep.max_drift = std::max(rep.max_drift, surface_value(psi, mode));
            }
        }
        while (t < horizon - 1e-12) {
            double dt = std::min(0.1, horizon - t);
            psi = propagate(psi, hold, dt);
            t += dt;
            rep.max_drift = std::max(rep.max_drift, surface_value(psi, mode));
        }
    }
    rep.violated = rep.max_drift > tol;
    return rep;
}

}  // namespace qsmc
