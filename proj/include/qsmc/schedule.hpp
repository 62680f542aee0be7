#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "qsmc/models.hpp"
#include "qsmc/propagate.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

struct ControlSegment {
    double u = 0.0;
    double dt = 0.0;
};

// Piecewise-constant drive on the first control channel, or (when
// `instantaneous`) a unitary applied in zero time. The instantaneous form
// models the unbounded-amplitude limit.
struct ControlSchedule {
    std::vector<ControlSegment> segments;
    bool instantaneous = false;
    Mat unitary;  // used only when instantaneous

    double total_time() const {
        double t = 0.0;
        for (const auto& s : segments) t += s.dt;
        return instantaneous ? 0.0 : t;
    }

    void validate() const {
        if (instantaneous) {
            require_unitary(unitary);
            return;
        }
        for (const auto& s : segments)
            if (!(s.dt > 0.0)) throw ModelError("schedule segment durations must be positive");
    }
};

// Plays the schedule on the nominal model: H(t) = H0 + u(t) * controls[0].
inline StateVector apply_schedule(const StateVector& psi, const HamiltonianModel& m,
                                  const ControlSchedule& sched) {
    if (sched.instantaneous) {
        if (sched.unitary.rows() != psi.dim())
            throw ModelError("instantaneous unitary dimension mismatch");
        return StateVector(sched.unitary * psi.amplitudes());
    }
    if (m.controls.empty() && !sched.segments.empty())
        throw ModelError("schedule requires a model with at least one control");
    std::vector<HamiltonianSegment> segs;
    segs.reserve(sched.segments.size());
    for (const auto& s : sched.segments) segs.push_back({m.H0 + s.u * m.controls[0], s.dt});
    return propagate_segments(psi, segs);
}

// 1 - |<target|psi_final>|^2 after replaying the schedule from `source`.
inline double transfer_infidelity(const HamiltonianModel& m, const ControlSchedule& sched,
                                  const StateVector& source, const StateVector& target) {
    StateVector fin = apply_schedule(source, m, sched);
    return 1.0 - std::norm(target.overlap(fin));
}

// Unitary that maps `source` exactly onto `target` (identity outside their
// span), for the unbounded-amplitude reach policy.
inline ControlSchedule instantaneous_schedule(const StateVector& source,
                                              const StateVector& target) {
    if (source.dim() != target.dim()) throw ModelError("source/target dimension mismatch");
    int n = source.dim();
    const Vec& s = source.amplitudes();
    const Vec& t = target.amplitudes();
    Complex a = s.dot(t);  // <s|t>
    Vec w = t - a * s;
    double wn = w.norm();
    ControlSchedule sched;
    sched.instantaneous = true;
    if (wn < 1e-12) {
        // target = e^{i phi} source
        Complex phase = std::abs(a) > 0.0 ? a / std::abs(a) : Complex(1.0, 0.0);
        sched.unitary = Mat::Identity(n, n) + (phase - 1.0) * (s * s.adjoint());
    } else {
        Vec wh = w / wn;
        // SU(2) block [[a, -conj(b)], [b, conj(a)]] on span{s, wh}, b = |w|.
        sched.unitary = Mat::Identity(n, n) - s * s.adjoint() - wh * wh.adjoint() +
                        (a * s + wn * wh) * s.adjoint() +
                        (-wn * s + std::conj(a) * wh) * wh.adjoint();
    }
    sched.validate();
    return sched;
}

}  // namespace qsmc
