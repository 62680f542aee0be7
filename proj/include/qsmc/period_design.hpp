#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "qsmc/rng.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

inline constexpr double kPi = 3.141592653589793238463;

// ---------------------------------------------------------------------------
// Two-level worst case: constant drive eps on the transverse channel tilts the
// precession axis of the Bloch vector started at (0, 0, 1).
// ---------------------------------------------------------------------------

// Closed-form Bloch trajectory under H = I_z + eps * I_x from (0,0,1):
// r(t) = R(axis (eps,0,1), |omega| t) r0 with omega = sqrt(1 + eps^2).
inline BlochVector worst_case_bloch(double eps, double t) {
    double w2 = 1.0 + eps * eps;
    double w = std::sqrt(w2);
    double c = std::cos(w * t), s = std::sin(w * t);
    return BlochVector{eps * (1.0 - c) / w2, -eps * s / w, (eps * eps * c + 1.0) / w2};
}

// Failure probability (weight off the target eigenstate) at time t.
inline double worst_case_failure(double eps, double t) {
    return 0.5 * (1.0 - worst_case_bloch(eps, t).z);
}

// Peak failure probability over all t: ebar^2 / (1 + ebar^2), reached at
// t = pi / sqrt(1 + ebar^2).
inline double two_level_failure_threshold(double ebar) {
    if (ebar < 0.0) throw ModelError("epsilon bound must be nonnegative");
    return ebar * ebar / (1.0 + ebar * ebar);
}

// Longest measurement period keeping the worst-case failure at or below p0.
// Empty when ebar = 0 (the failure never leaves 0: no bound on the period).
// For p0 at or above the threshold the peak time pi/omega is returned: waiting
// past the peak only lets the failure recur, never exceed it.
inline std::optional<double> two_level_period(double ebar, double p0) {
    if (ebar < 0.0) throw ModelError("epsilon bound must be nonnegative");
    if (!(p0 > 0.0) || !(p0 < 1.0)) throw ModelError("p0 must lie in (0, 1)");
    if (ebar == 0.0) return std::nullopt;
    double w = std::sqrt(1.0 + ebar * ebar);
    double thresh = two_level_failure_threshold(ebar);
    if (p0 >= thresh) return kPi / w;
    double arg = 1.0 - 2.0 * p0 * (1.0 + ebar * ebar) / (ebar * ebar);
    return std::acos(std::clamp(arg, -1.0, 1.0)) / w;
}

// ---------------------------------------------------------------------------
// Dominance of the constant worst-case realization: any admissible
// |eps(t)| <= ebar keeps z(t) at or above the constant-ebar trajectory on
// [0, pi/omega]. Checked empirically with exact per-segment Bloch rotations.
// ---------------------------------------------------------------------------

namespace detail {

// Rodrigues rotation of r about unit axis n by angle a.
inline BlochVector rotate(const BlochVector& r, double nx, double ny, double nz, double a) {
    double c = std::cos(a), s = std::sin(a);
    double dot = nx * r.x + ny * r.y + nz * r.z;
    BlochVector cr{ny * r.z - nz * r.y, nz * r.x - nx * r.z, nx * r.y - ny * r.x};
    return BlochVector{r.x * c + cr.x * s + nx * dot * (1.0 - c),
                       r.y * c + cr.y * s + ny * dot * (1.0 - c),
                       r.z * c + cr.z * s + nz * dot * (1.0 - c)};
}

// Advances the Bloch vector under constant eps for time dt (exact).
inline BlochVector advance_bloch(const BlochVector& r, double eps, double dt) {
    double w = std::sqrt(1.0 + eps * eps);
    return rotate(r, eps / w, 0.0, 1.0 / w, w * dt);
}

}  // namespace detail

struct DominanceReport {
    int realizations = 0;
    // min over realizations and grid times of z_realized - z_worst_case
    double min_margin = 0.0;
    // max |margin| of the two constant realizations +/- ebar (0 up to rounding)
    double max_abs_margin_constant = 0.0;
};

// Piecewise-constant random realizations (segment width 0.05, eps uniform on
// [-ebar, ebar]) plus the two constant realizations, compared against the
// closed form on an even grid over [0, pi/omega].
inline DominanceReport constant_dominance_check(double ebar, int realizations,
                                                std::uint64_t seed, int grid_points = 400) {
    if (ebar < 0.0) throw ModelError("epsilon bound must be nonnegative");
    if (realizations < 0 || grid_points < 2) throw ModelError("bad dominance check arguments");
    double w = std::sqrt(1.0 + ebar * ebar);
    double horizon = kPi / w;
    double dt_grid = horizon / (grid_points - 1);
    const double seg_width = 0.05;

    DominanceReport rep;
    rep.realizations = realizations;
    rep.min_margin = std::numeric_limits<double>::infinity();

    // Walks one realization along the grid, switching eps every seg_width.
    auto run = [&](auto&& eps_for_segment, bool constant) {
        BlochVector r{0.0, 0.0, 1.0};
        double t = 0.0;
        int seg = -1;
        double seg_end = 0.0, eps = 0.0;
        for (int k = 0; k < grid_points; ++k) {
            double target = k * dt_grid;
            while (t < target - 1e-15) {
                if (t >= seg_end - 1e-15) {
                    ++seg;
                    eps = eps_for_segment(seg);
                    seg_end = (seg + 1) * seg_width;
                }
                double step = std::min(seg_end, target) - t;
                r = detail::advance_bloch(r, eps, step);
                t += step;
            }
            double margin = r.z - worst_case_bloch(ebar, target).z;
            rep.min_margin = std::min(rep.min_margin, margin);
            if (constant)
                rep.max_abs_margin_constant =
                    std::max(rep.max_abs_margin_constant, std::abs(margin));
        }
    };

    run([&](int) { return ebar; }, true);
    run([&](int) { return -ebar; }, true);
    for (int i = 0; i < realizations; ++i) {
        RngStream rng = RngStream::for_trial(seed, static_cast<std::uint64_t>(i));
        run([&](int) { return rng.uniform(-ebar, ebar); }, false);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Three-level worst case: real 6-dimensional formulation
// eta = (x1, y1, x2, y2, x3, y3) of the amplitudes under the worst-case
// Hamiltonian, eta' = F(eps) eta, with terminal leakage J = x3^2 + y3^2.
// ---------------------------------------------------------------------------

// Generator of the real formulation; skew-symmetric by construction.
inline Eigen::Matrix<double, 6, 6> three_level_generator(double eps) {
    Eigen::Matrix<double, 6, 6> F;
    F << 0, -1, 0, 1, 0, eps,
         1, 0, -1, 0, -eps, 0,
         0, 1, 0, 0, 0, 0,
         -1, 0, 0, 0, 0, 0,
         0, eps, 0, 0, 0, 1,
         -eps, 0, 0, 0, -1, 0;
    return F;
}

// Exact exp(F t) for real skew-symmetric F, via the Hermitian matrix iF.
inline Eigen::MatrixXd expm_skew(const Eigen::MatrixXd& F, double t) {
    if (F.rows() != F.cols()) throw ModelError("expm_skew requires a square matrix");
    if ((F + F.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ModelError("expm_skew requires a skew-symmetric matrix");
    Mat iF = Complex(0.0, 1.0) * F.cast<Complex>();
    Eigen::SelfAdjointEigenSolver<Mat> es(iF);
    Vec phases(F.rows());
    for (Eigen::Index k = 0; k < F.rows(); ++k)
        phases(k) = std::exp(Complex(0.0, -es.eigenvalues()(k) * t));
    Mat E = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    return E.real();
}

namespace detail {

using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Vec6 rk4_step(const Eigen::Matrix<double, 6, 6>& F, const Vec6& y, double h) {
    Vec6 k1 = F * y;
    Vec6 k2 = F * (y + 0.5 * h * k1);
    Vec6 k3 = F * (y + 0.5 * h * k2);
    Vec6 k4 = F * (y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates eta' = F eta from eta0 over [0, t_end] with uniform steps of
// width <= h (last step shortened), recording every grid point.
inline void rk4_trajectory(const Eigen::Matrix<double, 6, 6>& F, const Vec6& eta0, double t_end,
                           double h, std::vector<double>& ts, std::vector<Vec6>& etas) {
    ts.clear();
    etas.clear();
    double t = 0.0;
    Vec6 y = eta0;
    ts.push_back(t);
    etas.push_back(y);
    while (t < t_end - 1e-15) {
        double step = std::min(h, t_end - t);
        y = rk4_step(F, y, step);
        t += step;
        ts.push_back(t);
        etas.push_back(y);
    }
}

}  // namespace detail

struct WorstCaseTrajectory {
    double epsilon = 0.0;      // the sign actually reported (+ebar by convention)
    double t_f = 0.0;          // first local maximum of J(t)
    double x3 = 0.0, y3 = 0.0; // leakage amplitudes at t_f
    double J = 0.0;            // x3^2 + y3^2 at t_f
    bool M_single_signed = false;
    double M_min = 0.0, M_max = 0.0;
    std::vector<double> t;                        // uniform grid ending at t_f
    std::vector<Eigen::Matrix<double, 6, 1>> eta; // state along the grid
    std::vector<double> J_curve;
    std::vector<double> M_curve;                  // switching function along the grid
};

// Worst-case leakage analysis: RK4-integrates the real formulation from
// eta(0) = e1 for both signs +/- ebar (their J are equal by the similarity
// diag(1,1,-1); checked, not assumed), locates the first local maximum of J
// by forward differences plus quadratic interpolation, then integrates the
// costate lambda' = F lambda backward from lambda(t_f) = (0,0,0,0, 2 x3, 2 y3)
// and reports the switching function
//   M(t) = lambda5 y1 - lambda6 x1 - lambda2 x3 + lambda1 y3.
// M keeping one sign on [0, t_f] (tolerance 1e-8; M vanishes at t_f itself)
// confirms the constant realization satisfies the maximum-principle necessary
// condition.
inline WorstCaseTrajectory three_level_worst_case(double ebar, double step = 1e-3) {
    if (!(ebar > 0.0)) throw ModelError("worst-case analysis requires epsilon bound > 0");
    if (!(step > 0.0) || step > 0.1) throw ModelError("step must lie in (0, 0.1]");
    const double t_budget = 10.0;

    detail::Vec6 eta0 = detail::Vec6::Zero();
    eta0(0) = 1.0;

    auto locate_peak = [&](double eps) -> std::pair<double, double> {
        auto F = three_level_generator(eps);
        detail::Vec6 y = eta0;
        double t = 0.0;
        double J_prev = 0.0, J_curr = 0.0, t_prev = 0.0;
        bool have_curr = false;
        while (t < t_budget) {
            detail::Vec6 y_next = detail::rk4_step(F, y, step);
            double J_next = y_next(4) * y_next(4) + y_next(5) * y_next(5);
            if (have_curr && J_curr >= J_prev && J_next < J_curr && J_curr > 1e-12) {
                // Quadratic fit through the three samples around the peak.
                double denom = J_prev - 2.0 * J_curr + J_next;
                double delta = denom != 0.0 ? 0.5 * (J_prev - J_next) / denom : 0.0;
                double t_peak = t + delta * step;
                double J_peak = J_curr - 0.25 * (J_prev - J_next) * delta;
                return {t_peak, J_peak};
            }
            J_prev = J_curr;
            t_prev = t;
            J_curr = J_next;
            have_curr = true;
            y = y_next;
            t += step;
        }
        (void)t_prev;
        throw BudgetError("no leakage maximum found within the time budget");
    };

    auto [tf_pos, J_pos] = locate_peak(ebar);
    auto [tf_neg, J_neg] = locate_peak(-ebar);
    if (std::abs(J_pos - J_neg) > 1e-9 || std::abs(tf_pos - tf_neg) > 1e-6)
        throw ConsistencyError("the +/- worst-case signs disagree on the leakage peak");
    double eps = J_pos >= J_neg ? ebar : -ebar;
    double t_f = J_pos >= J_neg ? tf_pos : tf_neg;

    WorstCaseTrajectory out;
    out.epsilon = eps;
    out.t_f = t_f;

    auto F = three_level_generator(eps);
    detail::rk4_trajectory(F, eta0, t_f, step, out.t, out.eta);
    out.J_curve.resize(out.t.size());
    for (std::size_t k = 0; k < out.t.size(); ++k)
        out.J_curve[k] = out.eta[k](4) * out.eta[k](4) + out.eta[k](5) * out.eta[k](5);
    const detail::Vec6& fin = out.eta.back();
    out.x3 = fin(4);
    out.y3 = fin(5);
    out.J = out.J_curve.back();

    // Costate sweep, backward on the same grid.
    detail::Vec6 lam = detail::Vec6::Zero();
    lam(4) = 2.0 * out.x3;
    lam(5) = 2.0 * out.y3;
    std::vector<detail::Vec6> lams(out.t.size());
    lams.back() = lam;
    for (std::size_t k = out.t.size(); k-- > 1;) {
        double h = out.t[k] - out.t[k - 1];
        lam = detail::rk4_step(F, lam, -h);
        lams[k - 1] = lam;
    }
    out.M_curve.resize(out.t.size());
    for (std::size_t k = 0; k < out.t.size(); ++k) {
        const detail::Vec6& e = out.eta[k];
        const detail::Vec6& l = lams[k];
        out.M_curve[k] = l(4) * e(1) - l(5) * e(0) - l(1) * e(4) + l(0) * e(5);
    }
    out.M_min = *std::min_element(out.M_curve.begin(), out.M_curve.end());
    out.M_max = *std::max_element(out.M_curve.begin(), out.M_curve.end());
    const double sign_tol = 1e-8;
    out.M_single_signed = out.M_min >= -sign_tol || out.M_max <= sign_tol;
    if (!out.M_single_signed)
        throw ConsistencyError("switching function changes sign on [0, t_f]");
    return out;
}

// Leakage at time t under the constant worst case (fresh RK4 integration).
inline double three_level_leakage_at(double ebar, double t, double step = 1e-3) {
    auto F = three_level_generator(ebar);
    std::vector<double> ts;
    std::vector<detail::Vec6> etas;
    detail::Vec6 eta0 = detail::Vec6::Zero();
    eta0(0) = 1.0;
    detail::rk4_trajectory(F, eta0, t, step, ts, etas);
    const detail::Vec6& e = etas.back();
    return e(4) * e(4) + e(5) * e(5);
}

// Longest measurement period keeping the worst-case leakage at or below p0:
// t_f when the peak J(t_f) never exceeds p0, otherwise the first crossing
// J(T) = p0 found by bisection on [0, t_f]. Empty when ebar = 0.
inline std::optional<double> three_level_period(double ebar, double p0, double step = 1e-3) {
    if (ebar < 0.0) throw ModelError("epsilon bound must be nonnegative");
    if (!(p0 > 0.0) || !(p0 < 1.0)) throw ModelError("p0 must lie in (0, 1)");
    if (ebar == 0.0) return std::nullopt;
    WorstCaseTrajectory wc = three_level_worst_case(ebar, step);
    if (p0 >= wc.J) return wc.t_f;
    // J rises monotonically to its first peak on the stored grid; guard it.
    for (std::size_t k = 1; k + 1 < wc.J_curve.size(); ++k)
        if (wc.J_curve[k] < wc.J_curve[k - 1] - 1e-12)
            throw ConsistencyError("leakage is not monotone before its first peak");
    double lo = 0.0, hi = wc.t_f;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        double mid = 0.5 * (lo + hi);
        (three_level_leakage_at(ebar, mid, step) >= p0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qsmc
