#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "qsmc/propagate.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

// A controlled system H(t) = H0 + sum_k u_k(t) H_k + sum_l eps_l(t) G_l,
// written in the eigenbasis of H0 (all shipped models have diagonal H0).
// hold_controls are the control values applied while the system coasts
// between measurements.
struct HamiltonianModel {
    std::string name;
    Mat H0;
    std::vector<Mat> controls;
    std::vector<Mat> uncertainty_generators;
    double epsilon_bound = 0.0;
    std::vector<double> hold_controls;

    int dim() const { return static_cast<int>(H0.rows()); }

    Mat hold_hamiltonian() const {
        Mat H = H0;
        for (std::size_t k = 0; k < controls.size(); ++k) {
            double u = k < hold_controls.size() ? hold_controls[k] : 0.0;
            if (u != 0.0) H += u * controls[k];
        }
        return H;
    }

    void validate() const {
        require_hermitian(H0);
        for (const auto& Hk : controls) {
            require_hermitian(Hk);
            if (Hk.rows() != H0.rows()) throw ModelError("control dimension mismatch");
        }
        for (const auto& G : uncertainty_generators) {
            require_hermitian(G);
            if (G.rows() != H0.rows()) throw ModelError("uncertainty generator dimension mismatch");
        }
        if (epsilon_bound < 0.0) throw ModelError("epsilon bound must be nonnegative");
        if (hold_controls.size() > controls.size())
            throw ModelError("more hold values than controls");
    }
};

// Spin-1/2: H0 = sigma_z/2, controls {sigma_x/2, sigma_y/2},
// uncertainty generators {sigma_x/2, sigma_z/2}. Free evolution between
// measurements (hold controls zero).
inline HamiltonianModel two_level_model(double epsilon_bound) {
    HamiltonianModel m;
    m.name = "two-level";
    m.H0 = Mat::Zero(2, 2);
    m.H0(0, 0) = 0.5;
    m.H0(1, 1) = -0.5;
    Mat Ix = Mat::Zero(2, 2), Iy = Mat::Zero(2, 2);
    Ix(0, 1) = Ix(1, 0) = 0.5;
    Iy(0, 1) = Complex(0.0, -0.5);
    Iy(1, 0) = Complex(0.0, 0.5);
    m.controls = {Ix, Iy};
    m.uncertainty_generators = {Ix, m.H0};
    m.epsilon_bound = epsilon_bound;
    m.hold_controls = {0.0, 0.0};
    m.validate();
    return m;
}

// Ladder system with A = diag(-1, 0, 1), coupling B between the two lowest
// levels, and an uncertainty channel coupling levels 0 and 2. The control is
// held at u = 1 between measurements, so the nominal hold Hamiltonian is
// A + B, which leaves level 2 decoupled.
inline HamiltonianModel three_level_model(double epsilon_bound) {
    HamiltonianModel m;
    m.name = "three-level";
    m.H0 = Mat::Zero(3, 3);
    m.H0(0, 0) = -1.0;
    m.H0(2, 2) = 1.0;
    Mat B = Mat::Zero(3, 3);
    B(0, 1) = B(1, 0) = 1.0;
    Mat G = Mat::Zero(3, 3);
    G(0, 2) = G(2, 0) = 1.0;
    m.controls = {B};
    m.uncertainty_generators = {G};
    m.epsilon_bound = epsilon_bound;
    m.hold_controls = {1.0};
    m.validate();
    return m;
}

// Five-level model with a 3-level subsystem {0, 3, 4} closed under both the
// drift and the control: A = diag(1.0, 1.2, 1.3, 2.0, 2.15), B coupling
// (0,3), (0,4), (3,4) symmetrically.
inline HamiltonianModel five_level_model_I(double epsilon_bound = 0.0) {
    HamiltonianModel m;
    m.name = "five-level-model-I";
    Eigen::VectorXd diag(5);
    diag << 1.0, 1.2, 1.3, 2.0, 2.15;
    m.H0 = diag.cast<Complex>().asDiagonal();
    Mat B = Mat::Zero(5, 5);
    B(0, 3) = B(3, 0) = 1.0;
    B(0, 4) = B(4, 0) = 1.0;
    B(3, 4) = B(4, 3) = 1.0;
    m.controls = {B};
    m.uncertainty_generators = {};
    m.epsilon_bound = epsilon_bound;
    m.hold_controls = {1.0};
    m.validate();
    return m;
}

inline HamiltonianModel model_by_name(const std::string& name, double epsilon_bound) {
    if (name == "two-level") return two_level_model(epsilon_bound);
    if (name == "three-level") return three_level_model(epsilon_bound);
    if (name == "five-level-model-I") return five_level_model_I(epsilon_bound);
    throw ConfigError("unknown model \"" + name +
                      "\" (expected two-level, three-level, or five-level-model-I)");
}

// How the uncertainty coefficients eps_l(t) are drawn for a run.
struct UncertaintySpec {
    enum class Kind { none, constant_worst_case, piecewise_constant_random, sinusoidal };
    Kind kind = Kind::none;
    double sign = 1.0;            // constant_worst_case: eps = sign * epsilon_bound
    int generator_index = 0;      // constant_worst_case, sinusoidal
    double segment_width = 0.05;  // piecewise_constant_random
    double frequency = 1.0;       // sinusoidal: cycles per unit time
    double phase = 0.0;           // sinusoidal
    double max_segment = 1e-3;    // sinusoidal: discretization width
};

inline UncertaintySpec::Kind uncertainty_kind_by_name(const std::string& name) {
    using K = UncertaintySpec::Kind;
    if (name == "none") return K::none;
    if (name == "constant-worst-case") return K::constant_worst_case;
    if (name == "piecewise-constant-random") return K::piecewise_constant_random;
    if (name == "sinusoidal") return K::sinusoidal;
    throw ConfigError("unknown uncertainty kind \"" + name + "\"");
}

// Draws one realization of the hold-phase Hamiltonian over [0, duration] as a
// segment chain. The coefficient vector always satisfies
// sqrt(sum_l eps_l^2) <= epsilon_bound.
//
// piecewise_constant_random needs a stream; the realization clock starts at 0
// for every call (one call per measurement epoch).
inline std::vector<HamiltonianSegment> realize_uncertainty(const HamiltonianModel& m,
                                                           const UncertaintySpec& u,
                                                           double duration,
                                                           RngStream* rng = nullptr) {
    if (duration < 0.0) throw ModelError("realization duration must be nonnegative");
    Mat Hn = m.hold_hamiltonian();
    std::vector<HamiltonianSegment> segs;
    if (duration == 0.0) return segs;
    const double eb = m.epsilon_bound;
    const auto L = m.uncertainty_generators.size();
    using K = UncertaintySpec::Kind;

    auto check_index = [&](int idx) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= L)
            throw ModelError("uncertainty generator index out of range");
    };

    switch (u.kind) {
        case K::none:
            segs.push_back({Hn, duration});
            break;
        case K::constant_worst_case: {
            check_index(u.generator_index);
            if (u.sign != 1.0 && u.sign != -1.0)
                throw ModelError("constant worst case sign must be +1 or -1");
            segs.push_back({Hn + u.sign * eb * m.uncertainty_generators[u.generator_index],
                            duration});
            break;
        }
        case K::piecewise_constant_random: {
            if (rng == nullptr)
                throw ModelError("piecewise random realization requires an RNG stream");
            if (!(u.segment_width > 0.0)) throw ModelError("segment width must be positive");
            if (L == 0) {
                segs.push_back({Hn, duration});
                break;
            }
            double t = 0.0;
            while (t < duration - 1e-15) {
                double dt = std::min(u.segment_width, duration - t);
                // Uniform draw from the radius-eb ball: isotropic direction via
                // normals, radius via u^(1/L).
                Eigen::VectorXd dir(static_cast<int>(L));
                for (int l = 0; l < static_cast<int>(L); ++l) dir(l) = rng->normal();
                double dn = dir.norm();
                if (dn == 0.0) dir(0) = 1.0, dn = 1.0;
                double radius = eb * std::pow(rng->next_double(), 1.0 / static_cast<double>(L));
                Mat H = Hn;
                for (int l = 0; l < static_cast<int>(L); ++l)
                    H += (radius * dir(l) / dn) * m.uncertainty_generators[l];
                segs.push_back({std::move(H), dt});
                t += dt;
            }
            break;
        }
        case K::sinusoidal: {
            check_index(u.generator_index);
            if (!(u.max_segment > 0.0)) throw ModelError("max segment width must be positive");
            auto n = static_cast<long long>(std::ceil(duration / u.max_segment));
            double dt = duration / static_cast<double>(n);
            for (long long k = 0; k < n; ++k) {
                double mid = (static_cast<double>(k) + 0.5) * dt;
                double eps =
                    eb * std::sin(2.0 * 3.141592653589793238463 * u.frequency * mid + u.phase);
                segs.push_back({Hn + eps * m.uncertainty_generators[u.generator_index], dt});
            }
            break;
        }
    }
    return segs;
}

}  // namespace qsmc
