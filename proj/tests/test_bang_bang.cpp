#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qsmc/qsmc.hpp"

using namespace qsmc;

namespace {

struct GridScan {
    double best = 1.0;          // smallest infidelity seen
    double best_t1 = 0.0;
    double best_t2 = 0.0;
    double min_total = std::numeric_limits<double>::infinity();  // over points within tol
};

// Dense scan of infid(t1, t2) = 1 - |<0| U_+(t2) U_-(t1) |1>|^2. One period
// 2*pi/sqrt(1+V^2) per axis covers the whole surface: beyond it each branch
// propagator repeats up to a global phase.
GridScan scan_two_segment(const HamiltonianModel& m, double V, double h, double tol) {
    Mat Hm = m.H0 - V * m.controls[0];
    Mat Hp = m.H0 + V * m.controls[0];
    double period = 2.0 * kPi / std::sqrt(1.0 + V * V);
    int n = static_cast<int>(std::ceil(period / h));

    Vec src = Vec::Zero(2);
    src(1) = 1.0;
    Vec dst = Vec::Zero(2);
    dst(0) = 1.0;

    std::vector<Vec> fwd(n + 1), bwd(n + 1);
    for (int i = 0; i <= n; ++i) {
        fwd[i] = propagator(Hm, i * h) * src;
        bwd[i] = propagator(Hp, i * h).adjoint() * dst;
    }

    GridScan g;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            double infid = 1.0 - std::norm(bwd[j].dot(fwd[i]));
            if (infid < g.best) {
                g.best = infid;
                g.best_t1 = i * h;
                g.best_t2 = j * h;
            }
            if (infid <= tol) g.min_total = std::min(g.min_total, (i + j) * h);
        }
    }
    return g;
}

}  // namespace

TEST_CASE("single-switch synthesis matches the analytic transfer times at V=10", "[bangbang]") {
    HamiltonianModel m = two_level_model(0.1);
    StateVector src = StateVector::basis(2, 1);
    StateVector dst = StateVector::basis(2, 0);

    ControlSchedule sched = design_single_switch(m, src, dst, 10.0, 1e-3);
    REQUIRE(sched.segments.size() == 2);
    REQUIRE(sched.segments[0].u == -10.0);
    REQUIRE(sched.segments[1].u == 10.0);
    REQUIRE(sched.segments[0].dt > 0.0);
    REQUIRE(sched.segments[1].dt > 0.0);

    // exact transfer requires tan^2(Omega t1 / 2) = (V^2+1)/(V^2-1) and a
    // total of one full period 2*pi/Omega, Omega = sqrt(1+V^2)
    double Om = std::sqrt(101.0);
    double t1x = 2.0 * std::atan(std::sqrt(101.0 / 99.0)) / Om;
    double totx = 2.0 * kPi / Om;
    REQUIRE(std::abs(sched.segments[0].dt - t1x) <= 2e-6);
    REQUIRE(std::abs(sched.total_time() - totx) <= 2e-6);
    REQUIRE(transfer_infidelity(m, sched, src, dst) <= 1e-9);

    ControlSchedule exact;
    exact.segments = {{-10.0, t1x}, {10.0, totx - t1x}};
    REQUIRE(transfer_infidelity(m, exact, src, dst) <= 1e-12);

    // mirrored sign order transfers equally well
    ControlSchedule mirror;
    mirror.segments = {{10.0, sched.segments[0].dt}, {-10.0, sched.segments[1].dt}};
    REQUIRE(transfer_infidelity(m, mirror, src, dst) <= 1e-9);

    // independent scan: the feasible region contains no materially shorter point
    GridScan g = scan_two_segment(m, 10.0, 1e-3, 1e-3);
    REQUIRE(g.best <= 1e-3);
    // the square holds two exact zeros, mirror images with the same total
    double t1alt = totx - t1x;
    REQUIRE(std::min(std::abs(g.best_t1 - t1x), std::abs(g.best_t1 - t1alt)) <= 2e-3);
    REQUIRE(std::abs(g.best_t1 + g.best_t2 - totx) <= 4e-3);
    REQUIRE(g.min_total >= 0.7 * sched.total_time());
    REQUIRE(g.min_total <= sched.total_time() + 2e-3);
}

TEST_CASE("single-switch synthesis at the boundary amplitude V=1", "[bangbang]") {
    HamiltonianModel m = two_level_model(0.1);
    StateVector src = StateVector::basis(2, 1);
    StateVector dst = StateVector::basis(2, 0);

    ControlSchedule sched = design_single_switch(m, src, dst, 1.0, 1e-3);
    double t1x = kPi / std::sqrt(2.0);
    // V=1 is the degenerate boundary: the infidelity zero is quartically flat,
    // so time recovery is looser here than at V=10 even though the replayed
    // transfer is still numerically exact.
    REQUIRE(std::abs(sched.segments[0].dt - t1x) <= 5e-4);
    REQUIRE(std::abs(sched.total_time() - 2.0 * t1x) <= 5e-4);
    REQUIRE(transfer_infidelity(m, sched, src, dst) <= 1e-9);

    ControlSchedule exact;
    exact.segments = {{-1.0, t1x}, {1.0, t1x}};
    REQUIRE(transfer_infidelity(m, exact, src, dst) <= 1e-12);

    GridScan g = scan_two_segment(m, 1.0, 5e-3, 1e-3);
    REQUIRE(g.best <= 1e-3);
    REQUIRE(std::abs(g.best_t1 - t1x) <= 1e-2);
    REQUIRE(std::abs(g.best_t2 - t1x) <= 1e-2);
    REQUIRE(g.min_total >= 0.7 * sched.total_time());

    // stronger drives finish sooner
    ControlSchedule fast = design_single_switch(m, src, dst, 10.0, 1e-3);
    REQUIRE(fast.total_time() < sched.total_time());
}

TEST_CASE("degenerate and infeasible synthesis inputs", "[bangbang]") {
    HamiltonianModel m = two_level_model(0.1);
    StateVector b0 = StateVector::basis(2, 0);
    StateVector b1 = StateVector::basis(2, 1);

    ControlSchedule noop = design_single_switch(m, b0, b0, 10.0, 1e-3);
    REQUIRE(noop.segments.empty());
    REQUIRE(noop.total_time() == 0.0);

    try {
        design_single_switch(m, b1, b0, 0.5, 1e-3);
        FAIL("expected an infeasibility report");
    } catch (const InfeasibleError& e) {
        REQUIRE(std::string(e.what()).find("best achieved") != std::string::npos);
    }

    REQUIRE_THROWS_AS(design_single_switch(m, b1, b0, 0.0, 1e-3), ConfigError);
    REQUIRE_THROWS_AS(design_single_switch(m, b1, b0, -1.0, 1e-3), ConfigError);
    REQUIRE_THROWS_AS(design_single_switch(m, b1, b0, 10.0, 0.0), ConfigError);
    REQUIRE_THROWS_AS(design_single_switch(m, b1, b0, 10.0, 1.0), ConfigError);
    REQUIRE_THROWS_AS(
        design_single_switch(three_level_model(0.1), StateVector::basis(3, 1),
                             StateVector::basis(3, 0), 10.0, 1e-3),
        ModelError);
}

TEST_CASE("schedule library reaches the good eigenstate from every bad one", "[bangbang]") {
    HamiltonianModel m = two_level_model(0.1);
    SlidingMode mode{{0}, 0.01};
    auto lib = schedule_library(m, mode, 10.0, 1e-3);
    REQUIRE(lib.size() == 1);
    REQUIRE(lib.count(1) == 1);

    StateVector reached = apply_schedule(StateVector::basis(2, 1), m, lib.at(1));
    REQUIRE(surface_value(reached, mode) <= 1e-9);

    REQUIRE_THROWS_AS(schedule_library(three_level_model(0.1), SlidingMode{{0}, 0.01}, 10.0, 1e-3),
                      ModelError);
    REQUIRE_THROWS_AS(schedule_library(m, SlidingMode{{0, 1}, 0.01}, 10.0, 1e-3), ModelError);
}

TEST_CASE("schedules serialize to JSON and back", "[bangbang]") {
    ControlSchedule sched;
    sched.segments = {{-10.0, 0.15729513011552607}, {10.0, 0.4679051752469402}};
    nlohmann::json j = schedule_to_json(sched);
    ControlSchedule back = schedule_from_json(j);
    REQUIRE(back.segments.size() == 2);
    REQUIRE(back.segments[0].u == sched.segments[0].u);
    REQUIRE(back.segments[0].dt == sched.segments[0].dt);
    REQUIRE(back.segments[1].u == sched.segments[1].u);
    REQUIRE(back.segments[1].dt == sched.segments[1].dt);
    REQUIRE(!back.instantaneous);

    RngStream rng(90);
    ControlSchedule inst =
        instantaneous_schedule(StateVector::haar_random(3, rng), StateVector::haar_random(3, rng));
    ControlSchedule iback = schedule_from_json(schedule_to_json(inst));
    REQUIRE(iback.instantaneous);
    REQUIRE((iback.unitary - inst.unitary).cwiseAbs().maxCoeff() <= 1e-15);

    REQUIRE_THROWS_AS(schedule_from_json(nlohmann::json::object()), std::exception);
}

TEST_CASE("instantaneous reach maps source to target exactly", "[bangbang]") {
    RngStream rng(55);
    for (int k = 0; k < 5; ++k) {
        StateVector a = StateVector::haar_random(4, rng);
        StateVector b = StateVector::haar_random(4, rng);
        ControlSchedule s = instantaneous_schedule(a, b);
        REQUIRE(s.instantaneous);
        REQUIRE(s.total_time() == 0.0);
        REQUIRE_NOTHROW(require_unitary(s.unitary, 1e-9));
        Vec fin = s.unitary * a.amplitudes();
        REQUIRE(1.0 - std::norm(b.amplitudes().dot(fin)) <= 1e-12);
    }

    // phase-aligned pair falls back to a phase gate
    StateVector a = StateVector::haar_random(3, rng);
    Vec rotated = a.amplitudes() * std::exp(Complex(0.0, 1.1));
    StateVector b(rotated);
    ControlSchedule s = instantaneous_schedule(a, b);
    Vec fin = s.unitary * a.amplitudes();
    REQUIRE((fin - rotated).cwiseAbs().maxCoeff() <= 1e-12);

    REQUIRE_THROWS_AS(
        instantaneous_schedule(StateVector::basis(2, 0), StateVector::basis(3, 0)), ModelError);
}
