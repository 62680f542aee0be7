#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qsmc/qsmc.hpp"

using namespace qsmc;

namespace {

template <class M>
double max_abs(const M& m) {
    return m.cwiseAbs().maxCoeff();
}

std::vector<int> random_proper_subset(int dim, RngStream& rng) {
    std::vector<int> idx(dim);
    for (int i = 0; i < dim; ++i) idx[i] = i;
    for (int i = dim - 1; i > 0; --i) {
        int j = static_cast<int>(rng.uniform(0.0, i + 1.0));
        std::swap(idx[i], idx[std::min(j, i)]);
    }
    int size = 1 + static_cast<int>(rng.uniform(0.0, dim - 1.0));
    size = std::min(size, dim - 1);
    idx.resize(size);
    return idx;
}

}  // namespace

TEST_CASE("phase oracles and operator unitarity", "[amplification]") {
    REQUIRE(max_abs(Mat(phase_oracle(4, {1, 3}, 0.0) - Mat::Identity(4, 4))) == 0.0);

    Mat P = phase_oracle(3, {1}, kPi);
    Mat Pref = Mat::Identity(3, 3);
    Pref(1, 1) = -1.0;
    REQUIRE(max_abs(Mat(P - Pref)) <= 1e-15);

    REQUIRE_THROWS_AS(phase_oracle(3, {3}, 1.0), ModelError);
    REQUIRE_THROWS_AS(phase_oracle(3, {1, 1}, 1.0), ModelError);

    RngStream rng(14);
    Vec amps(4);
    for (int i = 0; i < 4; ++i) amps(i) = Complex(rng.normal(), rng.normal());
    Mat U = preparation_from_amplitudes(amps);
    REQUIRE_NOTHROW(require_unitary(U, 1e-9));
    Vec normed = amps / amps.norm();
    REQUIRE(max_abs(Vec(U.col(0) - normed)) <= 1e-12);

    Mat Q = grover_operator(U, {1, 3}, 0.8, -1.7);
    REQUIRE_NOTHROW(require_unitary(Q, 1e-9));

    // both phases zero: the operator collapses to minus the identity
    REQUIRE(max_abs(Mat(grover_operator(U, {1, 3}, 0.0, 0.0) + Mat::Identity(4, 4))) <= 1e-12);

    REQUIRE_THROWS_AS(grover_operator(Mat(2.0 * U), {1}, kPi, kPi), ModelError);

    // basis-aligned preparation completes to a permutation-like unitary
    Vec e2 = Vec::Zero(3);
    e2(2) = 1.0;
    REQUIRE_NOTHROW(require_unitary(preparation_from_amplitudes(e2), 1e-9));
    REQUIRE_THROWS_AS(preparation_from_amplitudes(Vec::Zero(3)), ModelError);
}

TEST_CASE("one amplification round follows the analytic two-mode action", "[amplification]") {
    RngStream rng(2718);
    for (int c = 0; c < 100; ++c) {
        int n = 3 + static_cast<int>(rng.uniform(0.0, 3.999));
        Vec amps(n);
        for (int i = 0; i < n; ++i) amps(i) = Complex(rng.normal(), rng.normal());
        Mat U = preparation_from_amplitudes(amps);
        std::vector<int> good = random_proper_subset(n, rng);
        double phi1 = rng.uniform(-kPi, kPi);
        double phi2 = rng.uniform(-kPi, kPi);

        Vec psi = U.col(0);
        Vec pg = Vec::Zero(n);
        for (int g : good) pg(g) = psi(g);
        Vec pb = psi - pg;
        double g = pg.squaredNorm();

        Complex e1 = std::exp(Complex(0.0, phi1));
        Complex e2 = std::exp(Complex(0.0, phi2));
        Complex A = (1.0 - e1) * (1.0 - g + g * e2) - e2;
        Complex B = g * (1.0 - e1) * (e2 - 1.0) - e1;

        Vec lhs = grover_operator(U, good, phi1, phi2) * psi;
        REQUIRE(max_abs(Vec(lhs - (A * pg + B * pb))) <= 1e-10);

        AmplificationDesign d;
        d.U = U;
        d.good = good;
        d.phi1 = phi1;
        d.phi2 = phi2;
        StateVector once = amplified_state(d, 1);
        REQUIRE(max_abs(Vec(once.amplitudes() - (A * pg + B * pb))) <= 1e-10);
    }
}

TEST_CASE("reflective amplification follows the closed-form rotation", "[amplification]") {
    RngStream rng(31415);
    Vec amps(5);
    for (int i = 0; i < 5; ++i) amps(i) = rng.normal();  // real amplitudes
    AmplificationDesign d;
    d.U = preparation_from_amplitudes(amps);
    d.good = {0, 2};

    double g = good_weight(prepared_state(d), d.good);
    for (int L = 0; L <= 12; ++L) {
        REQUIRE(std::abs(good_weight(amplified_state(d, L), d.good) - grover_closed_form(g, L)) <=
                1e-9);
        REQUIRE(std::abs(bad_probability(d, L) - (1.0 - grover_closed_form(g, L))) <= 1e-9);
    }

    REQUIRE_THROWS_AS(grover_closed_form(1.5, 1), ModelError);
    REQUIRE_THROWS_AS(grover_closed_form(-0.1, 1), ModelError);
    REQUIRE_THROWS_AS(grover_closed_form(0.5, -1), ModelError);
    REQUIRE_THROWS_AS(amplified_state(d, -1), ModelError);
}

TEST_CASE("iteration selection reproduces the reference recovery (frozen)", "[amplification]") {
    Vec amps(3);
    amps << 0.06, 0.08, 0.995;
    AmplificationDesign d;
    d.U = preparation_from_amplitudes(amps);
    d.good = {0, 1};

    int L = select_iteration_count(d, 0.005);
    REQUIRE(L == 7);

    StateVector rec = amplified_state(d, L);
    REQUIRE(std::abs(std::sqrt(rec.population(0)) - 0.5986009191) <= 1e-7);
    REQUIRE(std::abs(std::sqrt(rec.population(1)) - 0.7981345589) <= 1e-7);
    REQUIRE(std::abs(std::sqrt(rec.population(2)) - 0.06825075488) <= 1e-7);

    REQUIRE(std::abs(bad_probability(d, 7) - 0.004658165541) <= 1e-8);
    double g0 = 0.01 / 1.000025;
    REQUIRE(std::abs(bad_probability(d, 7) - (1.0 - grover_closed_form(g0, 7))) <= 1e-10);

    // the relative weights inside the good subspace are preserved
    REQUIRE(std::abs(std::sqrt(rec.population(0) / rec.population(1)) - 0.75) <= 1e-12);

    // seven rounds are genuinely needed
    REQUIRE(bad_probability(d, 6) > 0.005);
    REQUIRE_THROWS_AS(select_iteration_count(d, 0.005, 3), BudgetError);
}

TEST_CASE("iteration selection matches an exhaustive scan", "[amplification]") {
    // quarter weight: one round amplifies exactly to 1
    Vec q(4);
    q << 0.5, 0.5, 0.5, 0.5;
    AmplificationDesign d;
    d.U = preparation_from_amplitudes(q);
    d.good = {0};

    Mat Q = grover_operator(d.U, d.good, kPi, kPi);
    Vec v = d.U.col(0);
    int first = -1;
    for (int L = 0; L <= 50; ++L) {
        double bad = 1.0 - good_weight(StateVector(v), d.good);
        if (bad <= 0.005) {
            first = L;
            break;
        }
        v = Q * v;
    }
    REQUIRE(first == 1);
    REQUIRE(select_iteration_count(d, 0.005) == 1);
    REQUIRE(bad_probability(d, 1) <= 1e-12);
    REQUIRE(std::abs(bad_probability(d, 0) - 0.75) <= 1e-12);

    // half weight is a fixed point of the reflective map: never improves
    Vec h(2);
    h << 1.0, 1.0;
    AmplificationDesign fp;
    fp.U = preparation_from_amplitudes(h);
    fp.good = {0};
    double min_bad = 1.0;
    Vec w = fp.U.col(0);
    Mat Qh = grover_operator(fp.U, fp.good, kPi, kPi);
    for (int L = 0; L <= 50; ++L) {
        min_bad = std::min(min_bad, 1.0 - good_weight(StateVector(w), fp.good));
        w = Qh * w;
    }
    REQUIRE(std::abs(min_bad - 0.5) <= 1e-9);
    try {
        select_iteration_count(fp, 0.01, 200);
        FAIL("expected a budget error");
    } catch (const BudgetError& e) {
        REQUIRE(std::string(e.what()).find("best bad probability") != std::string::npos);
    }

    // already within budget: zero rounds
    Vec z(3);
    z << std::sqrt(0.999), std::sqrt(0.001), 0.0;
    AmplificationDesign ok;
    ok.U = preparation_from_amplitudes(z);
    ok.good = {0};
    REQUIRE(select_iteration_count(ok, 0.005) == 0);
    REQUIRE_THROWS_AS(select_iteration_count(ok, 0.0), ModelError);
    REQUIRE_THROWS_AS(select_iteration_count(ok, 1.0), ModelError);

    // nothing to amplify
    Vec none(3);
    none << 0.0, 0.0, 1.0;
    AmplificationDesign hopeless;
    hopeless.U = preparation_from_amplitudes(none);
    hopeless.good = {0, 1};
    REQUIRE_THROWS_AS(select_iteration_count(hopeless, 0.01), InfeasibleError);

    AmplificationDesign malformed;
    malformed.U = Mat::Identity(3, 3);
    malformed.good = {0, 1, 2};
    REQUIRE_THROWS_AS(malformed.validate(), ModelError);
    malformed.good = {};
    REQUIRE_THROWS_AS(malformed.validate(), ModelError);
    malformed.good = {5};
    REQUIRE_THROWS_AS(malformed.validate(), ModelError);
}
