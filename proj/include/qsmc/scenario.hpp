#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qsmc/amplification.hpp"
#include "qsmc/bang_bang.hpp"
#include "qsmc/io.hpp"
#include "qsmc/models.hpp"
#include "qsmc/period_design.hpp"
#include "qsmc/propagate.hpp"
#include "qsmc/schedule.hpp"
#include "qsmc/sliding_mode.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

struct ReachSpec {
    enum class Policy { none, bang_bang, instantaneous, amplifier };
    Policy policy = Policy::none;
    double V = 10.0;     // bang_bang amplitude
    double tol = 1e-3;   // bang_bang infidelity tolerance
    Vec prepared_amplitudes;     // amplifier
    std::vector<int> good;       // amplifier good set; empty = use the mode's
    double phi1 = 3.141592653589793238463;
    double phi2 = 3.141592653589793238463;
    int iterations = -1;         // amplifier rounds; -1 selects automatically
};

struct Scenario {
    std::string model_name = "two-level";
    double epsilon_bound = 0.0;
    SlidingMode mode;
    int initial = 0;
    ReachSpec reach;
    bool design_period = false;  // true: derive the period from (model, p0)
    double period = 0.0;         // explicit period when design_period is false
    UncertaintySpec uncertainty;
    int horizon = 1;
    long long trials = 1;
    std::uint64_t seed = 0;
};

// One measurement record. `in_domain` is whether the post-measurement state
// lies in the sliding-mode domain, i.e. whether the outcome was good.
struct OutcomeRow {
    std::int64_t trial = 0;
    std::int32_t epoch = 0;
    std::int32_t outcome = 0;
    bool in_domain = false;
};

struct FailureEstimate {
    double p_hat = 0.0;
    double low = 0.0;
    double high = 0.0;
};

// Wilson score interval at 95% confidence.
inline FailureEstimate estimate_failure(long long failures, long long n) {
    if (n <= 0) throw ModelError("failure estimate requires at least one measurement");
    if (failures < 0 || failures > n) throw ModelError("failure count out of range");
    const double z = 1.959963984540054;
    double p = static_cast<double>(failures) / static_cast<double>(n);
    double nn = static_cast<double>(n);
    double denom = 1.0 + z * z / nn;
    double center = (p + z * z / (2.0 * nn)) / denom;
    double hw = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    // the interval endpoints are exactly 0 and 1 at the extreme counts
    double low = failures == 0 ? 0.0 : std::max(0.0, center - hw);
    double high = failures == n ? 1.0 : std::min(1.0, center + hw);
    return FailureEstimate{p, low, high};
}

struct ScenarioReport {
    std::string model_name;
    long long trials = 0;
    int horizon = 0;
    double period = 0.0;
    std::uint64_t seed = 0;
    long long measurements = 0;
    long long failures = 0;
    long long recoveries = 0;
    long long trials_with_failure = 0;
    double p_hat = 0.0;
    double wilson_low = 0.0;
    double wilson_high = 0.0;
    bool post_recovery_all_in_domain = true;
    double max_norm_deviation = 0.0;
    int reach_iterations = -1;  // amplifier rounds, when that policy is active
    double wall_time_s = 0.0;
    std::vector<OutcomeRow> log;
};

namespace detail {

inline int resolve_workers(int requested, long long trials) {
    int w = requested;
    if (w <= 0) {
        if (const char* env = std::getenv("QSMC_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end != env && v >= 1 && v <= 1024) w = static_cast<int>(v);
        }
    }
    if (w <= 0) w = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return static_cast<int>(std::min<long long>(w, std::max<long long>(1, trials)));
}

}  // namespace detail

// Parses and validates a scenario config; error messages name the offending
// field.
inline Scenario scenario_from_json(const nlohmann::json& j) {
    auto require = [&](const nlohmann::json& obj, const char* key,
                       const std::string& path) -> const nlohmann::json& {
        if (!obj.is_object() || !obj.contains(key))
            throw ConfigError("missing required config field \"" + path + "\"");
        return obj.at(key);
    };
    auto as_double = [](const nlohmann::json& v, const std::string& path) {
        if (!v.is_number()) throw ConfigError("config field \"" + path + "\" must be a number");
        return v.get<double>();
    };
    auto as_int = [](const nlohmann::json& v, const std::string& path) {
        if (!v.is_number_integer())
            throw ConfigError("config field \"" + path + "\" must be an integer");
        return v.get<long long>();
    };

    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    Scenario s;
    s.model_name = require(j, "model", "model").is_string()
                       ? j.at("model").get<std::string>()
                       : throw ConfigError("config field \"model\" must be a string");
    s.epsilon_bound = j.contains("epsilon_bound") ? as_double(j.at("epsilon_bound"), "epsilon_bound") : 0.0;
    if (s.epsilon_bound < 0.0) throw ConfigError("config field \"epsilon_bound\" must be >= 0");

    const auto& mode = require(j, "mode", "mode");
    const auto& good = require(mode, "good", "mode.good");
    if (!good.is_array() || good.empty())
        throw ConfigError("config field \"mode.good\" must be a nonempty array of indices");
    for (const auto& g : good) s.mode.good.push_back(static_cast<int>(as_int(g, "mode.good[]")));
    s.mode.p0 = as_double(require(mode, "p0", "mode.p0"), "mode.p0");
    if (!(s.mode.p0 > 0.0) || !(s.mode.p0 < 1.0))
        throw ConfigError("config field \"mode.p0\" must lie in (0, 1)");

    s.initial = static_cast<int>(as_int(require(j, "initial", "initial"), "initial"));

    const auto& period = require(j, "period", "period");
    if (period.is_string()) {
        if (period.get<std::string>() != "design")
            throw ConfigError("config field \"period\" must be a number or \"design\"");
        s.design_period = true;
    } else {
        s.period = as_double(period, "period");
        if (!(s.period > 0.0)) throw ConfigError("config field \"period\" must be positive");
    }

    s.horizon = static_cast<int>(as_int(require(j, "horizon", "horizon"), "horizon"));
    if (s.horizon < 1) throw ConfigError("config field \"horizon\" must be >= 1");
    s.trials = as_int(require(j, "trials", "trials"), "trials");
    if (s.trials < 1) throw ConfigError("config field \"trials\" must be >= 1");
    if (j.contains("seed")) {
        long long seed = as_int(j.at("seed"), "seed");
        if (seed < 0) throw ConfigError("config field \"seed\" must be >= 0");
        s.seed = static_cast<std::uint64_t>(seed);
    }

    if (j.contains("uncertainty")) {
        const auto& u = j.at("uncertainty");
        s.uncertainty.kind = uncertainty_kind_by_name(
            require(u, "kind", "uncertainty.kind").is_string()
                ? u.at("kind").get<std::string>()
                : throw ConfigError("config field \"uncertainty.kind\" must be a string"));
        if (u.contains("sign")) s.uncertainty.sign = as_double(u.at("sign"), "uncertainty.sign");
        if (u.contains("generator_index"))
            s.uncertainty.generator_index =
                static_cast<int>(as_int(u.at("generator_index"), "uncertainty.generator_index"));
        if (u.contains("segment_width")) {
            s.uncertainty.segment_width = as_double(u.at("segment_width"), "uncertainty.segment_width");
            if (!(s.uncertainty.segment_width > 0.0))
                throw ConfigError("config field \"uncertainty.segment_width\" must be positive");
        }
        if (u.contains("frequency"))
            s.uncertainty.frequency = as_double(u.at("frequency"), "uncertainty.frequency");
        if (u.contains("phase")) s.uncertainty.phase = as_double(u.at("phase"), "uncertainty.phase");
        if (u.contains("max_segment")) {
            s.uncertainty.max_segment = as_double(u.at("max_segment"), "uncertainty.max_segment");
            if (!(s.uncertainty.max_segment > 0.0))
                throw ConfigError("config field \"uncertainty.max_segment\" must be positive");
        }
    }

    if (j.contains("reach")) {
        const auto& r = j.at("reach");
        std::string policy = require(r, "policy", "reach.policy").is_string()
                                 ? r.at("policy").get<std::string>()
                                 : throw ConfigError("config field \"reach.policy\" must be a string");
        if (policy == "none") s.reach.policy = ReachSpec::Policy::none;
        else if (policy == "bang-bang") s.reach.policy = ReachSpec::Policy::bang_bang;
        else if (policy == "instantaneous") s.reach.policy = ReachSpec::Policy::instantaneous;
        else if (policy == "amplifier") s.reach.policy = ReachSpec::Policy::amplifier;
        else throw ConfigError("config field \"reach.policy\" must be one of none, bang-bang, instantaneous, amplifier");
        if (r.contains("V")) {
            s.reach.V = as_double(r.at("V"), "reach.V");
            if (!(s.reach.V > 0.0)) throw ConfigError("config field \"reach.V\" must be positive");
        }
        if (r.contains("tol")) {
            s.reach.tol = as_double(r.at("tol"), "reach.tol");
            if (!(s.reach.tol > 0.0) || !(s.reach.tol < 1.0))
                throw ConfigError("config field \"reach.tol\" must lie in (0, 1)");
        }
        if (s.reach.policy == ReachSpec::Policy::amplifier) {
            const auto& amps = require(r, "prepared_amplitudes", "reach.prepared_amplitudes");
            if (!amps.is_array() || amps.empty())
                throw ConfigError("config field \"reach.prepared_amplitudes\" must be a nonempty array");
            s.reach.prepared_amplitudes = Vec::Zero(static_cast<Eigen::Index>(amps.size()));
            for (Eigen::Index k = 0; k < s.reach.prepared_amplitudes.size(); ++k) {
                const auto& cell = amps.at(static_cast<std::size_t>(k));
                if (cell.is_number())
                    s.reach.prepared_amplitudes(k) = cell.get<double>();
                else if (cell.is_array() && cell.size() == 2)
                    s.reach.prepared_amplitudes(k) =
                        Complex(as_double(cell.at(0), "reach.prepared_amplitudes[][0]"),
                                as_double(cell.at(1), "reach.prepared_amplitudes[][1]"));
                else
                    throw ConfigError("config field \"reach.prepared_amplitudes[]\" entries must be numbers or [re, im] pairs");
            }
        }
        if (r.contains("good")) {
            if (!r.at("good").is_array())
                throw ConfigError("config field \"reach.good\" must be an array of indices");
            for (const auto& g : r.at("good"))
                s.reach.good.push_back(static_cast<int>(as_int(g, "reach.good[]")));
        }
        if (r.contains("phi1")) s.reach.phi1 = as_double(r.at("phi1"), "reach.phi1");
        if (r.contains("phi2")) s.reach.phi2 = as_double(r.at("phi2"), "reach.phi2");
        if (r.contains("iterations")) {
            s.reach.iterations = static_cast<int>(as_int(r.at("iterations"), "reach.iterations"));
            if (s.reach.iterations < 0)
                throw ConfigError("config field \"reach.iterations\" must be >= 0");
        }
    }
    return s;
}

inline HamiltonianModel scenario_model(const Scenario& s) {
    HamiltonianModel m = model_by_name(s.model_name, s.epsilon_bound);
    s.mode.validate(m.dim());
    if (s.initial < 0 || s.initial >= m.dim())
        throw ConfigError("config field \"initial\" is out of range for the model");
    return m;
}

// The measurement period actually used by a run: explicit, or designed from
// the model's worst-case analysis.
inline double scenario_period(const Scenario& s, const HamiltonianModel& m) {
    if (!s.design_period) return s.period;
    std::optional<double> T;
    if (m.name == "two-level") T = two_level_period(s.epsilon_bound, s.mode.p0);
    else if (m.name == "three-level") T = three_level_period(s.epsilon_bound, s.mode.p0);
    else throw ConfigError("period design is available for the two-level and three-level models");
    if (!T)
        throw ConfigError("designed period is unbounded (epsilon_bound is 0); set \"period\" explicitly");
    return *T;
}

// Shared engine behind run_qcp1/run_qcp2. Per-trial counter-based streams make
// the aggregate independent of worker count and trial execution order.
inline ScenarioReport run_scenario(const Scenario& s, int workers = 0) {
    auto t_start = std::chrono::steady_clock::now();
    HamiltonianModel m = scenario_model(s);
    const int dim = m.dim();
    const double T = scenario_period(s, m);
    if (!(T > 0.0)) throw ConfigError("config field \"period\" must be positive");

    ScenarioReport rep;
    rep.model_name = m.name;
    rep.trials = s.trials;
    rep.horizon = s.horizon;
    rep.period = T;
    rep.seed = s.seed;

    // Reach/recovery preparation (all deterministic, so computed once).
    std::vector<int> good_sorted = s.mode.good;
    std::sort(good_sorted.begin(), good_sorted.end());
    auto is_good = [&](int j) { return std::binary_search(good_sorted.begin(), good_sorted.end(), j); };

    std::map<int, StateVector> recovery;  // by measured (non-good) outcome
    bool recovery_available = true;
    switch (s.reach.policy) {
        case ReachSpec::Policy::none:
            recovery_available = false;
            break;
        case ReachSpec::Policy::bang_bang: {
            auto lib = schedule_library(m, s.mode, s.reach.V, s.reach.tol);
            for (const auto& [j, sched] : lib)
                recovery.emplace(j, apply_schedule(StateVector::basis(dim, j), m, sched));
            break;
        }
        case ReachSpec::Policy::instantaneous: {
            if (s.mode.good.size() != 1)
                throw ConfigError("instantaneous reach requires a singleton \"mode.good\"");
            StateVector target = StateVector::basis(dim, s.mode.good[0]);
            for (int j = 0; j < dim; ++j) {
                if (is_good(j)) continue;
                auto sched = instantaneous_schedule(StateVector::basis(dim, j), target);
                recovery.emplace(j, apply_schedule(StateVector::basis(dim, j), m, sched));
            }
            break;
        }
        case ReachSpec::Policy::amplifier: {
            AmplificationDesign d;
            if (s.reach.prepared_amplitudes.size() != dim)
                throw ConfigError("config field \"reach.prepared_amplitudes\" must match the model dimension");
            d.U = preparation_from_amplitudes(s.reach.prepared_amplitudes);
            d.good = s.reach.good.empty() ? s.mode.good : s.reach.good;
            d.phi1 = s.reach.phi1;
            d.phi2 = s.reach.phi2;
            int L = s.reach.iterations >= 0 ? s.reach.iterations
                                            : select_iteration_count(d, s.mode.p0);
            rep.reach_iterations = L;
            StateVector recovered = amplified_state(d, L);
            for (int j = 0; j < dim; ++j)
                if (!is_good(j)) recovery.emplace(j, recovered);
            break;
        }
    }
    for (const auto& [j, st] : recovery)
        if (!in_domain(st, s.mode)) rep.post_recovery_all_in_domain = false;

    // Starting state: reach is applied once if the initial eigenstate lies
    // outside the domain (with the uncertainty switched off, as during any
    // recovery).
    StateVector initial_state = StateVector::basis(dim, s.initial);
    if (!in_domain(initial_state, s.mode)) {
        if (!recovery_available)
            throw ConfigError("initial state is outside the domain and \"reach.policy\" is none");
        auto it = recovery.find(s.initial);
        if (it == recovery.end()) throw ConsistencyError("no reach state for the initial index");
        initial_state = it->second;
    }

    // Hold-phase propagator; deterministic uncertainty kinds are cached.
    const bool random_hold = s.uncertainty.kind == UncertaintySpec::Kind::piecewise_constant_random;
    Mat U_hold;
    if (!random_hold) U_hold = segments_propagator(dim, realize_uncertainty(m, s.uncertainty, T));

    rep.log.resize(static_cast<std::size_t>(s.trials) * s.horizon);

    struct Partial {
        long long measurements = 0, failures = 0, recoveries = 0, trials_with_failure = 0;
        double max_norm_dev = 0.0;
    };

    const int n_workers = detail::resolve_workers(workers, s.trials);
    std::vector<Partial> parts(n_workers);

    auto worker = [&](int w, long long lo, long long hi) {
        Partial& p = parts[w];
        for (long long trial = lo; trial < hi; ++trial) {
            RngStream rng = RngStream::for_trial(s.seed, static_cast<std::uint64_t>(trial));
            StateVector psi = initial_state;
            bool failed_once = false;
            const bool audit = trial % 100 == 0;
            for (int epoch = 0; epoch < s.horizon; ++epoch) {
                Vec evolved;
                if (random_hold) {
                    auto segs = realize_uncertainty(m, s.uncertainty, T, &rng);
                    evolved = segments_propagator(dim, segs) * psi.amplitudes();
                } else {
                    evolved = U_hold * psi.amplitudes();
                }
                if (audit)
                    p.max_norm_dev = std::max(p.max_norm_dev, std::abs(evolved.norm() - 1.0));
                psi = StateVector(std::move(evolved));
                MeasurementOutcome out = measure_projective(psi, rng);
                bool good = is_good(out.index);
                rep.log[static_cast<std::size_t>(trial) * s.horizon + epoch] =
                    OutcomeRow{trial, epoch, out.index, good};
                ++p.measurements;
                if (good) {
                    psi = out.collapsed;
                } else {
                    ++p.failures;
                    failed_once = true;
                    if (!recovery_available)
                        throw ConsistencyError(
                            "measurement produced a non-good outcome but \"reach.policy\" is none");
                    ++p.recoveries;
                    psi = recovery.at(out.index);
                }
            }
            if (failed_once) ++p.trials_with_failure;
        }
    };

    if (n_workers == 1) {
        worker(0, 0, s.trials);
    } else {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(n_workers);
        long long chunk = (s.trials + n_workers - 1) / n_workers;
        for (int w = 0; w < n_workers; ++w) {
            long long lo = w * chunk, hi = std::min<long long>(s.trials, lo + chunk);
            if (lo >= hi) break;
            threads.emplace_back([&, w, lo, hi] {
                try {
                    worker(w, lo, hi);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (const auto& p : parts) {
        rep.measurements += p.measurements;
        rep.failures += p.failures;
        rep.recoveries += p.recoveries;
        rep.trials_with_failure += p.trials_with_failure;
        rep.max_norm_deviation = std::max(rep.max_norm_deviation, p.max_norm_dev);
    }
    FailureEstimate est = estimate_failure(rep.failures, rep.measurements);
    rep.p_hat = est.p_hat;
    rep.wilson_low = est.low;
    rep.wilson_high = est.high;
    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

// Eigenstate mode: a singleton good set, reached and recovered by schedules.
inline ScenarioReport run_qcp1(const Scenario& s, int workers = 0) {
    if (s.mode.good.size() != 1)
        throw ConfigError("this runner expects a singleton \"mode.good\" set");
    return run_scenario(s, workers);
}

// Subspace mode: a multi-element good set, recovered by amplification.
inline ScenarioReport run_qcp2(const Scenario& s, int workers = 0) {
    if (s.mode.good.size() < 2)
        throw ConfigError("this runner expects \"mode.good\" to name a subspace (size >= 2)");
    return run_scenario(s, workers);
}

// Deterministic given identical inputs: the "results" object never contains
// timing. Key order is nlohmann's sorted order, so serialization is stable.
inline nlohmann::json report_to_json(const ScenarioReport& r) {
    nlohmann::json results{
        {"model", r.model_name},
        {"trials", r.trials},
        {"horizon", r.horizon},
        {"period", r.period},
        {"seed", r.seed},
        {"measurements", r.measurements},
        {"failures", r.failures},
        {"recoveries", r.recoveries},
        {"trials_with_failure", r.trials_with_failure},
        {"failure_probability", r.p_hat},
        {"wilson_low", r.wilson_low},
        {"wilson_high", r.wilson_high},
        {"cumulative_failure_fraction",
         static_cast<double>(r.trials_with_failure) / static_cast<double>(r.trials)},
        {"post_recovery_all_in_domain", r.post_recovery_all_in_domain},
        {"max_norm_deviation", r.max_norm_deviation},
    };
    if (r.reach_iterations >= 0) results["reach_iterations"] = r.reach_iterations;
    return nlohmann::json{{"results", std::move(results)},
                          {"meta", {{"wall_time_s", r.wall_time_s}}}};
}

inline std::string log_to_csv(const std::vector<OutcomeRow>& rows) {
    std::string out = "trial,epoch,outcome,in_domain\n";
    for (const auto& r : rows) {
        out += std::to_string(r.trial);
        out += ',';
        out += std::to_string(r.epoch);
        out += ',';
        out += std::to_string(r.outcome);
        out += ',';
        out += r.in_domain ? '1' : '0';
        out += '\n';
    }
    return out;
}

}  // namespace qsmc
