// qsmc: sliding-mode control of small quantum systems.
//
// Subcommands:
//   reproduce <target>   recompute a published reference value and compare
//   run <config.json>    Monte Carlo measurement/recovery simulation
//   curves <kind>        CSV curves (bloch-bound, J, M)
//   validate-config <f>  parse and validate a scenario config
//
// Exit codes: 0 success / within tolerance, 1 out of tolerance or failed
// enforcement, 2 usage or configuration errors.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qsmc/qsmc.hpp"

namespace {

using qsmc::kPi;

struct Check {
    std::string name;
    double computed = 0.0;
    double reference = 0.0;
    double tolerance = 0.0;
    std::string comparison;  // abs-diff | upper-bound | lower-bound
    bool pass = false;
};

Check abs_check(std::string name, double computed, double reference, double tolerance) {
    Check c{std::move(name), computed, reference, tolerance, "abs-diff", false};
    c.pass = std::abs(computed - reference) <= tolerance;
    return c;
}

Check bound_check(std::string name, double computed, double bound, double slack = 0.0) {
    Check c{std::move(name), computed, bound, slack, "upper-bound", false};
    c.pass = computed <= bound + slack;
    return c;
}

Check floor_check(std::string name, double computed, double bound) {
    Check c{std::move(name), computed, bound, 0.0, "lower-bound", false};
    c.pass = computed >= bound;
    return c;
}

void print_checks(const std::string& target, const std::vector<Check>& checks) {
    std::printf("reproduce %s\n", target.c_str());
    for (const auto& c : checks) {
        if (c.comparison == "upper-bound")
            std::printf("  %-28s computed=%.10g  bound<=%.10g  %s\n", c.name.c_str(), c.computed,
                        c.reference + c.tolerance, c.pass ? "OK" : "OUT-OF-TOLERANCE");
        else if (c.comparison == "lower-bound")
            std::printf("  %-28s computed=%.10g  bound>=%.10g  %s\n", c.name.c_str(), c.computed,
                        c.reference, c.pass ? "OK" : "OUT-OF-TOLERANCE");
        else
            std::printf("  %-28s computed=%.10g  reference=%.10g  tol=%.3g  %s\n", c.name.c_str(),
                        c.computed, c.reference, c.tolerance, c.pass ? "OK" : "OUT-OF-TOLERANCE");
    }
}

nlohmann::json checks_to_json(const std::string& target, const std::vector<Check>& checks) {
    nlohmann::json arr = nlohmann::json::array();
    bool all = true;
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name},
                       {"computed", c.computed},
                       {"reference", c.reference},
                       {"tolerance", c.tolerance},
                       {"comparison", c.comparison},
                       {"pass", c.pass}});
        all = all && c.pass;
    }
    return nlohmann::json{{"target", target}, {"checks", std::move(arr)}, {"pass", all}};
}

// --- reference scenarios ----------------------------------------------------

qsmc::Scenario qcp1_reference_scenario(std::uint64_t seed) {
    qsmc::Scenario s;
    s.model_name = "two-level";
    s.epsilon_bound = 0.1;
    s.mode.good = {0};
    s.mode.p0 = 0.01;
    s.initial = 1;
    s.reach.policy = qsmc::ReachSpec::Policy::bang_bang;
    s.reach.V = 10.0;
    s.reach.tol = 1e-3;
    s.period = 3.1260;  // published design value for (0.1, 0.01)
    s.uncertainty.kind = qsmc::UncertaintySpec::Kind::constant_worst_case;
    s.uncertainty.sign = 1.0;
    s.uncertainty.generator_index = 0;
    s.horizon = 20;
    s.trials = 10000;
    s.seed = seed;
    return s;
}

qsmc::Scenario qcp2_reference_scenario(std::uint64_t seed) {
    qsmc::Scenario s;
    s.model_name = "three-level";
    s.epsilon_bound = 0.1;
    s.mode.good = {0, 1};
    s.mode.p0 = 0.005;
    s.initial = 0;
    s.reach.policy = qsmc::ReachSpec::Policy::amplifier;
    s.reach.prepared_amplitudes = qsmc::Vec(3);
    s.reach.prepared_amplitudes << 0.06, 0.08, 0.995;
    s.design_period = true;
    s.uncertainty.kind = qsmc::UncertaintySpec::Kind::constant_worst_case;
    s.uncertainty.sign = 1.0;
    s.uncertainty.generator_index = 0;
    s.horizon = 20;
    s.trials = 10000;
    s.seed = seed;
    return s;
}

// Worst-case gate error over one hold period: grid plus golden refinement of
// the fidelity between the nominal and perturbed propagators.
double worst_gate_error_two_level(double ebar) {
    qsmc::HamiltonianModel m = qsmc::two_level_model(ebar);
    qsmc::Mat Hw = m.H0 + ebar * m.uncertainty_generators[0];
    auto fid = [&](double t) {
        return qsmc::gate_fidelity(qsmc::propagator(m.H0, t), qsmc::propagator(Hw, t));
    };
    double horizon = kPi / std::sqrt(1.0 + ebar * ebar);
    const int n = 2000;
    double best_t = 0.0, best_f = 1.0;
    for (int i = 0; i <= n; ++i) {
        double t = horizon * i / n;
        double f = fid(t);
        if (f < best_f) best_f = f, best_t = t;
    }
    double h = horizon / n;
    double t_ref = qsmc::detail::golden_min(fid, std::max(0.0, best_t - 2 * h),
                                            std::min(horizon, best_t + 2 * h));
    return 1.0 - std::min(best_f, fid(t_ref));
}

double five_level_invariance_drift(std::uint64_t seed) {
    qsmc::HamiltonianModel m = qsmc::five_level_model_I();
    qsmc::SlidingMode mode{{0, 3, 4}, 0.5};
    qsmc::RngStream rng(seed ^ 0xf1e5);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        qsmc::ControlSchedule sched;
        for (int seg = 0; seg < 20; ++seg) sched.segments.push_back({rng.uniform(-2.0, 2.0), 0.5});
        auto rep = qsmc::verify_invariance(m, mode, sched, 10.0, 1e-9, 16, seed + k);
        worst = std::max(worst, rep.max_drift);
    }
    return worst;
}

// --- CSV helpers -------------------------------------------------------------

std::string bloch_bound_csv(double ebar, double sign, double step) {
    double eps = sign * ebar;
    double horizon = kPi / std::sqrt(1.0 + ebar * ebar);
    std::string csv = "t,x,y,z\n";
    long long n = step > 0.0 ? static_cast<long long>(std::ceil(horizon / step)) : 0;
    for (long long i = 0; i <= n; ++i) {
        double t = std::min(horizon, i * step);
        qsmc::BlochVector b = qsmc::worst_case_bloch(eps, t);
        csv += qsmc::format_csv_double(t) + "," + qsmc::format_csv_double(b.x) + "," +
               qsmc::format_csv_double(b.y) + "," + qsmc::format_csv_double(b.z) + "\n";
    }
    return csv;
}

std::string leakage_csv(const qsmc::WorstCaseTrajectory& wc, bool switching_function) {
    std::string csv = switching_function ? "t,M\n" : "t,J\n";
    const auto& col = switching_function ? wc.M_curve : wc.J_curve;
    for (std::size_t k = 0; k < wc.t.size(); ++k)
        csv += qsmc::format_csv_double(wc.t[k]) + "," + qsmc::format_csv_double(col[k]) + "\n";
    return csv;
}

// --- reproduce targets -------------------------------------------------------

std::vector<Check> reproduce_target(const std::string& target, std::uint64_t seed,
                                    const std::filesystem::path& out_dir, bool force) {
    std::vector<Check> checks;
    if (target == "two-level-period") {
        auto T = qsmc::two_level_period(0.1, 0.01);
        checks.push_back(abs_check("period", T.value(), 3.1260, 5e-4));
    } else if (target == "two-level-bangbang") {
        qsmc::HamiltonianModel m = qsmc::two_level_model(0.1);
        qsmc::StateVector src = qsmc::StateVector::basis(2, 1), dst = qsmc::StateVector::basis(2, 0);
        qsmc::ControlSchedule sched = qsmc::design_single_switch(m, src, dst, 10.0, 1e-3);
        double t1 = sched.segments.empty() ? 0.0 : sched.segments.front().dt;
        checks.push_back(abs_check("switch_time", t1, 0.1573, 1e-3));
        checks.push_back(abs_check("total_time", sched.total_time(), 0.3146, 1e-3));
        checks.push_back(
            bound_check("replay_infidelity", qsmc::transfer_infidelity(m, sched, src, dst), 1e-3));
    } else if (target == "gate-error") {
        checks.push_back(bound_check("worst_gate_error", worst_gate_error_two_level(0.1), 0.0050));
    } else if (target == "three-level-worstcase") {
        qsmc::WorstCaseTrajectory wc = qsmc::three_level_worst_case(0.1);
        checks.push_back(abs_check("t_f", wc.t_f, 1.1160, 5e-3));
        checks.push_back(abs_check("x3", wc.x3, -0.0055, 1e-3));
        checks.push_back(abs_check("y3", wc.y3, -0.0705, 1e-3));
        checks.push_back(abs_check("J", wc.J, 0.0050, 5e-4));
        checks.push_back(abs_check("M_single_signed", wc.M_single_signed ? 1.0 : 0.0, 1.0, 0.0));
        qsmc::atomic_write_file(out_dir / "J.csv", leakage_csv(wc, false), force);
        qsmc::atomic_write_file(out_dir / "M.csv", leakage_csv(wc, true), force);
        std::printf("  wrote %s and %s\n", (out_dir / "J.csv").c_str(), (out_dir / "M.csv").c_str());
    } else if (target == "three-level-period") {
        auto T = qsmc::three_level_period(0.1, 0.005);
        checks.push_back(abs_check("period", T.value(), 1.1160, 5e-3));
    } else if (target == "amplification") {
        qsmc::AmplificationDesign d;
        qsmc::Vec amps(3);
        amps << 0.06, 0.08, 0.995;
        d.U = qsmc::preparation_from_amplitudes(amps);
        d.good = {0, 1};
        int L = qsmc::select_iteration_count(d, 0.005);
        qsmc::StateVector rec = qsmc::amplified_state(d, L);
        checks.push_back(abs_check("iterations", L, 7.0, 0.0));
        checks.push_back(abs_check("amp_0", std::sqrt(rec.population(0)), 0.5986, 1e-3));
        checks.push_back(abs_check("amp_1", std::sqrt(rec.population(1)), 0.7981, 1e-3));
        checks.push_back(abs_check("amp_2", std::sqrt(rec.population(2)), 0.0682, 1e-3));
        checks.push_back(
            abs_check("failure_probability", qsmc::bad_probability(d, L), 0.0047, 2e-4));
    } else if (target == "qcp1-montecarlo") {
        qsmc::ScenarioReport rep = qsmc::run_qcp1(qcp1_reference_scenario(seed));
        double hw = 0.5 * (rep.wilson_high - rep.wilson_low);
        checks.push_back(bound_check("failure_probability", rep.p_hat, 0.0099, 3.0 * hw));
        checks.push_back(floor_check("failure_probability_floor", rep.p_hat, 0.008));
    } else if (target == "qcp2-montecarlo") {
        qsmc::ScenarioReport rep = qsmc::run_qcp2(qcp2_reference_scenario(seed));
        double hw = 0.5 * (rep.wilson_high - rep.wilson_low);
        checks.push_back(bound_check("failure_probability", rep.p_hat, 0.005, 3.0 * hw));
        checks.push_back(abs_check("post_recovery_in_domain",
                                   rep.post_recovery_all_in_domain ? 1.0 : 0.0, 1.0, 0.0));
    } else if (target == "five-level-invariance") {
        checks.push_back(bound_check("max_surface_drift", five_level_invariance_drift(seed), 1e-9));
    } else {
        throw qsmc::ConfigError("unknown reproduce target: " + target);
    }
    return checks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sliding-mode measurement-based control of small quantum systems"};
    app.require_subcommand(1);

    // reproduce
    std::string rep_target;
    std::string rep_out = ".";
    std::uint64_t rep_seed = 0;
    bool rep_force = false;
    auto* rep = app.add_subcommand("reproduce", "Recompute a reference value and compare");
    rep->add_option("target", rep_target, "Reference target")
        ->required()
        ->check(CLI::IsMember({"two-level-period", "two-level-bangbang", "gate-error",
                               "three-level-worstcase", "three-level-period", "amplification",
                               "qcp1-montecarlo", "qcp2-montecarlo", "five-level-invariance"}));
    rep->add_option("--out", rep_out, "Output directory for the comparison record");
    rep->add_option("--seed", rep_seed, "Master seed for Monte Carlo targets");
    rep->add_flag("--force", rep_force, "Overwrite existing outputs");

    // run
    std::string run_config;
    std::optional<std::uint64_t> run_seed;
    std::optional<long long> run_trials;
    std::string run_out = "qsmc-report.json";
    std::string run_log;
    bool run_enforce = false, run_force = false;
    int run_workers = 0;
    auto* run = app.add_subcommand("run", "Run a measurement/recovery Monte Carlo scenario");
    run->add_option("config", run_config, "Scenario config (JSON)")->required();
    run->add_option("--seed", run_seed, "Override the config seed");
    run->add_option("--trials", run_trials, "Override the config trial count");
    run->add_option("--out", run_out, "Report JSON path");
    run->add_option("--log", run_log, "Per-measurement CSV log path");
    run->add_option("--workers", run_workers, "Worker threads (0 = QSMC_THREADS or hardware)");
    run->add_flag("--enforce", run_enforce,
                  "Exit 1 unless the failure estimate is within p0 + 3 Wilson half-widths");
    run->add_flag("--force", run_force, "Overwrite existing outputs");

    // curves
    std::string cur_kind, cur_out;
    double cur_eps = 0.1, cur_sign = 1.0, cur_step = 0.0;
    bool cur_force = false;
    auto* cur = app.add_subcommand("curves", "Write reference curves as CSV");
    cur->add_option("kind", cur_kind, "Curve kind")
        ->required()
        ->check(CLI::IsMember({"bloch-bound", "J", "M"}));
    cur->add_option("--epsilon", cur_eps, "Uncertainty bound")->check(CLI::NonNegativeNumber);
    cur->add_option("--sign", cur_sign, "Sign of the constant realization (bloch-bound)");
    cur->add_option("--step", cur_step, "Grid step (default 0.01 bloch, 0.001 J/M)");
    cur->add_option("--out", cur_out, "Output CSV path (default <kind>.csv)");
    cur->add_flag("--force", cur_force, "Overwrite existing outputs");

    // validate-config
    std::string val_config;
    auto* val = app.add_subcommand("validate-config", "Parse and validate a scenario config");
    val->add_option("config", val_config, "Scenario config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (rep->parsed()) {
            std::filesystem::path out_dir(rep_out);
            std::filesystem::create_directories(out_dir);
            std::vector<Check> checks = reproduce_target(rep_target, rep_seed, out_dir, rep_force);
            print_checks(rep_target, checks);
            nlohmann::json record = checks_to_json(rep_target, checks);
            qsmc::atomic_write_file(out_dir / ("reproduce-" + rep_target + ".json"),
                                    record.dump(2) + "\n", rep_force);
            bool pass = record.at("pass").get<bool>();
            std::printf("%s\n", pass ? "PASS" : "FAIL");
            return pass ? 0 : 1;
        }

        if (run->parsed()) {
            std::ifstream in(run_config);
            if (!in) throw qsmc::ConfigError("cannot open config file: " + run_config);
            nlohmann::json cfg;
            try {
                cfg = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw qsmc::ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            qsmc::Scenario s = qsmc::scenario_from_json(cfg);
            if (run_seed) s.seed = *run_seed;
            if (run_trials) {
                if (*run_trials < 1) throw qsmc::ConfigError("--trials must be >= 1");
                s.trials = *run_trials;
            }
            qsmc::ScenarioReport rep_result = qsmc::run_scenario(s, run_workers);
            qsmc::atomic_write_file(run_out, qsmc::report_to_json(rep_result).dump(2) + "\n",
                                    run_force);
            if (!run_log.empty())
                qsmc::atomic_write_file(run_log, qsmc::log_to_csv(rep_result.log), run_force);
            double hw = 0.5 * (rep_result.wilson_high - rep_result.wilson_low);
            double bound = s.mode.p0 + 3.0 * hw;
            std::printf("model=%s trials=%lld horizon=%d period=%.10g seed=%llu\n",
                        rep_result.model_name.c_str(), rep_result.trials, rep_result.horizon,
                        rep_result.period, static_cast<unsigned long long>(rep_result.seed));
            std::printf("measurements=%lld failures=%lld recoveries=%lld\n",
                        rep_result.measurements, rep_result.failures, rep_result.recoveries);
            std::printf("failure_probability=%.6g wilson=[%.6g, %.6g]\n", rep_result.p_hat,
                        rep_result.wilson_low, rep_result.wilson_high);
            std::printf("post_recovery_all_in_domain=%s max_norm_deviation=%.3g\n",
                        rep_result.post_recovery_all_in_domain ? "true" : "false",
                        rep_result.max_norm_deviation);
            std::printf("report written to %s\n", run_out.c_str());
            if (run_enforce && rep_result.p_hat > bound) {
                std::printf("ENFORCE: failure probability %.6g exceeds bound %.6g\n",
                            rep_result.p_hat, bound);
                return 1;
            }
            if (run_enforce)
                std::printf("ENFORCE: failure probability %.6g within bound %.6g\n",
                            rep_result.p_hat, bound);
            return 0;
        }

        if (cur->parsed()) {
            std::string csv;
            if (cur_kind == "bloch-bound") {
                csv = bloch_bound_csv(cur_eps, cur_sign, cur_step > 0.0 ? cur_step : 0.01);
            } else {
                if (!(cur_eps > 0.0))
                    throw qsmc::ConfigError("--epsilon must be positive for J and M curves");
                qsmc::WorstCaseTrajectory wc =
                    qsmc::three_level_worst_case(cur_eps, cur_step > 0.0 ? cur_step : 1e-3);
                csv = leakage_csv(wc, cur_kind == "M");
            }
            std::string out = cur_out.empty() ? cur_kind + ".csv" : cur_out;
            qsmc::atomic_write_file(out, csv, cur_force);
            std::printf("wrote %s\n", out.c_str());
            return 0;
        }

        if (val->parsed()) {
            std::ifstream in(val_config);
            if (!in) throw qsmc::ConfigError("cannot open config file: " + val_config);
            nlohmann::json cfg;
            try {
                cfg = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw qsmc::ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            qsmc::Scenario s = qsmc::scenario_from_json(cfg);
            qsmc::HamiltonianModel m = qsmc::scenario_model(s);
            double T = qsmc::scenario_period(s, m);
            std::printf("OK: model=%s dim=%d period=%.10g trials=%lld horizon=%d seed=%llu\n",
                        m.name.c_str(), m.dim(), T, s.trials, s.horizon,
                        static_cast<unsigned long long>(s.seed));
            return 0;
        }
    } catch (const qsmc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const qsmc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
