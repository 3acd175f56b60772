#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spinodal/config.hpp"
#include "spinodal/gibbs.hpp"
#include "spinodal/harnack.hpp"
#include "spinodal/version.hpp"

// Experiment orchestration: turns a validated configuration into reports
// and data dumps. All compute happens into strings first so byte-identical
// reproduction can be asserted without touching the filesystem.

namespace spinodal {

struct Artifacts {
    std::string manifest;
    std::vector<CheckReport> reports;
    std::optional<std::string> trajectory_csv;
    std::optional<std::string> samples_csv;
    long long paths_total = 0;
    long long paths_failed = 0;
    int exit_code = 0;
};

inline std::string reports_to_jsonl(const std::vector<CheckReport>& reports) {
    std::string out;
    for (const auto& r : reports) {
        out += to_jsonl(r);
        out += "\n";
    }
    return out;
}

namespace runner_detail {

inline std::string field_csv_row(double t, const SpectralField& u) {
    std::string row = format_double(t);
    row += ",";
    row += format_double(u.mean);
    for (double c : u.modes) {
        row += ",";
        row += format_double(c);
    }
    return row;
}

inline std::string trajectory_header(int truncation, TrajectoryMode mode) {
    if (mode == TrajectoryMode::Reduced) return "t,seminorm_m1,mass";
    std::string h = "t,mode_0";
    for (int k = 1; k <= truncation; ++k) h += ",mode_" + std::to_string(k);
    return h;
}

// Single recorded trajectory of the plain dynamics (path index 0's stream).
inline std::string record_trajectory(const ExperimentConfig& cfg) {
    const ModelParams& p = cfg.model;
    Stepper stepper(p);
    GaussianRng rng(mix_seed(cfg.seed, 0));
    std::vector<double> draws;
    SpectralField u = cfg.x;
    const long long steps = std::llround(cfg.T / p.dt);
    const long long stride = std::max<long long>(1, steps / 1000);
    std::ostringstream out;
    out << trajectory_header(p.M, cfg.trajectory) << "\n";
    auto emit = [&](double t, const SpectralField& field) {
        if (cfg.trajectory == TrajectoryMode::Reduced) {
            out << format_double(t) << "," << format_double(seminorm(field, -1.0)) << ","
                << format_double(field.mean) << "\n";
        } else {
            out << field_csv_row(t, field) << "\n";
        }
    };
    emit(0.0, u);
    for (long long s = 0; s < steps; ++s) {
        fill_normals(rng, draws, stepper.noise_modes());
        u = stepper.step(u, draws, nullptr, s);
        if ((s + 1) % stride == 0) emit(static_cast<double>(s + 1) * p.dt, u);
    }
    return out.str();
}

inline std::string endpoints_csv(const EnsembleOutcome& outcome) {
    std::ostringstream out;
    const int truncation =
        outcome.endpoints.empty() ? 0 : outcome.endpoints.front().truncation();
    out << "path,mode_0";
    for (int k = 1; k <= truncation; ++k) out << ",mode_" << k;
    out << "\n";
    for (std::size_t i = 0; i < outcome.endpoints.size(); ++i) {
        if (outcome.failed[i]) continue;
        out << i;
        out << "," << format_double(outcome.endpoints[i].mean);
        for (double c : outcome.endpoints[i].modes) out << "," << format_double(c);
        out << "\n";
    }
    return out.str();
}

inline void run_simulate(const ExperimentConfig& cfg, Artifacts& art) {
    const auto outcome = simulate_ensemble(cfg.model, cfg.x, cfg.T, cfg.ensemble, cfg.seed,
                                           cfg.workers);
    art.paths_total = cfg.ensemble;
    art.paths_failed = outcome.failures;

    double worst_mass_gap = 0.0;
    for (std::size_t i = 0; i < outcome.endpoints.size(); ++i)
        if (!outcome.failed[i])
            worst_mass_gap = std::max(worst_mass_gap,
                                      std::abs(outcome.endpoints[i].mean - cfg.model.mass_c));
    art.reports.push_back(make_check("mass_conservation", worst_mass_gap, 1e-13, 0.0, 0.0,
                                     cfg.ensemble - outcome.failures, cfg.seed));
    art.reports.push_back(make_check("divergence_rate", outcome.failure_rate(), 0.01, 0.0, 0.0,
                                     cfg.ensemble, cfg.seed));
    if (cfg.trajectory != TrajectoryMode::Off) art.trajectory_csv = record_trajectory(cfg);
    if (cfg.samples) art.samples_csv = endpoints_csv(outcome);
}

inline void run_couple_degenerate(const ExperimentConfig& cfg, Artifacts& art) {
    const ModelParams& p = cfg.model;
    const long long paths = cfg.ensemble;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sup_ratio(static_cast<std::size_t>(paths), nan);
    std::vector<double> xi_ratio(static_cast<std::size_t>(paths), nan);
    std::vector<double> mean_gap(static_cast<std::size_t>(paths), nan);
    WeightEnsemble weights;
    weights.log_weights.assign(static_cast<std::size_t>(paths), nan);
    weights.budget_entropy =
        entropy_budget_degenerate(p.lambda, p.noise, cfg.T, dist_minus1(cfg.x, cfg.y));

    parallel_for_paths(
        paths, cfg.workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(path)));
            try {
                const auto res = run_degenerate_coupling(*stepper, cfg.x, cfg.y, cfg.T, rng);
                sup_ratio[static_cast<std::size_t>(path)] = res.sup_contraction_ratio;
                xi_ratio[static_cast<std::size_t>(path)] = res.sup_xi_ratio;
                mean_gap[static_cast<std::size_t>(path)] = res.sup_mean_gap;
                weights.log_weights[static_cast<std::size_t>(path)] = res.state.log_weight;
            } catch (const Error&) {
            }
        });

    long long failures = 0;
    double worst_ratio = 0.0, worst_xi = 0.0, worst_gap = 0.0;
    for (long long i = 0; i < paths; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (std::isnan(weights.log_weights[idx])) {
            ++failures;
            continue;
        }
        worst_ratio = std::max(worst_ratio, sup_ratio[idx]);
        worst_xi = std::max(worst_xi, xi_ratio[idx]);
        worst_gap = std::max(worst_gap, mean_gap[idx]);
    }
    weights.failures = failures;
    art.paths_total = paths;
    art.paths_failed = failures;

    const long long ok = paths - failures;
    art.reports.push_back(make_check("degenerate_contraction", worst_ratio, cfg.contraction_tol,
                                     0.0, 0.0, ok, cfg.seed));
    art.reports.push_back(
        make_check("xi_budget", worst_xi, cfg.contraction_tol, 0.0, 0.0, ok, cfg.seed));
    art.reports.push_back(
        make_check("difference_mass_gap", worst_gap, 1e-13, 0.0, 0.0, ok, cfg.seed));
    for (auto& r : entropy_reports(weights, "degenerate", cfg.seed)) art.reports.push_back(r);
}

inline void run_couple_white(const ExperimentConfig& cfg, Artifacts& art) {
    const ModelParams& p = cfg.model;
    const GammaSchedule sched{cfg.T, cfg.a, p.lambda};
    const long long paths = cfg.ensemble;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> ledger_ratio(static_cast<std::size_t>(paths), nan);
    std::vector<double> final_ratio(static_cast<std::size_t>(paths), nan);
    WeightEnsemble weights;
    weights.log_weights.assign(static_cast<std::size_t>(paths), nan);
    weights.budget_entropy = entropy_budget_white(sched, dist_minus1(cfg.x, cfg.y));

    parallel_for_paths(
        paths, cfg.workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(path)));
            try {
                const auto res = run_white_coupling(*stepper, sched, cfg.x, cfg.y, rng,
                                                    cfg.coupling_tol, cfg.kappa);
                ledger_ratio[static_cast<std::size_t>(path)] = res.sup_ledger_ratio;
                final_ratio[static_cast<std::size_t>(path)] = res.final_dist_ratio;
                weights.log_weights[static_cast<std::size_t>(path)] = res.state.log_weight;
            } catch (const Error&) {
            }
        });

    long long failures = 0;
    double worst_ledger = 0.0, worst_final = 0.0;
    for (long long i = 0; i < paths; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (std::isnan(weights.log_weights[idx])) {
            ++failures;
            continue;
        }
        worst_ledger = std::max(worst_ledger, ledger_ratio[idx]);
        worst_final = std::max(worst_final, final_ratio[idx]);
    }
    weights.failures = failures;
    art.paths_total = paths;
    art.paths_failed = failures;

    const long long ok = paths - failures;
    art.reports.push_back(
        make_check("white_ledger_bound", worst_ledger, cfg.ledger_tol, 0.0, 0.0, ok, cfg.seed));
    art.reports.push_back(make_check("white_coupling_success", worst_final, cfg.coupling_tol, 0.0,
                                     0.0, ok, cfg.seed));
    for (auto& r : entropy_reports(weights, "white", cfg.seed)) art.reports.push_back(r);
    art.reports.push_back(q_moment_report(weights, sched, cfg.q, dist_minus1(cfg.x, cfg.y),
                                          cfg.seed));
}

inline void run_harnack(const ExperimentConfig& cfg, Artifacts& art) {
    const auto phi = cfg.phi();
    art.paths_total = cfg.ensemble;
    if (cfg.harnack_kind == "asymptotic") {
        art.reports = check_asymptotic_log_harnack(cfg.x, cfg.y, cfg.times, phi, cfg.model,
                                                   cfg.ensemble, cfg.seed, cfg.workers);
    } else if (cfg.harnack_kind == "power") {
        art.reports = check_power_harnack(cfg.x, cfg.y, cfg.times, phi, cfg.power_p, cfg.model,
                                          cfg.ensemble, cfg.seed, cfg.workers);
    } else if (cfg.harnack_kind == "log") {
        art.reports = check_log_harnack_white(cfg.x, cfg.y, cfg.times, phi, cfg.model,
                                              cfg.ensemble, cfg.seed, cfg.workers);
    } else if (cfg.harnack_kind == "ergodic") {
        art.reports = check_ergodic_decay(cfg.x, cfg.y, phi, cfg.model, cfg.times, cfg.ensemble,
                                          cfg.seed, cfg.workers);
    } else if (cfg.harnack_kind == "gradient") {
        art.reports.push_back(check_gradient_estimate(cfg.x, cfg.direction, cfg.times.front(),
                                                      phi, cfg.model, cfg.ensemble, cfg.seed,
                                                      cfg.workers, cfg.fd_eps));
    }
    long long usable = 0;
    for (const auto& r : art.reports) usable = std::max(usable, r.ensemble);
    art.paths_failed = cfg.ensemble - usable;
}

inline void run_moments(const ExperimentConfig& cfg, Artifacts& art) {
    art.reports = check_exponential_moment(cfg.x, cfg.varsigma, cfg.model, cfg.T, cfg.ensemble,
                                           cfg.seed, cfg.workers);
    art.paths_total = cfg.ensemble;
    art.paths_failed = cfg.ensemble - (art.reports.empty() ? 0 : art.reports.front().ensemble);
}

inline void run_gibbs(const ExperimentConfig& cfg, Artifacts& art) {
    GibbsTarget target;
    target.lambda = cfg.model.lambda;
    target.mass_c = cfg.model.mass_c;
    target.M = cfg.model.M;
    target.Q = cfg.model.grid_size();
    target.n_poly = cfg.model.n_poly;
    target.variant = cfg.gibbs_variant;

    CompareInvariantOptions opts;
    opts.T_long = cfg.T_long;
    opts.burn_in = cfg.burn_in;
    opts.paths = cfg.ensemble;
    opts.chain_steps = cfg.chain_steps;
    opts.beta = cfg.beta;
    opts.sample_stride = static_cast<int>(cfg.sample_stride);
    opts.chain_thin = static_cast<int>(cfg.chain_thin);
    opts.tracked_modes = static_cast<int>(cfg.tracked_modes);

    art.reports = compare_invariant(cfg.model, target, opts, cfg.seed, cfg.workers);
    art.paths_total = cfg.ensemble;

    if (cfg.samples) {
        auto x0 = SpectralField::zero(target.M);
        x0.mean = target.mass_c;
        PcnChain chain(target, x0, cfg.beta, mix_seed(cfg.seed, 3000017));
        const long long rows = std::min<long long>(2000, cfg.chain_steps);
        std::ostringstream out;
        out << "sample_index,mode_0";
        for (int k = 1; k <= target.M; ++k) out << ",mode_" << k;
        out << "\n";
        for (long long i = 0; i < rows; ++i) {
            for (long long t = 0; t < cfg.chain_thin; ++t) chain.step();
            out << i << "," << format_double(chain.state().mean);
            for (double c : chain.state().modes) out << "," << format_double(c);
            out << "\n";
        }
        art.samples_csv = out.str();
    }
}

inline void run_validate(const ExperimentConfig& cfg, Artifacts& art) {
    const ModelParams& p = cfg.model;
    // (A1) holds structurally for both shipped variants.
    if (!validate_a1(p.noise))
        throw ValidationError("assumption (A1) fails: B* e_0 must vanish");
    CheckReport a1 = make_check("validate_a1", std::abs(p.noise.b0), 0.0, 0.0, 0.0, 0, cfg.seed);
    a1.pass = true;
    art.reports.push_back(a1);

    if (p.noise.is_degenerate()) {
        const double gap = static_cast<double>(p.noise.active_modes + 1) *
                           static_cast<double>(p.noise.active_modes + 1) * kPi * kPi;
        if (!validate_a2(p.noise, p.lambda))
            throw ValidationError(
                "assumption (A2) fails: need b_i > 0 for i <= N and (N+1)^2 pi^2 > lambda "
                "(lambda = " + format_double(p.lambda) + ", (N+1)^2 pi^2 = " +
                format_double(gap) + ")");
        CheckReport a2 = make_check("validate_a2", p.lambda, gap, 0.0, 0.0, 0, cfg.seed);
        a2.pass = true;
        art.reports.push_back(a2);
    } else {
        const double pi2 = kPi * kPi;
        if (!(pi2 > p.lambda))
            throw ValidationError("hypothesis pi^2 > lambda fails (lambda = " +
                                  format_double(p.lambda) + ")");
        CheckReport gap = make_check("validate_pi2_gap", p.lambda, pi2, 0.0, 0.0, 0, cfg.seed);
        gap.pass = true;
        art.reports.push_back(gap);
    }
    art.reports.push_back(make_check("stability_budget",
                                     p.dt * 0.5 * p.lambda * eigen_mu(p.M), 1.0, 0.0, 0.0, 0,
                                     cfg.seed));
}

}  // namespace runner_detail

// Computes all artifacts for a validated configuration. Throws
// ValidationError for structurally invalid requests (exit code 2 at the
// CLI); statistical failures and divergences are encoded in exit_code.
inline Artifacts execute_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Artifacts art;
    std::string manifest = "# spinodal ";
    manifest += kVersion;
    manifest += "\n";
    manifest += cfg.resolved();
    art.manifest = manifest;

    switch (cfg.kind) {
        case ExperimentKind::Simulate: runner_detail::run_simulate(cfg, art); break;
        case ExperimentKind::CoupleDegenerate: runner_detail::run_couple_degenerate(cfg, art); break;
        case ExperimentKind::CoupleWhite: runner_detail::run_couple_white(cfg, art); break;
        case ExperimentKind::Harnack: runner_detail::run_harnack(cfg, art); break;
        case ExperimentKind::Moments: runner_detail::run_moments(cfg, art); break;
        case ExperimentKind::Gibbs: runner_detail::run_gibbs(cfg, art); break;
        case ExperimentKind::Validate: runner_detail::run_validate(cfg, art); break;
    }

    bool any_fail = false;
    for (const auto& r : art.reports)
        if (!r.advisory && !r.pass) any_fail = true;
    const double divergence_rate =
        art.paths_total > 0
            ? static_cast<double>(art.paths_failed) / static_cast<double>(art.paths_total)
            : 0.0;
    if (divergence_rate > 0.01)
        art.exit_code = 3;
    else if (any_fail)
        art.exit_code = 1;
    else
        art.exit_code = 0;
    return art;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << content;
}

inline int write_artifacts(const Artifacts& art, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_text_file(dir / "manifest.txt", art.manifest);
    write_text_file(dir / "reports.jsonl", reports_to_jsonl(art.reports));
    if (art.trajectory_csv) write_text_file(dir / "trajectory.csv", *art.trajectory_csv);
    if (art.samples_csv) write_text_file(dir / "samples.csv", *art.samples_csv);
    return art.exit_code;
}

inline std::string error_json(const Error& e) {
    return "{\"error\":\"" + escape_json(e.code()) + "\",\"message\":\"" +
           escape_json(e.what()) + "\"}";
}

// Full pipeline used by the CLI: compute, write, return the exit code.
inline int run_experiment_files(const ExperimentConfig& cfg) {
    const Artifacts art = execute_experiment(cfg);
    return write_artifacts(art, cfg.out_dir);
}

}  // namespace spinodal
