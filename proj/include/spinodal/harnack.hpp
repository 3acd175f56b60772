#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "spinodal/dynamics.hpp"
#include "spinodal/functionals.hpp"
#include "spinodal/report.hpp"

// Monte-Carlo estimators and inequality checkers for the semigroup-level
// claims. Budgets come from closed forms evaluated on the model constants;
// estimators use synchronized noise across the two starting points so the
// slack of each inequality is estimated with strongly correlated errors.

namespace spinodal {

// ---------------------------------------------------------------------------
// Closed-form budgets.

struct AsymptoticBudget {
    double Phi = 0.0;   // lambda/(8 alpha) (1 - e^{-2 alpha t}) ||B^{-1}A Pi_l||^2 d^2
    double Psi = 0.0;   // e^{-alpha t} d
};

inline AsymptoticBudget asymptotic_budget(double lambda, const NoiseSpec& noise, double t,
                                          double dist) {
    const double alpha = alpha_rate(noise.active_modes, lambda);
    const double op = op_norm_binv_a_pil(noise);
    AsymptoticBudget b;
    b.Phi = lambda / (8.0 * alpha) * (-std::expm1(-2.0 * alpha * t)) * op * op * dist * dist;
    b.Psi = std::exp(-alpha * t) * dist;
    return b;
}

inline double synchronous_rate(double lambda) {
    if (!(kPi * kPi > lambda))
        throw ValidationError("synchronous_rate: requires pi^2 > lambda");
    return (kPi * kPi - lambda) * kPi * kPi;
}

inline double power_harnack_exponent(double lambda, double power_p, double t, double dist) {
    if (!(power_p > 1.0)) throw ValidationError("power_harnack_exponent: requires p > 1");
    const double r = synchronous_rate(lambda);
    return power_p * r * dist * dist / (2.0 * (power_p - 1.0) * std::expm1(r * t));
}

inline double log_harnack_budget(double lambda, double t, double dist) {
    const double r = synchronous_rate(lambda);
    return r * dist * dist / (2.0 * std::expm1(r * t));
}

// Entropy budget |x-y|^2 / (2 a gamma(0)) of the white-noise coupling.
inline double entropy_budget_white(const GammaSchedule& sched, double dist) {
    return dist * dist / (2.0 * sched.a * sched.at_zero());
}

// Entropy budget of the degenerate coupling; identical to Phi.
inline double entropy_budget_degenerate(double lambda, const NoiseSpec& noise, double t,
                                        double dist) {
    return asymptotic_budget(lambda, noise, t, dist).Phi;
}

inline double q_moment_budget(const GammaSchedule& sched, double q, double dist) {
    if (!(q > 1.0)) throw ValidationError("q_moment_budget: requires q > 1");
    return std::exp((q - 1.0) * q * dist * dist / (2.0 * sched.a * sched.at_zero()));
}

// ---------------------------------------------------------------------------
// Synchronized sampling of phi along the plain dynamics.

struct PairEnsemble {
    std::vector<double> times;
    // values[time][path]; NaN marks a diverged path
    std::vector<std::vector<double>> phi_x;
    std::vector<std::vector<double>> phi_y;
    long long paths = 0;
    long long failures = 0;
};

inline bool fields_equal(const SpectralField& x, const SpectralField& y) {
    if (x.mean != y.mean || x.truncation() != y.truncation()) return false;
    for (int k = 1; k <= x.truncation(); ++k)
        if (x.mode(k) != y.mode(k)) return false;
    return true;
}

// Runs the plain dynamics from x and from y with identical noise on every
// path and records phi at the requested (sorted) times.
inline PairEnsemble sample_phi_pairs(const ModelParams& p, const SpectralField& x,
                                     const SpectralField& y, const TestFunctional& phi,
                                     const std::vector<double>& times, long long paths,
                                     std::uint64_t seed, int workers) {
    p.validate();
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1])
            throw ValidationError("sample_phi_pairs: times must be nondecreasing");

    PairEnsemble out;
    out.times = times;
    out.paths = paths;
    const std::size_t nt = times.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.phi_x.assign(nt, std::vector<double>(static_cast<std::size_t>(paths), nan));
    out.phi_y.assign(nt, std::vector<double>(static_cast<std::size_t>(paths), nan));

    std::vector<long long> record_steps;
    long long max_step = 0;
    for (double t : times) {
        record_steps.push_back(std::llround(t / p.dt));
        max_step = std::max(max_step, record_steps.back());
    }

    const bool single = fields_equal(x, y);
    parallel_for_paths(
        paths, workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(path)));
            std::vector<double> draws;
            SpectralField u = x;
            SpectralField v = y;
            try {
                std::size_t rec = 0;
                auto record = [&](long long step_idx) {
                    while (rec < record_steps.size() && record_steps[rec] == step_idx) {
                        out.phi_x[rec][static_cast<std::size_t>(path)] = phi(u);
                        out.phi_y[rec][static_cast<std::size_t>(path)] = single ? phi(u) : phi(v);
                        ++rec;
                    }
                };
                record(0);
                for (long long s = 0; s < max_step; ++s) {
                    fill_normals(rng, draws, stepper->noise_modes());
                    u = stepper->step(u, draws, nullptr, s);
                    if (!single) v = stepper->step(v, draws, nullptr, s);
                    record(s + 1);
                }
            } catch (const Error&) {
                for (std::size_t ti = 0; ti < nt; ++ti) {
                    out.phi_x[ti][static_cast<std::size_t>(path)] = nan;
                    out.phi_y[ti][static_cast<std::size_t>(path)] = nan;
                }
            }
        });

    for (long long path = 0; path < paths; ++path)
        if (std::isnan(out.phi_x.empty() ? 0.0 : out.phi_x[0][static_cast<std::size_t>(path)]))
            ++out.failures;
    return out;
}

struct SemigroupEstimate {
    double mean = 0.0;
    double se = 0.0;
    long long paths_ok = 0;
};

// Plain Monte-Carlo estimate of P_t phi(x).
inline SemigroupEstimate estimate_semigroup(const TestFunctional& phi, const SpectralField& x,
                                            double t, long long paths, std::uint64_t seed,
                                            const ModelParams& p, int workers = 1) {
    const std::vector<double> times{t};
    const auto ens = sample_phi_pairs(p, x, x, phi, times, paths, seed, workers);
    MeanStderr ms;
    try {
        ms = reduce_mean(ens.phi_x[0]);
    } catch (const EstimatorError&) {
        throw EstimatorError("estimate_semigroup: every path diverged");
    }
    return {ms.mean, ms.se, ms.n};
}

// ---------------------------------------------------------------------------
// Inequality checks on the plain dynamics.

namespace detail {

inline void require_shared_mass(const SpectralField& x, const SpectralField& y,
                                const ModelParams& p) {
    if (std::abs(x.mean - p.mass_c) > 1e-12 || std::abs(y.mean - p.mass_c) > 1e-12)
        throw ValidationError("check: initial fields must carry the configured mass");
}

inline std::string with_time(const std::string& base, double t) {
    return base + "_t=" + format_double(t);
}

}  // namespace detail

// log-Harnack with decaying gradient correction, checked at one time per
// report: P_t log phi(y) <= log P_t phi(x) + Phi + Psi ||grad log phi||.
inline std::vector<CheckReport> check_asymptotic_log_harnack(
    const SpectralField& x, const SpectralField& y, const std::vector<double>& times,
    const TestFunctional& phi, const ModelParams& p, long long paths, std::uint64_t seed,
    int workers = 1) {
    if (!p.noise.is_degenerate())
        throw ValidationError("check_asymptotic_log_harnack: degenerate noise required");
    if (!validate_a1(p.noise) || !validate_a2(p.noise, p.lambda))
        throw ValidationError("check_asymptotic_log_harnack: assumptions (A1)/(A2) fail");
    detail::require_shared_mass(x, y, p);
    const double dist = dist_minus1(x, y);

    const auto ens = sample_phi_pairs(p, x, y, phi, times, paths, seed, workers);
    std::vector<CheckReport> reports;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::vector<double> log_phi_y = ens.phi_y[ti];
        for (double& v : log_phi_y)
            if (!std::isnan(v)) v = std::log(v);
        const auto lhs = reduce_mean(log_phi_y);
        const auto px = reduce_mean(ens.phi_x[ti]);
        const auto budget = asymptotic_budget(p.lambda, p.noise, times[ti], dist);
        const double rhs = std::log(px.mean) + budget.Phi + budget.Psi * phi.grad_log_norm();
        const double se_rhs = px.se / px.mean;
        reports.push_back(make_check(detail::with_time("asymptotic_log_harnack", times[ti]),
                                     lhs.mean, rhs, lhs.se, se_rhs, lhs.n, seed));
    }
    return reports;
}

// |P_t phi|^p(y) <= P_t |phi|^p(x) exp{p r d^2 / (2(p-1)(e^{rt}-1))}.
inline std::vector<CheckReport> check_power_harnack(
    const SpectralField& x, const SpectralField& y, const std::vector<double>& times,
    const TestFunctional& phi, double power_p, const ModelParams& p, long long paths,
    std::uint64_t seed, int workers = 1) {
    if (p.noise.variant != NoiseVariant::WhiteSqrtLaplacian)
        throw ValidationError("check_power_harnack: white noise required");
    if (!(kPi * kPi > p.lambda))
        throw ValidationError("check_power_harnack: requires pi^2 > lambda");
    detail::require_shared_mass(x, y, p);
    const double dist = dist_minus1(x, y);

    const auto ens = sample_phi_pairs(p, x, y, phi, times, paths, seed, workers);
    std::vector<CheckReport> reports;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const auto py = reduce_mean(ens.phi_y[ti]);
        std::vector<double> phi_pow = ens.phi_x[ti];
        for (double& v : phi_pow)
            if (!std::isnan(v)) v = std::pow(std::abs(v), power_p);
        const auto px = reduce_mean(phi_pow);
        const double factor = std::exp(power_harnack_exponent(p.lambda, power_p, times[ti], dist));
        const double lhs = std::pow(std::abs(py.mean), power_p);
        const double se_lhs = power_p * std::pow(std::abs(py.mean), power_p - 1.0) * py.se;
        const double rhs = px.mean * factor;
        const double se_rhs = px.se * factor;
        reports.push_back(make_check(detail::with_time("power_harnack", times[ti]), lhs, rhs,
                                     se_lhs, se_rhs, px.n, seed));
    }
    return reports;
}

// P_t log phi(y) <= r d^2/(2(e^{rt}-1)) + log P_t phi(x).
inline std::vector<CheckReport> check_log_harnack_white(
    const SpectralField& x, const SpectralField& y, const std::vector<double>& times,
    const TestFunctional& phi, const ModelParams& p, long long paths, std::uint64_t seed,
    int workers = 1) {
    if (p.noise.variant != NoiseVariant::WhiteSqrtLaplacian)
        throw ValidationError("check_log_harnack_white: white noise required");
    if (!(kPi * kPi > p.lambda))
        throw ValidationError("check_log_harnack_white: requires pi^2 > lambda");
    if (!(phi.lower_bound() > 0.0))
        throw ValidationError("check_log_harnack_white: phi must be strictly positive");
    detail::require_shared_mass(x, y, p);
    const double dist = dist_minus1(x, y);

    const auto ens = sample_phi_pairs(p, x, y, phi, times, paths, seed, workers);
    std::vector<CheckReport> reports;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::vector<double> log_phi_y = ens.phi_y[ti];
        for (double& v : log_phi_y)
            if (!std::isnan(v)) v = std::log(v);
        const auto lhs = reduce_mean(log_phi_y);
        const auto px = reduce_mean(ens.phi_x[ti]);
        const double rhs = log_harnack_budget(p.lambda, times[ti], dist) + std::log(px.mean);
        reports.push_back(make_check(detail::with_time("log_harnack", times[ti]), lhs.mean, rhs,
                                     lhs.se, px.se / px.mean, lhs.n, seed));
    }
    return reports;
}

// ---------------------------------------------------------------------------
// Girsanov-weight ensembles and their entropy / moment checks.

struct WeightEnsemble {
    std::vector<double> log_weights;   // NaN marks a diverged path
    long long failures = 0;
    double budget_entropy = 0.0;       // closed-form bound on E[W log W]
    double coupling_success_rate = 0.0;  // white variant only
};

inline WeightEnsemble sample_white_coupling_weights(const ModelParams& p,
                                                    const GammaSchedule& sched,
                                                    const SpectralField& x,
                                                    const SpectralField& y, long long paths,
                                                    std::uint64_t seed, int workers = 1,
                                                    double coupling_tol = 1e-4) {
    p.validate();
    sched.validate();
    WeightEnsemble out;
    out.log_weights.assign(static_cast<std::size_t>(paths),
                           std::numeric_limits<double>::quiet_NaN());
    out.budget_entropy = entropy_budget_white(sched, dist_minus1(x, y));
    std::vector<char> coupled(static_cast<std::size_t>(paths), 0);
    parallel_for_paths(
        paths, workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(path)));
            try {
                const auto res = run_white_coupling(*stepper, sched, x, y, rng, coupling_tol);
                out.log_weights[static_cast<std::size_t>(path)] = res.state.log_weight;
                coupled[static_cast<std::size_t>(path)] = res.coupled ? 1 : 0;
            } catch (const Error&) {
            }
        });
    long long ok = 0, success = 0;
    for (long long path = 0; path < paths; ++path) {
        if (std::isnan(out.log_weights[static_cast<std::size_t>(path)])) {
            ++out.failures;
        } else {
            ++ok;
            success += coupled[static_cast<std::size_t>(path)];
        }
    }
    out.coupling_success_rate = ok > 0 ? static_cast<double>(success) / static_cast<double>(ok) : 0.0;
    return out;
}

inline WeightEnsemble sample_degenerate_coupling_weights(const ModelParams& p,
                                                         const SpectralField& x,
                                                         const SpectralField& y, double t_final,
                                                         long long paths, std::uint64_t seed,
                                                         int workers = 1) {
    p.validate();
    WeightEnsemble out;
    out.log_weights.assign(static_cast<std::size_t>(paths),
                           std::numeric_limits<double>::quiet_NaN());
    out.budget_entropy = entropy_budget_degenerate(p.lambda, p.noise, t_final, dist_minus1(x, y));
    parallel_for_paths(
        paths, workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(path)));
            try {
                const auto res = run_degenerate_coupling(*stepper, x, y, t_final, rng);
                out.log_weights[static_cast<std::size_t>(path)] = res.state.log_weight;
            } catch (const Error&) {
            }
        });
    for (double lw : out.log_weights)
        if (std::isnan(lw)) ++out.failures;
    return out;
}

// E[W log W] against the closed-form budget, plus E[W] = 1 within the band.
inline std::vector<CheckReport> entropy_reports(const WeightEnsemble& weights,
                                                const std::string& tag, std::uint64_t seed) {
    std::vector<double> w(weights.log_weights);
    std::vector<double> wlogw(weights.log_weights);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::isnan(w[i])) continue;
        const double value = std::exp(weights.log_weights[i]);
        if (!std::isfinite(value))
            throw EstimatorError("entropy_reports: non-finite weight");
        w[i] = value;
        wlogw[i] = value * weights.log_weights[i];
    }
    const auto mw = reduce_mean(w);
    const auto me = reduce_mean(wlogw);
    std::vector<CheckReport> reports;
    reports.push_back(make_check("entropy_bound_" + tag, me.mean, weights.budget_entropy, me.se,
                                 0.0, me.n, seed));
    reports.push_back(make_band_check("weight_normalization_" + tag, mw.mean, 1.0, mw.se, 0.0,
                                      mw.n, seed));
    return reports;
}

inline CheckReport q_moment_report(const WeightEnsemble& weights, const GammaSchedule& sched,
                                   double q, double dist, std::uint64_t seed) {
    std::vector<double> wq(weights.log_weights);
    for (double& v : wq)
        if (!std::isnan(v)) {
            v = std::exp(q * v);
            if (!std::isfinite(v)) throw EstimatorError("q_moment_report: non-finite weight power");
        }
    const auto mq = reduce_mean(wq);
    return make_check("q_moment_q=" + format_double(q), mq.mean, q_moment_budget(sched, q, dist),
                      mq.se, 0.0, mq.n, seed);
}

// Spec-shaped wrappers that draw their own coupling ensemble.
inline std::vector<CheckReport> check_entropy_bound_white(const ModelParams& p, double T, double a,
                                                          const SpectralField& x,
                                                          const SpectralField& y, long long paths,
                                                          std::uint64_t seed, int workers = 1) {
    const GammaSchedule sched{T, a, p.lambda};
    const auto weights = sample_white_coupling_weights(p, sched, x, y, paths, seed, workers);
    return entropy_reports(weights, "white", seed);
}

inline std::vector<CheckReport> check_entropy_bound_degenerate(const ModelParams& p, double t,
                                                               const SpectralField& x,
                                                               const SpectralField& y,
                                                               long long paths, std::uint64_t seed,
                                                               int workers = 1) {
    const auto weights = sample_degenerate_coupling_weights(p, x, y, t, paths, seed, workers);
    return entropy_reports(weights, "degenerate", seed);
}

inline CheckReport check_q_moment(const ModelParams& p, double T, double a, double q,
                                  const SpectralField& x, const SpectralField& y, long long paths,
                                  std::uint64_t seed, int workers = 1) {
    const GammaSchedule sched{T, a, p.lambda};
    const auto weights = sample_white_coupling_weights(p, sched, x, y, paths, seed, workers);
    return q_moment_report(weights, sched, q, dist_minus1(x, y), seed);
}

// ---------------------------------------------------------------------------
// Exponential moment of the invariant regime (stationarity proxy).

inline std::vector<CheckReport> check_exponential_moment(const SpectralField& x, double varsigma,
                                                         const ModelParams& p, double T,
                                                         long long paths, std::uint64_t seed,
                                                         int workers = 1) {
    p.validate();
    const double bstar = bstar_norm(p.noise, p.M);
    const double pi4 = kPi * kPi * kPi * kPi;
    if (!(pi4 > 2.0 * varsigma * bstar * bstar))
        throw ValidationError("check_exponential_moment: requires pi^4 > 2 varsigma ||B*||^2");

    const long long steps_half = std::llround(0.5 * T / p.dt);
    const long long steps_T = 2 * steps_half;
    const long long steps_2T = 4 * steps_half;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> window_a(static_cast<std::size_t>(paths), nan);
    std::vector<double> window_b(static_cast<std::size_t>(paths), nan);

    parallel_for_paths(
        paths, workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(path)));
            std::vector<double> draws;
            SpectralField u = x;
            double sum_a = 0.0, sum_b = 0.0;
            long long count_a = 0, count_b = 0;
            try {
                for (long long s = 0; s < steps_2T; ++s) {
                    fill_normals(rng, draws, stepper->noise_modes());
                    u = stepper->step(u, draws, nullptr, s);
                    const double m1 = seminorm(u, -1.0);
                    const double obs = std::exp(varsigma * m1 * m1);
                    if (s >= steps_half && s < steps_T) {
                        sum_a += obs;
                        ++count_a;
                    } else if (s >= steps_T) {
                        sum_b += obs;
                        ++count_b;
                    }
                }
                window_a[static_cast<std::size_t>(path)] = sum_a / static_cast<double>(count_a);
                window_b[static_cast<std::size_t>(path)] = sum_b / static_cast<double>(count_b);
            } catch (const Error&) {
            }
        });

    const auto ea = reduce_mean(window_a);
    const auto eb = reduce_mean(window_b);
    std::vector<CheckReport> reports;
    reports.push_back(make_band_check("exponential_moment_stability", eb.mean, ea.mean, eb.se,
                                      ea.se, ea.n, seed));
    return reports;
}

// ---------------------------------------------------------------------------
// Ergodic decay of synchronized pairs and the gradient estimate.

inline std::vector<CheckReport> check_ergodic_decay(const SpectralField& x, const SpectralField& y,
                                                    const TestFunctional& phi, const ModelParams& p,
                                                    const std::vector<double>& times,
                                                    long long paths, std::uint64_t seed,
                                                    int workers = 1) {
    if (!(kPi * kPi > p.lambda))
        throw ValidationError("check_ergodic_decay: requires pi^2 > lambda");
    detail::require_shared_mass(x, y, p);
    const double dist = dist_minus1(x, y);
    // r = (pi^2 - lambda) pi^2 bounds the decay of the squared distance;
    // the |.|_{-1} distance itself contracts at r/2 (sharp on mode 1 in the
    // linearized flow).
    const double rate = synchronous_rate(p.lambda);

    const auto ens = sample_phi_pairs(p, x, y, phi, times, paths, seed, workers);
    std::vector<CheckReport> reports;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::vector<double> diffs(ens.phi_x[ti].size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < diffs.size(); ++i)
            if (!std::isnan(ens.phi_x[ti][i]))
                diffs[i] = ens.phi_x[ti][i] - ens.phi_y[ti][i];
        const auto d = reduce_mean(diffs);
        const double rhs = phi.grad_norm() * std::exp(-0.5 * rate * times[ti]) * dist;
        reports.push_back(make_check(detail::with_time("ergodic_decay", times[ti]),
                                     std::abs(d.mean), rhs, d.se, 0.0, d.n, seed));
    }
    return reports;
}

// Centered-difference directional derivative of P_t phi against the
// variance-based budget. Wide confidence intervals are expected, so the
// report is advisory.
inline CheckReport check_gradient_estimate(const SpectralField& x, const SpectralField& direction,
                                           double t, const TestFunctional& phi,
                                           const ModelParams& p, long long paths,
                                           std::uint64_t seed, int workers = 1,
                                           double fd_eps = 1e-3) {
    if (!p.noise.is_degenerate())
        throw ValidationError("check_gradient_estimate: degenerate noise required");
    if (!validate_a1(p.noise) || !validate_a2(p.noise, p.lambda))
        throw ValidationError("check_gradient_estimate: assumptions (A1)/(A2) fail");
    const double hnorm = seminorm(direction, -1.0);
    if (!(hnorm > 0.0))
        throw ValidationError("check_gradient_estimate: direction must be nonzero with zero mean");

    SpectralField plus = x;
    SpectralField minus = x;
    for (int k = 1; k <= x.truncation(); ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        const double step = fd_eps * direction.modes[i] / hnorm;
        plus.modes[i] += step;
        minus.modes[i] -= step;
    }

    const std::vector<double> times{t};
    const auto ens = sample_phi_pairs(p, plus, minus, phi, times, paths, seed, workers);
    std::vector<double> diffs(ens.phi_x[0].size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> sq(ens.phi_x[0].size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (std::isnan(ens.phi_x[0][i])) continue;
        diffs[i] = (ens.phi_x[0][i] - ens.phi_y[0][i]) / (2.0 * fd_eps);
        sq[i] = ens.phi_x[0][i] * ens.phi_x[0][i];
    }
    const auto d = reduce_mean(diffs);
    const auto m1 = reduce_mean(ens.phi_x[0]);
    const auto m2 = reduce_mean(sq);

    const double alpha = alpha_rate(p.noise.active_modes, p.lambda);
    const double prefactor = std::sqrt(p.lambda / (4.0 * alpha)) * op_norm_binv_a_pil(p.noise);
    const double variance = std::max(0.0, m2.mean - m1.mean * m1.mean);
    const double rhs = prefactor * std::sqrt(variance) + phi.grad_norm() * std::exp(-alpha * t);
    double se_rhs = 0.0;
    if (variance > 0.0) {
        const double se_var = m2.se + 2.0 * std::abs(m1.mean) * m1.se;
        se_rhs = prefactor * 0.5 * se_var / std::sqrt(variance);
    }
    CheckReport r = make_check(detail::with_time("gradient_estimate", t), std::abs(d.mean), rhs,
                               d.se, se_rhs, d.n, seed);
    r.advisory = true;
    return r;
}

// Fitted exponential decay rate of the squared distance
// |u(t;x) - u(t;y)|_{-1}^2 for one synchronized pair (least squares on the
// log of the squared distance), the quantity the Lyapunov estimates track.
struct DecayFit {
    double rate = 0.0;        // decay rate of the squared distance
    double initial_dist = 0.0;
    double final_dist = 0.0;
};

inline DecayFit fit_synchronous_decay(const ModelParams& p, const SpectralField& x,
                                      const SpectralField& y, double t_final, int samples,
                                      std::uint64_t seed) {
    p.validate();
    Stepper stepper(p);
    GaussianRng rng(seed);
    std::vector<double> draws;
    SpectralField u = x;
    SpectralField v = y;
    const long long steps = std::llround(t_final / p.dt);
    const long long stride = std::max<long long>(1, steps / samples);
    std::vector<double> ts, logs;
    DecayFit fit;
    fit.initial_dist = dist_minus1(x, y);
    ts.push_back(0.0);
    logs.push_back(2.0 * std::log(fit.initial_dist));
    for (long long s = 0; s < steps; ++s) {
        fill_normals(rng, draws, stepper.noise_modes());
        u = stepper.step(u, draws, nullptr, s);
        v = stepper.step(v, draws, nullptr, s);
        if ((s + 1) % stride == 0) {
            ts.push_back(static_cast<double>(s + 1) * p.dt);
            logs.push_back(2.0 * std::log(dist_minus1(u, v)));
        }
    }
    fit.final_dist = dist_minus1(u, v);
    // least-squares slope of log distance against time
    const std::size_t n = ts.size();
    double mean_t = 0.0, mean_l = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_t += ts[i];
        mean_l += logs[i];
    }
    mean_t /= static_cast<double>(n);
    mean_l /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (ts[i] - mean_t) * (logs[i] - mean_l);
        den += (ts[i] - mean_t) * (ts[i] - mean_t);
    }
    fit.rate = -num / den;   // decay rate of |X|_{-1}^2
    return fit;
}

}  // namespace spinodal
