#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "spinodal/dynamics.hpp"
#include "spinodal/potential.hpp"
#include "spinodal/report.hpp"

// Direct sampling of the Gaussian reference measure N(c e_0, (-A)^{-1}),
// preconditioned Crank-Nicolson MCMC for Gibbs reweightings of it, and the
// moment comparison against long-run dynamics.

namespace spinodal {

// Flat is the zero-energy target (the reference measure itself); it backs
// the "pCN preserves mu^c" checks and the linear-dynamics comparisons.
enum class GibbsVariant { LimitF, FiniteN, Flat };

struct GibbsTarget {
    double lambda = 1.0;
    double mass_c = 0.0;
    int M = 32;                  // truncation
    int Q = 0;                   // energy quadrature size; 0 means 4M
    int n_poly = 2;              // used by the FiniteN variant
    GibbsVariant variant = GibbsVariant::FiniteN;

    int grid_size() const { return Q > 0 ? Q : 4 * M; }

    void validate() const {
        if (M < 1) throw ValidationError("GibbsTarget: truncation must be positive");
        if (grid_size() < M) throw ValidationError("GibbsTarget: quadrature below truncation");
        if (!(mass_c > -1.0 && mass_c < 1.0))
            throw ValidationError("GibbsTarget: mass must lie in (-1, 1)");
        if (n_poly < 0) throw ValidationError("GibbsTarget: n_poly must be nonnegative");
    }
};

// One draw from N(c e_0, (-A)^{-1}): mean fixed at c, mode k independent
// centered Gaussian with variance (k pi)^{-2}.
inline SpectralField sample_mu_c(double mass_c, int truncation, GaussianRng& rng) {
    SpectralField u = SpectralField::zero(truncation);
    u.mean = mass_c;
    for (int k = 1; k <= truncation; ++k)
        u.modes[static_cast<std::size_t>(k - 1)] =
            rng.normal() / (static_cast<double>(k) * kPi);
    return u;
}

// Quadrature energy of the Gibbs exponent. The LimitF variant enforces the
// [-1,1] constraint on the grid and returns +inf outside it.
class GibbsEnergy {
public:
    explicit GibbsEnergy(const GibbsTarget& target)
        : target_(target), transform_(target.M, target.grid_size()) {
        target_.validate();
    }

    const GibbsTarget& target() const { return target_; }

    double operator()(const SpectralField& u) {
        if (target_.variant == GibbsVariant::Flat) return 0.0;
        transform_.synthesize(u, grid_);
        const double inv_q = 1.0 / static_cast<double>(grid_.size());
        double sum = 0.0;
        if (target_.variant == GibbsVariant::LimitF) {
            for (double g : grid_) {
                if (g < -1.0 || g > 1.0) return std::numeric_limits<double>::infinity();
                sum += F_big(g, target_.lambda);
            }
        } else {
            for (double g : grid_) sum += F_n(g, target_.n_poly, target_.lambda);
        }
        return sum * inv_q;
    }

private:
    GibbsTarget target_;
    CosineTransform transform_;
    std::vector<double> grid_;
};

inline double energy(const GibbsTarget& target, const SpectralField& u) {
    GibbsEnergy e(target);
    return e(u);
}

inline double pcn_accept_probability(double energy_current, double energy_proposal) {
    if (std::isinf(energy_proposal) && energy_proposal > 0.0) return 0.0;
    return std::min(1.0, std::exp(energy_current - energy_proposal));
}

// pCN chain targeting exp(-energy) d mu^c. The proposal
//   y = c + sqrt(1 - beta^2) (x - c) + beta xi,  xi ~ N(0, (-A)^{-1}),
// keeps the reference measure invariant, so acceptance uses energy
// differences only and the mean mode never moves.
class PcnChain {
public:
    PcnChain(const GibbsTarget& target, SpectralField init, double beta, std::uint64_t seed)
        : energy_fn_(target), state_(std::move(init)), beta_(beta), rng_(seed) {
        if (!(beta > 0.0 && beta <= 1.0))
            throw ValidationError("PcnChain: beta must lie in (0, 1]");
        if (state_.truncation() != target.M)
            throw ValidationError("PcnChain: state truncation mismatch");
        if (std::abs(state_.mean - target.mass_c) > 1e-12)
            throw ValidationError("PcnChain: state mass differs from the target mass");
        current_energy_ = energy_fn_(state_);
        if (std::isinf(current_energy_))
            throw ValidationError("PcnChain: initial state violates the constraint");
    }

    bool step() {
        const GibbsTarget& t = energy_fn_.target();
        const double keep = std::sqrt(1.0 - beta_ * beta_);
        proposal_ = state_;
        for (int k = 1; k <= t.M; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            proposal_.modes[i] = keep * state_.modes[i] +
                                 beta_ * rng_.normal() / (static_cast<double>(k) * kPi);
        }
        const double proposal_energy = energy_fn_(proposal_);
        ++total_;
        if (rng_.uniform01() <= pcn_accept_probability(current_energy_, proposal_energy)) {
            state_.modes.swap(proposal_.modes);
            current_energy_ = proposal_energy;
            ++accepted_;
            return true;
        }
        return false;
    }

    const SpectralField& state() const { return state_; }
    double current_energy() const { return current_energy_; }
    double acceptance_rate() const {
        return total_ > 0 ? static_cast<double>(accepted_) / static_cast<double>(total_) : 0.0;
    }
    long long total_steps() const { return total_; }

private:
    GibbsEnergy energy_fn_;
    SpectralField state_;
    SpectralField proposal_;
    double beta_;
    GaussianRng rng_;
    double current_energy_ = 0.0;
    long long accepted_ = 0;
    long long total_ = 0;
};

// One-shot kernel step (cold path; chains should use PcnChain).
inline std::pair<SpectralField, bool> pcn_step(const GibbsTarget& target,
                                               const SpectralField& state, double beta,
                                               GaussianRng& rng) {
    GibbsEnergy energy_fn(target);
    const double keep = std::sqrt(1.0 - beta * beta);
    SpectralField proposal = state;
    for (int k = 1; k <= target.M; ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        proposal.modes[i] = keep * state.modes[i] +
                            beta * rng.normal() / (static_cast<double>(k) * kPi);
    }
    const double accept = pcn_accept_probability(energy_fn(state), energy_fn(proposal));
    if (rng.uniform01() <= accept) return {proposal, true};
    return {state, false};
}

// ---------------------------------------------------------------------------
// Moment comparison between long-run dynamics and the pCN sampler.

namespace gibbs_detail {

struct MomentAccumulator {
    static constexpr int kModes = 5;
    double sum_mode[kModes] = {0, 0, 0, 0, 0};
    double sum_mode_sq[kModes] = {0, 0, 0, 0, 0};
    double sum_energy = 0.0;
    long long count = 0;

    void add(const SpectralField& u, double energy_value) {
        for (int k = 0; k < kModes && k < u.truncation(); ++k) {
            const double c = u.modes[static_cast<std::size_t>(k)];
            sum_mode[k] += c;
            sum_mode_sq[k] += c * c;
        }
        sum_energy += energy_value;
        ++count;
    }
};

struct MomentSummary {
    // one entry per tracked mode
    std::vector<MeanStderr> mode_mean;
    std::vector<MeanStderr> mode_var;
    MeanStderr energy_mean;
};

// Combines independent per-replica accumulators: means and variances with
// across-replica standard errors (replicas are paths or chain batches).
inline MomentSummary summarize(const std::vector<MomentAccumulator>& replicas, int modes) {
    MomentSummary out;
    for (int k = 0; k < modes; ++k) {
        std::vector<double> means, second;
        for (const auto& acc : replicas) {
            if (acc.count == 0) continue;
            means.push_back(acc.sum_mode[k] / static_cast<double>(acc.count));
            second.push_back(acc.sum_mode_sq[k] / static_cast<double>(acc.count));
        }
        const auto m1 = reduce_mean(means);
        const auto m2 = reduce_mean(second);
        out.mode_mean.push_back(m1);
        MeanStderr var;
        var.mean = m2.mean - m1.mean * m1.mean;
        var.se = m2.se + 2.0 * std::abs(m1.mean) * m1.se;
        var.n = m1.n;
        out.mode_var.push_back(var);
    }
    std::vector<double> energies;
    for (const auto& acc : replicas)
        if (acc.count > 0) energies.push_back(acc.sum_energy / static_cast<double>(acc.count));
    out.energy_mean = reduce_mean(energies);
    return out;
}

}  // namespace gibbs_detail

struct CompareInvariantOptions {
    double T_long = 2.0;        // dynamics horizon per path
    double burn_in = 0.5;       // discarded initial time span
    long long paths = 16;       // independent dynamics replicas
    long long chain_steps = 60000;
    double beta = 0.2;          // pCN step size before auto-tuning
    int sample_stride = 8;      // dynamics recording stride in steps
    int chain_thin = 4;
    int chain_batches = 32;
    int tracked_modes = 5;
};

// Compares mode means, mode variances and the mean quadrature energy
// between (a) time averages of the dynamics and (b) the pCN sampler for the
// Gibbs target. The finite-n target is a falsifiable oracle, so every
// comparison report is advisory; a SamplerWarning diagnostic is emitted as
// an advisory acceptance-rate report.
inline std::vector<CheckReport> compare_invariant(const ModelParams& p, const GibbsTarget& target,
                                                  const CompareInvariantOptions& opts,
                                                  std::uint64_t seed, int workers = 1) {
    p.validate();
    target.validate();
    if (p.noise.variant != NoiseVariant::WhiteSqrtLaplacian)
        throw ValidationError("compare_invariant: white noise required");
    if (target.M != p.M || target.lambda != p.lambda)
        throw ValidationError("compare_invariant: target and model disagree");
    if (target.variant == GibbsVariant::FiniteN && target.n_poly != p.n_poly)
        throw ValidationError("compare_invariant: polynomial index mismatch");

    const int modes = std::min(opts.tracked_modes, gibbs_detail::MomentAccumulator::kModes);

    // (a) dynamics side: independent paths, time averages past burn-in
    std::vector<gibbs_detail::MomentAccumulator> dyn(static_cast<std::size_t>(opts.paths));
    auto x0 = SpectralField::zero(p.M);
    x0.mean = p.mass_c;
    const long long steps = std::llround(opts.T_long / p.dt);
    const long long burn_steps = std::llround(opts.burn_in / p.dt);
    parallel_for_paths(
        opts.paths, workers,
        [&] {
            struct Ctx {
                std::unique_ptr<Stepper> stepper;
                std::unique_ptr<GibbsEnergy> energy;
            };
            Ctx c;
            c.stepper = std::make_unique<Stepper>(p);
            c.energy = std::make_unique<GibbsEnergy>(target);
            return c;
        },
        [&](auto& ctx, long long path) {
            GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(path)));
            std::vector<double> draws;
            SpectralField u = x0;
            try {
                for (long long s = 0; s < steps; ++s) {
                    fill_normals(rng, draws, ctx.stepper->noise_modes());
                    u = ctx.stepper->step(u, draws, nullptr, s);
                    if (s >= burn_steps && (s - burn_steps) % opts.sample_stride == 0)
                        dyn[static_cast<std::size_t>(path)].add(u, (*ctx.energy)(u));
                }
            } catch (const Error&) {
                dyn[static_cast<std::size_t>(path)].count = 0;
            }
        });
    const auto dyn_summary = gibbs_detail::summarize(dyn, modes);

    // (b) sampler side: one chain, batch means; beta auto-halved while the
    // pilot acceptance stays below 20%.
    double beta = opts.beta;
    double pilot_rate = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        PcnChain pilot(target, x0, beta, mix_seed(seed, 1000003));
        for (int s = 0; s < 2000; ++s) pilot.step();
        pilot_rate = pilot.acceptance_rate();
        if (pilot_rate >= 0.2) break;
        beta *= 0.5;
    }

    PcnChain chain(target, x0, beta, mix_seed(seed, 2000003));
    const long long burn_chain = opts.chain_steps / 5;
    for (long long s = 0; s < burn_chain; ++s) chain.step();
    const long long kept = (opts.chain_steps - burn_chain) / opts.chain_thin;
    const long long per_batch = std::max<long long>(1, kept / opts.chain_batches);
    std::vector<gibbs_detail::MomentAccumulator> batches;
    batches.emplace_back();
    GibbsEnergy chain_energy(target);
    for (long long i = 0; i < kept; ++i) {
        for (int t = 0; t < opts.chain_thin; ++t) chain.step();
        if (batches.back().count >= per_batch) batches.emplace_back();
        batches.back().add(chain.state(), chain.current_energy());
    }
    const auto mcmc_summary = gibbs_detail::summarize(batches, modes);

    // reports: two-sided bands, advisory by construction (heuristic oracle)
    std::vector<CheckReport> reports;
    auto push_band = [&](const std::string& name, const MeanStderr& a, const MeanStderr& b) {
        CheckReport r = make_band_check(name, a.mean, b.mean, a.se, b.se, a.n + b.n, seed);
        r.advisory = true;
        reports.push_back(r);
    };
    for (int k = 0; k < modes; ++k) {
        const std::string suffix = "_k=" + std::to_string(k + 1);
        push_band("gibbs_mode_mean" + suffix, dyn_summary.mode_mean[static_cast<std::size_t>(k)],
                  mcmc_summary.mode_mean[static_cast<std::size_t>(k)]);
        push_band("gibbs_mode_var" + suffix, dyn_summary.mode_var[static_cast<std::size_t>(k)],
                  mcmc_summary.mode_var[static_cast<std::size_t>(k)]);
    }
    push_band("gibbs_energy_mean", dyn_summary.energy_mean, mcmc_summary.energy_mean);

    CheckReport rate = make_check("pcn_acceptance_rate", 0.01, chain.acceptance_rate(), 0.0, 0.0,
                                  chain.total_steps(), seed);
    rate.advisory = true;   // SamplerWarning semantics
    reports.push_back(rate);
    return reports;
}

}  // namespace spinodal
