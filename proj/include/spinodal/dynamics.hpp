#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spinodal/errors.hpp"
#include "spinodal/noise.hpp"
#include "spinodal/parallel.hpp"
#include "spinodal/potential.hpp"
#include "spinodal/rng.hpp"
#include "spinodal/spectral.hpp"

// Time integration of the conservative dynamics
//   du = -(1/2) A { A u - p_n(u) + lambda u } dt + B dW
// and of its two drift-modified partner equations, with synchronized noise
// and Girsanov log-weight accumulation.
//
// Scheme: the stiff diagonal part is implicit (and the lambda term too for
// the plain equation), the nonlinearity is evaluated pseudo-spectrally on
// the midpoint grid and tamed by magnitude clamping. Mode 0 is never
// touched: conservation of the mass is structural, not approximate.

namespace spinodal {

struct ModelParams {
    double lambda = 1.0;
    int n_poly = 2;
    int M = 32;                       // Galerkin truncation
    double dt = 1e-4;
    int Q = 0;                        // dealias grid size; 0 means 4M
    double mass_c = 0.0;
    NoiseSpec noise = NoiseSpec::white();
    double taming_threshold = 1e6;    // pointwise clamp on p_n before the transform
    double divergence_guard = 1e6;    // abort threshold on |u|_{-1}
    bool nonlinearity = true;

    int grid_size() const { return Q > 0 ? Q : 4 * M; }

    void validate() const {
        // lambda = 0 is admitted so the linear reference dynamics can run.
        if (!(lambda >= 0.0)) throw ValidationError("ModelParams: lambda must be nonnegative");
        if (n_poly < 0) throw ValidationError("ModelParams: n_poly must be nonnegative");
        if (M < 1) throw ValidationError("ModelParams: truncation must be positive");
        if (!(dt > 0.0)) throw ValidationError("ModelParams: dt must be positive");
        if (!(mass_c > -1.0 && mass_c < 1.0))
            throw ValidationError("ModelParams: mass must lie in (-1, 1)");
        if (grid_size() < M)
            throw ValidationError("ModelParams: dealias grid smaller than truncation");
        if (!(taming_threshold > 0.0))
            throw ValidationError("ModelParams: taming threshold must be positive");
        if (!(divergence_guard > 0.0))
            throw ValidationError("ModelParams: divergence guard must be positive");
        // Explicit-part stability budget for the lambda term.
        if (dt * 0.5 * lambda * eigen_mu(M) > 1.0 + 1e-12)
            throw ValidationError("ModelParams: dt * lambda * mu_M / 2 exceeds 1");
        if (!validate_a1(noise))
            throw ValidationError("ModelParams: noise violates B* e_0 = 0");
    }
};

// gamma(t) = (2-a)/((pi^2-lambda) pi^2) (e^{(pi^2-lambda) pi^2 (T-t)} - 1),
// the strictly decreasing coupling schedule with gamma(T) = 0.
struct GammaSchedule {
    double T = 0.0;
    double a = 1.0;        // free parameter in (0, 2)
    double lambda = 1.0;

    void validate() const {
        if (!(T > 0.0)) throw ValidationError("GammaSchedule: horizon must be positive");
        if (!(a > 0.0 && a < 2.0)) throw ValidationError("GammaSchedule: a must lie in (0, 2)");
        if (!(kPi * kPi > lambda))
            throw ValidationError("GammaSchedule: requires pi^2 > lambda");
    }

    double rate() const { return (kPi * kPi - lambda) * kPi * kPi; }

    double value(double t) const {
        if (t < 0.0 || t >= T) throw ScheduleError("gamma evaluated outside [0, T)");
        const double r = rate();
        return (2.0 - a) / r * std::expm1(r * (T - t));
    }

    // Companion accessor including the boundary value gamma(T) = 0.
    double value_closed(double t) const {
        if (t == T) return 0.0;
        return value(t);
    }

    double at_zero() const { return value(0.0); }
};

inline double gamma_value(const GammaSchedule& sched, double t) { return sched.value(t); }

// A pair of trajectories driven by the same noise plus the accumulated
// Girsanov log-weight and ledger quantities.
struct CoupledPath {
    SpectralField u;
    SpectralField partner;
    double t = 0.0;
    double log_weight = 0.0;       // log M(t) or log N(t)
    double ledger_integral = 0.0;  // int |Y|_{-1}^2 / gamma^2 ds
    double xi_sup = 0.0;           // running max of |xi| (degenerate coupling)
};

inline CoupledPath make_coupled(const SpectralField& x, const SpectralField& y) {
    detail::require_same_truncation(x, y, "make_coupled");
    CoupledPath cp;
    cp.u = x;
    cp.partner = y;
    return cp;
}

// One integrator instance per worker thread: it owns the cosine table and
// scratch buffers, and is not safe to share mutably.
class Stepper {
public:
    explicit Stepper(const ModelParams& p)
        : p_(p), transform_(p.M, p.grid_size()) {
        p_.validate();
        const int m = p_.M;
        mu_.resize(static_cast<std::size_t>(m + 1), 0.0);
        denom_full_.resize(static_cast<std::size_t>(m + 1), 1.0);
        denom_stiff_.resize(static_cast<std::size_t>(m + 1), 1.0);
        half_mu_dt_.resize(static_cast<std::size_t>(m + 1), 0.0);
        noise_scale_.resize(static_cast<std::size_t>(m + 1), 0.0);
        amp_.resize(static_cast<std::size_t>(m + 1), 0.0);
        const double sqrt_dt = std::sqrt(p_.dt);
        for (int k = 0; k <= m; ++k) {
            mu_[k] = eigen_mu(k);
            half_mu_dt_[k] = 0.5 * p_.dt * mu_[k];
            denom_full_[k] = 1.0 + 0.5 * p_.dt * mu_[k] * (mu_[k] - p_.lambda);
            denom_stiff_[k] = 1.0 + 0.5 * p_.dt * mu_[k] * mu_[k];
            amp_[k] = p_.noise.amplitude(k, m);
            noise_scale_[k] = amp_[k] * sqrt_dt;
            if (denom_full_[k] <= 0.0)
                throw StabilityError("Stepper: implicit denominator is not positive");
        }
        noise_modes_ = p_.noise.noise_mode_count(m);
        grid_.resize(static_cast<std::size_t>(p_.grid_size()));
        pn_u_ = SpectralField::zero(m);
        pn_v_ = SpectralField::zero(m);
    }

    const ModelParams& params() const { return p_; }
    int noise_modes() const { return noise_modes_; }
    const CosineTransform& transform() const { return transform_; }

    // Galerkin coefficients of the tamed pointwise p_n(u); zero when the
    // nonlinearity is disabled.
    void pn_coeffs(const SpectralField& u, SpectralField& out) {
        if (!p_.nonlinearity) {
            out = SpectralField::zero(p_.M);
            return;
        }
        transform_.synthesize(u, grid_);
        const double clamp = p_.taming_threshold;
        for (double& g : grid_) {
            double v = p_n(g, p_.n_poly);
            if (v > clamp) v = clamp;
            if (v < -clamp) v = -clamp;
            g = v;
        }
        transform_.analyze(grid_, out, p_.M);
    }

    // Full drift of the plain equation: d_k = -mu_k/2 (mu_k u_k + (p_n(u))_k
    // - lambda u_k); the mean component is exactly zero.
    SpectralField drift(const SpectralField& u) {
        require_truncation(u);
        pn_coeffs(u, pn_u_);
        SpectralField d = SpectralField::zero(p_.M);
        for (int k = 1; k <= p_.M; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double val = -0.5 * mu_[k] *
                (mu_[k] * u.modes[i] + pn_u_.modes[i] - p_.lambda * u.modes[i]);
            if (!std::isfinite(val)) throw NumericsError("drift: non-finite component");
            d.modes[i] = val;
        }
        return d;
    }

    // One IMEX step of the plain equation. draws holds one standard normal
    // per noise mode; extra_drift, when present, is added explicitly.
    SpectralField step(const SpectralField& u, std::span<const double> draws,
                       const SpectralField* extra_drift = nullptr,
                       long long step_index = -1) {
        require_truncation(u);
        pn_coeffs(u, pn_u_);
        SpectralField out = u;
        for (int k = 1; k <= p_.M; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            double numer = u.modes[i] - half_mu_dt_[k] * pn_u_.modes[i];
            if (extra_drift != nullptr) numer += p_.dt * extra_drift->modes[i];
            if (k <= noise_modes_) numer += noise_scale_[k] * draws[i];
            out.modes[i] = numer / denom_full_[k];
        }
        check_state(out, step_index);
        return out;
    }

    // Synchronized step of the pair (u, v) with the low-mode drift exchange:
    // v sees lambda Pi_h v + lambda Pi_l u. Accumulates xi and log M(t).
    void step_pair_degenerate(CoupledPath& pair, int low_modes, std::span<const double> draws,
                              long long step_index = -1) {
        if (!p_.noise.is_degenerate())
            throw VariantError("step_pair_degenerate: requires the degenerate diagonal noise");
        if (low_modes > noise_modes_)
            throw ValidationError("step_pair_degenerate: active modes exceed the stored diagonal");
        require_truncation(pair.u);
        require_truncation(pair.partner);
        const double dt = p_.dt;
        const double sqrt_dt = std::sqrt(dt);

        // xi = (lambda/2) B^{-1} A Pi_l (u - v), supported on modes 1..N.
        double xi_sq = 0.0;
        double xi_dot_dw = 0.0;
        for (int k = 1; k <= low_modes; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double bk = p_.noise.b[i];
            const double xi_k = -0.5 * p_.lambda * mu_[k] *
                (pair.u.modes[i] - pair.partner.modes[i]) / bk;
            xi_sq += xi_k * xi_k;
            xi_dot_dw += xi_k * sqrt_dt * draws[i];
        }
        pair.log_weight += xi_dot_dw - 0.5 * xi_sq * dt;
        pair.xi_sup = std::max(pair.xi_sup, std::sqrt(xi_sq));

        pn_coeffs(pair.u, pn_u_);
        pn_coeffs(pair.partner, pn_v_);
        for (int k = 1; k <= p_.M; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double z = (k <= noise_modes_) ? noise_scale_[k] * draws[i] : 0.0;
            if (k <= low_modes) {
                // Low modes: the lambda term is the shared explicit
                // lambda u_k in both equations, so it cancels in the
                // difference dynamics exactly.
                const double shared = half_mu_dt_[k] * p_.lambda * pair.u.modes[i];
                const double nu = pair.u.modes[i] - half_mu_dt_[k] * pn_u_.modes[i] + shared + z;
                const double nv = pair.partner.modes[i] - half_mu_dt_[k] * pn_v_.modes[i] + shared + z;
                pair.u.modes[i] = nu / denom_stiff_[k];
                pair.partner.modes[i] = nv / denom_stiff_[k];
            } else {
                const double nu = pair.u.modes[i] - half_mu_dt_[k] * pn_u_.modes[i] + z;
                const double nv = pair.partner.modes[i] - half_mu_dt_[k] * pn_v_.modes[i] + z;
                pair.u.modes[i] = nu / denom_full_[k];
                pair.partner.modes[i] = nv / denom_full_[k];
            }
        }
        pair.t += dt;
        check_state(pair.u, step_index);
        check_state(pair.partner, step_index);
    }

    // Synchronized step of the white-noise coupling: the partner gets the
    // extra drift aleph(u - w)/gamma(t), treated implicitly in the
    // difference, and the log N(t) increment is accumulated with the
    // left-endpoint integrand.
    void step_pair_white(CoupledPath& pair, const GammaSchedule& sched,
                         std::span<const double> draws, double dt_local,
                         long long step_index = -1) {
        if (p_.noise.variant != NoiseVariant::WhiteSqrtLaplacian)
            throw VariantError("step_pair_white: requires the white noise variant");
        require_truncation(pair.u);
        require_truncation(pair.partner);
        const double gamma = sched.value(pair.t);   // throws ScheduleError past T
        const double dt = dt_local;
        const double sqrt_dt = std::sqrt(dt);

        // g = B^{-1} aleph Y / gamma with Y = u - w; |g|^2 equals
        // |Y|_{-1}^2 / gamma^2, which also feeds the ledger.
        double g_sq = 0.0;
        double g_dot_dw = 0.0;
        for (int k = 1; k <= p_.M; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double y_k = pair.u.modes[i] - pair.partner.modes[i];
            const double g_k = y_k / (static_cast<double>(k) * kPi * gamma);
            g_sq += g_k * g_k;
            g_dot_dw += g_k * sqrt_dt * draws[i];
        }
        pair.log_weight += -g_dot_dw - 0.5 * g_sq * dt;
        pair.ledger_integral += g_sq * dt;

        pn_coeffs(pair.u, pn_u_);
        pn_coeffs(pair.partner, pn_v_);
        const bool rescale = dt != p_.dt;
        const double cpl = dt / gamma;
        for (int k = 1; k <= p_.M; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double half_mu = rescale ? 0.5 * dt * mu_[k] : half_mu_dt_[k];
            const double denom = rescale
                ? 1.0 + 0.5 * dt * mu_[k] * (mu_[k] - p_.lambda)
                : denom_full_[k];
            const double z = amp_[k] * sqrt_dt * draws[i];
            const double u_new = (pair.u.modes[i] - half_mu * pn_u_.modes[i] + z) / denom;
            // Advance the difference by its own recursion (the 1/gamma drift
            // is implicit); equal states then stay glued bit for bit.
            const double y_old = pair.u.modes[i] - pair.partner.modes[i];
            const double y_new = (y_old - half_mu * (pn_u_.modes[i] - pn_v_.modes[i])) /
                                 (denom + cpl);
            pair.u.modes[i] = u_new;
            pair.partner.modes[i] = u_new - y_new;
        }
        pair.t += dt;
        check_state(pair.u, step_index);
        check_state(pair.partner, step_index);
    }

private:
    void require_truncation(const SpectralField& u) const {
        if (u.truncation() != p_.M) throw ShapeError("Stepper: field truncation mismatch");
    }

    void check_state(const SpectralField& u, long long step_index) const {
        double m1_sq = 0.0;
        for (int k = 1; k <= p_.M; ++k) {
            const double c = u.modes[static_cast<std::size_t>(k - 1)];
            m1_sq += c * c / mu_[k];
        }
        if (!std::isfinite(m1_sq) || m1_sq > p_.divergence_guard * p_.divergence_guard)
            throw DivergenceError("trajectory left the guard ball", step_index);
    }

    ModelParams p_;
    CosineTransform transform_;
    std::vector<double> mu_;
    std::vector<double> denom_full_;    // 1 + dt mu (mu - lambda)/2
    std::vector<double> denom_stiff_;   // 1 + dt mu^2 / 2
    std::vector<double> half_mu_dt_;
    std::vector<double> amp_;           // noise amplitude per mode
    std::vector<double> noise_scale_;   // amplitude * sqrt(dt)
    int noise_modes_ = 0;
    std::vector<double> grid_;
    SpectralField pn_u_;
    SpectralField pn_v_;
};

// Spec-level one-shot wrappers (tests and cold paths).
inline SpectralField drift_spectral(const SpectralField& u, const ModelParams& p) {
    Stepper s(p);
    return s.drift(u);
}

inline SpectralField step_imex(const SpectralField& u, const ModelParams& p,
                               std::span<const double> draws,
                               const SpectralField* extra_drift = nullptr) {
    Stepper s(p);
    return s.step(u, draws, extra_drift);
}

inline void fill_normals(GaussianRng& rng, std::vector<double>& buf, int count) {
    buf.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) buf[static_cast<std::size_t>(i)] = rng.normal();
}

struct EnsembleOutcome {
    std::vector<SpectralField> endpoints;            // per path
    std::vector<char> failed;                        // per path divergence flag
    std::vector<std::string> failure_messages;       // non-empty only for failed paths
    long long failures = 0;

    double failure_rate() const {
        return endpoints.empty() ? 0.0
                                 : static_cast<double>(failures) /
                                       static_cast<double>(endpoints.size());
    }
};

// Monte-Carlo driver for the plain dynamics: `paths` independent
// trajectories from x to t_final. Per-path streams are derived from
// (seed, path index), so the outcome is identical for any worker count.
// Optionally records the state at the requested times (snapped to the step
// grid) for every path.
inline EnsembleOutcome simulate_ensemble(const ModelParams& p, const SpectralField& x,
                                         double t_final, long long paths, std::uint64_t seed,
                                         int workers = 1,
                                         const std::vector<double>* record_times = nullptr,
                                         std::vector<std::vector<SpectralField>>* recordings = nullptr) {
    p.validate();
    if (x.truncation() != p.M) throw ShapeError("simulate_ensemble: initial field truncation");
    if (std::abs(x.mean - p.mass_c) > 1e-12)
        throw ValidationError("simulate_ensemble: initial mass differs from mass_c");

    const long long steps = std::llround(t_final / p.dt);
    std::vector<long long> record_steps;
    if (record_times != nullptr) {
        for (double t : *record_times)
            record_steps.push_back(std::min<long long>(steps, std::llround(t / p.dt)));
        recordings->assign(static_cast<std::size_t>(paths), {});
    }

    EnsembleOutcome out;
    out.endpoints.assign(static_cast<std::size_t>(paths), SpectralField::zero(p.M));
    out.failed.assign(static_cast<std::size_t>(paths), 0);
    out.failure_messages.assign(static_cast<std::size_t>(paths), std::string());

    parallel_for_paths(
        paths, workers,
        [&p] { return std::make_unique<Stepper>(p); },
        [&](std::unique_ptr<Stepper>& stepper, long long path) {
            GaussianRng rng(mix_seed(seed, static_cast<std::uint64_t>(path)));
            std::vector<double> draws;
            SpectralField u = x;
            try {
                std::size_t next_rec = 0;
                auto record_up_to = [&](long long step_idx) {
                    if (record_times == nullptr) return;
                    auto& slot = (*recordings)[static_cast<std::size_t>(path)];
                    while (next_rec < record_steps.size() &&
                           record_steps[next_rec] == step_idx) {
                        slot.push_back(u);
                        ++next_rec;
                    }
                };
                record_up_to(0);
                for (long long s = 0; s < steps; ++s) {
                    fill_normals(rng, draws, stepper->noise_modes());
                    u = stepper->step(u, draws, nullptr, s);
                    record_up_to(s + 1);
                }
                out.endpoints[static_cast<std::size_t>(path)] = u;
            } catch (const Error& e) {
                out.failed[static_cast<std::size_t>(path)] = 1;
                out.failure_messages[static_cast<std::size_t>(path)] = e.what();
            }
        });
    for (char f : out.failed) out.failures += f;
    return out;
}

// Pathwise degenerate coupling run; the difference dynamics is
// noise-free, so contraction diagnostics are per-path exact.
struct DegenerateCouplingResult {
    CoupledPath state;
    double initial_dist = 0.0;           // |x - y|_{-1}
    double sup_contraction_ratio = 0.0;  // sup_t |X(t)|_{-1} e^{alpha t} / |x-y|_{-1}
    double sup_xi_ratio = 0.0;           // sup_t |xi(t)| / ((lambda/2)||op|| e^{-alpha t} |x-y|_{-1})
    double final_dist = 0.0;
    double sup_mean_gap = 0.0;           // running max of |mean(u) - mean(v)|
};

inline DegenerateCouplingResult run_degenerate_coupling(Stepper& stepper,
                                                        const SpectralField& x,
                                                        const SpectralField& y,
                                                        double t_final, GaussianRng& rng) {
    const ModelParams& p = stepper.params();
    if (!p.noise.is_degenerate())
        throw VariantError("run_degenerate_coupling: degenerate noise required");
    if (!validate_a2(p.noise, p.lambda))
        throw ValidationError("run_degenerate_coupling: assumption (A2) fails");
    const int low_modes = p.noise.active_modes;
    const double alpha = alpha_rate(low_modes, p.lambda);
    const double op_norm = op_norm_binv_a_pil(p.noise);

    DegenerateCouplingResult res;
    res.state = make_coupled(x, y);
    res.initial_dist = dist_minus1(x, y);
    const long long steps = std::llround(t_final / p.dt);
    std::vector<double> draws;
    const double xi_scale = 0.5 * p.lambda * op_norm * res.initial_dist;
    auto xi_norm = [&](const CoupledPath& cp) {
        double sum = 0.0;
        for (int k = 1; k <= low_modes; ++k) {
            const std::size_t i = static_cast<std::size_t>(k - 1);
            const double c = 0.5 * p.lambda * eigen_mu(k) *
                (cp.u.modes[i] - cp.partner.modes[i]) / p.noise.b[i];
            sum += c * c;
        }
        return std::sqrt(sum);
    };
    for (long long s = 0; s < steps; ++s) {
        fill_normals(rng, draws, stepper.noise_modes());
        stepper.step_pair_degenerate(res.state, low_modes, draws, s);
        const double growth = std::exp(alpha * res.state.t);
        if (res.initial_dist > 0.0) {
            const double d = dist_minus1(res.state.u, res.state.partner);
            res.sup_contraction_ratio =
                std::max(res.sup_contraction_ratio, d * growth / res.initial_dist);
            if (xi_scale > 0.0)
                res.sup_xi_ratio =
                    std::max(res.sup_xi_ratio, xi_norm(res.state) * growth / xi_scale);
        }
        res.sup_mean_gap = std::max(res.sup_mean_gap,
                                    std::abs(res.state.u.mean - res.state.partner.mean));
    }
    res.final_dist = dist_minus1(res.state.u, res.state.partner);
    return res;
}

// White-noise coupling over [0, T - eps] with step subdivision near the
// singularity: dt_local <= kappa * gamma(t), eps = max(4 dt, 1e-6 T).
struct WhiteCouplingResult {
    CoupledPath state;
    double initial_dist = 0.0;
    double stop_time = 0.0;
    double sup_ledger_ratio = 0.0;       // sup_t S(t) / S(0), S = ledger + |Y|^2/(a gamma)
    double final_dist_ratio = 0.0;       // |Y(T-eps)|_{-1} / |x-y|_{-1}
    bool coupled = false;                // final ratio below the requested tolerance
    long long steps = 0;
};

inline WhiteCouplingResult run_white_coupling(Stepper& stepper, const GammaSchedule& sched,
                                              const SpectralField& x, const SpectralField& y,
                                              GaussianRng& rng, double coupling_tol = 1e-4,
                                              double kappa = 0.5) {
    const ModelParams& p = stepper.params();
    if (p.noise.variant != NoiseVariant::WhiteSqrtLaplacian)
        throw VariantError("run_white_coupling: white noise required");
    sched.validate();
    if (sched.lambda != p.lambda)
        throw ValidationError("run_white_coupling: schedule lambda differs from the model");

    WhiteCouplingResult res;
    res.state = make_coupled(x, y);
    res.initial_dist = dist_minus1(x, y);
    const double eps = std::max(4.0 * p.dt, 1e-6 * sched.T);
    const double t_stop = sched.T - eps;
    const double denom0 = res.initial_dist > 0.0
        ? res.initial_dist * res.initial_dist / (sched.a * sched.at_zero())
        : 0.0;

    std::vector<double> draws;
    while (res.state.t < t_stop - 1e-18) {
        const double gamma = sched.value(res.state.t);
        double dt_local = std::min(p.dt, kappa * gamma);
        dt_local = std::min(dt_local, t_stop - res.state.t);
        fill_normals(rng, draws, stepper.noise_modes());
        stepper.step_pair_white(res.state, sched, draws, dt_local, res.steps);
        ++res.steps;
        if (denom0 > 0.0) {
            const double d = dist_minus1(res.state.u, res.state.partner);
            const double s_now = res.state.ledger_integral +
                d * d / (sched.a * sched.value_closed(res.state.t));
            res.sup_ledger_ratio = std::max(res.sup_ledger_ratio, s_now / denom0);
        }
    }
    res.stop_time = res.state.t;
    const double final_dist = dist_minus1(res.state.u, res.state.partner);
    res.final_dist_ratio = res.initial_dist > 0.0 ? final_dist / res.initial_dist : 0.0;
    res.coupled = res.initial_dist == 0.0 || res.final_dist_ratio <= coupling_tol;
    return res;
}

}  // namespace spinodal
