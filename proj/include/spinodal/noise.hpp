#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spinodal/errors.hpp"
#include "spinodal/spectral.hpp"

// The two noise regimes and the operator-derived constants entering the
// Harnack budgets: the contraction rate alpha, the operator norm of
// B^{-1} A Pi_l, the norm of B*, and the truncated trace Tr_{-1}.

namespace spinodal {

enum class NoiseVariant { DegenerateDiagonal, WhiteSqrtLaplacian };

struct NoiseSpec {
    NoiseVariant variant = NoiseVariant::WhiteSqrtLaplacian;
    std::vector<double> b;   // diagonal amplitudes b_1..b_len (degenerate only)
    int active_modes = 0;    // the N of the essentially-elliptic condition
    double b0 = 0.0;         // amplitude on e_0; zero in both shipped variants

    static NoiseSpec degenerate(std::vector<double> amplitudes, int N) {
        NoiseSpec s;
        s.variant = NoiseVariant::DegenerateDiagonal;
        s.b = std::move(amplitudes);
        s.active_modes = N;
        for (double bi : s.b)
            if (bi < 0.0) throw ValidationError("NoiseSpec: negative diagonal amplitude");
        if (N <= 0) throw ValidationError("NoiseSpec: active mode count must be positive");
        return s;
    }

    static NoiseSpec white() {
        NoiseSpec s;
        s.variant = NoiseVariant::WhiteSqrtLaplacian;
        return s;
    }

    bool is_degenerate() const { return variant == NoiseVariant::DegenerateDiagonal; }

    // Amplitude multiplying the mode-k Brownian component once the noise is
    // Galerkin-truncated at M. Modes past the stored diagonal are silent.
    double amplitude(int k, int truncation) const {
        if (k < 1 || k > truncation) return 0.0;
        if (variant == NoiseVariant::WhiteSqrtLaplacian) return static_cast<double>(k) * kPi;
        if (k <= static_cast<int>(b.size())) return b[static_cast<std::size_t>(k - 1)];
        return 0.0;
    }

    // Number of standard-normal draws consumed per time step at truncation M.
    int noise_mode_count(int truncation) const {
        if (variant == NoiseVariant::WhiteSqrtLaplacian) return truncation;
        return std::min<int>(static_cast<int>(b.size()), truncation);
    }
};

// (A1): the adjoint of B annihilates constants.
inline bool validate_a1(const NoiseSpec& spec) { return spec.b0 == 0.0; }

// (A2): b_i > 0 for i <= N and (N+1)^2 pi^2 > lambda.
inline bool validate_a2(const NoiseSpec& spec, double lambda) {
    if (!spec.is_degenerate())
        throw VariantError("validate_a2: only meaningful for the degenerate diagonal noise");
    const int n_active = spec.active_modes;
    if (n_active > static_cast<int>(spec.b.size())) return false;
    for (int i = 1; i <= n_active; ++i)
        if (!(spec.b[static_cast<std::size_t>(i - 1)] > 0.0)) return false;
    const double gap = static_cast<double>(n_active + 1) * kPi;
    return gap * gap > lambda;
}

// alpha = (1/2) min{ pi^4, [(N+1)^2 pi^2 - lambda] (N+1)^2 pi^2 }.
inline double alpha_rate(int N, double lambda) {
    const double pi2 = kPi * kPi;
    const double high = static_cast<double>(N + 1) * static_cast<double>(N + 1) * pi2;
    if (!(high > lambda))
        throw ValidationError("alpha_rate: requires (N+1)^2 pi^2 > lambda");
    return 0.5 * std::min(pi2 * pi2, (high - lambda) * high);
}

// Operator norm of B^{-1} A Pi_l from (H^c, |.|_{-1}) into span{e_1..e_N}
// with the L^2 norm. Diagonal closed form: max_{1<=i<=N} (i pi)^3 / b_i.
// Cross-checked against a brute-force maximization in the test suite.
inline double op_norm_binv_a_pil(const NoiseSpec& spec) {
    if (!spec.is_degenerate())
        throw VariantError("op_norm_binv_a_pil: defined for the degenerate diagonal noise");
    const int n_active = spec.active_modes;
    if (n_active > static_cast<int>(spec.b.size()))
        throw ValidationError("op_norm_binv_a_pil: diagonal shorter than active mode count");
    double best = 0.0;
    for (int i = 1; i <= n_active; ++i) {
        const double bi = spec.b[static_cast<std::size_t>(i - 1)];
        if (!(bi > 0.0))
            throw ValidationError("op_norm_binv_a_pil: B is not invertible on the active span");
        const double ipi = static_cast<double>(i) * kPi;
        best = std::max(best, ipi * ipi * ipi / bi);
    }
    return best;
}

// Operator norm of B* (Galerkin-truncated at M for the white variant).
inline double bstar_norm(const NoiseSpec& spec, int truncation) {
    if (spec.variant == NoiseVariant::WhiteSqrtLaplacian)
        return static_cast<double>(truncation) * kPi;
    double best = 0.0;
    for (double bi : spec.b) best = std::max(best, bi);
    return best;
}

struct TraceMinus1 {
    double value = 0.0;
    bool divergent = false;   // true when the untruncated trace is infinite
};

// Tr_{-1} = Tr(B (-A)^{-1} B*), truncated at M. Each white mode contributes
// exactly 1, so that variant diverges as M grows.
inline TraceMinus1 trace_minus1(const NoiseSpec& spec, int truncation) {
    TraceMinus1 out;
    if (spec.variant == NoiseVariant::WhiteSqrtLaplacian) {
        out.value = static_cast<double>(truncation);
        out.divergent = true;
        return out;
    }
    const int top = std::min(spec.active_modes, truncation);
    for (int i = 1; i <= top; ++i) {
        const double bi = (i <= static_cast<int>(spec.b.size()))
                              ? spec.b[static_cast<std::size_t>(i - 1)]
                              : 0.0;
        const double ipi = static_cast<double>(i) * kPi;
        out.value += bi * bi / (ipi * ipi);
    }
    return out;
}

struct RateConstants {
    double alpha = 0.0;
    double op_norm_binv_a_pil = 0.0;
    double bstar_norm = 0.0;
    TraceMinus1 trace_minus1;
};

inline RateConstants rate_constants(const NoiseSpec& spec, double lambda, int truncation) {
    RateConstants rc;
    rc.alpha = alpha_rate(spec.active_modes, lambda);
    rc.op_norm_binv_a_pil = op_norm_binv_a_pil(spec);
    rc.bstar_norm = bstar_norm(spec, truncation);
    rc.trace_minus1 = trace_minus1(spec, truncation);
    return rc;
}

// B^{-1} for the degenerate variant, defined only on span{e_1..e_N}; any
// energy outside that span is a contract violation.
inline SpectralField apply_binv_degenerate(const NoiseSpec& spec, const SpectralField& z) {
    if (!spec.is_degenerate())
        throw VariantError("apply_binv_degenerate: wrong noise variant");
    if (z.mean != 0.0)
        throw ShapeError("apply_binv_degenerate: field has a mean component");
    SpectralField out = SpectralField::zero(z.truncation());
    const int n_active = spec.active_modes;
    for (int k = 1; k <= z.truncation(); ++k) {
        const double c = z.modes[static_cast<std::size_t>(k - 1)];
        if (k > n_active) {
            if (c != 0.0)
                throw ShapeError("apply_binv_degenerate: energy outside span{e_1..e_N}");
            continue;
        }
        const double bk = spec.b[static_cast<std::size_t>(k - 1)];
        if (!(bk > 0.0))
            throw ShapeError("apply_binv_degenerate: zero amplitude inside the active span");
        out.modes[static_cast<std::size_t>(k - 1)] = c / bk;
    }
    return out;
}

// B^{-1} = (-A)^{-1/2} on the zero-mean span for the white variant;
// satisfies |B^{-1} z| = |z|_{-1}.
inline SpectralField apply_binv_white(const SpectralField& z) {
    if (z.mean != 0.0) throw ShapeError("apply_binv_white: field has a mean component");
    SpectralField out = SpectralField::zero(z.truncation());
    for (int k = 1; k <= z.truncation(); ++k)
        out.modes[static_cast<std::size_t>(k - 1)] =
            z.modes[static_cast<std::size_t>(k - 1)] / (static_cast<double>(k) * kPi);
    return out;
}

}  // namespace spinodal
