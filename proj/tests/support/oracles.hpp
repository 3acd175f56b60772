#pragma once

// Independent oracles used by the unit and acceptance suites. Everything in
// this header is deliberately brute force or closed form, and never calls
// the implementation path it is checking.

#include <cmath>
#include <cstdint>

#include "spinodal/noise.hpp"
#include "spinodal/rng.hpp"
#include "spinodal/spectral.hpp"

namespace oracles {

// Brute-force estimate of the norm of B^{-1} A Pi_l from (H^c, |.|_{-1})
// to span{e_1..e_N}: maximization of the Rayleigh ratio over random
// zero-mean fields plus every single active mode.
inline double brute_force_op_norm(const spinodal::NoiseSpec& spec, int truncation,
                                  long long samples, std::uint64_t seed) {
    using namespace spinodal;
    const int n_active = spec.active_modes;
    auto ratio = [&](const SpectralField& u) {
        double num = 0.0;
        for (int k = 1; k <= n_active; ++k) {
            const double c = eigen_mu(k) * u.mode(k) / spec.b[static_cast<std::size_t>(k - 1)];
            num += c * c;
        }
        const double den = seminorm(u, -1.0);
        return den > 0.0 ? std::sqrt(num) / den : 0.0;
    };
    double best = 0.0;
    for (int k = 1; k <= n_active; ++k)
        best = std::max(best, ratio(SpectralField::basis(k, truncation)));
    GaussianRng rng(seed);
    for (long long s = 0; s < samples; ++s) {
        SpectralField u = SpectralField::zero(truncation);
        for (auto& c : u.modes) c = rng.normal();
        best = std::max(best, ratio(u));
    }
    return best;
}

// Stationary variance of the discrete mode-k chain u+ = (u + sigma sqrt(dt)
// z)/(1 + dt mu_k^2/2) with sigma = k pi (geometric series in closed form).
inline double linear_scheme_stationary_variance(int k, double dt) {
    const double mu = spinodal::eigen_mu(k);
    const double sigma2 = mu;             // (k pi)^2
    const double d = 1.0 + 0.5 * dt * mu * mu;
    return sigma2 * dt / (d * d - 1.0);
}

// Deterministic decay factor of mode k after `steps` implicit steps of the
// noise-free linear equation with rate mu_k(mu_k - lambda)/2.
inline double linear_scheme_decay(int k, double lambda, double dt, long long steps) {
    const double mu = spinodal::eigen_mu(k);
    const double d = 1.0 + 0.5 * dt * mu * (mu - lambda);
    return std::pow(d, -static_cast<double>(steps));
}

}  // namespace oracles
