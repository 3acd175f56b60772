#pragma once

#include <cmath>
#include <limits>

#include "spinodal/errors.hpp"

// The logarithmic nonlinearity f, its primitive F, the odd polynomial
// approximations p_n, and the finite-n energy density F_n.

namespace spinodal {

struct PotentialParams {
    double lambda = 1.0;   // coefficient of the linear (anti-diffusive) term
    int n_poly = 2;        // index n of p_n (degree 2n+1)

    void validate() const {
        if (!(lambda > 0.0)) throw ValidationError("PotentialParams: lambda must be positive");
        if (n_poly < 0) throw ValidationError("PotentialParams: n_poly must be nonnegative");
    }
};

// f(u) = log((1-u)/(1+u)) + lambda u on (-1,1); +inf for u <= -1 and -inf
// for u >= 1 (sentinel values, not errors).
inline double f_log(double u, double lambda) {
    if (u <= -1.0) return std::numeric_limits<double>::infinity();
    if (u >= 1.0) return -std::numeric_limits<double>::infinity();
    return std::log((1.0 - u) / (1.0 + u)) + lambda * u;
}

// F(u) = (1+u)log(1+u) + (1-u)log(1-u) - (lambda/2) u^2, the primitive of -f
// with F(0) = 0. At u = +-1 the finite limit 2 log 2 - lambda/2 is returned.
inline double F_big(double u, double lambda) {
    if (std::abs(u) > 1.0) throw DomainError("F_big: argument outside [-1, 1]");
    const double quad = 0.5 * lambda * u * u;
    if (u == 1.0 || u == -1.0) return 2.0 * std::log(2.0) - quad;
    // x log x -> 0 as x -> 0+, so the factors vanish cleanly at the endpoints.
    const double up = 1.0 + u;
    const double um = 1.0 - u;
    const double term_p = (up > 0.0) ? up * std::log(up) : 0.0;
    const double term_m = (um > 0.0) ? um * std::log(um) : 0.0;
    return term_p + term_m - quad;
}

// p_n(u) = 2 sum_{i=0}^{n} u^{2i+1}/(2i+1), evaluated by a Horner recurrence
// in u^2. No clamping here; taming is the integrator's job.
inline double p_n(double u, int n) {
    const double u2 = u * u;
    double acc = 1.0 / static_cast<double>(2 * n + 1);
    for (int i = n - 1; i >= 0; --i)
        acc = acc * u2 + 1.0 / static_cast<double>(2 * i + 1);
    return 2.0 * u * acc;
}

// F_n(u) = 2 sum_{i=0}^{n} u^{2i+2}/((2i+1)(2i+2)) - (lambda/2) u^2, the
// primitive of p_n - lambda*id with F_n(0) = 0.
inline double F_n(double u, int n, double lambda) {
    const double u2 = u * u;
    double acc = 1.0 / static_cast<double>((2 * n + 1) * (2 * n + 2));
    for (int i = n - 1; i >= 0; --i)
        acc = acc * u2 + 1.0 / static_cast<double>((2 * i + 1) * (2 * i + 2));
    return 2.0 * u2 * acc - 0.5 * lambda * u2;
}

}  // namespace spinodal
