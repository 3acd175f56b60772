#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "spinodal/errors.hpp"

// Neumann cosine eigenbasis on (0,1):
//   e_0 = 1,  e_k(theta) = sqrt(2) cos(k pi theta),  A e_k = -(k pi)^2 e_k.
// Fields are stored as orthonormal coefficients (mean mode + modes 1..M), so
// every operator used here is diagonal. Physical-space evaluation uses the
// midpoint grid theta_j = (j+1/2)/Q, on which the discrete cosine quadrature
//   sum_j e_k(theta_j) e_l(theta_j) = Q delta_kl   (k + l < 2Q)
// is exact; products of total bandwidth < 2Q integrate exactly.

namespace spinodal {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// mu_k = (k pi)^2, the negated eigenvalue of A.
inline double eigen_mu(int k) {
    if (k < 0) throw DomainError("eigen_mu: negative mode index");
    const double kpi = static_cast<double>(k) * kPi;
    return kpi * kpi;
}

struct SpectralField {
    double mean = 0.0;               // coefficient of e_0
    std::vector<double> modes;       // coefficients of e_1 .. e_M

    SpectralField() = default;
    SpectralField(double mean_value, std::vector<double> mode_coeffs)
        : mean(mean_value), modes(std::move(mode_coeffs)) {}

    static SpectralField zero(int truncation) {
        return SpectralField(0.0, std::vector<double>(static_cast<std::size_t>(truncation), 0.0));
    }

    // Unit basis field e_k at truncation M (k = 0 gives the pure mean field).
    static SpectralField basis(int k, int truncation) {
        SpectralField u = zero(truncation);
        if (k == 0) {
            u.mean = 1.0;
        } else {
            if (k < 1 || k > truncation) throw ShapeError("basis: mode index past truncation");
            u.modes[static_cast<std::size_t>(k - 1)] = 1.0;
        }
        return u;
    }

    int truncation() const { return static_cast<int>(modes.size()); }

    double mode(int k) const {
        if (k == 0) return mean;
        return modes[static_cast<std::size_t>(k - 1)];
    }

    bool all_finite() const {
        if (!std::isfinite(mean)) return false;
        for (double c : modes)
            if (!std::isfinite(c)) return false;
        return true;
    }
};

struct GridField {
    std::vector<double> values;      // samples at theta_j = (j+1/2)/Q
    int grid_size() const { return static_cast<int>(values.size()); }
};

namespace detail {
inline void require_same_truncation(const SpectralField& u, const SpectralField& v,
                                    const char* what) {
    if (u.truncation() != v.truncation())
        throw ShapeError(std::string(what) + ": truncation mismatch");
}
}  // namespace detail

// Seminorm |u|_gamma = (sum_{k>=1} (k pi)^{2 gamma} u_k^2)^{1/2}; the mean
// mode never contributes.
inline double seminorm(const SpectralField& u, double gamma) {
    double sum = 0.0;
    const int m = u.truncation();
    for (int k = 1; k <= m; ++k) {
        const double w = std::pow(static_cast<double>(k) * kPi, 2.0 * gamma);
        const double c = u.modes[static_cast<std::size_t>(k - 1)];
        sum += w * c * c;
    }
    return std::sqrt(sum);
}

// Norm ||u||_gamma = (|u|_gamma^2 + mean^2)^{1/2}.
inline double norm_gamma(const SpectralField& u, double gamma) {
    const double s = seminorm(u, gamma);
    return std::sqrt(s * s + u.mean * u.mean);
}

// Semiscalar product (u,v)_gamma = sum_{k>=1} (k pi)^{2 gamma} u_k v_k.
inline double semiscalar(const SpectralField& u, const SpectralField& v, double gamma) {
    detail::require_same_truncation(u, v, "semiscalar");
    double sum = 0.0;
    const int m = u.truncation();
    for (int k = 1; k <= m; ++k) {
        const double w = std::pow(static_cast<double>(k) * kPi, 2.0 * gamma);
        sum += w * u.modes[static_cast<std::size_t>(k - 1)] * v.modes[static_cast<std::size_t>(k - 1)];
    }
    return sum;
}

// |u - v|_{-1} without building the difference field.
inline double dist_minus1(const SpectralField& u, const SpectralField& v) {
    detail::require_same_truncation(u, v, "dist_minus1");
    double sum = 0.0;
    const int m = u.truncation();
    for (int k = 1; k <= m; ++k) {
        const double d = u.modes[static_cast<std::size_t>(k - 1)] -
                         v.modes[static_cast<std::size_t>(k - 1)];
        const double kpi = static_cast<double>(k) * kPi;
        sum += d * d / (kpi * kpi);
    }
    return std::sqrt(sum);
}

// Projector onto span{e_0, ..., e_N}; output keeps the input truncation.
inline SpectralField project_low(const SpectralField& u, int N) {
    if (N >= u.truncation()) throw ShapeError("project_low: N must be below the truncation");
    SpectralField out = SpectralField::zero(u.truncation());
    out.mean = u.mean;
    for (int k = 1; k <= N; ++k)
        out.modes[static_cast<std::size_t>(k - 1)] = u.modes[static_cast<std::size_t>(k - 1)];
    return out;
}

// Complement projector: project_low + project_high = identity.
inline SpectralField project_high(const SpectralField& u, int N) {
    if (N >= u.truncation()) throw ShapeError("project_high: N must be below the truncation");
    SpectralField out = SpectralField::zero(u.truncation());
    for (int k = N + 1; k <= u.truncation(); ++k)
        out.modes[static_cast<std::size_t>(k - 1)] = u.modes[static_cast<std::size_t>(k - 1)];
    return out;
}

// Projection killing the mean mode and keeping everything else.
inline SpectralField project_nonconstant(const SpectralField& u) {
    SpectralField out = u;
    out.mean = 0.0;
    return out;
}

// Precomputed cosine table for one (M, Q) pair. A transform instance is
// immutable after construction; integrators own one per worker.
class CosineTransform {
public:
    CosineTransform(int truncation, int grid_size)
        : M_(truncation), Q_(grid_size), basis_(static_cast<std::size_t>((truncation + 1) * grid_size)) {
        if (Q_ < M_) throw ShapeError("CosineTransform: grid size below truncation");
        if (M_ < 0 || Q_ <= 0) throw ShapeError("CosineTransform: bad dimensions");
        const double sqrt2 = std::sqrt(2.0);
        for (int j = 0; j < Q_; ++j) basis_[static_cast<std::size_t>(j)] = 1.0;
        for (int k = 1; k <= M_; ++k) {
            double* row = &basis_[static_cast<std::size_t>(k * Q_)];
            for (int j = 0; j < Q_; ++j) {
                const double theta = (static_cast<double>(j) + 0.5) / static_cast<double>(Q_);
                row[j] = sqrt2 * std::cos(static_cast<double>(k) * kPi * theta);
            }
        }
    }

    int truncation() const { return M_; }
    int grid_size() const { return Q_; }

    void synthesize(const SpectralField& u, std::vector<double>& grid) const {
        if (u.truncation() > M_) throw ShapeError("synthesize: field exceeds transform truncation");
        grid.assign(static_cast<std::size_t>(Q_), u.mean);
        for (int k = 1; k <= u.truncation(); ++k) {
            const double c = u.modes[static_cast<std::size_t>(k - 1)];
            if (c == 0.0) continue;
            const double* row = &basis_[static_cast<std::size_t>(k * Q_)];
            for (int j = 0; j < Q_; ++j) grid[static_cast<std::size_t>(j)] += c * row[j];
        }
    }

    // Midpoint-quadrature analysis; exact for bandwidth < 2Q - truncation.
    void analyze(const std::vector<double>& grid, SpectralField& u, int truncation) const {
        if (truncation > M_) throw ShapeError("analyze: requested truncation exceeds transform");
        if (static_cast<int>(grid.size()) != Q_) throw ShapeError("analyze: grid size mismatch");
        const double inv_q = 1.0 / static_cast<double>(Q_);
        double mean_sum = 0.0;
        for (double g : grid) {
            if (!std::isfinite(g)) throw NumericsError("analyze: non-finite grid value");
            mean_sum += g;
        }
        u.mean = mean_sum * inv_q;
        u.modes.assign(static_cast<std::size_t>(truncation), 0.0);
        for (int k = 1; k <= truncation; ++k) {
            const double* row = &basis_[static_cast<std::size_t>(k * Q_)];
            double sum = 0.0;
            for (int j = 0; j < Q_; ++j) sum += grid[static_cast<std::size_t>(j)] * row[j];
            u.modes[static_cast<std::size_t>(k - 1)] = sum * inv_q;
        }
    }

private:
    int M_;
    int Q_;
    std::vector<double> basis_;
};

// Convenience one-shot transforms (cold paths and tests).
inline GridField synthesize(const SpectralField& u, int grid_size) {
    CosineTransform ct(u.truncation(), grid_size);
    GridField g;
    ct.synthesize(u, g.values);
    return g;
}

inline SpectralField analyze(const GridField& grid, int truncation) {
    CosineTransform ct(truncation, grid.grid_size());
    SpectralField u;
    ct.analyze(grid.values, u, truncation);
    return u;
}

}  // namespace spinodal
