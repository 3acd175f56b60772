#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spinodal/errors.hpp"
#include "spinodal/spectral.hpp"

// Bounded test functionals phi(u) with analytically known Lipschitz data.
// All of them act through a single mode coordinate <u, e_k>, whose
// Lipschitz constant with respect to |.|_{-1} is k pi; the budgets must
// never inherit sampling noise, so nothing here is ever estimated.

namespace spinodal {

enum class FunctionalKind { ExpSinMode, BoundedAffine, UserTable };

class TestFunctional {
public:
    static TestFunctional exp_sin_mode(int mode_index) {
        TestFunctional f;
        f.kind_ = FunctionalKind::ExpSinMode;
        f.mode_ = check_mode(mode_index);
        return f;
    }

    // clamp(2 + u_k, 1/2, 7/2): affine in the bulk, bounded by construction.
    static TestFunctional bounded_affine(int mode_index) {
        TestFunctional f;
        f.kind_ = FunctionalKind::BoundedAffine;
        f.mode_ = check_mode(mode_index);
        return f;
    }

    // Piecewise-linear profile applied to u_k, constant beyond the last
    // knot. Knot ordinates must be strictly positive.
    static TestFunctional user_table(int mode_index,
                                     std::vector<std::pair<double, double>> knots) {
        TestFunctional f;
        f.kind_ = FunctionalKind::UserTable;
        f.mode_ = check_mode(mode_index);
        if (knots.size() < 2)
            throw ValidationError("TestFunctional: a table needs at least two knots");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (!(knots[i].second > 0.0))
                throw ValidationError("TestFunctional: table ordinates must be positive");
            if (i > 0 && !(knots[i].first > knots[i - 1].first))
                throw ValidationError("TestFunctional: table abscissas must increase");
        }
        f.knots_ = std::move(knots);
        return f;
    }

    // Textual forms: "exp_sin_mode:K", "bounded_affine:K",
    // "user_table:K:x0,y0;x1,y1;...".
    static TestFunctional parse(const std::string& text) {
        const auto first = text.find(':');
        if (first == std::string::npos)
            throw ValidationError("TestFunctional: expected kind:mode");
        const std::string kind = text.substr(0, first);
        std::string rest = text.substr(first + 1);
        std::string mode_str = rest;
        std::string table_str;
        const auto second = rest.find(':');
        if (second != std::string::npos) {
            mode_str = rest.substr(0, second);
            table_str = rest.substr(second + 1);
        }
        int mode = 0;
        try {
            mode = std::stoi(mode_str);
        } catch (const std::exception&) {
            throw ValidationError("TestFunctional: bad mode index in '" + text + "'");
        }
        if (kind == "exp_sin_mode") return exp_sin_mode(mode);
        if (kind == "bounded_affine") return bounded_affine(mode);
        if (kind == "user_table") {
            std::vector<std::pair<double, double>> knots;
            std::istringstream stream(table_str);
            std::string pair_str;
            while (std::getline(stream, pair_str, ';')) {
                const auto comma = pair_str.find(',');
                if (comma == std::string::npos)
                    throw ValidationError("TestFunctional: bad table pair '" + pair_str + "'");
                try {
                    knots.emplace_back(std::stod(pair_str.substr(0, comma)),
                                       std::stod(pair_str.substr(comma + 1)));
                } catch (const std::exception&) {
                    throw ValidationError("TestFunctional: bad table number in '" + pair_str + "'");
                }
            }
            return user_table(mode, std::move(knots));
        }
        throw ValidationError("TestFunctional: unknown kind '" + kind + "'");
    }

    double operator()(const SpectralField& u) const {
        const double c = u.mode(mode_);
        switch (kind_) {
            case FunctionalKind::ExpSinMode:
                return std::exp(std::sin(c));
            case FunctionalKind::BoundedAffine:
                return std::clamp(2.0 + c, 0.5, 3.5);
            case FunctionalKind::UserTable:
                return table_value(c);
        }
        return 0.0;
    }

    double lower_bound() const {
        switch (kind_) {
            case FunctionalKind::ExpSinMode: return std::exp(-1.0);
            case FunctionalKind::BoundedAffine: return 0.5;
            case FunctionalKind::UserTable: {
                double lo = knots_.front().second;
                for (const auto& kv : knots_) lo = std::min(lo, kv.second);
                return lo;
            }
        }
        return 0.0;
    }

    double upper_bound() const {
        switch (kind_) {
            case FunctionalKind::ExpSinMode: return std::exp(1.0);
            case FunctionalKind::BoundedAffine: return 3.5;
            case FunctionalKind::UserTable: {
                double hi = knots_.front().second;
                for (const auto& kv : knots_) hi = std::max(hi, kv.second);
                return hi;
            }
        }
        return 0.0;
    }

    // Lipschitz constant of phi with respect to |.|_{-1}.
    double grad_norm() const {
        const double kpi = static_cast<double>(mode_) * kPi;
        switch (kind_) {
            case FunctionalKind::ExpSinMode: return std::exp(1.0) * kpi;
            case FunctionalKind::BoundedAffine: return kpi;
            case FunctionalKind::UserTable: return max_slope() * kpi;
        }
        return 0.0;
    }

    // Lipschitz constant of log phi with respect to |.|_{-1}.
    double grad_log_norm() const {
        const double kpi = static_cast<double>(mode_) * kPi;
        switch (kind_) {
            case FunctionalKind::ExpSinMode: return kpi;
            case FunctionalKind::BoundedAffine: return kpi / 0.5;
            case FunctionalKind::UserTable: {
                double worst = 0.0;
                for (std::size_t i = 1; i < knots_.size(); ++i) {
                    const double dx = knots_[i].first - knots_[i - 1].first;
                    const double slope = std::abs(knots_[i].second - knots_[i - 1].second) / dx;
                    const double floor_y = std::min(knots_[i].second, knots_[i - 1].second);
                    worst = std::max(worst, slope / floor_y);
                }
                return worst * kpi;
            }
        }
        return 0.0;
    }

    FunctionalKind kind() const { return kind_; }
    int mode() const { return mode_; }

    std::string describe() const {
        std::ostringstream out;
        switch (kind_) {
            case FunctionalKind::ExpSinMode: out << "exp_sin_mode:" << mode_; break;
            case FunctionalKind::BoundedAffine: out << "bounded_affine:" << mode_; break;
            case FunctionalKind::UserTable: out << "user_table:" << mode_; break;
        }
        return out.str();
    }

private:
    static int check_mode(int mode_index) {
        if (mode_index < 1)
            throw ValidationError("TestFunctional: mode index must be at least 1");
        return mode_index;
    }

    double table_value(double x) const {
        if (x <= knots_.front().first) return knots_.front().second;
        if (x >= knots_.back().first) return knots_.back().second;
        for (std::size_t i = 1; i < knots_.size(); ++i) {
            if (x <= knots_[i].first) {
                const double t = (x - knots_[i - 1].first) /
                                 (knots_[i].first - knots_[i - 1].first);
                return knots_[i - 1].second + t * (knots_[i].second - knots_[i - 1].second);
            }
        }
        return knots_.back().second;
    }

    double max_slope() const {
        double worst = 0.0;
        for (std::size_t i = 1; i < knots_.size(); ++i)
            worst = std::max(worst, std::abs(knots_[i].second - knots_[i - 1].second) /
                                        (knots_[i].first - knots_[i - 1].first));
        return worst;
    }

    FunctionalKind kind_ = FunctionalKind::ExpSinMode;
    int mode_ = 1;
    std::vector<std::pair<double, double>> knots_;
};

}  // namespace spinodal
