#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spinodal/dynamics.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace spinodal;
using Catch::Approx;

namespace {

ModelParams linear_params(int truncation, double dt, const NoiseSpec& noise) {
    ModelParams p;
    p.lambda = 0.0;
    p.nonlinearity = false;
    p.M = truncation;
    p.dt = dt;
    p.noise = noise;
    return p;
}

NoiseSpec silent_noise() { return NoiseSpec::degenerate({0.0}, 1); }

}  // namespace

TEST_CASE("model parameter validation", "[dynamics]") {
    ModelParams p;
    p.M = 8;
    p.dt = 1e-4;
    REQUIRE_NOTHROW(p.validate());

    SECTION("mass outside (-1,1)") {
        p.mass_c = 1.0;
        REQUIRE_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("explicit-part stability budget") {
        p.lambda = 10.0;
        p.M = 32;
        p.dt = 1e-4;  // dt lambda mu_M / 2 = 5.05
        REQUIRE_THROWS_AS(p.validate(), ValidationError);
        p.dt = 1.9e-5;
        REQUIRE_NOTHROW(p.validate());
    }
    SECTION("grid below truncation") {
        p.Q = 4;
        REQUIRE_THROWS_AS(p.validate(), ValidationError);
    }
}

TEST_CASE("spectral drift of the conservative flow", "[dynamics]") {
    ModelParams p;
    p.M = 8;
    p.n_poly = 0;
    p.dt = 1e-5;
    p.noise = silent_noise();

    SECTION("mode-1 drift values") {
        auto u = SpectralField::zero(p.M);
        u.modes[0] = 0.1;
        p.lambda = 1.0;
        REQUIRE(drift_spectral(u, p).modes[0] == Approx(-5.36393477175459).epsilon(1e-12));
        p.lambda = 0.0;
        REQUIRE(drift_spectral(u, p).modes[0] == Approx(-5.857414991809058).epsilon(1e-12));
    }

    SECTION("constants are equilibria") {
        p.lambda = 2.0;
        p.mass_c = 0.3;
        auto u = SpectralField::zero(p.M);
        u.mean = 0.3;
        const auto d = drift_spectral(u, p);
        REQUIRE(d.mean == 0.0);
        // zero up to quadrature roundoff amplified by mu_k/2
        for (double c : d.modes) REQUIRE(c == Approx(0.0).margin(1e-12));
    }

    SECTION("mean drift always zero") {
        GaussianRng rng(17);
        p.lambda = 1.5;
        p.n_poly = 2;
        for (int rep = 0; rep < 5; ++rep) {
            const auto u = testutil::random_decaying_field(rng, p.M, 0.3);
            REQUIRE(drift_spectral(u, p).mean == 0.0);
        }
    }
}

TEST_CASE("implicit-explicit step", "[dynamics]") {
    SECTION("zero field is a fixed point") {
        auto p = linear_params(6, 1e-3, silent_noise());
        Stepper s(p);
        auto u = SpectralField::zero(6);
        std::vector<double> draws(static_cast<std::size_t>(s.noise_modes()), 0.0);
        for (int i = 0; i < 10; ++i) u = s.step(u, draws);
        REQUIRE(norm_gamma(u, 0.0) == 0.0);
    }

    SECTION("mass is frozen exactly") {
        ModelParams p;
        p.M = 8;
        p.dt = 1e-4;
        p.lambda = 1.0;
        p.n_poly = 2;
        p.mass_c = 0.25;
        p.noise = NoiseSpec::white();
        Stepper s(p);
        GaussianRng rng(71);
        std::vector<double> draws;
        auto u = SpectralField::zero(p.M);
        u.mean = 0.25;
        for (int i = 0; i < 2000; ++i) {
            fill_normals(rng, draws, s.noise_modes());
            u = s.step(u, draws);
        }
        REQUIRE(u.mean == 0.25);
    }

    SECTION("noise-free decay matches the scheme in closed form") {
        const double dt = 1e-4;
        auto p = linear_params(6, dt, silent_noise());
        Stepper s(p);
        auto u = SpectralField::zero(6);
        u.modes[0] = 0.7;
        u.modes[1] = -0.4;
        std::vector<double> draws(static_cast<std::size_t>(s.noise_modes()), 0.0);
        const long long steps = 1000;
        for (long long i = 0; i < steps; ++i) u = s.step(u, draws);
        REQUIRE(u.modes[0] ==
                Approx(0.7 * oracles::linear_scheme_decay(1, 0.0, dt, steps)).epsilon(1e-12));
        REQUIRE(u.modes[1] ==
                Approx(-0.4 * oracles::linear_scheme_decay(2, 0.0, dt, steps)).epsilon(1e-12));
        // and the exact semigroup up to O(dt)
        REQUIRE(u.modes[0] ==
                Approx(0.7 * std::exp(-0.5 * eigen_mu(1) * eigen_mu(1) * dt * static_cast<double>(steps)))
                    .epsilon(0.025));
    }

    SECTION("long-run linear variance matches the chain's closed form") {
        const double dt = 1e-3;
        auto p = linear_params(8, dt, NoiseSpec::white());
        Stepper s(p);
        GaussianRng rng(5150);
        std::vector<double> draws;
        auto u = SpectralField::zero(8);
        double sum1 = 0.0, sum2 = 0.0, sum3 = 0.0;
        const long long burn = 20000, keep = 200000;
        for (long long i = 0; i < burn + keep; ++i) {
            fill_normals(rng, draws, s.noise_modes());
            u = s.step(u, draws);
            if (i >= burn) {
                sum1 += u.modes[0] * u.modes[0];
                sum2 += u.modes[1] * u.modes[1];
                sum3 += u.modes[2] * u.modes[2];
            }
        }
        const double n = static_cast<double>(keep);
        REQUIRE(sum1 / n ==
                Approx(oracles::linear_scheme_stationary_variance(1, dt)).epsilon(0.08));
        REQUIRE(sum2 / n ==
                Approx(oracles::linear_scheme_stationary_variance(2, dt)).epsilon(0.08));
        REQUIRE(sum3 / n ==
                Approx(oracles::linear_scheme_stationary_variance(3, dt)).epsilon(0.08));
    }
}

TEST_CASE("coupling schedule", "[dynamics]") {
    GammaSchedule sched{0.01, 1.0, 1.0};
    REQUIRE_NOTHROW(sched.validate());
    REQUIRE(sched.at_zero() == Approx(0.015990757656127283).epsilon(1e-13));
    REQUIRE(sched.value_closed(sched.T) == 0.0);
    REQUIRE_THROWS_AS(sched.value(0.01), ScheduleError);
    REQUIRE_THROWS_AS(sched.value(-1e-9), ScheduleError);

    double prev = sched.at_zero();
    for (int i = 1; i < 10; ++i) {
        const double cur = sched.value(0.001 * i);
        REQUIRE(cur < prev);
        REQUIRE(cur > 0.0);
        prev = cur;
    }

    SECTION("factor 2 - a shrinks the schedule") {
        GammaSchedule nearly_two{0.01, 1.999, 1.0};
        REQUIRE(nearly_two.at_zero() == Approx(0.001 * sched.at_zero()).epsilon(1e-10));
    }

    SECTION("hypothesis validation") {
        GammaSchedule bad_lambda{0.01, 1.0, 10.0};
        REQUIRE_THROWS_AS(bad_lambda.validate(), ValidationError);
        GammaSchedule bad_a{0.01, 2.0, 1.0};
        REQUIRE_THROWS_AS(bad_a.validate(), ValidationError);
    }
}

TEST_CASE("ensemble driver determinism and conservation", "[dynamics]") {
    ModelParams p;
    p.M = 6;
    p.dt = 1e-4;
    p.lambda = 1.0;
    p.n_poly = 2;
    p.mass_c = 0.1;
    p.noise = NoiseSpec::white();

    auto x = SpectralField::zero(p.M);
    x.mean = 0.1;
    x.modes[0] = 0.2;

    const auto a = simulate_ensemble(p, x, 0.01, 5, 1234, 1);
    const auto b = simulate_ensemble(p, x, 0.01, 5, 1234, 1);
    REQUIRE(a.failures == 0);
    for (std::size_t i = 0; i < a.endpoints.size(); ++i) {
        REQUIRE(testutil::max_coeff_diff(a.endpoints[i], b.endpoints[i]) == 0.0);
        REQUIRE(a.endpoints[i].mean == 0.1);
    }
    // distinct paths see distinct noise
    REQUIRE(testutil::max_coeff_diff(a.endpoints[0], a.endpoints[1]) > 0.0);

    SECTION("initial mass must match the configured mass") {
        auto bad = x;
        bad.mean = 0.0;
        REQUIRE_THROWS_AS(simulate_ensemble(p, bad, 0.01, 2, 1, 1), ValidationError);
    }

    SECTION("zero-noise endpoint follows the linear semigroup") {
        auto lp = linear_params(6, 1e-4, silent_noise());
        auto x0 = SpectralField::zero(6);
        x0.modes[0] = 0.5;
        x0.modes[2] = -0.3;
        const auto out = simulate_ensemble(lp, x0, 0.05, 1, 9, 1);
        const long long steps = 500;
        REQUIRE(out.endpoints[0].modes[0] ==
                Approx(0.5 * oracles::linear_scheme_decay(1, 0.0, 1e-4, steps)).epsilon(1e-12));
        REQUIRE(out.endpoints[0].modes[2] ==
                Approx(-0.3 * oracles::linear_scheme_decay(3, 0.0, 1e-4, steps)).epsilon(1e-12));
    }
}

TEST_CASE("seed mixing", "[dynamics]") {
    REQUIRE(mix_seed(42, 0) == mix_seed(42, 0));
    REQUIRE(mix_seed(42, 0) != mix_seed(42, 1));
    REQUIRE(mix_seed(42, 7) != mix_seed(43, 7));
}
