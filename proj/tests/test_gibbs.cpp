#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spinodal/gibbs.hpp"
#include "support/test_util.hpp"

using namespace spinodal;
using Catch::Approx;

TEST_CASE("Gaussian reference sampler", "[gibbs]") {
    GaussianRng rng(1);
    const int draws = 100000;
    double s1 = 0.0, s1_sq = 0.0, s2_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto u = sample_mu_c(0.3, 6, rng);
        REQUIRE(u.mean == 0.3);
        s1 += u.modes[0];
        s1_sq += u.modes[0] * u.modes[0];
        s2_sq += u.modes[1] * u.modes[1];
    }
    const double n = static_cast<double>(draws);
    const double var1 = s1_sq / n;
    const double var2 = s2_sq / n;
    const double se_var1 = var1 * std::sqrt(2.0 / n);
    const double se_var2 = var2 * std::sqrt(2.0 / n);
    REQUIRE(std::abs(var1 - 0.10132118364233778) <= 3.0 * se_var1);
    REQUIRE(std::abs(var2 - 0.025330295910584444) <= 3.0 * se_var2);
    REQUIRE(std::abs(s1 / n) <= 3.0 * std::sqrt(var1 / n));
}

TEST_CASE("Gibbs energies", "[gibbs]") {
    SECTION("constrained variant") {
        GibbsTarget t;
        t.lambda = 2.0;
        t.M = 8;
        t.variant = GibbsVariant::LimitF;
        auto zero = SpectralField::zero(8);
        REQUIRE(energy(t, zero) == 0.0);

        auto half = SpectralField::zero(8);
        half.mean = 0.5;
        REQUIRE(energy(t, half) == Approx(0.011624071882273918).epsilon(1e-12));

        auto outside = SpectralField::zero(8);
        outside.mean = 1.2;
        REQUIRE(std::isinf(energy(t, outside)));
    }

    SECTION("polynomial variant") {
        GibbsTarget t;
        t.lambda = 2.0;
        t.n_poly = 1;
        t.M = 8;
        t.variant = GibbsVariant::FiniteN;
        auto half = SpectralField::zero(8);
        half.mean = 0.5;
        REQUIRE(energy(t, half) == Approx(0.010416666666666666).epsilon(1e-12));
        // unconstrained: large fields are allowed
        auto big = SpectralField::zero(8);
        big.mean = 0.9;
        big.modes[0] = 1.5;
        REQUIRE(std::isfinite(energy(t, big)));
    }

    SECTION("flat variant") {
        GibbsTarget t;
        t.M = 4;
        t.variant = GibbsVariant::Flat;
        auto u = SpectralField::zero(4);
        u.modes[2] = 42.0;
        REQUIRE(energy(t, u) == 0.0);
    }
}

TEST_CASE("acceptance probability identities", "[gibbs]") {
    REQUIRE(pcn_accept_probability(1.3, 1.3) == 1.0);
    REQUIRE(pcn_accept_probability(0.0, std::numeric_limits<double>::infinity()) == 0.0);
    GaussianRng rng(5);
    for (int i = 0; i < 100; ++i) {
        const double ex = rng.normal();
        const double ey = rng.normal();
        const double fwd = pcn_accept_probability(ex, ey);
        const double bwd = pcn_accept_probability(ey, ex);
        // detailed balance of the acceptance rule
        REQUIRE(fwd / bwd == Approx(std::exp(ex - ey)).epsilon(1e-12));
    }
}

TEST_CASE("pCN kernel basics", "[gibbs]") {
    GibbsTarget t;
    t.M = 6;
    t.mass_c = 0.2;
    t.variant = GibbsVariant::Flat;

    SECTION("beta = 1 proposes an independent reference draw") {
        auto x = SpectralField::zero(6);
        x.mean = 0.2;
        x.modes[0] = 5.0;
        GaussianRng rng(7);
        const auto [next, accepted] = pcn_step(t, x, 1.0, rng);
        REQUIRE(accepted);           // flat target accepts everything
        REQUIRE(next.mean == 0.2);   // mean mode invariant
        REQUIRE(next.modes[0] != 5.0);
        REQUIRE(std::abs(next.modes[0]) < 4.0);  // memoryless draw, not 5 + O(1)
    }

    SECTION("equal energies always accept") {
        auto x = SpectralField::zero(6);
        x.mean = 0.2;
        GaussianRng rng(11);
        PcnChain chain(t, x, 0.3, 13);
        long long accepted = 0;
        for (int i = 0; i < 500; ++i) accepted += chain.step() ? 1 : 0;
        REQUIRE(accepted == 500);
        REQUIRE(chain.state().mean == 0.2);
    }

    SECTION("chains are reproducible") {
        auto x = SpectralField::zero(6);
        x.mean = 0.2;
        PcnChain a(t, x, 0.3, 17);
        PcnChain b(t, x, 0.3, 17);
        for (int i = 0; i < 200; ++i) {
            a.step();
            b.step();
        }
        REQUIRE(testutil::max_coeff_diff(a.state(), b.state()) == 0.0);
    }
}

TEST_CASE("pCN preserves the reference measure", "[gibbs]") {
    GibbsTarget t;
    t.M = 6;
    t.variant = GibbsVariant::Flat;
    auto x = SpectralField::zero(6);
    PcnChain chain(t, x, 0.5, 23);
    const int burn = 5000, keep = 100000;
    for (int i = 0; i < burn; ++i) chain.step();
    double sq1 = 0.0, sq2 = 0.0;
    for (int i = 0; i < keep; ++i) {
        chain.step();
        sq1 += chain.state().modes[0] * chain.state().modes[0];
        sq2 += chain.state().modes[1] * chain.state().modes[1];
    }
    const double var1 = sq1 / keep;
    const double var2 = sq2 / keep;
    REQUIRE(var1 == Approx(0.10132118364233778).epsilon(0.06));
    REQUIRE(var2 == Approx(0.025330295910584444).epsilon(0.06));
}

TEST_CASE("constrained chain stays in the admissible set", "[gibbs]") {
    GibbsTarget t;
    t.lambda = 1.0;
    t.M = 8;
    t.variant = GibbsVariant::LimitF;
    auto x = SpectralField::zero(8);
    PcnChain chain(t, x, 0.2, 29);
    for (int block = 0; block < 40; ++block) {
        for (int i = 0; i < 50; ++i) chain.step();
        const auto grid = synthesize(chain.state(), t.grid_size());
        for (double g : grid.values) {
            REQUIRE(g >= -1.0);
            REQUIRE(g <= 1.0);
        }
    }
    REQUIRE(chain.acceptance_rate() > 0.01);
}

TEST_CASE("dynamics moments agree with the sampler", "[gibbs]") {
    SECTION("linear dynamics against the reference measure") {
        ModelParams p;
        p.lambda = 0.0;
        p.nonlinearity = false;
        p.M = 8;
        p.dt = 2e-6;
        p.noise = NoiseSpec::white();

        GibbsTarget t;
        t.lambda = 0.0;
        t.M = 8;
        t.variant = GibbsVariant::Flat;

        CompareInvariantOptions opts;
        opts.T_long = 1.2;
        opts.burn_in = 0.3;
        opts.paths = 10;
        opts.chain_steps = 50000;
        opts.beta = 0.5;
        opts.tracked_modes = 3;

        const auto reports = compare_invariant(p, t, opts, 101, 1);
        REQUIRE(reports.size() == 8);  // 3 means + 3 variances + energy + acceptance
        for (const auto& r : reports) {
            REQUIRE(r.advisory);
            REQUIRE(r.pass);
        }
        // variances land near (k pi)^{-2}
        for (int k = 0; k < 3; ++k) {
            const auto& r = reports[static_cast<std::size_t>(2 * k + 1)];
            const double target_var = 1.0 / eigen_mu(k + 1);
            REQUIRE(r.lhs == Approx(target_var).epsilon(0.06));
            REQUIRE(r.rhs == Approx(target_var).epsilon(0.06));
        }
    }

    SECTION("nonlinear dynamics against the polynomial Gibbs target") {
        ModelParams p;
        p.lambda = 1.0;
        p.n_poly = 2;
        p.M = 8;
        p.dt = 1e-5;
        p.noise = NoiseSpec::white();

        GibbsTarget t;
        t.lambda = 1.0;
        t.n_poly = 2;
        t.M = 8;
        t.variant = GibbsVariant::FiniteN;

        CompareInvariantOptions opts;
        opts.T_long = 1.5;
        opts.burn_in = 0.5;
        opts.paths = 10;
        opts.chain_steps = 40000;
        opts.tracked_modes = 3;

        const auto reports = compare_invariant(p, t, opts, 103, 1);
        for (const auto& r : reports) REQUIRE(r.pass);
    }

    SECTION("validation") {
        ModelParams p;
        p.M = 8;
        p.noise = NoiseSpec::degenerate({1.0}, 1);
        GibbsTarget t;
        t.M = 8;
        CompareInvariantOptions opts;
        REQUIRE_THROWS_AS(compare_invariant(p, t, opts, 1, 1), ValidationError);
    }
}

// Independent oracle for the reference covariance: the centered Brownian
// path B(theta) - mean(B) + c has exactly the mode variances (k pi)^{-2}.
TEST_CASE("Brownian representation of the reference measure", "[gibbs]") {
    const int grid = 256;
    const int paths = 4000;
    GaussianRng rng(20240401);
    const double inc_sd = std::sqrt(1.0 / grid);
    std::vector<double> b(static_cast<std::size_t>(grid));
    const auto e1 = [&](int j) {
        return std::sqrt(2.0) * std::cos(kPi * (j + 0.5) / grid);
    };
    const auto e2 = [&](int j) {
        return std::sqrt(2.0) * std::cos(2.0 * kPi * (j + 0.5) / grid);
    };
    double sq1 = 0.0, sq2 = 0.0;
    for (int path = 0; path < paths; ++path) {
        double level = 0.0, mean = 0.0;
        for (int j = 0; j < grid; ++j) {
            level += inc_sd * rng.normal();
            b[static_cast<std::size_t>(j)] = level;
            mean += level;
        }
        mean /= grid;
        double c1 = 0.0, c2 = 0.0;
        for (int j = 0; j < grid; ++j) {
            const double centered = b[static_cast<std::size_t>(j)] - mean;
            c1 += centered * e1(j);
            c2 += centered * e2(j);
        }
        c1 /= grid;
        c2 /= grid;
        sq1 += c1 * c1;
        sq2 += c2 * c2;
    }
    const double var1 = sq1 / paths;
    const double var2 = sq2 / paths;
    const double band1 = 3.0 * var1 * std::sqrt(2.0 / paths) + 1e-4;
    const double band2 = 3.0 * var2 * std::sqrt(2.0 / paths) + 1e-4;
    REQUIRE(std::abs(var1 - 0.10132118364233778) <= band1);
    REQUIRE(std::abs(var2 - 0.025330295910584444) <= band2);
}
