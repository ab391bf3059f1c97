#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "levsim/model.hpp"
#include "levsim/rng.hpp"

using namespace levsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("noise trader process", "[model]") {
    ModelConfig cfg;  // V=1, N=1000, sigma=0.035, rho=0.99

    SECTION("V*N is the fixed point of the log recursion") {
        REQUIRE_THAT(noise_trader_step(1000.0, 0.0, cfg), WithinRel(1000.0, 1e-12));
    }
    SECTION("one positive shock from the fixed point") {
        // Independent route: at the fixed point the recursion reduces to a
        // pure sigma*chi multiplier.
        REQUIRE_THAT(noise_trader_step(1000.0, 1.0, cfg),
                     WithinRel(1000.0 * std::exp(0.035), 1e-12));
    }
    SECTION("mean reversion pulls toward V*N") {
        // 500^0.99 * 1000^0.01 = 500 * 2^0.01
        REQUIRE_THAT(noise_trader_step(500.0, 0.0, cfg),
                     WithinRel(500.0 * std::pow(2.0, 0.01), 1e-12));
        REQUIRE_THAT(noise_trader_step(500.0, 0.0, cfg), WithinAbs(503.47, 0.01));
    }
    SECTION("rejects bad inputs") {
        REQUIRE_THROWS_AS(noise_trader_step(-1.0, 0.0, cfg), std::invalid_argument);
        REQUIRE_THROWS_AS(noise_trader_step(0.0, 0.0, cfg), std::invalid_argument);
        REQUIRE_THROWS_AS(noise_trader_step(1000.0, std::nan(""), cfg), std::invalid_argument);
        REQUIRE_THROWS_AS(noise_trader_step(std::numeric_limits<double>::infinity(), 0.0, cfg),
                          std::invalid_argument);
    }
    SECTION("strictly positive output over extreme shocks") {
        for (double chi : {-40.0, -8.0, 8.0, 40.0})
            REQUIRE(noise_trader_step(1e-6, chi, cfg) > 0.0);
    }
    SECTION("long-run log mean sits at log(V*N)") {
        std::mt19937_64 gen(20240811);
        std::normal_distribution<double> normal(0.0, 1.0);
        const long n = 200000;
        double xi = cfg.V * cfg.N;
        double sum_log = 0.0;
        for (long t = 0; t < n; ++t) {
            xi = noise_trader_step(xi, normal(gen), cfg);
            sum_log += std::log(xi);
        }
        const double mean = sum_log / static_cast<double>(n);
        // AR(1) standard error of the sample mean: stationary sd scaled by
        // the effective sample size n (1-rho)/(1+rho).
        const double sd = cfg.sigma / std::sqrt(1.0 - cfg.rho * cfg.rho);
        const double se = sd / std::sqrt(n * (1.0 - cfg.rho) / (1.0 + cfg.rho));
        REQUIRE(std::fabs(mean - std::log(cfg.V * cfg.N)) < 3.0 * se);
    }
}

TEST_CASE("fund demand", "[model]") {
    SECTION("overpriced asset: hold nothing") {
        REQUIRE(fund_demand(-0.1, 2.0, 1.1, {10.0, 10.0}, 10.0) == 0.0);
        REQUIRE(fund_demand(0.0, 2.0, 1.0, {10.0, 10.0}, 10.0) == 0.0);
    }
    SECTION("linear region") {
        // 10 * 0.05 * 2 / 0.95; position value 1.0 at leverage 0.5
        REQUIRE_THAT(fund_demand(0.05, 2.0, 0.95, {10.0, 10.0}, 10.0),
                     WithinRel(1.0 / 0.95, 1e-12));
    }
    SECTION("capped region") {
        // m = 0.3 >= m_crit = 0.2: position value 2*1, cash -1
        REQUIRE_THAT(fund_demand(0.3, 1.0, 0.7, {10.0, 2.0}, 2.0),
                     WithinRel(2.0 / 0.7, 1e-12));
    }
    SECTION("tie at m_crit goes to the cap") {
        const double d = fund_demand(0.2, 1.0, 0.8, {10.0, 2.0}, 2.0);
        REQUIRE_THAT(d * 0.8, WithinRel(2.0, 1e-12));
    }
    SECTION("rejects non-positive price") {
        REQUIRE_THROWS_AS(fund_demand(0.1, 1.0, 0.0, {10.0, 10.0}, 10.0),
                          std::invalid_argument);
    }
    SECTION("non-positive wealth demands nothing") {
        REQUIRE(fund_demand(0.3, 0.0, 0.7, {10.0, 10.0}, 10.0) == 0.0);
        REQUIRE(fund_demand(0.3, -1.0, 0.7, {10.0, 10.0}, 10.0) == 0.0);
    }
    SECTION("long-only and cap respected for random inputs") {
        std::mt19937_64 gen(7);
        std::uniform_real_distribution<double> um(-1.0, 0.999);
        std::uniform_real_distribution<double> uw(1e-6, 50.0);
        std::uniform_real_distribution<double> ub(0.5, 50.0);
        std::uniform_real_distribution<double> ucap(1.0, 20.0);
        for (int i = 0; i < 20000; ++i) {
            const double m = um(gen);
            const double w = uw(gen);
            const double beta = ub(gen);
            const double cap = ucap(gen);
            const double p = 1.0 - m;
            const double d = fund_demand(m, w, p, {beta, cap}, cap);
            REQUIRE(d >= 0.0);
            REQUIRE(d * p / w <= cap + 1e-12);
        }
    }
}

TEST_CASE("leverage ratio", "[model]") {
    REQUIRE(leverage_ratio(0.0, 1.3, 2.0).value() == 0.0);
    REQUIRE_THAT(leverage_ratio(4.0, 0.5, 1.0).value(), WithinRel(2.0, 1e-15));
    SECTION("fully invested, unlevered") {
        const double shares = 3.0, p = 0.7;
        REQUIRE_THAT(leverage_ratio(shares, p, shares * p).value(), WithinRel(1.0, 1e-15));
    }
    SECTION("non-positive wealth routes to default handling") {
        REQUIRE_FALSE(leverage_ratio(1.0, 1.0, 0.0).has_value());
        REQUIRE_FALSE(leverage_ratio(1.0, 1.0, -0.5).has_value());
    }
}

TEST_CASE("performance EMA", "[model]") {
    SECTION("fixed point") {
        REQUIRE_THAT(performance_update(0.07, 0.07, 0.1), WithinRel(0.07, 1e-15));
    }
    REQUIRE_THAT(performance_update(0.0, 0.1, 0.1), WithinRel(0.01, 1e-15));
    REQUIRE_THAT(performance_update(0.02, -0.01, 0.1), WithinRel(0.017, 1e-12));
}

TEST_CASE("capital flow", "[model]") {
    ModelConfig cfg;  // b=0.15, r_b=0.005
    SECTION("benchmark-matching fund has zero flow") {
        REQUIRE(capital_flow(cfg.r_b, 10.0, cfg) == 0.0);
    }
    SECTION("proportional inflow") {
        REQUIRE_THAT(capital_flow(0.105, 10.0, cfg), WithinRel(0.15, 1e-12));
    }
    SECTION("withdrawals floored at the fund value") {
        REQUIRE_THAT(capital_flow(cfg.r_b - 10.0, 1.0, cfg), WithinRel(-1.0, 1e-15));
    }
    SECTION("floor holds for random inputs") {
        std::mt19937_64 gen(11);
        std::uniform_real_distribution<double> ur(-50.0, 50.0);
        std::uniform_real_distribution<double> uv(0.0, 100.0);
        for (int i = 0; i < 20000; ++i) {
            const double fv = uv(gen);
            REQUIRE(capital_flow(ur(gen), fv, cfg) >= -fv);
        }
    }
}

TEST_CASE("wealth update", "[model]") {
    REQUIRE(wealth_update(2.0, 5.0, 1.0, 1.0, 0.0) == 2.0);
    REQUIRE_THAT(wealth_update(2.0, 1.0, 0.9, 1.0, 0.0), WithinRel(1.9, 1e-12));
    REQUIRE_THAT(wealth_update(2.0, 0.0, 1.1, 0.9, 0.5), WithinRel(2.5, 1e-15));
}

TEST_CASE("fund lifecycle", "[model]") {
    ModelConfig cfg;  // W0=2, survival_fraction=0.1, T_reintro=100
    FundState fund = FundState::fresh({10.0, 10.0}, cfg.W0);

    SECTION("default below the survival threshold") {
        const FundState out = lifecycle_step(fund, 0.15, 500, cfg);
        REQUIRE(out.status == FundStatus::kDefaulted);
        REQUIRE(out.reentry_time == 600);
        REQUIRE(out.shares == 0.0);
        REQUIRE(out.cash == 0.0);
    }
    SECTION("negative wealth is subsumed by the threshold") {
        REQUIRE(lifecycle_step(fund, -0.4, 10, cfg).status == FundStatus::kDefaulted);
    }
    SECTION("survival above the threshold") {
        const FundState out = lifecycle_step(fund, 0.25, 500, cfg);
        REQUIRE(out.status == FundStatus::kActive);
        REQUIRE(out.wealth == 0.25);
    }
    SECTION("threshold comparison is strict") {
        REQUIRE(lifecycle_step(fund, 0.2, 500, cfg).status == FundStatus::kActive);
    }
    SECTION("rebirth at the reentry time") {
        FundState dead = fund;
        dead.status = FundStatus::kDefaulted;
        dead.reentry_time = 600;
        dead.r_perf = -0.3;
        REQUIRE(lifecycle_step(dead, 0.0, 599, cfg).status == FundStatus::kDefaulted);
        const FundState out = lifecycle_step(dead, 0.0, 600, cfg);
        REQUIRE(out.status == FundStatus::kActive);
        REQUIRE(out.wealth == 2.0);
        REQUIRE(out.shares == 0.0);
        REQUIRE(out.r_perf == 0.0);
        REQUIRE(out.params.beta == fund.params.beta);
        // wealth = shares*p + cash must hold from birth
        REQUIRE(out.cash == out.wealth);
    }
}

TEST_CASE("effective leverage cap", "[model]") {
    const FundParams params{10.0, 10.0};
    const LeveragePolicy fixed{PolicyKind::kFixed, 100.0, 10};
    const LeveragePolicy adj{PolicyKind::kVolatilityAdjusted, 100.0, 10};

    REQUIRE(effective_cap(params, fixed, 1.0) == 10.0);
    REQUIRE(effective_cap(params, adj, 0.0) == 10.0);
    REQUIRE_THAT(effective_cap(params, adj, 0.01), WithinRel(5.0, 1e-12));
    SECTION("floored at one") {
        REQUIRE(effective_cap(params, adj, 1.0) == 1.0);
    }
    SECTION("monotone non-increasing and bounded") {
        double prev = effective_cap(params, adj, 0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double cap = effective_cap(params, adj, 1e-5 * i * i);
            REQUIRE(cap <= prev + 1e-15);
            REQUIRE(cap >= 1.0);
            REQUIRE(cap <= params.lambda_max);
            prev = cap;
        }
    }
}

TEST_CASE("margin call flag", "[model]") {
    REQUIRE_FALSE(margin_call_flag(0.0, 1.0, 1.0, 2.0));
    REQUIRE(margin_call_flag(3.0, 1.0, 1.0, 2.0));
    REQUIRE_THROWS_AS(margin_call_flag(1.0, 1.0, 0.0, 2.0), std::invalid_argument);
    SECTION("exact at-cap position does not flag") {
        // wealth == shares*p with cap 1: ratio sits at 1 up to rounding
        REQUIRE_FALSE(margin_call_flag(3.0, 0.7, 3.0 * 0.7, 1.0));
    }
    SECTION("never flags on random unlevered trajectories") {
        std::mt19937_64 gen(23);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < 5000; ++i) {
            const double p_prev = 0.5 + u01(gen);
            const double wealth = 0.1 + 40.0 * u01(gen);
            const double frac = u01(gen);  // fully invested at frac = 1
            const double value = frac * wealth;
            const double shares = value / p_prev;
            const double cash = wealth - value;  // >= 0
            const double p = p_prev * (0.7 + 0.6 * u01(gen));
            REQUIRE_FALSE(margin_call_flag(shares, p, shares * p + cash, 1.0));
        }
    }
}

TEST_CASE("config validation", "[model]") {
    SECTION("defaults are valid") {
        ModelConfig cfg;
        REQUIRE_NOTHROW(cfg.validate());
        REQUIRE(cfg.funds.size() == 10);
        REQUIRE(cfg.funds.front().beta == 5.0);
        REQUIRE(cfg.funds.back().beta == 50.0);
        REQUIRE(cfg.survival_threshold() == 0.2);
    }
    SECTION("violations name the offending key") {
        ModelConfig cfg;
        cfg.funds[0].lambda_max = 0.5;
        REQUIRE_THROWS_WITH(cfg.validate(),
                            Catch::Matchers::ContainsSubstring("funds[0].lambda_max"));
        cfg = ModelConfig{};
        cfg.rho = 1.5;
        REQUIRE_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("rho"));
        cfg = ModelConfig{};
        cfg.a = 1.0;
        REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
        cfg = ModelConfig{};
        cfg.survival_fraction = 1.0;
        REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("normal inverse CDF", "[model][rng]") {
    SECTION("known quantiles") {
        REQUIRE(normal_icdf(0.5) == 0.0);
        REQUIRE_THAT(normal_icdf(0.975), WithinAbs(1.959963984540054, 1e-12));
        REQUIRE_THAT(normal_icdf(0.025), WithinAbs(-1.959963984540054, 1e-12));
        // frozen 40-digit reference values (computed via erfinv)
        REQUIRE_THAT(normal_icdf(1e-12), WithinRel(-7.0344838253011319298, 1e-13));
        REQUIRE_THAT(normal_icdf(1e-6), WithinRel(-4.7534243088228989482, 1e-13));
        REQUIRE_THAT(normal_icdf(0.31), WithinRel(-0.49585034734745332657, 1e-13));
        REQUIRE_THAT(normal_icdf(0.77), WithinRel(0.73884684918521362932, 1e-13));
    }
    SECTION("round trip against the erfc-based CDF") {
        for (double p : {1e-12, 1e-6, 1e-3, 0.025, 0.31, 0.5, 0.77, 0.975,
                         1.0 - 1e-6, 1.0 - 1e-12}) {
            const double x = normal_icdf(p);
            const double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
            REQUIRE_THAT(back, WithinRel(p, 1e-11));
        }
    }
    SECTION("domain") {
        REQUIRE_THROWS_AS(normal_icdf(0.0), std::invalid_argument);
        REQUIRE_THROWS_AS(normal_icdf(1.0), std::invalid_argument);
    }
}

TEST_CASE("counter RNG", "[model][rng]") {
    CounterRng rng(42);
    SECTION("pure function of (seed, counter)") {
        REQUIRE(rng.bits(7) == CounterRng(42).bits(7));
        REQUIRE(rng.normal(7) == CounterRng(42).normal(7));
        REQUIRE(rng.bits(7) != rng.bits(8));
        REQUIRE(rng.bits(7) != CounterRng(43).bits(7));
    }
    SECTION("uniforms stay strictly inside (0,1)") {
        for (std::uint64_t i = 0; i < 100000; ++i) {
            const double u = rng.uniform01(i);
            REQUIRE(u > 0.0);
            REQUIRE(u < 1.0);
        }
    }
    SECTION("normals match moments of the standard normal") {
        double sum = 0.0, sum2 = 0.0;
        const long n = 200000;
        for (long i = 0; i < n; ++i) {
            const double x = rng.normal(static_cast<std::uint64_t>(i));
            sum += x;
            sum2 += x * x;
        }
        REQUIRE_THAT(sum / n, WithinAbs(0.0, 3.0 / std::sqrt(static_cast<double>(n))));
        REQUIRE_THAT(sum2 / n, WithinAbs(1.0, 0.02));
    }
}
