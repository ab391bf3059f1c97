#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "levsim/stats.hpp"
#include "oracles.hpp"

using namespace levsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("log returns and the activity mask", "[stats]") {
    SECTION("constant prices") {
        const std::vector<double> prices = {1.0, 1.0, 1.0};
        const auto rs = log_returns(prices, 1.0);
        REQUIRE(rs.values == std::vector<double>{0.0, 0.0});
    }
    SECTION("single e-fold") {
        const std::vector<double> prices = {1.0, std::exp(1.0)};
        const auto rs = log_returns(prices, 1.0);
        REQUIRE(rs.values.size() == 1);
        REQUIRE_THAT(rs.values[0], WithinRel(1.0, 1e-12));
    }
    SECTION("mask uses the mispricing at the interval start") {
        const std::vector<double> prices = {0.9, 1.1};
        REQUIRE(log_returns(prices, 1.0).mask == std::vector<bool>{true});
        const std::vector<double> over = {1.1, 0.9};
        REQUIRE(log_returns(over, 1.0).mask == std::vector<bool>{false});
    }
    SECTION("rejects bad input") {
        REQUIRE_THROWS_AS(log_returns(std::vector<double>{1.0}, 1.0), std::invalid_argument);
        REQUIRE_THROWS_AS(log_returns(std::vector<double>{1.0, -2.0}, 1.0),
                          std::invalid_argument);
    }
    SECTION("cumulative sum recovers log prices") {
        std::mt19937_64 gen(3);
        std::uniform_real_distribution<double> u(0.5, 1.5);
        std::vector<double> prices;
        for (int i = 0; i < 500; ++i) prices.push_back(u(gen));
        const auto rs = log_returns(prices, 1.0);
        double acc = std::log(prices[0]);
        for (std::size_t i = 0; i < rs.values.size(); ++i) {
            acc += rs.values[i];
            REQUIRE_THAT(acc, WithinAbs(std::log(prices[i + 1]), 1e-12));
        }
    }
}

TEST_CASE("Hill estimator", "[stats]") {
    SECTION("hand-computed four-point sample") {
        const std::vector<double> xs = {8.0, 4.0, 2.0, 1.0};
        const auto gamma = hill_estimate(xs, 2);
        REQUIRE(gamma.has_value());
        REQUIRE_THAT(*gamma, WithinRel(2.0 / (3.0 * std::log(2.0)), 1e-12));
        REQUIRE_THAT(*gamma, WithinAbs(0.9618, 1e-4));
    }
    SECTION("order does not matter") {
        const std::vector<double> a = {8.0, 4.0, 2.0, 1.0};
        const std::vector<double> b = {1.0, 4.0, 8.0, 2.0};
        REQUIRE(hill_estimate(a, 2) == hill_estimate(b, 2));
    }
    SECTION("exact Pareto sample recovers the exponent") {
        std::mt19937_64 gen(1234);
        const auto xs = oracles::pareto_sample(gen, 3.0, 1.0, 1000000);
        const auto fit = hill_tail_exponent(xs, 0.025, TailSide::kNegative);
        REQUIRE(fit.has_value());
        REQUIRE_THAT(fit->gamma, WithinAbs(3.0, 0.1));
        REQUIRE(fit->k == 25000);
        REQUIRE(fit->x_min > 1.0);
        REQUIRE(fit->side == TailSide::kNegative);
        // within 5% at this sample size
        REQUIRE(std::fabs(fit->gamma - 3.0) / 3.0 < 0.05);
    }
    SECTION("scale invariance") {
        std::mt19937_64 gen(77);
        const auto xs = oracles::pareto_sample(gen, 2.0, 1.0, 5000);
        std::vector<double> scaled = xs;
        for (auto& x : scaled) x *= 1742.5;
        const auto a = hill_tail_exponent(xs, 0.05);
        const auto b = hill_tail_exponent(scaled, 0.05);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        REQUIRE_THAT(a->gamma, WithinRel(b->gamma, 1e-12));
    }
    SECTION("degenerate samples yield no fit") {
        const std::vector<double> flat(100, 3.0);
        REQUIRE_FALSE(hill_estimate(flat, 20).has_value());
        REQUIRE_FALSE(hill_tail_exponent(flat, 0.25).has_value());
    }
    SECTION("too few order statistics yield no fit") {
        std::vector<double> xs(100);
        for (int i = 0; i < 100; ++i) xs[static_cast<std::size_t>(i)] = i + 1.0;
        REQUIRE_FALSE(hill_tail_exponent(xs, 0.05).has_value());  // k = 5 < 10
        REQUIRE(hill_tail_exponent(xs, 0.10).has_value());        // k = 10
    }
    SECTION("rank-size regression agrees on exact Pareto") {
        std::mt19937_64 gen(4321);
        const auto xs = oracles::pareto_sample(gen, 3.0, 1.0, 200000);
        const auto gamma = rank_size_gamma(xs, 0.025);
        REQUIRE(gamma.has_value());
        REQUIRE_THAT(*gamma, WithinAbs(3.0, 0.2));
    }
}

TEST_CASE("autocorrelation of absolute returns", "[stats]") {
    SECTION("acf(0) is one by definition") {
        std::mt19937_64 gen(9);
        std::normal_distribution<double> nd;
        ReturnSeries rs;
        for (int i = 0; i < 5000; ++i) {
            rs.values.push_back(nd(gen));
            rs.mask.push_back(true);
        }
        const auto acf = acf_abs_returns(rs, 5);
        REQUIRE(acf[0].has_value());
        REQUIRE(*acf[0] == 1.0);
    }
    SECTION("IID noise stays inside the white-noise band") {
        std::mt19937_64 gen(2024);
        std::normal_distribution<double> nd;
        ReturnSeries rs;
        for (int i = 0; i < 100000; ++i) {
            rs.values.push_back(nd(gen));
            rs.mask.push_back(true);
        }
        const auto acf = acf_abs_returns(rs, 10);
        for (int lag = 1; lag <= 10; ++lag) {
            REQUIRE(acf[static_cast<std::size_t>(lag)].has_value());
            REQUIRE(std::fabs(*acf[static_cast<std::size_t>(lag)]) < 0.02);
        }
    }
    SECTION("all-true mask reduces to the dense estimator") {
        std::mt19937_64 gen(55);
        std::normal_distribution<double> nd;
        ReturnSeries rs;
        std::vector<double> abs_xs;
        for (int i = 0; i < 3000; ++i) {
            const double x = nd(gen) * (1.0 + 0.5 * std::sin(i / 50.0));
            rs.values.push_back(x);
            rs.mask.push_back(true);
            abs_xs.push_back(std::fabs(x));
        }
        const auto masked = acf_abs_returns(rs, 20);
        const auto dense = oracles::dense_acf(abs_xs, 20);
        for (int lag = 0; lag <= 20; ++lag) {
            REQUIRE(masked[static_cast<std::size_t>(lag)].has_value());
            REQUIRE_THAT(*masked[static_cast<std::size_t>(lag)],
                         WithinAbs(dense[static_cast<std::size_t>(lag)], 1e-12));
        }
    }
    SECTION("constant magnitudes have no defined acf") {
        ReturnSeries rs;
        for (int i = 0; i < 1000; ++i) {
            rs.values.push_back(i % 2 == 0 ? 1.0 : -1.0);
            rs.mask.push_back(true);
        }
        const auto acf = acf_abs_returns(rs, 5);
        for (const auto& a : acf) REQUIRE_FALSE(a.has_value());
    }
    SECTION("lags with too few masked pairs are absent") {
        std::mt19937_64 gen(8);
        std::normal_distribution<double> nd;
        ReturnSeries rs;
        for (int i = 0; i < 2000; ++i) {
            rs.values.push_back(nd(gen));
            rs.mask.push_back(i < 50);  // only 50 active samples
        }
        const auto acf = acf_abs_returns(rs, 5);
        REQUIRE(acf[0].has_value());
        for (int lag = 1; lag <= 5; ++lag)
            REQUIRE_FALSE(acf[static_cast<std::size_t>(lag)].has_value());
    }
}

TEST_CASE("excess kurtosis", "[stats]") {
    SECTION("standard normal sample") {
        std::mt19937_64 gen(10);
        std::normal_distribution<double> nd;
        std::vector<double> xs(1000000);
        for (auto& x : xs) x = nd(gen);
        const auto k = excess_kurtosis(xs);
        REQUIRE(k.has_value());
        REQUIRE_THAT(*k, WithinAbs(0.0, 0.05));
    }
    SECTION("degenerate and tiny samples") {
        REQUIRE_FALSE(excess_kurtosis(std::vector<double>{1.0, 1.0, 1.0, 1.0}).has_value());
        REQUIRE_FALSE(excess_kurtosis(std::vector<double>{1.0, 2.0, 3.0}).has_value());
    }
}

TEST_CASE("run summary", "[stats]") {
    SECTION("constant price run") {
        const std::vector<double> prices(101, 1.0);
        const auto s = summarize_prices(prices, 1.0, 0, 100);
        REQUIRE(s.volatility.has_value());
        REQUIRE(*s.volatility == 0.0);
        REQUIRE_FALSE(s.excess_kurt.has_value());
        REQUIRE(s.default_rate.has_value());
        REQUIRE(*s.default_rate == 0.0);
        REQUIRE_THAT(*s.mean_price, WithinRel(1.0, 1e-15));
    }
    SECTION("alternating returns give volatility x") {
        const double x = 0.03;
        std::vector<double> prices = {1.0};
        for (int i = 0; i < 200; ++i)
            prices.push_back(prices.back() * std::exp(i % 2 == 0 ? x : -x));
        const auto s = summarize_prices(prices, 1.0, 0, 200);
        REQUIRE_THAT(*s.volatility, WithinRel(x, 1e-12));
    }
    SECTION("degenerate horizon is all-absent") {
        const std::vector<double> prices = {1.0};
        const auto s = summarize_prices(prices, 1.0, 0, 0);
        REQUIRE_FALSE(s.volatility.has_value());
        REQUIRE_FALSE(s.excess_kurt.has_value());
        REQUIRE_FALSE(s.default_rate.has_value());
        REQUIRE_FALSE(s.mean_price.has_value());
        REQUIRE_FALSE(s.tail_neg.has_value());
        REQUIRE(s.acf_abs.empty());
    }
}
