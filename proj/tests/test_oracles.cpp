#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "prefnoise/common.hpp"
#include "prefnoise/oracles.hpp"

#include "testutil.hpp"

#include <cmath>
#include <utility>
#include <vector>

using namespace prefnoise;

namespace {

double a_win_frequency(const NoiseSpec& spec, double r_a, double r_b, int draws,
                       std::uint64_t seed) {
    Rng rng(seed);
    int wins = 0;
    for (int i = 0; i < draws; ++i) {
        wins += label_pair(spec, 0, r_a, 1, r_b, rng).winner == 0 ? 1 : 0;
    }
    return wins / static_cast<double>(draws);
}

} // namespace

TEST_CASE("noise-free random oracle always follows the gold order") {
    const NoiseSpec spec = NoiseSpec::random_noise(0.0);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const OracleLabel label = label_pair(spec, 4, 1.2, 9, -0.3, rng);
        CHECK(label.winner == 4);
        CHECK(label.loser == 9);
    }
}

TEST_CASE("stochastic oracle matches the Boltzmann closed form") {
    // sigma(1) = 0.73106
    const double freq =
        a_win_frequency(NoiseSpec::stochastic(1.0), 1.0, 0.0, 100000, 42);
    CHECK(std::fabs(freq - 0.7310585786) < 0.01);
}

TEST_CASE("gaussian oracle matches the normal-cdf closed form") {
    // Phi(1 / sqrt(2)) = 0.76025
    const double freq = a_win_frequency(NoiseSpec::gaussian(1.0), 1.0, 0.0, 100000, 43);
    CHECK(std::fabs(freq - 0.7602499389) < 0.01);
}

TEST_CASE("flip probabilities") {
    CHECK(flip_probability(NoiseSpec::random_noise(0.2), 5.0, -1.0) == 0.2);
    CHECK(flip_probability(NoiseSpec::random_noise(0.2), 0.1, 0.2) == 0.2);

    // Large gamma saturates toward a coin flip: within 0.013 of 0.5 for
    // margins up to 5 at gamma = 100.
    const NoiseSpec wide = NoiseSpec::stochastic(100.0);
    for (const double gap : {0.5, 1.0, 3.0, 5.0}) {
        CHECK(std::fabs(flip_probability(wide, gap, 0.0) - 0.5) <= 0.013);
    }

    CHECK(flip_probability(NoiseSpec::stochastic(1.0), 1.0, 0.0) ==
          doctest::Approx(0.2689414214).epsilon(1e-9));
    CHECK(flip_probability(NoiseSpec::stochastic(0.0), 1.0, 0.0) == 0.0);
    CHECK(flip_probability(NoiseSpec::gaussian(0.0), 1.0, 0.0) == 0.0);
    CHECK(flip_probability(NoiseSpec::gaussian(1.0), 1.0, 0.0) ==
          doctest::Approx(1.0 - 0.7602499389).epsilon(1e-9));
}

TEST_CASE("expected noise rate averages flip probabilities") {
    const std::vector<std::pair<double, double>> pairs{{1.0, 0.0}, {0.0, 2.0}};
    CHECK(expected_noise_rate(NoiseSpec::random_noise(0.3), pairs) ==
          doctest::Approx(0.3));

    const std::vector<std::pair<double, double>> single{{1.0, 0.0}};
    CHECK(expected_noise_rate(NoiseSpec::stochastic(1.0), single) ==
          doctest::Approx(sigmoid(-1.0)).epsilon(1e-12));

    const NoiseSpec spec = NoiseSpec::stochastic(0.8);
    const double p = flip_probability(spec, 1.0, 0.0);
    const double q = flip_probability(spec, 0.0, 2.0);
    CHECK(expected_noise_rate(spec, pairs) == doctest::Approx((p + q) / 2.0));

    CHECK_THROWS_AS(expected_noise_rate(spec, {}), UsageError);
}

TEST_CASE("calibration identities and grid rounding") {
    const std::vector<std::pair<double, double>> pairs{{1.0, 0.0}, {2.0, 1.0}};
    CHECK(calibrate(NoiseFamily::Random, 0.35, pairs) == 0.35);
    CHECK(calibrate(NoiseFamily::Stochastic, 0.0, pairs) == 0.0);
    CHECK(calibrate(NoiseFamily::Gaussian, 0.0, pairs) == 0.0);

    // All margins at 1: smallest grid gamma with sigmoid(-1/gamma) >= 0.25
    // is 1/ln(3) = 0.9102 rounded up to 0.92.
    const double gamma = calibrate(NoiseFamily::Stochastic, 0.25, pairs);
    CHECK(gamma == doctest::Approx(0.92).epsilon(1e-9));
    CHECK(sigmoid(-1.0 / gamma) >= 0.25);
    CHECK(sigmoid(-1.0 / (gamma - 0.01)) < 0.25);

    CHECK_THROWS_AS(calibrate(NoiseFamily::Stochastic, 0.6, pairs), UsageError);
    CHECK_THROWS_AS(calibrate(NoiseFamily::Stochastic, 0.25, {}), UsageError);
}

TEST_CASE("flip probability is monotone in the hyperparameter and the margin") {
    double previous = 0.0;
    for (double gamma = 0.0; gamma <= 3.0; gamma += 0.25) {
        const double p = flip_probability(NoiseSpec::stochastic(gamma), 1.0, 0.0);
        CHECK(p >= previous - 1e-15);
        previous = p;
    }
    previous = 0.0;
    for (double delta = 0.0; delta <= 3.0; delta += 0.25) {
        const double p = flip_probability(NoiseSpec::gaussian(delta), 1.0, 0.0);
        CHECK(p >= previous - 1e-15);
        previous = p;
    }
    for (const NoiseSpec spec : {NoiseSpec::stochastic(0.9), NoiseSpec::gaussian(0.9)}) {
        previous = 0.5;
        for (double gap = 0.0; gap <= 4.0; gap += 0.5) {
            const double p = flip_probability(spec, gap, 0.0);
            CHECK(p <= previous + 1e-15);
            previous = p;
        }
    }
}

TEST_CASE("empirical flip frequency matches the analytic probability") {
    Rng meta(2024);
    for (int trial = 0; trial < 6; ++trial) {
        const double hyper = 0.2 + 2.5 * meta.uniform01();
        const double gap = meta.normal() * std::sqrt(2.0);
        const NoiseSpec spec = trial % 2 == 0 ? NoiseSpec::stochastic(hyper)
                                              : NoiseSpec::gaussian(hyper);
        const double p_flip = flip_probability(spec, gap, 0.0);
        Rng rng(900 + static_cast<std::uint64_t>(trial));
        const int draws = 20000;
        int flips = 0;
        for (int i = 0; i < draws; ++i) {
            const OracleLabel label = label_pair(spec, 0, gap, 1, 0.0, rng);
            const bool gold_a = gap > 0.0;
            flips += (label.winner == 0) != gold_a ? 1 : 0;
        }
        const double freq = flips / static_cast<double>(draws);
        CHECK(std::fabs(freq - p_flip) < testutil::binomial_3sigma(p_flip, draws));
    }
}

TEST_CASE("calibrated oracles hit the target rate on fresh samples") {
    Rng rng(7);
    std::vector<std::pair<double, double>> sample(5000);
    for (auto& [a, b] : sample) {
        a = rng.normal();
        b = rng.normal();
    }
    for (const NoiseFamily family : {NoiseFamily::Stochastic, NoiseFamily::Gaussian}) {
        for (const double target : {0.1, 0.3}) {
            const double value = calibrate(family, target, sample);
            NoiseSpec spec;
            spec.family = family;
            spec.value = value;
            int flips = 0;
            const int draws = 10000;
            for (int i = 0; i < draws; ++i) {
                const double a = rng.normal();
                const double b = rng.normal();
                const OracleLabel label = label_pair(spec, 0, a, 1, b, rng);
                flips += (label.winner == 0) != (a > b) ? 1 : 0;
            }
            CHECK(std::fabs(flips / static_cast<double>(draws) - target) < 0.015);
        }
    }
}

TEST_CASE("gaussian labeling never reads mu") {
    NoiseSpec biased = NoiseSpec::gaussian(1.3);
    biased.mu = 42.0;
    const NoiseSpec centered = NoiseSpec::gaussian(1.3);
    Rng a(31);
    Rng b(31);
    for (int i = 0; i < 200; ++i) {
        const OracleLabel la = label_pair(biased, 0, 0.4, 1, -0.1, a);
        const OracleLabel lb = label_pair(centered, 0, 0.4, 1, -0.1, b);
        CHECK(la.winner == lb.winner);
    }
    CHECK(flip_probability(biased, 1.0, 0.0) == flip_probability(centered, 1.0, 0.0));
}

TEST_CASE("exact ties break uniformly at random") {
    const NoiseSpec spec = NoiseSpec::stochastic(0.0);
    Rng rng(55);
    int a_wins = 0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        a_wins += label_pair(spec, 0, 0.7, 1, 0.7, rng).winner == 0 ? 1 : 0;
    }
    CHECK(std::fabs(a_wins / static_cast<double>(draws) - 0.5) <
          testutil::binomial_3sigma(0.5, draws));
}

TEST_CASE("validation errors") {
    CHECK_THROWS_AS(NoiseSpec::random_noise(0.6), ConfigError);
    CHECK_THROWS_AS(NoiseSpec::random_noise(-0.1), ConfigError);
    CHECK_THROWS_AS(NoiseSpec::stochastic(-1.0), ConfigError);
    const NoiseSpec spec = NoiseSpec::random_noise(0.1);
    Rng rng(1);
    CHECK_THROWS_AS(label_pair(spec, 2, 1.0, 2, 0.5, rng), UsageError);
    CHECK_THROWS_AS(label_pair(spec, 0, std::nan(""), 1, 0.5, rng), UsageError);
    CHECK(family_from_string("stochastic") == NoiseFamily::Stochastic);
    CHECK_THROWS_AS(family_from_string("boltzmann"), ConfigError);
}

TEST_CASE("noise spec json round trip") {
    const NoiseSpec spec = NoiseSpec::gaussian(2.5);
    const NoiseSpec back = NoiseSpec::from_json(spec.to_json());
    CHECK(back.family == spec.family);
    CHECK(back.value == spec.value);
}
