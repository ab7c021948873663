#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "prefnoise/common.hpp"
#include "prefnoise/eval.hpp"

#include "testutil.hpp"

#include <cmath>
#include <vector>

using namespace prefnoise;

namespace {

World small_world(std::uint64_t seed = 0) {
    WorldConfig config;
    config.embedding_dim = 8;
    config.n_train_prompts = 64;
    config.n_test_prompts = 320;
    config.k_candidates = 8;
    config.seed = seed;
    return build_world(config);
}

PolicyParams random_params(const World& world, std::uint64_t seed) {
    PolicyConfig config;
    config.hidden_width = 12;
    config.init_scale = 0.4;
    config.seed = seed;
    return PolicyParams::random_init(config, world.embedding_dim());
}

} // namespace

TEST_CASE("identical policies with a shared draw tie everywhere") {
    const World world = small_world();
    const PolicyParams params = random_params(world, 1);
    const WinRateResult result =
        win_rate(world, params, params, world.test_prompts(), 9, 9);
    CHECK(result.win_rate == 0.5);
    CHECK(result.ties == result.n_prompts);
    CHECK(result.wins == 0);
    CHECK(result.losses == 0);
}

TEST_CASE("mirrored seeds make win rates sum to one") {
    const World world = small_world(1);
    const PolicyParams a = random_params(world, 2);
    const PolicyParams b = random_params(world, 3);
    const WinRateResult ab = win_rate(world, a, b, world.test_prompts(), 100, 200);
    const WinRateResult ba = win_rate(world, b, a, world.test_prompts(), 200, 100);
    CHECK(ab.win_rate + ba.win_rate == 1.0);
    CHECK(ab.wins == ba.losses);
    CHECK(ab.ties == ba.ties);
}

TEST_CASE("fixed seeds give identical counts across calls") {
    const World world = small_world(2);
    const PolicyParams a = random_params(world, 4);
    const PolicyParams b = random_params(world, 5);
    const WinRateResult first = win_rate(world, a, b, world.test_prompts(), 7, 8);
    const WinRateResult second = win_rate(world, a, b, world.test_prompts(), 7, 8);
    CHECK(first.wins == second.wins);
    CHECK(first.ties == second.ties);
    CHECK(first.losses == second.losses);
}

TEST_CASE("near-greedy policy against uniform matches exact enumeration") {
    const World world = small_world(3);
    const PolicyParams greedy_policy = random_params(world, 6);
    const PolicyParams uniform = PolicyParams::zeros(world.embedding_dim(), 12);

    // Exact oracle over the finite candidate set: the greedy side plays its
    // argmax; the uniform side picks each candidate with probability 1/k.
    const double k = world.k_candidates();
    double expected = 0.0;
    for (const int x : world.test_prompts()) {
        const int best = argmax_candidate(greedy_policy, world, x);
        const double r_best = world.gold_reward(x, best);
        for (int y = 0; y < world.k_candidates(); ++y) {
            if (y == best) {
                expected += 0.5 / k;
            } else if (r_best > world.gold_reward(x, y)) {
                expected += 1.0 / k;
            } else if (r_best == world.gold_reward(x, y)) {
                expected += 0.5 / k;
            }
        }
    }
    expected /= static_cast<double>(world.test_prompts().size());

    WinRateOptions options;
    options.temperature = 1e-6;
    double mean = 0.0;
    const int repeats = 30;
    for (int i = 0; i < repeats; ++i) {
        mean += win_rate(world, greedy_policy, uniform, world.test_prompts(),
                         1000 + static_cast<std::uint64_t>(i),
                         5000 + static_cast<std::uint64_t>(i), options)
                    .win_rate;
    }
    mean /= repeats;
    const double n_draws = static_cast<double>(world.test_prompts().size()) * repeats;
    CHECK(std::fabs(mean - expected) < testutil::binomial_3sigma(expected, n_draws) + 0.002);
}

TEST_CASE("a policy playing the gold argmax beats uniform about 1 - 1/k of the time") {
    // No scorer is needed for the oracle side of this bound: a gold-argmax
    // player wins against a uniform draw unless the draw hits the argmax
    // (probability 1/k, counted as a tie), so the exact value is 1 - 1/(2k).
    const World world = small_world(7);
    const double k = world.k_candidates();
    double expected = 0.0;
    for (const int x : world.test_prompts()) {
        const auto rewards = world.gold_rewards(x);
        int best = 0;
        for (int y = 1; y < world.k_candidates(); ++y) {
            if (rewards[static_cast<std::size_t>(y)] >
                rewards[static_cast<std::size_t>(best)]) {
                best = y;
            }
        }
        for (int y = 0; y < world.k_candidates(); ++y) {
            if (y == best) {
                expected += 0.5 / k;
            } else if (rewards[static_cast<std::size_t>(best)] >
                       rewards[static_cast<std::size_t>(y)]) {
                expected += 1.0 / k;
            }
        }
    }
    expected /= static_cast<double>(world.test_prompts().size());
    CHECK(expected == doctest::Approx(1.0 - 1.0 / (2.0 * k)).epsilon(1e-12));
}

TEST_CASE("greedy flag reproduces argmax decoding") {
    const World world = small_world(4);
    const PolicyParams a = random_params(world, 7);
    const PolicyParams b = random_params(world, 8);
    WinRateOptions options;
    options.greedy = true;
    const WinRateResult r1 = win_rate(world, a, b, world.test_prompts(), 1, 2, options);
    const WinRateResult r2 = win_rate(world, a, b, world.test_prompts(), 3, 4, options);
    CHECK(r1.wins == r2.wins); // seeds are irrelevant under greedy decoding
    CHECK(r1.ties == r2.ties);
}

TEST_CASE("win_rate input validation") {
    const World world = small_world(5);
    const PolicyParams a = random_params(world, 9);
    CHECK_THROWS_AS(win_rate(world, a, a, {}, 1, 2), UsageError);
    WinRateOptions options;
    options.temperature = 0.0;
    CHECK_THROWS_AS(win_rate(world, a, a, world.test_prompts(), 1, 2, options),
                    UsageError);
}

TEST_CASE("kl divergence: identity, positivity, and a hand-computed value") {
    const World world = small_world(6);
    const PolicyParams params = random_params(world, 10);
    CHECK(kl_diagnostic(world, params, params, world.test_prompts()) < 1e-12);

    const PolicyParams other = random_params(world, 11);
    CHECK(kl_diagnostic(world, params, other, world.test_prompts()) >= 0.0);

    // Direct summation of p ln(p/q) for (0.5, 0.3, 0.2) against uniform.
    const std::vector<double> p{0.5, 0.3, 0.2};
    const std::vector<double> q{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const double expected = 0.5 * std::log(1.5) + 0.3 * std::log(0.9) +
                            0.2 * std::log(0.6);
    CHECK(kl_divergence(p, q) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.0689593).epsilon(1e-5));
    CHECK_THROWS_AS(kl_divergence(p, {q.data(), 2}), UsageError);
}

TEST_CASE("aggregate: degenerate, two-value, and five-value cases") {
    const std::vector<double> equal{0.4, 0.4, 0.4};
    const AggregateResult flat = aggregate(equal);
    CHECK(flat.mean == doctest::Approx(0.4));
    CHECK(flat.ci_half_width == doctest::Approx(0.0));

    // t-critical(1, 0.95) = 12.706; half-width = 12.706 * 0.0707 / sqrt(2).
    const std::vector<double> two{0.6, 0.7};
    const AggregateResult pair = aggregate(two);
    CHECK(pair.mean == doctest::Approx(0.65));
    CHECK(pair.ci_half_width == doctest::Approx(0.6353).epsilon(1e-3));

    const std::vector<double> five{0.5, 0.55, 0.6, 0.65, 0.7};
    const AggregateResult agg = aggregate(five);
    CHECK(agg.mean == doctest::Approx(0.6));
    CHECK(agg.ci_half_width == doctest::Approx(0.0981).epsilon(2e-3));

    CHECK_THROWS_AS(aggregate({five.data(), 1}), UsageError);
}

TEST_CASE("t critical values") {
    CHECK(t_critical(1, 0.95) == doctest::Approx(12.7062).epsilon(1e-4));
    CHECK(t_critical(4, 0.95) == doctest::Approx(2.7764).epsilon(1e-4));
    CHECK(t_critical(9, 0.99) == doctest::Approx(3.2498).epsilon(1e-4));
    CHECK_THROWS_AS(t_critical(0, 0.95), UsageError);
    CHECK_THROWS_AS(t_critical(3, 1.0), UsageError);
}

TEST_CASE("confidence interval shrinks like one over root n") {
    Rng rng(12);
    std::vector<double> values(1000);
    for (double& v : values) {
        v = 0.5 + 0.1 * rng.normal();
    }
    const AggregateResult small = aggregate({values.data(), 10});
    const AggregateResult large = aggregate(values);
    CHECK(large.ci_half_width < small.ci_half_width / 5.0);
}
