#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "prefnoise/common.hpp"
#include "prefnoise/filtering.hpp"
#include "prefnoise/oracles.hpp"
#include "prefnoise/world.hpp"

#include "testutil.hpp"

#include <cmath>
#include <sstream>

using namespace prefnoise;

namespace {

// ~n labeled pairs over a default world under the given oracle.
PreferenceDataset labeled_dataset(const World& world, const NoiseSpec& spec,
                                  std::size_t n, std::uint64_t seed) {
    GenerationPairSet set;
    set.rng_seed = seed;
    Rng rng(seed);
    while (set.pairs.size() < n) {
        const int x = static_cast<int>(rng.below(world.n_prompts()));
        const int a = static_cast<int>(rng.below(world.k_candidates()));
        const int b = static_cast<int>(rng.below(world.k_candidates()));
        if (a != b) {
            set.pairs.push_back(GenerationPair{x, a, b});
        }
    }
    return label_dataset(set, world, spec, seed + 1);
}

LabeledPair pair_with_margin(double margin) {
    LabeledPair pair;
    pair.prompt = 0;
    pair.winner = 0;
    pair.loser = 1;
    pair.gold_margin = margin;
    pair.is_noisy = margin < 0.0;
    return pair;
}

// 2x2 chi-square statistic for (kept vs filtered) x (noisy vs clean).
double chi_square(const PreferenceDataset& dataset, double t) {
    double counts[2][2] = {{0, 0}, {0, 0}};
    for (const LabeledPair& pair : dataset.pairs) {
        const int kept = confidence(pair) > t ? 1 : 0;
        const int noisy = pair.is_noisy ? 1 : 0;
        counts[kept][noisy] += 1.0;
    }
    const double n = dataset.pairs.size();
    double stat = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double row = counts[i][0] + counts[i][1];
            const double col = counts[0][j] + counts[1][j];
            const double expected = row * col / n;
            stat += (counts[i][j] - expected) * (counts[i][j] - expected) / expected;
        }
    }
    return stat;
}

} // namespace

TEST_CASE("confidence values") {
    CHECK(confidence(pair_with_margin(0.0)) == doctest::Approx(0.5));
    CHECK(confidence(pair_with_margin(1.0)) == doctest::Approx(0.7310586).epsilon(1e-5));
    CHECK(confidence(pair_with_margin(-1.0)) == doctest::Approx(0.7310586).epsilon(1e-5));
    // Approaches 1 from below; sigmoid(30) is still representable below 1.
    CHECK(confidence(pair_with_margin(30.0)) < 1.0);
    CHECK(confidence(pair_with_margin(30.0)) > 0.999999);

    // Literal reading scores flipped pairs below one half.
    CHECK(confidence(pair_with_margin(-1.0), ConfidenceMode::LabeledDirection) ==
          doctest::Approx(0.2689414).epsilon(1e-5));
}

TEST_CASE("threshold 0.5 keeps everything") {
    const World world = build_world(WorldConfig{});
    const PreferenceDataset dataset =
        labeled_dataset(world, NoiseSpec::random_noise(0.3), 3000, 3);
    const PreferenceDataset kept = filter_dataset(dataset, 0.5);
    CHECK(kept.pairs.size() == dataset.pairs.size());
}

TEST_CASE("surviving pairs at t=0.9 have margins above ln 9") {
    const World world = build_world(WorldConfig{});
    const PreferenceDataset dataset =
        labeled_dataset(world, NoiseSpec::stochastic(1.5), 3000, 5);
    const PreferenceDataset kept = filter_dataset(dataset, 0.9);
    CHECK(kept.pairs.size() > 0);
    CHECK(kept.pairs.size() < dataset.pairs.size());
    for (const LabeledPair& pair : kept.pairs) {
        CHECK(std::fabs(pair.gold_margin) > std::log(9.0));
    }
}

TEST_CASE("ascending thresholds give nested subsets") {
    const World world = build_world(WorldConfig{});
    const PreferenceDataset dataset =
        labeled_dataset(world, NoiseSpec::gaussian(1.2), 2000, 7);
    const PreferenceDataset loose = filter_dataset(dataset, 0.6);
    const PreferenceDataset tight = filter_dataset(dataset, 0.8);
    CHECK(tight.pairs.size() <= loose.pairs.size());
    // Order is preserved, so the tight set must be a subsequence of the loose
    // set.
    std::size_t cursor = 0;
    for (const LabeledPair& pair : tight.pairs) {
        bool found = false;
        while (cursor < loose.pairs.size()) {
            const LabeledPair& other = loose.pairs[cursor++];
            if (other.prompt == pair.prompt && other.winner == pair.winner &&
                other.loser == pair.loser && other.gold_margin == pair.gold_margin) {
                found = true;
                break;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("threshold domain is enforced") {
    const World world = build_world(WorldConfig{});
    const PreferenceDataset dataset =
        labeled_dataset(world, NoiseSpec::random_noise(0.1), 100, 9);
    CHECK_THROWS_AS(filter_dataset(dataset, 0.49), UsageError);
    CHECK_THROWS_AS(filter_dataset(dataset, 1.0), UsageError);
}

TEST_CASE("random noise is independent of confidence") {
    const World world = build_world(WorldConfig{});
    const PreferenceDataset dataset =
        labeled_dataset(world, NoiseSpec::random_noise(0.3), 10000, 11);
    // df = 1, alpha = 0.01 critical value.
    for (const double t : {0.6, 0.7, 0.8}) {
        CHECK(chi_square(dataset, t) < 6.634896601);
    }
    const std::vector<double> thresholds{0.6, 0.7, 0.8, 0.9};
    const std::vector<FilterReport> reports = retention_stats(dataset, thresholds);
    for (const FilterReport& report : reports) {
        const double sigma_bound = testutil::binomial_3sigma(
            report.noise_rate_before, static_cast<double>(report.kept));
        CHECK(std::fabs(report.noise_rate_after - report.noise_rate_before) <
              sigma_bound);
    }
}

TEST_CASE("margin-dependent noise is filtered out") {
    const World world = build_world(WorldConfig{});
    std::vector<std::pair<double, double>> sample;
    {
        Rng rng(13);
        for (int i = 0; i < 4000; ++i) {
            sample.emplace_back(rng.normal(), rng.normal());
        }
    }
    for (const NoiseFamily family : {NoiseFamily::Stochastic, NoiseFamily::Gaussian}) {
        const double value = calibrate(family, 0.25, sample);
        NoiseSpec spec;
        spec.family = family;
        spec.value = value;
        const PreferenceDataset dataset = labeled_dataset(world, spec, 10000, 17);
        const std::vector<double> thresholds{0.6, 0.7, 0.8, 0.9};
        const std::vector<FilterReport> reports = retention_stats(dataset, thresholds);
        double previous = 1.0;
        for (const FilterReport& report : reports) {
            CHECK(report.noise_rate_after <= previous + 1e-12);
            previous = report.noise_rate_after;
        }
        const FilterReport& at08 = reports[2];
        const double sigma = std::sqrt(
            at08.noise_rate_before * (1.0 - at08.noise_rate_before) /
                static_cast<double>(dataset.pairs.size()) +
            at08.noise_rate_after * (1.0 - at08.noise_rate_after) /
                static_cast<double>(at08.kept));
        CHECK(at08.noise_rate_after < at08.noise_rate_before - 3.0 * sigma);
    }
}

TEST_CASE("retention stats at the no-op threshold") {
    const World world = build_world(WorldConfig{});
    const PreferenceDataset dataset =
        labeled_dataset(world, NoiseSpec::stochastic(1.0), 2000, 19);
    const std::vector<double> thresholds{0.5, 0.6, 0.7};
    const std::vector<FilterReport> reports = retention_stats(dataset, thresholds);
    CHECK(reports[0].kept_fraction == 1.0);
    CHECK(reports[0].kept == dataset.pairs.size());
    CHECK(reports[0].noise_rate_after == reports[0].noise_rate_before);
    CHECK(reports[0].kept >= reports[1].kept);
    CHECK(reports[1].kept >= reports[2].kept);
}

TEST_CASE("csv export") {
    std::vector<FilterReport> reports(2);
    reports[0].threshold = 0.5;
    reports[0].kept = 10;
    reports[0].kept_fraction = 1.0;
    reports[0].noise_rate_before = 0.25;
    reports[0].noise_rate_after = 0.25;
    reports[1].threshold = 0.8;
    reports[1].kept = 4;
    reports[1].kept_fraction = 0.4;
    reports[1].noise_rate_before = 0.25;
    reports[1].noise_rate_after = 0.1;
    std::ostringstream out;
    write_filter_report_csv(reports, out);
    CHECK(out.str() == "threshold,kept,kept_fraction,noise_before,noise_after\n"
                       "0.5,10,1,0.25,0.25\n"
                       "0.8,4,0.4,0.25,0.1\n");
}
