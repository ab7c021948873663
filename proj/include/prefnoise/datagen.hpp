#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "prefnoise/oracles.hpp"
#include "prefnoise/policy.hpp"
#include "prefnoise/world.hpp"

namespace prefnoise {

struct GenerationPair {
    int prompt = -1;
    int a = -1;
    int b = -1;
};

struct GenerationPairSet {
    std::vector<GenerationPair> pairs;
    std::size_t dropped = 0; // identical-member pairs abandoned after redraws
    std::uint64_t sft_id = 0;
    std::uint64_t rng_seed = 0;
};

struct LabeledPair {
    int prompt = -1;
    int winner = -1;
    int loser = -1;
    double gold_margin = 0.0; // r*(winner) - r*(loser); evaluation-only
    bool is_noisy = false;    // gold_margin < 0; hidden from training
};

struct Provenance {
    std::uint64_t world_seed = 0;
    std::uint64_t sft_id = 0;
    NoiseSpec noise;
    std::uint64_t rng_seed = 0;
};

struct PreferenceDataset {
    std::vector<LabeledPair> pairs;
    Provenance provenance;
};

// Samples n_samples candidates per prompt i.i.d. from the sft policy at the
// given temperature, shuffles them, and groups consecutive draws into
// n_pairs pairs. A pair whose members coincide is redrawn up to 20 times,
// then dropped (and counted). Per-prompt rng streams are derived from the
// seed, so the result is independent of iteration scheduling.
GenerationPairSet sample_generation_pairs(const World& world, const PolicyParams& sft,
                                          std::span<const int> prompts,
                                          double temperature, int n_samples, int n_pairs,
                                          std::uint64_t seed);

// Labels every pair through the noise oracle, recording the gold margin and
// noisy flag from the world's reward table. Per-pair rng streams are derived
// from the seed.
PreferenceDataset label_dataset(const GenerationPairSet& pairs, const World& world,
                                const NoiseSpec& spec, std::uint64_t seed);

// Fraction of pairs whose label disagrees with the gold order.
double measure_noise_rate(const PreferenceDataset& dataset);

// JSON-lines, one pair per line:
//   {"prompt":..,"winner":..,"loser":..,"gold_margin":..,"is_noisy":..}
// gold_margin / is_noisy are evaluation-only metadata.
void write_pairs_jsonl(const PreferenceDataset& dataset, std::ostream& out);
void write_pairs_jsonl(const PreferenceDataset& dataset,
                       const std::filesystem::path& path);
PreferenceDataset read_pairs_jsonl(const std::filesystem::path& path);

} // namespace prefnoise
