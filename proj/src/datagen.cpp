#include "prefnoise/datagen.hpp"

#include "prefnoise/common.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace prefnoise {

namespace {

constexpr int kMaxRedraws = 20;
constexpr std::uint64_t kPairStream = 0x7061697273ULL;  // "pairs"
constexpr std::uint64_t kLabelStream = 0x6c6162656cULL; // "label"

} // namespace

GenerationPairSet sample_generation_pairs(const World& world, const PolicyParams& sft,
                                          std::span<const int> prompts,
                                          double temperature, int n_samples, int n_pairs,
                                          std::uint64_t seed) {
    if (n_pairs <= 0 || n_samples <= 0 || n_pairs * 2 > n_samples) {
        throw UsageError("need n_pairs <= n_samples / 2");
    }
    if (!(temperature > 0.0)) {
        throw UsageError("temperature must be positive");
    }

    GenerationPairSet result;
    result.pairs.reserve(prompts.size() * static_cast<std::size_t>(n_pairs));
    result.sft_id = sft.fingerprint();
    result.rng_seed = seed;

    std::vector<int> draws(static_cast<std::size_t>(n_samples));
    for (const int x : prompts) {
        Rng rng(mix_seed(seed, kPairStream, static_cast<std::uint64_t>(x)));
        for (int& y : draws) {
            y = sample(sft, world, x, temperature, rng);
        }
        rng.shuffle(draws.begin(), draws.end());
        for (int p = 0; p < n_pairs; ++p) {
            int a = draws[static_cast<std::size_t>(2 * p)];
            int b = draws[static_cast<std::size_t>(2 * p + 1)];
            for (int attempt = 0; a == b && attempt < kMaxRedraws; ++attempt) {
                a = sample(sft, world, x, temperature, rng);
                b = sample(sft, world, x, temperature, rng);
            }
            if (a == b) {
                ++result.dropped;
            } else {
                result.pairs.push_back(GenerationPair{x, a, b});
            }
        }
    }
    return result;
}

PreferenceDataset label_dataset(const GenerationPairSet& pairs, const World& world,
                                const NoiseSpec& spec, std::uint64_t seed) {
    spec.validate();
    PreferenceDataset dataset;
    dataset.provenance =
        Provenance{world.seed(), pairs.sft_id, spec, seed};
    dataset.pairs.reserve(pairs.pairs.size());
    for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
        const GenerationPair& pair = pairs.pairs[i];
        Rng rng(mix_seed(seed, kLabelStream, i));
        const double r_a = world.gold_reward(pair.prompt, pair.a);
        const double r_b = world.gold_reward(pair.prompt, pair.b);
        const OracleLabel label = label_pair(spec, pair.a, r_a, pair.b, r_b, rng);
        LabeledPair labeled;
        labeled.prompt = pair.prompt;
        labeled.winner = label.winner;
        labeled.loser = label.loser;
        labeled.gold_margin = world.gold_reward(pair.prompt, label.winner) -
                              world.gold_reward(pair.prompt, label.loser);
        labeled.is_noisy = labeled.gold_margin < 0.0;
        dataset.pairs.push_back(labeled);
    }
    return dataset;
}

double measure_noise_rate(const PreferenceDataset& dataset) {
    if (dataset.pairs.empty()) {
        throw UsageError("measure_noise_rate requires a non-empty dataset");
    }
    std::size_t noisy = 0;
    for (const LabeledPair& pair : dataset.pairs) {
        noisy += pair.is_noisy ? 1 : 0;
    }
    return static_cast<double>(noisy) / static_cast<double>(dataset.pairs.size());
}

void write_pairs_jsonl(const PreferenceDataset& dataset, std::ostream& out) {
    for (const LabeledPair& pair : dataset.pairs) {
        const nlohmann::json line{
            {"prompt", pair.prompt},     {"winner", pair.winner},
            {"loser", pair.loser},       {"gold_margin", pair.gold_margin},
            {"is_noisy", pair.is_noisy},
        };
        out << line.dump() << '\n';
    }
}

void write_pairs_jsonl(const PreferenceDataset& dataset,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open " + path.string() + " for writing");
    }
    write_pairs_jsonl(dataset, out);
    if (!out) {
        throw ParseError("failed writing " + path.string());
    }
}

PreferenceDataset read_pairs_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    PreferenceDataset dataset;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        try {
            LabeledPair pair;
            pair.prompt = j.at("prompt").get<int>();
            pair.winner = j.at("winner").get<int>();
            pair.loser = j.at("loser").get<int>();
            pair.gold_margin = j.at("gold_margin").get<double>();
            pair.is_noisy = j.at("is_noisy").get<bool>();
            dataset.pairs.push_back(pair);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad pair record: ") + e.what(), line_no);
        }
    }
    if (dataset.pairs.empty()) {
        throw ParseError("no pairs in " + path.string());
    }
    return dataset;
}

} // namespace prefnoise
