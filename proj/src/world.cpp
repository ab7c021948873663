#include "prefnoise/world.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/kernels.hpp"
#include "prefnoise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace prefnoise {

void WorldConfig::validate() const {
    if (embedding_dim <= 0) {
        throw ConfigError("world.embedding_dim must be positive");
    }
    if (n_train_prompts <= 0 || n_test_prompts <= 0) {
        throw ConfigError("world prompt counts must be positive");
    }
    if (k_candidates < 2) {
        throw ConfigError("world.k_candidates must be at least 2");
    }
}

std::span<const double> World::prompt_embedding(int x) const {
    check_prompt(x);
    return {prompt_embeddings_.data() + static_cast<std::size_t>(x) * embedding_dim_,
            static_cast<std::size_t>(embedding_dim_)};
}

std::span<const double> World::candidate_embedding(int x, int y) const {
    check_prompt(x);
    if (y < 0 || y >= k_candidates_) {
        throw UsageError("candidate index out of range: " + std::to_string(y));
    }
    const std::size_t offset =
        (static_cast<std::size_t>(x) * k_candidates_ + y) * embedding_dim_;
    return {candidate_embeddings_.data() + offset, static_cast<std::size_t>(embedding_dim_)};
}

double World::gold_reward(int x, int y) const {
    check_prompt(x);
    if (y < 0 || y >= k_candidates_) {
        throw UsageError("candidate index out of range: " + std::to_string(y));
    }
    return gold_rewards_[static_cast<std::size_t>(x) * k_candidates_ + y];
}

std::span<const double> World::gold_rewards(int x) const {
    check_prompt(x);
    return {gold_rewards_.data() + static_cast<std::size_t>(x) * k_candidates_,
            static_cast<std::size_t>(k_candidates_)};
}

void World::check_prompt(int x) const {
    if (x < 0 || x >= n_prompts_) {
        throw UsageError("prompt index out of range: " + std::to_string(x));
    }
}

nlohmann::json World::summary() const {
    std::vector<double> sorted = gold_rewards_;
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    };
    const double mean = kernels::sum(gold_rewards_.data(), gold_rewards_.size()) /
                        static_cast<double>(gold_rewards_.size());
    return nlohmann::json{
        {"embedding_dim", embedding_dim_},
        {"n_train_prompts", n_train()},
        {"n_test_prompts", n_test()},
        {"k_candidates", k_candidates_},
        {"seed", seed_},
        {"reward",
         {{"mean", mean},
          {"min", sorted.front()},
          {"p25", quantile(0.25)},
          {"p50", quantile(0.50)},
          {"p75", quantile(0.75)},
          {"max", sorted.back()}}},
    };
}

World build_world(const WorldConfig& config) {
    config.validate();

    World world;
    world.embedding_dim_ = config.embedding_dim;
    world.n_prompts_ = config.n_train_prompts + config.n_test_prompts;
    world.k_candidates_ = config.k_candidates;
    world.seed_ = config.seed;

    const auto d = static_cast<std::size_t>(config.embedding_dim);
    const auto n = static_cast<std::size_t>(world.n_prompts_);
    const auto k = static_cast<std::size_t>(config.k_candidates);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    constexpr std::uint64_t kWorldStream = 0x776f726c64ULL; // "world"
    Rng rng(mix_seed(config.seed, kWorldStream));

    world.prompt_embeddings_.resize(n * d);
    for (double& value : world.prompt_embeddings_) {
        value = rng.normal() * scale;
    }
    world.candidate_embeddings_.resize(n * k * d);
    for (double& value : world.candidate_embeddings_) {
        value = rng.normal() * scale;
    }

    // Fixed bilinear reward matrix; its scale washes out in standardization.
    std::vector<double> m(d * d);
    for (double& value : m) {
        value = rng.normal();
    }

    world.gold_rewards_.resize(n * k);
    std::vector<double> mu(d);
    for (std::size_t x = 0; x < n; ++x) {
        const double* u = world.prompt_embeddings_.data() + x * d;
        // mu = M' u, so that r(x, y) = mu . v_{x,y}
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                acc += u[i] * m[i * d + j];
            }
            mu[j] = acc;
        }
        const double* v = world.candidate_embeddings_.data() + x * k * d;
        kernels::matvec(v, k, d, d, mu.data(), world.gold_rewards_.data() + x * k);
    }

    const auto cells = static_cast<double>(world.gold_rewards_.size());
    const double mean = kernels::sum(world.gold_rewards_.data(), world.gold_rewards_.size()) / cells;
    double var = 0.0;
    for (const double r : world.gold_rewards_) {
        var += (r - mean) * (r - mean);
    }
    var /= cells;
    const double std_dev = std::sqrt(var);
    if (!(std_dev > 0.0)) {
        throw ConfigError("degenerate gold reward table (zero variance)");
    }
    for (double& r : world.gold_rewards_) {
        r = (r - mean) / std_dev;
    }

    world.train_prompts_.resize(static_cast<std::size_t>(config.n_train_prompts));
    std::iota(world.train_prompts_.begin(), world.train_prompts_.end(), 0);
    world.test_prompts_.resize(static_cast<std::size_t>(config.n_test_prompts));
    std::iota(world.test_prompts_.begin(), world.test_prompts_.end(), config.n_train_prompts);

    return world;
}

} // namespace prefnoise
