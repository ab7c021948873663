#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace prefnoise {

struct WorldConfig {
    int embedding_dim = 16;
    int n_train_prompts = 256;
    int n_test_prompts = 128;
    int k_candidates = 16;
    std::uint64_t seed = 0;

    // Throws ConfigError on non-positive counts or k_candidates < 2.
    void validate() const;
};

// The synthetic environment: prompt and candidate embeddings plus the exact
// gold reward table every oracle, filter and evaluation consults. Immutable
// after construction and safe to share across threads.
class World {
public:
    int embedding_dim() const { return embedding_dim_; }
    int n_prompts() const { return n_prompts_; }
    int n_train() const { return static_cast<int>(train_prompts_.size()); }
    int n_test() const { return static_cast<int>(test_prompts_.size()); }
    int k_candidates() const { return k_candidates_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const double> prompt_embedding(int x) const;
    std::span<const double> candidate_embedding(int x, int y) const;

    // Standardized gold reward r*(x, y). Pure lookup; out-of-range indices
    // are a usage error.
    double gold_reward(int x, int y) const;

    // All k candidate rewards for one prompt.
    std::span<const double> gold_rewards(int x) const;

    std::span<const int> train_prompts() const { return train_prompts_; }
    std::span<const int> test_prompts() const { return test_prompts_; }

    // Dimensions, seed and reward-distribution quantiles, for run manifests.
    nlohmann::json summary() const;

private:
    friend World build_world(const WorldConfig& config);

    void check_prompt(int x) const;

    int embedding_dim_ = 0;
    int n_prompts_ = 0;
    int k_candidates_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> prompt_embeddings_;    // n_prompts x d
    std::vector<double> candidate_embeddings_; // n_prompts x k x d
    std::vector<double> gold_rewards_;         // n_prompts x k
    std::vector<int> train_prompts_;
    std::vector<int> test_prompts_;
};

// Builds the world deterministically from the config: embeddings are
// standard normal scaled by 1/sqrt(d), the raw reward is the bilinear form
// u_x' M v_{x,y} with a fixed seeded matrix M, and the reward table is
// standardized to mean 0, std 1 over all cells.
World build_world(const WorldConfig& config);

} // namespace prefnoise
