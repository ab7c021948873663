#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prefnoise/datagen.hpp"
#include "prefnoise/policy.hpp"
#include "prefnoise/world.hpp"

namespace prefnoise {

struct SftConfig {
    double demo_temperature = 2.0; // Boltzmann temperature of the target
    int epochs = 200;
    double learning_rate = 1e-2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DpoConfig {
    double beta = 0.5;
    double learning_rate = 1e-3;
    int epochs = 50;
    int batch_size = 64;
    double dropout_rate = 0.1;
    std::uint64_t seed = 0;
    bool log_kl = true; // per-epoch KL diagnostic in the training log

    void validate() const;
};

struct SftResult {
    PolicyParams params;
    double final_cross_entropy = 0.0;
    // Exact expected gold reward of temperature-0.7 samples on train prompts.
    double mean_policy_reward = 0.0;
};

// Distills the reference policy: full-batch Adam on the cross entropy
// between the policy and softmax(r*(x, .) / demo_temperature) over train
// prompts. No dropout. Throws DivergenceError on non-finite loss.
SftResult train_sft(const World& world, const PolicyConfig& policy_config,
                    const SftConfig& config);

// Mean over the batch of -log sigmoid(beta * m) where m is the policy/sft
// log-probability-ratio margin between winner and loser. The reference
// log-probs are always inference mode; masks (one per batch entry, empty
// span for none) apply to the trained policy only.
double dpo_loss(const PolicyParams& params, const PolicyParams& sft_params,
                std::span<const LabeledPair> batch, double beta, const World& world,
                std::span<const DropoutMask> masks = {});

// Exact gradient of dpo_loss: per pair the coefficient -beta*sigmoid(-beta*m)
// applied to grad log pi(winner) - grad log pi(loser), averaged.
std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& sft_params,
                             std::span<const LabeledPair> batch, double beta,
                             const World& world,
                             std::span<const DropoutMask> masks = {});

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double kl = 0.0;
};

struct DpoResult {
    PolicyParams params;
    std::vector<EpochLog> log;
};

// DPO alignment: starts from the sft parameters and runs Adam over shuffled
// mini-batches with a fresh dropout mask per example per step.
DpoResult train_dpo(const World& world, const PolicyParams& sft_params,
                    const PreferenceDataset& dataset, const DpoConfig& config);

// -log sigmoid(z), computed stably.
double neg_log_sigmoid(double z);

} // namespace prefnoise
