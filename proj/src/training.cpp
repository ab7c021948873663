#include "prefnoise/training.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/eval.hpp"
#include "prefnoise/kernels.hpp"
#include "prefnoise/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace prefnoise {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kSampleTemperature = 0.7; // pipeline sampling temperature
constexpr std::uint64_t kDpoStream = 0x64706fULL; // "dpo"

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr) {
        ++t;
        const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
        const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
        kernels::adam_update(params.data(), grad.data(), m.data(), v.data(),
                             params.size(), lr, kAdamBeta1, kAdamBeta2, kAdamEps, bias1,
                             bias2);
    }
};

// Scores one candidate and keeps its activations for the backward pass.
// shared_pre must hold W_u u + b for the pair's prompt; the workspace factors
// and readout must already reflect the example's dropout mask.
double score_candidate(const PolicyParams& params, const World& world, int x, int y,
                       PolicyWorkspace& ws, int slot) {
    const int d = params.embedding_dim();
    const int h = params.hidden_width();
    const auto v = world.candidate_embedding(x, y);
    double* act = ws.activations.data() + static_cast<std::size_t>(slot) * h;
    for (int i = 0; i < h; ++i) {
        const double pre =
            ws.shared_pre[static_cast<std::size_t>(i)] +
            kernels::dot(params.w1_row(i) + d, v.data(), static_cast<std::size_t>(d));
        act[i] = std::tanh(pre);
    }
    return kernels::dot(ws.readout.data(), act, static_cast<std::size_t>(h)) +
           params.b_out();
}

void fill_shared_pre(const PolicyParams& params, const World& world, int x,
                     PolicyWorkspace& ws) {
    const int d = params.embedding_dim();
    const int h = params.hidden_width();
    ws.shared_pre.resize(static_cast<std::size_t>(h));
    const auto u = world.prompt_embedding(x);
    kernels::matvec(params.w1_row(0), static_cast<std::size_t>(h),
                    static_cast<std::size_t>(d), static_cast<std::size_t>(2 * d), u.data(),
                    ws.shared_pre.data());
    const double* b1 = params.b1();
    for (int i = 0; i < h; ++i) {
        ws.shared_pre[static_cast<std::size_t>(i)] += b1[i];
    }
}

void fill_factors(const PolicyParams& params, const DropoutMask* mask,
                  PolicyWorkspace& ws) {
    const int h = params.hidden_width();
    ws.factors.resize(static_cast<std::size_t>(h));
    ws.readout.resize(static_cast<std::size_t>(h));
    ws.activations.resize(2 * static_cast<std::size_t>(h));
    if (mask != nullptr) {
        if (static_cast<int>(mask->keep.size()) != h) {
            throw UsageError("dropout mask size does not match hidden width");
        }
        const double inv_keep = 1.0 / (1.0 - mask->rate);
        for (int i = 0; i < h; ++i) {
            ws.factors[static_cast<std::size_t>(i)] =
                mask->keep[static_cast<std::size_t>(i)] != 0 ? inv_keep : 0.0;
        }
    } else {
        std::fill(ws.factors.begin(), ws.factors.end(), 1.0);
    }
    const double* w_out = params.w_out();
    for (int i = 0; i < h; ++i) {
        ws.readout[static_cast<std::size_t>(i)] =
            w_out[i] * ws.factors[static_cast<std::size_t>(i)];
    }
}

// Pair margin under the trained policy minus the frozen reference margin.
// The per-prompt logsumexp terms cancel between winner and loser, so only
// the two scores are needed.
double pair_margin(const PolicyParams& params, const World& world,
                   const LabeledPair& pair, const DropoutMask* mask, double sft_margin,
                   PolicyWorkspace& ws) {
    fill_factors(params, mask, ws);
    fill_shared_pre(params, world, pair.prompt, ws);
    const double s_w = score_candidate(params, world, pair.prompt, pair.winner, ws, 0);
    const double s_l = score_candidate(params, world, pair.prompt, pair.loser, ws, 1);
    return (s_w - s_l) - sft_margin;
}

double sft_pair_margin(const PolicyParams& sft_params, const World& world,
                       const LabeledPair& pair, PolicyWorkspace& ws) {
    fill_factors(sft_params, nullptr, ws);
    fill_shared_pre(sft_params, world, pair.prompt, ws);
    const double s_w =
        score_candidate(sft_params, world, pair.prompt, pair.winner, ws, 0);
    const double s_l = score_candidate(sft_params, world, pair.prompt, pair.loser, ws, 1);
    return s_w - s_l;
}

void check_masks(std::span<const LabeledPair> batch, std::span<const DropoutMask> masks) {
    if (!masks.empty() && masks.size() != batch.size()) {
        throw UsageError("need one dropout mask per batch entry (or none)");
    }
}

void check_dims(const PolicyParams& params, const World& world) {
    if (params.embedding_dim() != world.embedding_dim()) {
        throw UsageError("policy embedding dim does not match world");
    }
}

} // namespace

void SftConfig::validate() const {
    if (!(demo_temperature > 0.0)) {
        throw ConfigError("sft.demo_temperature must be positive");
    }
    if (epochs <= 0) {
        throw ConfigError("sft.epochs must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("sft.learning_rate must be positive");
    }
}

void DpoConfig::validate() const {
    if (!(beta > 0.0)) {
        throw ConfigError("dpo.beta must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("dpo.learning_rate must be positive");
    }
    if (epochs < 0) {
        throw ConfigError("dpo.epochs must be non-negative");
    }
    if (batch_size <= 0) {
        throw ConfigError("dpo.batch_size must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("dpo.dropout_rate must be in [0, 1)");
    }
}

double neg_log_sigmoid(double z) {
    // softplus(-z) = max(0, -z) + log1p(exp(-|z|))
    return std::max(0.0, -z) + std::log1p(std::exp(-std::fabs(z)));
}

SftResult train_sft(const World& world, const PolicyConfig& policy_config,
                    const SftConfig& config) {
    policy_config.validate();
    config.validate();

    PolicyParams params = PolicyParams::random_init(policy_config, world.embedding_dim());
    const auto prompts = world.train_prompts();
    const auto n = static_cast<double>(prompts.size());
    const int k = world.k_candidates();

    // Distillation targets: Boltzmann of the gold rewards.
    std::vector<std::vector<double>> targets;
    targets.reserve(prompts.size());
    for (const int x : prompts) {
        const auto rewards = world.gold_rewards(x);
        std::vector<double> target(rewards.begin(), rewards.end());
        softmax_inplace(target, config.demo_temperature);
        targets.push_back(std::move(target));
    }

    AdamState adam(params.size());
    std::vector<double> grad(params.size(), 0.0);
    PolicyWorkspace ws;
    double loss = 0.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        loss = 0.0;
        for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
            const int x = prompts[pi];
            forward_prompt(params, world, x, nullptr, ws);
            const double lse = logsumexp(ws.logits);
            ws.probs = ws.logits;
            softmax_inplace(ws.probs);
            const std::vector<double>& q = targets[pi];
            const int h = params.hidden_width();
            for (int y = 0; y < k; ++y) {
                const auto yi = static_cast<std::size_t>(y);
                loss -= q[yi] * (ws.logits[yi] - lse);
                const double coeff = (ws.probs[yi] - q[yi]) / n;
                const double* act = ws.activations.data() + yi * static_cast<std::size_t>(h);
                accumulate_score_grad(params, world, x, y, act, ws.factors.data(), coeff,
                                      grad.data());
            }
        }
        loss /= n;
        if (!std::isfinite(loss)) {
            throw DivergenceError("sft loss diverged at epoch " + std::to_string(epoch));
        }
        adam.step(params.flat(), grad, config.learning_rate);
    }

    SftResult result{std::move(params), 0.0, 0.0};

    // Final diagnostics: cross entropy and the exact expected sampled reward.
    double final_ce = 0.0;
    double mean_reward = 0.0;
    for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
        const int x = prompts[pi];
        forward_prompt(result.params, world, x, nullptr, ws);
        const double lse = logsumexp(ws.logits);
        ws.probs = ws.logits;
        softmax_inplace(ws.probs, kSampleTemperature);
        const auto rewards = world.gold_rewards(x);
        const std::vector<double>& q = targets[pi];
        for (int y = 0; y < k; ++y) {
            const auto yi = static_cast<std::size_t>(y);
            final_ce -= q[yi] * (ws.logits[yi] - lse);
            mean_reward += ws.probs[yi] * rewards[yi];
        }
    }
    result.final_cross_entropy = final_ce / n;
    result.mean_policy_reward = mean_reward / n;
    return result;
}

double dpo_loss(const PolicyParams& params, const PolicyParams& sft_params,
                std::span<const LabeledPair> batch, double beta, const World& world,
                std::span<const DropoutMask> masks) {
    if (batch.empty()) {
        throw UsageError("dpo_loss requires a non-empty batch");
    }
    if (!(beta > 0.0)) {
        throw UsageError("beta must be positive");
    }
    check_masks(batch, masks);
    check_dims(params, world);
    check_dims(sft_params, world);
    if (!params.all_finite()) {
        throw DivergenceError("non-finite policy parameters");
    }

    PolicyWorkspace ws;
    PolicyWorkspace sft_ws;
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const DropoutMask* mask = masks.empty() ? nullptr : &masks[i];
        const double sft_margin = sft_pair_margin(sft_params, world, batch[i], sft_ws);
        const double margin = pair_margin(params, world, batch[i], mask, sft_margin, ws);
        total += neg_log_sigmoid(beta * margin);
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& sft_params,
                             std::span<const LabeledPair> batch, double beta,
                             const World& world, std::span<const DropoutMask> masks) {
    if (batch.empty()) {
        throw UsageError("dpo_grad requires a non-empty batch");
    }
    if (!(beta > 0.0)) {
        throw UsageError("beta must be positive");
    }
    check_masks(batch, masks);
    check_dims(params, world);
    check_dims(sft_params, world);

    std::vector<double> grad(params.size(), 0.0);
    PolicyWorkspace ws;
    PolicyWorkspace sft_ws;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LabeledPair& pair = batch[i];
        const DropoutMask* mask = masks.empty() ? nullptr : &masks[i];
        const double sft_margin = sft_pair_margin(sft_params, world, pair, sft_ws);
        const double margin = pair_margin(params, world, pair, mask, sft_margin, ws);
        // grad log pi(w) - grad log pi(l) reduces to the score-grad
        // difference; the softmax terms share the prompt and cancel.
        const double coeff = -beta * sigmoid(-beta * margin) * inv_batch;
        const int h = params.hidden_width();
        accumulate_score_grad(params, world, pair.prompt, pair.winner,
                              ws.activations.data(), ws.factors.data(), coeff,
                              grad.data());
        accumulate_score_grad(params, world, pair.prompt, pair.loser,
                              ws.activations.data() + h, ws.factors.data(), -coeff,
                              grad.data());
    }
    return grad;
}

DpoResult train_dpo(const World& world, const PolicyParams& sft_params,
                    const PreferenceDataset& dataset, const DpoConfig& config) {
    config.validate();
    check_dims(sft_params, world);
    if (dataset.pairs.empty()) {
        throw UsageError("train_dpo requires a non-empty dataset");
    }

    DpoResult result{sft_params, {}};
    if (config.epochs == 0) {
        return result;
    }

    PolicyParams& params = result.params;
    const std::size_t n = dataset.pairs.size();
    const int h = params.hidden_width();

    // Reference margins are fixed; compute them once in inference mode.
    std::vector<double> sft_margins(n);
    {
        PolicyWorkspace ws;
        for (std::size_t i = 0; i < n; ++i) {
            sft_margins[i] = sft_pair_margin(sft_params, world, dataset.pairs[i], ws);
        }
    }

    Rng rng(mix_seed(config.seed, kDpoStream));
    AdamState adam(params.size());
    std::vector<double> grad(params.size(), 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    PolicyWorkspace ws;
    DropoutMask mask;
    const bool use_dropout = config.dropout_rate > 0.0;

    result.log.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t i = order[bi];
                const LabeledPair& pair = dataset.pairs[i];
                const DropoutMask* mask_ptr = nullptr;
                if (use_dropout) {
                    mask = sample_dropout_mask(h, config.dropout_rate, rng);
                    mask_ptr = &mask;
                }
                const double margin =
                    pair_margin(params, world, pair, mask_ptr, sft_margins[i], ws);
                const double z = config.beta * margin;
                batch_loss += neg_log_sigmoid(z);
                const double coeff = -config.beta * sigmoid(-z) * inv_batch;
                accumulate_score_grad(params, world, pair.prompt, pair.winner,
                                      ws.activations.data(), ws.factors.data(), coeff,
                                      grad.data());
                accumulate_score_grad(params, world, pair.prompt, pair.loser,
                                      ws.activations.data() + h, ws.factors.data(),
                                      -coeff, grad.data());
            }
            if (!std::isfinite(batch_loss)) {
                throw DivergenceError("dpo loss diverged at epoch " +
                                      std::to_string(epoch));
            }
            epoch_loss += batch_loss;
            adam.step(params.flat(), grad, config.learning_rate);
        }
        EpochLog log_entry;
        log_entry.epoch = epoch;
        log_entry.loss = epoch_loss / static_cast<double>(n);
        if (config.log_kl) {
            log_entry.kl = kl_diagnostic(world, params, sft_params, world.train_prompts());
        }
        result.log.push_back(log_entry);
    }
    return result;
}

} // namespace prefnoise
