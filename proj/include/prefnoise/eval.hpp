#pragma once

#include <cstdint>
#include <span>

#include "prefnoise/policy.hpp"
#include "prefnoise/world.hpp"

namespace prefnoise {

struct WinRateResult {
    double win_rate = 0.0; // (wins + 0.5 * ties) / n_prompts
    int n_prompts = 0;
    int wins = 0;
    int ties = 0;
    int losses = 0;
};

struct WinRateOptions {
    double temperature = 0.7;
    bool greedy = false; // argmax decoding instead of temperature sampling
};

// Samples one candidate per prompt from each policy and compares gold
// rewards. A strict win counts 1, a tie (same candidate, or equal rewards)
// counts 0.5. Each policy draws from its own per-prompt stream derived from
// its seed, so win_rate(a, b, sa, sb) and win_rate(b, a, sb, sa) see the
// same draws and sum to 1.
WinRateResult win_rate(const World& world, const PolicyParams& params_a,
                       const PolicyParams& params_b, std::span<const int> prompts,
                       std::uint64_t seed_a, std::uint64_t seed_b,
                       const WinRateOptions& options = {});

// Exact KL divergence between two distributions over the same finite set.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Mean over prompts of KL(pi_params(.|x) || pi_sft(.|x)), the regularizer of
// the alignment objective, computed exactly over each candidate set.
double kl_diagnostic(const World& world, const PolicyParams& params,
                     const PolicyParams& sft_params, std::span<const int> prompts);

struct AggregateResult {
    double mean = 0.0;
    double ci_half_width = 0.0;
    int n_runs = 0;
    double confidence_level = 0.95;
};

// Sample mean and two-tailed Student-t confidence half-width.
AggregateResult aggregate(std::span<const double> values, double confidence_level = 0.95);

// Two-tailed critical value t such that P(|T_df| <= t) = confidence_level.
double t_critical(int degrees_of_freedom, double confidence_level);

} // namespace prefnoise
