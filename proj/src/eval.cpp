#include "prefnoise/eval.hpp"

#include "prefnoise/common.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <vector>

namespace prefnoise {

namespace {

constexpr std::uint64_t kEvalStream = 0x6577696eULL; // "ewin"

int draw_candidate(const PolicyParams& params, const World& world, int x,
                   const WinRateOptions& options, std::uint64_t seed) {
    if (options.greedy) {
        return argmax_candidate(params, world, x);
    }
    Rng rng(mix_seed(seed, kEvalStream, static_cast<std::uint64_t>(x)));
    return sample(params, world, x, options.temperature, rng);
}

} // namespace

WinRateResult win_rate(const World& world, const PolicyParams& params_a,
                       const PolicyParams& params_b, std::span<const int> prompts,
                       std::uint64_t seed_a, std::uint64_t seed_b,
                       const WinRateOptions& options) {
    if (prompts.empty()) {
        throw UsageError("win_rate requires a non-empty prompt set");
    }
    if (!options.greedy && !(options.temperature > 0.0)) {
        throw UsageError("temperature must be positive");
    }

    WinRateResult result;
    result.n_prompts = static_cast<int>(prompts.size());
    for (const int x : prompts) {
        const int y_a = draw_candidate(params_a, world, x, options, seed_a);
        const int y_b = draw_candidate(params_b, world, x, options, seed_b);
        if (y_a == y_b) {
            ++result.ties;
            continue;
        }
        const double r_a = world.gold_reward(x, y_a);
        const double r_b = world.gold_reward(x, y_b);
        if (r_a > r_b) {
            ++result.wins;
        } else if (r_a < r_b) {
            ++result.losses;
        } else {
            ++result.ties; // distinct candidates, equal reward
        }
    }
    result.win_rate = (static_cast<double>(result.wins) + 0.5 * result.ties) /
                      static_cast<double>(result.n_prompts);
    return result;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) {
        throw UsageError("kl_divergence requires two equal-length distributions");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            acc += p[i] * (std::log(p[i]) - std::log(q[i]));
        }
    }
    return acc;
}

double kl_diagnostic(const World& world, const PolicyParams& params,
                     const PolicyParams& sft_params, std::span<const int> prompts) {
    if (prompts.empty()) {
        throw UsageError("kl_diagnostic requires a non-empty prompt set");
    }
    PolicyWorkspace ws_p;
    PolicyWorkspace ws_q;
    double acc = 0.0;
    for (const int x : prompts) {
        forward_prompt(params, world, x, nullptr, ws_p);
        forward_prompt(sft_params, world, x, nullptr, ws_q);
        ws_p.probs = ws_p.logits;
        softmax_inplace(ws_p.probs);
        ws_q.probs = ws_q.logits;
        softmax_inplace(ws_q.probs);
        acc += kl_divergence(ws_p.probs, ws_q.probs);
    }
    return acc / static_cast<double>(prompts.size());
}

double t_critical(int degrees_of_freedom, double confidence_level) {
    if (degrees_of_freedom < 1) {
        throw UsageError("t_critical requires at least one degree of freedom");
    }
    if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
        throw UsageError("confidence level must be in (0, 1)");
    }
    const boost::math::students_t dist(static_cast<double>(degrees_of_freedom));
    return boost::math::quantile(dist, 0.5 + confidence_level / 2.0);
}

AggregateResult aggregate(std::span<const double> values, double confidence_level) {
    if (values.size() < 2) {
        throw UsageError("aggregate requires at least two values");
    }
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (const double v : values) {
        mean += v;
    }
    mean /= n;
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sample_std = std::sqrt(ss / (n - 1.0));

    AggregateResult result;
    result.mean = mean;
    result.n_runs = static_cast<int>(values.size());
    result.confidence_level = confidence_level;
    result.ci_half_width =
        t_critical(result.n_runs - 1, confidence_level) * sample_std / std::sqrt(n);
    return result;
}

} // namespace prefnoise
