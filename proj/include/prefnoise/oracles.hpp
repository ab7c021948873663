#pragma once

#include <span>
#include <utility>

#include "json.hpp"

#include "prefnoise/rng.hpp"

namespace prefnoise {

// The three noise oracle families.
//   Random:     flips the gold label with fixed probability n.
//   Stochastic: Boltzmann-rational, prefers a over b with probability
//               sigmoid((r_a - r_b) / gamma); aleatoric annotator noise.
//   Gaussian:   labels by corrupted rewards r + eps, eps ~ N(mu, delta^2)
//               per response, so the pair decision sees N(0, 2 delta^2)
//               margin noise; epistemic reward-model error.
enum class NoiseFamily { Random, Stochastic, Gaussian };

const char* family_name(NoiseFamily family);
NoiseFamily family_from_string(const std::string& name);

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::Random;
    double value = 0.0; // n, gamma, or delta
    // Gaussian location parameter. It cancels in the pairwise margin
    // (eps_w - eps_l ~ N(0, 2 delta^2) for any mu), so labeling never reads
    // it; kept so the cancellation is testable.
    double mu = 0.0;

    static NoiseSpec random_noise(double n);
    static NoiseSpec stochastic(double gamma);
    static NoiseSpec gaussian(double delta);

    void validate() const;

    nlohmann::json to_json() const;
    static NoiseSpec from_json(const nlohmann::json& j);
};

struct OracleLabel {
    int winner = -1;
    int loser = -1;
};

// Labels one pair of candidates (a with reward r_a, b with reward r_b).
// Exact ties r_a == r_b break the gold direction uniformly at random.
OracleLabel label_pair(const NoiseSpec& spec, int a, double r_a, int b, double r_b,
                       Rng& rng);

// Probability that label_pair disagrees with the gold order:
//   Random     -> n
//   Stochastic -> sigmoid(-|dr| / gamma), 0 when gamma == 0
//   Gaussian   -> Phi(-|dr| / (sqrt(2) delta)), 0 when delta == 0
double flip_probability(const NoiseSpec& spec, double r_a, double r_b);

// Mean of flip_probability over a sample of reward pairs; the analytic
// quantity the calibration scan drives to the target rate.
double expected_noise_rate(const NoiseSpec& spec,
                           std::span<const std::pair<double, double>> pairs);

// Grid-scans the family hyperparameter upward from `step` in increments of
// `step` and returns the smallest value whose expected noise rate on the
// sample reaches target_rate. Random is the identity (n = target).
double calibrate(NoiseFamily family, double target_rate,
                 std::span<const std::pair<double, double>> pairs, double step = 0.01);

// Numerically stable sigmoid and standard normal CDF.
double sigmoid(double x);
double normal_cdf(double x);

} // namespace prefnoise
