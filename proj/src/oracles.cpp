#include "prefnoise/oracles.hpp"

#include "prefnoise/common.hpp"

#include <cmath>
#include <string>

namespace prefnoise {

const char* family_name(NoiseFamily family) {
    switch (family) {
    case NoiseFamily::Random: return "random";
    case NoiseFamily::Stochastic: return "stochastic";
    case NoiseFamily::Gaussian: return "gaussian";
    }
    return "unknown";
}

NoiseFamily family_from_string(const std::string& name) {
    if (name == "random") return NoiseFamily::Random;
    if (name == "stochastic") return NoiseFamily::Stochastic;
    if (name == "gaussian") return NoiseFamily::Gaussian;
    throw ConfigError("unknown noise family: " + name);
}

NoiseSpec NoiseSpec::random_noise(double n) {
    NoiseSpec spec{NoiseFamily::Random, n};
    spec.validate();
    return spec;
}

NoiseSpec NoiseSpec::stochastic(double gamma) {
    NoiseSpec spec{NoiseFamily::Stochastic, gamma};
    spec.validate();
    return spec;
}

NoiseSpec NoiseSpec::gaussian(double delta) {
    NoiseSpec spec{NoiseFamily::Gaussian, delta};
    spec.validate();
    return spec;
}

void NoiseSpec::validate() const {
    if (!std::isfinite(value)) {
        throw ConfigError("noise hyperparameter must be finite");
    }
    if (family == NoiseFamily::Random) {
        // Beyond 0.5 the labels are anti-correlated with the gold reward.
        if (value < 0.0 || value > 0.5) {
            throw ConfigError("random noise rate must be in [0, 0.5]");
        }
    } else if (value < 0.0) {
        throw ConfigError("noise hyperparameter must be non-negative");
    }
}

nlohmann::json NoiseSpec::to_json() const {
    return nlohmann::json{{"family", family_name(family)}, {"value", value}};
}

NoiseSpec NoiseSpec::from_json(const nlohmann::json& j) {
    NoiseSpec spec;
    spec.family = family_from_string(j.at("family").get<std::string>());
    spec.value = j.at("value").get<double>();
    spec.validate();
    return spec;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

OracleLabel label_pair(const NoiseSpec& spec, int a, double r_a, int b, double r_b,
                       Rng& rng) {
    spec.validate();
    if (a == b) {
        throw UsageError("label_pair requires two distinct candidates");
    }
    if (!std::isfinite(r_a) || !std::isfinite(r_b)) {
        throw UsageError("label_pair requires finite rewards");
    }

    bool a_wins;
    switch (spec.family) {
    case NoiseFamily::Random: {
        bool gold_a = r_a != r_b ? r_a > r_b : rng.coin();
        a_wins = rng.uniform01() < spec.value ? !gold_a : gold_a;
        break;
    }
    case NoiseFamily::Stochastic: {
        if (spec.value == 0.0) {
            a_wins = r_a != r_b ? r_a > r_b : rng.coin();
        } else {
            a_wins = rng.uniform01() < sigmoid((r_a - r_b) / spec.value);
        }
        break;
    }
    case NoiseFamily::Gaussian:
    default: {
        if (spec.value == 0.0) {
            a_wins = r_a != r_b ? r_a > r_b : rng.coin();
        } else {
            // eps_w - eps_l ~ N(0, 2 delta^2); mu cancels.
            const double eps = rng.normal() * spec.value * std::sqrt(2.0);
            const double margin = (r_a - r_b) + eps;
            a_wins = margin != 0.0 ? margin > 0.0 : rng.coin();
        }
        break;
    }
    }
    return a_wins ? OracleLabel{a, b} : OracleLabel{b, a};
}

double flip_probability(const NoiseSpec& spec, double r_a, double r_b) {
    spec.validate();
    const double gap = std::fabs(r_a - r_b);
    switch (spec.family) {
    case NoiseFamily::Random:
        return spec.value;
    case NoiseFamily::Stochastic:
        return spec.value == 0.0 ? 0.0 : sigmoid(-gap / spec.value);
    case NoiseFamily::Gaussian:
    default:
        return spec.value == 0.0 ? 0.0
                                 : normal_cdf(-gap / (std::sqrt(2.0) * spec.value));
    }
}

double expected_noise_rate(const NoiseSpec& spec,
                           std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) {
        throw UsageError("expected_noise_rate requires a non-empty pair list");
    }
    double acc = 0.0;
    for (const auto& [r_a, r_b] : pairs) {
        acc += flip_probability(spec, r_a, r_b);
    }
    return acc / static_cast<double>(pairs.size());
}

double calibrate(NoiseFamily family, double target_rate,
                 std::span<const std::pair<double, double>> pairs, double step) {
    if (!(target_rate >= 0.0 && target_rate <= 0.5)) {
        throw UsageError("calibration target rate must be in [0, 0.5]");
    }
    if (!(step > 0.0)) {
        throw UsageError("calibration step must be positive");
    }
    if (family == NoiseFamily::Random) {
        return target_rate;
    }
    if (target_rate == 0.0) {
        return 0.0;
    }
    if (pairs.empty()) {
        throw UsageError("calibration requires a non-empty pair sample");
    }

    // Linear scan from the first grid point; the flip probability is
    // monotone in the hyperparameter and approaches 0.5 from below, so the
    // scan terminates for any target <= 0.5 unless the target is
    // unreachable on this sample (all-tied pairs aside, it is not).
    NoiseSpec spec;
    spec.family = family;
    for (long i = 1;; ++i) {
        spec.value = step * static_cast<double>(i);
        if (expected_noise_rate(spec, pairs) >= target_rate) {
            return spec.value;
        }
        if (spec.value > 1e7) {
            throw UsageError("calibration did not reach the target rate");
        }
    }
}

} // namespace prefnoise
