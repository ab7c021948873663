#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prefnoise/rng.hpp"
#include "prefnoise/world.hpp"

namespace prefnoise {

struct PolicyConfig {
    int hidden_width = 32;
    double dropout_rate = 0.1; // hidden-layer inverted dropout, training only
    double init_scale = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Weights of the one-hidden-layer tanh scorer. The score of candidate y for
// prompt x is
//   s(x, y) = w_out . (f * tanh(W [u_x; v_{x,y}] + b)) + b_out
// where f is the inverted-dropout factor (mask/(1-rate)) during training and
// 1 at inference. The softmax of the scores over a prompt's candidate set is
// the policy distribution. Parameters are a flat vector laid out as
// [W (H x 2d, row-major) | b (H) | w_out (H) | b_out].
class PolicyParams {
public:
    // Empty placeholder; any real use requires constructed dimensions.
    PolicyParams() = default;

    PolicyParams(int embedding_dim, int hidden_width);

    static PolicyParams zeros(int embedding_dim, int hidden_width);
    static PolicyParams random_init(const PolicyConfig& config, int embedding_dim);

    int embedding_dim() const { return embedding_dim_; }
    int hidden_width() const { return hidden_width_; }
    std::uint64_t init_seed() const { return init_seed_; }

    static std::size_t flat_size(int embedding_dim, int hidden_width);
    std::size_t size() const { return values_.size(); }
    std::span<double> flat() { return values_; }
    std::span<const double> flat() const { return values_; }

    const double* w1_row(int h) const {
        return values_.data() + static_cast<std::size_t>(h) * 2 * embedding_dim_;
    }
    const double* b1() const { return values_.data() + w1_size(); }
    const double* w_out() const { return values_.data() + w1_size() + hidden_width_; }
    double b_out() const { return values_.back(); }

    bool all_finite() const;

    // 64-bit content hash over dims and raw parameter bytes, for provenance.
    std::uint64_t fingerprint() const;

    // Binary save/load: header (magic, version, dims, seed, count) followed by
    // the flat doubles, little-endian. Exact round-trip.
    void save(const std::filesystem::path& path) const;
    static PolicyParams load(const std::filesystem::path& path);

private:
    std::size_t w1_size() const {
        return static_cast<std::size_t>(hidden_width_) * 2 * embedding_dim_;
    }

    int embedding_dim_ = 0;
    int hidden_width_ = 0;
    std::uint64_t init_seed_ = 0;
    std::vector<double> values_;
};

struct DropoutMask {
    std::vector<std::uint8_t> keep; // one entry per hidden unit
    double rate = 0.0;
};

DropoutMask sample_dropout_mask(int hidden_width, double rate, Rng& rng);

// Reusable buffers for per-prompt forward passes.
struct PolicyWorkspace {
    std::vector<double> shared_pre;  // H: W_u u + b, shared by all candidates
    std::vector<double> activations; // k x H unmasked tanh outputs
    std::vector<double> logits;      // k
    std::vector<double> probs;       // k
    std::vector<double> factors;     // H: dropout factor per unit (1 at inference)
    std::vector<double> readout;     // H: w_out[i] * factors[i]
};

// Scores for every candidate of prompt x. A null mask means inference mode
// (no masking, no rescale). Fills activations/logits; probs left untouched.
void forward_prompt(const PolicyParams& params, const World& world, int x,
                    const DropoutMask* mask, PolicyWorkspace& ws);

// grad += coeff * d score(x, y) / d params. `activations` is the H unmasked
// tanh vector produced for (x, y) by the matching forward pass and `factors`
// the dropout factor vector from the same pass.
void accumulate_score_grad(const PolicyParams& params, const World& world, int x, int y,
                           const double* activations, const double* factors,
                           double coeff, double* grad);

std::vector<double> logits(const PolicyParams& params, const World& world, int x,
                           const DropoutMask* mask = nullptr);

// log pi(y|x) for all candidates (inference mode): logits - logsumexp.
std::vector<double> log_probs(const PolicyParams& params, const World& world, int x);

double log_prob(const PolicyParams& params, const World& world, int x, int y);

// Draws a candidate with probability softmax(logits / temperature).
int sample(const PolicyParams& params, const World& world, int x, double temperature,
           Rng& rng);

// Lowest-index candidate with the maximal logit.
int argmax_candidate(const PolicyParams& params, const World& world, int x);

// Exact gradient of log pi(y|x) with respect to every parameter, under the
// same dropout mask as the forward pass.
std::vector<double> grad_log_prob(const PolicyParams& params, const World& world, int x,
                                  int y, const DropoutMask* mask = nullptr);

// log(sum(exp(v))) with max-shift.
double logsumexp(std::span<const double> values);

// In-place stable softmax of values / temperature.
void softmax_inplace(std::span<double> values, double temperature = 1.0);

} // namespace prefnoise
