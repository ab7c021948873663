#include "prefnoise/policy.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace prefnoise {

namespace {

constexpr char kMagic[8] = {'P', 'N', 'P', 'O', 'L', 'I', 'C', '1'};

void check_candidate(const World& world, int y) {
    if (y < 0 || y >= world.k_candidates()) {
        throw UsageError("candidate index out of range: " + std::to_string(y));
    }
}

void check_mask(const PolicyParams& params, const DropoutMask* mask) {
    if (mask == nullptr) {
        return;
    }
    if (static_cast<int>(mask->keep.size()) != params.hidden_width()) {
        throw UsageError("dropout mask size does not match hidden width");
    }
    if (!(mask->rate >= 0.0 && mask->rate < 1.0)) {
        throw UsageError("dropout rate must be in [0, 1)");
    }
}

} // namespace

void PolicyConfig::validate() const {
    if (hidden_width <= 0) {
        throw ConfigError("policy.hidden_width must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("policy.dropout_rate must be in [0, 1)");
    }
    if (!(init_scale > 0.0)) {
        throw ConfigError("policy.init_scale must be positive");
    }
}

PolicyParams::PolicyParams(int embedding_dim, int hidden_width)
    : embedding_dim_(embedding_dim),
      hidden_width_(hidden_width),
      values_(flat_size(embedding_dim, hidden_width), 0.0) {
    if (embedding_dim <= 0 || hidden_width <= 0) {
        throw ConfigError("policy dimensions must be positive");
    }
}

std::size_t PolicyParams::flat_size(int embedding_dim, int hidden_width) {
    const auto h = static_cast<std::size_t>(hidden_width);
    const auto d = static_cast<std::size_t>(embedding_dim);
    return h * 2 * d + h + h + 1;
}

PolicyParams PolicyParams::zeros(int embedding_dim, int hidden_width) {
    return PolicyParams(embedding_dim, hidden_width);
}

PolicyParams PolicyParams::random_init(const PolicyConfig& config, int embedding_dim) {
    config.validate();
    PolicyParams params(embedding_dim, config.hidden_width);
    constexpr std::uint64_t kInitStream = 0x696e6974ULL; // "init"
    Rng rng(mix_seed(config.seed, kInitStream));
    for (double& value : params.values_) {
        value = rng.normal() * config.init_scale;
    }
    params.init_seed_ = config.seed;
    return params;
}

bool PolicyParams::all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
}

std::uint64_t PolicyParams::fingerprint() const {
    std::uint64_t h = mix_seed(0x706f6c696379ULL, // "policy"
                               static_cast<std::uint64_t>(embedding_dim_),
                               static_cast<std::uint64_t>(hidden_width_));
    for (const double value : values_) {
        h = mix_seed(h, std::bit_cast<std::uint64_t>(value));
    }
    return h;
}

void PolicyParams::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot open " + path.string() + " for writing");
    }
    out.write(kMagic, sizeof(kMagic));
    const auto write_u32 = [&](std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    const auto write_u64 = [&](std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    write_u32(static_cast<std::uint32_t>(embedding_dim_));
    write_u32(static_cast<std::uint32_t>(hidden_width_));
    write_u64(init_seed_);
    write_u64(values_.size());
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
    if (!out) {
        throw ParseError("failed writing " + path.string());
    }
}

PolicyParams PolicyParams::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not a policy parameter file: " + path.string());
    }
    std::uint32_t d = 0;
    std::uint32_t h = 0;
    std::uint64_t seed = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof(d));
    in.read(reinterpret_cast<char*>(&h), sizeof(h));
    in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || d == 0 || h == 0 ||
        count != flat_size(static_cast<int>(d), static_cast<int>(h))) {
        throw ParseError("corrupt policy parameter header: " + path.string());
    }
    PolicyParams params(static_cast<int>(d), static_cast<int>(h));
    params.init_seed_ = seed;
    in.read(reinterpret_cast<char*>(params.values_.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) {
        throw ParseError("truncated policy parameter file: " + path.string());
    }
    return params;
}

DropoutMask sample_dropout_mask(int hidden_width, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw UsageError("dropout rate must be in [0, 1)");
    }
    DropoutMask mask;
    mask.rate = rate;
    mask.keep.resize(static_cast<std::size_t>(hidden_width));
    for (auto& bit : mask.keep) {
        bit = rng.uniform01() >= rate ? 1 : 0;
    }
    return mask;
}

double logsumexp(std::span<const double> values) {
    double max_value = -std::numeric_limits<double>::infinity();
    for (const double v : values) {
        max_value = std::max(max_value, v);
    }
    double acc = 0.0;
    for (const double v : values) {
        acc += std::exp(v - max_value);
    }
    return max_value + std::log(acc);
}

void softmax_inplace(std::span<double> values, double temperature) {
    if (!(temperature > 0.0)) {
        throw UsageError("temperature must be positive");
    }
    double max_value = -std::numeric_limits<double>::infinity();
    for (const double v : values) {
        max_value = std::max(max_value, v / temperature);
    }
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(v / temperature - max_value);
        total += v;
    }
    for (double& v : values) {
        v /= total;
    }
}

void forward_prompt(const PolicyParams& params, const World& world, int x,
                    const DropoutMask* mask, PolicyWorkspace& ws) {
    check_mask(params, mask);
    const int d = params.embedding_dim();
    const int h = params.hidden_width();
    const int k = world.k_candidates();
    if (world.embedding_dim() != d) {
        throw UsageError("policy embedding dim does not match world");
    }

    ws.shared_pre.resize(static_cast<std::size_t>(h));
    ws.activations.resize(static_cast<std::size_t>(k) * h);
    ws.logits.resize(static_cast<std::size_t>(k));
    ws.factors.resize(static_cast<std::size_t>(h));
    ws.readout.resize(static_cast<std::size_t>(h));

    const auto u = world.prompt_embedding(x);
    // The u-half of each W row is shared across the prompt's candidates.
    kernels::matvec(params.w1_row(0), static_cast<std::size_t>(h),
                    static_cast<std::size_t>(d), static_cast<std::size_t>(2 * d), u.data(),
                    ws.shared_pre.data());
    const double* b1 = params.b1();
    for (int i = 0; i < h; ++i) {
        ws.shared_pre[static_cast<std::size_t>(i)] += b1[i];
    }

    const double* w_out = params.w_out();
    if (mask != nullptr) {
        const double inv_keep = 1.0 / (1.0 - mask->rate);
        for (int i = 0; i < h; ++i) {
            ws.factors[static_cast<std::size_t>(i)] =
                mask->keep[static_cast<std::size_t>(i)] != 0 ? inv_keep : 0.0;
        }
    } else {
        std::fill(ws.factors.begin(), ws.factors.end(), 1.0);
    }
    for (int i = 0; i < h; ++i) {
        ws.readout[static_cast<std::size_t>(i)] = w_out[i] * ws.factors[static_cast<std::size_t>(i)];
    }

    for (int y = 0; y < k; ++y) {
        const auto v = world.candidate_embedding(x, y);
        double* act = ws.activations.data() + static_cast<std::size_t>(y) * h;
        for (int i = 0; i < h; ++i) {
            const double pre = ws.shared_pre[static_cast<std::size_t>(i)] +
                               kernels::dot(params.w1_row(i) + d, v.data(),
                                            static_cast<std::size_t>(d));
            act[i] = std::tanh(pre);
        }
        ws.logits[static_cast<std::size_t>(y)] =
            kernels::dot(ws.readout.data(), act, static_cast<std::size_t>(h)) +
            params.b_out();
    }
}

void accumulate_score_grad(const PolicyParams& params, const World& world, int x, int y,
                           const double* activations, const double* factors,
                           double coeff, double* grad) {
    const int d = params.embedding_dim();
    const int h = params.hidden_width();
    const auto u = world.prompt_embedding(x);
    const auto v = world.candidate_embedding(x, y);
    const double* w_out = params.w_out();

    const std::size_t w1_size = static_cast<std::size_t>(h) * 2 * d;
    double* g_w1 = grad;
    double* g_b1 = grad + w1_size;
    double* g_w_out = g_b1 + h;
    double* g_b_out = g_w_out + h;

    for (int i = 0; i < h; ++i) {
        const double act = activations[i];
        g_w_out[i] += coeff * act * factors[i];
        const double g_hidden = coeff * w_out[i] * factors[i] * (1.0 - act * act);
        if (g_hidden != 0.0) {
            double* row = g_w1 + static_cast<std::size_t>(i) * 2 * d;
            kernels::axpy(g_hidden, u.data(), row, static_cast<std::size_t>(d));
            kernels::axpy(g_hidden, v.data(), row + d, static_cast<std::size_t>(d));
            g_b1[i] += g_hidden;
        }
    }
    *g_b_out += coeff;
}

std::vector<double> logits(const PolicyParams& params, const World& world, int x,
                           const DropoutMask* mask) {
    PolicyWorkspace ws;
    forward_prompt(params, world, x, mask, ws);
    if (!std::all_of(ws.logits.begin(), ws.logits.end(),
                     [](double v) { return std::isfinite(v); })) {
        throw DivergenceError("non-finite policy logits (parameter blow-up)");
    }
    return ws.logits;
}

std::vector<double> log_probs(const PolicyParams& params, const World& world, int x) {
    std::vector<double> values = logits(params, world, x);
    const double lse = logsumexp(values);
    for (double& v : values) {
        v -= lse;
    }
    return values;
}

double log_prob(const PolicyParams& params, const World& world, int x, int y) {
    check_candidate(world, y);
    return log_probs(params, world, x)[static_cast<std::size_t>(y)];
}

int sample(const PolicyParams& params, const World& world, int x, double temperature,
           Rng& rng) {
    if (!(temperature > 0.0)) {
        throw UsageError("temperature must be positive");
    }
    std::vector<double> probs = logits(params, world, x);
    softmax_inplace(probs, temperature);
    const double u = rng.uniform01();
    double cumulative = 0.0;
    const int k = static_cast<int>(probs.size());
    for (int y = 0; y < k; ++y) {
        cumulative += probs[static_cast<std::size_t>(y)];
        if (u < cumulative) {
            return y;
        }
    }
    return k - 1;
}

int argmax_candidate(const PolicyParams& params, const World& world, int x) {
    const std::vector<double> values = logits(params, world, x);
    return static_cast<int>(std::max_element(values.begin(), values.end()) -
                            values.begin());
}

std::vector<double> grad_log_prob(const PolicyParams& params, const World& world, int x,
                                  int y, const DropoutMask* mask) {
    check_candidate(world, y);
    PolicyWorkspace ws;
    forward_prompt(params, world, x, mask, ws);
    ws.probs = ws.logits;
    softmax_inplace(ws.probs);

    std::vector<double> grad(params.size(), 0.0);
    const int k = world.k_candidates();
    const int h = params.hidden_width();
    for (int cand = 0; cand < k; ++cand) {
        const double coeff =
            (cand == y ? 1.0 : 0.0) - ws.probs[static_cast<std::size_t>(cand)];
        const double* act = ws.activations.data() + static_cast<std::size_t>(cand) * h;
        accumulate_score_grad(params, world, x, cand, act, ws.factors.data(), coeff,
                              grad.data());
    }
    return grad;
}

} // namespace prefnoise
