#include "prefnoise/harness.hpp"

#include "prefnoise/common.hpp"

#include <fstream>
#include <string_view>

namespace prefnoise {

namespace {

constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

void reject_unknown_keys(const nlohmann::json& j, std::string_view section,
                         std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
        throw ConfigError(std::string(section) + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const auto& a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + key + "' in " + std::string(section));
        }
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
    }
}

nlohmann::json world_to_json(const WorldConfig& c) {
    return {{"embedding_dim", c.embedding_dim},
            {"n_train_prompts", c.n_train_prompts},
            {"n_test_prompts", c.n_test_prompts},
            {"k_candidates", c.k_candidates},
            {"seed", c.seed}};
}

WorldConfig world_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, "world",
                        {"embedding_dim", "n_train_prompts", "n_test_prompts",
                         "k_candidates", "seed"});
    WorldConfig c;
    c.embedding_dim = get_or(j, "embedding_dim", c.embedding_dim);
    c.n_train_prompts = get_or(j, "n_train_prompts", c.n_train_prompts);
    c.n_test_prompts = get_or(j, "n_test_prompts", c.n_test_prompts);
    c.k_candidates = get_or(j, "k_candidates", c.k_candidates);
    c.seed = get_or(j, "seed", c.seed);
    return c;
}

nlohmann::json policy_to_json(const PolicyConfig& c) {
    return {{"hidden_width", c.hidden_width},
            {"dropout_rate", c.dropout_rate},
            {"init_scale", c.init_scale},
            {"seed", c.seed}};
}

PolicyConfig policy_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, "policy", {"hidden_width", "dropout_rate", "init_scale", "seed"});
    PolicyConfig c;
    c.hidden_width = get_or(j, "hidden_width", c.hidden_width);
    c.dropout_rate = get_or(j, "dropout_rate", c.dropout_rate);
    c.init_scale = get_or(j, "init_scale", c.init_scale);
    c.seed = get_or(j, "seed", c.seed);
    return c;
}

nlohmann::json sft_to_json(const SftConfig& c) {
    return {{"demo_temperature", c.demo_temperature},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"seed", c.seed}};
}

SftConfig sft_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, "sft", {"demo_temperature", "epochs", "learning_rate", "seed"});
    SftConfig c;
    c.demo_temperature = get_or(j, "demo_temperature", c.demo_temperature);
    c.epochs = get_or(j, "epochs", c.epochs);
    c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
    c.seed = get_or(j, "seed", c.seed);
    return c;
}

nlohmann::json dpo_to_json(const DpoConfig& c) {
    return {{"beta", c.beta},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"dropout_rate", c.dropout_rate},
            {"seed", c.seed},
            {"log_kl", c.log_kl}};
}

DpoConfig dpo_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, "dpo",
                        {"beta", "learning_rate", "epochs", "batch_size", "dropout_rate",
                         "seed", "log_kl"});
    DpoConfig c;
    c.beta = get_or(j, "beta", c.beta);
    c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
    c.epochs = get_or(j, "epochs", c.epochs);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.dropout_rate = get_or(j, "dropout_rate", c.dropout_rate);
    c.seed = get_or(j, "seed", c.seed);
    c.log_kl = get_or(j, "log_kl", c.log_kl);
    return c;
}

} // namespace

void ExperimentConfig::validate() const {
    world.validate();
    policy.validate();
    sft.validate();
    dpo.validate();
    if (!(noise.target_rate >= 0.0 && noise.target_rate <= 0.5)) {
        throw ConfigError("noise.target_rate must be in [0, 0.5]");
    }
    if (!(datagen.temperature > 0.0) || !(eval.temperature > 0.0)) {
        throw ConfigError("sampling temperatures must be positive");
    }
    if (datagen.n_samples <= 0 || datagen.n_pairs <= 0 ||
        datagen.n_pairs * 2 > datagen.n_samples) {
        throw ConfigError("datagen requires n_pairs <= n_samples / 2");
    }
    if (filter.threshold && !(*filter.threshold >= 0.5 && *filter.threshold < 1.0)) {
        throw ConfigError("filter.threshold must be in [0.5, 1)");
    }
    for (const double t : filter.stats_thresholds) {
        if (!(t >= 0.5 && t < 1.0)) {
            throw ConfigError("filter.stats_thresholds must lie in [0.5, 1)");
        }
    }
    if (calibration_pairs <= 0) {
        throw ConfigError("calibration_pairs must be positive");
    }
    if (n_seeds < 2) {
        throw ConfigError("n_seeds must be at least 2 for confidence intervals");
    }
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json filter_json{
        {"threshold", filter.threshold ? nlohmann::json(*filter.threshold)
                                       : nlohmann::json(nullptr)},
        {"mode", confidence_mode_name(filter.mode)},
        {"stats_thresholds", filter.stats_thresholds},
    };
    return nlohmann::json{
        {"version", kSchemaVersion},
        {"world", world_to_json(world)},
        {"policy", policy_to_json(policy)},
        {"sft", sft_to_json(sft)},
        {"dpo", dpo_to_json(dpo)},
        {"noise",
         {{"family", family_name(noise.family)}, {"target_rate", noise.target_rate}}},
        {"datagen",
         {{"temperature", datagen.temperature},
          {"n_samples", datagen.n_samples},
          {"n_pairs", datagen.n_pairs}}},
        {"eval", {{"temperature", eval.temperature}, {"greedy", eval.greedy}}},
        {"filter", filter_json},
        {"calibration_pairs", calibration_pairs},
        {"n_seeds", n_seeds},
        {"seed", base_seed},
    };
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, "config",
                        {"version", "world", "policy", "sft", "dpo", "noise", "datagen",
                         "eval", "filter", "calibration_pairs", "n_seeds", "seed",
                         "sweep"});
    const int version = get_or(j, "version", kSchemaVersion);
    if (version != kSchemaVersion) {
        throw ConfigError("unsupported config schema version " + std::to_string(version));
    }

    ExperimentConfig c;
    if (j.contains("world")) c.world = world_from_json(j.at("world"));
    if (j.contains("policy")) c.policy = policy_from_json(j.at("policy"));
    if (j.contains("sft")) c.sft = sft_from_json(j.at("sft"));
    if (j.contains("dpo")) c.dpo = dpo_from_json(j.at("dpo"));
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        reject_unknown_keys(n, "noise", {"family", "target_rate"});
        c.noise.family = family_from_string(get_or<std::string>(n, "family", "random"));
        c.noise.target_rate = get_or(n, "target_rate", c.noise.target_rate);
    }
    if (j.contains("datagen")) {
        const auto& d = j.at("datagen");
        reject_unknown_keys(d, "datagen", {"temperature", "n_samples", "n_pairs"});
        c.datagen.temperature = get_or(d, "temperature", c.datagen.temperature);
        c.datagen.n_samples = get_or(d, "n_samples", c.datagen.n_samples);
        c.datagen.n_pairs = get_or(d, "n_pairs", c.datagen.n_pairs);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        reject_unknown_keys(e, "eval", {"temperature", "greedy"});
        c.eval.temperature = get_or(e, "temperature", c.eval.temperature);
        c.eval.greedy = get_or(e, "greedy", c.eval.greedy);
    }
    if (j.contains("filter")) {
        const auto& f = j.at("filter");
        reject_unknown_keys(f, "filter", {"threshold", "mode", "stats_thresholds"});
        if (f.contains("threshold") && !f.at("threshold").is_null()) {
            c.filter.threshold = f.at("threshold").get<double>();
        }
        c.filter.mode = confidence_mode_from_string(
            get_or<std::string>(f, "mode", confidence_mode_name(c.filter.mode)));
        c.filter.stats_thresholds =
            get_or(f, "stats_thresholds", c.filter.stats_thresholds);
    }
    c.calibration_pairs = get_or(j, "calibration_pairs", c.calibration_pairs);
    c.n_seeds = get_or(j, "n_seeds", c.n_seeds);
    c.base_seed = get_or(j, "seed", c.base_seed);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open config file " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::uint64_t ExperimentConfig::fingerprint() const {
    nlohmann::json j = to_json();
    j.erase("n_seeds");
    j.erase("seed");
    // Report-only knob; does not affect a run's outcome.
    j["filter"].erase("stats_thresholds");
    return fnv1a(j.dump());
}

std::uint64_t ExperimentConfig::base_fingerprint() const {
    const nlohmann::json j{
        {"world", world_to_json(world)},
        {"policy", policy_to_json(policy)},
        {"sft", sft_to_json(sft)},
    };
    return fnv1a(j.dump());
}

SweepGrid SweepGrid::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, "sweep",
                        {"families", "target_rates", "thresholds", "betas",
                         "dropout_rates", "workers"});
    SweepGrid grid;
    if (j.contains("families")) {
        for (const auto& name : j.at("families")) {
            grid.families.push_back(family_from_string(name.get<std::string>()));
        }
    }
    if (j.contains("target_rates")) {
        grid.target_rates = j.at("target_rates").get<std::vector<double>>();
    }
    if (j.contains("thresholds")) {
        for (const auto& t : j.at("thresholds")) {
            if (t.is_null()) {
                grid.thresholds.emplace_back(std::nullopt);
            } else {
                grid.thresholds.emplace_back(t.get<double>());
            }
        }
    }
    if (j.contains("betas")) {
        grid.betas = j.at("betas").get<std::vector<double>>();
    }
    if (j.contains("dropout_rates")) {
        grid.dropout_rates = j.at("dropout_rates").get<std::vector<double>>();
    }
    return grid;
}

} // namespace prefnoise
