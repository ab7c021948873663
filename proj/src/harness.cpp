#include "prefnoise/harness.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/datagen.hpp"
#include "prefnoise/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace prefnoise {

namespace {

// Stage tags for deriving per-run, per-stage rng streams from the run seed.
enum StageTag : std::uint64_t {
    kTagSftInit = 1,
    kTagPairs = 2,
    kTagCalibSample = 3,
    kTagLabel = 4,
    kTagDpo = 5,
    kTagEvalPolicy = 6,
    kTagEvalSft = 7,
};

// Per (pipeline hash, run seed) state reused across sweep cells: the cells
// of one sweep differ only in noise/filter/dpo knobs, so the reference
// policy, the generation pairs, and the calibration sample are shared.
struct PreparedRun {
    SftResult sft;
    GenerationPairSet pairs;
    std::vector<std::pair<double, double>> calibration_sample;
};

class PipelineCache {
public:
    std::shared_ptr<const World> world(const WorldConfig& config) {
        const std::uint64_t key = fnv_of(world_key(config));
        std::promise<std::shared_ptr<const World>> promise;
        std::shared_future<std::shared_ptr<const World>> future;
        bool builder = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = worlds_.find(key);
            if (it == worlds_.end()) {
                future = promise.get_future().share();
                worlds_.emplace(key, future);
                builder = true;
            } else {
                future = it->second;
            }
        }
        if (builder) {
            try {
                promise.set_value(std::make_shared<const World>(build_world(config)));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return future.get();
    }

    std::shared_ptr<const PreparedRun>
    prepared(const ExperimentConfig& config, std::uint64_t run_seed, const World& world) {
        const std::uint64_t key =
            mix_seed(config.base_fingerprint(), datagen_hash(config), run_seed);
        std::promise<std::shared_ptr<const PreparedRun>> promise;
        std::shared_future<std::shared_ptr<const PreparedRun>> future;
        bool builder = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = prepared_.find(key);
            if (it == prepared_.end()) {
                future = promise.get_future().share();
                prepared_.emplace(key, future);
                builder = true;
            } else {
                future = it->second;
            }
        }
        if (builder) {
            try {
                promise.set_value(std::make_shared<PreparedRun>(
                    build_prepared(config, run_seed, world)));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return future.get();
    }

    static PreparedRun build_prepared(const ExperimentConfig& config,
                                      std::uint64_t run_seed, const World& world) {
        PreparedRun prepared;
        PolicyConfig policy = config.policy;
        policy.seed = mix_seed(config.policy.seed, run_seed, kTagSftInit);
        prepared.sft = train_sft(world, policy, config.sft);
        prepared.pairs = sample_generation_pairs(
            world, prepared.sft.params, world.train_prompts(), config.datagen.temperature,
            config.datagen.n_samples, config.datagen.n_pairs,
            mix_seed(run_seed, kTagPairs));

        // Random subsample of the generation pairs' gold-reward pairs, the
        // oracle-calibration input.
        const std::size_t total = prepared.pairs.pairs.size();
        std::vector<std::size_t> indices(total);
        for (std::size_t i = 0; i < total; ++i) {
            indices[i] = i;
        }
        Rng rng(mix_seed(run_seed, kTagCalibSample));
        rng.shuffle(indices.begin(), indices.end());
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(config.calibration_pairs),
                                  total);
        prepared.calibration_sample.reserve(take);
        for (std::size_t i = 0; i < take; ++i) {
            const GenerationPair& pair = prepared.pairs.pairs[indices[i]];
            prepared.calibration_sample.emplace_back(
                world.gold_reward(pair.prompt, pair.a),
                world.gold_reward(pair.prompt, pair.b));
        }
        return prepared;
    }

private:
    static std::string world_key(const WorldConfig& config) {
        return std::to_string(config.embedding_dim) + ":" +
               std::to_string(config.n_train_prompts) + ":" +
               std::to_string(config.n_test_prompts) + ":" +
               std::to_string(config.k_candidates) + ":" + std::to_string(config.seed);
    }

    static std::uint64_t fnv_of(const std::string& text) {
        std::uint64_t h = 1469598103934665603ULL;
        for (const char c : text) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }

    static std::uint64_t datagen_hash(const ExperimentConfig& config) {
        return mix_seed(std::bit_cast<std::uint64_t>(config.datagen.temperature),
                        static_cast<std::uint64_t>(config.datagen.n_samples),
                        static_cast<std::uint64_t>(config.datagen.n_pairs),
                        static_cast<std::uint64_t>(config.calibration_pairs));
    }

    std::mutex mu_;
    std::map<std::uint64_t, std::shared_future<std::shared_ptr<const World>>> worlds_;
    std::map<std::uint64_t, std::shared_future<std::shared_ptr<const PreparedRun>>>
        prepared_;
};

ResultRecord run_with_cache(const ExperimentConfig& config, int run_index,
                            PipelineCache& cache, RunArtifacts* artifacts = nullptr) {
    config.validate();
    const std::uint64_t run_seed = config.base_seed + static_cast<std::uint64_t>(run_index);

    ResultRecord record;
    record.config_hash = config.fingerprint();
    record.base_hash = config.base_fingerprint();
    record.family = config.noise.family;
    record.target_rate = config.noise.target_rate;
    record.filter_threshold = config.filter.threshold;
    record.beta = config.dpo.beta;
    record.dropout_rate = config.dpo.dropout_rate;
    record.seed = run_seed;

    const auto started = std::chrono::steady_clock::now();
    std::string stage = "world";
    try {
        const std::shared_ptr<const World> world = cache.world(config.world);

        stage = "sft";
        const std::shared_ptr<const PreparedRun> prepared =
            cache.prepared(config, run_seed, *world);

        stage = "calibrate";
        record.oracle_value =
            calibrate(config.noise.family, config.noise.target_rate,
                      prepared->calibration_sample);
        NoiseSpec spec;
        spec.family = config.noise.family;
        spec.value = record.oracle_value;
        spec.validate();

        stage = "label";
        PreferenceDataset dataset =
            label_dataset(prepared->pairs, *world, spec, mix_seed(run_seed, kTagLabel));
        record.measured_noise_rate = measure_noise_rate(dataset);

        stage = "filter";
        record.kept_fraction = 1.0;
        if (config.filter.threshold) {
            const std::size_t before = dataset.pairs.size();
            dataset = filter_dataset(dataset, *config.filter.threshold, config.filter.mode);
            record.kept_fraction =
                static_cast<double>(dataset.pairs.size()) / static_cast<double>(before);
        }

        stage = "dpo";
        DpoConfig dpo = config.dpo;
        dpo.seed = mix_seed(config.dpo.seed, run_seed, kTagDpo);
        const DpoResult trained = train_dpo(*world, prepared->sft.params, dataset, dpo);

        stage = "eval";
        WinRateOptions options;
        options.temperature = config.eval.temperature;
        options.greedy = config.eval.greedy;
        const WinRateResult result =
            win_rate(*world, trained.params, prepared->sft.params, world->test_prompts(),
                     mix_seed(run_seed, kTagEvalPolicy), mix_seed(run_seed, kTagEvalSft),
                     options);
        record.win_rate = result.win_rate;
        record.kl =
            kl_diagnostic(*world, trained.params, prepared->sft.params,
                          world->test_prompts());

        if (artifacts != nullptr) {
            artifacts->sft_params = prepared->sft.params;
            artifacts->policy_params = trained.params;
            artifacts->training_log = trained.log;
            artifacts->sft_cross_entropy = prepared->sft.final_cross_entropy;
            artifacts->sft_mean_reward = prepared->sft.mean_policy_reward;
        }
    } catch (const std::exception& e) {
        record.failed = true;
        record.stage = stage + ": " + e.what();
    }
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
}

} // namespace

PipelineArtifacts prepare_pipeline(const ExperimentConfig& config, int run_index) {
    config.validate();
    const std::uint64_t run_seed =
        config.base_seed + static_cast<std::uint64_t>(run_index);
    auto world = std::make_shared<const World>(build_world(config.world));
    PreparedRun prepared = PipelineCache::build_prepared(config, run_seed, *world);
    return PipelineArtifacts{std::move(world), std::move(prepared.sft),
                             std::move(prepared.pairs),
                             std::move(prepared.calibration_sample),
                             mix_seed(run_seed, kTagLabel)};
}

ResultRecord run_single(const ExperimentConfig& config, int run_index,
                        RunArtifacts* artifacts) {
    PipelineCache cache;
    return run_with_cache(config, run_index, cache, artifacts);
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config) {
    config.validate();
    PipelineCache cache;
    std::vector<ResultRecord> records;
    records.reserve(static_cast<std::size_t>(config.n_seeds));
    for (int r = 0; r < config.n_seeds; ++r) {
        records.push_back(run_with_cache(config, r, cache));
    }
    return records;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base,
                                          const SweepGrid& grid) {
    const std::vector<NoiseFamily> families =
        grid.families.empty() ? std::vector<NoiseFamily>{base.noise.family}
                              : grid.families;
    const std::vector<double> rates = grid.target_rates.empty()
                                          ? std::vector<double>{base.noise.target_rate}
                                          : grid.target_rates;
    const std::vector<std::optional<double>> thresholds =
        grid.thresholds.empty()
            ? std::vector<std::optional<double>>{base.filter.threshold}
            : grid.thresholds;
    const std::vector<double> betas =
        grid.betas.empty() ? std::vector<double>{base.dpo.beta} : grid.betas;
    const std::vector<double> dropouts = grid.dropout_rates.empty()
                                             ? std::vector<double>{base.dpo.dropout_rate}
                                             : grid.dropout_rates;

    std::vector<ExperimentConfig> cells;
    cells.reserve(families.size() * rates.size() * thresholds.size() * betas.size() *
                  dropouts.size());
    for (const NoiseFamily family : families) {
        for (const double rate : rates) {
            for (const auto& threshold : thresholds) {
                for (const double beta : betas) {
                    for (const double dropout : dropouts) {
                        ExperimentConfig cell = base;
                        cell.noise.family = family;
                        cell.noise.target_rate = rate;
                        cell.filter.threshold = threshold;
                        cell.dpo.beta = beta;
                        cell.dpo.dropout_rate = dropout;
                        cell.validate();
                        cells.push_back(std::move(cell));
                    }
                }
            }
        }
    }
    if (cells.empty()) {
        throw UsageError("sweep grid is empty");
    }
    return cells;
}

std::vector<ResultRecord> sweep(const ExperimentConfig& base, const SweepGrid& grid,
                                const std::filesystem::path& results_path, int workers) {
    const std::vector<ExperimentConfig> cells = expand_grid(base, grid);

    // Resume: anything already in the results file is not recomputed.
    std::map<std::pair<std::uint64_t, std::uint64_t>, ResultRecord> done;
    if (std::filesystem::exists(results_path)) {
        for (ResultRecord& record : read_records_jsonl(results_path)) {
            done.emplace(std::make_pair(record.config_hash, record.seed),
                         std::move(record));
        }
    }

    struct Task {
        std::size_t cell = 0;
        int run_index = 0;
    };
    std::vector<Task> tasks;
    std::vector<ResultRecord> records(cells.size() *
                                      static_cast<std::size_t>(base.n_seeds));
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::uint64_t hash = cells[c].fingerprint();
        for (int r = 0; r < base.n_seeds; ++r) {
            const std::size_t slot = c * static_cast<std::size_t>(base.n_seeds) +
                                     static_cast<std::size_t>(r);
            const auto it = done.find(
                {hash, cells[c].base_seed + static_cast<std::uint64_t>(r)});
            if (it != done.end()) {
                records[slot] = it->second;
            } else {
                tasks.push_back(Task{c, r});
            }
        }
    }

    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
        if (workers <= 0) {
            workers = 1;
        }
    }
    workers = std::min(workers, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));

    PipelineCache cache;
    std::atomic<std::size_t> next{0};
    std::mutex io_mu;
    std::ofstream stream_out;
    if (!tasks.empty()) {
        stream_out.open(results_path, std::ios::app);
        if (!stream_out) {
            throw ParseError("cannot open " + results_path.string() + " for writing");
        }
    }

    const auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) {
                return;
            }
            const Task task = tasks[i];
            ResultRecord record = run_with_cache(cells[task.cell], task.run_index, cache);
            const std::size_t slot =
                task.cell * static_cast<std::size_t>(base.n_seeds) +
                static_cast<std::size_t>(task.run_index);
            std::lock_guard<std::mutex> lock(io_mu);
            stream_out << record.to_json().dump() << '\n';
            stream_out.flush();
            records[slot] = std::move(record);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    for (std::thread& thread : pool) {
        thread.join();
    }
    if (stream_out.is_open()) {
        stream_out.close();
    }

    // Canonical rewrite: cell order x run index, so re-running a finished
    // sweep leaves the file's record sequence unchanged.
    {
        std::ofstream out(results_path, std::ios::trunc);
        if (!out) {
            throw ParseError("cannot rewrite " + results_path.string());
        }
        for (const ResultRecord& record : records) {
            out << record.to_json().dump() << '\n';
        }
    }
    return records;
}

} // namespace prefnoise
