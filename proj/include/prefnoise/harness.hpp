#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "prefnoise/filtering.hpp"
#include "prefnoise/oracles.hpp"
#include "prefnoise/policy.hpp"
#include "prefnoise/training.hpp"
#include "prefnoise/world.hpp"

namespace prefnoise {

struct NoiseSetting {
    NoiseFamily family = NoiseFamily::Random;
    double target_rate = 0.0;
};

struct DatagenConfig {
    double temperature = 0.7;
    int n_samples = 8;
    int n_pairs = 4;
};

struct EvalConfig {
    double temperature = 0.7;
    bool greedy = false;
};

struct FilterConfig {
    std::optional<double> threshold;
    ConfidenceMode mode = ConfidenceMode::Magnitude;
    std::vector<double> stats_thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
};

// One experiment cell: everything needed to run the pipeline end to end for
// n_seeds repeats. Serialized as versioned JSON (schema version 1); unknown
// keys are rejected.
struct ExperimentConfig {
    WorldConfig world;
    PolicyConfig policy;
    SftConfig sft;
    DpoConfig dpo;
    NoiseSetting noise;
    DatagenConfig datagen;
    EvalConfig eval;
    FilterConfig filter;
    int calibration_pairs = 1000;
    int n_seeds = 5;
    std::uint64_t base_seed = 0;

    void validate() const;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);

    // Hash of every field that determines a single run's outcome, except the
    // base seed (recorded per run). Identifies a sweep cell.
    std::uint64_t fingerprint() const;
    // Hash of the world/policy/sft sub-configs; plot groups must agree on it.
    std::uint64_t base_fingerprint() const;
};

struct ResultRecord {
    std::uint64_t config_hash = 0;
    std::uint64_t base_hash = 0;
    NoiseFamily family = NoiseFamily::Random;
    double target_rate = 0.0;
    double oracle_value = 0.0;   // calibrated hyperparameter
    double measured_noise_rate = 0.0;
    std::optional<double> filter_threshold;
    double kept_fraction = 1.0;
    double beta = 0.0;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0; // run seed = base_seed + run index
    double win_rate = 0.0;
    double kl = 0.0;
    double wall_time_s = 0.0;
    bool failed = false;
    std::string stage; // failing stage, empty on success

    nlohmann::json to_json() const;
    static ResultRecord from_json(const nlohmann::json& j);

    // Byte-compare ignoring wall time.
    bool same_outcome(const ResultRecord& other) const;
};

void append_records_jsonl(const std::filesystem::path& path,
                          std::span<const ResultRecord> records);
std::vector<ResultRecord> read_records_jsonl(const std::filesystem::path& path);

// Deterministic upstream stages of one run: world, reference policy,
// generation pairs and the oracle-calibration sample. What `calibrate`,
// `gen` and `filter-stats` share with a full run of the same seed.
struct PipelineArtifacts {
    std::shared_ptr<const World> world;
    SftResult sft;
    GenerationPairSet pairs;
    std::vector<std::pair<double, double>> calibration_sample;
    std::uint64_t label_seed = 0;
};

PipelineArtifacts prepare_pipeline(const ExperimentConfig& config, int run_index);

// Optional capture of per-run artifacts for persistence.
struct RunArtifacts {
    std::optional<PolicyParams> sft_params;
    std::optional<PolicyParams> policy_params;
    std::vector<EpochLog> training_log;
    double sft_cross_entropy = 0.0;
    double sft_mean_reward = 0.0;
};

// Runs the full pipeline (sft -> pairs -> calibrate -> label -> filter ->
// dpo -> win rate) for one run seed. Failures are captured in the record
// (failed flag, stage name).
ResultRecord run_single(const ExperimentConfig& config, int run_index,
                        RunArtifacts* artifacts = nullptr);

// All n_seeds runs of one cell, in run-index order.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config);

struct SweepGrid {
    std::vector<NoiseFamily> families;
    std::vector<double> target_rates;
    std::vector<std::optional<double>> thresholds;
    std::vector<double> betas;
    std::vector<double> dropout_rates;

    // Empty dimensions fall back to the base config's value.
    static SweepGrid from_json(const nlohmann::json& j);
};

// Cartesian product of the grid times n_seeds, run on a bounded worker pool.
// Records stream to results_path as runs finish; on completion the file is
// rewritten in canonical order. Cells already present in the file (by config
// hash and seed) are skipped, so an interrupted sweep resumes.
std::vector<ResultRecord> sweep(const ExperimentConfig& base, const SweepGrid& grid,
                                const std::filesystem::path& results_path, int workers);

// Expands the grid into per-cell configs (canonical cell order).
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base,
                                          const SweepGrid& grid);

struct ExternalPair {
    std::string id;
    double score_a = 0.0;
    double score_b = 0.0;
    std::optional<char> label; // 'a' or 'b' when provided
};

// JSON-lines {"id":..,"score_a":..,"score_b":..,"label":"a"|"b"?}. Malformed
// lines raise ParseError with the line number; an empty file is a usage
// error.
std::vector<ExternalPair> ingest_external(const std::filesystem::path& path);

std::vector<std::pair<double, double>>
external_score_pairs(std::span<const ExternalPair> pairs);

// Fraction of labeled pairs whose label disagrees with the score order; the
// noise-audit statistic for externally scored data.
double external_disagreement_rate(std::span<const ExternalPair> pairs);

enum class PlotAxis { NoiseRate, Beta, Dropout, Threshold };

PlotAxis plot_axis_from_string(const std::string& name);

struct PlotRow {
    std::string x_var;
    double x_value = 0.0;
    NoiseFamily family = NoiseFamily::Random;
    double mean_win_rate = 0.0;
    double ci_half_width = 0.0;
    int n_seeds = 0;
};

// Aggregates records per (x value, family) cell with t-based confidence
// intervals. Every record in a group must share the same base fingerprint.
std::vector<PlotRow> emit_plot_data(std::span<const ResultRecord> records,
                                    PlotAxis axis);

void write_plot_csv(std::span<const PlotRow> rows, std::ostream& out);

} // namespace prefnoise
