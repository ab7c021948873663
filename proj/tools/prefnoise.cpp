// Command-line front end for the preference-noise lab. Subcommands cover the
// pipeline stages (calibrate, gen, filter-stats, train, eval), the sweep
// runner, plot-data export, and external scored-pair ingestion.

#include "CLI11.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/datagen.hpp"
#include "prefnoise/eval.hpp"
#include "prefnoise/filtering.hpp"
#include "prefnoise/harness.hpp"
#include "prefnoise/kernels.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using namespace prefnoise;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* config = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    if (config_required) {
        config->required();
    }
    const char* env_out = std::getenv("PREFNOISE_OUT");
    args.out_dir = env_out != nullptr ? env_out : "out";
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the config's base seed");
}

ExperimentConfig load_config(const CommonArgs& args) {
    ExperimentConfig config = ExperimentConfig::load(args.config_path);
    if (args.seed) {
        config.base_seed = *args.seed;
    }
    return config;
}

fs::path ensure_out_dir(const CommonArgs& args) {
    fs::path dir(args.out_dir);
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
}

nlohmann::json calibration_json(const ExperimentConfig& config,
                                const PipelineArtifacts& artifacts, double value) {
    return nlohmann::json{
        {"family", family_name(config.noise.family)},
        {"target_rate", config.noise.target_rate},
        {"value", value},
        {"sample_size", artifacts.calibration_sample.size()},
    };
}

int cmd_calibrate(const CommonArgs& args) {
    const ExperimentConfig config = load_config(args);
    const fs::path dir = ensure_out_dir(args);
    const PipelineArtifacts artifacts = prepare_pipeline(config, 0);
    const double value = calibrate(config.noise.family, config.noise.target_rate,
                                   artifacts.calibration_sample);
    const nlohmann::json j = calibration_json(config, artifacts, value);
    write_json(dir / "calibration.json", j);
    std::cout << family_name(config.noise.family) << " target "
              << config.noise.target_rate << " -> hyperparameter " << value << " ("
              << artifacts.calibration_sample.size() << " calibration pairs)\n";
    return 0;
}

int cmd_gen(const CommonArgs& args) {
    const ExperimentConfig config = load_config(args);
    const fs::path dir = ensure_out_dir(args);
    const PipelineArtifacts artifacts = prepare_pipeline(config, 0);
    const double value = calibrate(config.noise.family, config.noise.target_rate,
                                   artifacts.calibration_sample);
    NoiseSpec spec;
    spec.family = config.noise.family;
    spec.value = value;
    const PreferenceDataset dataset =
        label_dataset(artifacts.pairs, *artifacts.world, spec, artifacts.label_seed);
    write_pairs_jsonl(dataset, dir / "dataset.jsonl");

    const nlohmann::json manifest{
        {"config", config.to_json()},
        {"world", artifacts.world->summary()},
        {"sft",
         {{"final_cross_entropy", artifacts.sft.final_cross_entropy},
          {"mean_policy_reward", artifacts.sft.mean_policy_reward},
          {"fingerprint", artifacts.sft.params.fingerprint()}}},
        {"calibration", calibration_json(config, artifacts, value)},
        {"dataset",
         {{"n_pairs", dataset.pairs.size()},
          {"dropped", artifacts.pairs.dropped},
          {"measured_noise_rate", measure_noise_rate(dataset)},
          {"label_seed", artifacts.label_seed}}},
    };
    write_json(dir / "manifest.json", manifest);
    std::cout << "wrote " << dataset.pairs.size() << " labeled pairs ("
              << artifacts.pairs.dropped << " dropped), measured noise rate "
              << measure_noise_rate(dataset) << "\n";
    return 0;
}

int cmd_filter_stats(const CommonArgs& args, const std::string& data_path) {
    const ExperimentConfig config = load_config(args);
    const fs::path dir = ensure_out_dir(args);

    PreferenceDataset dataset;
    if (!data_path.empty()) {
        dataset = read_pairs_jsonl(data_path);
    } else {
        const PipelineArtifacts artifacts = prepare_pipeline(config, 0);
        const double value = calibrate(config.noise.family, config.noise.target_rate,
                                       artifacts.calibration_sample);
        NoiseSpec spec;
        spec.family = config.noise.family;
        spec.value = value;
        dataset =
            label_dataset(artifacts.pairs, *artifacts.world, spec, artifacts.label_seed);
    }

    const std::vector<FilterReport> reports =
        retention_stats(dataset, config.filter.stats_thresholds, config.filter.mode);
    std::ofstream csv(dir / "filter_stats.csv");
    if (!csv) {
        throw ParseError("cannot open filter_stats.csv for writing");
    }
    write_filter_report_csv(reports, csv);
    write_filter_report_csv(reports, std::cout);
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const ExperimentConfig config = load_config(args);
    const fs::path dir = ensure_out_dir(args);
    RunArtifacts artifacts;
    const ResultRecord record = run_single(config, 0, &artifacts);
    append_records_jsonl(dir / "record.jsonl", {&record, 1});
    if (record.failed) {
        std::cerr << "run failed at stage " << record.stage << "\n";
        return 2;
    }
    artifacts.sft_params->save(dir / "sft.bin");
    artifacts.policy_params->save(dir / "policy.bin");
    std::ofstream log(dir / "training_log.csv");
    log << "epoch,loss,kl\n";
    for (const EpochLog& entry : artifacts.training_log) {
        log << entry.epoch << ',' << entry.loss << ',' << entry.kl << '\n';
    }
    std::cout << "win_rate " << record.win_rate << " kl " << record.kl
              << " measured_noise " << record.measured_noise_rate << " (seed "
              << record.seed << ")\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& params_path,
             const std::string& sft_path) {
    const ExperimentConfig config = load_config(args);
    const fs::path dir = ensure_out_dir(args);

    if (params_path.empty()) {
        const ResultRecord record = run_single(config, 0);
        if (record.failed) {
            std::cerr << "run failed at stage " << record.stage << "\n";
            return 2;
        }
        write_json(dir / "eval.json",
                   {{"win_rate", record.win_rate}, {"kl", record.kl}});
        std::cout << "win_rate " << record.win_rate << " kl " << record.kl << "\n";
        return 0;
    }

    const PolicyParams policy = PolicyParams::load(params_path);
    PolicyParams sft;
    std::shared_ptr<const World> world;
    if (!sft_path.empty()) {
        sft = PolicyParams::load(sft_path);
        world = std::make_shared<const World>(build_world(config.world));
    } else {
        PipelineArtifacts artifacts = prepare_pipeline(config, 0);
        sft = std::move(artifacts.sft.params);
        world = artifacts.world;
    }
    const std::uint64_t run_seed = config.base_seed;
    WinRateOptions options;
    options.temperature = config.eval.temperature;
    options.greedy = config.eval.greedy;
    const WinRateResult result =
        win_rate(*world, policy, sft, world->test_prompts(), mix_seed(run_seed, 6),
                 mix_seed(run_seed, 7), options);
    const double kl = kl_diagnostic(*world, policy, sft, world->test_prompts());
    write_json(dir / "eval.json", {{"win_rate", result.win_rate},
                                   {"wins", result.wins},
                                   {"ties", result.ties},
                                   {"losses", result.losses},
                                   {"kl", kl}});
    std::cout << "win_rate " << result.win_rate << " (w/t/l " << result.wins << "/"
              << result.ties << "/" << result.losses << ") kl " << kl << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args, int workers) {
    const ExperimentConfig config = load_config(args);
    const fs::path dir = ensure_out_dir(args);

    std::ifstream in(args.config_path);
    nlohmann::json raw;
    in >> raw;
    if (!raw.contains("sweep")) {
        throw UsageError("config has no 'sweep' section");
    }
    SweepGrid grid = SweepGrid::from_json(raw.at("sweep"));
    if (workers <= 0 && raw.at("sweep").contains("workers")) {
        workers = raw.at("sweep").at("workers").get<int>();
    }

    const std::vector<ResultRecord> records =
        sweep(config, grid, dir / "results.jsonl", workers);
    std::size_t failed = 0;
    for (const ResultRecord& record : records) {
        failed += record.failed ? 1 : 0;
    }
    std::cout << records.size() << " records -> " << (dir / "results.jsonl").string()
              << (failed > 0 ? " (" + std::to_string(failed) + " failed)" : "") << "\n";
    return failed == 0 ? 0 : 3;
}

int cmd_plot_data(const CommonArgs& args, const std::string& axis_name,
                  std::string results_path) {
    const fs::path dir = ensure_out_dir(args);
    if (results_path.empty()) {
        results_path = (dir / "results.jsonl").string();
    }
    const std::vector<ResultRecord> records = read_records_jsonl(results_path);
    const PlotAxis axis = plot_axis_from_string(axis_name);
    const std::vector<PlotRow> rows = emit_plot_data(records, axis);
    const fs::path out_path = dir / ("plot_" + axis_name + ".csv");
    std::ofstream csv(out_path);
    if (!csv) {
        throw ParseError("cannot open " + out_path.string() + " for writing");
    }
    write_plot_csv(rows, csv);
    std::cout << rows.size() << " rows -> " << out_path.string() << "\n";
    return 0;
}

int cmd_ingest(const CommonArgs& args, const std::string& input_path) {
    const fs::path dir = ensure_out_dir(args);
    const std::vector<ExternalPair> pairs = ingest_external(input_path);
    std::size_t labeled = 0;
    for (const ExternalPair& pair : pairs) {
        labeled += pair.label ? 1 : 0;
    }
    nlohmann::json summary{{"pairs", pairs.size()}, {"labeled", labeled}};
    if (labeled > 0) {
        summary["disagreement_rate"] = external_disagreement_rate(pairs);
    } else {
        summary["disagreement_rate"] = nullptr;
    }
    write_json(dir / "external_summary.json", summary);
    std::cout << pairs.size() << " pairs, " << labeled << " labeled";
    if (labeled > 0) {
        std::cout << ", disagreement rate " << external_disagreement_rate(pairs);
    }
    std::cout << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"prefnoise: preference-noise alignment lab"};
    app.require_subcommand(1);

    CommonArgs calibrate_args;
    auto* calibrate_cmd =
        app.add_subcommand("calibrate", "resolve oracle hyperparameters for a target rate");
    add_common(calibrate_cmd, calibrate_args);

    CommonArgs gen_args;
    auto* gen_cmd =
        app.add_subcommand("gen", "sample generation pairs and label a preference dataset");
    add_common(gen_cmd, gen_args);

    CommonArgs filter_args;
    std::string filter_data;
    auto* filter_cmd =
        app.add_subcommand("filter-stats", "retention and post-filter noise statistics");
    add_common(filter_cmd, filter_args);
    filter_cmd->add_option("--data", filter_data,
                           "existing dataset.jsonl (default: regenerate from config)");

    CommonArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "run one end-to-end alignment run");
    add_common(train_cmd, train_args);

    CommonArgs eval_args;
    std::string eval_params;
    std::string eval_sft;
    auto* eval_cmd = app.add_subcommand("eval", "win rate and KL against the reference");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--params", eval_params, "trained policy parameters (.bin)");
    eval_cmd->add_option("--sft", eval_sft, "reference parameters (.bin); retrained if absent");

    CommonArgs sweep_args;
    int sweep_workers = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "run the config's sweep grid");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--workers", sweep_workers, "worker threads (default: cores)");

    CommonArgs plot_args;
    std::string plot_axis = "rate";
    std::string plot_results;
    auto* plot_cmd = app.add_subcommand("plot-data", "aggregate records into tidy CSV");
    add_common(plot_cmd, plot_args, /*config_required=*/false);
    plot_cmd->add_option("--x", plot_axis, "x axis: rate|beta|dropout|threshold");
    plot_cmd->add_option("--results", plot_results, "results.jsonl path");

    CommonArgs ingest_args;
    std::string ingest_input;
    auto* ingest_cmd =
        app.add_subcommand("ingest", "parse and audit externally scored pairs");
    add_common(ingest_cmd, ingest_args, /*config_required=*/false);
    ingest_cmd->add_option("--input", ingest_input, "external pairs (JSON-lines)")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (calibrate_cmd->parsed()) return cmd_calibrate(calibrate_args);
        if (gen_cmd->parsed()) return cmd_gen(gen_args);
        if (filter_cmd->parsed()) return cmd_filter_stats(filter_args, filter_data);
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_params, eval_sft);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_workers);
        if (plot_cmd->parsed()) return cmd_plot_data(plot_args, plot_axis, plot_results);
        if (ingest_cmd->parsed()) return cmd_ingest(ingest_args, ingest_input);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
