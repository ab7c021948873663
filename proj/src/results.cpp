#include "prefnoise/harness.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

namespace prefnoise {

nlohmann::json ResultRecord::to_json() const {
    return nlohmann::json{
        {"config_hash", config_hash},
        {"base_hash", base_hash},
        {"family", family_name(family)},
        {"target_rate", target_rate},
        {"oracle_value", oracle_value},
        {"measured_noise_rate", measured_noise_rate},
        {"filter_threshold", filter_threshold ? nlohmann::json(*filter_threshold)
                                              : nlohmann::json(nullptr)},
        {"kept_fraction", kept_fraction},
        {"beta", beta},
        {"dropout_rate", dropout_rate},
        {"seed", seed},
        {"win_rate", win_rate},
        {"kl", kl},
        {"wall_time_s", wall_time_s},
        {"failed", failed},
        {"stage", stage},
    };
}

ResultRecord ResultRecord::from_json(const nlohmann::json& j) {
    ResultRecord r;
    r.config_hash = j.at("config_hash").get<std::uint64_t>();
    r.base_hash = j.at("base_hash").get<std::uint64_t>();
    r.family = family_from_string(j.at("family").get<std::string>());
    r.target_rate = j.at("target_rate").get<double>();
    r.oracle_value = j.at("oracle_value").get<double>();
    r.measured_noise_rate = j.at("measured_noise_rate").get<double>();
    if (!j.at("filter_threshold").is_null()) {
        r.filter_threshold = j.at("filter_threshold").get<double>();
    }
    r.kept_fraction = j.at("kept_fraction").get<double>();
    r.beta = j.at("beta").get<double>();
    r.dropout_rate = j.at("dropout_rate").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.win_rate = j.at("win_rate").get<double>();
    r.kl = j.at("kl").get<double>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.failed = j.at("failed").get<bool>();
    r.stage = j.at("stage").get<std::string>();
    return r;
}

bool ResultRecord::same_outcome(const ResultRecord& other) const {
    nlohmann::json a = to_json();
    nlohmann::json b = other.to_json();
    a.erase("wall_time_s");
    b.erase("wall_time_s");
    return a.dump() == b.dump();
}

void append_records_jsonl(const std::filesystem::path& path,
                          std::span<const ResultRecord> records) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw ParseError("cannot open " + path.string() + " for writing");
    }
    for (const ResultRecord& record : records) {
        out << record.to_json().dump() << '\n';
    }
    if (!out) {
        throw ParseError("failed writing " + path.string());
    }
}

std::vector<ResultRecord> read_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    std::vector<ResultRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            records.push_back(ResultRecord::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad result record: ") + e.what(), line_no);
        }
    }
    return records;
}

std::vector<ExternalPair> ingest_external(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    std::vector<ExternalPair> pairs;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!j.is_object()) {
            throw ParseError("expected a JSON object", line_no);
        }
        ExternalPair pair;
        if (!j.contains("id")) {
            throw ParseError("missing 'id'", line_no);
        }
        pair.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                         : j.at("id").dump();
        for (const char* key : {"score_a", "score_b"}) {
            if (!j.contains(key) || !j.at(key).is_number()) {
                throw ParseError("missing or non-numeric '" + std::string(key) + "'",
                                 line_no);
            }
        }
        pair.score_a = j.at("score_a").get<double>();
        pair.score_b = j.at("score_b").get<double>();
        if (!std::isfinite(pair.score_a) || !std::isfinite(pair.score_b)) {
            throw ParseError("scores must be finite", line_no);
        }
        if (j.contains("label") && !j.at("label").is_null()) {
            const auto label = j.at("label").get<std::string>();
            if (label != "a" && label != "b") {
                throw ParseError("label must be \"a\" or \"b\"", line_no);
            }
            pair.label = label[0];
        }
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) {
        throw UsageError("external pair file is empty: " + path.string());
    }
    return pairs;
}

std::vector<std::pair<double, double>>
external_score_pairs(std::span<const ExternalPair> pairs) {
    std::vector<std::pair<double, double>> scores;
    scores.reserve(pairs.size());
    for (const ExternalPair& pair : pairs) {
        scores.emplace_back(pair.score_a, pair.score_b);
    }
    return scores;
}

double external_disagreement_rate(std::span<const ExternalPair> pairs) {
    std::size_t labeled = 0;
    std::size_t disagree = 0;
    for (const ExternalPair& pair : pairs) {
        if (!pair.label) {
            continue;
        }
        ++labeled;
        if ((*pair.label == 'a' && pair.score_a < pair.score_b) ||
            (*pair.label == 'b' && pair.score_b < pair.score_a)) {
            ++disagree;
        }
    }
    if (labeled == 0) {
        throw UsageError("no labeled pairs to audit");
    }
    return static_cast<double>(disagree) / static_cast<double>(labeled);
}

PlotAxis plot_axis_from_string(const std::string& name) {
    if (name == "rate") return PlotAxis::NoiseRate;
    if (name == "beta") return PlotAxis::Beta;
    if (name == "dropout") return PlotAxis::Dropout;
    if (name == "threshold") return PlotAxis::Threshold;
    throw UsageError("unknown plot axis: " + name + " (rate|beta|dropout|threshold)");
}

std::vector<PlotRow> emit_plot_data(std::span<const ResultRecord> records,
                                    PlotAxis axis) {
    const char* x_var = "noise_rate";
    const auto x_of = [&](const ResultRecord& r) {
        switch (axis) {
        case PlotAxis::NoiseRate: return r.target_rate;
        case PlotAxis::Beta: return r.beta;
        case PlotAxis::Dropout: return r.dropout_rate;
        case PlotAxis::Threshold:
        default: return r.filter_threshold.value_or(0.5); // 0.5 = no filtering
        }
    };
    switch (axis) {
    case PlotAxis::NoiseRate: x_var = "noise_rate"; break;
    case PlotAxis::Beta: x_var = "beta"; break;
    case PlotAxis::Dropout: x_var = "dropout_rate"; break;
    case PlotAxis::Threshold: x_var = "threshold"; break;
    }

    std::map<std::pair<double, int>, std::vector<const ResultRecord*>> groups;
    for (const ResultRecord& record : records) {
        if (record.failed) {
            continue;
        }
        groups[{x_of(record), static_cast<int>(record.family)}].push_back(&record);
    }

    std::vector<PlotRow> rows;
    rows.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        const std::uint64_t base_hash = members.front()->base_hash;
        std::vector<double> wins;
        wins.reserve(members.size());
        for (const ResultRecord* record : members) {
            if (record->base_hash != base_hash) {
                throw UsageError("plot group mixes records with different "
                                 "world/policy fingerprints");
            }
            wins.push_back(record->win_rate);
        }
        PlotRow row;
        row.x_var = x_var;
        row.x_value = key.first;
        row.family = static_cast<NoiseFamily>(key.second);
        row.n_seeds = static_cast<int>(wins.size());
        if (wins.size() >= 2) {
            const AggregateResult agg = aggregate(wins);
            row.mean_win_rate = agg.mean;
            row.ci_half_width = agg.ci_half_width;
        } else {
            row.mean_win_rate = wins.front();
            row.ci_half_width = 0.0;
        }
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const PlotRow& a, const PlotRow& b) {
        if (a.family != b.family) return a.family < b.family;
        return a.x_value < b.x_value;
    });
    return rows;
}

void write_plot_csv(std::span<const PlotRow> rows, std::ostream& out) {
    out << "x_var,x_value,noise_family,mean_win_rate,ci_half_width,n_seeds\n";
    for (const PlotRow& row : rows) {
        out << row.x_var << ',' << row.x_value << ',' << family_name(row.family) << ','
            << row.mean_win_rate << ',' << row.ci_half_width << ',' << row.n_seeds
            << '\n';
    }
}

} // namespace prefnoise
