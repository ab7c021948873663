#include "prefnoise/filtering.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/oracles.hpp"

#include <cmath>
#include <ostream>

namespace prefnoise {

namespace {

void check_threshold(double t) {
    if (!(t >= 0.5 && t < 1.0)) {
        throw UsageError("filter threshold must be in [0.5, 1)");
    }
}

} // namespace

const char* confidence_mode_name(ConfidenceMode mode) {
    return mode == ConfidenceMode::Magnitude ? "magnitude" : "labeled";
}

ConfidenceMode confidence_mode_from_string(const std::string& name) {
    if (name == "magnitude") return ConfidenceMode::Magnitude;
    if (name == "labeled") return ConfidenceMode::LabeledDirection;
    throw ConfigError("unknown confidence mode: " + name);
}

double confidence(const LabeledPair& pair, ConfidenceMode mode) {
    const double margin = mode == ConfidenceMode::Magnitude
                              ? std::fabs(pair.gold_margin)
                              : pair.gold_margin;
    return sigmoid(margin);
}

PreferenceDataset filter_dataset(const PreferenceDataset& dataset, double t,
                                 ConfidenceMode mode) {
    check_threshold(t);
    PreferenceDataset kept;
    kept.provenance = dataset.provenance;
    kept.pairs.reserve(dataset.pairs.size());
    for (const LabeledPair& pair : dataset.pairs) {
        if (confidence(pair, mode) > t) {
            kept.pairs.push_back(pair);
        }
    }
    return kept;
}

std::vector<FilterReport> retention_stats(const PreferenceDataset& dataset,
                                          std::span<const double> thresholds,
                                          ConfidenceMode mode) {
    if (dataset.pairs.empty()) {
        throw UsageError("retention_stats requires a non-empty dataset");
    }
    const double before = measure_noise_rate(dataset);
    const auto total = static_cast<double>(dataset.pairs.size());

    std::vector<FilterReport> reports;
    reports.reserve(thresholds.size());
    for (const double t : thresholds) {
        check_threshold(t);
        std::size_t kept = 0;
        std::size_t noisy_kept = 0;
        for (const LabeledPair& pair : dataset.pairs) {
            if (confidence(pair, mode) > t) {
                ++kept;
                noisy_kept += pair.is_noisy ? 1 : 0;
            }
        }
        FilterReport report;
        report.threshold = t;
        report.kept = kept;
        report.kept_fraction = static_cast<double>(kept) / total;
        report.noise_rate_before = before;
        report.noise_rate_after =
            kept > 0 ? static_cast<double>(noisy_kept) / static_cast<double>(kept) : 0.0;
        reports.push_back(report);
    }
    return reports;
}

void write_filter_report_csv(std::span<const FilterReport> reports, std::ostream& out) {
    out << "threshold,kept,kept_fraction,noise_before,noise_after\n";
    for (const FilterReport& r : reports) {
        out << r.threshold << ',' << r.kept << ',' << r.kept_fraction << ','
            << r.noise_rate_before << ',' << r.noise_rate_after << '\n';
    }
}

} // namespace prefnoise
