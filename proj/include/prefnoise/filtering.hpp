#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "prefnoise/datagen.hpp"

namespace prefnoise {

// How the Bradley-Terry confidence of a labeled pair is scored.
//   Magnitude:        sigmoid(|gold margin|). Label-agnostic; t = 0.5 keeps
//                     everything, random flips stay uniformly distributed
//                     across confidence levels. The default.
//   LabeledDirection: sigmoid(gold margin) applied to the labeled winner,
//                     the literal reading; flipped pairs score below 0.5, so
//                     t = 0.5 already removes exactly the noisy pairs. Kept
//                     behind this switch for comparison.
enum class ConfidenceMode { Magnitude, LabeledDirection };

const char* confidence_mode_name(ConfidenceMode mode);
ConfidenceMode confidence_mode_from_string(const std::string& name);

double confidence(const LabeledPair& pair, ConfidenceMode mode = ConfidenceMode::Magnitude);

// Keeps pairs with confidence strictly greater than t, preserving order.
// t must lie in [0.5, 1).
PreferenceDataset filter_dataset(const PreferenceDataset& dataset, double t,
                                 ConfidenceMode mode = ConfidenceMode::Magnitude);

struct FilterReport {
    double threshold = 0.5;
    std::size_t kept = 0;
    double kept_fraction = 0.0;
    double noise_rate_before = 0.0;
    double noise_rate_after = 0.0; // 0 when nothing is kept
};

std::vector<FilterReport> retention_stats(const PreferenceDataset& dataset,
                                          std::span<const double> thresholds,
                                          ConfidenceMode mode = ConfidenceMode::Magnitude);

// CSV rows (threshold, kept, kept_fraction, noise_before, noise_after) with a
// header line; the input for retention / post-filter noise plots.
void write_filter_report_csv(std::span<const FilterReport> reports, std::ostream& out);

} // namespace prefnoise
