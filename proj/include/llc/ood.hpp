#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "llc/decode.hpp"
#include "llc/matrix.hpp"

namespace llc {

enum class OodRule { exact_miss, tuned_threshold, conservative_threshold };

const char* ood_rule_name(OodRule rule);

struct OodVerdict {
    std::size_t instance_id = 0;
    bool is_ood = false;
    OodRule rule = OodRule::exact_miss;
    std::optional<double> score;  // max-class probability; absent for exact_miss
};

// Zero-sample rule: OOD iff the code matches no class code exactly.
bool exact_miss_detect(const DecodeIndex& index, const BitCode& code);

struct ThresholdModel {
    double threshold = 0.0;
    std::size_t calibration_count = 0;

    // Low max-class probability means OOD.
    bool is_ood(double score) const { return score <= threshold; }
};

// Threshold maximizing F1 (OOD positive) over candidates at midpoints of
// adjacent observed scores plus the all-positive boundary; ties pick the
// lowest threshold.
ThresholdModel tune_threshold_max_f1(const std::vector<double>& in_scores,
                                     const std::vector<double>& ood_scores);

// mean + 1 population stddev of the provided OOD scores, clamped to [0,1].
// Intended for ~50 samples.
ThresholdModel conservative_threshold(const std::vector<double>& ood_scores);

struct F1Report {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

struct OodTruth {
    std::size_t instance_id = 0;
    bool is_ood = false;
};

// OOD is the positive class. Conventions: precision = 0 with no predicted
// positives; f1 = 0 when precision + recall = 0. Verdicts and truth must list
// the same instance ids in the same order.
F1Report evaluate_f1(const std::vector<OodVerdict>& verdicts,
                     const std::vector<OodTruth>& truth);

// Max softmax probability per row of a score matrix.
std::vector<double> max_softmax_probability(const Matrix& scores);

// Same, from per-class Hamming distances (softmax over negated distances).
std::vector<double> max_probability_from_distances(
    const std::vector<std::vector<std::size_t>>& distances);

struct SweepPoint {
    double threshold = 0.0;
    double f1 = 0.0;
};

// F1 at every candidate threshold, for plotting.
std::vector<SweepPoint> f1_sweep(const std::vector<double>& in_scores,
                                 const std::vector<double>& ood_scores);

}  // namespace llc
