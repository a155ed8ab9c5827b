#include "llc/ood.hpp"

#include <algorithm>
#include <cmath>

#include "llc/error.hpp"

namespace llc {

const char* ood_rule_name(OodRule rule) {
    switch (rule) {
        case OodRule::exact_miss: return "exact_miss";
        case OodRule::tuned_threshold: return "tuned_threshold";
        case OodRule::conservative_threshold: return "conservative_threshold";
    }
    return "unknown";
}

bool exact_miss_detect(const DecodeIndex& index, const BitCode& code) {
    return index.exact_decode(code).empty();
}

namespace {

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
};

F1Report report_from_counts(const Counts& c) {
    F1Report r;
    r.true_positives = c.tp;
    r.false_positives = c.fp;
    r.false_negatives = c.fn;
    r.precision = (c.tp + c.fp) == 0 ? 0.0
                                     : static_cast<double>(c.tp) /
                                           static_cast<double>(c.tp + c.fp);
    r.recall = (c.tp + c.fn) == 0 ? 0.0
                                  : static_cast<double>(c.tp) /
                                        static_cast<double>(c.tp + c.fn);
    r.f1 = (r.precision + r.recall) == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double f1_at_threshold(const std::vector<double>& in_scores,
                       const std::vector<double>& ood_scores, double threshold) {
    Counts c;
    for (double s : ood_scores) {
        if (s <= threshold)
            ++c.tp;
        else
            ++c.fn;
    }
    for (double s : in_scores)
        if (s <= threshold) ++c.fp;
    return report_from_counts(c).f1;
}

std::vector<double> candidate_thresholds(const std::vector<double>& in_scores,
                                         const std::vector<double>& ood_scores) {
    std::vector<double> values;
    values.reserve(in_scores.size() + ood_scores.size());
    values.insert(values.end(), in_scores.begin(), in_scores.end());
    values.insert(values.end(), ood_scores.begin(), ood_scores.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    std::vector<double> candidates;
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        candidates.push_back(0.5 * (values[i] + values[i + 1]));
    candidates.push_back(values.back());  // flags everything as OOD
    return candidates;
}

}  // namespace

ThresholdModel tune_threshold_max_f1(const std::vector<double>& in_scores,
                                     const std::vector<double>& ood_scores) {
    if (in_scores.empty() || ood_scores.empty())
        throw ValidationError("tune_threshold_max_f1: both score lists must be non-empty");

    const std::vector<double> candidates = candidate_thresholds(in_scores, ood_scores);
    double best_threshold = candidates.front();
    double best_f1 = -1.0;
    for (double t : candidates) {  // ascending, so ties keep the lower threshold
        const double f1 = f1_at_threshold(in_scores, ood_scores, t);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_threshold = t;
        }
    }
    return {best_threshold, in_scores.size() + ood_scores.size()};
}

ThresholdModel conservative_threshold(const std::vector<double>& ood_scores) {
    if (ood_scores.empty())
        throw ValidationError("conservative_threshold: need at least one OOD score");
    double mean = 0.0;
    for (double s : ood_scores) mean += s;
    mean /= static_cast<double>(ood_scores.size());
    double var = 0.0;
    for (double s : ood_scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(ood_scores.size());  // population variance
    double threshold = mean + std::sqrt(var);
    threshold = std::clamp(threshold, 0.0, 1.0);
    return {threshold, ood_scores.size()};
}

F1Report evaluate_f1(const std::vector<OodVerdict>& verdicts,
                     const std::vector<OodTruth>& truth) {
    if (verdicts.size() != truth.size())
        throw ValidationError("evaluate_f1: " + std::to_string(verdicts.size()) +
                              " verdicts vs " + std::to_string(truth.size()) + " truths");
    Counts c;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (verdicts[i].instance_id != truth[i].instance_id)
            throw ValidationError("evaluate_f1: instance id mismatch at position " +
                                  std::to_string(i));
        if (verdicts[i].is_ood && truth[i].is_ood)
            ++c.tp;
        else if (verdicts[i].is_ood)
            ++c.fp;
        else if (truth[i].is_ood)
            ++c.fn;
    }
    return report_from_counts(c);
}

std::vector<double> max_softmax_probability(const Matrix& scores) {
    std::vector<double> result(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double row_max = scores.at(i, 0);
        for (std::size_t j = 1; j < scores.cols(); ++j)
            row_max = std::max(row_max, scores.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < scores.cols(); ++j)
            denom += std::exp(scores.at(i, j) - row_max);
        result[i] = 1.0 / denom;  // exp(max - max) / denom
    }
    return result;
}

std::vector<double> max_probability_from_distances(
    const std::vector<std::vector<std::size_t>>& distances) {
    std::vector<double> result(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i) {
        const auto& row = distances[i];
        if (row.empty()) throw ValidationError("max_probability_from_distances: empty row");
        std::size_t min_d = row[0];
        for (std::size_t d : row) min_d = std::min(min_d, d);
        double denom = 0.0;
        for (std::size_t d : row)
            denom += std::exp(-(static_cast<double>(d) - static_cast<double>(min_d)));
        result[i] = 1.0 / denom;
    }
    return result;
}

std::vector<SweepPoint> f1_sweep(const std::vector<double>& in_scores,
                                 const std::vector<double>& ood_scores) {
    if (in_scores.empty() || ood_scores.empty())
        throw ValidationError("f1_sweep: both score lists must be non-empty");
    std::vector<SweepPoint> sweep;
    for (double t : candidate_thresholds(in_scores, ood_scores))
        sweep.push_back({t, f1_at_threshold(in_scores, ood_scores, t)});
    return sweep;
}

}  // namespace llc
