#pragma once

#include <unordered_map>
#include <vector>

#include "llc/bitcode.hpp"
#include "llc/data.hpp"
#include "llc/model.hpp"

namespace llc {

// Hash table over class codes for exact decoding plus the flat code array for
// the minimum-Hamming scan. Immutable once built.
class DecodeIndex {
public:
    explicit DecodeIndex(const Codebook& cb);

    // All classes whose code equals `code` exactly (ascending ids, possibly
    // empty). An empty result is a misclassification for evaluation and an
    // OOD signal for detection.
    std::vector<int> exact_decode(const BitCode& code) const;

    // Class with minimum Hamming distance; ties broken by lowest class id.
    int mhd_decode(const BitCode& code) const;

    std::size_t bits() const { return bits_; }
    std::size_t num_classes() const { return flat_codes_.size(); }
    const BitCode& class_code(std::size_t class_id) const { return flat_codes_[class_id]; }

private:
    void check_length(const BitCode& code) const;

    std::size_t bits_ = 0;
    std::vector<BitCode> flat_codes_;
    std::unordered_map<BitCode, std::vector<int>, BitCodeHash> table_;
};

struct InstanceDecode {
    std::size_t instance_id = 0;
    BitCode code;
    int label = 0;
    std::vector<int> ed_result;
    int mhd_result = 0;
    std::size_t bits_correct = 0;
};

struct ClassificationReport {
    double ed_accuracy = 0.0;
    double mhd_accuracy = 0.0;
    double mean_bits_correct = 0.0;
    std::size_t instances = 0;
    std::size_t unique_codes = 0;
    std::vector<InstanceDecode> per_instance;  // filled when keep_instances
};

enum class Split { train, test, all };

// ED counts a hit only when exact_decode returns exactly {label}; MHD counts
// argmin == label.
ClassificationReport evaluate_classification(const LlcModel& model, const Codebook& cb,
                                             const LabeledDataset& data, Split split,
                                             bool keep_instances = false);

}  // namespace llc
