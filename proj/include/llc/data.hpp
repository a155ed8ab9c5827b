#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "llc/matrix.hpp"

namespace llc {

struct SyntheticSpec {
    std::uint64_t seed = 0;
    int depth = 0;
    int branching = 0;
    int samples_per_class = 0;
    std::size_t dim = 0;
    double noise_scale = 1.0;
    double test_fraction = 0.25;
    bool standardized = true;
};

// Ground truth retained for taxonomy-recovery checks: the class means before
// noise and each class's branch index path from the root.
struct SyntheticInfo {
    SyntheticSpec spec;
    Matrix class_means;                        // L×dim
    std::vector<std::vector<int>> branch_paths;  // per class, length == depth
};

struct LabeledDataset {
    Matrix features;              // n×d
    std::vector<int> labels;      // dense ids in [0, num_classes)
    std::size_t num_classes = 0;
    std::vector<std::uint8_t> is_test;      // per instance
    std::vector<std::string> class_names;   // dense id -> original label token
    std::optional<SyntheticInfo> synthetic;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> test_indices() const;
    // Rows and labels for a subset of instances.
    Matrix gather(const std::vector<std::size_t>& ids) const;
    std::vector<int> gather_labels(const std::vector<std::size_t>& ids) const;
};

// Class means from a random tree walk (child mean = parent mean + Gaussian
// step, step scale halving per level), samples = mean + noise_scale * noise.
// L = branching^depth classes, stratified train/test split per class.
LabeledDataset generate_hierarchical(std::uint64_t seed, int depth, int branching,
                                     int samples_per_class, std::size_t dim,
                                     double noise_scale, double test_fraction = 0.25,
                                     bool standardize = true);

// IDX pair (big-endian): images magic 0x00000803 with count/rows/cols, labels
// magic 0x00000801 with count. Pixels scaled to [0,1]; all instances train.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Rectangular numeric CSV with a header. Labels are remapped to dense ids in
// sorted order; class_names keeps the original values. split_column (optional)
// must hold 0 (train) or 1 (test).
LabeledDataset load_csv(const std::string& path, const std::string& label_column,
                        const std::string& split_column = "");

// CSV (f0..f{d-1},label,split) plus a "<csv_path>.json" sidecar carrying column
// names, standardization flag and the synthetic ground truth when present.
void save_dataset(const LabeledDataset& ds, const std::string& csv_path);
LabeledDataset load_dataset(const std::string& csv_path);

// Per-dimension train-split statistics. Near-zero stddevs are replaced by 1
// so those dimensions are centered only.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

FeatureStats compute_train_stats(const LabeledDataset& ds);
void apply_standardization(LabeledDataset& ds, const FeatureStats& stats);

// Per-dimension zero-mean unit-variance using train-split statistics, applied
// to every instance. Dimensions with ~zero variance are left centered only.
void standardize_features(LabeledDataset& ds);

}  // namespace llc
