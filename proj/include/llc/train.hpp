#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "llc/bitcode.hpp"
#include "llc/data.hpp"
#include "llc/decode.hpp"
#include "llc/model.hpp"
#include "llc/optimizer.hpp"

namespace llc {

struct TrainConfig {
    std::size_t bits = 16;
    std::size_t phase1_epochs = 100;
    std::size_t phase2_epochs = 25;
    std::size_t batch_size = 64;
    double phase1_lr = 0.1;
    double phase2_lr = 0.01;  // kept below the phase-1 rate by default
    double momentum = 0.9;    // conventional default; no authoritative value
    double weight_decay = 0.0;
    Schedule schedule = Schedule::cosine;
    std::uint64_t seed = 0;
    // Phase 1 normally feeds the real-valued projection into the class
    // scores; this flag signs it (straight-through) during training too.
    bool phase1_binarize_instances = false;
    // Prefix lengths whose uniqueness is audited after training. Prefixes are
    // extracted post hoc; no joint multi-prefix loss is trained.
    std::vector<std::size_t> nested_prefix;
};

struct EpochRecord {
    int phase = 0;
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double learning_rate = 0.0;  // at epoch start
};

struct PrefixAudit {
    std::size_t bits = 0;
    std::size_t unique_count = 0;
    std::size_t collided_classes = 0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    UniquenessReport uniqueness;
    double ed_train = 0.0;
    double mhd_train = 0.0;
    double ed_test = 0.0;
    double mhd_test = 0.0;
    double bits_correct_train = 0.0;  // in [0, k]
    double bits_correct_test = 0.0;
    std::size_t train_instances = 0;
    std::size_t test_instances = 0;
    std::vector<PrefixAudit> prefix_audits;
    std::vector<std::string> warnings;
};

// Fails on invalid values; appends non-fatal issues (such as too few bits for
// unique codes) to `warnings` when given.
void validate_train_config(const TrainConfig& cfg, std::size_t num_classes,
                           std::vector<std::string>* warnings = nullptr);

struct Phase1Result {
    Codebook codebook;  // sign(C) after training
    std::vector<EpochRecord> epochs;
    std::vector<std::string> warnings;
};

// Minibatch SGD on the softmax cross-entropy of sign(C)·(P·F(x)); only C is
// signed (straight-through). Emits the packed codebook and its uniqueness
// warnings. Non-finite loss aborts with diagnostics.
Phase1Result phase1_learn_codebook(const LabeledDataset& data, LlcModel& model,
                                   const TrainConfig& cfg);

struct Phase2Result {
    std::vector<EpochRecord> epochs;
    std::vector<std::string> warnings;
};

// Per-bit sigmoid BCE against targets (code_bit+1)/2 from the frozen
// codebook. Updates backbone and P only; C is never touched.
Phase2Result phase2_learn_instances(const LabeledDataset& data, LlcModel& model,
                                    const Codebook& codebook, const TrainConfig& cfg);

// Evaluation summary over both splits for an already trained model, merged
// with the given per-epoch history.
TrainReport summarize_training(const LabeledDataset& data, const LlcModel& model,
                               const Codebook& codebook, std::vector<EpochRecord> epochs,
                               std::vector<std::string> warnings,
                               const std::vector<std::size_t>& nested_prefix);

// Phase 1 then Phase 2, then evaluation on both splits.
TrainReport train_two_phase(const LabeledDataset& data, LlcModel& model, const TrainConfig& cfg);

// i.i.d. uniform ±1 codes, redrawn until all L are distinct (up to 100
// attempts). 2^k < L is rejected up front.
Codebook random_codebook(std::size_t num_classes, std::size_t bits, std::uint64_t seed,
                         std::vector<std::string> class_names = {});

// Rows of `classifier` (one per class) projected onto the top-k right
// singular directions, computed via Jacobi eigendecomposition of the Gram
// matrix. Each direction's first nonzero component is forced positive.
Matrix svd_projections(const Matrix& classifier, std::size_t k);

// sign of svd_projections, packed per class.
Codebook svd_codebook(const Matrix& classifier, std::size_t k,
                      std::vector<std::string> class_names = {});

// Mean over the split of k - hamming(encode(x), codebook[y]).
double bits_correct_statistic(const LlcModel& model, const LabeledDataset& data,
                              const Codebook& codebook, Split split);

// Dataset-mean losses without touching parameters (used for warm-start and
// convergence checks).
double phase1_dataset_loss(const LlcModel& model, const LabeledDataset& data, Split split,
                           bool binarize_instances = false);
double phase2_dataset_loss(const LlcModel& model, const Codebook& codebook,
                           const LabeledDataset& data, Split split);

// JSON-lines: one record per epoch plus one trailing summary record.
void save_train_report(const TrainReport& report, const std::string& path);

}  // namespace llc
