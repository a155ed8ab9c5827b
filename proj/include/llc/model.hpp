#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "llc/bitcode.hpp"
#include "llc/matrix.hpp"
#include "llc/rng.hpp"

namespace llc {

// MLP feature extractor: weight[out×in]·x + bias per layer, ReLU between
// layers, no activation after the last one.
struct Backbone {
    std::vector<Matrix> weights;  // layer i: out×in
    std::vector<Matrix> biases;   // layer i: 1×out

    // An empty layer list is the identity map (used by tests and tiny setups);
    // both dims are then 0, meaning "any".
    std::size_t input_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
    std::size_t output_dim() const { return weights.empty() ? 0 : weights.back().rows(); }

    Matrix forward(const Matrix& batch) const;
};

// Backbone F, projection P (k×d) and real code matrix C (L×k). The class
// codebook is sign(C); the instance code of x is sign(P·F(x)).
struct LlcModel {
    Backbone backbone;
    Matrix projection;   // k×d
    Matrix code_matrix;  // L×k

    std::size_t input_dim() const { return backbone.input_dim(); }
    std::size_t feature_dim() const { return projection.cols(); }
    std::size_t code_bits() const { return projection.rows(); }
    std::size_t num_classes() const { return code_matrix.rows(); }

    // sign(C) packed per class.
    Codebook codebook(std::vector<std::string> class_names = {}) const;
};

LlcModel make_model(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                    std::size_t feature_dim, std::size_t bits, std::size_t num_classes,
                    RandomStream& rng);

struct EncodeResult {
    std::vector<BitCode> codes;  // one per batch row
    Matrix logits;               // n×k pre-binarization projection outputs
};

EncodeResult encode(const LlcModel& model, const Matrix& batch);

// Phase-1 scores B(C)·(P·F(x)) -> n×L. With binarize_instances the projection
// output is signed first (the Phase-2/inference composition).
Matrix class_scores(const LlcModel& model, const Matrix& batch, bool binarize_instances = false);

// Binary checkpoint: magic "LLC1", u32 version, u32 d/k/L, u32 backbone entry
// count, each entry and then P and C as u32 rows/cols + row-major f64
// little-endian payload, trailing u64 FNV-1a checksum of all payload bytes.
void save_checkpoint(const LlcModel& model, const std::string& path);
LlcModel load_checkpoint(const std::string& path);

}  // namespace llc
