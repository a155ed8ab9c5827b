#pragma once

#include <string>
#include <vector>

#include "llc/bitcode.hpp"
#include "llc/matrix.hpp"
#include "llc/model.hpp"

namespace llc {

enum class Linkage { single, complete, average };

struct Merge {
    int node_a = 0;        // existing node ids (leaves 0..L-1, merges L..2L-2)
    int node_b = 0;
    double distance = 0.0;
    int new_node = 0;
};

struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;  // exactly leaves-1 entries, distances non-decreasing

    // Leaf sets of the two children of the final merge — the top-level split.
    std::pair<std::vector<int>, std::vector<int>> top_split() const;
};

// Agglomerative clustering of class codes under Hamming distance. Merge order
// is deterministic: smallest distance first, ties by smallest (node_a, node_b).
// Average linkage must produce non-decreasing merge distances; a violation
// raises NumericError.
Dendrogram agglomerate(const Codebook& cb, Linkage linkage = Linkage::average);

// Same algorithm over an explicit distance matrix (used by taxonomy checks on
// real-valued representations and by the tests' oracles).
Dendrogram agglomerate_distances(const Matrix& distances, Linkage linkage = Linkage::average);

// Newick text with branch lengths = parent merge height - child merge height.
std::string to_newick(const Dendrogram& tree, const std::vector<std::string>& leaf_names);

enum class HeatSource { bit_codes, real_representations };

struct HeatMatrix {
    Matrix values;  // L×L, symmetric
    HeatSource source = HeatSource::bit_codes;
};

// H = M·M^T over class representation rows.
HeatMatrix inner_product_heatmap(const Matrix& class_rows, HeatSource source);

struct SpearmanResult {
    std::vector<double> per_class;
    double mean = 0.0;
};

// Row-wise Spearman rank correlation between two heatmaps, diagonal excluded,
// average ranks on ties. Needs L >= 3.
SpearmanResult spearman_rowwise(const HeatMatrix& a, const HeatMatrix& b);

struct BitSplit {
    std::vector<std::size_t> positive;  // instances with bit = +1, most confident first
    std::vector<std::size_t> negative;  // instances with bit = -1, most confident first
};

// Splits a batch on one projection bit, each side ordered by descending
// sigmoid confidence (equivalently descending |logit|).
BitSplit bit_split_report(const LlcModel& model, const Matrix& batch, std::size_t bit_index);

void save_heatmap_csv(const HeatMatrix& h, const std::vector<std::string>& names,
                      const std::string& path);

}  // namespace llc
