#pragma once

#include <cstdint>
#include <vector>

#include "llc/bitcode.hpp"

namespace llc {

struct RankedResult {
    std::vector<std::size_t> entry_ids;     // ascending (distance, id)
    std::vector<std::size_t> distances;     // non-decreasing
    std::vector<std::uint8_t> relevance;    // 1 iff entry label == query label
};

// Immutable database of (code, label) pairs scanned by popcount.
class RetrievalIndex {
public:
    RetrievalIndex(std::vector<BitCode> codes, std::vector<int> labels);

    RankedResult query(const BitCode& code, int query_label, std::size_t topk) const;

    // Database entries carrying this label.
    std::size_t total_relevant(int label) const;

    std::size_t size() const { return codes_.size(); }
    std::size_t bits() const { return bits_; }
    int label(std::size_t entry) const { return labels_[entry]; }

private:
    std::size_t bits_ = 0;
    std::vector<BitCode> codes_;
    std::vector<int> labels_;
    std::vector<std::size_t> label_counts_;
};

// AP@K = sum_k P@k·rel(k) / min(total_relevant, K). Zero when nothing
// relevant was retrieved.
double average_precision_corrected(const std::vector<std::uint8_t>& rels,
                                   std::size_t total_relevant);

// Legacy variant: divides by the number of relevant items actually retrieved.
// Queries with no relevant retrieval score 0 (the original code skipped them;
// callers count those separately).
double average_precision_reported(const std::vector<std::uint8_t>& rels,
                                  std::size_t total_relevant);

enum class ApVariant { corrected, reported };

struct QuerySpec {
    BitCode code;
    int label = 0;
};

struct MapResult {
    double map = 0.0;
    std::vector<double> per_query;
    std::size_t zero_relevant_retrievals = 0;  // queries whose top-K had no relevant entry
};

MapResult map_at_k(const RetrievalIndex& index, const std::vector<QuerySpec>& queries,
                   std::size_t k, ApVariant variant);

}  // namespace llc
