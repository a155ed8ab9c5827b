#include "llc/retrieval.hpp"

#include <algorithm>
#include <string>

#include "llc/error.hpp"

namespace llc {

RetrievalIndex::RetrievalIndex(std::vector<BitCode> codes, std::vector<int> labels)
    : codes_(std::move(codes)), labels_(std::move(labels)) {
    if (codes_.size() != labels_.size())
        throw DimensionError("retrieval: " + std::to_string(codes_.size()) + " codes vs " +
                             std::to_string(labels_.size()) + " labels");
    if (!codes_.empty()) bits_ = codes_.front().length();
    int max_label = -1;
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (codes_[i].length() != bits_)
            throw DimensionError("retrieval: entry " + std::to_string(i) +
                                 " has mismatched code length");
        if (labels_[i] < 0) throw ValidationError("retrieval: negative label");
        max_label = std::max(max_label, labels_[i]);
    }
    label_counts_.assign(static_cast<std::size_t>(max_label) + 1, 0);
    for (int l : labels_) ++label_counts_[static_cast<std::size_t>(l)];
}

std::size_t RetrievalIndex::total_relevant(int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= label_counts_.size()) return 0;
    return label_counts_[static_cast<std::size_t>(label)];
}

RankedResult RetrievalIndex::query(const BitCode& code, int query_label,
                                   std::size_t topk) const {
    if (codes_.empty()) throw ValidationError("retrieval: empty database");
    if (code.length() != bits_)
        throw DimensionError("retrieval: query has " + std::to_string(code.length()) +
                             " bits, database has " + std::to_string(bits_));
    if (topk > codes_.size())
        throw ValidationError("retrieval: topk " + std::to_string(topk) +
                              " exceeds database size " + std::to_string(codes_.size()));

    std::vector<std::size_t> order(codes_.size());
    std::vector<std::size_t> dist(codes_.size());
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        order[i] = i;
        dist[i] = hamming(codes_[i], code);
    }
    // Ties inside equal distance resolve by ascending database id.
    std::stable_sort(order.begin(), order.end(),
                     [&dist](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    RankedResult result;
    result.entry_ids.reserve(topk);
    result.distances.reserve(topk);
    result.relevance.reserve(topk);
    for (std::size_t r = 0; r < topk; ++r) {
        const std::size_t id = order[r];
        result.entry_ids.push_back(id);
        result.distances.push_back(dist[id]);
        result.relevance.push_back(labels_[id] == query_label ? 1 : 0);
    }
    return result;
}

namespace {

std::size_t count_relevant(const std::vector<std::uint8_t>& rels) {
    std::size_t sum = 0;
    for (std::uint8_t r : rels) {
        if (r != 0 && r != 1)
            throw ValidationError("average_precision: relevance entries must be 0 or 1");
        sum += r;
    }
    return sum;
}

double precision_weighted_sum(const std::vector<std::uint8_t>& rels) {
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < rels.size(); ++k) {
        if (rels[k]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum;
}

}  // namespace

double average_precision_corrected(const std::vector<std::uint8_t>& rels,
                                   std::size_t total_relevant) {
    const std::size_t retrieved_relevant = count_relevant(rels);
    if (total_relevant < retrieved_relevant)
        throw ValidationError("average_precision: total_relevant " +
                              std::to_string(total_relevant) + " < retrieved relevant " +
                              std::to_string(retrieved_relevant));
    if (retrieved_relevant == 0) return 0.0;
    const std::size_t denom = std::min(total_relevant, rels.size());
    return precision_weighted_sum(rels) / static_cast<double>(denom);
}

double average_precision_reported(const std::vector<std::uint8_t>& rels,
                                  std::size_t total_relevant) {
    const std::size_t retrieved_relevant = count_relevant(rels);
    if (total_relevant < retrieved_relevant)
        throw ValidationError("average_precision: total_relevant " +
                              std::to_string(total_relevant) + " < retrieved relevant " +
                              std::to_string(retrieved_relevant));
    if (retrieved_relevant == 0) return 0.0;
    return precision_weighted_sum(rels) / static_cast<double>(retrieved_relevant);
}

MapResult map_at_k(const RetrievalIndex& index, const std::vector<QuerySpec>& queries,
                   std::size_t k, ApVariant variant) {
    if (queries.empty()) throw ValidationError("map_at_k: no queries");
    MapResult result;
    result.per_query.reserve(queries.size());
    double sum = 0.0;
    for (const QuerySpec& q : queries) {
        const RankedResult ranked = index.query(q.code, q.label, k);
        const std::size_t relevant = index.total_relevant(q.label);
        const double ap = variant == ApVariant::corrected
                              ? average_precision_corrected(ranked.relevance, relevant)
                              : average_precision_reported(ranked.relevance, relevant);
        if (count_relevant(ranked.relevance) == 0) ++result.zero_relevant_retrievals;
        result.per_query.push_back(ap);
        sum += ap;
    }
    result.map = sum / static_cast<double>(queries.size());
    return result;
}

}  // namespace llc
