#include "llc/decode.hpp"

#include <string>

#include "llc/error.hpp"

namespace llc {

DecodeIndex::DecodeIndex(const Codebook& cb) : bits_(cb.bits()), flat_codes_(cb.codes()) {
    for (std::size_t c = 0; c < flat_codes_.size(); ++c)
        table_[flat_codes_[c]].push_back(static_cast<int>(c));
}

void DecodeIndex::check_length(const BitCode& code) const {
    if (code.length() != bits_)
        throw DimensionError("decode: code has " + std::to_string(code.length()) +
                             " bits, codebook has " + std::to_string(bits_));
}

std::vector<int> DecodeIndex::exact_decode(const BitCode& code) const {
    check_length(code);
    auto it = table_.find(code);
    if (it == table_.end()) return {};
    return it->second;  // insertion order was ascending class id
}

int DecodeIndex::mhd_decode(const BitCode& code) const {
    check_length(code);
    if (flat_codes_.empty()) throw ValidationError("mhd_decode: empty codebook");
    int best = 0;
    std::size_t best_distance = hamming(flat_codes_[0], code);
    for (std::size_t c = 1; c < flat_codes_.size(); ++c) {
        const std::size_t d = hamming(flat_codes_[c], code);
        if (d < best_distance) {
            best_distance = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

ClassificationReport evaluate_classification(const LlcModel& model, const Codebook& cb,
                                             const LabeledDataset& data, Split split,
                                             bool keep_instances) {
    if (cb.num_classes() != data.num_classes)
        throw DimensionError("evaluate_classification: codebook has " +
                             std::to_string(cb.num_classes()) + " classes, dataset has " +
                             std::to_string(data.num_classes));
    std::vector<std::size_t> ids;
    switch (split) {
        case Split::train: ids = data.train_indices(); break;
        case Split::test: ids = data.test_indices(); break;
        case Split::all:
            ids.resize(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) ids[i] = i;
            break;
    }

    ClassificationReport report;
    report.instances = ids.size();
    report.unique_codes = cb.audit_uniqueness().unique_count;
    if (ids.empty()) return report;

    const DecodeIndex index(cb);
    const Matrix batch = data.gather(ids);
    const EncodeResult encoded = encode(model, batch);

    std::size_t ed_hits = 0, mhd_hits = 0, bits_total = 0;
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const int label = data.labels[ids[r]];
        const std::vector<int> ed = index.exact_decode(encoded.codes[r]);
        const int mhd = index.mhd_decode(encoded.codes[r]);
        const std::size_t correct =
            cb.bits() - hamming(encoded.codes[r], cb.code(static_cast<std::size_t>(label)));
        if (ed.size() == 1 && ed[0] == label) ++ed_hits;
        if (mhd == label) ++mhd_hits;
        bits_total += correct;
        if (keep_instances) {
            report.per_instance.push_back(
                {ids[r], encoded.codes[r], label, ed, mhd, correct});
        }
    }
    report.ed_accuracy = static_cast<double>(ed_hits) / static_cast<double>(ids.size());
    report.mhd_accuracy = static_cast<double>(mhd_hits) / static_cast<double>(ids.size());
    report.mean_bits_correct =
        static_cast<double>(bits_total) / static_cast<double>(ids.size());
    return report;
}

}  // namespace llc
