#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llc/matrix.hpp"

namespace llc {

// Packed k-bit binary code with ±1 semantics: bit b set means component b is
// +1, clear means -1. Bit 0 of word 0 holds component 0; bits beyond the
// length in the last word stay zero.
class BitCode {
public:
    BitCode() = default;
    explicit BitCode(std::size_t length);

    // values must be exactly ±1.
    static BitCode pack(const std::vector<double>& values);
    // '1' -> +1, '0' -> -1.
    static BitCode from_string(const std::string& bits);

    std::vector<double> unpack() const;
    std::string to_string() const;

    std::size_t length() const { return length_; }
    bool bit(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set_bit(std::size_t i, bool one);

    // First m components as a new code.
    BitCode prefix(std::size_t m) const;

    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const BitCode& other) const = default;

private:
    std::size_t length_ = 0;
    std::vector<std::uint64_t> words_;
};

// popcount(a XOR b); equals half the L1 distance of the unpacked ±1 vectors.
std::size_t hamming(const BitCode& a, const BitCode& b);

struct BitCodeHash {
    std::size_t operator()(const BitCode& c) const;
};

struct CollisionGroup {
    BitCode code;
    std::vector<int> class_ids;  // >= 2 entries, ascending
};

struct UniquenessReport {
    std::size_t unique_count = 0;
    std::vector<CollisionGroup> collisions;  // ordered by smallest class id
};

// L class codes indexed by class id, all the same length.
class Codebook {
public:
    Codebook() = default;
    Codebook(std::size_t bits, std::vector<BitCode> codes,
             std::vector<std::string> class_names = {});

    std::size_t bits() const { return bits_; }
    std::size_t num_classes() const { return codes_.size(); }
    const BitCode& code(std::size_t class_id) const { return codes_[class_id]; }
    const std::vector<BitCode>& codes() const { return codes_; }
    const std::vector<std::string>& class_names() const { return class_names_; }

    UniquenessReport audit_uniqueness() const;

    // First m bits of every code; names carried over, uniqueness left to the
    // caller to re-audit.
    Codebook prefix(std::size_t m) const;

    // ±1 matrix, one row per class.
    Matrix to_matrix() const;

private:
    std::size_t bits_ = 0;
    std::vector<BitCode> codes_;
    std::vector<std::string> class_names_;
};

// Text format: header "#llc-codebook k=<k> L=<L>", then one line per class:
// <class_id>\t<bitstring>[\t<name>].
void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace llc
