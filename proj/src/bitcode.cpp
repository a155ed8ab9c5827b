#include "llc/bitcode.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "llc/error.hpp"

namespace llc {

BitCode::BitCode(std::size_t length) : length_(length), words_((length + 63) / 64, 0) {}

BitCode BitCode::pack(const std::vector<double>& values) {
    BitCode code(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (v != 1.0 && v != -1.0)
            throw ValidationError("pack: entry " + std::to_string(i) + " is " +
                                  std::to_string(v) + ", expected +1 or -1");
        if (v == 1.0) code.words_[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
    return code;
}

BitCode BitCode::from_string(const std::string& bits) {
    BitCode code(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1')
            code.words_[i >> 6] |= std::uint64_t{1} << (i & 63);
        else if (bits[i] != '0')
            throw ParseError(std::string("from_string: bad character '") + bits[i] + "'");
    }
    return code;
}

std::vector<double> BitCode::unpack() const {
    std::vector<double> values(length_);
    for (std::size_t i = 0; i < length_; ++i) values[i] = bit(i) ? 1.0 : -1.0;
    return values;
}

std::string BitCode::to_string() const {
    std::string s(length_, '0');
    for (std::size_t i = 0; i < length_; ++i)
        if (bit(i)) s[i] = '1';
    return s;
}

void BitCode::set_bit(std::size_t i, bool one) {
    if (i >= length_) throw ValidationError("set_bit: index out of range");
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (one)
        words_[i >> 6] |= mask;
    else
        words_[i >> 6] &= ~mask;
}

BitCode BitCode::prefix(std::size_t m) const {
    if (m == 0 || m > length_)
        throw ValidationError("prefix: m=" + std::to_string(m) + " outside (0, " +
                              std::to_string(length_) + "]");
    BitCode out(m);
    for (std::size_t w = 0; w < out.words_.size(); ++w) out.words_[w] = words_[w];
    const std::size_t tail = m & 63;
    if (tail != 0) out.words_.back() &= (std::uint64_t{1} << tail) - 1;
    return out;
}

std::size_t hamming(const BitCode& a, const BitCode& b) {
    if (a.length() != b.length())
        throw DimensionError("hamming: lengths " + std::to_string(a.length()) + " vs " +
                             std::to_string(b.length()));
    std::size_t count = 0;
    for (std::size_t w = 0; w < a.words().size(); ++w)
        count += static_cast<std::size_t>(std::popcount(a.words()[w] ^ b.words()[w]));
    return count;
}

std::size_t BitCodeHash::operator()(const BitCode& c) const {
    // FNV-1a over the packed words plus the length.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (v >> (8 * byte)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(c.length());
    for (std::uint64_t w : c.words()) mix(w);
    return static_cast<std::size_t>(h);
}

Codebook::Codebook(std::size_t bits, std::vector<BitCode> codes,
                   std::vector<std::string> class_names)
    : bits_(bits), codes_(std::move(codes)), class_names_(std::move(class_names)) {
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (codes_[i].length() != bits_)
            throw DimensionError("codebook: class " + std::to_string(i) + " has " +
                                 std::to_string(codes_[i].length()) + " bits, expected " +
                                 std::to_string(bits_));
    }
    if (!class_names_.empty() && class_names_.size() != codes_.size())
        throw DimensionError("codebook: name count does not match class count");
}

UniquenessReport Codebook::audit_uniqueness() const {
    std::unordered_map<BitCode, std::vector<int>, BitCodeHash> holders;
    for (std::size_t i = 0; i < codes_.size(); ++i)
        holders[codes_[i]].push_back(static_cast<int>(i));

    UniquenessReport report;
    report.unique_count = holders.size();
    std::map<int, CollisionGroup> ordered;
    for (auto& [code, ids] : holders) {
        if (ids.size() < 2) continue;
        CollisionGroup group{code, ids};
        ordered.emplace(ids.front(), std::move(group));
    }
    for (auto& [first_id, group] : ordered) report.collisions.push_back(std::move(group));
    return report;
}

Codebook Codebook::prefix(std::size_t m) const {
    std::vector<BitCode> truncated;
    truncated.reserve(codes_.size());
    for (const BitCode& c : codes_) truncated.push_back(c.prefix(m));
    return Codebook(m, std::move(truncated), class_names_);
}

Matrix Codebook::to_matrix() const {
    Matrix m(codes_.size(), bits_);
    for (std::size_t i = 0; i < codes_.size(); ++i)
        for (std::size_t j = 0; j < bits_; ++j) m.at(i, j) = codes_[i].bit(j) ? 1.0 : -1.0;
    return m;
}

void save_codebook(const Codebook& cb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_codebook: cannot open " + path);
    out << "#llc-codebook k=" << cb.bits() << " L=" << cb.num_classes() << "\n";
    for (std::size_t i = 0; i < cb.num_classes(); ++i) {
        out << i << '\t' << cb.code(i).to_string();
        if (!cb.class_names().empty() && !cb.class_names()[i].empty())
            out << '\t' << cb.class_names()[i];
        out << '\n';
    }
    if (!out) throw IoError("save_codebook: write failed for " + path);
}

Codebook load_codebook(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_codebook: cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw ParseError("load_codebook: empty file " + path);
    std::size_t k = 0, num_classes = 0;
    if (std::sscanf(header.c_str(), "#llc-codebook k=%zu L=%zu", &k, &num_classes) != 2)
        throw ParseError("load_codebook: bad header '" + header + "'");

    std::vector<BitCode> codes(num_classes);
    std::vector<std::string> names(num_classes);
    std::vector<bool> seen(num_classes, false);
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id_text, bits, name;
        std::getline(fields, id_text, '\t');
        std::getline(fields, bits, '\t');
        std::getline(fields, name, '\t');
        std::size_t id = 0;
        try {
            id = std::stoul(id_text);
        } catch (const std::exception&) {
            throw ParseError("load_codebook: bad class id at line " + std::to_string(line_no));
        }
        if (id >= num_classes)
            throw ParseError("load_codebook: class id " + std::to_string(id) +
                             " >= L at line " + std::to_string(line_no));
        if (bits.size() != k)
            throw ParseError("load_codebook: expected " + std::to_string(k) +
                             " bits at line " + std::to_string(line_no));
        codes[id] = BitCode::from_string(bits);
        names[id] = name;
        seen[id] = true;
    }
    for (std::size_t i = 0; i < num_classes; ++i)
        if (!seen[i])
            throw ParseError("load_codebook: class " + std::to_string(i) + " missing");

    bool any_name = false;
    for (const auto& n : names) any_name |= !n.empty();
    return Codebook(k, std::move(codes), any_name ? std::move(names) : std::vector<std::string>{});
}

}  // namespace llc
