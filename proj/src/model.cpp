#include "llc/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "llc/error.hpp"

namespace llc {

Matrix Backbone::forward(const Matrix& batch) const {
    if (weights.empty()) return batch;
    if (batch.cols() != input_dim())
        throw DimensionError("backbone: batch has " + std::to_string(batch.cols()) +
                             " features, expected " + std::to_string(input_dim()));
    Matrix h = batch;
    for (std::size_t layer = 0; layer < weights.size(); ++layer) {
        Matrix z = matmul_nt(h, weights[layer]);
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j) z.at(i, j) += biases[layer].at(0, j);
        if (layer + 1 < weights.size()) {
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.data()[i] < 0.0) z.data()[i] = 0.0;
        }
        h = std::move(z);
    }
    return h;
}

Codebook LlcModel::codebook(std::vector<std::string> class_names) const {
    std::vector<BitCode> codes;
    codes.reserve(num_classes());
    for (std::size_t c = 0; c < num_classes(); ++c) {
        BitCode code(code_bits());
        for (std::size_t j = 0; j < code_bits(); ++j)
            code.set_bit(j, code_matrix.at(c, j) >= 0.0);
        codes.push_back(std::move(code));
    }
    return Codebook(code_bits(), std::move(codes), std::move(class_names));
}

LlcModel make_model(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                    std::size_t feature_dim, std::size_t bits, std::size_t num_classes,
                    RandomStream& rng) {
    if (input_dim == 0 || feature_dim == 0 || bits == 0 || num_classes == 0)
        throw ValidationError("make_model: all dimensions must be >= 1");

    LlcModel model;
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(feature_dim);
    for (std::size_t layer = 0; layer + 1 < dims.size(); ++layer) {
        const std::size_t fan_in = dims[layer];
        const std::size_t fan_out = dims[layer + 1];
        Matrix w(fan_out, fan_in);
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal() * scale;
        model.backbone.weights.push_back(std::move(w));
        model.backbone.biases.emplace_back(1, fan_out);
    }

    model.projection = Matrix(bits, feature_dim);
    {
        const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
        for (std::size_t i = 0; i < model.projection.size(); ++i)
            model.projection.data()[i] = rng.normal() * scale;
    }
    model.code_matrix = Matrix(num_classes, bits);
    {
        const double scale = 1.0 / std::sqrt(static_cast<double>(bits));
        for (std::size_t i = 0; i < model.code_matrix.size(); ++i)
            model.code_matrix.data()[i] = rng.normal() * scale;
    }
    return model;
}

static void check_batch(const LlcModel& model, const Matrix& batch) {
    const std::size_t expected =
        model.backbone.weights.empty() ? model.feature_dim() : model.input_dim();
    if (batch.cols() != expected)
        throw DimensionError("encode: batch has " + std::to_string(batch.cols()) +
                             " features, model expects " + std::to_string(expected));
}

EncodeResult encode(const LlcModel& model, const Matrix& batch) {
    check_batch(model, batch);
    EncodeResult result;
    result.logits = matmul_nt(model.backbone.forward(batch), model.projection);
    result.codes.reserve(batch.rows());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        BitCode code(model.code_bits());
        for (std::size_t j = 0; j < model.code_bits(); ++j)
            code.set_bit(j, result.logits.at(i, j) >= 0.0);
        result.codes.push_back(std::move(code));
    }
    return result;
}

Matrix class_scores(const LlcModel& model, const Matrix& batch, bool binarize_instances) {
    check_batch(model, batch);
    Matrix z = matmul_nt(model.backbone.forward(batch), model.projection);  // n×k
    if (binarize_instances) {
        for (std::size_t i = 0; i < z.size(); ++i)
            z.data()[i] = z.data()[i] >= 0.0 ? 1.0 : -1.0;
    }
    Matrix signed_codes(model.num_classes(), model.code_bits());
    for (std::size_t i = 0; i < signed_codes.size(); ++i)
        signed_codes.data()[i] = model.code_matrix.data()[i] >= 0.0 ? 1.0 : -1.0;
    return matmul_nt(z, signed_codes);  // n×L
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'L', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

struct Fnv64 {
    std::uint64_t hash = 1469598103934665603ull;
    void feed(const unsigned char* bytes, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ull;
        }
    }
};

class PayloadWriter {
public:
    explicit PayloadWriter(std::ofstream& out) : out_(out) {}

    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        write(b, 4);
    }
    void f64(double v) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        write(b, 8);
    }
    void matrix(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        for (std::size_t i = 0; i < m.size(); ++i) f64(m.data()[i]);
    }
    std::uint64_t checksum() const { return fnv_.hash; }

private:
    void write(const unsigned char* b, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(b), static_cast<std::streamsize>(n));
        fnv_.feed(b, n);
    }
    std::ofstream& out_;
    Fnv64 fnv_;
};

class PayloadReader {
public:
    explicit PayloadReader(std::ifstream& in) : in_(in) {}

    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() {
        unsigned char b[8];
        read(b, 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(bits);
    }
    Matrix matrix() {
        const std::uint32_t rows = u32();
        const std::uint32_t cols = u32();
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = f64();
        return m;
    }
    std::uint64_t checksum() const { return fnv_.hash; }

private:
    void read(unsigned char* b, std::size_t n) {
        in_.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw IoError("load_checkpoint: truncated file");
        fnv_.feed(b, n);
    }
    std::ifstream& in_;
    Fnv64 fnv_;
};

}  // namespace

void save_checkpoint(const LlcModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);

    PayloadWriter payload(out);
    payload.u32(kVersion);
    payload.u32(static_cast<std::uint32_t>(model.feature_dim()));
    payload.u32(static_cast<std::uint32_t>(model.code_bits()));
    payload.u32(static_cast<std::uint32_t>(model.num_classes()));
    payload.u32(static_cast<std::uint32_t>(model.backbone.weights.size() * 2));
    for (std::size_t layer = 0; layer < model.backbone.weights.size(); ++layer) {
        payload.matrix(model.backbone.weights[layer]);
        payload.matrix(model.backbone.biases[layer]);
    }
    payload.matrix(model.projection);
    payload.matrix(model.code_matrix);

    const std::uint64_t sum = payload.checksum();
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((sum >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

LlcModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("load_checkpoint: bad magic in " + path);

    PayloadReader payload(in);
    const std::uint32_t version = payload.u32();
    if (version != kVersion)
        throw ParseError("load_checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t feature_dim = payload.u32();
    const std::uint32_t bits = payload.u32();
    const std::uint32_t num_classes = payload.u32();
    const std::uint32_t entries = payload.u32();
    if (entries % 2 != 0)
        throw ParseError("load_checkpoint: odd backbone entry count");

    LlcModel model;
    for (std::uint32_t e = 0; e < entries / 2; ++e) {
        Matrix w = payload.matrix();
        Matrix b = payload.matrix();
        if (b.rows() != 1 || b.cols() != w.rows())
            throw DimensionError("load_checkpoint: bias shape disagrees with layer weight");
        model.backbone.weights.push_back(std::move(w));
        model.backbone.biases.push_back(std::move(b));
    }
    model.projection = payload.matrix();
    model.code_matrix = payload.matrix();

    const std::uint64_t computed = payload.checksum();
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw IoError("load_checkpoint: truncated file");
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    if (stored != computed) throw ParseError("load_checkpoint: checksum mismatch");

    if (model.projection.rows() != bits || model.projection.cols() != feature_dim)
        throw DimensionError("load_checkpoint: projection shape disagrees with header");
    if (model.code_matrix.rows() != num_classes || model.code_matrix.cols() != bits)
        throw DimensionError("load_checkpoint: code matrix shape disagrees with header");
    if (!model.backbone.weights.empty() && model.backbone.output_dim() != feature_dim)
        throw DimensionError("load_checkpoint: backbone output disagrees with header");
    return model;
}

}  // namespace llc
