#include "llc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "llc/error.hpp"
#include "llc/rng.hpp"

namespace llc {

std::vector<std::size_t> LabeledDataset::train_indices() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < size(); ++i)
        if (!is_test[i]) ids.push_back(i);
    return ids;
}

std::vector<std::size_t> LabeledDataset::test_indices() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < size(); ++i)
        if (is_test[i]) ids.push_back(i);
    return ids;
}

Matrix LabeledDataset::gather(const std::vector<std::size_t>& ids) const {
    Matrix out(ids.size(), dim());
    for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t j = 0; j < dim(); ++j) out.at(r, j) = features.at(ids[r], j);
    return out;
}

std::vector<int> LabeledDataset::gather_labels(const std::vector<std::size_t>& ids) const {
    std::vector<int> out(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) out[r] = labels[ids[r]];
    return out;
}

LabeledDataset generate_hierarchical(std::uint64_t seed, int depth, int branching,
                                     int samples_per_class, std::size_t dim,
                                     double noise_scale, double test_fraction,
                                     bool standardize) {
    if (depth < 1) throw ValidationError("generate_hierarchical: depth must be >= 1");
    if (branching < 2) throw ValidationError("generate_hierarchical: branching must be >= 2");
    if (samples_per_class < 1)
        throw ValidationError("generate_hierarchical: samples_per_class must be >= 1");
    if (dim == 0) throw ValidationError("generate_hierarchical: dim must be >= 1");
    if (noise_scale < 0.0)
        throw ValidationError("generate_hierarchical: noise_scale must be >= 0");
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ValidationError("generate_hierarchical: test_fraction must be in [0,1)");

    std::size_t num_classes = 1;
    for (int level = 0; level < depth; ++level) {
        num_classes *= static_cast<std::size_t>(branching);
        if (num_classes > 65536)
            throw ValidationError("generate_hierarchical: more than 65536 classes");
    }

    RandomStream rng(seed);

    // Expand level by level; node order is lexicographic in branch path, so
    // leaf index c has path = digits of c in base `branching`.
    std::vector<std::vector<double>> level_means{std::vector<double>(dim, 0.0)};
    for (int level = 1; level <= depth; ++level) {
        const double step_scale = std::pow(0.5, level - 1);
        std::vector<std::vector<double>> next;
        next.reserve(level_means.size() * static_cast<std::size_t>(branching));
        for (const auto& parent : level_means) {
            for (int child = 0; child < branching; ++child) {
                std::vector<double> mean(dim);
                for (std::size_t j = 0; j < dim; ++j)
                    mean[j] = parent[j] + step_scale * rng.normal();
                next.push_back(std::move(mean));
            }
        }
        level_means = std::move(next);
    }

    LabeledDataset ds;
    ds.num_classes = num_classes;
    ds.provenance = "synthetic";
    const std::size_t spc = static_cast<std::size_t>(samples_per_class);
    ds.features = Matrix(num_classes * spc, dim);
    ds.labels.resize(num_classes * spc);
    ds.is_test.resize(num_classes * spc);

    std::size_t n_test = static_cast<std::size_t>(
        std::floor(test_fraction * static_cast<double>(spc) + 0.5));
    if (n_test >= spc) n_test = spc - 1;  // keep every class in the train split

    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t s = 0; s < spc; ++s) {
            const std::size_t row = c * spc + s;
            for (std::size_t j = 0; j < dim; ++j)
                ds.features.at(row, j) = level_means[c][j] + noise_scale * rng.normal();
            ds.labels[row] = static_cast<int>(c);
            ds.is_test[row] = s >= spc - n_test ? 1 : 0;
        }
        ds.class_names.push_back(std::to_string(c));
    }

    SyntheticInfo info;
    info.spec = {seed,        depth,         branching,   samples_per_class,
                 dim,         noise_scale,   test_fraction, standardize};
    info.class_means = Matrix(num_classes, dim);
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t j = 0; j < dim; ++j) info.class_means.at(c, j) = level_means[c][j];
    info.branch_paths.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::vector<int> path(depth);
        std::size_t rem = c;
        for (int level = depth - 1; level >= 0; --level) {
            path[static_cast<std::size_t>(level)] = static_cast<int>(rem % branching);
            rem /= static_cast<std::size_t>(branching);
        }
        info.branch_paths[c] = std::move(path);
    }
    ds.synthetic = std::move(info);

    if (standardize) standardize_features(ds);
    ds.features.require_finite("generate_hierarchical");
    return ds;
}

FeatureStats compute_train_stats(const LabeledDataset& ds) {
    const auto train = ds.train_indices();
    if (train.empty()) throw ValidationError("compute_train_stats: empty train split");
    const std::size_t d = ds.dim();
    FeatureStats stats;
    stats.mean.assign(d, 0.0);
    stats.stddev.assign(d, 0.0);
    for (std::size_t id : train)
        for (std::size_t j = 0; j < d; ++j) stats.mean[j] += ds.features.at(id, j);
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] /= static_cast<double>(train.size());
    for (std::size_t id : train)
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = ds.features.at(id, j) - stats.mean[j];
            stats.stddev[j] += delta * delta;
        }
    for (std::size_t j = 0; j < d; ++j) {
        const double stddev = std::sqrt(stats.stddev[j] / static_cast<double>(train.size()));
        stats.stddev[j] = stddev < 1e-12 ? 1.0 : stddev;
    }
    return stats;
}

void apply_standardization(LabeledDataset& ds, const FeatureStats& stats) {
    if (stats.mean.size() != ds.dim() || stats.stddev.size() != ds.dim())
        throw DimensionError("apply_standardization: stats for " +
                             std::to_string(stats.mean.size()) + " dims, dataset has " +
                             std::to_string(ds.dim()));
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.dim(); ++j)
            ds.features.at(i, j) = (ds.features.at(i, j) - stats.mean[j]) / stats.stddev[j];
}

void standardize_features(LabeledDataset& ds) {
    apply_standardization(ds, compute_train_stats(ds));
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw IoError("load_idx: truncated header in " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw IoError("load_idx: cannot open " + images_path);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw IoError("load_idx: cannot open " + labels_path);

    const std::uint32_t image_magic = read_be_u32(images, images_path);
    if (image_magic != 0x00000803u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x", image_magic);
        throw ParseError("load_idx: image magic " + std::string(buf) + ", expected 0x00000803");
    }
    const std::uint32_t n_images = read_be_u32(images, images_path);
    const std::uint32_t rows = read_be_u32(images, images_path);
    const std::uint32_t cols = read_be_u32(images, images_path);

    const std::uint32_t label_magic = read_be_u32(labels, labels_path);
    if (label_magic != 0x00000801u) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "0x%08x", label_magic);
        throw ParseError("load_idx: label magic " + std::string(buf) + ", expected 0x00000801");
    }
    const std::uint32_t n_labels = read_be_u32(labels, labels_path);
    if (n_images != n_labels)
        throw ValidationError("load_idx: " + std::to_string(n_images) + " images vs " +
                              std::to_string(n_labels) + " labels");

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    LabeledDataset ds;
    ds.features = Matrix(n_images, pixels);
    ds.labels.resize(n_images);
    ds.is_test.assign(n_images, 0);
    ds.provenance = "idx:" + images_path;

    std::vector<unsigned char> buffer(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        images.read(reinterpret_cast<char*>(buffer.data()),
                    static_cast<std::streamsize>(pixels));
        if (images.gcount() != static_cast<std::streamsize>(pixels))
            throw IoError("load_idx: truncated image data in " + images_path);
        for (std::size_t j = 0; j < pixels; ++j)
            ds.features.at(i, j) = static_cast<double>(buffer[j]) / 255.0;
    }

    std::vector<unsigned char> raw_labels(n_labels);
    labels.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(n_labels));
    if (labels.gcount() != static_cast<std::streamsize>(n_labels))
        throw IoError("load_idx: truncated label data in " + labels_path);

    // Dense remap in sorted order of the raw byte values.
    std::map<unsigned char, int> remap;
    for (unsigned char v : raw_labels) remap.emplace(v, 0);
    int next_id = 0;
    for (auto& [value, id] : remap) id = next_id++;
    for (std::uint32_t i = 0; i < n_labels; ++i) ds.labels[i] = remap.at(raw_labels[i]);
    ds.num_classes = remap.size();
    for (auto& [value, id] : remap) ds.class_names.push_back(std::to_string(value));
    return ds;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row_no, const std::string& column) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError("load_csv: non-numeric cell '" + cell + "' in column '" + column +
                         "' at data row " + std::to_string(row_no));
    return value;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

LabeledDataset load_csv(const std::string& path, const std::string& label_column,
                        const std::string& split_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_csv: cannot open " + path);

    std::string header;
    if (!std::getline(in, header)) throw ParseError("load_csv: empty file " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const std::vector<std::string> columns = split_line(header);

    auto find_column = [&](const std::string& name) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    };
    const std::ptrdiff_t label_idx = find_column(label_column);
    if (label_idx < 0) {
        std::string available;
        for (const auto& c : columns) available += (available.empty() ? "" : ", ") + c;
        throw ParseError("load_csv: no column '" + label_column + "' (available: " +
                         available + ")");
    }
    std::ptrdiff_t split_idx = -1;
    if (!split_column.empty()) {
        split_idx = find_column(split_column);
        if (split_idx < 0)
            throw ParseError("load_csv: no split column '" + split_column + "'");
    }

    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (static_cast<std::ptrdiff_t>(i) != label_idx &&
            static_cast<std::ptrdiff_t>(i) != split_idx)
            feature_cols.push_back(i);

    std::vector<std::vector<double>> rows;
    std::vector<double> raw_labels;
    std::vector<std::uint8_t> splits;
    std::string line;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != columns.size())
            throw ParseError("load_csv: row " + std::to_string(row_no) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(columns.size()));
        std::vector<double> features(feature_cols.size());
        for (std::size_t f = 0; f < feature_cols.size(); ++f)
            features[f] = parse_cell(cells[feature_cols[f]], row_no, columns[feature_cols[f]]);
        rows.push_back(std::move(features));
        raw_labels.push_back(
            parse_cell(cells[static_cast<std::size_t>(label_idx)], row_no, label_column));
        if (split_idx >= 0) {
            const double s =
                parse_cell(cells[static_cast<std::size_t>(split_idx)], row_no, split_column);
            if (s != 0.0 && s != 1.0)
                throw ValidationError("load_csv: split value " + format_double(s) +
                                      " at data row " + std::to_string(row_no) +
                                      ", expected 0 or 1");
            splits.push_back(s == 1.0 ? 1 : 0);
        } else {
            splits.push_back(0);
        }
    }
    if (rows.empty()) throw ParseError("load_csv: no data rows in " + path);

    // Sorted-order dense remap of labels.
    std::map<double, int> remap;
    for (double v : raw_labels) remap.emplace(v, 0);
    int next_id = 0;
    for (auto& [value, id] : remap) id = next_id++;

    LabeledDataset ds;
    ds.features = Matrix(rows.size(), feature_cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < feature_cols.size(); ++j) ds.features.at(i, j) = rows[i][j];
    ds.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) ds.labels[i] = remap.at(raw_labels[i]);
    ds.num_classes = remap.size();
    for (auto& [value, id] : remap) ds.class_names.push_back(format_double(value));
    ds.is_test = std::move(splits);
    ds.provenance = "csv:" + path;

    if (split_idx >= 0) {
        std::vector<bool> in_train(ds.num_classes, false);
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (!ds.is_test[i]) in_train[static_cast<std::size_t>(ds.labels[i])] = true;
        for (std::size_t c = 0; c < ds.num_classes; ++c)
            if (!in_train[c])
                throw ValidationError("load_csv: class '" + ds.class_names[c] +
                                      "' has no train instances");
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset files (CSV + JSON sidecar)
// ---------------------------------------------------------------------------

void save_dataset(const LabeledDataset& ds, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("save_dataset: cannot open " + csv_path);
    for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
    out << "label,split\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) out << format_double(ds.features.at(i, j)) << ',';
        out << ds.labels[i] << ',' << int(ds.is_test[i]) << '\n';
    }
    if (!out) throw IoError("save_dataset: write failed for " + csv_path);

    nlohmann::json sidecar;
    sidecar["format"] = "llc-dataset";
    sidecar["version"] = 1;
    sidecar["label_column"] = "label";
    sidecar["split_column"] = "split";
    sidecar["num_classes"] = ds.num_classes;
    sidecar["class_names"] = ds.class_names;
    sidecar["provenance"] = ds.provenance;
    if (ds.synthetic) {
        const SyntheticInfo& info = *ds.synthetic;
        nlohmann::json syn;
        syn["seed"] = info.spec.seed;
        syn["depth"] = info.spec.depth;
        syn["branching"] = info.spec.branching;
        syn["samples_per_class"] = info.spec.samples_per_class;
        syn["dim"] = info.spec.dim;
        syn["noise_scale"] = info.spec.noise_scale;
        syn["test_fraction"] = info.spec.test_fraction;
        syn["standardized"] = info.spec.standardized;
        nlohmann::json means = nlohmann::json::array();
        for (std::size_t c = 0; c < info.class_means.rows(); ++c) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t j = 0; j < info.class_means.cols(); ++j)
                row.push_back(info.class_means.at(c, j));
            means.push_back(std::move(row));
        }
        syn["class_means"] = std::move(means);
        syn["branch_paths"] = info.branch_paths;
        sidecar["synthetic"] = std::move(syn);
    }
    std::ofstream side(csv_path + ".json", std::ios::binary);
    if (!side) throw IoError("save_dataset: cannot open " + csv_path + ".json");
    side << sidecar.dump(2) << '\n';
    if (!side) throw IoError("save_dataset: write failed for " + csv_path + ".json");
}

LabeledDataset load_dataset(const std::string& csv_path) {
    std::string label_column = "label";
    std::string split_column;
    nlohmann::json sidecar;
    const std::string sidecar_path = csv_path + ".json";
    const bool has_sidecar = std::filesystem::exists(sidecar_path);
    if (has_sidecar) {
        std::ifstream side(sidecar_path, std::ios::binary);
        if (!side) throw IoError("load_dataset: cannot open " + sidecar_path);
        try {
            side >> sidecar;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("load_dataset: bad sidecar " + sidecar_path + ": " + e.what());
        }
        label_column = sidecar.value("label_column", "label");
        split_column = sidecar.value("split_column", "");
    } else {
        split_column = "split";
    }

    LabeledDataset ds = load_csv(csv_path, label_column, split_column);

    if (has_sidecar && sidecar.contains("synthetic")) {
        const nlohmann::json& syn = sidecar["synthetic"];
        SyntheticInfo info;
        info.spec.seed = syn.value("seed", std::uint64_t{0});
        info.spec.depth = syn.value("depth", 0);
        info.spec.branching = syn.value("branching", 0);
        info.spec.samples_per_class = syn.value("samples_per_class", 0);
        info.spec.dim = syn.value("dim", std::size_t{0});
        info.spec.noise_scale = syn.value("noise_scale", 0.0);
        info.spec.test_fraction = syn.value("test_fraction", 0.25);
        info.spec.standardized = syn.value("standardized", true);
        const auto& means = syn.at("class_means");
        info.class_means = Matrix(means.size(), means.empty() ? 0 : means[0].size());
        for (std::size_t c = 0; c < means.size(); ++c)
            for (std::size_t j = 0; j < info.class_means.cols(); ++j)
                info.class_means.at(c, j) = means[c][j].get<double>();
        info.branch_paths = syn.at("branch_paths").get<std::vector<std::vector<int>>>();
        ds.synthetic = std::move(info);
    }
    return ds;
}

}  // namespace llc
