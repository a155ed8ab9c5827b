#include "llc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>

#include "llc/error.hpp"

namespace llc {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* linkage_name(Linkage l) {
    switch (l) {
        case Linkage::single: return "single";
        case Linkage::complete: return "complete";
        case Linkage::average: return "average";
    }
    return "?";
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> Dendrogram::top_split() const {
    if (merges.empty()) throw ValidationError("top_split: dendrogram has no merges");
    std::vector<std::pair<int, int>> children(merges.size());
    for (const Merge& m : merges)
        children[static_cast<std::size_t>(m.new_node) - leaves] = {m.node_a, m.node_b};

    auto collect = [&](int node) {
        std::vector<int> out;
        std::vector<int> stack{node};
        while (!stack.empty()) {
            const int n = stack.back();
            stack.pop_back();
            if (n < static_cast<int>(leaves)) {
                out.push_back(n);
            } else {
                const auto& [a, b] = children[static_cast<std::size_t>(n) - leaves];
                stack.push_back(a);
                stack.push_back(b);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    const Merge& root = merges.back();
    return {collect(root.node_a), collect(root.node_b)};
}

Dendrogram agglomerate_distances(const Matrix& distances, Linkage linkage) {
    const std::size_t n = distances.rows();
    if (n != distances.cols()) throw DimensionError("agglomerate: distance matrix not square");
    if (n < 2) throw ValidationError("agglomerate: need at least 2 leaves");

    struct Cluster {
        int node_id;
        std::size_t size;
    };
    std::vector<Cluster> active(n);
    for (std::size_t i = 0; i < n; ++i) active[i] = {static_cast<int>(i), 1};

    // Dense distances between active clusters, re-indexed on every merge.
    std::vector<std::vector<double>> d(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i][j] = distances.at(i, j);

    Dendrogram tree;
    tree.leaves = n;
    double previous_distance = -std::numeric_limits<double>::infinity();

    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t best_i = 0, best_j = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const double dist = d[i][j];
                const auto pair_ids = std::minmax(active[i].node_id, active[j].node_id);
                const auto best_ids = std::minmax(active[best_i].node_id, active[best_j].node_id);
                if (dist < best ||
                    (dist == best && pair_ids < best_ids)) {
                    best = dist;
                    best_i = i;
                    best_j = j;
                }
            }
        }

        if (best < previous_distance - 1e-9) {
            throw NumericError(std::string("agglomerate: ") + linkage_name(linkage) +
                               " linkage produced decreasing merge distance " +
                               format_double(best) + " after " +
                               format_double(previous_distance));
        }
        previous_distance = std::max(previous_distance, best);

        const int new_node = static_cast<int>(n + step);
        const auto [id_a, id_b] = std::minmax(active[best_i].node_id, active[best_j].node_id);
        tree.merges.push_back({id_a, id_b, best, new_node});

        const std::size_t size_i = active[best_i].size;
        const std::size_t size_j = active[best_j].size;

        // Lance-Williams update into slot best_i, drop slot best_j.
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (k == best_i || k == best_j) continue;
            double updated = 0.0;
            switch (linkage) {
                case Linkage::single: updated = std::min(d[k][best_i], d[k][best_j]); break;
                case Linkage::complete: updated = std::max(d[k][best_i], d[k][best_j]); break;
                case Linkage::average:
                    updated = (static_cast<double>(size_i) * d[k][best_i] +
                               static_cast<double>(size_j) * d[k][best_j]) /
                              static_cast<double>(size_i + size_j);
                    break;
            }
            d[k][best_i] = updated;
            d[best_i][k] = updated;
        }
        active[best_i] = {new_node, size_i + size_j};
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_j));
        for (auto& row : d) row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_j));
        d.erase(d.begin() + static_cast<std::ptrdiff_t>(best_j));
    }
    return tree;
}

Dendrogram agglomerate(const Codebook& cb, Linkage linkage) {
    const std::size_t n = cb.num_classes();
    if (n < 2) throw ValidationError("agglomerate: need at least 2 classes");
    Matrix distances(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dist = static_cast<double>(hamming(cb.code(i), cb.code(j)));
            distances.at(i, j) = dist;
            distances.at(j, i) = dist;
        }
    return agglomerate_distances(distances, linkage);
}

namespace {

std::string sanitize_newick(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (c == ' ' || c == ',' || c == '(' || c == ')' || c == ':' || c == ';') c = '_';
    return out;
}

}  // namespace

std::string to_newick(const Dendrogram& tree, const std::vector<std::string>& leaf_names) {
    if (!leaf_names.empty() && leaf_names.size() != tree.leaves)
        throw DimensionError("to_newick: name count does not match leaf count");

    std::vector<const Merge*> by_node(tree.merges.size());
    for (const Merge& m : tree.merges)
        by_node[static_cast<std::size_t>(m.new_node) - tree.leaves] = &m;

    auto height = [&](int node) -> double {
        if (node < static_cast<int>(tree.leaves)) return 0.0;
        return by_node[static_cast<std::size_t>(node) - tree.leaves]->distance;
    };

    std::function<std::string(int, double)> render = [&](int node, double parent_height) {
        std::string body;
        if (node < static_cast<int>(tree.leaves)) {
            body = leaf_names.empty() ? std::to_string(node)
                                      : sanitize_newick(leaf_names[static_cast<std::size_t>(node)]);
        } else {
            const Merge& m = *by_node[static_cast<std::size_t>(node) - tree.leaves];
            body = "(" + render(m.node_a, m.distance) + "," + render(m.node_b, m.distance) + ")";
        }
        return body + ":" + format_double(parent_height - height(node));
    };

    if (tree.merges.empty()) throw ValidationError("to_newick: dendrogram has no merges");
    const Merge& root = tree.merges.back();
    return "(" + render(root.node_a, root.distance) + "," + render(root.node_b, root.distance) +
           ");";
}

HeatMatrix inner_product_heatmap(const Matrix& class_rows, HeatSource source) {
    return {matmul_nt(class_rows, class_rows), source};
}

namespace {

// Average ranks with tie handling (1-based; the offset cancels in Pearson).
std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;  // constant row carries no ranking signal
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

SpearmanResult spearman_rowwise(const HeatMatrix& a, const HeatMatrix& b) {
    const std::size_t n = a.values.rows();
    if (n != a.values.cols() || n != b.values.rows() || n != b.values.cols())
        throw DimensionError("spearman_rowwise: heatmaps must be square and same size");
    if (n < 3)
        throw ValidationError("spearman_rowwise: need at least 3 classes");

    SpearmanResult result;
    result.per_class.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row_a, row_b;
        row_a.reserve(n - 1);
        row_b.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            row_a.push_back(a.values.at(i, j));
            row_b.push_back(b.values.at(i, j));
        }
        const double rho = pearson(average_ranks(row_a), average_ranks(row_b));
        result.per_class[i] = rho;
        sum += rho;
    }
    result.mean = sum / static_cast<double>(n);
    return result;
}

BitSplit bit_split_report(const LlcModel& model, const Matrix& batch, std::size_t bit_index) {
    if (bit_index >= model.code_bits())
        throw ValidationError("bit_split_report: bit " + std::to_string(bit_index) +
                              " out of range for k=" + std::to_string(model.code_bits()));
    const EncodeResult encoded = encode(model, batch);

    BitSplit split;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        if (encoded.logits.at(i, bit_index) >= 0.0)
            split.positive.push_back(i);
        else
            split.negative.push_back(i);
    }
    auto by_confidence = [&](std::size_t lhs, std::size_t rhs) {
        return std::fabs(encoded.logits.at(lhs, bit_index)) >
               std::fabs(encoded.logits.at(rhs, bit_index));
    };
    std::stable_sort(split.positive.begin(), split.positive.end(), by_confidence);
    std::stable_sort(split.negative.begin(), split.negative.end(), by_confidence);
    return split;
}

void save_heatmap_csv(const HeatMatrix& h, const std::vector<std::string>& names,
                      const std::string& path) {
    const std::size_t n = h.values.rows();
    if (!names.empty() && names.size() != n)
        throw DimensionError("save_heatmap_csv: name count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_heatmap_csv: cannot open " + path);
    out << "class";
    for (std::size_t j = 0; j < n; ++j)
        out << ',' << (names.empty() ? std::to_string(j) : names[j]);
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << (names.empty() ? std::to_string(i) : names[i]);
        for (std::size_t j = 0; j < n; ++j) out << ',' << format_double(h.values.at(i, j));
        out << '\n';
    }
    if (!out) throw IoError("save_heatmap_csv: write failed for " + path);
}

}  // namespace llc
