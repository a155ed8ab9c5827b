#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "llc/data.hpp"
#include "llc/error.hpp"

using llc::LabeledDataset;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/llc_data_" + name) {}
    ~TempFile() {
        std::remove(path.c_str());
        std::remove((path + ".json").c_str());
    }
};

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void append_be_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>((v >> 24) & 0xff));
    s.push_back(static_cast<char>((v >> 16) & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>(v & 0xff));
}

// Four 2x3 images with distinct corner bytes, labels drawn from {2, 4, 9}.
std::string idx_images(std::uint32_t magic = 0x00000803u, std::uint32_t count = 4) {
    std::string s;
    append_be_u32(s, magic);
    append_be_u32(s, count);
    append_be_u32(s, 2);
    append_be_u32(s, 3);
    for (std::uint32_t i = 0; i < 4; ++i)
        for (int p = 0; p < 6; ++p) s.push_back(static_cast<char>(i * 40 + p));
    return s;
}

std::string idx_labels(std::uint32_t magic = 0x00000801u, std::uint32_t count = 4) {
    std::string s;
    append_be_u32(s, magic);
    append_be_u32(s, count);
    const unsigned char raw[4] = {9, 2, 9, 4};
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(raw[i]));
    return s;
}

}  // namespace

TEST_CASE("IDX loader decodes a hand-written fixture") {
    TempFile images("fix.idx3"), labels("fix.idx1");
    write_file(images.path, idx_images());
    write_file(labels.path, idx_labels());

    LabeledDataset ds = llc::load_idx(images.path, labels.path);
    REQUIRE(ds.size() == 4);
    CHECK(ds.dim() == 6);  // 2x3 flattened
    CHECK(ds.num_classes == 3);
    // Pixels scale to [0,1] by 255; instance 2 starts at byte 80.
    CHECK(ds.features.at(0, 0) == 0.0);
    CHECK(ds.features.at(0, 5) == doctest::Approx(5.0 / 255.0).epsilon(1e-15));
    CHECK(ds.features.at(2, 0) == doctest::Approx(80.0 / 255.0).epsilon(1e-15));
    // Raw labels 9,2,9,4 remap in sorted order: 2->0, 4->1, 9->2.
    CHECK(ds.labels == std::vector<int>{2, 0, 2, 1});
    CHECK(ds.class_names == std::vector<std::string>{"2", "4", "9"});
    // IDX provides no split; everything lands in train.
    CHECK(ds.train_indices().size() == 4);
    CHECK(ds.test_indices().empty());
}

TEST_CASE("IDX loader rejects corrupt inputs") {
    TempFile images("bad.idx3"), labels("bad.idx1");

    write_file(images.path, idx_images(0x00000802u));
    write_file(labels.path, idx_labels());
    CHECK_THROWS_AS(llc::load_idx(images.path, labels.path), llc::ParseError);

    write_file(images.path, idx_images());
    write_file(labels.path, idx_labels(0x00000803u));
    CHECK_THROWS_AS(llc::load_idx(images.path, labels.path), llc::ParseError);

    write_file(labels.path, idx_labels(0x00000801u, 5));  // count disagrees with images
    CHECK_THROWS_AS(llc::load_idx(images.path, labels.path), llc::ValidationError);

    write_file(images.path, idx_images().substr(0, 20));  // pixel data cut short
    write_file(labels.path, idx_labels());
    CHECK_THROWS_AS(llc::load_idx(images.path, labels.path), llc::IoError);

    CHECK_THROWS_AS(llc::load_idx("/tmp/llc_data_missing.idx3", labels.path), llc::IoError);
}

TEST_CASE("CSV loader remaps labels in sorted order and honors the split column") {
    TempFile f("basic.csv");
    write_file(f.path,
               "a,b,label,split\n"
               "1.5,2.0,7,0\n"
               "3.25,-1.0,3,0\n"
               "0.0,0.5,7,1\n"
               "2.0,2.0,5,0\n");
    LabeledDataset ds = llc::load_csv(f.path, "label", "split");
    REQUIRE(ds.size() == 4);
    CHECK(ds.dim() == 2);
    CHECK(ds.num_classes == 3);
    CHECK(ds.labels == std::vector<int>{2, 0, 2, 1});  // sorted remap 3,5,7
    CHECK(ds.class_names == std::vector<std::string>{"3", "5", "7"});
    CHECK(ds.features.at(1, 0) == 3.25);
    CHECK(ds.test_indices() == std::vector<std::size_t>{2});

    // Without a split column every instance is train and all columns except
    // the label are features.
    write_file(f.path, "x,label\n1,0\n2,1\n");
    LabeledDataset plain = llc::load_csv(f.path, "label");
    CHECK(plain.dim() == 1);
    CHECK(plain.train_indices().size() == 2);
}

TEST_CASE("CSV loader errors name the offending row or column") {
    TempFile f("bad.csv");

    write_file(f.path, "a,b,label\n1,2,0\n");
    CHECK_THROWS_WITH_AS(llc::load_csv(f.path, "target"),
                         "load_csv: no column 'target' (available: a, b, label)",
                         llc::ParseError);

    write_file(f.path, "a,label\n1,0\noops,1\n");
    CHECK_THROWS_WITH_AS(llc::load_csv(f.path, "label"),
                         "load_csv: non-numeric cell 'oops' in column 'a' at data row 2",
                         llc::ParseError);

    write_file(f.path, "a,label\n1,0\n1,2,3\n");
    CHECK_THROWS_AS(llc::load_csv(f.path, "label"), llc::ParseError);  // ragged row

    write_file(f.path, "a,label,split\n1,0,2\n");
    CHECK_THROWS_AS(llc::load_csv(f.path, "label", "split"), llc::ValidationError);

    write_file(f.path, "a,label,split\n1,0,1\n2,1,0\n");  // class 0 only in test
    CHECK_THROWS_AS(llc::load_csv(f.path, "label", "split"), llc::ValidationError);

    write_file(f.path, "a,label\n");
    CHECK_THROWS_AS(llc::load_csv(f.path, "label"), llc::ParseError);  // no data rows

    CHECK_THROWS_AS(llc::load_csv("/tmp/llc_data_missing.csv", "label"), llc::IoError);
}

TEST_CASE("dataset save/load round-trips features, splits and synthetic ground truth") {
    LabeledDataset ds = llc::generate_hierarchical(5, 2, 2, 8, 3, 0.5, 0.25, true);
    TempFile f("roundtrip.csv");
    llc::save_dataset(ds, f.path);
    LabeledDataset back = llc::load_dataset(f.path);

    REQUIRE(back.size() == ds.size());
    CHECK(back.num_classes == ds.num_classes);
    CHECK(back.labels == ds.labels);
    CHECK(back.is_test == ds.is_test);
    // %.17g preserves doubles exactly.
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.dim(); ++j)
            CHECK(back.features.at(i, j) == ds.features.at(i, j));

    REQUIRE(back.synthetic.has_value());
    CHECK(back.synthetic->spec.seed == 5);
    CHECK(back.synthetic->spec.depth == 2);
    CHECK(back.synthetic->branch_paths == ds.synthetic->branch_paths);
    for (std::size_t c = 0; c < ds.synthetic->class_means.rows(); ++c)
        for (std::size_t j = 0; j < ds.synthetic->class_means.cols(); ++j)
            CHECK(back.synthetic->class_means.at(c, j) == ds.synthetic->class_means.at(c, j));
}

TEST_CASE("hierarchical generator is deterministic and shapes the class tree") {
    LabeledDataset a = llc::generate_hierarchical(7, 2, 4, 10, 8, 1.0);
    LabeledDataset b = llc::generate_hierarchical(7, 2, 4, 10, 8, 1.0);
    CHECK(a.num_classes == 16);
    CHECK(a.size() == 160);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);

    LabeledDataset c = llc::generate_hierarchical(8, 2, 4, 10, 8, 1.0);
    CHECK(a.features != c.features);

    // Branch paths are the base-`branching` digits of the class index.
    REQUIRE(a.synthetic.has_value());
    CHECK(a.synthetic->branch_paths[0] == std::vector<int>{0, 0});
    CHECK(a.synthetic->branch_paths[5] == std::vector<int>{1, 1});
    CHECK(a.synthetic->branch_paths[14] == std::vector<int>{3, 2});

    // Stratified split: 25% of 10 per class held out.
    std::vector<int> test_per_class(16, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.is_test[i]) ++test_per_class[static_cast<std::size_t>(a.labels[i])];
    for (int n : test_per_class) CHECK(n == 3);  // floor(0.25*10 + 0.5)

    CHECK_THROWS_AS(llc::generate_hierarchical(7, 0, 4, 10, 8, 1.0), llc::ValidationError);
    CHECK_THROWS_AS(llc::generate_hierarchical(7, 2, 1, 10, 8, 1.0), llc::ValidationError);
    CHECK_THROWS_AS(llc::generate_hierarchical(7, 2, 4, 10, 8, -1.0), llc::ValidationError);
    CHECK_THROWS_AS(llc::generate_hierarchical(7, 2, 4, 10, 8, 1.0, 1.0), llc::ValidationError);
}

TEST_CASE("zero noise collapses every instance onto its class mean") {
    LabeledDataset ds = llc::generate_hierarchical(3, 2, 2, 5, 4, 0.0, 0.25, false);
    REQUIRE(ds.synthetic.has_value());
    const llc::Matrix& means = ds.synthetic->class_means;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.dim(); ++j)
            CHECK(ds.features.at(i, j) ==
                  means.at(static_cast<std::size_t>(ds.labels[i]), j));
}

TEST_CASE("standardization leaves the train split at zero mean and unit variance") {
    LabeledDataset ds = llc::generate_hierarchical(11, 1, 4, 50, 6, 2.0, 0.2, false);
    // Constant dimension: forced stddev 1 means center-only.
    for (std::size_t i = 0; i < ds.size(); ++i) ds.features.at(i, 2) = 42.0;

    llc::FeatureStats stats = llc::compute_train_stats(ds);
    CHECK(stats.stddev[2] == 1.0);
    llc::apply_standardization(ds, stats);

    const auto train = ds.train_indices();
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        double mean = 0.0, var = 0.0;
        for (auto id : train) mean += ds.features.at(id, j);
        mean /= static_cast<double>(train.size());
        for (auto id : train) {
            const double d = ds.features.at(id, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train.size());
        CHECK(std::abs(mean) < 1e-12);
        if (j != 2) CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(ds.features.at(0, 2) == 0.0);  // centered constant column

    llc::FeatureStats wrong;
    wrong.mean = {0.0};
    wrong.stddev = {1.0};
    CHECK_THROWS_AS(llc::apply_standardization(ds, wrong), llc::DimensionError);
}

TEST_CASE("gather copies the selected rows and labels") {
    LabeledDataset ds = llc::generate_hierarchical(2, 1, 2, 4, 3, 1.0, 0.25, false);
    std::vector<std::size_t> pick{5, 0, 3};
    llc::Matrix rows = ds.gather(pick);
    std::vector<int> labels = ds.gather_labels(pick);
    REQUIRE(rows.rows() == 3);
    for (std::size_t r = 0; r < pick.size(); ++r) {
        CHECK(labels[r] == ds.labels[pick[r]]);
        for (std::size_t j = 0; j < ds.dim(); ++j)
            CHECK(rows.at(r, j) == ds.features.at(pick[r], j));
    }
}
