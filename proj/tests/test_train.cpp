#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "llc/data.hpp"
#include "llc/error.hpp"
#include "llc/jacobi.hpp"
#include "llc/model.hpp"
#include "llc/train.hpp"

using llc::Codebook;
using llc::LabeledDataset;
using llc::LlcModel;
using llc::Matrix;
using llc::RandomStream;
using llc::TrainConfig;

namespace {

// Two well-separated classes; everything downstream should be solvable.
LabeledDataset two_blobs() { return llc::generate_hierarchical(3, 1, 2, 30, 4, 0.25); }

LlcModel fresh_model(const LabeledDataset& data, std::size_t bits, std::uint64_t seed,
                     const std::vector<std::size_t>& hidden = {8}) {
    RandomStream rng(seed);
    return llc::make_model(data.dim(), hidden, 4, bits, data.num_classes, rng);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.bits = 4;
    cfg.phase1_epochs = 25;
    cfg.phase2_epochs = 10;
    cfg.batch_size = 16;
    cfg.phase1_lr = 0.05;
    cfg.phase2_lr = 0.01;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("two separable classes train to perfect minimum-distance accuracy") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 11);
    const auto report = llc::train_two_phase(data, model, small_config());

    CHECK(report.uniqueness.unique_count == 2);
    CHECK(report.mhd_train == 1.0);
    CHECK(report.mhd_test == 1.0);
    CHECK(report.ed_train <= report.mhd_train);
    CHECK(report.ed_test <= report.mhd_test);
    CHECK(report.ed_test >= 0.9);  // both codes differ in most bits after training
    CHECK(report.train_instances == 44);  // 30 - floor(0.25*30+0.5) = 22 per class
    CHECK(report.test_instances == 16);
    REQUIRE(report.epochs.size() == 35);
    CHECK(report.epochs.front().phase == 1);
    CHECK(report.epochs.back().phase == 2);

    // The mean loss over phase-1 epochs must have improved substantially.
    CHECK(report.epochs[24].mean_loss < 0.5 * report.epochs[0].mean_loss);
}

TEST_CASE("codebook learning requires at least two classes and a train split") {
    LabeledDataset data = two_blobs();
    data.num_classes = 1;
    for (auto& l : data.labels) l = 0;
    LlcModel model = fresh_model(data, 4, 11);
    CHECK_THROWS_AS(llc::phase1_learn_codebook(data, model, small_config()),
                    llc::ValidationError);

    LabeledDataset all_test = two_blobs();
    all_test.is_test.assign(all_test.size(), 1);
    LlcModel model2 = fresh_model(all_test, 4, 11);
    CHECK_THROWS_AS(llc::phase1_learn_codebook(all_test, model2, small_config()),
                    llc::ValidationError);
}

TEST_CASE("instance fitting never touches the class code matrix") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 13);
    TrainConfig cfg = small_config();

    const auto p1 = llc::phase1_learn_codebook(data, model, cfg);
    const Matrix frozen = model.code_matrix;
    const Matrix projection_before = model.projection;
    llc::phase2_learn_instances(data, model, p1.codebook, cfg);
    CHECK(model.code_matrix == frozen);          // bit-exact
    CHECK(model.projection != projection_before);  // the rest did move
}

TEST_CASE("zero training epochs leave the parameters untouched") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 17);
    const LlcModel before = model;
    TrainConfig cfg = small_config();
    cfg.phase1_epochs = 0;
    cfg.phase2_epochs = 0;

    const auto p1 = llc::phase1_learn_codebook(data, model, cfg);
    llc::phase2_learn_instances(data, model, p1.codebook, cfg);
    CHECK(p1.epochs.empty());
    CHECK(model.projection == before.projection);
    CHECK(model.code_matrix == before.code_matrix);
    CHECK(model.backbone.weights[0] == before.backbone.weights[0]);
}

TEST_CASE("training is deterministic in the seed") {
    LabeledDataset data = two_blobs();
    TrainConfig cfg = small_config();

    LlcModel a = fresh_model(data, 4, 19);
    LlcModel b = fresh_model(data, 4, 19);
    llc::train_two_phase(data, a, cfg);
    llc::train_two_phase(data, b, cfg);
    CHECK(a.projection == b.projection);
    CHECK(a.code_matrix == b.code_matrix);
    CHECK(a.backbone.weights[0] == b.backbone.weights[0]);

    LlcModel c = fresh_model(data, 4, 19);
    TrainConfig other = cfg;
    other.seed = 6;
    llc::train_two_phase(data, c, other);
    CHECK(a.projection != c.projection);
}

TEST_CASE("too few bits for the class count warns and reports collisions") {
    LabeledDataset data = llc::generate_hierarchical(9, 1, 4, 12, 4, 0.3);
    REQUIRE(data.num_classes == 4);
    LlcModel model = fresh_model(data, 1, 23);
    TrainConfig cfg = small_config();
    cfg.bits = 1;  // 2 codes for 4 classes

    const auto report = llc::train_two_phase(data, model, cfg);
    REQUIRE(!report.warnings.empty());
    CHECK(report.warnings[0] ==
          "bits k=1 is below ceil(log2(4))=2; unique class codes are impossible");
    bool collision_warned = false;
    for (const auto& w : report.warnings)
        collision_warned |= w.find("codebook collision") != std::string::npos;
    CHECK(collision_warned);
    CHECK(report.uniqueness.unique_count <= 2);
    CHECK(!report.uniqueness.collisions.empty());
}

TEST_CASE("a collided codebook fed to instance fitting warns but proceeds") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 27);
    const llc::BitCode same = llc::BitCode::from_string("1010");
    const Codebook collided(4, {same, same});
    const auto p2 = llc::phase2_learn_instances(data, model, collided, small_config());
    REQUIRE(!p2.warnings.empty());
    CHECK(p2.warnings[0] == "codebook collision: supervising 2 classes with only 1 distinct codes");
}

TEST_CASE("config validation rejects out-of-range values") {
    TrainConfig cfg = small_config();
    cfg.bits = 0;
    CHECK_THROWS_AS(llc::validate_train_config(cfg, 2), llc::ConfigError);
    cfg = small_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(llc::validate_train_config(cfg, 2), llc::ConfigError);
    cfg = small_config();
    cfg.phase1_lr = 0.0;
    CHECK_THROWS_AS(llc::validate_train_config(cfg, 2), llc::ConfigError);
    cfg = small_config();
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(llc::validate_train_config(cfg, 2), llc::ConfigError);
    cfg = small_config();
    cfg.weight_decay = -0.1;
    CHECK_THROWS_AS(llc::validate_train_config(cfg, 2), llc::ConfigError);
    cfg = small_config();
    cfg.nested_prefix = {5};  // beyond bits = 4
    CHECK_THROWS_AS(llc::validate_train_config(cfg, 2), llc::ConfigError);

    cfg = small_config();
    cfg.bits = 3;
    std::vector<std::string> warnings;
    llc::validate_train_config(cfg, 16, &warnings);  // needs ceil(log2 16) = 4
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0] == "bits k=3 is below ceil(log2(16))=4; unique class codes are impossible");
}

TEST_CASE("training reduces the dataset loss it optimizes") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 29);
    TrainConfig cfg = small_config();

    const double p1_before = llc::phase1_dataset_loss(model, data, llc::Split::train);
    const auto p1 = llc::phase1_learn_codebook(data, model, cfg);
    const double p1_after = llc::phase1_dataset_loss(model, data, llc::Split::train);
    CHECK(p1_after < p1_before);

    const double p2_before = llc::phase2_dataset_loss(model, p1.codebook, data, llc::Split::train);
    llc::phase2_learn_instances(data, model, p1.codebook, cfg);
    const double p2_after = llc::phase2_dataset_loss(model, p1.codebook, data, llc::Split::train);
    CHECK(p2_after < p2_before);
}

TEST_CASE("signing the projection during codebook learning stays finite at a gentle rate") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 31);
    TrainConfig cfg = small_config();
    cfg.phase1_binarize_instances = true;
    cfg.phase1_lr = 1e-3;
    cfg.schedule = llc::Schedule::constant;
    cfg.weight_decay = 0.01;
    cfg.phase1_epochs = 10;
    const auto p1 = llc::phase1_learn_codebook(data, model, cfg);
    CHECK(p1.epochs.size() == 10);
    model.projection.require_finite("after binarized training");

    // The signed projection hides parameter blow-up from the loss, so the
    // runaway case must be caught by the per-step parameter check instead of
    // silently finishing.
    LlcModel doomed = fresh_model(data, 4, 31);
    TrainConfig hot = cfg;
    hot.phase1_lr = 10.0;
    hot.weight_decay = 0.0;
    CHECK_THROWS_AS(llc::phase1_learn_codebook(data, doomed, hot), llc::NumericError);
}

TEST_CASE("nested prefix audits recompute uniqueness at each length") {
    LabeledDataset data = llc::generate_hierarchical(9, 1, 4, 12, 4, 0.3);
    LlcModel model = fresh_model(data, 6, 37);
    TrainConfig cfg = small_config();
    cfg.bits = 6;
    cfg.nested_prefix = {2, 4, 6};

    const auto report = llc::train_two_phase(data, model, cfg);
    REQUIRE(report.prefix_audits.size() == 3);
    LlcModel trained = model;
    const Codebook cb = trained.codebook();
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& audit = report.prefix_audits[i];
        CHECK(audit.bits == cfg.nested_prefix[i]);
        const auto expected = cb.prefix(audit.bits).audit_uniqueness();
        CHECK(audit.unique_count == expected.unique_count);
        std::size_t collided = 0;
        for (const auto& g : expected.collisions) collided += g.class_ids.size();
        CHECK(audit.collided_classes == collided);
    }
    // The full-width audit agrees with the overall uniqueness report.
    CHECK(report.prefix_audits[2].unique_count == report.uniqueness.unique_count);
}

TEST_CASE("random codebooks are deterministic, unique and bounded") {
    const Codebook a = llc::random_codebook(16, 8, 7);
    const Codebook b = llc::random_codebook(16, 8, 7);
    REQUIRE(a.num_classes() == 16);
    for (std::size_t c = 0; c < 16; ++c) CHECK(a.code(c) == b.code(c));
    CHECK(a.audit_uniqueness().unique_count == 16);

    const Codebook c = llc::random_codebook(16, 8, 8);
    bool differs = false;
    for (std::size_t i = 0; i < 16; ++i) differs |= !(a.code(i) == c.code(i));
    CHECK(differs);

    // Large class count in a modest width still resolves without collisions.
    const Codebook wide = llc::random_codebook(1000, 20, 3);
    CHECK(wide.audit_uniqueness().unique_count == 1000);

    CHECK_THROWS_AS(llc::random_codebook(5, 2, 1), llc::ValidationError);  // 2^2 < 5
    CHECK_THROWS_AS(llc::random_codebook(0, 4, 1), llc::ValidationError);
    CHECK_THROWS_AS(llc::random_codebook(4, 0, 1), llc::ValidationError);
}

TEST_CASE("cyclic Jacobi solves a hand-checkable symmetric system") {
    const Matrix sym = Matrix::from_rows(2, 2, {2, 1, 1, 2});
    const auto eig = llc::jacobi_eigen_symmetric(sym);
    REQUIRE(eig.eigenvalues.size() == 2);
    CHECK(eig.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
    // Eigenvector of 3 is (1,1)/sqrt(2) up to sign.
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(eig.eigenvectors.at(0, 0) * inv_sqrt2 +
                   eig.eigenvectors.at(1, 0) * inv_sqrt2) == doctest::Approx(1.0).epsilon(1e-10));

    CHECK_THROWS_AS(llc::jacobi_eigen_symmetric(Matrix::from_rows(2, 2, {1, 2, 3, 4})),
                    llc::ValidationError);
}

TEST_CASE("eigendecomposition satisfies the residual and orthogonality identities") {
    RandomStream rng(41);
    Matrix w(20, 8);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    const Matrix gram = llc::matmul_tn(w, w);
    const auto eig = llc::jacobi_eigen_symmetric(gram);

    for (std::size_t j = 0; j < 8; ++j) {
        if (j > 0) CHECK(eig.eigenvalues[j] <= eig.eigenvalues[j - 1] + 1e-12);
        // ||A v - lambda v|| small relative to ||A||.
        double residual = 0.0;
        for (std::size_t i = 0; i < 8; ++i) {
            double av = 0.0;
            for (std::size_t m = 0; m < 8; ++m) av += gram.at(i, m) * eig.eigenvectors.at(m, j);
            const double r = av - eig.eigenvalues[j] * eig.eigenvectors.at(i, j);
            residual += r * r;
        }
        CHECK(std::sqrt(residual) < 1e-8);
        for (std::size_t j2 = 0; j2 <= j; ++j2) {
            double dot = 0.0;
            for (std::size_t i = 0; i < 8; ++i)
                dot += eig.eigenvectors.at(i, j) * eig.eigenvectors.at(i, j2);
            CHECK(dot == doctest::Approx(j == j2 ? 1.0 : 0.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("classifier-to-code projection keeps variance order and fixes signs") {
    RandomStream rng(43);
    Matrix w(20, 8);
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();

    const Matrix proj = llc::svd_projections(w, 4);
    REQUIRE(proj.rows() == 20);
    REQUIRE(proj.cols() == 4);

    // Column j of the projection is W·v_j, so its squared norm is the
    // eigenvalue of the Gram matrix; they must come out descending.
    std::vector<double> norms(4, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 20; ++i) norms[j] += proj.at(i, j) * proj.at(i, j);
    const auto eig = llc::jacobi_eigen_symmetric(llc::matmul_tn(w, w));
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(norms[j] == doctest::Approx(eig.eigenvalues[j]).epsilon(1e-8));
        if (j > 0) CHECK(norms[j] <= norms[j - 1] + 1e-10);
    }

    // The identity classifier projects onto itself up to direction order, so
    // each column must be an axis with a positive leading component.
    Matrix identity(4, 4);
    for (std::size_t i = 0; i < 4; ++i) identity.at(i, i) = 1.0;
    const Matrix axis_proj = llc::svd_projections(identity, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        double max_abs = 0.0, col_sum = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            max_abs = std::max(max_abs, std::abs(axis_proj.at(i, j)));
            col_sum += axis_proj.at(i, j);
        }
        CHECK(max_abs == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(col_sum == doctest::Approx(1.0).epsilon(1e-10));  // the single spike is +1
    }

    CHECK_THROWS_AS(llc::svd_projections(w, 0), llc::ValidationError);
    CHECK_THROWS_AS(llc::svd_projections(w, 9), llc::ValidationError);
}

TEST_CASE("rank-one classifiers collapse every class to the same one-bit pattern") {
    // All rows proportional with positive factors: one informative direction.
    Matrix w(5, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        w.at(i, 0) = 2.0 * double(i + 1);
        w.at(i, 1) = 1.0 * double(i + 1);
        w.at(i, 2) = -1.0 * double(i + 1);
    }
    const Codebook cb = llc::svd_codebook(w, 1);
    REQUIRE(cb.num_classes() == 5);
    CHECK(cb.audit_uniqueness().unique_count == 1);  // identical signs everywhere

    // Extra directions beyond the rank carry eigenvalue ~0; their projected
    // signs are numeric noise, but the dominant first bit must still agree.
    const Codebook cb2 = llc::svd_codebook(w, 3);
    CHECK(cb2.prefix(1).audit_uniqueness().unique_count == 1);
}

TEST_CASE("the per-bit agreement statistic matches a direct recomputation") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 47);
    const Codebook cb = llc::random_codebook(2, 4, 9);

    for (llc::Split split : {llc::Split::train, llc::Split::test, llc::Split::all}) {
        const double got = llc::bits_correct_statistic(model, data, cb, split);
        std::vector<std::size_t> ids;
        if (split == llc::Split::train) ids = data.train_indices();
        else if (split == llc::Split::test) ids = data.test_indices();
        else for (std::size_t i = 0; i < data.size(); ++i) ids.push_back(i);

        const auto encoded = llc::encode(model, data.gather(ids));
        double want = 0.0;
        for (std::size_t i = 0; i < ids.size(); ++i)
            want += 4.0 - double(llc::hamming(encoded.codes[i],
                                              cb.code(std::size_t(data.labels[ids[i]]))));
        want /= double(ids.size());
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("the training report serializes as one JSON record per line") {
    LabeledDataset data = two_blobs();
    LlcModel model = fresh_model(data, 4, 53);
    TrainConfig cfg = small_config();
    cfg.phase1_epochs = 3;
    cfg.phase2_epochs = 2;
    const auto report = llc::train_two_phase(data, model, cfg);

    const std::string path = "/tmp/llc_train_report.jsonl";
    llc::save_train_report(report, path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    nlohmann::json last;
    while (std::getline(in, line)) {
        ++lines;
        last = nlohmann::json::parse(line);  // throws on malformed JSON
    }
    std::remove(path.c_str());
    CHECK(lines == 6);  // 5 epochs + summary
    CHECK(last.at("type") == "summary");
    CHECK(last.at("mhd_train").get<double>() == doctest::Approx(report.mhd_train));
    CHECK(last.at("unique_codes").get<std::size_t>() == report.uniqueness.unique_count);
}
