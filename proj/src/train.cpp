#include "llc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <unordered_set>

#include <json.hpp>

#include "llc/error.hpp"
#include "llc/jacobi.hpp"
#include "llc/tape.hpp"

namespace llc {

namespace {

std::size_t bits_needed(std::size_t num_classes) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < num_classes) ++bits;
    return bits;  // ceil(log2)
}

void check_model_matches(const LlcModel& model, const LabeledDataset& data) {
    if (model.num_classes() != data.num_classes)
        throw DimensionError("train: model has " + std::to_string(model.num_classes()) +
                             " classes, dataset has " + std::to_string(data.num_classes));
    if (model.input_dim() != 0 && model.input_dim() != data.dim())
        throw DimensionError("train: model input dim " + std::to_string(model.input_dim()) +
                             " vs dataset dim " + std::to_string(data.dim()));
}

struct TapeLeaves {
    std::vector<VarId> weights;
    std::vector<VarId> biases;
    VarId projection = 0;
};

TapeLeaves register_leaves(Tape& tape, const LlcModel& model) {
    TapeLeaves ids;
    for (std::size_t l = 0; l < model.backbone.weights.size(); ++l) {
        ids.weights.push_back(tape.leaf(model.backbone.weights[l]));
        ids.biases.push_back(tape.leaf(model.backbone.biases[l]));
    }
    ids.projection = tape.leaf(model.projection);
    return ids;
}

VarId forward_features(Tape& tape, VarId x, const TapeLeaves& ids) {
    VarId h = x;
    for (std::size_t l = 0; l < ids.weights.size(); ++l) {
        h = tape.linear(h, ids.weights[l]);
        h = tape.bias_add(h, ids.biases[l]);
        if (l + 1 < ids.weights.size()) h = tape.relu(h);
    }
    return h;
}

// Parameter pointers in the fixed update order: W0, b0, W1, b1, ..., P [, C].
std::vector<Matrix*> parameter_list(LlcModel& model, bool include_codes) {
    std::vector<Matrix*> params;
    for (std::size_t l = 0; l < model.backbone.weights.size(); ++l) {
        params.push_back(&model.backbone.weights[l]);
        params.push_back(&model.backbone.biases[l]);
    }
    params.push_back(&model.projection);
    if (include_codes) params.push_back(&model.code_matrix);
    return params;
}

std::vector<Matrix> collect_gradients(const Tape& tape, const TapeLeaves& ids,
                                      std::optional<VarId> code_id) {
    std::vector<Matrix> grads;
    for (std::size_t l = 0; l < ids.weights.size(); ++l) {
        grads.push_back(tape.grad(ids.weights[l]));
        grads.push_back(tape.grad(ids.biases[l]));
    }
    grads.push_back(tape.grad(ids.projection));
    if (code_id) grads.push_back(tape.grad(*code_id));
    return grads;
}

void apply_weight_decay(std::vector<Matrix>& grads, const std::vector<Matrix*>& params,
                        double decay) {
    if (decay == 0.0) return;
    for (std::size_t i = 0; i < grads.size(); ++i)
        for (std::size_t e = 0; e < grads[i].size(); ++e)
            grads[i].data()[e] += decay * params[i]->data()[e];
}

std::vector<std::size_t> batch_to_instances(const std::vector<std::size_t>& train_ids,
                                            const std::vector<std::size_t>& batch_positions) {
    std::vector<std::size_t> ids;
    ids.reserve(batch_positions.size());
    for (std::size_t p : batch_positions) ids.push_back(train_ids[p]);
    return ids;
}

std::vector<std::size_t> split_ids(const LabeledDataset& data, Split split) {
    switch (split) {
        case Split::train: return data.train_indices();
        case Split::test: return data.test_indices();
        case Split::all: {
            std::vector<std::size_t> ids(data.size());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
            return ids;
        }
    }
    return {};
}

Matrix phase2_targets(const Codebook& codebook, const std::vector<int>& labels) {
    const std::size_t k = codebook.bits();
    Matrix t(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const BitCode& code = codebook.code(static_cast<std::size_t>(labels[i]));
        for (std::size_t j = 0; j < k; ++j) t.at(i, j) = code.bit(j) ? 1.0 : 0.0;
    }
    return t;
}

void check_finite_loss(double loss, int phase, std::size_t epoch, std::size_t step, double lr) {
    if (std::isfinite(loss)) return;
    throw NumericError("phase " + std::to_string(phase) + " diverged: loss=" +
                       std::to_string(loss) + " at epoch " + std::to_string(epoch) + " step " +
                       std::to_string(step) + " (lr=" + std::to_string(lr) + ")");
}

// Binarization can hide exploding parameters from the loss, so the parameters
// themselves are checked every step as well.
void check_finite_params(const std::vector<Matrix*>& params, int phase, std::size_t epoch,
                         std::size_t step, double lr) {
    for (const Matrix* p : params) {
        if (!p->all_finite())
            throw NumericError("phase " + std::to_string(phase) +
                               " diverged: non-finite parameter at epoch " +
                               std::to_string(epoch) + " step " + std::to_string(step) +
                               " (lr=" + std::to_string(lr) + ")");
    }
}

}  // namespace

void validate_train_config(const TrainConfig& cfg, std::size_t num_classes,
                           std::vector<std::string>* warnings) {
    if (cfg.bits == 0) throw ConfigError("train config: bits must be >= 1");
    if (cfg.batch_size == 0) throw ConfigError("train config: batch size must be >= 1");
    if (cfg.phase1_lr <= 0.0 || cfg.phase2_lr <= 0.0)
        throw ConfigError("train config: learning rates must be > 0");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw ConfigError("train config: momentum must lie in [0, 1)");
    if (cfg.weight_decay < 0.0) throw ConfigError("train config: weight decay must be >= 0");
    for (std::size_t m : cfg.nested_prefix)
        if (m == 0 || m > cfg.bits)
            throw ConfigError("train config: nested prefix length " + std::to_string(m) +
                              " outside [1, " + std::to_string(cfg.bits) + "]");
    if (warnings && num_classes >= 2 && cfg.bits < bits_needed(num_classes))
        warnings->push_back("bits k=" + std::to_string(cfg.bits) + " is below ceil(log2(" +
                            std::to_string(num_classes) + "))=" +
                            std::to_string(bits_needed(num_classes)) +
                            "; unique class codes are impossible");
}

Phase1Result phase1_learn_codebook(const LabeledDataset& data, LlcModel& model,
                                   const TrainConfig& cfg) {
    Phase1Result result;
    validate_train_config(cfg, data.num_classes, &result.warnings);
    check_model_matches(model, data);
    if (data.num_classes < 2)
        throw ValidationError("phase 1 needs at least 2 classes; a one-class softmax is "
                              "degenerate");

    const std::vector<std::size_t> train_ids = data.train_indices();
    if (train_ids.empty()) throw ValidationError("phase 1: no training instances");

    const std::size_t steps_per_epoch =
        (train_ids.size() + cfg.batch_size - 1) / cfg.batch_size;
    SgdMomentum opt(cfg.phase1_lr, cfg.momentum, cfg.schedule,
                    cfg.phase1_epochs * steps_per_epoch);
    RandomStream rng(cfg.seed);
    const std::vector<Matrix*> params = parameter_list(model, true);

    for (std::size_t epoch = 0; epoch < cfg.phase1_epochs; ++epoch) {
        const double epoch_lr = opt.current_lr();
        const std::vector<std::size_t> order = shuffled_indices(train_ids.size(), rng);
        double loss_sum = 0.0;
        std::size_t step = 0;
        for (const std::vector<std::size_t>& batch : make_batches(order, cfg.batch_size)) {
            const std::vector<std::size_t> ids = batch_to_instances(train_ids, batch);
            Tape tape;
            TapeLeaves leaves = register_leaves(tape, model);
            const VarId code_id = tape.leaf(model.code_matrix);
            const VarId x = tape.leaf(data.gather(ids));

            VarId h = forward_features(tape, x, leaves);
            VarId projected = tape.linear(h, leaves.projection);
            if (cfg.phase1_binarize_instances) projected = tape.ste_binarize(projected);
            const VarId signed_codes = tape.ste_binarize(code_id);
            const VarId logits = tape.linear(projected, signed_codes);
            const VarId loss = tape.softmax_cross_entropy(logits, data.gather_labels(ids));

            const double loss_value = tape.value(loss).at(0, 0);
            check_finite_loss(loss_value, 1, epoch, step, opt.current_lr());
            loss_sum += loss_value * static_cast<double>(ids.size());

            tape.backward(loss);
            std::vector<Matrix> grads = collect_gradients(tape, leaves, code_id);
            apply_weight_decay(grads, params, cfg.weight_decay);
            std::vector<const Matrix*> grad_ptrs;
            for (const Matrix& g : grads) grad_ptrs.push_back(&g);
            opt.step(params, grad_ptrs);
            check_finite_params(params, 1, epoch, step, opt.current_lr());
            ++step;
        }
        result.epochs.push_back(
            {1, epoch, loss_sum / static_cast<double>(train_ids.size()), epoch_lr});
    }

    model.projection.require_finite("phase 1 projection");
    model.code_matrix.require_finite("phase 1 code matrix");

    result.codebook = model.codebook(data.class_names);
    const UniquenessReport audit = result.codebook.audit_uniqueness();
    if (!audit.collisions.empty()) {
        std::size_t collided = 0;
        for (const CollisionGroup& g : audit.collisions) collided += g.class_ids.size();
        result.warnings.push_back("codebook collision: " + std::to_string(collided) +
                                  " classes share " + std::to_string(audit.collisions.size()) +
                                  " codes; proceeding anyway");
    }
    return result;
}

Phase2Result phase2_learn_instances(const LabeledDataset& data, LlcModel& model,
                                    const Codebook& codebook, const TrainConfig& cfg) {
    Phase2Result result;
    validate_train_config(cfg, data.num_classes, &result.warnings);
    check_model_matches(model, data);
    if (codebook.bits() != model.code_bits())
        throw DimensionError("phase 2: codebook has " + std::to_string(codebook.bits()) +
                             " bits, model has " + std::to_string(model.code_bits()));
    if (codebook.num_classes() != data.num_classes)
        throw DimensionError("phase 2: codebook has " + std::to_string(codebook.num_classes()) +
                             " classes, dataset has " + std::to_string(data.num_classes));

    const UniquenessReport audit = codebook.audit_uniqueness();
    if (!audit.collisions.empty())
        result.warnings.push_back("codebook collision: supervising " +
                                  std::to_string(codebook.num_classes()) + " classes with only " +
                                  std::to_string(audit.unique_count) + " distinct codes");

    const std::vector<std::size_t> train_ids = data.train_indices();
    if (train_ids.empty()) throw ValidationError("phase 2: no training instances");

    const std::size_t steps_per_epoch =
        (train_ids.size() + cfg.batch_size - 1) / cfg.batch_size;
    SgdMomentum opt(cfg.phase2_lr, cfg.momentum, cfg.schedule,
                    cfg.phase2_epochs * steps_per_epoch);
    RandomStream rng(cfg.seed + 1);  // decouple from the phase-1 shuffle stream
    const std::vector<Matrix*> params = parameter_list(model, false);

    for (std::size_t epoch = 0; epoch < cfg.phase2_epochs; ++epoch) {
        const double epoch_lr = opt.current_lr();
        const std::vector<std::size_t> order = shuffled_indices(train_ids.size(), rng);
        double loss_sum = 0.0;
        std::size_t step = 0;
        for (const std::vector<std::size_t>& batch : make_batches(order, cfg.batch_size)) {
            const std::vector<std::size_t> ids = batch_to_instances(train_ids, batch);
            Tape tape;
            TapeLeaves leaves = register_leaves(tape, model);
            const VarId x = tape.leaf(data.gather(ids));

            VarId h = forward_features(tape, x, leaves);
            const VarId projected = tape.linear(h, leaves.projection);
            const VarId loss =
                tape.sigmoid_bce(projected, phase2_targets(codebook, data.gather_labels(ids)));

            const double loss_value = tape.value(loss).at(0, 0);
            check_finite_loss(loss_value, 2, epoch, step, opt.current_lr());
            loss_sum += loss_value * static_cast<double>(ids.size());

            tape.backward(loss);
            std::vector<Matrix> grads = collect_gradients(tape, leaves, std::nullopt);
            apply_weight_decay(grads, params, cfg.weight_decay);
            std::vector<const Matrix*> grad_ptrs;
            for (const Matrix& g : grads) grad_ptrs.push_back(&g);
            opt.step(params, grad_ptrs);
            check_finite_params(params, 2, epoch, step, opt.current_lr());
            ++step;
        }
        result.epochs.push_back(
            {2, epoch, loss_sum / static_cast<double>(train_ids.size()), epoch_lr});
    }

    model.projection.require_finite("phase 2 projection");
    return result;
}

TrainReport summarize_training(const LabeledDataset& data, const LlcModel& model,
                               const Codebook& codebook, std::vector<EpochRecord> epochs,
                               std::vector<std::string> warnings,
                               const std::vector<std::size_t>& nested_prefix) {
    TrainReport report;
    report.epochs = std::move(epochs);
    report.warnings = std::move(warnings);
    report.uniqueness = codebook.audit_uniqueness();

    const ClassificationReport train_eval =
        evaluate_classification(model, codebook, data, Split::train);
    const ClassificationReport test_eval =
        evaluate_classification(model, codebook, data, Split::test);
    report.ed_train = train_eval.ed_accuracy;
    report.mhd_train = train_eval.mhd_accuracy;
    report.bits_correct_train = train_eval.mean_bits_correct;
    report.train_instances = train_eval.instances;
    report.ed_test = test_eval.ed_accuracy;
    report.mhd_test = test_eval.mhd_accuracy;
    report.bits_correct_test = test_eval.mean_bits_correct;
    report.test_instances = test_eval.instances;

    for (std::size_t m : nested_prefix) {
        const UniquenessReport audit = codebook.prefix(m).audit_uniqueness();
        std::size_t collided = 0;
        for (const CollisionGroup& g : audit.collisions) collided += g.class_ids.size();
        report.prefix_audits.push_back({m, audit.unique_count, collided});
    }
    return report;
}

TrainReport train_two_phase(const LabeledDataset& data, LlcModel& model, const TrainConfig& cfg) {
    Phase1Result p1 = phase1_learn_codebook(data, model, cfg);
    Phase2Result p2 = phase2_learn_instances(data, model, p1.codebook, cfg);

    std::vector<EpochRecord> epochs = std::move(p1.epochs);
    epochs.insert(epochs.end(), p2.epochs.begin(), p2.epochs.end());
    std::vector<std::string> warnings = std::move(p1.warnings);
    for (const std::string& w : p2.warnings)
        if (std::find(warnings.begin(), warnings.end(), w) == warnings.end())
            warnings.push_back(w);

    return summarize_training(data, model, p1.codebook, std::move(epochs), std::move(warnings),
                              cfg.nested_prefix);
}

Codebook random_codebook(std::size_t num_classes, std::size_t bits, std::uint64_t seed,
                         std::vector<std::string> class_names) {
    if (num_classes == 0) throw ValidationError("random_codebook: need at least 1 class");
    if (bits == 0) throw ValidationError("random_codebook: need at least 1 bit");
    if (bits < 64 && (std::uint64_t{1} << bits) < num_classes)
        throw ValidationError("random_codebook: 2^" + std::to_string(bits) + " < " +
                              std::to_string(num_classes) + ", unique codes are impossible");

    RandomStream rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<BitCode> codes;
        codes.reserve(num_classes);
        std::unordered_set<BitCode, BitCodeHash> seen;
        for (std::size_t c = 0; c < num_classes; ++c) {
            BitCode code(bits);
            for (std::size_t b = 0; b < bits; ++b) code.set_bit(b, rng.sign_bit() > 0.0);
            seen.insert(code);
            codes.push_back(std::move(code));
        }
        if (seen.size() == num_classes)
            return Codebook(bits, std::move(codes), std::move(class_names));
    }
    throw NumericError("random_codebook: no unique draw in 100 attempts (L=" +
                       std::to_string(num_classes) + ", k=" + std::to_string(bits) + ")");
}

Matrix svd_projections(const Matrix& classifier, std::size_t k) {
    const std::size_t L = classifier.rows();
    const std::size_t d = classifier.cols();
    if (k == 0) throw ValidationError("svd_projections: need k >= 1");
    if (k > std::min(L, d))
        throw ValidationError("svd_projections: k=" + std::to_string(k) + " exceeds min(L=" +
                              std::to_string(L) + ", d=" + std::to_string(d) + ")");
    classifier.require_finite("svd classifier");

    const EigenDecomposition eig = jacobi_eigen_symmetric(matmul_tn(classifier, classifier));

    // Top-k right singular directions as rows, first nonzero component positive.
    Matrix directions(k, d);
    for (std::size_t j = 0; j < k; ++j) {
        double sign = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double v = eig.eigenvectors.at(i, j);
            if (std::fabs(v) > 1e-12) {
                sign = v < 0.0 ? -1.0 : 1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < d; ++i)
            directions.at(j, i) = sign * eig.eigenvectors.at(i, j);
    }
    return matmul_nt(classifier, directions);
}

Codebook svd_codebook(const Matrix& classifier, std::size_t k,
                      std::vector<std::string> class_names) {
    const Matrix proj = svd_projections(classifier, k);
    std::vector<BitCode> codes;
    codes.reserve(proj.rows());
    for (std::size_t i = 0; i < proj.rows(); ++i) {
        std::vector<double> row(k);
        for (std::size_t j = 0; j < k; ++j) row[j] = proj.at(i, j) >= 0.0 ? 1.0 : -1.0;
        codes.push_back(BitCode::pack(row));
    }
    return Codebook(k, std::move(codes), std::move(class_names));
}

double bits_correct_statistic(const LlcModel& model, const LabeledDataset& data,
                              const Codebook& codebook, Split split) {
    if (codebook.bits() != model.code_bits())
        throw DimensionError("bits_correct_statistic: codebook/model bit mismatch");
    const std::vector<std::size_t> ids = split_ids(data, split);
    if (ids.empty()) return 0.0;
    const EncodeResult encoded = encode(model, data.gather(ids));
    const std::vector<int> labels = data.gather_labels(ids);
    const std::size_t k = codebook.bits();
    double total = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i)
        total += static_cast<double>(
            k - hamming(encoded.codes[i], codebook.code(static_cast<std::size_t>(labels[i]))));
    return total / static_cast<double>(ids.size());
}

double phase1_dataset_loss(const LlcModel& model, const LabeledDataset& data, Split split,
                           bool binarize_instances) {
    const std::vector<std::size_t> ids = split_ids(data, split);
    if (ids.empty()) return 0.0;
    const Matrix scores = class_scores(model, data.gather(ids), binarize_instances);
    const std::vector<int> labels = data.gather_labels(ids);
    double total = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double row_max = scores.at(i, 0);
        for (std::size_t c = 1; c < scores.cols(); ++c) row_max = std::max(row_max, scores.at(i, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < scores.cols(); ++c)
            denom += std::exp(scores.at(i, c) - row_max);
        total += std::log(denom) - (scores.at(i, static_cast<std::size_t>(labels[i])) - row_max);
    }
    return total / static_cast<double>(ids.size());
}

double phase2_dataset_loss(const LlcModel& model, const Codebook& codebook,
                           const LabeledDataset& data, Split split) {
    if (codebook.bits() != model.code_bits())
        throw DimensionError("phase2_dataset_loss: codebook/model bit mismatch");
    const std::vector<std::size_t> ids = split_ids(data, split);
    if (ids.empty()) return 0.0;
    const EncodeResult encoded = encode(model, data.gather(ids));
    const Matrix targets = phase2_targets(codebook, data.gather_labels(ids));
    double total = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < codebook.bits(); ++j) {
            const double z = encoded.logits.at(i, j);
            const double t = targets.at(i, j);
            total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
        }
    }
    return total / static_cast<double>(ids.size() * codebook.bits());
}

void save_train_report(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_train_report: cannot open " + path);
    for (const EpochRecord& e : report.epochs) {
        nlohmann::json rec{{"type", "epoch"},
                           {"phase", e.phase},
                           {"epoch", e.epoch},
                           {"loss", e.mean_loss},
                           {"lr", e.learning_rate}};
        out << rec.dump() << '\n';
    }
    nlohmann::json prefix_audits = nlohmann::json::array();
    for (const PrefixAudit& a : report.prefix_audits)
        prefix_audits.push_back({{"bits", a.bits},
                                 {"unique", a.unique_count},
                                 {"collided_classes", a.collided_classes}});
    nlohmann::json summary{{"type", "summary"},
                           {"ed_train", report.ed_train},
                           {"mhd_train", report.mhd_train},
                           {"ed_test", report.ed_test},
                           {"mhd_test", report.mhd_test},
                           {"bits_correct_train", report.bits_correct_train},
                           {"bits_correct_test", report.bits_correct_test},
                           {"train_instances", report.train_instances},
                           {"test_instances", report.test_instances},
                           {"unique_codes", report.uniqueness.unique_count},
                           {"collision_groups", report.uniqueness.collisions.size()},
                           {"prefix_audits", prefix_audits},
                           {"warnings", report.warnings}};
    out << summary.dump() << '\n';
    if (!out) throw IoError("save_train_report: write failed for " + path);
}

}  // namespace llc
