// Command-line front end: dataset generation, two-phase training, evaluation,
// retrieval, OOD detection, and taxonomy export. Every command accepts
// --config with key=value lines mirroring its long options; command-line
// flags override file values. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numeric failure.
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llc/analysis.hpp"
#include "llc/bitcode.hpp"
#include "llc/data.hpp"
#include "llc/decode.hpp"
#include "llc/error.hpp"
#include "llc/model.hpp"
#include "llc/ood.hpp"
#include "llc/retrieval.hpp"
#include "llc/train.hpp"

namespace {

using nlohmann::json;

std::string default_report_dir() {
    const char* env = std::getenv("LLC_REPORT_DIR");
    return env && *env ? env : ".";
}

// Empty option values fall back to <report_dir>/<name>.
std::string resolve_output(const std::string& report_dir, const std::string& value,
                           const char* name) {
    if (!value.empty()) return value;
    return (std::filesystem::path(report_dir) / name).string();
}

void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

void require_input_file(const std::string& path, const char* what) {
    if (path.empty()) throw llc::ConfigError(std::string(what) + ": no path given");
    if (!std::filesystem::exists(path))
        throw llc::IoError(std::string(what) + ": no such file: " + path);
}

std::ofstream open_output(const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw llc::IoError("cannot open output file: " + path);
    return out;
}

// key=value lines mirroring the command's long options; '#' starts a comment.
// File values apply only to options not given on the command line, so flags
// always win. Unknown keys are rejected.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw llc::ConfigError("config file: cannot open " + path);

    const auto strip = [](const std::string& s) {
        const char* ws = " \t\r";
        const std::size_t b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(ws) - b + 1);
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = strip(line);
        if (text.empty() || text[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw llc::ConfigError("config file " + where + ": expected key=value");
        const std::string key = strip(text.substr(0, eq));
        const std::string value = strip(text.substr(eq + 1));
        if (key.empty()) throw llc::ConfigError("config file " + where + ": empty key");
        if (key == "config")
            throw llc::ConfigError("config file " + where + ": config files cannot nest");
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw llc::ConfigError("config file " + where + ": unknown key '" + key + "'");
        if (opt->count() > 0) continue;  // set on the command line
        opt->add_result(value);
        opt->run_callback();
    }
}

// Adds --config and wires the command callback so the file is applied first.
template <typename Fn>
void attach_config_and_run(CLI::App* cmd, Fn run) {
    auto cfg = std::make_shared<std::string>();
    cmd->add_option("--config", *cfg, "key=value file; flags override file values");
    cmd->callback([cmd, cfg, run] {
        apply_config_file(cmd, *cfg);
        run();
    });
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        if (start == text.size()) break;
        std::size_t end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const std::string token = text.substr(start, end - start);
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size())
            throw llc::ConfigError(std::string(what) + ": bad list entry '" + token + "'");
        out.push_back(value);
        start = end + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> display_names(const llc::Codebook& cb) {
    std::vector<std::string> names;
    if (cb.class_names().empty()) {
        for (std::size_t i = 0; i < cb.num_classes(); ++i) names.push_back(std::to_string(i));
    } else {
        for (std::size_t i = 0; i < cb.num_classes(); ++i)
            names.push_back(cb.class_names()[i].empty() ? std::to_string(i)
                                                        : cb.class_names()[i]);
    }
    return names;
}

llc::Split parse_split(const std::string& name) {
    if (name == "train") return llc::Split::train;
    if (name == "test") return llc::Split::test;
    if (name == "all") return llc::Split::all;
    throw llc::ConfigError("unknown split: " + name);
}

std::vector<std::size_t> split_instance_ids(const llc::LabeledDataset& ds, llc::Split split) {
    if (split == llc::Split::train) return ds.train_indices();
    if (split == llc::Split::test) return ds.test_indices();
    std::vector<std::size_t> ids(ds.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
}

void check_codebook_matches_model(const llc::Codebook& cb, const llc::LlcModel& model) {
    if (cb.bits() != model.code_bits())
        throw llc::DimensionError("codebook has " + std::to_string(cb.bits()) +
                                  " bits but checkpoint has " +
                                  std::to_string(model.code_bits()));
    if (cb.num_classes() != model.num_classes())
        throw llc::DimensionError("codebook has " + std::to_string(cb.num_classes()) +
                                  " classes but checkpoint has " +
                                  std::to_string(model.num_classes()));
}

void check_dataset_matches_model(const llc::LabeledDataset& ds, const llc::LlcModel& model) {
    const std::size_t expected =
        model.backbone.weights.empty() ? model.feature_dim() : model.input_dim();
    if (ds.dim() != expected)
        throw llc::DimensionError("dataset has " + std::to_string(ds.dim()) +
                                  " features but checkpoint expects " + std::to_string(expected));
}

// Keeps only the listed classes, remapping labels densely in ascending order
// of the kept original ids.
llc::LabeledDataset filter_classes(const llc::LabeledDataset& ds, std::vector<int> keep) {
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    if (keep.empty()) throw llc::ValidationError("class filter: no classes kept");
    for (int c : keep)
        if (c < 0 || static_cast<std::size_t>(c) >= ds.num_classes)
            throw llc::ValidationError("class filter: class " + std::to_string(c) +
                                       " outside [0, " + std::to_string(ds.num_classes) + ")");

    std::vector<int> remap(ds.num_classes, -1);
    for (std::size_t n = 0; n < keep.size(); ++n) remap[static_cast<std::size_t>(keep[n])] =
        static_cast<int>(n);

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (remap[static_cast<std::size_t>(ds.labels[i])] >= 0) rows.push_back(i);

    llc::LabeledDataset out;
    out.features = ds.gather(rows);
    out.labels.reserve(rows.size());
    out.is_test.reserve(rows.size());
    for (std::size_t i : rows) {
        out.labels.push_back(remap[static_cast<std::size_t>(ds.labels[i])]);
        out.is_test.push_back(ds.is_test[i]);
    }
    out.num_classes = keep.size();
    for (int c : keep) out.class_names.push_back(ds.class_names[static_cast<std::size_t>(c)]);
    out.provenance = ds.provenance + "-subset";
    if (ds.synthetic) {
        llc::SyntheticInfo info;
        info.spec = ds.synthetic->spec;
        info.class_means = llc::Matrix(keep.size(), ds.dim());
        for (std::size_t n = 0; n < keep.size(); ++n) {
            for (std::size_t j = 0; j < ds.dim(); ++j)
                info.class_means.at(n, j) =
                    ds.synthetic->class_means.at(static_cast<std::size_t>(keep[n]), j);
            info.branch_paths.push_back(
                ds.synthetic->branch_paths[static_cast<std::size_t>(keep[n])]);
        }
        out.synthetic = std::move(info);
    }
    return out;
}

// Codes text file: header "#llc-codes k=<k>", then one "<bits>\t<label>" line
// per entry; entry ids follow file order.
struct CodesFile {
    std::vector<llc::BitCode> codes;
    std::vector<int> labels;
};

CodesFile load_codes_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw llc::IoError("cannot open codes file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw llc::ParseError(path + ": empty codes file");
    std::size_t bits = 0;
    if (std::sscanf(line.c_str(), "#llc-codes k=%zu", &bits) != 1 || bits == 0)
        throw llc::ParseError(path + ":1: expected header '#llc-codes k=<k>'");

    CodesFile out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw llc::ParseError(path + ":" + std::to_string(line_no) +
                                  ": expected '<bits>\\t<label>'");
        const std::string bit_text = line.substr(0, tab);
        const std::string label_text = line.substr(tab + 1);
        if (bit_text.size() != bits)
            throw llc::ParseError(path + ":" + std::to_string(line_no) + ": " +
                                  std::to_string(bit_text.size()) + " bits, header says " +
                                  std::to_string(bits));
        int label = 0;
        const auto [ptr, ec] =
            std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
        if (ec != std::errc() || ptr != label_text.data() + label_text.size() || label < 0)
            throw llc::ParseError(path + ":" + std::to_string(line_no) + ": bad label '" +
                                  label_text + "'");
        out.codes.push_back(llc::BitCode::from_string(bit_text));
        out.labels.push_back(label);
    }
    if (out.codes.empty()) throw llc::ParseError(path + ": no code entries");
    return out;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataOpts {
    std::string out;
    std::string report_dir;
    std::uint64_t seed = 7;
    int depth = 2;
    int branching = 4;
    int samples_per_class = 200;
    std::size_t dim = 32;
    double noise_scale = 1.0;
    double test_fraction = 0.25;
    bool standardize = true;
    std::string holdout_classes;
    std::string holdout_out;
};

void run_gen_data(const GenDataOpts& o) {
    if (o.out.empty()) throw llc::ConfigError("--out: no path given");
    llc::LabeledDataset ds =
        llc::generate_hierarchical(o.seed, o.depth, o.branching, o.samples_per_class, o.dim,
                                   o.noise_scale, o.test_fraction, /*standardize=*/false);

    const std::vector<std::size_t> holdout =
        parse_size_list(o.holdout_classes, "--holdout-classes");
    if (!holdout.empty()) {
        if (o.holdout_out.empty())
            throw llc::ConfigError("--holdout-classes requires --holdout-out");
        std::vector<int> keep, drop;
        for (std::size_t c = 0; c < ds.num_classes; ++c) {
            const bool held =
                std::find(holdout.begin(), holdout.end(), c) != holdout.end();
            (held ? drop : keep).push_back(static_cast<int>(c));
        }
        if (drop.size() != holdout.size())
            throw llc::ConfigError("--holdout-classes lists a class id twice or out of range");
        if (keep.empty()) throw llc::ConfigError("--holdout-classes keeps no classes");

        llc::LabeledDataset main_ds = filter_classes(ds, keep);
        llc::LabeledDataset held_ds = filter_classes(ds, drop);
        if (o.standardize) {
            // The held-out file goes through the in-distribution preprocessing.
            const llc::FeatureStats stats = llc::compute_train_stats(main_ds);
            llc::apply_standardization(main_ds, stats);
            llc::apply_standardization(held_ds, stats);
            if (main_ds.synthetic) main_ds.synthetic->spec.standardized = true;
            if (held_ds.synthetic) held_ds.synthetic->spec.standardized = true;
        }
        ensure_parent_dir(o.out);
        ensure_parent_dir(o.holdout_out);
        llc::save_dataset(main_ds, o.out);
        llc::save_dataset(held_ds, o.holdout_out);
        std::cout << json{{"type", "gen-data"},
                          {"out", o.out},
                          {"classes", main_ds.num_classes},
                          {"instances", main_ds.size()},
                          {"holdout_out", o.holdout_out},
                          {"holdout_classes", held_ds.num_classes},
                          {"holdout_instances", held_ds.size()}}
                         .dump()
                  << '\n';
        return;
    }

    if (o.standardize) {
        llc::standardize_features(ds);
        if (ds.synthetic) ds.synthetic->spec.standardized = true;
    }
    ensure_parent_dir(o.out);
    llc::save_dataset(ds, o.out);
    std::cout << json{{"type", "gen-data"},
                      {"out", o.out},
                      {"classes", ds.num_classes},
                      {"instances", ds.size()}}
                     .dump()
              << '\n';
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string dataset;
    std::string report_dir;
    std::string checkpoint;
    std::string codebook;
    std::string report;
    std::string init_checkpoint;
    std::string init_codebook;
    std::string phase = "both";
    std::size_t bits = 16;
    std::string hidden = "64";
    std::size_t feature_dim = 32;
    std::size_t phase1_epochs = 100;
    std::size_t phase2_epochs = 25;
    std::size_t batch = 64;
    double phase1_lr = 0.1;
    double phase2_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::string schedule = "cosine";
    std::uint64_t seed = 0;
    bool binarize_instances = false;
    std::string nested_prefix;
};

llc::TrainConfig make_train_config(const TrainOpts& o) {
    llc::TrainConfig cfg;
    cfg.bits = o.bits;
    cfg.phase1_epochs = o.phase1_epochs;
    cfg.phase2_epochs = o.phase2_epochs;
    cfg.batch_size = o.batch;
    cfg.phase1_lr = o.phase1_lr;
    cfg.phase2_lr = o.phase2_lr;
    cfg.momentum = o.momentum;
    cfg.weight_decay = o.weight_decay;
    cfg.schedule = o.schedule == "constant" ? llc::Schedule::constant : llc::Schedule::cosine;
    cfg.seed = o.seed;
    cfg.phase1_binarize_instances = o.binarize_instances;
    cfg.nested_prefix = parse_size_list(o.nested_prefix, "--nested-prefix");
    return cfg;
}

json summary_record(const llc::TrainReport& report) {
    json prefix_audits = json::array();
    for (const llc::PrefixAudit& a : report.prefix_audits)
        prefix_audits.push_back({{"bits", a.bits},
                                 {"unique", a.unique_count},
                                 {"collided_classes", a.collided_classes}});
    return json{{"type", "summary"},
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
}

void run_train(const TrainOpts& o) {
    require_input_file(o.dataset, "--dataset");
    const std::string checkpoint_path = resolve_output(o.report_dir, o.checkpoint, "model.ckpt");
    const std::string codebook_path = resolve_output(o.report_dir, o.codebook, "codebook.txt");
    const std::string report_path =
        resolve_output(o.report_dir, o.report, "train_report.jsonl");

    llc::LabeledDataset data = llc::load_dataset(o.dataset);
    llc::TrainConfig cfg = make_train_config(o);

    llc::LlcModel model;
    if (!o.init_checkpoint.empty()) {
        require_input_file(o.init_checkpoint, "--init-checkpoint");
        model = llc::load_checkpoint(o.init_checkpoint);
        check_dataset_matches_model(data, model);
        if (model.code_bits() != cfg.bits)
            throw llc::ConfigError("--bits " + std::to_string(cfg.bits) +
                                   " disagrees with checkpoint bits " +
                                   std::to_string(model.code_bits()));
    } else {
        if (o.phase == "2")
            throw llc::ConfigError("--phase 2 needs --init-checkpoint from a phase-1 run");
        llc::RandomStream rng(cfg.seed);
        model = llc::make_model(data.dim(), parse_size_list(o.hidden, "--hidden"),
                                o.feature_dim, cfg.bits, data.num_classes, rng);
    }

    llc::TrainReport report;
    if (o.phase == "both") {
        report = llc::train_two_phase(data, model, cfg);
    } else if (o.phase == "1") {
        llc::Phase1Result p1 = llc::phase1_learn_codebook(data, model, cfg);
        report = llc::summarize_training(data, model, p1.codebook, std::move(p1.epochs),
                                         std::move(p1.warnings), cfg.nested_prefix);
    } else {
        llc::Codebook cb;
        if (!o.init_codebook.empty()) {
            require_input_file(o.init_codebook, "--init-codebook");
            cb = llc::load_codebook(o.init_codebook);
            check_codebook_matches_model(cb, model);
        } else {
            cb = model.codebook(data.class_names);
        }
        llc::Phase2Result p2 = llc::phase2_learn_instances(data, model, cb, cfg);
        report = llc::summarize_training(data, model, cb, std::move(p2.epochs),
                                         std::move(p2.warnings), cfg.nested_prefix);
    }

    ensure_parent_dir(checkpoint_path);
    llc::save_checkpoint(model, checkpoint_path);
    ensure_parent_dir(codebook_path);
    llc::save_codebook(model.codebook(data.class_names), codebook_path);
    ensure_parent_dir(report_path);
    llc::save_train_report(report, report_path);

    for (const std::string& w : report.warnings) std::cerr << "llc: warning: " << w << '\n';
    std::cout << summary_record(report).dump() << '\n';
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string dataset;
    std::string checkpoint;
    std::string codebook;
    std::string report_dir;
    std::string report;
    std::string split = "test";
    bool per_instance = false;
};

void run_eval(const EvalOpts& o) {
    require_input_file(o.dataset, "--dataset");
    require_input_file(o.checkpoint, "--checkpoint");
    require_input_file(o.codebook, "--codebook");
    const std::string report_path = resolve_output(o.report_dir, o.report, "eval_report.jsonl");

    llc::LabeledDataset data = llc::load_dataset(o.dataset);
    llc::LlcModel model = llc::load_checkpoint(o.checkpoint);
    llc::Codebook cb = llc::load_codebook(o.codebook);
    check_codebook_matches_model(cb, model);
    check_dataset_matches_model(data, model);

    const llc::Split split = parse_split(o.split);
    const llc::ClassificationReport result =
        llc::evaluate_classification(model, cb, data, split, o.per_instance);

    std::ofstream out = open_output(report_path);
    if (o.per_instance) {
        for (const llc::InstanceDecode& inst : result.per_instance) {
            out << json{{"type", "instance"},
                        {"instance", inst.instance_id},
                        {"label", inst.label},
                        {"code", inst.code.to_string()},
                        {"ed", inst.ed_result},
                        {"mhd", inst.mhd_result},
                        {"bits_correct", inst.bits_correct}}
                       .dump()
                << '\n';
        }
    }
    const json summary{{"type", "summary"},
                       {"split", o.split},
                       {"ed_accuracy", result.ed_accuracy},
                       {"mhd_accuracy", result.mhd_accuracy},
                       {"mean_bits_correct", result.mean_bits_correct},
                       {"instances", result.instances},
                       {"unique_codes", result.unique_codes}};
    out << summary.dump() << '\n';
    if (!out) throw llc::IoError("write failed for " + report_path);
    std::cout << summary.dump() << '\n';
}

// ---------------------------------------------------------------------------
// retrieve
// ---------------------------------------------------------------------------

struct RetrieveOpts {
    std::string dataset;
    std::string checkpoint;
    std::string db_codes;
    std::string query_codes;
    std::string db_split = "train";
    std::string query_split = "test";
    std::string report_dir;
    std::string report;
    std::size_t topk = 0;  // 0 = whole database
};

void run_retrieve(const RetrieveOpts& o) {
    const bool file_mode = !o.db_codes.empty() || !o.query_codes.empty();
    const bool model_mode = !o.dataset.empty() || !o.checkpoint.empty();
    if (file_mode == model_mode)
        throw llc::ConfigError(
            "retrieve needs either --dataset with --checkpoint or --db-codes with "
            "--query-codes");
    const std::string report_path =
        resolve_output(o.report_dir, o.report, "retrieval_report.jsonl");

    std::vector<llc::BitCode> db_codes;
    std::vector<int> db_labels;
    std::vector<llc::QuerySpec> queries;

    if (file_mode) {
        require_input_file(o.db_codes, "--db-codes");
        require_input_file(o.query_codes, "--query-codes");
        CodesFile db = load_codes_file(o.db_codes);
        CodesFile q = load_codes_file(o.query_codes);
        db_codes = std::move(db.codes);
        db_labels = std::move(db.labels);
        for (std::size_t i = 0; i < q.codes.size(); ++i)
            queries.push_back({std::move(q.codes[i]), q.labels[i]});
    } else {
        require_input_file(o.dataset, "--dataset");
        require_input_file(o.checkpoint, "--checkpoint");
        const llc::LabeledDataset data = llc::load_dataset(o.dataset);
        const llc::LlcModel model = llc::load_checkpoint(o.checkpoint);
        check_dataset_matches_model(data, model);

        const std::vector<std::size_t> db_ids =
            split_instance_ids(data, parse_split(o.db_split));
        const std::vector<std::size_t> query_ids =
            split_instance_ids(data, parse_split(o.query_split));
        if (db_ids.empty()) throw llc::ValidationError("retrieve: database split is empty");
        if (query_ids.empty()) throw llc::ValidationError("retrieve: query split is empty");

        db_codes = llc::encode(model, data.gather(db_ids)).codes;
        db_labels = data.gather_labels(db_ids);
        const llc::EncodeResult q = llc::encode(model, data.gather(query_ids));
        const std::vector<int> q_labels = data.gather_labels(query_ids);
        for (std::size_t i = 0; i < query_ids.size(); ++i)
            queries.push_back({q.codes[i], q_labels[i]});
    }

    const llc::RetrievalIndex index(std::move(db_codes), std::move(db_labels));
    const std::size_t topk = o.topk == 0 ? index.size() : o.topk;
    if (topk > index.size())
        throw llc::ConfigError("--topk " + std::to_string(topk) + " exceeds database size " +
                               std::to_string(index.size()));

    const llc::MapResult corrected =
        llc::map_at_k(index, queries, topk, llc::ApVariant::corrected);
    const llc::MapResult reported =
        llc::map_at_k(index, queries, topk, llc::ApVariant::reported);

    std::ofstream out = open_output(report_path);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out << json{{"type", "query"},
                    {"query", i},
                    {"label", queries[i].label},
                    {"ap_corrected", corrected.per_query[i]},
                    {"ap_reported", reported.per_query[i]}}
                   .dump()
            << '\n';
    }
    const json summary{{"type", "summary"},
                       {"topk", topk},
                       {"queries", queries.size()},
                       {"map_corrected", corrected.map},
                       {"map_reported", reported.map},
                       {"zero_relevant_retrievals", corrected.zero_relevant_retrievals}};
    out << summary.dump() << '\n';
    if (!out) throw llc::IoError("write failed for " + report_path);
    std::cout << summary.dump() << '\n';
}

// ---------------------------------------------------------------------------
// ood
// ---------------------------------------------------------------------------

struct OodOpts {
    std::string dataset;
    std::string ood_dataset;
    std::string checkpoint;
    std::string codebook;
    std::string report_dir;
    std::string report;
    std::string summary;
    std::string sweep;
    std::string score_source = "mhd";
    std::size_t conservative_samples = 50;
};

std::vector<double> pool_scores(const llc::LlcModel& model, const llc::Codebook& cb,
                                const llc::Matrix& rows, const std::string& source) {
    if (source == "scores") return llc::max_softmax_probability(llc::class_scores(model, rows));
    // Deployed pipeline: per-class Hamming distances of the instance code.
    const llc::EncodeResult encoded = llc::encode(model, rows);
    std::vector<std::vector<std::size_t>> distances(encoded.codes.size());
    for (std::size_t i = 0; i < encoded.codes.size(); ++i) {
        distances[i].resize(cb.num_classes());
        for (std::size_t c = 0; c < cb.num_classes(); ++c)
            distances[i][c] = llc::hamming(encoded.codes[i], cb.code(c));
    }
    return llc::max_probability_from_distances(distances);
}

void run_ood(const OodOpts& o) {
    require_input_file(o.dataset, "--dataset");
    require_input_file(o.ood_dataset, "--ood-dataset");
    require_input_file(o.checkpoint, "--checkpoint");
    require_input_file(o.codebook, "--codebook");
    if (o.score_source != "mhd" && o.score_source != "scores")
        throw llc::ConfigError("--score-source must be 'mhd' or 'scores'");
    if (o.conservative_samples == 0)
        throw llc::ConfigError("--conservative-samples must be >= 1");
    const std::string verdicts_path =
        resolve_output(o.report_dir, o.report, "ood_verdicts.jsonl");
    const std::string summary_path =
        resolve_output(o.report_dir, o.summary, "ood_summary.jsonl");
    const std::string sweep_path = resolve_output(o.report_dir, o.sweep, "ood_sweep.csv");

    const llc::LabeledDataset id_data = llc::load_dataset(o.dataset);
    const llc::LabeledDataset ood_data = llc::load_dataset(o.ood_dataset);
    const llc::LlcModel model = llc::load_checkpoint(o.checkpoint);
    const llc::Codebook cb = llc::load_codebook(o.codebook);
    check_codebook_matches_model(cb, model);
    check_dataset_matches_model(id_data, model);
    if (ood_data.dim() != id_data.dim())
        throw llc::DimensionError("ood dataset has " + std::to_string(ood_data.dim()) +
                                  " features, in-distribution dataset has " +
                                  std::to_string(id_data.dim()));

    const std::vector<std::size_t> id_ids = id_data.test_indices();
    if (id_ids.empty())
        throw llc::ValidationError("ood: in-distribution dataset has no test split");
    std::vector<std::size_t> ood_ids(ood_data.size());
    for (std::size_t i = 0; i < ood_ids.size(); ++i) ood_ids[i] = i;
    if (ood_ids.empty()) throw llc::ValidationError("ood: ood dataset is empty");

    const llc::Matrix id_rows = id_data.gather(id_ids);
    const llc::Matrix ood_rows = ood_data.gather(ood_ids);

    const llc::DecodeIndex index(cb);
    const std::vector<llc::BitCode> id_codes = llc::encode(model, id_rows).codes;
    const std::vector<llc::BitCode> ood_codes = llc::encode(model, ood_rows).codes;

    const std::vector<double> id_scores = pool_scores(model, cb, id_rows, o.score_source);
    const std::vector<double> ood_scores = pool_scores(model, cb, ood_rows, o.score_source);

    const llc::ThresholdModel tuned = llc::tune_threshold_max_f1(id_scores, ood_scores);
    std::vector<double> calibration(ood_scores.begin(),
                                    ood_scores.begin() +
                                        static_cast<std::ptrdiff_t>(std::min(
                                            o.conservative_samples, ood_scores.size())));
    const llc::ThresholdModel conservative = llc::conservative_threshold(calibration);

    const std::size_t total = id_ids.size() + ood_ids.size();
    std::vector<llc::OodTruth> truth(total);
    for (std::size_t i = 0; i < total; ++i) truth[i] = {i, i >= id_ids.size()};

    auto code_at = [&](std::size_t i) -> const llc::BitCode& {
        return i < id_ids.size() ? id_codes[i] : ood_codes[i - id_ids.size()];
    };
    auto score_at = [&](std::size_t i) {
        return i < id_ids.size() ? id_scores[i] : ood_scores[i - id_ids.size()];
    };

    std::vector<llc::OodVerdict> miss_verdicts(total), tuned_verdicts(total),
        conservative_verdicts(total);
    for (std::size_t i = 0; i < total; ++i) {
        miss_verdicts[i] = {i, llc::exact_miss_detect(index, code_at(i)),
                            llc::OodRule::exact_miss, std::nullopt};
        tuned_verdicts[i] = {i, tuned.is_ood(score_at(i)), llc::OodRule::tuned_threshold,
                             score_at(i)};
        conservative_verdicts[i] = {i, conservative.is_ood(score_at(i)),
                                    llc::OodRule::conservative_threshold, score_at(i)};
    }

    std::ofstream verdicts_out = open_output(verdicts_path);
    auto dump_verdicts = [&](const std::vector<llc::OodVerdict>& verdicts) {
        for (const llc::OodVerdict& v : verdicts) {
            json rec{{"type", "verdict"},
                     {"rule", llc::ood_rule_name(v.rule)},
                     {"instance", v.instance_id},
                     {"source", v.instance_id < id_ids.size() ? "id" : "ood"},
                     {"is_ood", v.is_ood}};
            if (v.score) rec["score"] = *v.score;
            verdicts_out << rec.dump() << '\n';
        }
    };
    dump_verdicts(miss_verdicts);
    dump_verdicts(tuned_verdicts);
    dump_verdicts(conservative_verdicts);
    if (!verdicts_out) throw llc::IoError("write failed for " + verdicts_path);

    std::ofstream summary_out = open_output(summary_path);
    const json pool{{"type", "pool"},
                    {"id_instances", id_ids.size()},
                    {"ood_instances", ood_ids.size()},
                    {"score_source", o.score_source}};
    summary_out << pool.dump() << '\n';
    auto rule_summary = [&](const std::vector<llc::OodVerdict>& verdicts, llc::OodRule rule,
                            const llc::ThresholdModel* model_used) {
        const llc::F1Report f1 = llc::evaluate_f1(verdicts, truth);
        json rec{{"type", "rule_summary"},
                 {"rule", llc::ood_rule_name(rule)},
                 {"precision", f1.precision},
                 {"recall", f1.recall},
                 {"f1", f1.f1},
                 {"true_positives", f1.true_positives},
                 {"false_positives", f1.false_positives},
                 {"false_negatives", f1.false_negatives}};
        if (model_used) {
            rec["threshold"] = model_used->threshold;
            rec["calibration_count"] = model_used->calibration_count;
        }
        summary_out << rec.dump() << '\n';
        std::cout << rec.dump() << '\n';
    };
    rule_summary(miss_verdicts, llc::OodRule::exact_miss, nullptr);
    rule_summary(tuned_verdicts, llc::OodRule::tuned_threshold, &tuned);
    rule_summary(conservative_verdicts, llc::OodRule::conservative_threshold, &conservative);
    if (!summary_out) throw llc::IoError("write failed for " + summary_path);

    std::ofstream sweep_out = open_output(sweep_path);
    sweep_out << "threshold,f1\n";
    for (const llc::SweepPoint& p : llc::f1_sweep(id_scores, ood_scores))
        sweep_out << format_double(p.threshold) << ',' << format_double(p.f1) << '\n';
    if (!sweep_out) throw llc::IoError("write failed for " + sweep_path);
}

// ---------------------------------------------------------------------------
// taxonomy
// ---------------------------------------------------------------------------

struct TaxonomyOpts {
    std::string codebook;
    std::string checkpoint;
    std::string dataset;
    std::string report_dir;
    std::string linkage = "average";
    std::string newick;
    std::string codes_heatmap;
    std::string real_heatmap;
    std::string spearman;
};

llc::Linkage parse_linkage(const std::string& name) {
    if (name == "single") return llc::Linkage::single;
    if (name == "complete") return llc::Linkage::complete;
    if (name == "average") return llc::Linkage::average;
    throw llc::ConfigError("unknown linkage: " + name);
}

void run_taxonomy(const TaxonomyOpts& o) {
    require_input_file(o.codebook, "--codebook");
    const std::string newick_path = resolve_output(o.report_dir, o.newick, "taxonomy.nwk");
    const std::string codes_heatmap_path =
        resolve_output(o.report_dir, o.codes_heatmap, "heatmap_codes.csv");

    const llc::Codebook cb = llc::load_codebook(o.codebook);
    const std::vector<std::string> names = display_names(cb);

    const llc::Dendrogram tree = llc::agglomerate(cb, parse_linkage(o.linkage));
    std::ofstream newick_out = open_output(newick_path);
    newick_out << llc::to_newick(tree, names) << '\n';
    if (!newick_out) throw llc::IoError("write failed for " + newick_path);

    const llc::HeatMatrix codes_heat =
        llc::inner_product_heatmap(cb.to_matrix(), llc::HeatSource::bit_codes);
    ensure_parent_dir(codes_heatmap_path);
    llc::save_heatmap_csv(codes_heat, names, codes_heatmap_path);

    json summary{{"type", "taxonomy"},
                 {"classes", cb.num_classes()},
                 {"linkage", o.linkage},
                 {"newick", newick_path},
                 {"codes_heatmap", codes_heatmap_path}};

    const bool with_real = !o.checkpoint.empty() || !o.dataset.empty();
    if (with_real) {
        require_input_file(o.checkpoint, "--checkpoint");
        require_input_file(o.dataset, "--dataset");
        const std::string real_heatmap_path =
            resolve_output(o.report_dir, o.real_heatmap, "heatmap_real.csv");
        const std::string spearman_path =
            resolve_output(o.report_dir, o.spearman, "spearman.csv");

        const llc::LabeledDataset data = llc::load_dataset(o.dataset);
        const llc::LlcModel model = llc::load_checkpoint(o.checkpoint);
        check_codebook_matches_model(cb, model);
        check_dataset_matches_model(data, model);

        // Real-valued class representations: per-class mean of the projected
        // features over the train split.
        llc::Matrix real(cb.num_classes(), model.code_bits());
        std::vector<std::size_t> counts(cb.num_classes(), 0);
        const std::vector<std::size_t> train_ids = data.train_indices();
        const llc::Matrix logits = llc::encode(model, data.gather(train_ids)).logits;
        const std::vector<int> labels = data.gather_labels(train_ids);
        for (std::size_t i = 0; i < train_ids.size(); ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            for (std::size_t j = 0; j < model.code_bits(); ++j)
                real.at(c, j) += logits.at(i, j);
            ++counts[c];
        }
        for (std::size_t c = 0; c < cb.num_classes(); ++c) {
            if (counts[c] == 0)
                throw llc::ValidationError("taxonomy: class " + std::to_string(c) +
                                           " has no train instances");
            for (std::size_t j = 0; j < model.code_bits(); ++j)
                real.at(c, j) /= static_cast<double>(counts[c]);
        }

        const llc::HeatMatrix real_heat =
            llc::inner_product_heatmap(real, llc::HeatSource::real_representations);
        ensure_parent_dir(real_heatmap_path);
        llc::save_heatmap_csv(real_heat, names, real_heatmap_path);

        const llc::SpearmanResult spearman = llc::spearman_rowwise(codes_heat, real_heat);
        std::ofstream spearman_out = open_output(spearman_path);
        spearman_out << "class,spearman\n";
        for (std::size_t c = 0; c < cb.num_classes(); ++c)
            spearman_out << names[c] << ',' << format_double(spearman.per_class[c]) << '\n';
        spearman_out << "mean," << format_double(spearman.mean) << '\n';
        if (!spearman_out) throw llc::IoError("write failed for " + spearman_path);

        summary["real_heatmap"] = real_heatmap_path;
        summary["spearman"] = spearman_path;
        summary["spearman_mean"] = spearman.mean;
    }

    std::cout << summary.dump() << '\n';
}

void add_report_dir(CLI::App* cmd, std::string& target) {
    target = default_report_dir();
    cmd->add_option("--report-dir", target,
                    "Directory for default output paths (env LLC_REPORT_DIR)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-dimensional binary class codes: training, decoding, retrieval, "
                 "OOD detection and taxonomy tools"};
    app.require_subcommand(1);

    auto gen = std::make_shared<GenDataOpts>();
    {
        CLI::App* cmd = app.add_subcommand("gen-data", "Generate a hierarchical Gaussian dataset");
        cmd->add_option("--out", gen->out, "Output dataset CSV path");
        add_report_dir(cmd, gen->report_dir);
        cmd->add_option("--seed", gen->seed, "RNG seed");
        cmd->add_option("--depth", gen->depth, "Tree depth (levels below the root)");
        cmd->add_option("--branching", gen->branching, "Children per node");
        cmd->add_option("--samples-per-class", gen->samples_per_class, "Instances per class");
        cmd->add_option("--dim", gen->dim, "Feature dimensions");
        cmd->add_option("--noise-scale", gen->noise_scale, "Within-class noise scale");
        cmd->add_option("--test-fraction", gen->test_fraction, "Held-out fraction per class");
        cmd->add_flag("--standardize,!--no-standardize", gen->standardize,
                      "Standardize features with train-split statistics");
        cmd->add_option("--holdout-classes", gen->holdout_classes,
                        "Comma-separated class ids exported to a separate file");
        cmd->add_option("--holdout-out", gen->holdout_out,
                        "Output CSV for the held-out classes");
        attach_config_and_run(cmd, [gen] { run_gen_data(*gen); });
    }

    auto train = std::make_shared<TrainOpts>();
    {
        CLI::App* cmd = app.add_subcommand("train", "Two-phase training (codebook, then instance codes)");
        cmd->add_option("--dataset", train->dataset, "Input dataset CSV");
        add_report_dir(cmd, train->report_dir);
        cmd->add_option("--checkpoint", train->checkpoint,
                        "Output checkpoint path (default <report-dir>/model.ckpt)");
        cmd->add_option("--codebook", train->codebook,
                        "Output codebook path (default <report-dir>/codebook.txt)");
        cmd->add_option("--report", train->report,
                        "Output report path (default <report-dir>/train_report.jsonl)");
        cmd->add_option("--phase", train->phase, "Training phases to run")
            ->check(CLI::IsMember({"both", "1", "2"}));
        cmd->add_option("--init-checkpoint", train->init_checkpoint,
                        "Start from this checkpoint instead of a fresh model");
        cmd->add_option("--init-codebook", train->init_codebook,
                        "Codebook for --phase 2 (default: signs from the checkpoint)");
        cmd->add_option("--bits", train->bits, "Code length k");
        cmd->add_option("--hidden", train->hidden,
                        "Comma-separated hidden layer widths (empty for none)");
        cmd->add_option("--feature-dim", train->feature_dim, "Backbone output width");
        cmd->add_option("--phase1-epochs", train->phase1_epochs, "Codebook learning epochs");
        cmd->add_option("--phase2-epochs", train->phase2_epochs, "Instance-code epochs");
        cmd->add_option("--batch", train->batch, "Minibatch size");
        cmd->add_option("--phase1-lr", train->phase1_lr, "Phase-1 peak learning rate");
        cmd->add_option("--phase2-lr", train->phase2_lr, "Phase-2 peak learning rate");
        cmd->add_option("--momentum", train->momentum, "SGD momentum in [0,1)");
        cmd->add_option("--weight-decay", train->weight_decay, "L2 gradient penalty");
        cmd->add_option("--schedule", train->schedule, "Learning-rate schedule")
            ->check(CLI::IsMember({"cosine", "constant"}));
        cmd->add_option("--seed", train->seed, "RNG seed (init and shuffling)");
        cmd->add_flag("--binarize-instances", train->binarize_instances,
                      "Sign the projected features during phase 1 as well");
        cmd->add_option("--nested-prefix", train->nested_prefix,
                        "Comma-separated prefix lengths to audit for uniqueness");
        attach_config_and_run(cmd, [train] { run_train(*train); });
    }

    auto eval = std::make_shared<EvalOpts>();
    {
        CLI::App* cmd = app.add_subcommand("eval", "Classification evaluation (exact and minimum-Hamming decoding)");
        cmd->add_option("--dataset", eval->dataset, "Input dataset CSV");
        cmd->add_option("--checkpoint", eval->checkpoint, "Model checkpoint");
        cmd->add_option("--codebook", eval->codebook, "Class codebook");
        add_report_dir(cmd, eval->report_dir);
        cmd->add_option("--report", eval->report,
                        "Output report path (default <report-dir>/eval_report.jsonl)");
        cmd->add_option("--split", eval->split, "Instance split to evaluate")
            ->check(CLI::IsMember({"train", "test", "all"}));
        cmd->add_flag("--per-instance", eval->per_instance,
                      "Also write one record per instance");
        attach_config_and_run(cmd, [eval] { run_eval(*eval); });
    }

    auto retrieve = std::make_shared<RetrieveOpts>();
    {
        CLI::App* cmd = app.add_subcommand("retrieve", "Hamming-ranked retrieval with corrected and legacy MAP");
        cmd->add_option("--dataset", retrieve->dataset, "Dataset CSV (model mode)");
        cmd->add_option("--checkpoint", retrieve->checkpoint, "Model checkpoint (model mode)");
        cmd->add_option("--db-codes", retrieve->db_codes,
                        "Precomputed database codes file (file mode)");
        cmd->add_option("--query-codes", retrieve->query_codes,
                        "Precomputed query codes file (file mode)");
        cmd->add_option("--db-split", retrieve->db_split, "Database split in model mode")
            ->check(CLI::IsMember({"train", "test", "all"}));
        cmd->add_option("--query-split", retrieve->query_split, "Query split in model mode")
            ->check(CLI::IsMember({"train", "test", "all"}));
        add_report_dir(cmd, retrieve->report_dir);
        cmd->add_option("--report", retrieve->report,
                        "Output report path (default <report-dir>/retrieval_report.jsonl)");
        cmd->add_option("--topk", retrieve->topk, "Retrievals per query (0 = whole database)");
        attach_config_and_run(cmd, [retrieve] { run_retrieve(*retrieve); });
    }

    auto ood = std::make_shared<OodOpts>();
    {
        CLI::App* cmd = app.add_subcommand("ood", "Out-of-distribution detection (exact-miss and threshold rules)");
        cmd->add_option("--dataset", ood->dataset, "In-distribution dataset CSV");
        cmd->add_option("--ood-dataset", ood->ood_dataset, "Out-of-distribution dataset CSV");
        cmd->add_option("--checkpoint", ood->checkpoint, "Model checkpoint");
        cmd->add_option("--codebook", ood->codebook, "Class codebook");
        add_report_dir(cmd, ood->report_dir);
        cmd->add_option("--report", ood->report,
                        "Verdicts path (default <report-dir>/ood_verdicts.jsonl)");
        cmd->add_option("--summary", ood->summary,
                        "Summary path (default <report-dir>/ood_summary.jsonl)");
        cmd->add_option("--sweep", ood->sweep,
                        "Threshold-vs-F1 CSV path (default <report-dir>/ood_sweep.csv)");
        cmd->add_option("--score-source", ood->score_source,
                        "Max-probability source: softmax over negated Hamming distances "
                        "('mhd') or over real-valued class scores ('scores')")
            ->check(CLI::IsMember({"mhd", "scores"}));
        cmd->add_option("--conservative-samples", ood->conservative_samples,
                        "OOD samples used to calibrate the conservative threshold");
        attach_config_and_run(cmd, [ood] { run_ood(*ood); });
    }

    auto taxonomy = std::make_shared<TaxonomyOpts>();
    {
        CLI::App* cmd = app.add_subcommand("taxonomy", "Codebook clustering, heatmaps and rank correlation");
        cmd->add_option("--codebook", taxonomy->codebook, "Class codebook");
        cmd->add_option("--checkpoint", taxonomy->checkpoint,
                        "Model checkpoint (enables the real-representation heatmap)");
        cmd->add_option("--dataset", taxonomy->dataset,
                        "Dataset CSV (enables the real-representation heatmap)");
        add_report_dir(cmd, taxonomy->report_dir);
        cmd->add_option("--linkage", taxonomy->linkage, "Cluster distance update rule")
            ->check(CLI::IsMember({"average", "single", "complete"}));
        cmd->add_option("--newick", taxonomy->newick,
                        "Dendrogram path (default <report-dir>/taxonomy.nwk)");
        cmd->add_option("--codes-heatmap", taxonomy->codes_heatmap,
                        "Code inner-product CSV (default <report-dir>/heatmap_codes.csv)");
        cmd->add_option("--real-heatmap", taxonomy->real_heatmap,
                        "Real-representation CSV (default <report-dir>/heatmap_real.csv)");
        cmd->add_option("--spearman", taxonomy->spearman,
                        "Per-class rank correlation CSV (default <report-dir>/spearman.csv)");
        attach_config_and_run(cmd, [taxonomy] { run_taxonomy(*taxonomy); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "llc: [config] " << e.what() << '\n';
        return 2;
    } catch (const llc::ConfigError& e) {
        std::cerr << "llc: [config] " << e.what() << '\n';
        return 2;
    } catch (const llc::NumericError& e) {
        std::cerr << "llc: [numeric] " << e.what() << '\n';
        return 4;
    } catch (const llc::Error& e) {
        std::cerr << "llc: [data] " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "llc: [internal] " << e.what() << '\n';
        return 1;
    }
    return 0;
}
