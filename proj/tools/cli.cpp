// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geomtext/gradcheck.hpp"
#include "geomtext/metrics.hpp"
#include "geomtext/trainer.hpp"

namespace geomtext {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string file_hash(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_text_file(path))));
    return buf;
}

/// Every subcommand records its effective config, seed, and output hashes.
void write_manifest(const std::string& out_dir, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<std::string>& artifacts) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["seed"] = seed;
    json files = json::object();
    for (const auto& a : artifacts) files[fs::path(a).filename().string()] = file_hash(a);
    manifest["artifacts"] = files;
    write_text_file((fs::path(out_dir) / "run_manifest.json").string(),
                    manifest.dump(2) + "\n");
}

std::string ensure_out_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
    return dir.empty() ? std::string(".") : dir;
}

// Encoder options shared by pretrain; both encoders use the same trunk width.
struct EncoderOpts {
    std::size_t embed_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t proj_dim = 512;
    std::size_t max_atoms = 64;
    std::size_t max_seq_len = 32;

    GeomEncoderConfig geom() const {
        GeomEncoderConfig cfg;
        cfg.atom_embed_dim = embed_dim;
        cfg.num_layers = num_layers;
        cfg.num_heads = num_heads;
        cfg.proj_dim = proj_dim;
        cfg.max_atoms = max_atoms;
        return cfg;
    }
    TextEncoderConfig text(std::size_t vocab_size) const {
        TextEncoderConfig cfg;
        cfg.vocab_size = vocab_size;
        cfg.token_embed_dim = embed_dim;
        cfg.num_layers = num_layers;
        cfg.num_heads = num_heads;
        cfg.max_seq_len = max_seq_len;
        cfg.proj_dim = proj_dim;
        return cfg;
    }
};

void add_encoder_options(CLI::App* cmd, EncoderOpts& opts) {
    cmd->add_option("--embed-dim", opts.embed_dim, "Encoder trunk width");
    cmd->add_option("--layers", opts.num_layers, "Transformer layers per encoder");
    cmd->add_option("--heads", opts.num_heads, "Attention heads");
    cmd->add_option("--proj-dim", opts.proj_dim, "Shared embedding dimension");
    cmd->add_option("--max-atoms", opts.max_atoms, "Geometric encoder capacity");
    cmd->add_option("--max-seq-len", opts.max_seq_len, "Text encoder capacity");
}

Vocab vocab_from_config(const json& config) {
    if (!config.contains("vocab")) {
        throw std::runtime_error("checkpoint config carries no vocabulary");
    }
    return Vocab(config.at("vocab").get<std::vector<std::string>>());
}

std::vector<std::pair<std::string, std::string>> read_tsv_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + " line " + std::to_string(lineno) +
                                     ": expected <id>\\t<value>");
        }
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

std::string retrieval_table(const RetrievalReport& a, const RetrievalReport& b) {
    std::string table = "direction\taccuracy";
    for (const auto& [k, v] : a.recall_at_k) table += "\trecall@" + std::to_string(k);
    table += "\n";
    for (const auto* rep : {&a, &b}) {
        table += rep->direction + "\t" + fmt(rep->accuracy);
        for (const auto& [k, v] : rep->recall_at_k) table += "\t" + fmt(v);
        table += "\n";
    }
    return table;
}

// ---- synth-data ------------------------------------------------------------

int cmd_synth_data(const SyntheticConfig& cfg, std::size_t holdout_per_class,
                   const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const auto corpus = generate_synthetic_corpus(cfg);

    std::vector<std::string> artifacts;
    const std::string pairs_path = (fs::path(out_dir) / "pairs.jsonl").string();
    if (holdout_per_class > 0) {
        const CorpusSplit split = split_synthetic_holdout(corpus, holdout_per_class, cfg.seed);
        write_pairs(split.train, pairs_path);
        const std::string holdout_path = (fs::path(out_dir) / "holdout.jsonl").string();
        write_pairs(split.holdout, holdout_path);
        artifacts = {pairs_path, holdout_path};
        std::cout << "wrote " << split.train.size() << " train pairs, " << split.holdout.size()
                  << " holdout pairs\n";
    } else {
        write_pairs(corpus, pairs_path);
        artifacts = {pairs_path};
        std::cout << "wrote " << corpus.size() << " pairs\n";
    }

    json config{{"classes", cfg.num_classes},
                {"per_class", cfg.per_class},
                {"atoms_min", cfg.atoms_range.first},
                {"atoms_max", cfg.atoms_range.second},
                {"vocab_per_class", cfg.vocab_per_class},
                {"jitter_sigma", cfg.jitter_sigma},
                {"distinct_variants", cfg.distinct_variants},
                {"holdout_per_class", holdout_per_class}};
    write_manifest(out_dir, "synth-data", config, cfg.seed, artifacts);
    return 0;
}

// ---- build-data ------------------------------------------------------------

int cmd_build_data(const std::string& xyz_dir, const std::string& annotations_path,
                   std::size_t max_conformers, const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(xyz_dir)) {
        if (entry.path().extension() == ".xyz") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Molecule> geometries;
    for (const auto& file : files) {
        Molecule mol = parse_xyz(read_text_file(file.string()));
        if (mol.id.empty()) mol.id = file.stem().string();
        geometries.push_back(std::move(mol));
    }

    const auto annotations = read_tsv_pairs(annotations_path);
    JoinReport report;
    const auto pairs = join_by_id(geometries, annotations, &report, max_conformers);

    const std::string pairs_path = (fs::path(out_dir) / "pairs.jsonl").string();
    write_pairs(pairs, pairs_path);

    std::cout << "pairs\tunmatched_geometries\tunmatched_annotations\tduplicates\n"
              << pairs.size() << '\t' << report.unmatched_geometries.size() << '\t'
              << report.unmatched_annotations.size() << '\t'
              << report.duplicate_geometries + report.duplicate_annotations << '\n';

    json config{{"xyz_dir", xyz_dir},
                {"annotations", annotations_path},
                {"max_conformers", max_conformers}};
    write_manifest(out_dir, "build-data", config, 0, {pairs_path});
    return 0;
}

// ---- stats ------------------------------------------------------------------

int cmd_stats(const std::string& pairs_path, const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const auto pairs = load_pairs(pairs_path);
    const CorpusStats stats = corpus_stats(pairs);

    std::string table = "quantity\tavg_heavy_atoms\tavg_words\n";
    table += std::to_string(stats.quantity) + "\t" + fmt(stats.avg_heavy_atoms) + "\t" +
             fmt(stats.avg_words) + "\n";
    std::cout << table;
    const std::string stats_path = (fs::path(out_dir) / "stats.tsv").string();
    write_text_file(stats_path, table);

    write_manifest(out_dir, "stats", json{{"pairs", pairs_path}}, 0, {stats_path});
    return 0;
}

// ---- build-vocab ---------------------------------------------------------------

int cmd_build_vocab(const std::string& pairs_path, std::size_t min_freq,
                    const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const auto pairs = load_pairs(pairs_path);
    const Vocab vocab = build_vocab(pairs, min_freq);
    const std::string vocab_path = (fs::path(out_dir) / "vocab.txt").string();
    save_vocab(vocab, vocab_path);
    std::cout << "vocab size " << vocab.size() << "\n";
    write_manifest(out_dir, "build-vocab", json{{"pairs", pairs_path}, {"min_freq", min_freq}}, 0,
                   {vocab_path});
    return 0;
}

// ---- pretrain -------------------------------------------------------------------

double mean_retrieval_accuracy(const std::vector<GeomTextPair>& pairs, const Vocab& vocab,
                               const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                               const TextEncoderConfig& text_cfg) {
    const CorpusEmbeddings embeds = encode_corpus(pairs, vocab, params, geom_cfg, text_cfg);
    const auto [m2t, t2m] = retrieval_eval(embeds.geom, embeds.text, {20});
    return 0.5 * (m2t.accuracy + t2m.accuracy);
}

int cmd_pretrain(const std::string& pairs_path, const std::string& vocab_path,
                 const EncoderOpts& enc, TrainConfig cfg, const std::string& alpha_grid,
                 const std::string& val_path, const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const auto corpus = load_pairs(pairs_path);
    const Vocab vocab = load_vocab(vocab_path);
    const GeomEncoderConfig geom_cfg = enc.geom();
    const TextEncoderConfig text_cfg = enc.text(vocab.size());

    json config = to_json(cfg);
    config["geom"] = to_json(geom_cfg);
    config["text"] = to_json(text_cfg);
    config["vocab"] = vocab.tokens();
    config["pairs"] = pairs_path;

    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.ckpt").string();
    const std::string log_path = (fs::path(out_dir) / "loss_log.tsv").string();
    std::vector<std::string> artifacts{ckpt_path, log_path};

    if (!alpha_grid.empty()) {
        if (val_path.empty()) {
            throw std::invalid_argument("--alpha-grid requires --val pairs for selection");
        }
        const auto val_pairs = load_pairs(val_path);
        std::vector<double> alphas;
        std::stringstream ss(alpha_grid);
        std::string item;
        while (std::getline(ss, item, ',')) alphas.push_back(std::stod(item));
        if (alphas.empty()) throw std::invalid_argument("--alpha-grid is empty");

        std::string table = "alpha\tval_accuracy\n";
        double best_acc = -1.0;
        double best_alpha = alphas.front();
        ModelParams best_params;
        std::vector<LossRow> best_log;
        for (double alpha : alphas) {
            TrainConfig run_cfg = cfg;
            run_cfg.alpha = alpha;
            ModelParams params = build_pretrain_params(geom_cfg, text_cfg, run_cfg.seed);
            const PretrainResult result =
                pretrain(corpus, vocab, params, geom_cfg, text_cfg, run_cfg);
            const double acc =
                mean_retrieval_accuracy(val_pairs, vocab, params, geom_cfg, text_cfg);
            table += fmt(alpha) + "\t" + fmt(acc) + "\n";
            if (acc > best_acc) {
                best_acc = acc;
                best_alpha = alpha;
                best_params = std::move(params);
                best_log = result.log;
            }
        }
        std::cout << table << "selected alpha " << fmt(best_alpha) << "\n";
        const std::string grid_path = (fs::path(out_dir) / "grid_report.tsv").string();
        write_text_file(grid_path, table);
        artifacts.push_back(grid_path);

        config["alpha"] = best_alpha;
        save_checkpoint(best_params, config, ckpt_path);
        write_text_file(log_path, format_loss_log(best_log));
    } else {
        ModelParams params = build_pretrain_params(geom_cfg, text_cfg, cfg.seed);
        const PretrainResult result = pretrain(corpus, vocab, params, geom_cfg, text_cfg, cfg);
        save_checkpoint(params, config, ckpt_path);
        write_text_file(log_path, format_loss_log(result.log));
        const auto& last = result.log.back();
        std::cout << "final step " << last.step << ": l_con " << fmt(last.l_con)
                  << ", l_denoising " << fmt(last.l_den) << ", total " << fmt(last.total) << "\n";
    }

    write_manifest(out_dir, "pretrain", config, cfg.seed, artifacts);
    return 0;
}

// ---- retrieve -------------------------------------------------------------------

int cmd_retrieve(const std::string& ckpt_path, const std::string& pairs_path,
                 std::vector<std::size_t> ks, const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const GeomEncoderConfig geom_cfg = geom_config_from_json(ckpt.config.at("geom"));
    const TextEncoderConfig text_cfg = text_config_from_json(ckpt.config.at("text"));
    const Vocab vocab = vocab_from_config(ckpt.config);
    const auto pairs = load_pairs(pairs_path);

    if (ks.empty()) ks = {20};
    const CorpusEmbeddings embeds =
        encode_corpus(pairs, vocab, ckpt.params, geom_cfg, text_cfg);
    const auto [m2t, t2m] = retrieval_eval(embeds.geom, embeds.text, ks);

    const std::string table = retrieval_table(m2t, t2m);
    std::cout << table;
    const std::string report_path = (fs::path(out_dir) / "retrieval.tsv").string();
    write_text_file(report_path, table);

    json config{{"checkpoint", ckpt_path}, {"pairs", pairs_path}, {"k", ks}};
    write_manifest(out_dir, "retrieve", config, 0, {report_path});
    return 0;
}

// ---- finetune-property ------------------------------------------------------------

int cmd_finetune_property(const std::string& ckpt_path, const std::string& pairs_path,
                          const std::string& targets_path, const std::string& test_pairs_path,
                          const std::string& test_targets_path, PropertyTrainConfig cfg,
                          const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const GeomEncoderConfig geom_cfg = geom_config_from_json(ckpt.config.at("geom"));

    auto load_labeled = [](const std::string& pairs_file, const std::string& targets_file) {
        const auto pairs = load_pairs(pairs_file);
        std::map<std::string, double> by_id;
        for (const auto& [id, value] : read_tsv_pairs(targets_file)) by_id[id] = std::stod(value);
        std::vector<double> targets;
        targets.reserve(pairs.size());
        for (const auto& pair : pairs) {
            auto it = by_id.find(pair.molecule.id);
            if (it == by_id.end()) {
                throw std::runtime_error("no target for molecule " + pair.molecule.id);
            }
            targets.push_back(it->second);
        }
        return std::make_pair(pairs, targets);
    };

    const auto [pairs, targets] = load_labeled(pairs_path, targets_path);
    init_property_params(ckpt.params, geom_cfg, cfg.seed);
    const PropertyTrainResult result =
        finetune_property(pairs, targets, ckpt.params, geom_cfg, cfg);

    std::string table = "split\tmae\n";
    table += "train\t" + fmt(result.train_mae) + "\n";
    if (!test_pairs_path.empty()) {
        const auto [test_pairs, test_targets] = load_labeled(test_pairs_path, test_targets_path);
        std::vector<double> preds;
        preds.reserve(test_pairs.size());
        for (const auto& pair : test_pairs) {
            preds.push_back(
                predict_property(pair.molecule, ckpt.params, geom_cfg, result.stats));
        }
        table += "test\t" + fmt(mae(preds, test_targets)) + "\n";
    }
    std::cout << table;

    json config = ckpt.config;
    config["property"] = {{"steps", cfg.steps},
                          {"lr", cfg.lr},
                          {"batch_size", cfg.batch_size},
                          {"freeze_encoder", cfg.freeze_encoder},
                          {"target_mean", result.stats.mean},
                          {"target_stdev", result.stats.stdev}};
    const std::string out_ckpt = (fs::path(out_dir) / "property.ckpt").string();
    save_checkpoint(ckpt.params, config, out_ckpt);
    const std::string report_path = (fs::path(out_dir) / "property_report.tsv").string();
    write_text_file(report_path, table);
    write_manifest(out_dir, "finetune-property", config, cfg.seed, {out_ckpt, report_path});
    return 0;
}

// ---- caption-train ------------------------------------------------------------------

int cmd_caption_train(const std::string& ckpt_path, const std::string& pairs_path,
                      std::size_t prefix_len, CaptionTrainConfig cfg,
                      const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const GeomEncoderConfig geom_cfg = geom_config_from_json(ckpt.config.at("geom"));
    const TextEncoderConfig text_cfg = text_config_from_json(ckpt.config.at("text"));
    const Vocab vocab = vocab_from_config(ckpt.config);
    const auto pairs = load_pairs(pairs_path);

    CaptionDecoderConfig cap_cfg;
    cap_cfg.vocab_size = vocab.size();
    cap_cfg.embed_dim = text_cfg.token_embed_dim;
    cap_cfg.num_heads = text_cfg.num_heads;
    cap_cfg.num_layers = text_cfg.num_layers;
    cap_cfg.prefix_len = prefix_len;
    cap_cfg.max_seq_len = text_cfg.max_seq_len;

    init_caption_params(ckpt.params, geom_cfg, cap_cfg, cfg.seed);
    const CaptionTrainResult result =
        train_captions(pairs, vocab, ckpt.params, geom_cfg, cap_cfg, cfg);

    std::string log = "step\tloss\n";
    for (std::size_t i = 0; i < result.loss_by_step.size(); ++i) {
        log += std::to_string(i + 1) + "\t" + fmt(result.loss_by_step[i]) + "\n";
    }
    std::cout << "final caption loss " << fmt(result.loss_by_step.back()) << "\n";

    json config = ckpt.config;
    config["caption"] = to_json(cap_cfg);
    const std::string out_ckpt = (fs::path(out_dir) / "caption.ckpt").string();
    save_checkpoint(ckpt.params, config, out_ckpt);
    const std::string log_path = (fs::path(out_dir) / "caption_loss.tsv").string();
    write_text_file(log_path, log);
    write_manifest(out_dir, "caption-train", config, cfg.seed, {out_ckpt, log_path});
    return 0;
}

// ---- caption-gen ---------------------------------------------------------------------

int cmd_caption_gen(const std::string& ckpt_path, const std::string& pairs_path,
                    std::size_t max_len, const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const GeomEncoderConfig geom_cfg = geom_config_from_json(ckpt.config.at("geom"));
    const CaptionDecoderConfig cap_cfg = caption_config_from_json(ckpt.config.at("caption"));
    const Vocab vocab = vocab_from_config(ckpt.config);
    const auto pairs = load_pairs(pairs_path);

    std::string table = "id\tcaption\n";
    for (const auto& pair : pairs) {
        const auto ids = caption_generate(pair.molecule, ckpt.params, geom_cfg, cap_cfg, max_len);
        const auto words = strip_special(ids, vocab);
        std::string text;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (i) text += ' ';
            text += words[i];
        }
        table += pair.molecule.id + "\t" + text + "\n";
    }
    std::cout << table;
    const std::string out_path = (fs::path(out_dir) / "captions.tsv").string();
    write_text_file(out_path, table);

    json config{{"checkpoint", ckpt_path}, {"pairs", pairs_path}, {"max_len", max_len}};
    write_manifest(out_dir, "caption-gen", config, 0, {out_path});
    return 0;
}

// ---- eval-caption ---------------------------------------------------------------------

int cmd_eval_caption(const std::string& candidates_path, const std::string& pairs_path,
                     const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);
    const auto pairs = load_pairs(pairs_path);
    std::map<std::string, std::string> refs;
    for (const auto& pair : pairs) refs[pair.molecule.id] = pair.text;

    std::vector<std::vector<std::string>> cands, references;
    for (const auto& [id, text] : read_tsv_pairs(candidates_path)) {
        if (id == "id") continue;  // header row
        auto it = refs.find(id);
        if (it == refs.end()) throw std::runtime_error("no reference for id " + id);
        cands.push_back(word_tokenize(text));
        references.push_back(word_tokenize(it->second));
    }
    if (cands.empty()) throw std::runtime_error("no candidates in " + candidates_path);

    const CaptionScores scores = caption_scores(cands, references);
    std::string table = "bleu2\tbleu4\trouge1\trouge2\trougeL\n";
    table += fmt(scores.bleu2) + "\t" + fmt(scores.bleu4) + "\t" + fmt(scores.rouge1) + "\t" +
             fmt(scores.rouge2) + "\t" + fmt(scores.rougeL) + "\n";
    std::cout << table;
    const std::string out_path = (fs::path(out_dir) / "caption_scores.tsv").string();
    write_text_file(out_path, table);

    json config{{"candidates", candidates_path}, {"pairs", pairs_path}};
    write_manifest(out_dir, "eval-caption", config, 0, {out_path});
    return 0;
}

// ---- gradcheck ---------------------------------------------------------------------------

struct TinyCheck {
    std::string name;
    GradCheckReport report;
};

int cmd_gradcheck(double tol, std::uint64_t seed, const std::string& out_dir_raw) {
    const std::string out_dir = ensure_out_dir(out_dir_raw);

    GeomEncoderConfig geom_cfg;
    geom_cfg.atom_embed_dim = 8;
    geom_cfg.num_layers = 1;
    geom_cfg.num_heads = 2;
    geom_cfg.rbf_centers = {0.0, 2.0, 4.0, 6.0};
    geom_cfg.rbf_width = 1.0;
    geom_cfg.proj_dim = 8;
    geom_cfg.max_atoms = 8;

    std::vector<std::string> words = {"[PAD]", "[UNK]", "[CLS]", "[BOS]", "[EOS]",
                                      "acid",  "ring",  "polar", "ether", "amine"};
    const Vocab vocab(words);
    TextEncoderConfig text_cfg;
    text_cfg.vocab_size = vocab.size();
    text_cfg.token_embed_dim = 8;
    text_cfg.num_layers = 1;
    text_cfg.num_heads = 2;
    text_cfg.max_seq_len = 6;
    text_cfg.proj_dim = 8;

    CaptionDecoderConfig cap_cfg;
    cap_cfg.vocab_size = vocab.size();
    cap_cfg.embed_dim = 8;
    cap_cfg.num_layers = 1;
    cap_cfg.num_heads = 2;
    cap_cfg.prefix_len = 2;
    cap_cfg.max_seq_len = 8;

    RngStream rng(derive_seed(seed, "gradcheck"));
    auto random_molecule = [&](std::size_t natoms, const std::string& id) {
        Molecule mol;
        mol.id = id;
        const std::array<int, 5> palette{1, 6, 7, 8, 16};
        for (std::size_t i = 0; i < natoms; ++i) {
            mol.atoms.push_back(palette[rng.uniform_index(palette.size())]);
            for (int k = 0; k < 3; ++k) mol.coords.push_back(rng.uniform(-2.0, 2.0));
        }
        return mol;
    };

    std::vector<Molecule> mols;
    std::vector<std::vector<std::size_t>> texts;
    for (std::size_t i = 0; i < 4; ++i) {
        mols.push_back(random_molecule(3 + i % 3, "gc" + std::to_string(i)));
        std::vector<std::size_t> ids{Vocab::kCls};
        const std::size_t len = 2 + rng.uniform_index(3);
        for (std::size_t t = 0; t < len; ++t) ids.push_back(5 + rng.uniform_index(5));
        texts.push_back(std::move(ids));
    }

    std::vector<TinyCheck> checks;

    {
        ModelParams params;
        init_geom_params(params, geom_cfg, seed);
        init_text_params(params, text_cfg, seed);
        auto loss = [&]() {
            Tensor g, t;
            for (std::size_t i = 0; i < mols.size(); ++i) {
                const Tensor gi = encode_geometry(mols[i], params, geom_cfg);
                const Tensor ti = encode_text(texts[i], params, text_cfg);
                g = (i == 0) ? gi : concat(g, gi, 0);
                t = (i == 0) ? ti : concat(t, ti, 0);
            }
            return contrastive_loss(g, t, 0.1);
        };
        checks.push_back({"contrastive", finite_diff_check(loss, params, 1e-5, tol)});
    }
    {
        ModelParams params;
        init_geom_params(params, geom_cfg, seed);
        init_denoise_params(params, geom_cfg, seed);
        DenoiseConfig den_cfg;
        den_cfg.sigma = 0.5;
        den_cfg.mask_ratio = 0.3;
        const Molecule mol = random_molecule(5, "gc-denoise");
        RngStream corrupt_rng(derive_seed(seed, "gradcheck-corrupt"));
        const CorruptedMolecule corrupted = corrupt(mol, den_cfg, corrupt_rng);
        auto loss = [&]() {
            const DenoisePredictions pred = predict_masked(corrupted, params, geom_cfg);
            return denoising_loss(corrupted, pred.coords, pred.type_logits, den_cfg);
        };
        checks.push_back({"denoising", finite_diff_check(loss, params, 1e-5, tol)});
    }
    {
        ModelParams params;
        init_geom_params(params, geom_cfg, seed);
        init_caption_params(params, geom_cfg, cap_cfg, seed);
        const std::vector<std::size_t> caption{Vocab::kBos, 5, 7, 9, Vocab::kEos};
        auto loss = [&]() {
            return caption_teacher_forced_loss(mols[0], caption, params, geom_cfg, cap_cfg,
                                               /*freeze_encoder=*/false);
        };
        checks.push_back({"caption", finite_diff_check(loss, params, 1e-5, tol)});
    }
    {
        ModelParams params;
        init_geom_params(params, geom_cfg, seed);
        init_property_params(params, geom_cfg, seed);
        const std::vector<double> targets{0.5, -1.2, 2.0, 0.3};
        const PropertyStats stats = fit_property_stats(targets);
        std::vector<const Molecule*> mol_ptrs;
        for (const auto& m : mols) mol_ptrs.push_back(&m);
        auto loss = [&]() {
            return property_batch_loss(mol_ptrs, targets, params, geom_cfg, stats);
        };
        checks.push_back({"property", finite_diff_check(loss, params, 1e-5, tol)});
    }

    std::string table = "loss\tmax_rel_err\tpass\n";
    bool all_pass = true;
    for (const auto& check : checks) {
        table += check.name + "\t" + fmt(check.report.max_rel_err) + "\t" +
                 (check.report.pass ? "yes" : "no") + "\n";
        all_pass = all_pass && check.report.pass;
    }
    std::cout << table;
    const std::string out_path = (fs::path(out_dir) / "gradcheck.tsv").string();
    write_text_file(out_path, table);
    write_manifest(out_dir, "gradcheck", json{{"tol", tol}}, seed, {out_path});
    return all_pass ? 0 : 1;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
    CLI::App app{"geometry-text contrastive pretraining toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file with [subcommand] sections");
    app.allow_config_extras(false);

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "Generate a synthetic geometry-text corpus");
    SyntheticConfig synth_cfg;
    synth_cfg.num_classes = 20;
    synth_cfg.per_class = 50;
    std::size_t synth_holdout = 0;
    std::string synth_out;
    synth->add_option("--classes", synth_cfg.num_classes, "Number of classes");
    synth->add_option("--per-class", synth_cfg.per_class, "Pairs per class");
    synth->add_option("--atoms-min", synth_cfg.atoms_range.first, "Min base atoms");
    synth->add_option("--atoms-max", synth_cfg.atoms_range.second, "Max base atoms");
    synth->add_option("--vocab-per-class", synth_cfg.vocab_per_class, "Class vocabulary size");
    synth->add_option("--jitter", synth_cfg.jitter_sigma, "Coordinate jitter sigma");
    synth->add_option("--seed", synth_cfg.seed, "Random seed");
    synth->add_flag("--no-variants{false}", synth_cfg.distinct_variants,
                    "Disable per-pair variant transforms");
    synth->add_option("--holdout-per-class", synth_holdout, "Held-out pairs per class");
    synth->add_option("--out", synth_out, "Output directory")->envname("GEOMTEXT_OUT");

    // build-data
    auto* build = app.add_subcommand("build-data", "Join XYZ geometries with text annotations");
    std::string build_xyz, build_annotations, build_out;
    std::size_t build_conformers = 1;
    build->add_option("--xyz-dir", build_xyz, "Directory of .xyz files")->required();
    build->add_option("--annotations", build_annotations, "TSV file of id<TAB>text")->required();
    build->add_option("--max-conformers", build_conformers, "Geometries kept per id");
    build->add_option("--out", build_out, "Output directory")->envname("GEOMTEXT_OUT");

    // stats
    auto* stats = app.add_subcommand("stats", "Corpus statistics");
    std::string stats_pairs, stats_out;
    stats->add_option("--pairs", stats_pairs, "Pair corpus file")->required();
    stats->add_option("--out", stats_out, "Output directory")->envname("GEOMTEXT_OUT");

    // build-vocab
    auto* bvocab = app.add_subcommand("build-vocab", "Build the text vocabulary");
    std::string bvocab_pairs, bvocab_out;
    std::size_t bvocab_min_freq = 1;
    bvocab->add_option("--pairs", bvocab_pairs, "Pair corpus file")->required();
    bvocab->add_option("--min-freq", bvocab_min_freq, "Minimum word frequency");
    bvocab->add_option("--out", bvocab_out, "Output directory")->envname("GEOMTEXT_OUT");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "Contrastive + denoising pretraining");
    std::string pre_pairs, pre_vocab, pre_out, pre_alpha_grid, pre_val;
    EncoderOpts pre_enc;
    TrainConfig pre_cfg;
    pre->add_option("--pairs", pre_pairs, "Training pair corpus")->required();
    pre->add_option("--vocab", pre_vocab, "Vocabulary file")->required();
    add_encoder_options(pre, pre_enc);
    pre->add_option("--lr", pre_cfg.lr_max, "Peak learning rate");
    pre->add_option("--warmup", pre_cfg.warmup_steps, "Warmup steps");
    pre->add_option("--steps", pre_cfg.total_steps, "Total optimizer steps")->required();
    pre->add_option("--weight-decay", pre_cfg.weight_decay, "Decoupled weight decay");
    pre->add_option("--accum", pre_cfg.accum_steps, "Gradient accumulation steps");
    pre->add_option("--batch", pre_cfg.batch_size, "Micro-batch size");
    pre->add_option("--alpha", pre_cfg.alpha, "Denoising loss weight");
    pre->add_option("--tau", pre_cfg.tau, "Contrastive temperature");
    pre->add_option("--seed", pre_cfg.seed, "Random seed");
    pre->add_option("--contrastive-block", pre_cfg.contrastive_block,
                    "Contrastive group size (0: whole micro-batch)");
    pre->add_option("--sigma", pre_cfg.denoise.sigma, "Denoising coordinate noise");
    pre->add_option("--mask-ratio", pre_cfg.denoise.mask_ratio, "Masked atom fraction");
    pre->add_option("--type-loss-weight", pre_cfg.denoise.type_loss_weight,
                    "Type cross-entropy weight");
    pre->add_option("--alpha-grid", pre_alpha_grid, "Comma list of alphas to search");
    pre->add_option("--val", pre_val, "Validation pairs for alpha selection");
    pre->add_option("--out", pre_out, "Output directory")->envname("GEOMTEXT_OUT");

    // retrieve
    auto* ret = app.add_subcommand("retrieve", "Zero-shot bidirectional retrieval");
    std::string ret_ckpt, ret_pairs, ret_out;
    std::vector<std::size_t> ret_ks;
    ret->add_option("--checkpoint", ret_ckpt, "Pretrained checkpoint")->required();
    ret->add_option("--pairs", ret_pairs, "Evaluation pairs")->required();
    ret->add_option("--k", ret_ks, "Recall cutoffs");
    ret->add_option("--out", ret_out, "Output directory")->envname("GEOMTEXT_OUT");

    // finetune-property
    auto* prop = app.add_subcommand("finetune-property", "Property prediction fine-tuning");
    std::string prop_ckpt, prop_pairs, prop_targets, prop_test_pairs, prop_test_targets, prop_out;
    PropertyTrainConfig prop_cfg;
    bool prop_train_encoder = false;
    prop->add_option("--checkpoint", prop_ckpt, "Pretrained checkpoint")->required();
    prop->add_option("--pairs", prop_pairs, "Training pairs")->required();
    prop->add_option("--targets", prop_targets, "TSV id<TAB>target")->required();
    prop->add_option("--test-pairs", prop_test_pairs, "Held-out pairs");
    prop->add_option("--test-targets", prop_test_targets, "Held-out targets");
    prop->add_option("--steps", prop_cfg.steps, "Training steps");
    prop->add_option("--lr", prop_cfg.lr, "Learning rate");
    prop->add_option("--batch", prop_cfg.batch_size, "Batch size");
    prop->add_option("--seed", prop_cfg.seed, "Random seed");
    prop->add_flag("--train-encoder", prop_train_encoder, "Also fine-tune the encoder");
    prop->add_option("--out", prop_out, "Output directory")->envname("GEOMTEXT_OUT");

    // caption-train
    auto* capt = app.add_subcommand("caption-train", "Train the caption decoder");
    std::string capt_ckpt, capt_pairs, capt_out;
    CaptionTrainConfig capt_cfg;
    std::size_t capt_prefix = 4;
    bool capt_train_encoder = false;
    capt->add_option("--checkpoint", capt_ckpt, "Pretrained checkpoint")->required();
    capt->add_option("--pairs", capt_pairs, "Caption pairs")->required();
    capt->add_option("--steps", capt_cfg.steps, "Training steps");
    capt->add_option("--lr", capt_cfg.lr, "Learning rate");
    capt->add_option("--warmup", capt_cfg.warmup_steps, "Warmup steps");
    capt->add_option("--prefix-len", capt_prefix, "Prefix token count");
    capt->add_option("--seed", capt_cfg.seed, "Random seed");
    capt->add_flag("--train-encoder", capt_train_encoder,
                   "Also fine-tune the geometric encoder");
    capt->add_option("--out", capt_out, "Output directory")->envname("GEOMTEXT_OUT");

    // caption-gen
    auto* gen = app.add_subcommand("caption-gen", "Greedy caption generation");
    std::string gen_ckpt, gen_pairs, gen_out;
    std::size_t gen_max_len = 32;
    gen->add_option("--checkpoint", gen_ckpt, "Caption checkpoint")->required();
    gen->add_option("--pairs", gen_pairs, "Molecules to caption")->required();
    gen->add_option("--max-len", gen_max_len, "Maximum sequence length");
    gen->add_option("--out", gen_out, "Output directory")->envname("GEOMTEXT_OUT");

    // eval-caption
    auto* evalc = app.add_subcommand("eval-caption", "BLEU/ROUGE caption scoring");
    std::string evalc_cands, evalc_pairs, evalc_out;
    evalc->add_option("--candidates", evalc_cands, "TSV id<TAB>caption")->required();
    evalc->add_option("--pairs", evalc_pairs, "Reference pairs")->required();
    evalc->add_option("--out", evalc_out, "Output directory")->envname("GEOMTEXT_OUT");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the loss stack");
    double gc_tol = 1e-4;
    std::uint64_t gc_seed = 1;
    std::string gc_out;
    gc->add_option("--tol", gc_tol, "Maximum relative error");
    gc->add_option("--seed", gc_seed, "Random seed");
    gc->add_option("--out", gc_out, "Output directory")->envname("GEOMTEXT_OUT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth_data(synth_cfg, synth_holdout, synth_out);
        if (build->parsed()) {
            return cmd_build_data(build_xyz, build_annotations, build_conformers, build_out);
        }
        if (stats->parsed()) return cmd_stats(stats_pairs, stats_out);
        if (bvocab->parsed()) return cmd_build_vocab(bvocab_pairs, bvocab_min_freq, bvocab_out);
        if (pre->parsed()) {
            return cmd_pretrain(pre_pairs, pre_vocab, pre_enc, pre_cfg, pre_alpha_grid, pre_val,
                                pre_out);
        }
        if (ret->parsed()) return cmd_retrieve(ret_ckpt, ret_pairs, ret_ks, ret_out);
        if (prop->parsed()) {
            prop_cfg.freeze_encoder = !prop_train_encoder;
            return cmd_finetune_property(prop_ckpt, prop_pairs, prop_targets, prop_test_pairs,
                                         prop_test_targets, prop_cfg, prop_out);
        }
        if (capt->parsed()) {
            capt_cfg.freeze_encoder = !capt_train_encoder;
            return cmd_caption_train(capt_ckpt, capt_pairs, capt_prefix, capt_cfg, capt_out);
        }
        if (gen->parsed()) return cmd_caption_gen(gen_ckpt, gen_pairs, gen_max_len, gen_out);
        if (evalc->parsed()) return cmd_eval_caption(evalc_cands, evalc_pairs, evalc_out);
        if (gc->parsed()) return cmd_gradcheck(gc_tol, gc_seed, gc_out);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace geomtext
