// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "geomtext/rng.hpp"

namespace geomtext {

void TrainConfig::validate() const {
    if (!(lr_max > 0.0)) throw std::invalid_argument("train config: lr_max must be positive");
    if (total_steps == 0) throw std::invalid_argument("train config: total_steps is required");
    if (warmup_steps >= total_steps) {
        throw std::invalid_argument("train config: warmup_steps must be < total_steps");
    }
    if (!(weight_decay >= 0.0)) {
        throw std::invalid_argument("train config: weight_decay must be >= 0");
    }
    if (accum_steps == 0) throw std::invalid_argument("train config: accum_steps must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(alpha >= 0.0)) throw std::invalid_argument("train config: alpha must be >= 0");
    if (!(tau > 0.0)) throw std::invalid_argument("train config: tau must be positive");
    denoise.validate();
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
    if (step > cfg.total_steps) {
        throw std::invalid_argument("lr_at: step " + std::to_string(step) + " outside [0, " +
                                    std::to_string(cfg.total_steps) + "]");
    }
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
        return cfg.lr_max * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    }
    return cfg.lr_max * static_cast<double>(cfg.total_steps - step) /
           static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

bool weight_decay_applies(const std::string& name) {
    const auto pos = name.rfind('.');
    const std::string last = (pos == std::string::npos) ? name : name.substr(pos + 1);
    return last == "w";
}

void adam_step(ModelParams& params, const std::vector<std::string>& trained, AdamState& state,
               double lr, double weight_decay, double grad_scale) {
    if (!(lr >= 0.0)) throw std::invalid_argument("adam_step: lr must be >= 0");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    std::vector<std::string> order = trained;
    std::sort(order.begin(), order.end());
    for (const auto& name : order) {
        Tensor& p = params.at(name);
        const std::size_t n = p.numel();
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(n, 0.0);
        if (v.empty()) v.assign(n, 0.0);

        const std::vector<double>* grad = p.has_grad() ? &p.grad() : nullptr;
        const bool decay = weight_decay > 0.0 && weight_decay_applies(name);
        std::vector<double>& values = p.mutable_data();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = (grad ? (*grad)[i] : 0.0) * grad_scale;
            if (!std::isfinite(g)) {
                throw NumericError("adam_step: non-finite gradient in " + name + "[" +
                                   std::to_string(i) + "]");
            }
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            double update = m_hat / (std::sqrt(v_hat) + state.epsilon);
            if (decay) update += weight_decay * values[i];
            values[i] -= lr * update;
        }
    }
}

void train_step(ModelParams& params, const std::vector<std::string>& trained, AdamState& state,
                const Tensor& loss, double lr, double weight_decay) {
    backward(loss);
    adam_step(params, trained, state, lr, weight_decay);
    params.zero_grads();
}

// ---- pretraining ------------------------------------------------------------

namespace {

std::vector<std::string> names_with_prefixes(const ModelParams& params,
                                             const std::vector<std::string>& prefixes) {
    std::vector<std::string> out;
    for (const auto& [name, t] : params) {
        for (const auto& p : prefixes) {
            if (name.rfind(p, 0) == 0) {
                out.push_back(name);
                break;
            }
        }
    }
    return out;
}

// Deterministic epoch-shuffled record stream.
class RecordStream {
public:
    RecordStream(std::size_t corpus_size, std::uint64_t seed)
        : n_(corpus_size), seed_(seed) {}

    std::pair<std::size_t, std::size_t> next() {  // (record index, epoch)
        if (cursor_ % n_ == 0) reshuffle(cursor_ / n_);
        const std::size_t epoch = cursor_ / n_;
        const std::size_t idx = perm_[cursor_ % n_];
        ++cursor_;
        return {idx, epoch};
    }

private:
    void reshuffle(std::size_t epoch) {
        perm_.resize(n_);
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        RngStream rng(derive_seed(seed_, "shuffle", epoch));
        rng.shuffle(perm_);
    }

    std::size_t n_;
    std::uint64_t seed_;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> perm_;
};

struct MicroLosses {
    Tensor total;
    double l_con = 0.0;
    double l_den = 0.0;
};

MicroLosses micro_batch_loss(const std::vector<GeomTextPair>& corpus,
                             const std::vector<std::vector<std::size_t>>& tokenized,
                             const std::vector<std::pair<std::size_t, std::size_t>>& micro,
                             ModelParams& params, const GeomEncoderConfig& geom_cfg,
                             const TextEncoderConfig& text_cfg, const TrainConfig& cfg) {
    const std::size_t batch = micro.size();

    Tensor geom_embeds, text_embeds;
    for (std::size_t i = 0; i < batch; ++i) {
        const auto& [r, epoch] = micro[i];
        const Tensor g = encode_geometry(corpus[r].molecule, params, geom_cfg);
        const Tensor t = encode_text(tokenized[r], params, text_cfg);
        geom_embeds = (i == 0) ? g : concat(geom_embeds, g, 0);
        text_embeds = (i == 0) ? t : concat(text_embeds, t, 0);
    }

    const std::size_t block =
        cfg.contrastive_block == 0 ? batch : std::min(cfg.contrastive_block, batch);
    Tensor con_sum;
    std::size_t num_blocks = 0;
    for (std::size_t start = 0; start < batch; start += block) {
        const std::size_t len = std::min(block, batch - start);
        const Tensor l = contrastive_loss(slice(geom_embeds, 0, start, len),
                                          slice(text_embeds, 0, start, len), cfg.tau);
        con_sum = (num_blocks == 0) ? l : add(con_sum, l);
        ++num_blocks;
    }
    const Tensor l_con =
        (num_blocks > 1) ? scale(con_sum, 1.0 / static_cast<double>(num_blocks)) : con_sum;

    auto denoise_term = [&]() {
        Tensor den_sum;
        for (std::size_t i = 0; i < batch; ++i) {
            const auto& [r, epoch] = micro[i];
            RngStream rng(
                derive_seed(cfg.seed, "corrupt", fnv1a64(corpus[r].molecule.id), epoch));
            const CorruptedMolecule corrupted =
                corrupt(corpus[r].molecule, cfg.denoise, rng);
            const DenoisePredictions pred = predict_masked(corrupted, params, geom_cfg);
            const Tensor l =
                denoising_loss(corrupted, pred.coords, pred.type_logits, cfg.denoise);
            den_sum = (i == 0) ? l : add(den_sum, l);
        }
        return scale(den_sum, 1.0 / static_cast<double>(batch));
    };

    Tensor l_den;
    if (cfg.alpha > 0.0) {
        l_den = denoise_term();
    } else {
        NoGradGuard guard;  // logged but excluded from gradients
        l_den = denoise_term();
    }

    MicroLosses out;
    out.total = total_loss(l_con, l_den, cfg.alpha);
    out.l_con = l_con.value();
    out.l_den = l_den.value();
    return out;
}

}  // namespace

ModelParams build_pretrain_params(const GeomEncoderConfig& geom_cfg,
                                  const TextEncoderConfig& text_cfg, std::uint64_t seed) {
    ModelParams params;
    init_geom_params(params, geom_cfg, seed);
    init_text_params(params, text_cfg, seed);
    init_denoise_params(params, geom_cfg, seed);
    return params;
}

PretrainResult pretrain(const std::vector<GeomTextPair>& corpus, const Vocab& vocab,
                        ModelParams& params, const GeomEncoderConfig& geom_cfg,
                        const TextEncoderConfig& text_cfg, const TrainConfig& cfg) {
    cfg.validate();
    geom_cfg.validate();
    text_cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");

    std::vector<std::vector<std::size_t>> tokenized(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        tokenized[i] = tokenize(corpus[i].text, vocab, text_cfg.max_seq_len);
    }

    std::vector<std::string> prefixes = {"geom.", "text."};
    if (cfg.alpha > 0.0) prefixes.push_back("den.");
    const std::vector<std::string> trained = names_with_prefixes(params, prefixes);

    AdamState state;
    RecordStream stream(corpus.size(), cfg.seed);
    PretrainResult result;
    result.log.reserve(cfg.total_steps);
    params.zero_grads();

    for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
        double l_con_acc = 0.0, l_den_acc = 0.0, total_acc = 0.0;
        for (std::size_t a = 0; a < cfg.accum_steps; ++a) {
            std::vector<std::pair<std::size_t, std::size_t>> micro(cfg.batch_size);
            for (auto& slot : micro) slot = stream.next();

            const MicroLosses losses =
                micro_batch_loss(corpus, tokenized, micro, params, geom_cfg, text_cfg, cfg);
            const double total_value = losses.total.value();
            if (!std::isfinite(total_value)) {
                std::ostringstream ids;
                for (const auto& [r, epoch] : micro) ids << ' ' << corpus[r].molecule.id;
                throw NumericError("pretrain: non-finite loss at step " + std::to_string(step) +
                                   ", batch ids:" + ids.str());
            }
            backward(losses.total);
            l_con_acc += losses.l_con;
            l_den_acc += losses.l_den;
            total_acc += total_value;
        }

        const double lr = lr_at(step, cfg);
        const double inv_accum = 1.0 / static_cast<double>(cfg.accum_steps);
        adam_step(params, trained, state, lr, cfg.weight_decay, inv_accum);
        params.zero_grads();

        result.log.push_back({step, lr, l_con_acc * inv_accum, l_den_acc * inv_accum,
                              total_acc * inv_accum});
    }
    return result;
}

std::string format_loss_log(const std::vector<LossRow>& log) {
    std::string out = "step\tlr\tl_con\tl_denoising\ttotal\n";
    char buf[256];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\t%.17g\n", row.step, row.lr,
                      row.l_con, row.l_den, row.total);
        out += buf;
    }
    return out;
}

// ---- evaluation helpers -------------------------------------------------------

DenoiseEval evaluate_denoising(const std::vector<GeomTextPair>& pairs, const ModelParams& params,
                               const GeomEncoderConfig& geom_cfg, const DenoiseConfig& cfg,
                               std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("evaluate_denoising: empty pair list");
    NoGradGuard guard;
    DenoiseEval eval;
    for (const auto& pair : pairs) {
        RngStream rng(derive_seed(seed, "corrupt-eval", fnv1a64(pair.molecule.id)));
        const CorruptedMolecule corrupted = corrupt(pair.molecule, cfg, rng);
        const DenoisePredictions pred = predict_masked(corrupted, params, geom_cfg);

        const std::size_t m = corrupted.mask.size();
        const Tensor targets = Tensor::from(corrupted.target_coords, {m, 3});
        const double coord =
            squared_l2(sub(pred.coords, targets)).value() / static_cast<double>(m);
        std::vector<std::size_t> types(m);
        for (std::size_t i = 0; i < m; ++i) {
            types[i] = static_cast<std::size_t>(corrupted.target_types[i]);
        }
        const double type = mean_all(nll_rows(log_softmax(pred.type_logits), types)).value();
        eval.coord += coord;
        eval.type += type;
        eval.total += coord + cfg.type_loss_weight * type;
    }
    const double n = static_cast<double>(pairs.size());
    eval.coord /= n;
    eval.type /= n;
    eval.total /= n;
    return eval;
}

CorpusEmbeddings encode_corpus(const std::vector<GeomTextPair>& pairs, const Vocab& vocab,
                               const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                               const TextEncoderConfig& text_cfg) {
    NoGradGuard guard;
    CorpusEmbeddings out;
    out.geom.reserve(pairs.size());
    out.text.reserve(pairs.size());
    for (const auto& pair : pairs) {
        out.geom.push_back(encode_geometry(pair.molecule, params, geom_cfg).data());
        out.text.push_back(
            encode_text(tokenize(pair.text, vocab, text_cfg.max_seq_len), params, text_cfg)
                .data());
    }
    return out;
}

// ---- task fine-tuning ------------------------------------------------------------

CaptionTrainResult train_captions(const std::vector<GeomTextPair>& pairs, const Vocab& vocab,
                                  ModelParams& params, const GeomEncoderConfig& geom_cfg,
                                  const CaptionDecoderConfig& cap_cfg,
                                  const CaptionTrainConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("train_captions: empty pair list");
    cap_cfg.validate();
    if (cfg.steps == 0) throw std::invalid_argument("train_captions: steps must be >= 1");

    std::vector<std::vector<std::size_t>> captions(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        captions[i] = tokenize_caption(pairs[i].text, vocab, cap_cfg.max_seq_len);
    }

    std::vector<std::string> prefixes = {"cap."};
    if (!cfg.freeze_encoder) prefixes.push_back("geom.");
    const std::vector<std::string> trained = names_with_prefixes(params, prefixes);

    // With a frozen encoder the molecule embeddings never change; compute
    // them once.
    std::vector<Tensor> frozen_embeds;
    if (cfg.freeze_encoder) {
        NoGradGuard guard;
        frozen_embeds.reserve(pairs.size());
        for (const auto& pair : pairs) {
            frozen_embeds.push_back(encode_geometry(pair.molecule, params, geom_cfg));
        }
    }

    AdamState state;
    CaptionTrainResult result;
    result.loss_by_step.reserve(cfg.steps);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        Tensor loss_sum;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const Tensor l =
                cfg.freeze_encoder
                    ? mean_all(caption_position_nll_from_embedding(frozen_embeds[i], captions[i],
                                                                   params, cap_cfg))
                    : caption_teacher_forced_loss(pairs[i].molecule, captions[i], params,
                                                  geom_cfg, cap_cfg, false);
            loss_sum = (i == 0) ? l : add(loss_sum, l);
        }
        const Tensor loss = scale(loss_sum, 1.0 / static_cast<double>(pairs.size()));
        if (!std::isfinite(loss.value())) {
            throw NumericError("train_captions: non-finite loss at step " + std::to_string(step));
        }
        const double lr = (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
                              ? cfg.lr * static_cast<double>(step) /
                                    static_cast<double>(cfg.warmup_steps)
                              : cfg.lr;
        train_step(params, trained, state, loss, lr, cfg.weight_decay);
        result.loss_by_step.push_back(loss.value());
    }
    return result;
}

PropertyTrainResult finetune_property(const std::vector<GeomTextPair>& pairs,
                                      const std::vector<double>& targets, ModelParams& params,
                                      const GeomEncoderConfig& geom_cfg,
                                      const PropertyTrainConfig& cfg) {
    if (pairs.empty() || pairs.size() != targets.size()) {
        throw std::invalid_argument("finetune_property: pair and target counts differ");
    }
    if (cfg.steps == 0) throw std::invalid_argument("finetune_property: steps must be >= 1");

    PropertyTrainResult result;
    result.stats = fit_property_stats(targets);

    std::vector<std::string> prefixes = {"prop."};
    if (!cfg.freeze_encoder) prefixes.push_back("geom.");
    const std::vector<std::string> trained = names_with_prefixes(params, prefixes);

    std::vector<Tensor> frozen_embeds;
    if (cfg.freeze_encoder) {
        NoGradGuard guard;
        frozen_embeds.reserve(pairs.size());
        for (const auto& pair : pairs) {
            frozen_embeds.push_back(encode_geometry(pair.molecule, params, geom_cfg));
        }
    }

    AdamState state;
    RecordStream stream(pairs.size(), cfg.seed);
    const std::size_t batch = std::min(cfg.batch_size, pairs.size());
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        std::vector<const Molecule*> mols(batch);
        std::vector<double> ys(batch);
        Tensor embeds;
        for (std::size_t i = 0; i < batch; ++i) {
            const auto [r, epoch] = stream.next();
            mols[i] = &pairs[r].molecule;
            ys[i] = targets[r];
            if (cfg.freeze_encoder) {
                embeds = (i == 0) ? frozen_embeds[r] : concat(embeds, frozen_embeds[r], 0);
            }
        }
        const Tensor loss =
            cfg.freeze_encoder
                ? property_batch_loss_from_embeddings(embeds, ys, params, result.stats)
                : property_batch_loss(mols, ys, params, geom_cfg, result.stats);
        if (!std::isfinite(loss.value())) {
            throw NumericError("finetune_property: non-finite loss at step " +
                               std::to_string(step));
        }
        const double lr = (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
                              ? cfg.lr * static_cast<double>(step) /
                                    static_cast<double>(cfg.warmup_steps)
                              : cfg.lr;
        train_step(params, trained, state, loss, lr, cfg.weight_decay);
        result.loss_by_step.push_back(loss.value());
    }

    double mae = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        mae += std::fabs(predict_property(pairs[i].molecule, params, geom_cfg, result.stats) -
                         targets[i]);
    }
    result.train_mae = mae / static_cast<double>(pairs.size());
    return result;
}

// ---- checkpoints -------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[9] = "GTCKPT01";

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t read_u64_le(const std::string& bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    }
    return v;
}

std::string shape_text(const Shape& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

struct ParsedCheckpoint {
    nlohmann::json config;
    nlohmann::json tensors;
    std::string payload;
};

ParsedCheckpoint parse_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || bytes.compare(0, 8, kCheckpointMagic) != 0) {
        throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
    }
    const std::uint64_t manifest_len = read_u64_le(bytes, 8);
    if (16 + manifest_len > bytes.size()) {
        throw std::runtime_error("checkpoint: truncated manifest in " + path);
    }
    ParsedCheckpoint parsed;
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(16, manifest_len));
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint: bad manifest in " + path + ": " + e.what());
    }
    if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
        throw std::runtime_error("checkpoint: manifest missing tensor list");
    }
    parsed.config = manifest.value("config", nlohmann::json::object());
    parsed.tensors = manifest["tensors"];
    parsed.payload = bytes.substr(16 + manifest_len);
    return parsed;
}

std::vector<double> read_entry_values(const ParsedCheckpoint& parsed, const std::string& name,
                                      const Shape& shape, std::uint64_t offset) {
    std::size_t numel = 1;
    for (std::size_t d : shape) numel *= d;
    if (offset + 4 * numel > parsed.payload.size()) {
        throw std::runtime_error("checkpoint: entry \"" + name +
                                 "\": payload truncated (needs " + std::to_string(4 * numel) +
                                 " bytes at offset " + std::to_string(offset) + ")");
    }
    std::vector<double> values(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(
                        parsed.payload[offset + 4 * i + b]))
                    << (8 * b);
        }
        float f;
        std::memcpy(&f, &bits, 4);
        values[i] = static_cast<double>(f);
    }
    return values;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const nlohmann::json& config,
                     const std::string& path) {
    nlohmann::json tensors = nlohmann::json::array();
    std::string payload;
    for (const auto& [name, t] : params) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["dtype"] = "f32";
        entry["offset"] = payload.size();
        tensors.push_back(entry);
        for (double v : t.data()) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            for (int b = 0; b < 4; ++b) {
                payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
            }
        }
    }
    nlohmann::json manifest;
    manifest["config"] = config;
    manifest["tensors"] = std::move(tensors);
    const std::string manifest_str = manifest.dump();

    std::string bytes(kCheckpointMagic, 8);
    append_u64_le(bytes, manifest_str.size());
    bytes += manifest_str;
    bytes += payload;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    const ParsedCheckpoint parsed = parse_checkpoint(path);
    Checkpoint ck;
    ck.config = parsed.config;
    for (const auto& entry : parsed.tensors) {
        const std::string name = entry.at("name").get<std::string>();
        const Shape shape = entry.at("shape").get<Shape>();
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        ck.params.add(name, Tensor::param(read_entry_values(parsed, name, shape, offset), shape));
    }
    return ck;
}

void load_checkpoint_into(const std::string& path, ModelParams& params) {
    const ParsedCheckpoint parsed = parse_checkpoint(path);
    std::size_t loaded = 0;
    for (const auto& entry : parsed.tensors) {
        const std::string name = entry.at("name").get<std::string>();
        const Shape shape = entry.at("shape").get<Shape>();
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        if (!params.contains(name)) {
            throw std::runtime_error("checkpoint: entry \"" + name +
                                     "\" not present in the target model");
        }
        Tensor& p = params.at(name);
        if (p.shape() != shape) {
            throw std::runtime_error(name + ": expected " + shape_text(p.shape()) + ", found " +
                                     shape_text(shape));
        }
        p.mutable_data() = read_entry_values(parsed, name, shape, offset);
        ++loaded;
    }
    if (loaded != params.size()) {
        throw std::runtime_error("checkpoint: stores " + std::to_string(loaded) +
                                 " tensors but the model has " + std::to_string(params.size()));
    }
}

// ---- config (de)serialization ---------------------------------------------------------

nlohmann::json to_json(const GeomEncoderConfig& cfg) {
    return {{"atom_embed_dim", cfg.atom_embed_dim}, {"num_layers", cfg.num_layers},
            {"num_heads", cfg.num_heads},           {"rbf_centers", cfg.rbf_centers},
            {"rbf_width", cfg.rbf_width},           {"proj_dim", cfg.proj_dim},
            {"max_atoms", cfg.max_atoms}};
}

nlohmann::json to_json(const TextEncoderConfig& cfg) {
    return {{"vocab_size", cfg.vocab_size}, {"token_embed_dim", cfg.token_embed_dim},
            {"num_layers", cfg.num_layers}, {"num_heads", cfg.num_heads},
            {"max_seq_len", cfg.max_seq_len}, {"proj_dim", cfg.proj_dim}};
}

nlohmann::json to_json(const CaptionDecoderConfig& cfg) {
    return {{"vocab_size", cfg.vocab_size}, {"embed_dim", cfg.embed_dim},
            {"num_layers", cfg.num_layers}, {"num_heads", cfg.num_heads},
            {"prefix_len", cfg.prefix_len}, {"max_seq_len", cfg.max_seq_len}};
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"lr_max", cfg.lr_max},
            {"warmup_steps", cfg.warmup_steps},
            {"total_steps", cfg.total_steps},
            {"weight_decay", cfg.weight_decay},
            {"accum_steps", cfg.accum_steps},
            {"batch_size", cfg.batch_size},
            {"alpha", cfg.alpha},
            {"tau", cfg.tau},
            {"seed", cfg.seed},
            {"contrastive_block", cfg.contrastive_block},
            {"sigma", cfg.denoise.sigma},
            {"mask_ratio", cfg.denoise.mask_ratio},
            {"type_loss_weight", cfg.denoise.type_loss_weight}};
}

GeomEncoderConfig geom_config_from_json(const nlohmann::json& j) {
    GeomEncoderConfig cfg;
    cfg.atom_embed_dim = j.at("atom_embed_dim").get<std::size_t>();
    cfg.num_layers = j.at("num_layers").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.rbf_centers = j.at("rbf_centers").get<std::vector<double>>();
    cfg.rbf_width = j.at("rbf_width").get<double>();
    cfg.proj_dim = j.at("proj_dim").get<std::size_t>();
    cfg.max_atoms = j.at("max_atoms").get<std::size_t>();
    cfg.validate();
    return cfg;
}

TextEncoderConfig text_config_from_json(const nlohmann::json& j) {
    TextEncoderConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.token_embed_dim = j.at("token_embed_dim").get<std::size_t>();
    cfg.num_layers = j.at("num_layers").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    cfg.proj_dim = j.at("proj_dim").get<std::size_t>();
    cfg.validate();
    return cfg;
}

CaptionDecoderConfig caption_config_from_json(const nlohmann::json& j) {
    CaptionDecoderConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.num_layers = j.at("num_layers").get<std::size_t>();
    cfg.num_heads = j.at("num_heads").get<std::size_t>();
    cfg.prefix_len = j.at("prefix_len").get<std::size_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    cfg.validate();
    return cfg;
}

}  // namespace geomtext
