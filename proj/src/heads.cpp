// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geomtext/vocab.hpp"

namespace geomtext {

// ---- denoise decoder ---------------------------------------------------------

void init_denoise_params(ModelParams& params, const GeomEncoderConfig& cfg, std::uint64_t seed) {
    const std::size_t d = cfg.atom_embed_dim;
    nn::init_linear(params, "den.coord.q", d, d, seed);
    nn::init_linear(params, "den.coord.k", d, d, seed);
    // Near-identity start: each masked atom initially keeps most of the
    // weight on its own noisy position.
    params.add("den.coord.self_bias", Tensor::param({3.0}, {1, 1}));
    nn::init_linear(params, "den.type.h1", d, d, seed);
    nn::init_linear(params, "den.type.h2", d, kAtomVocabSize, seed);
}

DenoisePredictions predict_masked(const CorruptedMolecule& corrupted, const ModelParams& params,
                                  const GeomEncoderConfig& cfg) {
    const std::size_t n = corrupted.input_atoms.size();
    const std::size_t m = corrupted.mask.size();
    if (m == 0) throw std::invalid_argument("predict_masked: empty mask");
    for (std::size_t idx : corrupted.mask) {
        if (idx >= n || corrupted.input_atoms[idx] != kMaskAtomId) {
            throw std::invalid_argument(
                "predict_masked: mask index " + std::to_string(idx) +
                " does not point at a mask-atom slot");
        }
    }

    const Tensor trunk =
        encode_geometry_atoms(corrupted.input_atoms, corrupted.noisy_coords, params, cfg);
    const Tensor masked = gather_rows(trunk, corrupted.mask);

    DenoisePredictions out;
    out.type_logits =
        nn::linear(gelu(nn::linear(masked, params, "den.type.h1")), params, "den.type.h2");

    // Equivariant coordinate head: each masked atom's position is a
    // softmax-weighted affine combination of all noisy positions, with a
    // learned bias toward its own slot.
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.atom_embed_dim));
    const Tensor q = nn::linear(masked, params, "den.coord.q");
    const Tensor k = nn::linear(trunk, params, "den.coord.k");
    Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt);

    std::vector<double> self_slots(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) self_slots[i * n + corrupted.mask[i]] = 1.0;
    const Tensor self_indicator = Tensor::from(std::move(self_slots), {m * n, 1});
    logits = add(logits,
                 reshape(matmul(self_indicator, params.at("den.coord.self_bias")), {m, n}));

    const Tensor weights = softmax(logits);
    const Tensor positions = Tensor::from(corrupted.noisy_coords, {n, 3});
    out.coords = matmul(weights, positions);
    return out;
}

// ---- property head -------------------------------------------------------------

PropertyStats fit_property_stats(const std::vector<double>& targets) {
    if (targets.empty()) throw std::invalid_argument("fit_property_stats: no targets");
    PropertyStats stats;
    for (double y : targets) stats.mean += y;
    stats.mean /= static_cast<double>(targets.size());
    double var = 0.0;
    for (double y : targets) var += (y - stats.mean) * (y - stats.mean);
    stats.stdev = std::sqrt(var / static_cast<double>(targets.size()));
    if (!(stats.stdev > 0.0)) {
        throw std::invalid_argument("fit_property_stats: targets have zero variance");
    }
    stats.fitted = true;
    return stats;
}

void init_property_params(ModelParams& params, const GeomEncoderConfig& cfg, std::uint64_t seed) {
    nn::init_linear(params, "prop.h1", cfg.proj_dim, cfg.atom_embed_dim, seed);
    nn::init_linear(params, "prop.h2", cfg.atom_embed_dim, 1, seed);
}

Tensor property_head_from_embedding(const Tensor& embedding, const ModelParams& params) {
    return nn::linear(gelu(nn::linear(embedding, params, "prop.h1")), params, "prop.h2");
}

namespace {

Tensor property_head_output(const Molecule& mol, const ModelParams& params,
                            const GeomEncoderConfig& cfg) {
    return property_head_from_embedding(encode_geometry(mol, params, cfg), params);
}

}  // namespace

double predict_property(const Molecule& mol, const ModelParams& params,
                        const GeomEncoderConfig& cfg, const PropertyStats& stats) {
    if (!stats.fitted) throw std::invalid_argument("predict_property: unfitted target stats");
    NoGradGuard guard;
    return property_head_output(mol, params, cfg).value() * stats.stdev + stats.mean;
}

Tensor property_batch_loss(const std::vector<const Molecule*>& mols,
                           const std::vector<double>& targets, const ModelParams& params,
                           const GeomEncoderConfig& cfg, const PropertyStats& stats) {
    if (!stats.fitted) throw std::invalid_argument("property_batch_loss: unfitted target stats");
    if (mols.empty() || mols.size() != targets.size()) {
        throw std::invalid_argument("property_batch_loss: batch and target sizes differ");
    }
    Tensor preds;
    std::vector<double> normalized(targets.size());
    for (std::size_t i = 0; i < mols.size(); ++i) {
        const Tensor y = property_head_output(*mols[i], params, cfg);
        preds = (i == 0) ? y : concat(preds, y, 0);
        normalized[i] = (targets[i] - stats.mean) / stats.stdev;
    }
    const Tensor residual = sub(preds, Tensor::from(std::move(normalized), {targets.size(), 1}));
    return mean_all(abs(residual));
}

Tensor property_batch_loss_from_embeddings(const Tensor& embeddings,
                                           const std::vector<double>& targets,
                                           const ModelParams& params, const PropertyStats& stats) {
    if (!stats.fitted) {
        throw std::invalid_argument("property_batch_loss: unfitted target stats");
    }
    if (embeddings.rank() != 2 || embeddings.shape()[0] != targets.size() || targets.empty()) {
        throw std::invalid_argument("property_batch_loss: batch and target sizes differ");
    }
    std::vector<double> normalized(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        normalized[i] = (targets[i] - stats.mean) / stats.stdev;
    }
    const Tensor preds = property_head_from_embedding(embeddings, params);
    const Tensor residual = sub(preds, Tensor::from(std::move(normalized), {targets.size(), 1}));
    return mean_all(abs(residual));
}

// ---- caption decoder -------------------------------------------------------------

void CaptionDecoderConfig::validate() const {
    if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0) {
        throw std::invalid_argument("caption config: embed_dim must be divisible by num_heads");
    }
    if (num_layers == 0) throw std::invalid_argument("caption config: need at least one layer");
    if (prefix_len == 0) throw std::invalid_argument("caption config: prefix_len must be >= 1");
    if (max_seq_len < 2) throw std::invalid_argument("caption config: max_seq_len must be >= 2");
    if (vocab_size < Vocab::kNumReserved) {
        throw std::invalid_argument("caption config: vocab_size smaller than reserved tokens");
    }
}

void init_caption_params(ModelParams& params, const GeomEncoderConfig& geom_cfg,
                         const CaptionDecoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim;
    const std::size_t prefix_out = cfg.prefix_len * d;
    nn::init_linear(params, "cap.prefix.h1", geom_cfg.proj_dim, prefix_out, seed);
    nn::init_linear(params, "cap.prefix.h2", prefix_out, prefix_out, seed);
    params.add("cap.tok_emb", init_uniform_param({cfg.vocab_size, d}, d, seed, "cap.tok_emb"));
    params.add("cap.pos_emb", init_uniform_param({cfg.prefix_len + cfg.max_seq_len, d}, d, seed,
                                                 "cap.pos_emb"));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        nn::init_transformer_layer(params, "cap.l" + std::to_string(l), d, seed);
    }
    nn::init_layer_norm(params, "cap.final_ln", d);
    nn::init_linear(params, "cap.out", d, cfg.vocab_size, seed);
}

namespace {

Tensor caption_prefix(const Tensor& embedding, const ModelParams& params,
                      const CaptionDecoderConfig& cfg) {
    const Tensor mapped = nn::linear(gelu(nn::linear(embedding, params, "cap.prefix.h1")), params,
                                     "cap.prefix.h2");
    return reshape(mapped, {cfg.prefix_len, cfg.embed_dim});
}

Tensor molecule_embedding(const Molecule& mol, const ModelParams& params,
                          const GeomEncoderConfig& geom_cfg, bool freeze_encoder) {
    if (freeze_encoder) {
        NoGradGuard guard;
        return encode_geometry(mol, params, geom_cfg);
    }
    return encode_geometry(mol, params, geom_cfg);
}

Tensor causal_mask(std::size_t len) {
    std::vector<double> mask(len * len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t j = i + 1; j < len; ++j) mask[i * len + j] = -1e9;
    }
    return Tensor::from(std::move(mask), {len, len});
}

// Decoder trunk over prefix + token embeddings; returns (prefix+L) x d rows.
Tensor caption_trunk(const Tensor& prefix, const std::vector<std::size_t>& token_ids,
                     const ModelParams& params, const CaptionDecoderConfig& cfg) {
    for (std::size_t id : token_ids) {
        if (id >= cfg.vocab_size) {
            throw std::invalid_argument("caption: token id " + std::to_string(id) +
                                        " outside vocabulary");
        }
    }
    const std::size_t total = cfg.prefix_len + token_ids.size();
    Tensor x = concat(prefix, gather_rows(params.at("cap.tok_emb"), token_ids), 0);
    x = add(x, slice(params.at("cap.pos_emb"), 0, 0, total));
    const std::vector<Tensor> bias{causal_mask(total)};
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        x = nn::transformer_layer(x, bias, params, "cap.l" + std::to_string(l), cfg.num_heads);
    }
    return nn::layer_norm_affine(x, params, "cap.final_ln");
}

}  // namespace

Tensor caption_position_nll_from_embedding(const Tensor& embedding,
                                           const std::vector<std::size_t>& ids,
                                           const ModelParams& params,
                                           const CaptionDecoderConfig& cfg) {
    cfg.validate();
    if (ids.size() < 2 || ids.front() != Vocab::kBos || ids.back() != Vocab::kEos) {
        throw std::invalid_argument("caption: sequence must be [BOS] ... [EOS]");
    }
    if (ids.size() > cfg.max_seq_len) {
        throw std::invalid_argument("caption: sequence of " + std::to_string(ids.size()) +
                                    " tokens exceeds max_seq_len " +
                                    std::to_string(cfg.max_seq_len));
    }

    const std::vector<std::size_t> inputs(ids.begin(), ids.end() - 1);
    const std::vector<std::size_t> targets(ids.begin() + 1, ids.end());

    const Tensor prefix = caption_prefix(embedding, params, cfg);
    const Tensor trunk = caption_trunk(prefix, inputs, params, cfg);
    const Tensor outputs = slice(trunk, 0, cfg.prefix_len, inputs.size());
    const Tensor logits = nn::linear(outputs, params, "cap.out");
    return nll_rows(log_softmax(logits), targets);
}

Tensor caption_position_nll(const Molecule& mol, const std::vector<std::size_t>& ids,
                            const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                            const CaptionDecoderConfig& cfg, bool freeze_encoder) {
    const Tensor g = molecule_embedding(mol, params, geom_cfg, freeze_encoder);
    return caption_position_nll_from_embedding(g, ids, params, cfg);
}

Tensor caption_teacher_forced_loss(const Molecule& mol, const std::vector<std::size_t>& ids,
                                   const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                                   const CaptionDecoderConfig& cfg, bool freeze_encoder) {
    return mean_all(caption_position_nll(mol, ids, params, geom_cfg, cfg, freeze_encoder));
}

std::vector<std::size_t> caption_generate(const Molecule& mol, const ModelParams& params,
                                          const GeomEncoderConfig& geom_cfg,
                                          const CaptionDecoderConfig& cfg, std::size_t max_len) {
    NoGradGuard guard;
    return caption_generate_from_embedding(encode_geometry(mol, params, geom_cfg), params, cfg,
                                           max_len);
}

std::vector<std::size_t> caption_generate_from_embedding(const Tensor& embedding,
                                                         const ModelParams& params,
                                                         const CaptionDecoderConfig& cfg,
                                                         std::size_t max_len) {
    cfg.validate();
    if (max_len < 2) throw std::invalid_argument("caption_generate: max_len must be >= 2");
    NoGradGuard guard;

    const Tensor prefix = caption_prefix(embedding, params, cfg);
    const std::size_t limit = std::min(max_len, cfg.max_seq_len);
    std::vector<std::size_t> seq{Vocab::kBos};
    while (seq.size() < limit) {
        const Tensor trunk = caption_trunk(prefix, seq, params, cfg);
        const Tensor last = slice(trunk, 0, cfg.prefix_len + seq.size() - 1, 1);
        const Tensor logits = nn::linear(last, params, "cap.out");
        std::size_t best = Vocab::kEos;
        double best_score = -1e300;
        for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
            if (v == Vocab::kPad || v == Vocab::kBos) continue;
            const double s = logits.at(0, v);
            if (s > best_score) {
                best_score = s;
                best = v;
            }
        }
        seq.push_back(best);
        if (best == Vocab::kEos) break;
    }
    return seq;
}

}  // namespace geomtext
