// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "geomtext/encoders.hpp"
#include "geomtext/molio.hpp"
#include "geomtext/objectives.hpp"
#include "geomtext/params.hpp"
#include "geomtext/tensor.hpp"

namespace geomtext {

// ---- denoise decoder ---------------------------------------------------------

/**
 * Predictions for the masked atoms of a corrupted molecule, one row per mask
 * index in ascending order. Type logits come from a 2-layer MLP over the
 * invariant atom representations. Coordinates are predicted as an
 * attention-weighted affine combination of the noisy input positions, so
 * they move with the input frame: rotating the corrupted instance rotates
 * the predictions identically.
 */
struct DenoisePredictions {
    Tensor coords;       // |mask| x 3
    Tensor type_logits;  // |mask| x kAtomVocabSize
};

void init_denoise_params(ModelParams& params, const GeomEncoderConfig& cfg, std::uint64_t seed);

DenoisePredictions predict_masked(const CorruptedMolecule& corrupted, const ModelParams& params,
                                  const GeomEncoderConfig& cfg);

// ---- property head -------------------------------------------------------------

/// Target normalization fitted on the training split.
struct PropertyStats {
    double mean = 0.0;
    double stdev = 0.0;
    bool fitted = false;
};

PropertyStats fit_property_stats(const std::vector<double>& targets);

void init_property_params(ModelParams& params, const GeomEncoderConfig& cfg, std::uint64_t seed);

/// Head output denormalized back to target units: head(g) * stdev + mean.
double predict_property(const Molecule& mol, const ModelParams& params,
                        const GeomEncoderConfig& cfg, const PropertyStats& stats);

/// Raw (normalized-space) head output for a precomputed 1 x proj_dim
/// embedding.
Tensor property_head_from_embedding(const Tensor& embedding, const ModelParams& params);

/// L1 fine-tuning loss in normalized target space, averaged over the batch.
Tensor property_batch_loss(const std::vector<const Molecule*>& mols,
                           const std::vector<double>& targets, const ModelParams& params,
                           const GeomEncoderConfig& cfg, const PropertyStats& stats);

/// Same loss over a stacked batch of precomputed embeddings (n x proj_dim).
Tensor property_batch_loss_from_embeddings(const Tensor& embeddings,
                                           const std::vector<double>& targets,
                                           const ModelParams& params, const PropertyStats& stats);

// ---- caption decoder -------------------------------------------------------------

/// Causal transformer decoder conditioned on the molecule embedding through
/// prefix tokens: the embedding is mapped to prefix_len pseudo-token vectors
/// prepended to the token sequence.
struct CaptionDecoderConfig {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t prefix_len = 4;
    std::size_t max_seq_len = 32;

    void validate() const;
};

void init_caption_params(ModelParams& params, const GeomEncoderConfig& geom_cfg,
                         const CaptionDecoderConfig& cfg, std::uint64_t seed);

/// Per-position next-token negative log likelihoods for a [BOS] ... [EOS]
/// sequence (one entry per predicted position). With freeze_encoder the
/// geometry embedding is treated as a constant.
Tensor caption_position_nll(const Molecule& mol, const std::vector<std::size_t>& ids,
                            const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                            const CaptionDecoderConfig& cfg, bool freeze_encoder);

/// Same loss starting from a precomputed 1 x proj_dim molecule embedding,
/// for loops that keep the encoder frozen.
Tensor caption_position_nll_from_embedding(const Tensor& embedding,
                                           const std::vector<std::size_t>& ids,
                                           const ModelParams& params,
                                           const CaptionDecoderConfig& cfg);

/// Mean of caption_position_nll: the teacher-forced next-token loss.
Tensor caption_teacher_forced_loss(const Molecule& mol, const std::vector<std::size_t>& ids,
                                   const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                                   const CaptionDecoderConfig& cfg, bool freeze_encoder);

/// Greedy decoding from [BOS]; stops at [EOS] or max_len total tokens.
/// Deterministic; never emits [PAD] or [BOS] after position 0.
std::vector<std::size_t> caption_generate(const Molecule& mol, const ModelParams& params,
                                          const GeomEncoderConfig& geom_cfg,
                                          const CaptionDecoderConfig& cfg, std::size_t max_len);

std::vector<std::size_t> caption_generate_from_embedding(const Tensor& embedding,
                                                         const ModelParams& params,
                                                         const CaptionDecoderConfig& cfg,
                                                         std::size_t max_len);

}  // namespace geomtext
