// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geomtext/encoders.hpp"
#include "geomtext/heads.hpp"
#include "geomtext/molio.hpp"
#include "geomtext/objectives.hpp"
#include "geomtext/params.hpp"
#include "geomtext/vocab.hpp"

namespace geomtext {

struct TrainConfig {
    double lr_max = 1e-4;
    std::size_t warmup_steps = 1000;
    std::size_t total_steps = 0;  // required; validate() rejects 0
    double weight_decay = 0.05;
    std::size_t accum_steps = 4;
    std::size_t batch_size = 64;
    double alpha = 0.4;  // denoising loss weight
    double tau = 0.1;    // contrastive temperature
    std::uint64_t seed = 0;
    /// Contrastive in-batch negatives span consecutive groups of this many
    /// records; 0 means one group per micro-batch. Pinning it makes gradient
    /// accumulation independent of how records are grouped into micro-batches.
    std::size_t contrastive_block = 0;
    DenoiseConfig denoise;

    void validate() const;
};

/// Warmup then linear decay: lr_max * step / warmup up to warmup_steps,
/// lr_max * (total - step) / (total - warmup) after; exactly 0 at the end.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step_count = 0;
    std::map<std::string, std::vector<double>> m, v;
};

/// Decoupled weight decay applies to dense weight matrices only (parameter
/// paths whose last component is "w"); biases, norm parameters, embedding
/// tables, and the RBF bias weights are exempt.
bool weight_decay_applies(const std::string& name);

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// One bias-corrected Adam update over the named subset, reading each
/// parameter's accumulated gradient times grad_scale. Throws NumericError on
/// a non-finite gradient, naming the parameter.
void adam_step(ModelParams& params, const std::vector<std::string>& trained, AdamState& state,
               double lr, double weight_decay, double grad_scale = 1.0);

/// backward + adam_step + zero_grads in one call, for small fine-tuning loops.
void train_step(ModelParams& params, const std::vector<std::string>& trained, AdamState& state,
                const Tensor& loss, double lr, double weight_decay);

// ---- pretraining ------------------------------------------------------------

struct LossRow {
    std::size_t step = 0;
    double lr = 0.0;
    double l_con = 0.0;
    double l_den = 0.0;
    double total = 0.0;
};

struct PretrainResult {
    std::vector<LossRow> log;
};

/**
 * Combined contrastive + denoising pretraining. Every optimizer step
 * consumes accum_steps micro-batches of batch_size records; micro-batch
 * gradients are summed then averaged. Record order comes from seeded
 * per-epoch shuffles and each record's corruption stream is keyed by
 * (seed, record id, epoch), so runs are bit-reproducible and independent of
 * batch grouping. With alpha = 0 the denoising loss is still evaluated for
 * the log but contributes no gradients and the denoise decoder is left out
 * of the optimized set.
 */
PretrainResult pretrain(const std::vector<GeomTextPair>& corpus, const Vocab& vocab,
                        ModelParams& params, const GeomEncoderConfig& geom_cfg,
                        const TextEncoderConfig& text_cfg, const TrainConfig& cfg);

/// Loss log table: tab-separated with a header row, one line per optimizer
/// step, full-precision numbers (bit-identical across reruns).
std::string format_loss_log(const std::vector<LossRow>& log);

/// Fresh parameter set covering both encoders and the denoise decoder.
ModelParams build_pretrain_params(const GeomEncoderConfig& geom_cfg,
                                  const TextEncoderConfig& text_cfg, std::uint64_t seed);

// ---- evaluation helpers -------------------------------------------------------

struct DenoiseEval {
    double total = 0.0;
    double coord = 0.0;  // mean squared coordinate error per masked atom
    double type = 0.0;   // mean type cross-entropy
};

/// Mean denoising loss over a fixed corruption set drawn from `seed`.
DenoiseEval evaluate_denoising(const std::vector<GeomTextPair>& pairs, const ModelParams& params,
                               const GeomEncoderConfig& geom_cfg, const DenoiseConfig& cfg,
                               std::uint64_t seed);

struct CorpusEmbeddings {
    std::vector<std::vector<double>> geom;
    std::vector<std::vector<double>> text;
};

/// No-grad dual encoding of a whole corpus, index-aligned.
CorpusEmbeddings encode_corpus(const std::vector<GeomTextPair>& pairs, const Vocab& vocab,
                               const ModelParams& params, const GeomEncoderConfig& geom_cfg,
                               const TextEncoderConfig& text_cfg);

// ---- task fine-tuning ------------------------------------------------------------

struct CaptionTrainConfig {
    std::size_t steps = 2000;
    double lr = 1e-3;
    std::size_t warmup_steps = 50;
    double weight_decay = 0.0;
    bool freeze_encoder = true;
    std::uint64_t seed = 0;
};

struct CaptionTrainResult {
    std::vector<double> loss_by_step;
};

/// Teacher-forced caption training over the full pair list each step.
CaptionTrainResult train_captions(const std::vector<GeomTextPair>& pairs, const Vocab& vocab,
                                  ModelParams& params, const GeomEncoderConfig& geom_cfg,
                                  const CaptionDecoderConfig& cap_cfg,
                                  const CaptionTrainConfig& cfg);

struct PropertyTrainConfig {
    std::size_t steps = 500;
    double lr = 1e-3;
    std::size_t warmup_steps = 10;
    std::size_t batch_size = 16;
    double weight_decay = 0.0;
    bool freeze_encoder = true;
    std::uint64_t seed = 0;
};

struct PropertyTrainResult {
    std::vector<double> loss_by_step;
    PropertyStats stats;
    double train_mae = 0.0;
};

PropertyTrainResult finetune_property(const std::vector<GeomTextPair>& pairs,
                                      const std::vector<double>& targets, ModelParams& params,
                                      const GeomEncoderConfig& geom_cfg,
                                      const PropertyTrainConfig& cfg);

// ---- checkpoints -------------------------------------------------------------------

/// Binary checkpoint: 8-byte magic, u64 little-endian manifest length, JSON
/// manifest (config plus per-tensor name/shape/dtype/offset), then raw
/// little-endian 32-bit floats.
void save_checkpoint(const ModelParams& params, const nlohmann::json& config,
                     const std::string& path);

struct Checkpoint {
    ModelParams params;
    nlohmann::json config;
};

Checkpoint load_checkpoint(const std::string& path);

/// Loads stored values into an existing parameter set; shape disagreements
/// throw, naming the entry ("expected 64x64, found 64x63").
void load_checkpoint_into(const std::string& path, ModelParams& params);

// ---- config (de)serialization ---------------------------------------------------------

nlohmann::json to_json(const GeomEncoderConfig& cfg);
nlohmann::json to_json(const TextEncoderConfig& cfg);
nlohmann::json to_json(const CaptionDecoderConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
GeomEncoderConfig geom_config_from_json(const nlohmann::json& j);
TextEncoderConfig text_config_from_json(const nlohmann::json& j);
CaptionDecoderConfig caption_config_from_json(const nlohmann::json& j);

}  // namespace geomtext
