// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geomtext/molio.hpp"
#include "geomtext/params.hpp"
#include "geomtext/tensor.hpp"

namespace geomtext {

/// Atom-type vocabulary: ids 1..118 are atomic numbers, id 119 is the
/// mask-atom token used by denoising corruption. Id 0 is unused.
constexpr int kMaskAtomId = 119;
constexpr std::size_t kAtomVocabSize = 120;

struct GeomEncoderConfig {
    std::size_t atom_embed_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::vector<double> rbf_centers = default_rbf_centers();
    double rbf_width = 0.5;  // Angstrom
    std::size_t proj_dim = 512;
    std::size_t max_atoms = 64;

    static std::vector<double> default_rbf_centers();  // 16 centers on [0, 10]
    void validate() const;
};

struct TextEncoderConfig {
    std::size_t vocab_size = 0;
    std::size_t token_embed_dim = 64;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t max_seq_len = 32;
    std::size_t proj_dim = 512;

    void validate() const;
};

/// Gaussian radial basis expansion of an interatomic distance:
/// component k = exp(-(d - c_k)^2 / (2 w^2)). This is the invariant spatial
/// positional encoding feeding the attention pair bias.
std::vector<double> rbf_expand(double distance, const GeomEncoderConfig& cfg);

void init_geom_params(ModelParams& params, const GeomEncoderConfig& cfg, std::uint64_t seed);
void init_text_params(ModelParams& params, const TextEncoderConfig& cfg, std::uint64_t seed);

/**
 * Geometric encoder trunk: atom-type embeddings run through num_layers
 * pre-norm self-attention blocks where every head's logits receive an
 * additive pair bias <w_h, rbf(dist(i,j))>, then a closing layer norm.
 * Returns the per-atom representations (N x d). Coordinates enter only
 * through pairwise distances, so the result is rigid-motion invariant.
 */
Tensor encode_geometry_atoms(const std::vector<int>& atom_ids, const std::vector<double>& coords,
                             const ModelParams& params, const GeomEncoderConfig& cfg);

/// Full geometric encoder: trunk -> mean pooling -> projection MLP.
/// Output is a 1 x proj_dim embedding.
Tensor encode_geometry(const Molecule& mol, const ModelParams& params,
                       const GeomEncoderConfig& cfg);

/// Text encoder: token + learned positional embeddings, transformer layers
/// with a padding mask, projection of the position-0 ([CLS]) representation.
Tensor encode_text(const std::vector<std::size_t>& ids, const ModelParams& params,
                   const TextEncoderConfig& cfg);

namespace nn {

// Shared transformer building blocks, parameterized by dotted name prefixes.

Tensor linear(const Tensor& x, const ModelParams& params, const std::string& prefix);
Tensor layer_norm_affine(const Tensor& x, const ModelParams& params, const std::string& prefix);
/// `head_bias` holds one additive logit-bias matrix per head, a single
/// matrix shared by all heads, or nothing.
Tensor transformer_layer(const Tensor& x, const std::vector<Tensor>& head_bias,
                         const ModelParams& params, const std::string& prefix,
                         std::size_t num_heads);
Tensor projection_mlp(const Tensor& x, const ModelParams& params, const std::string& prefix);

void init_linear(ModelParams& params, const std::string& prefix, std::size_t in, std::size_t out,
                 std::uint64_t seed);
void init_layer_norm(ModelParams& params, const std::string& prefix, std::size_t dim);
void init_transformer_layer(ModelParams& params, const std::string& prefix, std::size_t dim,
                            std::uint64_t seed);
void init_projection_mlp(ModelParams& params, const std::string& prefix, std::size_t in,
                         std::size_t hidden, std::size_t out, std::uint64_t seed);

}  // namespace nn

}  // namespace geomtext
