// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "geomtext/molio.hpp"
#include "geomtext/rng.hpp"
#include "geomtext/tensor.hpp"

namespace geomtext {

struct ContrastiveConfig {
    double temperature = 0.1;
    void validate() const;
};

struct DenoiseConfig {
    double sigma = 1.0;             // coordinate noise scale, Angstrom
    double mask_ratio = 0.15;       // fraction of atoms masked
    double type_loss_weight = 1.0;  // weight on the type cross-entropy term
    void validate() const;
};

/// A molecule after corruption: every atom's coordinates carry i.i.d.
/// Gaussian noise, and max(1, ceil(mask_ratio * N)) atoms have their type
/// replaced by the mask-atom token. Targets are the true (un-noised)
/// coordinates and true types of the masked atoms, in mask index order.
struct CorruptedMolecule {
    std::vector<int> input_atoms;       // masked slots hold kMaskAtomId
    std::vector<double> noisy_coords;   // N x 3
    std::vector<std::size_t> mask;      // distinct, ascending
    std::vector<double> target_coords;  // |mask| x 3
    std::vector<int> target_types;      // |mask|
};

/// Pairwise temperature-scaled cosine logits: entry (i, j) = cos(g_i, t_j)/tau.
/// Batches must have equal row counts; zero-norm rows are rejected.
Tensor similarity_matrix(const Tensor& geom_embeds, const Tensor& text_embeds, double tau);

/// Symmetric InfoNCE over a batch of aligned embeddings: the mean over items
/// of the diagonal negative log-softmax of the similarity matrix, taken in
/// both directions.
Tensor contrastive_loss(const Tensor& geom_embeds, const Tensor& text_embeds, double tau);

/// Applies coordinate noise and atom-type masking. Mask indices are drawn
/// uniformly without replacement; the draw is fully determined by `rng`.
CorruptedMolecule corrupt(const Molecule& mol, const DenoiseConfig& cfg, RngStream& rng);

/// Exact mask size used by corrupt(): max(1, ceil(mask_ratio * N)).
std::size_t corrupt_mask_count(std::size_t natoms, const DenoiseConfig& cfg);

/// Mean over masked atoms of squared coordinate error plus weighted type
/// cross-entropy: ||p_hat - p||^2 + lambda * CE(logits, type).
Tensor denoising_loss(const CorruptedMolecule& corrupted, const Tensor& pred_coords,
                      const Tensor& type_logits, const DenoiseConfig& cfg);

/// Combined pretraining objective: contrastive + alpha * denoising.
Tensor total_loss(const Tensor& contrastive, const Tensor& denoising, double alpha);

}  // namespace geomtext
