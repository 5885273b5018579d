// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "geomtext/encoders.hpp"

namespace geomtext {

void ContrastiveConfig::validate() const {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("contrastive config: temperature must be positive");
    }
}

void DenoiseConfig::validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("denoise config: sigma must be >= 0");
    if (!(mask_ratio > 0.0) || !(mask_ratio < 1.0)) {
        throw std::invalid_argument("denoise config: mask_ratio must be in (0, 1)");
    }
    if (!(type_loss_weight >= 0.0)) {
        throw std::invalid_argument("denoise config: type_loss_weight must be >= 0");
    }
}

Tensor similarity_matrix(const Tensor& geom_embeds, const Tensor& text_embeds, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("similarity_matrix: tau must be positive");
    if (geom_embeds.rank() != 2 || text_embeds.rank() != 2 ||
        geom_embeds.shape() != text_embeds.shape()) {
        throw std::invalid_argument("similarity_matrix: batches must be equal-shape matrices");
    }
    const Tensor g_hat = l2_normalize_rows(geom_embeds);
    const Tensor t_hat = l2_normalize_rows(text_embeds);
    return scale(matmul(g_hat, transpose(t_hat)), 1.0 / tau);
}

Tensor contrastive_loss(const Tensor& geom_embeds, const Tensor& text_embeds, double tau) {
    const Tensor sims = similarity_matrix(geom_embeds, text_embeds, tau);
    const std::size_t batch = sims.shape()[0];
    std::vector<std::size_t> diag(batch);
    std::iota(diag.begin(), diag.end(), std::size_t{0});
    const Tensor g2t = nll_rows(log_softmax(sims), diag);
    const Tensor t2g = nll_rows(log_softmax(transpose(sims)), diag);
    return add(mean_all(g2t), mean_all(t2g));
}

std::size_t corrupt_mask_count(std::size_t natoms, const DenoiseConfig& cfg) {
    cfg.validate();
    const double raw = std::ceil(cfg.mask_ratio * static_cast<double>(natoms));
    return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

CorruptedMolecule corrupt(const Molecule& mol, const DenoiseConfig& cfg, RngStream& rng) {
    mol.validate();
    cfg.validate();
    const std::size_t n = mol.natoms();
    const std::size_t num_masked = corrupt_mask_count(n, cfg);

    CorruptedMolecule out;
    out.input_atoms = mol.atoms;
    out.noisy_coords = mol.coords;
    for (double& v : out.noisy_coords) v += cfg.sigma * rng.gaussian();

    // Uniform draw without replacement via partial Fisher-Yates.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < num_masked; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(order[i], order[j]);
    }
    out.mask.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(num_masked));
    std::sort(out.mask.begin(), out.mask.end());

    out.target_types.reserve(num_masked);
    out.target_coords.reserve(num_masked * 3);
    for (std::size_t idx : out.mask) {
        out.input_atoms[idx] = kMaskAtomId;
        out.target_types.push_back(mol.atoms[idx]);
        for (int k = 0; k < 3; ++k) out.target_coords.push_back(mol.coords[3 * idx + k]);
    }
    return out;
}

Tensor denoising_loss(const CorruptedMolecule& corrupted, const Tensor& pred_coords,
                      const Tensor& type_logits, const DenoiseConfig& cfg) {
    cfg.validate();
    const std::size_t m = corrupted.mask.size();
    if (m == 0) throw std::invalid_argument("denoising_loss: empty mask");
    if (pred_coords.rank() != 2 || pred_coords.shape()[0] != m || pred_coords.shape()[1] != 3) {
        throw std::invalid_argument("denoising_loss: expected " + std::to_string(m) +
                                    "x3 coordinate predictions");
    }
    if (type_logits.rank() != 2 || type_logits.shape()[0] != m) {
        throw std::invalid_argument("denoising_loss: expected " + std::to_string(m) +
                                    " rows of type logits");
    }

    const Tensor targets = Tensor::from(corrupted.target_coords, {m, 3});
    const Tensor coord_term = scale(squared_l2(sub(pred_coords, targets)),
                                    1.0 / static_cast<double>(m));

    std::vector<std::size_t> type_targets(m);
    for (std::size_t i = 0; i < m; ++i) {
        type_targets[i] = static_cast<std::size_t>(corrupted.target_types[i]);
    }
    const Tensor type_term = mean_all(nll_rows(log_softmax(type_logits), type_targets));
    return add(coord_term, scale(type_term, cfg.type_loss_weight));
}

Tensor total_loss(const Tensor& contrastive, const Tensor& denoising, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("total_loss: alpha must be >= 0");
    if (contrastive.numel() != 1 || denoising.numel() != 1) {
        throw std::invalid_argument("total_loss: inputs must be scalars");
    }
    return add(contrastive, scale(denoising, alpha));
}

}  // namespace geomtext
