// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/encoders.hpp"

#include <cmath>
#include <stdexcept>

#include "geomtext/vocab.hpp"

namespace geomtext {

std::vector<double> GeomEncoderConfig::default_rbf_centers() {
    std::vector<double> centers(16);
    for (std::size_t k = 0; k < centers.size(); ++k) {
        centers[k] = 10.0 * static_cast<double>(k) / static_cast<double>(centers.size() - 1);
    }
    return centers;
}

void GeomEncoderConfig::validate() const {
    if (atom_embed_dim == 0 || num_heads == 0 || atom_embed_dim % num_heads != 0) {
        throw std::invalid_argument("geom config: atom_embed_dim must be divisible by num_heads");
    }
    if (num_layers == 0) throw std::invalid_argument("geom config: need at least one layer");
    if (rbf_centers.empty()) throw std::invalid_argument("geom config: rbf_centers empty");
    for (std::size_t k = 1; k < rbf_centers.size(); ++k) {
        if (!(rbf_centers[k] > rbf_centers[k - 1])) {
            throw std::invalid_argument("geom config: rbf_centers must be strictly increasing");
        }
    }
    if (!(rbf_width > 0.0)) throw std::invalid_argument("geom config: rbf_width must be positive");
    if (proj_dim == 0) throw std::invalid_argument("geom config: proj_dim must be positive");
    if (max_atoms == 0) throw std::invalid_argument("geom config: max_atoms must be positive");
}

void TextEncoderConfig::validate() const {
    if (token_embed_dim == 0 || num_heads == 0 || token_embed_dim % num_heads != 0) {
        throw std::invalid_argument("text config: token_embed_dim must be divisible by num_heads");
    }
    if (num_layers == 0) throw std::invalid_argument("text config: need at least one layer");
    if (max_seq_len < 2) throw std::invalid_argument("text config: max_seq_len must be >= 2");
    if (vocab_size < Vocab::kNumReserved) {
        throw std::invalid_argument("text config: vocab_size smaller than reserved tokens");
    }
    if (proj_dim == 0) throw std::invalid_argument("text config: proj_dim must be positive");
}

std::vector<double> rbf_expand(double distance, const GeomEncoderConfig& cfg) {
    if (!(distance >= 0.0)) {
        throw std::invalid_argument("rbf_expand: distance must be non-negative");
    }
    std::vector<double> out(cfg.rbf_centers.size());
    const double denom = 2.0 * cfg.rbf_width * cfg.rbf_width;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double d = distance - cfg.rbf_centers[k];
        out[k] = std::exp(-(d * d) / denom);
    }
    return out;
}

namespace nn {

Tensor linear(const Tensor& x, const ModelParams& params, const std::string& prefix) {
    return add(matmul(x, params.at(prefix + ".w")), params.at(prefix + ".b"));
}

Tensor layer_norm_affine(const Tensor& x, const ModelParams& params, const std::string& prefix) {
    return add(mul(layer_norm(x), params.at(prefix + ".gamma")), params.at(prefix + ".beta"));
}

namespace {

Tensor attention(const Tensor& x, const std::vector<Tensor>& head_bias, const ModelParams& params,
                 const std::string& prefix, std::size_t num_heads) {
    const std::size_t dim = x.shape()[1];
    const std::size_t head_dim = dim / num_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const Tensor q = linear(x, params, prefix + ".q");
    const Tensor k = linear(x, params, prefix + ".k");
    const Tensor v = linear(x, params, prefix + ".v");

    Tensor ctx;
    for (std::size_t h = 0; h < num_heads; ++h) {
        const Tensor qh = slice(q, 1, h * head_dim, head_dim);
        const Tensor kh = slice(k, 1, h * head_dim, head_dim);
        const Tensor vh = slice(v, 1, h * head_dim, head_dim);
        Tensor logits = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (head_bias.size() == 1) {
            logits = add(logits, head_bias[0]);
        } else if (!head_bias.empty()) {
            logits = add(logits, head_bias[h]);
        }
        const Tensor ctx_h = matmul(softmax(logits), vh);
        ctx = (h == 0) ? ctx_h : concat(ctx, ctx_h, 1);
    }
    return linear(ctx, params, prefix + ".o");
}

}  // namespace

Tensor transformer_layer(const Tensor& x, const std::vector<Tensor>& head_bias,
                         const ModelParams& params, const std::string& prefix,
                         std::size_t num_heads) {
    if (!head_bias.empty() && head_bias.size() != 1 && head_bias.size() != num_heads) {
        throw std::invalid_argument("transformer_layer: bias count must be 0, 1, or num_heads");
    }
    Tensor h = add(x, attention(layer_norm_affine(x, params, prefix + ".ln1"), head_bias, params,
                                prefix + ".attn", num_heads));
    Tensor a = layer_norm_affine(h, params, prefix + ".ln2");
    a = linear(a, params, prefix + ".ffn.h1");
    a = gelu(a);
    a = linear(a, params, prefix + ".ffn.h2");
    return add(h, a);
}

Tensor projection_mlp(const Tensor& x, const ModelParams& params, const std::string& prefix) {
    return linear(gelu(linear(x, params, prefix + ".h1")), params, prefix + ".h2");
}

void init_linear(ModelParams& params, const std::string& prefix, std::size_t in, std::size_t out,
                 std::uint64_t seed) {
    params.add(prefix + ".w", init_uniform_param({in, out}, in, seed, prefix + ".w"));
    params.add(prefix + ".b", init_zeros_param({out}));
}

void init_layer_norm(ModelParams& params, const std::string& prefix, std::size_t dim) {
    params.add(prefix + ".gamma", init_ones_param({dim}));
    params.add(prefix + ".beta", init_zeros_param({dim}));
}

void init_transformer_layer(ModelParams& params, const std::string& prefix, std::size_t dim,
                            std::uint64_t seed) {
    init_layer_norm(params, prefix + ".ln1", dim);
    init_linear(params, prefix + ".attn.q", dim, dim, seed);
    init_linear(params, prefix + ".attn.k", dim, dim, seed);
    init_linear(params, prefix + ".attn.v", dim, dim, seed);
    init_linear(params, prefix + ".attn.o", dim, dim, seed);
    init_layer_norm(params, prefix + ".ln2", dim);
    init_linear(params, prefix + ".ffn.h1", dim, 4 * dim, seed);
    init_linear(params, prefix + ".ffn.h2", 4 * dim, dim, seed);
}

void init_projection_mlp(ModelParams& params, const std::string& prefix, std::size_t in,
                         std::size_t hidden, std::size_t out, std::uint64_t seed) {
    init_linear(params, prefix + ".h1", in, hidden, seed);
    init_linear(params, prefix + ".h2", hidden, out, seed);
}

}  // namespace nn

void init_geom_params(ModelParams& params, const GeomEncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.atom_embed_dim;
    params.add("geom.atom_emb",
               init_uniform_param({kAtomVocabSize, d}, d, seed, "geom.atom_emb"));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string prefix = "geom.l" + std::to_string(l);
        nn::init_transformer_layer(params, prefix, d, seed);
        const std::string rbf_name = prefix + ".attn.rbf_w";
        params.add(rbf_name, init_uniform_param({cfg.rbf_centers.size(), cfg.num_heads},
                                                cfg.rbf_centers.size(), seed, rbf_name));
    }
    nn::init_layer_norm(params, "geom.final_ln", d);
    nn::init_projection_mlp(params, "geom.proj", d, d, cfg.proj_dim, seed);
}

void init_text_params(ModelParams& params, const TextEncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.token_embed_dim;
    params.add("text.tok_emb", init_uniform_param({cfg.vocab_size, d}, d, seed, "text.tok_emb"));
    params.add("text.pos_emb", init_uniform_param({cfg.max_seq_len, d}, d, seed, "text.pos_emb"));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        nn::init_transformer_layer(params, "text.l" + std::to_string(l), d, seed);
    }
    nn::init_layer_norm(params, "text.final_ln", d);
    nn::init_projection_mlp(params, "text.proj", d, d, cfg.proj_dim, seed);
}

namespace {

// Pairwise-distance RBF features as one constant (N*N x K) block; each layer
// projects it with its learned per-head weights.
Tensor rbf_feature_matrix(const std::vector<double>& coords, std::size_t n,
                          const GeomEncoderConfig& cfg) {
    const std::size_t kdim = cfg.rbf_centers.size();
    std::vector<double> feats(n * n * kdim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = coords[3 * i] - coords[3 * j];
            const double dy = coords[3 * i + 1] - coords[3 * j + 1];
            const double dz = coords[3 * i + 2] - coords[3 * j + 2];
            const auto rbf = rbf_expand(std::sqrt(dx * dx + dy * dy + dz * dz), cfg);
            std::copy(rbf.begin(), rbf.end(), feats.begin() + (i * n + j) * kdim);
        }
    }
    return Tensor::from(std::move(feats), {n * n, kdim});
}

}  // namespace

Tensor encode_geometry_atoms(const std::vector<int>& atom_ids, const std::vector<double>& coords,
                             const ModelParams& params, const GeomEncoderConfig& cfg) {
    cfg.validate();
    const std::size_t n = atom_ids.size();
    if (n == 0) throw std::invalid_argument("encode_geometry: no atoms");
    if (n > cfg.max_atoms) {
        throw std::invalid_argument("encode_geometry: molecule has " + std::to_string(n) +
                                    " atoms, capacity is " + std::to_string(cfg.max_atoms));
    }
    if (coords.size() != 3 * n) {
        throw std::invalid_argument("encode_geometry: coordinate count does not match atoms");
    }
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int z = atom_ids[i];
        if (z < 1 || z >= static_cast<int>(kAtomVocabSize)) {
            throw std::invalid_argument("encode_geometry: unknown atom type " + std::to_string(z));
        }
        ids[i] = static_cast<std::size_t>(z);
    }

    const Tensor rbf = rbf_feature_matrix(coords, n, cfg);
    Tensor x = gather_rows(params.at("geom.atom_emb"), ids);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string prefix = "geom.l" + std::to_string(l);
        const Tensor bias_all = matmul(rbf, params.at(prefix + ".attn.rbf_w"));  // N*N x H
        std::vector<Tensor> head_bias;
        head_bias.reserve(cfg.num_heads);
        for (std::size_t h = 0; h < cfg.num_heads; ++h) {
            head_bias.push_back(reshape(slice(bias_all, 1, h, 1), {n, n}));
        }
        x = nn::transformer_layer(x, head_bias, params, prefix, cfg.num_heads);
    }
    return nn::layer_norm_affine(x, params, "geom.final_ln");
}

Tensor encode_geometry(const Molecule& mol, const ModelParams& params,
                       const GeomEncoderConfig& cfg) {
    mol.validate();
    const Tensor atoms = encode_geometry_atoms(mol.atoms, mol.coords, params, cfg);
    const Tensor pooled = reshape(mean(atoms, 0), {1, cfg.atom_embed_dim});
    return nn::projection_mlp(pooled, params, "geom.proj");
}

Tensor encode_text(const std::vector<std::size_t>& ids, const ModelParams& params,
                   const TextEncoderConfig& cfg) {
    cfg.validate();
    const std::size_t len = ids.size();
    if (len == 0) throw std::invalid_argument("encode_text: empty sequence");
    if (len > cfg.max_seq_len) {
        throw std::invalid_argument("encode_text: sequence of " + std::to_string(len) +
                                    " tokens exceeds max_seq_len " +
                                    std::to_string(cfg.max_seq_len));
    }
    for (std::size_t id : ids) {
        if (id >= cfg.vocab_size) {
            throw std::invalid_argument("encode_text: token id " + std::to_string(id) +
                                        " outside vocabulary of " +
                                        std::to_string(cfg.vocab_size));
        }
    }

    // Additive key mask: padded positions contribute zero attention weight.
    std::vector<double> mask(len * len, 0.0);
    bool any_pad = false;
    for (std::size_t j = 0; j < len; ++j) {
        if (ids[j] == Vocab::kPad) {
            any_pad = true;
            for (std::size_t i = 0; i < len; ++i) mask[i * len + j] = -1e9;
        }
    }
    std::vector<Tensor> bias;
    if (any_pad) bias.push_back(Tensor::from(std::move(mask), {len, len}));

    Tensor x = add(gather_rows(params.at("text.tok_emb"), ids),
                   slice(params.at("text.pos_emb"), 0, 0, len));
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        x = nn::transformer_layer(x, bias, params, "text.l" + std::to_string(l), cfg.num_heads);
    }
    x = nn::layer_norm_affine(x, params, "text.final_ln");
    return nn::projection_mlp(slice(x, 0, 0, 1), params, "text.proj");
}

}  // namespace geomtext
