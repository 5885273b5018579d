// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "geomtext/encoders.hpp"
#include "geomtext/heads.hpp"
#include "geomtext/molio.hpp"
#include "geomtext/rng.hpp"
#include "geomtext/vocab.hpp"

namespace testutil {

using namespace geomtext;

inline Molecule random_molecule(RngStream& rng, std::size_t min_atoms, std::size_t max_atoms,
                                const std::string& id) {
    Molecule mol;
    mol.id = id;
    const std::array<int, 6> palette{1, 6, 7, 8, 9, 16};
    const std::size_t n = min_atoms + rng.uniform_index(max_atoms - min_atoms + 1);
    for (std::size_t i = 0; i < n; ++i) {
        mol.atoms.push_back(palette[rng.uniform_index(palette.size())]);
        for (int k = 0; k < 3; ++k) mol.coords.push_back(rng.uniform(-3.0, 3.0));
    }
    return mol;
}

/// Random rotation from three Box-Muller axes via Gram-Schmidt, plus a
/// translation; right-handedness is not required for invariance checks.
struct RigidMotion {
    std::array<double, 9> rot;
    std::array<double, 3> shift;

    std::vector<double> apply(const std::vector<double>& coords) const {
        std::vector<double> out(coords.size());
        for (std::size_t i = 0; i * 3 < coords.size(); ++i) {
            for (int r = 0; r < 3; ++r) {
                out[3 * i + r] = rot[3 * r] * coords[3 * i] + rot[3 * r + 1] * coords[3 * i + 1] +
                                 rot[3 * r + 2] * coords[3 * i + 2] + shift[r];
            }
        }
        return out;
    }
};

inline RigidMotion random_rigid_motion(RngStream& rng) {
    std::array<std::array<double, 3>, 3> basis;
    for (auto& v : basis) {
        for (double& x : v) x = rng.gaussian();
    }
    auto dot = [](const auto& a, const auto& b) {
        return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    };
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < i; ++j) {
            const double d = dot(basis[i], basis[j]);
            for (int k = 0; k < 3; ++k) basis[i][k] -= d * basis[j][k];
        }
        const double norm = std::sqrt(dot(basis[i], basis[i]));
        for (double& x : basis[i]) x /= norm;
    }
    RigidMotion motion;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) motion.rot[3 * i + j] = basis[i][j];
        motion.shift[i] = rng.uniform(-5.0, 5.0);
    }
    return motion;
}

inline GeomEncoderConfig tiny_geom_config() {
    GeomEncoderConfig cfg;
    cfg.atom_embed_dim = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.rbf_centers = {0.0, 2.0, 4.0, 6.0};
    cfg.rbf_width = 1.0;
    cfg.proj_dim = 8;
    cfg.max_atoms = 8;
    return cfg;
}

inline Vocab tiny_vocab() {
    return Vocab({"[PAD]", "[UNK]", "[CLS]", "[BOS]", "[EOS]", "acid", "ring", "polar", "ether",
                  "amine", "salt"});
}

inline TextEncoderConfig tiny_text_config() {
    TextEncoderConfig cfg;
    cfg.vocab_size = tiny_vocab().size();
    cfg.token_embed_dim = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.max_seq_len = 6;
    cfg.proj_dim = 8;
    return cfg;
}

inline CaptionDecoderConfig tiny_caption_config() {
    CaptionDecoderConfig cfg;
    cfg.vocab_size = tiny_vocab().size();
    cfg.embed_dim = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.prefix_len = 2;
    cfg.max_seq_len = 8;
    return cfg;
}

/// Unique scratch directory under the system temp dir; removed on request.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("geomtext-test-" + tag + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace testutil
