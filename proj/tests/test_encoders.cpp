// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geomtext/encoders.hpp"
#include "geomtext/gradcheck.hpp"
#include "geomtext/rng.hpp"
#include "geomtext/vocab.hpp"
#include "testutil.hpp"

using namespace geomtext;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

// Plain-double replay of the forward pass for a single atom. With one atom
// the attention softmax is a 1x1 identity, so each layer reduces to
// x + Wo(Wv(ln1(x)) + bv) + bo followed by the feed-forward block.
std::vector<double> single_atom_forward(int atom, const ModelParams& params,
                                        const GeomEncoderConfig& cfg) {
    const std::size_t d = cfg.atom_embed_dim;
    auto vec = [&](const std::string& name) { return params.at(name).data(); };
    auto affine = [&](const std::vector<double>& x, const std::string& prefix) {
        const auto& w = vec(prefix + ".w");
        const auto& b = vec(prefix + ".b");
        const std::size_t out_dim = b.size();
        std::vector<double> y(out_dim, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t j = 0; j < out_dim; ++j) y[j] += x[i] * w[i * out_dim + j];
        }
        for (std::size_t j = 0; j < out_dim; ++j) y[j] += b[j];
        return y;
    };
    auto ln = [&](const std::vector<double>& x, const std::string& prefix) {
        const auto& gamma = vec(prefix + ".gamma");
        const auto& beta = vec(prefix + ".beta");
        double mu = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
        double var = 0.0;
        for (double v : x) var += (v - mu) * (v - mu);
        var /= x.size();
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] = (x[i] - mu) / std::sqrt(var + kLayerNormEpsilon) * gamma[i] + beta[i];
        }
        return y;
    };
    auto gelu_v = [](std::vector<double> x) {
        for (double& v : x) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
        return x;
    };

    std::vector<double> x(vec("geom.atom_emb").begin() + atom * d,
                          vec("geom.atom_emb").begin() + (atom + 1) * d);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string prefix = "geom.l" + std::to_string(l);
        const auto a = ln(x, prefix + ".ln1");
        const auto context = affine(a, prefix + ".attn.v");  // softmax over one key is 1
        const auto attn_out = affine(context, prefix + ".attn.o");
        for (std::size_t i = 0; i < d; ++i) x[i] += attn_out[i];
        const auto h = ln(x, prefix + ".ln2");
        const auto ffn = affine(gelu_v(affine(h, prefix + ".ffn.h1")), prefix + ".ffn.h2");
        for (std::size_t i = 0; i < d; ++i) x[i] += ffn[i];
    }
    x = ln(x, "geom.final_ln");
    return affine(gelu_v(affine(x, "geom.proj.h1")), "geom.proj.h2");
}

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("rbf expansion hits 1 at each center") {
    const GeomEncoderConfig cfg = testutil::tiny_geom_config();
    for (std::size_t k = 0; k < cfg.rbf_centers.size(); ++k) {
        const auto out = rbf_expand(cfg.rbf_centers[k], cfg);
        CHECK(out[k] == doctest::Approx(1.0));
    }
    const auto shifted = rbf_expand(cfg.rbf_centers[1] + cfg.rbf_width, cfg);
    CHECK(shifted[1] == doctest::Approx(std::exp(-0.5)));
    CHECK_THROWS_AS(rbf_expand(-0.1, cfg), std::invalid_argument);
}

TEST_CASE("rbf components stay in (0,1] and decay beyond the last center") {
    const GeomEncoderConfig cfg;  // 16 centers on [0, 10]
    double previous_norm = 1e300;
    for (double d = cfg.rbf_centers.back(); d < cfg.rbf_centers.back() + 5.0; d += 0.25) {
        const auto out = rbf_expand(d, cfg);
        double norm = 0.0;
        for (double v : out) {
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
            norm += v;
        }
        CHECK(norm < previous_norm);
        previous_norm = norm;
    }
}

TEST_CASE("config invariants are enforced") {
    GeomEncoderConfig geom = testutil::tiny_geom_config();
    geom.atom_embed_dim = 7;
    CHECK_THROWS_AS(geom.validate(), std::invalid_argument);
    geom = testutil::tiny_geom_config();
    geom.rbf_centers = {0.0, 2.0, 1.0};
    CHECK_THROWS_AS(geom.validate(), std::invalid_argument);
    geom = testutil::tiny_geom_config();
    geom.rbf_width = 0.0;
    CHECK_THROWS_AS(geom.validate(), std::invalid_argument);

    TextEncoderConfig text = testutil::tiny_text_config();
    text.max_seq_len = 1;
    CHECK_THROWS_AS(text.validate(), std::invalid_argument);
}

TEST_CASE("geometry embedding is rigid-motion and permutation invariant") {
    const GeomEncoderConfig cfg = testutil::tiny_geom_config();
    ModelParams params;
    init_geom_params(params, cfg, 11);

    for (int t = 0; t < 25; ++t) {
        RngStream rng(derive_seed(600 + t, "inv"));
        const Molecule mol = testutil::random_molecule(rng, 2, 6, "inv");
        const Tensor base = encode_geometry(mol, params, cfg);

        Molecule moved = mol;
        moved.coords = testutil::random_rigid_motion(rng).apply(mol.coords);
        CHECK(max_abs_diff(encode_geometry(moved, params, cfg).data(), base.data()) < 1e-9);

        Molecule shuffled = mol;
        std::vector<std::size_t> perm(mol.natoms());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled.atoms[i] = mol.atoms[perm[i]];
            for (int k = 0; k < 3; ++k) shuffled.coords[3 * i + k] = mol.coords[3 * perm[i] + k];
        }
        CHECK(max_abs_diff(encode_geometry(shuffled, params, cfg).data(), base.data()) < 1e-9);
    }
}

TEST_CASE("single-atom encoding matches an independent forward replay") {
    GeomEncoderConfig cfg = testutil::tiny_geom_config();
    cfg.num_layers = 2;
    ModelParams params;
    init_geom_params(params, cfg, 29);

    Molecule mol;
    mol.id = "one";
    mol.atoms = {8};
    mol.coords = {0.3, -1.2, 2.0};
    const Tensor got = encode_geometry(mol, params, cfg);
    const auto expected = single_atom_forward(8, params, cfg);
    REQUIRE(got.numel() == expected.size());
    CHECK(max_abs_diff(got.data(), expected) < 1e-12);
}

TEST_CASE("geometry encoder error contracts") {
    const GeomEncoderConfig cfg = testutil::tiny_geom_config();
    ModelParams params;
    init_geom_params(params, cfg, 1);
    RngStream rng(3);
    Molecule big = testutil::random_molecule(rng, cfg.max_atoms + 1, cfg.max_atoms + 1, "big");
    CHECK_THROWS_WITH_AS(encode_geometry(big, params, cfg), doctest::Contains("capacity"),
                         std::invalid_argument);
    CHECK_THROWS_AS(encode_geometry_atoms({0}, {0, 0, 0}, params, cfg), std::invalid_argument);
    CHECK_THROWS_AS(encode_geometry_atoms({200}, {0, 0, 0}, params, cfg), std::invalid_argument);
}

TEST_CASE("tokenizer follows the punctuation and case rules") {
    const auto tokens = word_tokenize("The molecule is an acid.");
    CHECK(tokens == std::vector<std::string>{"the", "molecule", "is", "an", "acid", "."});
    CHECK(word_tokenize("salt.)") == std::vector<std::string>{"salt", ".", ")"});
    CHECK(word_tokenize("(aspirin)") == std::vector<std::string>{"(aspirin", ")"});
    CHECK(word_tokenize("A  b\tc") == std::vector<std::string>{"a", "b", "c"});
    CHECK(word_tokenize(word_tokenize("Stable on re-run.")[3]) ==
          std::vector<std::string>{"."});
}

TEST_CASE("tokenize prefixes CLS and truncates") {
    const Vocab vocab = testutil::tiny_vocab();
    const auto ids = tokenize("The acid ring.", vocab, 16);
    REQUIRE(ids.size() == 5);
    CHECK(ids[0] == Vocab::kCls);
    CHECK(ids[1] == Vocab::kUnk);  // "the" is not in the tiny vocab
    CHECK(ids[2] == vocab.id_or_unk("acid"));
    CHECK(ids[3] == vocab.id_or_unk("ring"));
    CHECK(ids[4] == vocab.id_or_unk("."));

    const auto truncated = tokenize("acid ring polar ether amine", vocab, 3);
    CHECK(truncated.size() == 3);
    CHECK(truncated[0] == Vocab::kCls);
}

TEST_CASE("build_vocab orders by frequency and honors min_freq") {
    std::vector<GeomTextPair> pairs(3);
    for (auto& pair : pairs) {
        pair.molecule.id = "m";
        pair.molecule.atoms = {6};
        pair.molecule.coords = {0, 0, 0};
    }
    pairs[0].text = "ring ring acid";
    pairs[1].text = "ring acid";
    pairs[2].text = "rare";

    const Vocab vocab = build_vocab(pairs, 2);
    CHECK(vocab.size() == Vocab::kNumReserved + 2);
    CHECK(vocab.token(Vocab::kNumReserved) == "ring");    // freq 3
    CHECK(vocab.token(Vocab::kNumReserved + 1) == "acid");  // freq 2
    CHECK(vocab.id_or_unk("rare") == Vocab::kUnk);
}

TEST_CASE("vocab file round trip") {
    testutil::TempDir dir("vocab");
    const Vocab vocab = testutil::tiny_vocab();
    save_vocab(vocab, dir.file("vocab.txt"));
    const Vocab loaded = load_vocab(dir.file("vocab.txt"));
    CHECK(loaded.tokens() == vocab.tokens());
    CHECK_THROWS_AS(Vocab({"[PAD]", "[UNK]"}), std::invalid_argument);
    CHECK_THROWS_AS(Vocab({"[UNK]", "[PAD]", "[CLS]", "[BOS]", "[EOS]"}), std::invalid_argument);
}

TEST_CASE("text embedding ignores padding") {
    const TextEncoderConfig cfg = testutil::tiny_text_config();
    ModelParams params;
    init_text_params(params, cfg, 17);

    const std::vector<std::size_t> ids{Vocab::kCls, 5, 7};
    std::vector<std::size_t> padded = ids;
    padded.push_back(Vocab::kPad);
    padded.push_back(Vocab::kPad);

    const Tensor a = encode_text(ids, params, cfg);
    const Tensor b = encode_text(padded, params, cfg);
    CHECK(max_abs_diff(a.data(), b.data()) < 1e-9);
}

TEST_CASE("different init seeds give different text embeddings") {
    const TextEncoderConfig cfg = testutil::tiny_text_config();
    ModelParams a, b;
    init_text_params(a, cfg, 1);
    init_text_params(b, cfg, 2);
    const std::vector<std::size_t> ids{Vocab::kCls, 5, 6, 7};
    CHECK(max_abs_diff(encode_text(ids, a, cfg).data(), encode_text(ids, b, cfg).data()) > 1e-6);
}

TEST_CASE("text encoder error contracts") {
    const TextEncoderConfig cfg = testutil::tiny_text_config();
    ModelParams params;
    init_text_params(params, cfg, 5);
    CHECK_THROWS_AS(encode_text({Vocab::kCls, cfg.vocab_size}, params, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(encode_text(std::vector<std::size_t>(cfg.max_seq_len + 1, 5), params, cfg),
                    std::invalid_argument);
}

TEST_CASE("encoder gradients pass the finite-difference check") {
    const GeomEncoderConfig geom_cfg = testutil::tiny_geom_config();
    const TextEncoderConfig text_cfg = testutil::tiny_text_config();
    ModelParams params;
    init_geom_params(params, geom_cfg, 41);
    init_text_params(params, text_cfg, 41);

    RngStream rng(8);
    const Molecule mol = testutil::random_molecule(rng, 4, 4, "fd");
    const std::vector<std::size_t> ids{Vocab::kCls, 5, 8, 6};
    const Tensor weights_g = Tensor::from(
        [&] {
            std::vector<double> w(geom_cfg.proj_dim);
            for (double& v : w) v = rng.uniform(-1.0, 1.0);
            return w;
        }(),
        {1, geom_cfg.proj_dim});

    auto f = [&]() {
        const Tensor g = encode_geometry(mol, params, geom_cfg);
        const Tensor t = encode_text(ids, params, text_cfg);
        return sum_all(mul(add(g, t), weights_g));
    };
    const GradCheckReport report = finite_diff_check(f, params, 1e-5, 1e-4);
    CHECK_MESSAGE(report.pass, "worst " << report.worst_param << " err " << report.max_rel_err);
}

}  // TEST_SUITE
