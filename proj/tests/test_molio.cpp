// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "geomtext/molio.hpp"
#include "geomtext/rng.hpp"
#include "testutil.hpp"

using namespace geomtext;
using testutil::TempDir;

namespace {

double prefix_rmsd(const Molecule& a, const Molecule& b) {
    const std::size_t n = std::min(a.natoms(), b.natoms());
    double sum = 0.0;
    for (std::size_t i = 0; i < 3 * n; ++i) {
        const double d = a.coords[i] - b.coords[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace

TEST_SUITE("molio") {

TEST_CASE("parse_xyz reads a water molecule") {
    const Molecule mol = parse_xyz("3\nwater\nO 0 0 0\nH 0.757 0.586 0\nH -0.757 0.586 0");
    CHECK(mol.atoms == std::vector<int>{8, 1, 1});
    CHECK(mol.id == "water");
    CHECK(mol.coords[3] == doctest::Approx(0.757));
}

TEST_CASE("parse_xyz single atom with empty comment") {
    const Molecule mol = parse_xyz("1\n\nC 0 0 0");
    CHECK(mol.atoms == std::vector<int>{6});
    CHECK(mol.id.empty());
}

TEST_CASE("parse_xyz error contracts carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_xyz("2\nx\nC 0 0 0"),
                         doctest::Contains("expected 2 atoms, found 1"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_xyz("1\nx\nXx 0 0 0"),
                         doctest::Contains("unknown element symbol"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_xyz("1\nx\nC zero 0 0"), doctest::Contains("line 3"),
                         std::runtime_error);
    CHECK_THROWS_AS(parse_xyz("1\nx\nC 0 0 0\nO 1 1 1"), std::runtime_error);
    CHECK_THROWS_AS(parse_xyz("nope\nx\nC 0 0 0"), std::runtime_error);
}

TEST_CASE("element symbols map case-insensitively") {
    CHECK(element_number("c") == 6);
    CHECK(element_number("CL") == 17);
    CHECK(element_number("Uuq") == std::nullopt);
    CHECK(element_symbol(6) == "C");
    CHECK_THROWS_AS(element_symbol(0), std::invalid_argument);
}

TEST_CASE("xyz round trip preserves coordinates") {
    for (int t = 0; t < 20; ++t) {
        RngStream rng(derive_seed(400 + t, "xyz-round"));
        const Molecule mol = testutil::random_molecule(rng, 1, 12, "m" + std::to_string(t));
        const Molecule back = parse_xyz(write_xyz(mol));
        REQUIRE(back.atoms == mol.atoms);
        CHECK(back.id == mol.id);
        for (std::size_t i = 0; i < mol.coords.size(); ++i) {
            CHECK(std::fabs(back.coords[i] - mol.coords[i]) <= 1e-9);
        }
    }
}

TEST_CASE("pair corpus write/load round trip is exact") {
    TempDir dir("pairs");
    RngStream rng(99);
    std::vector<GeomTextPair> pairs;
    for (int i = 0; i < 8; ++i) {
        GeomTextPair pair;
        pair.molecule = testutil::random_molecule(rng, 1, 9, "mol-" + std::to_string(i));
        pair.text = "molecule number " + std::to_string(i) + " with a ring.";
        pair.source = i % 2 ? PairSource::GeomLike : PairSource::PubchemqcLike;
        pairs.push_back(std::move(pair));
    }
    const std::string path = dir.file("pairs.jsonl");
    write_pairs(pairs, path);
    const auto loaded = load_pairs(path);
    REQUIRE(loaded.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(loaded[i].molecule.id == pairs[i].molecule.id);
        CHECK(loaded[i].molecule.atoms == pairs[i].molecule.atoms);
        CHECK(loaded[i].molecule.coords == pairs[i].molecule.coords);  // bit-exact
        CHECK(loaded[i].text == pairs[i].text);
        CHECK(loaded[i].source == pairs[i].source);
    }

    // The canonical writer is deterministic: write(load(file)) == file.
    const std::string path2 = dir.file("pairs2.jsonl");
    write_pairs(loaded, path2);
    CHECK(testutil::slurp(path) == testutil::slurp(path2));
}

TEST_CASE("pair loader reports bad records") {
    TempDir dir("badpairs");
    const std::string path = dir.file("bad.jsonl");
    std::ofstream out(path);
    out << R"({"id":"ok","atoms":[6,8],"coords":[0,0,0,1.2,0,0],"text":"fine","source":"synthetic"})"
        << "\n";
    out << R"({"id":"bad","atoms":[6],"coords":[0,0,0,1,1],"text":"x","source":"synthetic"})"
        << "\n";
    out << R"({"id":"bad2","atoms":[6],"coords":[0,0,0],"source":"synthetic"})" << "\n";
    out.close();

    CHECK_THROWS_WITH_AS(load_pairs(path), doctest::Contains("not divisible by 3"),
                         std::runtime_error);

    std::vector<RecordError> skipped;
    const auto loaded = load_pairs(path, /*strict=*/false, &skipped);
    CHECK(loaded.size() == 1);
    REQUIRE(skipped.size() == 2);
    CHECK(skipped[0].line == 2);
    CHECK(skipped[1].line == 3);
    CHECK(skipped[1].message.find("text") != std::string::npos);
}

TEST_CASE("join_by_id intersects and reports") {
    auto mol = [](const std::string& id) {
        Molecule m;
        m.id = id;
        m.atoms = {6};
        m.coords = {0, 0, 0};
        return m;
    };
    const std::vector<Molecule> geoms{mol("a"), mol("b"), mol("c")};
    const std::vector<std::pair<std::string, std::string>> notes{
        {"b", "about b"}, {"c", "about c"}, {"d", "about d"}};

    JoinReport report;
    const auto pairs = join_by_id(geoms, notes, &report);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].molecule.id == "b");
    CHECK(pairs[1].molecule.id == "c");
    CHECK(report.unmatched_geometries == std::vector<std::string>{"a"});
    CHECK(report.unmatched_annotations == std::vector<std::string>{"d"});

    SUBCASE("disjoint sets give an empty corpus") {
        JoinReport rep;
        const auto none = join_by_id({mol("x")}, {{"y", "t"}}, &rep);
        CHECK(none.empty());
        CHECK(rep.unmatched_geometries.size() == 1);
        CHECK(rep.unmatched_annotations.size() == 1);
    }

    SUBCASE("duplicate geometry ids keep the first occurrence") {
        Molecule dup = mol("b");
        dup.coords = {9, 9, 9};
        JoinReport rep;
        const auto joined = join_by_id({mol("b"), dup}, {{"b", "t"}}, &rep);
        REQUIRE(joined.size() == 1);
        CHECK(joined[0].molecule.coords[0] == 0.0);
        CHECK(rep.duplicate_geometries == 1);
    }

    SUBCASE("conformer cap keeps up to the cap per id") {
        Molecule dup = mol("b");
        dup.coords = {9, 9, 9};
        JoinReport rep;
        const auto joined = join_by_id({mol("b"), dup, dup}, {{"b", "t"}}, &rep, 2);
        CHECK(joined.size() == 2);
        CHECK(rep.duplicate_geometries == 1);
    }
}

TEST_CASE("join output ids always lie in both sides") {
    RngStream rng(7);
    for (int t = 0; t < 20; ++t) {
        std::vector<Molecule> geoms;
        std::vector<std::pair<std::string, std::string>> notes;
        for (int i = 0; i < 12; ++i) {
            const std::string id = "id" + std::to_string(rng.uniform_index(15));
            if (rng.uniform01() < 0.6) {
                Molecule m;
                m.id = id;
                m.atoms = {6};
                m.coords = {0, 0, 0};
                geoms.push_back(std::move(m));
            }
            if (rng.uniform01() < 0.6) notes.emplace_back(id, "text " + id);
        }
        std::set<std::string> gids, nids;
        for (const auto& g : geoms) gids.insert(g.id);
        for (const auto& [id, text] : notes) nids.insert(id);

        const auto pairs = join_by_id(geoms, notes);
        CHECK(pairs.size() <= std::min(geoms.size(), notes.size()));
        for (const auto& pair : pairs) {
            CHECK(gids.count(pair.molecule.id) == 1);
            CHECK(nids.count(pair.molecule.id) == 1);
        }
    }
}

TEST_CASE("corpus_stats hand example") {
    GeomTextPair water;
    water.molecule.id = "water";
    water.molecule.atoms = {8, 1, 1};
    water.molecule.coords = std::vector<double>(9, 0.0);
    water.text = "a b c";
    GeomTextPair methane;
    methane.molecule.id = "methane";
    methane.molecule.atoms = {6, 1, 1, 1, 1};
    methane.molecule.coords = std::vector<double>(15, 0.0);
    methane.text = "d e";

    const CorpusStats stats = corpus_stats({water, methane});
    CHECK(stats.quantity == 2);
    CHECK(stats.avg_heavy_atoms == doctest::Approx(1.0));
    CHECK(stats.avg_words == doctest::Approx(2.5));

    CHECK_THROWS_AS(corpus_stats({}), std::invalid_argument);

    const CorpusStats swapped = corpus_stats({methane, water});
    CHECK(swapped.avg_heavy_atoms == stats.avg_heavy_atoms);
    CHECK(swapped.avg_words == stats.avg_words);
}

TEST_CASE("word_count splits on unicode whitespace") {
    CHECK(word_count("one two\tthree") == 3);
    CHECK(word_count("  padded  ") == 1);
    CHECK(word_count("a\xc2\xa0w") == 2);          // U+00A0
    CHECK(word_count("a\xe2\x80\x89w") == 2);      // U+2009
    CHECK(word_count("") == 0);
}

TEST_CASE("synthetic corpus is deterministic") {
    SyntheticConfig cfg;
    cfg.num_classes = 3;
    cfg.per_class = 4;
    cfg.seed = 7;
    const auto a = generate_synthetic_corpus(cfg);
    const auto b = generate_synthetic_corpus(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].molecule.id == b[i].molecule.id);
        CHECK(a[i].molecule.coords == b[i].molecule.coords);
        CHECK(a[i].text == b[i].text);
    }
}

TEST_CASE("zero jitter without variants keeps class geometry identical") {
    SyntheticConfig cfg;
    cfg.num_classes = 2;
    cfg.per_class = 3;
    cfg.jitter_sigma = 0.0;
    cfg.distinct_variants = false;
    cfg.seed = 3;
    const auto corpus = generate_synthetic_corpus(cfg);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t p = 1; p < 3; ++p) {
            CHECK(corpus[c * 3 + p].molecule.coords == corpus[c * 3].molecule.coords);
            CHECK(corpus[c * 3 + p].molecule.atoms == corpus[c * 3].molecule.atoms);
        }
    }
}

TEST_CASE("within-class geometry is closer than cross-class") {
    SyntheticConfig cfg;
    cfg.num_classes = 5;
    cfg.per_class = 8;
    cfg.atoms_range = {10, 10};
    cfg.seed = 21;
    const auto corpus = generate_synthetic_corpus(cfg);

    RngStream rng(55);
    double within = 0.0, cross = 0.0;
    int within_n = 0, cross_n = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t i = rng.uniform_index(corpus.size());
        std::size_t j = rng.uniform_index(corpus.size() - 1);
        if (j >= i) ++j;
        const double d = prefix_rmsd(corpus[i].molecule, corpus[j].molecule);
        if (i / cfg.per_class == j / cfg.per_class) {
            within += d;
            ++within_n;
        } else {
            cross += d;
            ++cross_n;
        }
    }
    REQUIRE(within_n > 0);
    REQUIRE(cross_n > 0);
    CHECK(within / within_n < cross / cross_n);
}

TEST_CASE("synthetic pairs within a class are individually identifiable") {
    SyntheticConfig cfg;
    cfg.num_classes = 2;
    cfg.per_class = 10;
    cfg.seed = 5;
    const auto corpus = generate_synthetic_corpus(cfg);
    std::set<std::string> texts;
    for (std::size_t p = 0; p < cfg.per_class; ++p) texts.insert(corpus[p].text);
    CHECK(texts.size() == cfg.per_class);
}

TEST_CASE("holdout split is deterministic and stratified") {
    SyntheticConfig cfg;
    cfg.num_classes = 4;
    cfg.per_class = 6;
    cfg.seed = 13;
    const auto corpus = generate_synthetic_corpus(cfg);
    const CorpusSplit a = split_synthetic_holdout(corpus, 2, 42);
    const CorpusSplit b = split_synthetic_holdout(corpus, 2, 42);
    CHECK(a.holdout.size() == 8);
    CHECK(a.train.size() == 16);
    REQUIRE(a.holdout.size() == b.holdout.size());
    for (std::size_t i = 0; i < a.holdout.size(); ++i) {
        CHECK(a.holdout[i].molecule.id == b.holdout[i].molecule.id);
    }
    std::map<std::string, int> per_class;
    for (const auto& pair : a.holdout) {
        per_class[pair.molecule.id.substr(0, pair.molecule.id.rfind("-p"))]++;
    }
    for (const auto& [cls, count] : per_class) CHECK(count == 2);
}

TEST_CASE("synthetic config contracts") {
    SyntheticConfig cfg;
    cfg.num_classes = 1;
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), std::invalid_argument);
    cfg.num_classes = 2;
    cfg.atoms_range = {5, 3};
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), std::invalid_argument);
}

}  // TEST_SUITE
