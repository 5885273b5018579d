// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace geomtext {

/// Atom types (atomic numbers) plus Cartesian coordinates in Angstrom.
struct Molecule {
    std::vector<int> atoms;      // atomic numbers, 1..118
    std::vector<double> coords;  // row-major N x 3
    std::string id;

    std::size_t natoms() const { return atoms.size(); }
    /// Throws std::invalid_argument when the type invariants are violated.
    void validate() const;
};

enum class PairSource { PubchemqcLike, GeomLike, Synthetic };

std::string to_string(PairSource s);
PairSource pair_source_from_string(const std::string& s);

/// A molecule joined with its text description: one corpus record.
struct GeomTextPair {
    Molecule molecule;
    std::string text;
    PairSource source = PairSource::Synthetic;
};

struct CorpusStats {
    std::size_t quantity = 0;
    double avg_heavy_atoms = 0.0;  // atoms with atomic number > 1
    double avg_words = 0.0;        // whitespace-delimited tokens
};

// ---- element symbols --------------------------------------------------------

/// Case-insensitive symbol -> atomic number; empty when unknown.
std::optional<int> element_number(const std::string& symbol);
/// Atomic number -> canonical symbol; throws for numbers outside 1..118.
const std::string& element_symbol(int atomic_number);

// ---- XYZ --------------------------------------------------------------------

/// Parses standard XYZ text: count line, comment line (used as id when
/// non-empty), then one "Symbol x y z" line per atom. Parse errors carry the
/// 1-based line number.
Molecule parse_xyz(const std::string& text);
std::string write_xyz(const Molecule& mol);

// ---- pair corpus (one JSON object per line) ----------------------------------

struct RecordError {
    std::size_t line = 0;
    std::string message;
};

/// Reads a pair corpus. In strict mode the first malformed record throws;
/// otherwise bad records are skipped and reported through `skipped`.
std::vector<GeomTextPair> load_pairs(const std::string& path, bool strict = true,
                                     std::vector<RecordError>* skipped = nullptr);
/// Canonical writer: fields id, atoms, coords, text, source in that order,
/// shortest round-trip float formatting. write then load is the identity.
void write_pairs(const std::vector<GeomTextPair>& pairs, const std::string& path);

// ---- identifier join ----------------------------------------------------------

struct JoinReport {
    std::vector<std::string> unmatched_geometries;
    std::vector<std::string> unmatched_annotations;
    std::size_t duplicate_geometries = 0;   // entries beyond the per-id cap
    std::size_t duplicate_annotations = 0;  // repeated annotation ids (first kept)
};

/// Joins geometries with (id, text) annotations on exact id equality. The
/// output covers exactly the id intersection; `max_conformers_per_id` keeps
/// up to that many geometries per id (first occurrences win).
std::vector<GeomTextPair> join_by_id(const std::vector<Molecule>& geometries,
                                     const std::vector<std::pair<std::string, std::string>>& annotations,
                                     JoinReport* report = nullptr,
                                     std::size_t max_conformers_per_id = 1);

/// Whitespace-token count used for the corpus statistics (Unicode whitespace).
std::size_t word_count(const std::string& text);

/// Quantity and per-corpus averages; throws on an empty corpus.
CorpusStats corpus_stats(const std::vector<GeomTextPair>& pairs);

// ---- synthetic corpus ----------------------------------------------------------

/**
 * Synthetic geometry-text corpus for experiments. Every class has a random
 * base point cloud and a private word vocabulary. Each pair applies a
 * per-pair variant transform (a named size scaling plus a tagged extra atom,
 * both spelled out in the text) and Gaussian coordinate jitter on top, so
 * pairs stay identifiable individually while same-class pairs remain closer
 * than cross-class ones. `distinct_variants=false` turns the variant
 * transform off, leaving pure jitter around the class base.
 */
struct SyntheticConfig {
    std::size_t num_classes = 2;
    std::size_t per_class = 2;
    std::pair<std::size_t, std::size_t> atoms_range{8, 14};
    std::size_t vocab_per_class = 6;
    double jitter_sigma = 0.02;
    std::uint64_t seed = 0;
    bool distinct_variants = true;
};

std::vector<GeomTextPair> generate_synthetic_corpus(const SyntheticConfig& cfg);

/// Deterministic holdout split: per class, `per_class_holdout` pairs chosen
/// by a seeded shuffle of that class's pair list.
struct CorpusSplit {
    std::vector<GeomTextPair> train;
    std::vector<GeomTextPair> holdout;
};
CorpusSplit split_synthetic_holdout(const std::vector<GeomTextPair>& pairs,
                                    std::size_t per_class_holdout, std::uint64_t seed);

}  // namespace geomtext
