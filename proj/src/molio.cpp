// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/molio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "geomtext/rng.hpp"

namespace geomtext {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::array<std::string, 118> kElementSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

const std::unordered_map<std::string, int>& symbol_table() {
    static const std::unordered_map<std::string, int> table = [] {
        std::unordered_map<std::string, int> t;
        for (std::size_t i = 0; i < kElementSymbols.size(); ++i) {
            t.emplace(lower(kElementSymbols[i]), static_cast<int>(i + 1));
        }
        return t;
    }();
    return table;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
    throw std::runtime_error("xyz parse error at line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double parse_real(const std::string& tok, std::size_t line) {
    std::size_t consumed = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &consumed);
    } catch (const std::exception&) {
        parse_fail(line, "malformed number \"" + tok + "\"");
    }
    if (consumed != tok.size() || !std::isfinite(v)) {
        parse_fail(line, "malformed number \"" + tok + "\"");
    }
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09:
        case 0x0A:
        case 0x0B:
        case 0x0C:
        case 0x0D:
        case 0x20:
        case 0x85:
        case 0xA0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Decodes the next UTF-8 codepoint; malformed bytes pass through as Latin-1.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    auto cont = [&](std::size_t k) {
        return k < s.size() && (byte(k) & 0xC0u) == 0x80u;
    };
    if ((b0 & 0xE0u) == 0xC0u && cont(i + 1)) {
        const char32_t cp = ((b0 & 0x1Fu) << 6) | (byte(i + 1) & 0x3Fu);
        i += 2;
        return cp;
    }
    if ((b0 & 0xF0u) == 0xE0u && cont(i + 1) && cont(i + 2)) {
        const char32_t cp =
            ((b0 & 0x0Fu) << 12) | ((byte(i + 1) & 0x3Fu) << 6) | (byte(i + 2) & 0x3Fu);
        i += 3;
        return cp;
    }
    if ((b0 & 0xF8u) == 0xF0u && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        const char32_t cp = ((b0 & 0x07u) << 18) | ((byte(i + 1) & 0x3Fu) << 12) |
                            ((byte(i + 2) & 0x3Fu) << 6) | (byte(i + 3) & 0x3Fu);
        i += 4;
        return cp;
    }
    ++i;
    return b0;
}

bool blank_after_trim(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_unicode_space(next_codepoint(text, i))) return false;
    }
    return true;
}

}  // namespace

void Molecule::validate() const {
    if (atoms.empty()) throw std::invalid_argument("molecule: no atoms");
    if (coords.size() != atoms.size() * 3) {
        throw std::invalid_argument("molecule: " + std::to_string(atoms.size()) + " atoms but " +
                                    std::to_string(coords.size()) + " coordinate values");
    }
    for (int z : atoms) {
        if (z < 1 || z > 118) {
            throw std::invalid_argument("molecule: atomic number " + std::to_string(z) +
                                        " outside 1..118");
        }
    }
    for (double v : coords) {
        if (!std::isfinite(v)) throw std::invalid_argument("molecule: non-finite coordinate");
    }
}

std::string to_string(PairSource s) {
    switch (s) {
        case PairSource::PubchemqcLike: return "pubchemqc-like";
        case PairSource::GeomLike: return "geom-like";
        case PairSource::Synthetic: return "synthetic";
    }
    throw std::invalid_argument("pair source: bad enum value");
}

PairSource pair_source_from_string(const std::string& s) {
    if (s == "pubchemqc-like") return PairSource::PubchemqcLike;
    if (s == "geom-like") return PairSource::GeomLike;
    if (s == "synthetic") return PairSource::Synthetic;
    throw std::invalid_argument("pair source: unknown value \"" + s + "\"");
}

std::optional<int> element_number(const std::string& symbol) {
    auto it = symbol_table().find(lower(symbol));
    if (it == symbol_table().end()) return std::nullopt;
    return it->second;
}

const std::string& element_symbol(int atomic_number) {
    if (atomic_number < 1 || atomic_number > 118) {
        throw std::invalid_argument("element_symbol: atomic number " +
                                    std::to_string(atomic_number) + " outside 1..118");
    }
    return kElementSymbols[static_cast<std::size_t>(atomic_number - 1)];
}

Molecule parse_xyz(const std::string& text) {
    std::vector<std::string> lines;
    {
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
    }
    if (lines.empty()) parse_fail(1, "empty input");

    const auto count_tokens = split_ws(lines[0]);
    std::size_t expected = 0;
    if (count_tokens.size() != 1) parse_fail(1, "expected atom count");
    try {
        const long long n = std::stoll(count_tokens[0]);
        if (n < 1) parse_fail(1, "atom count must be positive");
        expected = static_cast<std::size_t>(n);
    } catch (const std::invalid_argument&) {
        parse_fail(1, "expected atom count, got \"" + lines[0] + "\"");
    }
    if (lines.size() < 2) parse_fail(2, "missing comment line");

    Molecule mol;
    mol.id = trim(lines[1]);
    for (std::size_t li = 2; li < lines.size(); ++li) {
        const auto toks = split_ws(lines[li]);
        if (toks.empty()) continue;  // trailing blank lines are tolerated
        if (mol.atoms.size() == expected) {
            parse_fail(li + 1, "expected " + std::to_string(expected) + " atoms, found more");
        }
        if (toks.size() < 4) parse_fail(li + 1, "expected \"symbol x y z\"");
        const auto z = element_number(toks[0]);
        if (!z) parse_fail(li + 1, "unknown element symbol \"" + toks[0] + "\"");
        mol.atoms.push_back(*z);
        for (int k = 1; k <= 3; ++k) mol.coords.push_back(parse_real(toks[k], li + 1));
    }
    if (mol.atoms.size() != expected) {
        parse_fail(lines.size(), "expected " + std::to_string(expected) + " atoms, found " +
                                     std::to_string(mol.atoms.size()));
    }
    mol.validate();
    return mol;
}

std::string write_xyz(const Molecule& mol) {
    mol.validate();
    std::ostringstream os;
    os << mol.natoms() << '\n' << mol.id << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < mol.natoms(); ++i) {
        os << element_symbol(mol.atoms[i]) << ' ' << mol.coords[3 * i] << ' '
           << mol.coords[3 * i + 1] << ' ' << mol.coords[3 * i + 2] << '\n';
    }
    return os.str();
}

namespace {

GeomTextPair pair_from_json(const ordered_json& j) {
    for (const char* field : {"id", "atoms", "coords", "text", "source"}) {
        if (!j.contains(field)) {
            throw std::runtime_error(std::string("missing field \"") + field + "\"");
        }
    }
    GeomTextPair pair;
    pair.molecule.id = j.at("id").get<std::string>();
    pair.molecule.atoms = j.at("atoms").get<std::vector<int>>();
    pair.molecule.coords = j.at("coords").get<std::vector<double>>();
    if (pair.molecule.coords.size() % 3 != 0) {
        throw std::runtime_error("coords length " + std::to_string(pair.molecule.coords.size()) +
                                 " not divisible by 3");
    }
    if (pair.molecule.coords.size() != pair.molecule.atoms.size() * 3) {
        throw std::runtime_error("coords rows " + std::to_string(pair.molecule.coords.size() / 3) +
                                 " do not match " + std::to_string(pair.molecule.atoms.size()) +
                                 " atoms");
    }
    pair.molecule.validate();
    pair.text = j.at("text").get<std::string>();
    if (blank_after_trim(pair.text)) throw std::runtime_error("empty text");
    pair.source = pair_source_from_string(j.at("source").get<std::string>());
    return pair;
}

}  // namespace

std::vector<GeomTextPair> load_pairs(const std::string& path, bool strict,
                                     std::vector<RecordError>* skipped) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_pairs: cannot open " + path);
    std::vector<GeomTextPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = ordered_json::parse(line);
            pairs.push_back(pair_from_json(j));
        } catch (const std::exception& e) {
            if (strict) {
                throw std::runtime_error(path + " line " + std::to_string(lineno) + ": " +
                                         e.what());
            }
            if (skipped) skipped->push_back({lineno, e.what()});
        }
    }
    return pairs;
}

void write_pairs(const std::vector<GeomTextPair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_pairs: cannot open " + path);
    for (const auto& pair : pairs) {
        pair.molecule.validate();
        ordered_json j;
        j["id"] = pair.molecule.id;
        j["atoms"] = pair.molecule.atoms;
        j["coords"] = pair.molecule.coords;
        j["text"] = pair.text;
        j["source"] = to_string(pair.source);
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write_pairs: write failed for " + path);
}

std::vector<GeomTextPair> join_by_id(
    const std::vector<Molecule>& geometries,
    const std::vector<std::pair<std::string, std::string>>& annotations, JoinReport* report,
    std::size_t max_conformers_per_id) {
    if (max_conformers_per_id == 0) {
        throw std::invalid_argument("join_by_id: max_conformers_per_id must be positive");
    }
    JoinReport local;
    JoinReport& rep = report ? *report : local;

    std::unordered_map<std::string, std::string> text_by_id;
    std::vector<std::string> annotation_order;
    for (const auto& [id, text] : annotations) {
        if (text_by_id.emplace(id, text).second) {
            annotation_order.push_back(id);
        } else {
            ++rep.duplicate_annotations;
        }
    }

    std::unordered_map<std::string, std::size_t> kept_per_id;
    std::unordered_set<std::string> geometry_ids;
    std::set<std::string> unmatched_geoms_seen;
    std::vector<GeomTextPair> out;
    for (const auto& mol : geometries) {
        geometry_ids.insert(mol.id);
        auto it = text_by_id.find(mol.id);
        if (it == text_by_id.end()) {
            if (unmatched_geoms_seen.insert(mol.id).second) {
                rep.unmatched_geometries.push_back(mol.id);
            }
            continue;
        }
        if (++kept_per_id[mol.id] > max_conformers_per_id) {
            ++rep.duplicate_geometries;
            continue;
        }
        out.push_back({mol, it->second, PairSource::PubchemqcLike});
    }
    for (const auto& id : annotation_order) {
        if (!geometry_ids.count(id)) rep.unmatched_annotations.push_back(id);
    }
    return out;
}

std::size_t word_count(const std::string& text) {
    std::size_t count = 0;
    bool in_word = false;
    std::size_t i = 0;
    while (i < text.size()) {
        const bool space = is_unicode_space(next_codepoint(text, i));
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

CorpusStats corpus_stats(const std::vector<GeomTextPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
    CorpusStats stats;
    stats.quantity = pairs.size();
    double heavy = 0.0, words = 0.0;
    for (const auto& pair : pairs) {
        for (int z : pair.molecule.atoms) heavy += (z > 1) ? 1.0 : 0.0;
        words += static_cast<double>(word_count(pair.text));
    }
    stats.avg_heavy_atoms = heavy / static_cast<double>(pairs.size());
    stats.avg_words = words / static_cast<double>(pairs.size());
    return stats;
}

namespace {

// Variant factors shared across classes. A size word names a global distance
// scaling, a tag word names an extra atom's element; together they make every
// pair within a class individually identifiable from its geometry.
constexpr std::size_t kSizeLevels = 4;
const std::array<int, 13> kTagElements = {35, 53, 5, 34, 14, 33, 32, 52, 3, 11, 19, 30, 13};
const std::array<std::string, 13> kTagWords = {
    "bromine", "iodine",    "boron",     "selenium", "silicon", "arsenic", "germanium",
    "tellurium", "lithium", "sodium",    "potassium", "zinc",    "aluminium"};
const std::array<std::string, 12> kSyllables = {"ba", "de", "ki", "lo", "mu", "na",
                                                "po", "ra", "su", "ti", "vo", "ze"};
const std::array<int, 7> kBasePalette = {6, 7, 8, 9, 15, 16, 17};

std::string make_word(RngStream& rng, std::unordered_set<std::string>& used) {
    for (;;) {
        std::string w;
        for (int k = 0; k < 3; ++k) w += kSyllables[rng.uniform_index(kSyllables.size())];
        if (used.insert(w).second) return w;
    }
}

}  // namespace

std::vector<GeomTextPair> generate_synthetic_corpus(const SyntheticConfig& cfg) {
    if (cfg.num_classes < 2 || cfg.per_class < 2) {
        throw std::invalid_argument("generate_synthetic_corpus: need >= 2 classes and >= 2 pairs");
    }
    if (cfg.atoms_range.first < 1 || cfg.atoms_range.second < cfg.atoms_range.first) {
        throw std::invalid_argument("generate_synthetic_corpus: bad atoms_range");
    }
    if (cfg.vocab_per_class < 2) {
        throw std::invalid_argument("generate_synthetic_corpus: vocab_per_class must be >= 2");
    }

    std::vector<GeomTextPair> out;
    out.reserve(cfg.num_classes * cfg.per_class);
    std::unordered_set<std::string> used_words;
    for (const auto& w : kTagWords) used_words.insert(w);

    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        RngStream class_rng(derive_seed(cfg.seed, "synth-class", c));
        const std::size_t natoms =
            cfg.atoms_range.first +
            class_rng.uniform_index(cfg.atoms_range.second - cfg.atoms_range.first + 1);
        std::vector<int> base_atoms(natoms);
        for (int& z : base_atoms) z = kBasePalette[class_rng.uniform_index(kBasePalette.size())];

        const double box = 1.7 * std::cbrt(static_cast<double>(natoms));
        std::vector<double> base_coords(natoms * 3);
        for (double& v : base_coords) v = class_rng.uniform(-box, box);
        double max_radius = 0.0;
        for (std::size_t i = 0; i < natoms; ++i) {
            const double r2 = base_coords[3 * i] * base_coords[3 * i] +
                              base_coords[3 * i + 1] * base_coords[3 * i + 1] +
                              base_coords[3 * i + 2] * base_coords[3 * i + 2];
            max_radius = std::max(max_radius, std::sqrt(r2));
        }

        std::vector<std::string> class_words(cfg.vocab_per_class);
        for (auto& w : class_words) w = make_word(class_rng, used_words);

        double dir[3] = {class_rng.gaussian(), class_rng.gaussian(), class_rng.gaussian()};
        const double dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        for (double& v : dir) v /= (dn > 0.0 ? dn : 1.0);

        for (std::size_t p = 0; p < cfg.per_class; ++p) {
            RngStream rng(derive_seed(cfg.seed, "synth-pair", c, p));
            GeomTextPair pair;
            pair.source = PairSource::Synthetic;
            pair.molecule.id = "syn-c" + std::to_string(c) + "-p" + std::to_string(p);
            pair.molecule.atoms = base_atoms;
            pair.molecule.coords = base_coords;

            std::string variant_words;
            if (cfg.distinct_variants) {
                const std::size_t v = p % (kSizeLevels * kTagElements.size());
                const std::size_t size_level = v % kSizeLevels;
                const std::size_t tag = v / kSizeLevels;
                const double s = 1.0 + 0.3 * static_cast<double>(size_level);
                for (double& x : pair.molecule.coords) x *= s;
                const double tag_radius =
                    max_radius * s + 2.0 + 0.5 * static_cast<double>(tag);
                pair.molecule.atoms.push_back(kTagElements[tag]);
                for (int k = 0; k < 3; ++k) pair.molecule.coords.push_back(dir[k] * tag_radius);
                variant_words = " of size" + std::to_string(size_level) + " tagged " +
                                kTagWords[tag];
            }

            for (double& x : pair.molecule.coords) x += cfg.jitter_sigma * rng.gaussian();

            const std::size_t w1 = rng.uniform_index(class_words.size());
            std::size_t w2 = rng.uniform_index(class_words.size() - 1);
            if (w2 >= w1) ++w2;
            pair.text = "the molecule is a " + class_words[w1] + " " + class_words[w2] +
                        " compound" + variant_words;
            out.push_back(std::move(pair));
        }
    }
    return out;
}

CorpusSplit split_synthetic_holdout(const std::vector<GeomTextPair>& pairs,
                                    std::size_t per_class_holdout, std::uint64_t seed) {
    // Class key: id prefix before the "-p" suffix; ids without the pattern
    // form singleton groups.
    auto class_key = [](const std::string& id) {
        const auto pos = id.rfind("-p");
        return pos == std::string::npos ? id : id.substr(0, pos);
    };

    std::vector<std::string> class_order;
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string key = class_key(pairs[i].molecule.id);
        if (!by_class.count(key)) class_order.push_back(key);
        by_class[key].push_back(i);
    }

    std::vector<bool> held(pairs.size(), false);
    for (const auto& key : class_order) {
        auto& members = by_class[key];
        RngStream rng(derive_seed(seed, "holdout", fnv1a64(key)));
        rng.shuffle(members);
        const std::size_t take = std::min(per_class_holdout, members.size());
        for (std::size_t i = 0; i < take; ++i) held[members[i]] = true;
    }

    CorpusSplit split;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        (held[i] ? split.holdout : split.train).push_back(pairs[i]);
    }
    return split;
}

}  // namespace geomtext
