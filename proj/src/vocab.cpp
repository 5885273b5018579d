// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace geomtext {

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> r = {"[PAD]", "[UNK]", "[CLS]", "[BOS]", "[EOS]"};
    return r;
}

bool is_trailing_punct(char c) {
    switch (c) {
        case '.':
        case ',':
        case ';':
        case ':':
        case '(':
        case ')':
            return true;
        default:
            return false;
    }
}

std::string lower_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Simple whitespace split shared with word_count's definition: ASCII plus the
// common Unicode spaces handled byte-wise is unnecessary here because
// tokenization happens after lowering; reuse the molio-level splitter rule by
// scanning for ASCII whitespace and multi-byte spaces via word boundaries.
std::vector<std::string> split_spaceish(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b = static_cast<unsigned char>(s[i]);
        bool space = false;
        std::size_t adv = 1;
        if (b == ' ' || (b >= 0x09 && b <= 0x0D)) {
            space = true;
        } else if (b == 0xC2 && i + 1 < s.size() &&
                   (static_cast<unsigned char>(s[i + 1]) == 0xA0 ||
                    static_cast<unsigned char>(s[i + 1]) == 0x85)) {
            space = true;  // U+00A0 / U+0085
            adv = 2;
        } else if (b == 0xE2 && i + 2 < s.size()) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
            // U+2000..U+200A, U+2028, U+2029, U+202F, U+205F
            if ((b1 == 0x80 && ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 ||
                                b2 == 0xAF)) ||
                (b1 == 0x81 && b2 == 0x9F)) {
                space = true;
                adv = 3;
            }
        } else if (b == 0xE3 && i + 2 < s.size() &&
                   static_cast<unsigned char>(s[i + 1]) == 0x80 &&
                   static_cast<unsigned char>(s[i + 2]) == 0x80) {
            space = true;  // U+3000
            adv = 3;
        } else if (b == 0xE1 && i + 2 < s.size() &&
                   static_cast<unsigned char>(s[i + 1]) == 0x9A &&
                   static_cast<unsigned char>(s[i + 2]) == 0x80) {
            space = true;  // U+1680
            adv = 3;
        }
        if (space) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
            i += adv;
        } else {
            cur.push_back(s[i]);
            ++i;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

Vocab::Vocab() : Vocab(reserved_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
    const auto& reserved = reserved_tokens();
    if (id_to_token_.size() < reserved.size()) {
        throw std::invalid_argument("vocab: missing reserved tokens");
    }
    for (std::size_t i = 0; i < reserved.size(); ++i) {
        if (id_to_token_[i] != reserved[i]) {
            throw std::invalid_argument("vocab: reserved token " + std::to_string(i) +
                                        " must be " + reserved[i]);
        }
    }
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], i).second) {
            throw std::invalid_argument("vocab: duplicate token \"" + id_to_token_[i] + "\"");
        }
    }
}

std::size_t Vocab::id_or_unk(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(std::size_t id) const {
    if (id >= id_to_token_.size()) {
        throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[id];
}

std::vector<std::string> word_tokenize(const std::string& text) {
    std::vector<std::string> out;
    for (const std::string& raw : split_spaceish(lower_ascii(text))) {
        std::string word = raw;
        std::vector<char> peeled;
        while (!word.empty() && is_trailing_punct(word.back())) {
            peeled.push_back(word.back());
            word.pop_back();
        }
        if (!word.empty()) out.push_back(word);
        for (auto it = peeled.rbegin(); it != peeled.rend(); ++it) out.emplace_back(1, *it);
    }
    return out;
}

Vocab build_vocab(const std::vector<GeomTextPair>& pairs, std::size_t min_freq) {
    std::map<std::string, std::size_t> freq;
    for (const auto& pair : pairs) {
        for (const auto& w : word_tokenize(pair.text)) ++freq[w];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [w, n] : freq) {
        if (n >= min_freq) kept.emplace_back(w, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens = reserved_tokens();
    for (auto& [w, n] : kept) tokens.push_back(std::move(w));
    return Vocab(std::move(tokens));
}

std::vector<std::size_t> tokenize(const std::string& text, const Vocab& vocab,
                                  std::size_t max_seq_len) {
    if (max_seq_len < 2) throw std::invalid_argument("tokenize: max_seq_len must be >= 2");
    std::vector<std::size_t> ids{Vocab::kCls};
    for (const auto& w : word_tokenize(text)) {
        if (ids.size() == max_seq_len) break;
        ids.push_back(vocab.id_or_unk(w));
    }
    return ids;
}

std::vector<std::size_t> tokenize_caption(const std::string& text, const Vocab& vocab,
                                          std::size_t max_seq_len) {
    if (max_seq_len < 2) throw std::invalid_argument("tokenize_caption: max_seq_len must be >= 2");
    std::vector<std::size_t> ids{Vocab::kBos};
    for (const auto& w : word_tokenize(text)) {
        if (ids.size() == max_seq_len - 1) break;
        ids.push_back(vocab.id_or_unk(w));
    }
    ids.push_back(Vocab::kEos);
    return ids;
}

std::vector<std::string> strip_special(const std::vector<std::size_t>& ids, const Vocab& vocab) {
    std::vector<std::string> out;
    for (std::size_t id : ids) {
        if (id < Vocab::kNumReserved) continue;
        out.push_back(vocab.token(id));
    }
    return out;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_vocab: cannot open " + path);
    for (const auto& t : vocab.tokens()) out << t << '\n';
    if (!out) throw std::runtime_error("save_vocab: write failed for " + path);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_vocab: cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return Vocab(std::move(tokens));
}

}  // namespace geomtext
