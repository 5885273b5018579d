// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "geomtext/molio.hpp"

namespace geomtext {

/**
 * Word-level text vocabulary. Reserved tokens occupy the first ids in fixed
 * order; the remaining ids are dense, assigned by descending corpus frequency
 * with lexicographic tie-breaking.
 */
class Vocab {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kCls = 2;
    static constexpr std::size_t kBos = 3;
    static constexpr std::size_t kEos = 4;
    static constexpr std::size_t kNumReserved = 5;

    Vocab();  // reserved tokens only
    explicit Vocab(std::vector<std::string> tokens);

    std::size_t size() const { return id_to_token_.size(); }
    std::size_t id_or_unk(const std::string& token) const;
    const std::string& token(std::size_t id) const;
    bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, std::size_t> token_to_id_;
};

/// Lowercases and splits on Unicode whitespace; trailing punctuation from
/// {.,;:()} is peeled off as separate tokens. Deterministic and idempotent
/// on already-lowercased text.
std::vector<std::string> word_tokenize(const std::string& text);

/// Builds a vocabulary over the corpus texts; words seen fewer than
/// `min_freq` times map to [UNK] at tokenize time.
Vocab build_vocab(const std::vector<GeomTextPair>& pairs, std::size_t min_freq = 1);

/// Encoder input ids: word ids truncated to max_seq_len - 1, prefixed [CLS].
std::vector<std::size_t> tokenize(const std::string& text, const Vocab& vocab,
                                  std::size_t max_seq_len);

/// Caption target ids: [BOS] words... [EOS], truncated to max_seq_len.
std::vector<std::size_t> tokenize_caption(const std::string& text, const Vocab& vocab,
                                          std::size_t max_seq_len);

/// Joins non-reserved token ids back into surface text (for metric input).
std::vector<std::string> strip_special(const std::vector<std::size_t>& ids, const Vocab& vocab);

/// Vocab file: one token per line, line number = id, reserved tokens first.
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace geomtext
