// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

namespace geomtext {

// ---- retrieval ---------------------------------------------------------------

struct RetrievalReport {
    std::string direction;  // "molecule2text" or "text2molecule"
    double accuracy = 0.0;
    std::map<std::size_t, double> recall_at_k;
    std::size_t num_queries = 0;
};

/**
 * Bidirectional zero-shot retrieval over index-aligned embedding sets.
 * Candidates are ranked by cosine similarity, descending, ties broken by
 * lower index; accuracy is the fraction of queries whose true counterpart
 * ranks first, recall@k the fraction ranked within the top k.
 */
std::pair<RetrievalReport, RetrievalReport> retrieval_eval(
    const std::vector<std::vector<double>>& geom_embeds,
    const std::vector<std::vector<double>>& text_embeds, const std::vector<std::size_t>& ks);

// ---- regression -----------------------------------------------------------------

double mae(const std::vector<double>& predictions, const std::vector<double>& targets);

// ---- captioning ------------------------------------------------------------------

/**
 * Sentence-level smoothed BLEU-n against a single reference: geometric mean
 * of clipped modified i-gram precisions (a zero count is replaced by 1e-9 in
 * the numerator), times the brevity penalty min(1, e^(1 - r/c)). An empty
 * candidate scores 0.
 */
double bleu_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
              int n);

struct RougeScores {
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
};

/// ROUGE-1/2 F1 from clipped n-gram overlap and ROUGE-L F1 from the longest
/// common subsequence. Empty candidate against a non-empty reference is 0.
RougeScores rouge(const std::vector<std::string>& candidate,
                  const std::vector<std::string>& reference);

struct CaptionScores {
    double bleu2 = 0.0;
    double bleu4 = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
};

/// Corpus scores: mean of sentence-level scores over aligned candidate and
/// reference lists.
CaptionScores caption_scores(const std::vector<std::vector<std::string>>& candidates,
                             const std::vector<std::vector<std::string>>& references);

}  // namespace geomtext
