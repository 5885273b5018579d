// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include "geomtext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace geomtext {

namespace {

std::vector<std::vector<double>> unit_rows(const std::vector<std::vector<double>>& embeds,
                                           const char* side) {
    std::vector<std::vector<double>> out = embeds;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double norm2 = 0.0;
        for (double v : out[i]) norm2 += v * v;
        if (norm2 == 0.0) {
            throw std::invalid_argument(std::string("retrieval_eval: degenerate ") + side +
                                        " embedding, zero norm at index " + std::to_string(i));
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : out[i]) v *= inv;
    }
    return out;
}

RetrievalReport rank_direction(const std::vector<std::vector<double>>& queries,
                               const std::vector<std::vector<double>>& candidates,
                               const std::vector<std::size_t>& ks, std::string direction) {
    const std::size_t n = queries.size();
    RetrievalReport report;
    report.direction = std::move(direction);
    report.num_queries = n;
    std::map<std::size_t, std::size_t> hits;
    std::size_t top1 = 0;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < queries[i].size(); ++k) dot += queries[i][k] * candidates[j][k];
            scores[j] = dot;
        }
        // Rank of the true candidate: 1 + better scores + equal scores at
        // lower index (lower index wins ties).
        std::size_t rank = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++rank;
        }
        if (rank == 1) ++top1;
        for (std::size_t k : ks) {
            if (rank <= k) ++hits[k];
        }
    }
    report.accuracy = n ? static_cast<double>(top1) / static_cast<double>(n) : 0.0;
    for (std::size_t k : ks) {
        report.recall_at_k[k] = n ? static_cast<double>(hits[k]) / static_cast<double>(n) : 0.0;
    }
    return report;
}

}  // namespace

std::pair<RetrievalReport, RetrievalReport> retrieval_eval(
    const std::vector<std::vector<double>>& geom_embeds,
    const std::vector<std::vector<double>>& text_embeds, const std::vector<std::size_t>& ks) {
    if (geom_embeds.empty() || geom_embeds.size() != text_embeds.size()) {
        throw std::invalid_argument("retrieval_eval: embedding sets must be non-empty and aligned");
    }
    const std::size_t dim = geom_embeds[0].size();
    for (const auto* set : {&geom_embeds, &text_embeds}) {
        for (const auto& e : *set) {
            if (e.size() != dim || dim == 0) {
                throw std::invalid_argument("retrieval_eval: inconsistent embedding dimensions");
            }
        }
    }
    for (std::size_t k : ks) {
        if (k == 0) throw std::invalid_argument("retrieval_eval: k must be >= 1");
    }
    const auto g_hat = unit_rows(geom_embeds, "molecule");
    const auto t_hat = unit_rows(text_embeds, "text");
    return {rank_direction(g_hat, t_hat, ks, "molecule2text"),
            rank_direction(t_hat, g_hat, ks, "text2molecule")};
}

double mae(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.empty() || predictions.size() != targets.size()) {
        throw std::invalid_argument("mae: lengths differ or empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        sum += std::fabs(predictions[i] - targets[i]);
    }
    return sum / static_cast<double>(predictions.size());
}

namespace {

using Tokens = std::vector<std::string>;

std::map<Tokens, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
    std::map<Tokens, std::size_t> counts;
    if (tokens.size() >= n) {
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            ++counts[Tokens(tokens.begin() + i, tokens.begin() + i + n)];
        }
    }
    return counts;
}

/// Clipped overlap and candidate total for modified n-gram precision.
std::pair<std::size_t, std::size_t> clipped_overlap(const Tokens& candidate,
                                                    const Tokens& reference, std::size_t n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, count] : cand) {
        total += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(count, it->second);
    }
    return {matched, total};
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double f1(double p, double r) { return (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0; }

constexpr double kBleuEpsilon = 1e-9;

}  // namespace

double bleu_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
              int n) {
    if (n < 1) throw std::invalid_argument("bleu_n: n must be >= 1");
    const std::size_t c = candidate.size();
    const std::size_t r = reference.size();
    if (c == 0) return 0.0;

    double log_sum = 0.0;
    for (int i = 1; i <= n; ++i) {
        const auto [matched, total] = clipped_overlap(candidate, reference,
                                                      static_cast<std::size_t>(i));
        double precision;
        if (total == 0) {
            precision = kBleuEpsilon;
        } else if (matched == 0) {
            precision = kBleuEpsilon / static_cast<double>(total);
        } else {
            precision = static_cast<double>(matched) / static_cast<double>(total);
        }
        log_sum += std::log(precision);
    }
    const double geo_mean = std::exp(log_sum / static_cast<double>(n));
    const double bp = std::min(
        1.0, std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)));
    return bp * geo_mean;
}

RougeScores rouge(const std::vector<std::string>& candidate,
                  const std::vector<std::string>& reference) {
    const std::size_t c = candidate.size();
    const std::size_t r = reference.size();
    RougeScores scores;
    if (c == 0 && r == 0) {
        scores.rouge1 = scores.rouge2 = scores.rougeL = 1.0;
        return scores;
    }
    if (c == 0 || r == 0) return scores;

    for (std::size_t n : {std::size_t{1}, std::size_t{2}}) {
        const auto [matched, cand_total] = clipped_overlap(candidate, reference, n);
        const std::size_t ref_total = (r >= n) ? r - n + 1 : 0;
        const double p = cand_total ? static_cast<double>(matched) / cand_total : 0.0;
        const double rr = ref_total ? static_cast<double>(matched) / ref_total : 0.0;
        (n == 1 ? scores.rouge1 : scores.rouge2) = f1(p, rr);
    }

    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    scores.rougeL = f1(lcs / static_cast<double>(c), lcs / static_cast<double>(r));
    return scores;
}

CaptionScores caption_scores(const std::vector<std::vector<std::string>>& candidates,
                             const std::vector<std::vector<std::string>>& references) {
    if (candidates.empty() || candidates.size() != references.size()) {
        throw std::invalid_argument("caption_scores: candidate and reference counts differ");
    }
    CaptionScores out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.bleu2 += bleu_n(candidates[i], references[i], 2);
        out.bleu4 += bleu_n(candidates[i], references[i], 4);
        const RougeScores rs = rouge(candidates[i], references[i]);
        out.rouge1 += rs.rouge1;
        out.rouge2 += rs.rouge2;
        out.rougeL += rs.rougeL;
    }
    const double n = static_cast<double>(candidates.size());
    out.bleu2 /= n;
    out.bleu4 /= n;
    out.rouge1 /= n;
    out.rouge2 /= n;
    out.rougeL /= n;
    return out;
}

}  // namespace geomtext
