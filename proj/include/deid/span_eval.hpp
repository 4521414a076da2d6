#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

// One-to-one span matching result for a single document.
struct MatchResult {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gold index, pred index)
    std::vector<std::size_t> unmatched_gold;                 // false negatives
    std::vector<std::size_t> unmatched_pred;                 // false positives
};

struct CategoryCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;

    long support() const { return tp + fn; }
    std::optional<double> precision() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    std::optional<double> recall() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    CategoryCounts& operator+=(const CategoryCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

// Per-category counts over the full taxonomy; OTHER is carried but excluded
// from aggregates and reports.
struct PRStats {
    std::array<CategoryCounts, kNumCategories> counts{};

    CategoryCounts& operator[](Category c) { return counts[static_cast<std::size_t>(c)]; }
    const CategoryCounts& operator[](Category c) const { return counts[static_cast<std::size_t>(c)]; }
    PRStats& operator+=(const PRStats& o) {
        for (std::size_t i = 0; i < kNumCategories; ++i) counts[i] += o.counts[i];
        return *this;
    }
};

// A prediction matches a gold span only with equal category and interval
// intersection covering >= threshold of the gold span's character length.
// Assignment is greedy by descending overlap, ties by (gold start, pred
// start) ascending, one-to-one.
MatchResult match_spans(const std::vector<PhiSpan>& gold, const std::vector<PhiSpan>& pred,
                        double threshold = 0.8);

// Span-level counts for one gold/pred document pair.
PRStats count_spans(const std::vector<PhiSpan>& gold, const std::vector<PhiSpan>& pred,
                    double threshold);

// Token-level counts for one document: whitespace tokens, each labeled by the
// span covering the most of its characters (tie: earlier span start).
PRStats count_tokens(const Document& gold, const Document& pred);

// Checks that both corpora cover the same doc_id set; throws ValidationError
// listing the symmetric difference.  Returns pred documents reordered to the
// gold corpus order.
std::vector<const Document*> align_documents(const Corpus& gold, const Corpus& pred);

PRStats evaluate_spans(const Corpus& gold, const Corpus& pred, double threshold = 0.8);
PRStats evaluate_tokens(const Corpus& gold, const Corpus& pred);

// Per-document counts in gold corpus order; summing any multiset of entries
// reproduces the evaluation on the corresponding document resample.
std::vector<PRStats> per_document_span_counts(const Corpus& gold, const Corpus& pred,
                                              double threshold = 0.8);
std::vector<PRStats> per_document_token_counts(const Corpus& gold, const Corpus& pred);

// Micro P = sum tp / sum(tp+fp), micro R = sum tp / sum(tp+fn) over the nine
// evaluated categories.  Throws ValidationError on all-zero counts.
std::pair<double, double> micro_average(const PRStats& stats);

// CSV report: header category,precision,recall,support; two-decimal values,
// undefined metrics left empty; alphabetical category order; categories with
// no gold and no predictions omitted.
std::string report_csv(const PRStats& stats);
void export_report(const PRStats& stats, const std::string& path);

}  // namespace deid
