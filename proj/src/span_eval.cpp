#include "deid/span_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "deid/utf8.hpp"

namespace deid {

namespace {

std::size_t overlap_len(const PhiSpan& a, const PhiSpan& b) {
    std::size_t lo = std::max(a.start, b.start);
    std::size_t hi = std::min(a.end, b.end);
    return hi > lo ? hi - lo : 0;
}

std::string format_metric(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return buf;
}

}  // namespace

MatchResult match_spans(const std::vector<PhiSpan>& gold, const std::vector<PhiSpan>& pred,
                        double threshold) {
    if (threshold <= 0.0 || threshold > 1.0)
        throw ValidationError("match threshold must be in (0,1], got " + std::to_string(threshold));

    struct Candidate {
        std::size_t overlap;
        std::size_t gi;
        std::size_t pi;
    };
    std::vector<Candidate> cands;
    for (std::size_t gi = 0; gi < gold.size(); ++gi) {
        for (std::size_t pi = 0; pi < pred.size(); ++pi) {
            if (gold[gi].category != pred[pi].category) continue;
            std::size_t ov = overlap_len(gold[gi], pred[pi]);
            // Coverage is against this single prediction's intersection.
            if (static_cast<double>(ov) + 1e-12 >=
                threshold * static_cast<double>(gold[gi].length()))
                cands.push_back({ov, gi, pi});
        }
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (gold[a.gi].start != gold[b.gi].start) return gold[a.gi].start < gold[b.gi].start;
        return pred[a.pi].start < pred[b.pi].start;
    });

    MatchResult res;
    std::vector<bool> gold_used(gold.size(), false), pred_used(pred.size(), false);
    for (const auto& c : cands) {
        if (gold_used[c.gi] || pred_used[c.pi]) continue;
        gold_used[c.gi] = pred_used[c.pi] = true;
        res.pairs.emplace_back(c.gi, c.pi);
    }
    for (std::size_t gi = 0; gi < gold.size(); ++gi)
        if (!gold_used[gi]) res.unmatched_gold.push_back(gi);
    for (std::size_t pi = 0; pi < pred.size(); ++pi)
        if (!pred_used[pi]) res.unmatched_pred.push_back(pi);
    return res;
}

PRStats count_spans(const std::vector<PhiSpan>& gold, const std::vector<PhiSpan>& pred,
                    double threshold) {
    MatchResult m = match_spans(gold, pred, threshold);
    PRStats stats;
    for (const auto& [gi, pi] : m.pairs) stats[gold[gi].category].tp += 1;
    for (std::size_t gi : m.unmatched_gold) stats[gold[gi].category].fn += 1;
    for (std::size_t pi : m.unmatched_pred) stats[pred[pi].category].fp += 1;
    return stats;
}

namespace {

// Label of each whitespace token: category of the span covering the most of
// its characters, ties to the earlier span start; no cover -> nullopt.
std::vector<std::optional<Category>> token_labels(const std::vector<utf8::Token>& tokens,
                                                  const std::vector<PhiSpan>& spans) {
    std::vector<std::optional<Category>> labels(tokens.size());
    for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
        std::size_t best_ov = 0;
        const PhiSpan* best = nullptr;
        for (const auto& s : spans) {
            PhiSpan tok_span{tokens[ti].start, tokens[ti].end, s.category, std::nullopt};
            std::size_t ov = overlap_len(tok_span, s);
            if (ov == 0) continue;
            if (ov > best_ov || (ov == best_ov && best && s.start < best->start)) {
                best_ov = ov;
                best = &s;
            }
        }
        if (best) labels[ti] = best->category;
    }
    return labels;
}

}  // namespace

PRStats count_tokens(const Document& gold, const Document& pred) {
    auto tokens = utf8::tokenize(gold.text);
    auto gl = token_labels(tokens, gold.spans);
    auto pl = token_labels(tokens, pred.spans);
    PRStats stats;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (gl[i] && pl[i] && *gl[i] == *pl[i]) {
            stats[*gl[i]].tp += 1;
        } else {
            if (gl[i]) stats[*gl[i]].fn += 1;
            if (pl[i]) stats[*pl[i]].fp += 1;
        }
    }
    return stats;
}

std::vector<const Document*> align_documents(const Corpus& gold, const Corpus& pred) {
    std::map<std::string, const Document*> by_id;
    for (const auto& d : pred.documents) by_id[d.doc_id] = &d;

    std::vector<std::string> only_gold, only_pred;
    std::set<std::string> gold_ids;
    for (const auto& d : gold.documents) {
        gold_ids.insert(d.doc_id);
        if (!by_id.count(d.doc_id)) only_gold.push_back(d.doc_id);
    }
    for (const auto& d : pred.documents)
        if (!gold_ids.count(d.doc_id)) only_pred.push_back(d.doc_id);
    if (!only_gold.empty() || !only_pred.empty()) {
        std::ostringstream msg;
        msg << "doc_id mismatch;";
        if (!only_gold.empty()) {
            msg << " only in gold:";
            for (const auto& id : only_gold) msg << ' ' << id;
        }
        if (!only_pred.empty()) {
            msg << " only in predictions:";
            for (const auto& id : only_pred) msg << ' ' << id;
        }
        throw ValidationError(msg.str());
    }

    std::vector<const Document*> aligned;
    aligned.reserve(gold.documents.size());
    for (const auto& d : gold.documents) aligned.push_back(by_id.at(d.doc_id));
    return aligned;
}

std::vector<PRStats> per_document_span_counts(const Corpus& gold, const Corpus& pred,
                                              double threshold) {
    auto aligned = align_documents(gold, pred);
    std::vector<PRStats> out;
    out.reserve(gold.documents.size());
    for (std::size_t i = 0; i < gold.documents.size(); ++i)
        out.push_back(count_spans(gold.documents[i].spans, aligned[i]->spans, threshold));
    return out;
}

std::vector<PRStats> per_document_token_counts(const Corpus& gold, const Corpus& pred) {
    auto aligned = align_documents(gold, pred);
    std::vector<PRStats> out;
    out.reserve(gold.documents.size());
    for (std::size_t i = 0; i < gold.documents.size(); ++i)
        out.push_back(count_tokens(gold.documents[i], *aligned[i]));
    return out;
}

PRStats evaluate_spans(const Corpus& gold, const Corpus& pred, double threshold) {
    PRStats total;
    for (const auto& s : per_document_span_counts(gold, pred, threshold)) total += s;
    return total;
}

PRStats evaluate_tokens(const Corpus& gold, const Corpus& pred) {
    PRStats total;
    for (const auto& s : per_document_token_counts(gold, pred)) total += s;
    return total;
}

std::pair<double, double> micro_average(const PRStats& stats) {
    long tp = 0, fp = 0, fn = 0;
    for (Category c : evaluated_categories()) {
        tp += stats[c].tp;
        fp += stats[c].fp;
        fn += stats[c].fn;
    }
    if (tp + fp == 0 && tp + fn == 0)
        throw ValidationError("micro average undefined: all counts zero");
    double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    return {p, r};
}

std::string report_csv(const PRStats& stats) {
    std::ostringstream out;
    out << "category,precision,recall,support\n";
    for (Category c : evaluated_categories()) {
        const auto& cc = stats[c];
        if (cc.tp == 0 && cc.fp == 0 && cc.fn == 0) continue;
        out << to_string(c) << ',' << format_metric(cc.precision()) << ','
            << format_metric(cc.recall()) << ',' << cc.support() << '\n';
    }
    return out.str();
}

void export_report(const PRStats& stats, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write report " + path);
    out << report_csv(stats);
    if (!out) throw ValidationError("IO failure writing " + path);
}

}  // namespace deid
