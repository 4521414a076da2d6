#include "deid/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "deid/rng.hpp"

namespace deid {

std::string_view to_string(Metric m) {
    return m == Metric::Precision ? "precision" : "recall";
}

Metric metric_from_string(std::string_view s) {
    if (s == "precision") return Metric::Precision;
    if (s == "recall") return Metric::Recall;
    throw ValidationError("unknown metric \"" + std::string(s) + "\"");
}

void BootstrapConfig::validate() const {
    if (resamples < 1) throw ValidationError("resamples must be >= 1");
    if (ci_level <= 0.0 || ci_level >= 1.0) throw ValidationError("ci_level must be in (0,1)");
    if (threshold <= 0.0 || threshold > 1.0) throw ValidationError("threshold must be in (0,1]");
}

double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ValidationError("percentile of empty sample");
    if (sorted.size() == 1) return sorted.front();
    double h = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

std::optional<double> metric_value(const CategoryCounts& cc, Metric m) {
    return m == Metric::Precision ? cc.precision() : cc.recall();
}

PRStats sum_resample(const std::vector<PRStats>& per_doc, const std::vector<std::size_t>& idx) {
    PRStats total;
    for (std::size_t i : idx) total += per_doc[i];
    return total;
}

std::vector<std::size_t> draw_documents(std::uint64_t seed, std::uint64_t iter, std::size_t n) {
    auto rng = keyed_rng(seed, iter);
    std::vector<std::size_t> idx(n);
    for (auto& v : idx) v = draw_index(rng, n);
    return idx;
}

std::string fmt6(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

}  // namespace

std::vector<CiEstimate> bootstrap_ci(const Corpus& gold, const Corpus& pred, Metric metric,
                                     const BootstrapConfig& cfg) {
    cfg.validate();
    if (gold.documents.empty()) throw ValidationError("bootstrap over zero documents");
    auto per_doc = per_document_span_counts(gold, pred, cfg.threshold);
    std::size_t n = per_doc.size();

    PRStats full;
    for (const auto& s : per_doc) full += s;

    std::array<std::vector<double>, kNumEvaluated> pools;
    for (int it = 0; it < cfg.resamples; ++it) {
        PRStats s = sum_resample(per_doc, draw_documents(cfg.seed, static_cast<std::uint64_t>(it), n));
        for (std::size_t ci = 0; ci < kNumEvaluated; ++ci) {
            auto v = metric_value(s[evaluated_categories()[ci]], metric);
            if (v) pools[ci].push_back(*v);
        }
    }

    double tail = (1.0 - cfg.ci_level) / 2.0;
    std::vector<CiEstimate> out;
    for (std::size_t ci = 0; ci < kNumEvaluated; ++ci) {
        Category cat = evaluated_categories()[ci];
        CiEstimate est;
        est.category = cat;
        est.metric = metric;
        est.point = metric_value(full[cat], metric);
        if (!pools[ci].empty()) {
            std::sort(pools[ci].begin(), pools[ci].end());
            est.lower = percentile(pools[ci], tail);
            est.upper = percentile(pools[ci], 1.0 - tail);
        }
        out.push_back(est);
    }
    return out;
}

std::vector<PairedTestResult> paired_bootstrap_test(const Corpus& gold, const Corpus& predA,
                                                    const Corpus& predB, Metric metric,
                                                    const BootstrapConfig& cfg) {
    cfg.validate();
    if (gold.documents.empty()) throw ValidationError("bootstrap over zero documents");
    auto per_doc_a = per_document_span_counts(gold, predA, cfg.threshold);
    auto per_doc_b = per_document_span_counts(gold, predB, cfg.threshold);
    std::size_t n = per_doc_a.size();

    PRStats full_a, full_b;
    for (const auto& s : per_doc_a) full_a += s;
    for (const auto& s : per_doc_b) full_b += s;

    std::array<long, kNumEvaluated> flips{};
    std::array<long, kNumEvaluated> valid{};
    for (int it = 0; it < cfg.resamples; ++it) {
        // One document draw shared by both models.
        auto idx = draw_documents(cfg.seed, static_cast<std::uint64_t>(it), n);
        PRStats sa = sum_resample(per_doc_a, idx);
        PRStats sb = sum_resample(per_doc_b, idx);
        for (std::size_t ci = 0; ci < kNumEvaluated; ++ci) {
            Category cat = evaluated_categories()[ci];
            auto va = metric_value(sa[cat], metric);
            auto vb = metric_value(sb[cat], metric);
            auto fa = metric_value(full_a[cat], metric);
            auto fb = metric_value(full_b[cat], metric);
            if (!va || !vb || !fa || !fb) continue;
            valid[ci] += 1;
            double d = *vb - *va;
            double full_d = *fb - *fa;
            // Zero delta counts as a sign change.
            bool flip = d == 0.0 || full_d == 0.0 || (d > 0.0) != (full_d > 0.0);
            if (flip) flips[ci] += 1;
        }
    }

    std::vector<PairedTestResult> out;
    for (std::size_t ci = 0; ci < kNumEvaluated; ++ci) {
        Category cat = evaluated_categories()[ci];
        PairedTestResult r;
        r.category = cat;
        auto fa = metric_value(full_a[cat], metric);
        auto fb = metric_value(full_b[cat], metric);
        if (fa && fb) r.delta = *fb - *fa;
        double floor_p = 1.0 / static_cast<double>(cfg.resamples);
        if (valid[ci] > 0) {
            r.p_value = std::max(static_cast<double>(flips[ci]) / static_cast<double>(valid[ci]),
                                 floor_p);
        } else {
            r.p_value = 1.0;
        }
        r.p_adjusted = std::min(1.0, r.p_value * static_cast<double>(kNumEvaluated));
        r.significant = r.delta.has_value() && r.p_adjusted < kAlpha;
        out.push_back(r);
    }
    return out;
}

std::string format_ci(const CiEstimate& est) {
    if (!est.point || !est.lower || !est.upper)
        throw ValidationError("cannot format undefined CI estimate for category " +
                              std::string(to_string(est.category)));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f [%.2f--%.2f]", *est.point, *est.lower, *est.upper);
    return buf;
}

std::string bootstrap_report_csv(const std::vector<CiEstimate>& estimates) {
    std::ostringstream out;
    out << "category,metric,point,lower,upper,formatted\n";
    for (const auto& e : estimates) {
        out << to_string(e.category) << ',' << to_string(e.metric) << ',' << fmt6(e.point) << ','
            << fmt6(e.lower) << ',' << fmt6(e.upper) << ',';
        if (e.point && e.lower && e.upper) out << format_ci(e);
        out << '\n';
    }
    return out.str();
}

std::string paired_report_csv(const std::vector<PairedTestResult>& results) {
    std::ostringstream out;
    out << "category,delta,p_value,p_adjusted,significant\n";
    for (const auto& r : results) {
        out << to_string(r.category) << ',' << fmt6(r.delta) << ',' << fmt6(r.p_value) << ','
            << fmt6(r.p_adjusted) << ',' << (r.significant ? "true" : "false") << '\n';
    }
    return out.str();
}

}  // namespace deid
