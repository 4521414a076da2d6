#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deid/corpus.hpp"
#include "deid/span_eval.hpp"

namespace deid {

enum class Metric { Precision, Recall };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

struct BootstrapConfig {
    int resamples = 2000;
    std::uint64_t seed = 42;
    double ci_level = 0.95;
    double threshold = 0.8;  // span matching threshold fed to span_eval

    void validate() const;
};

struct CiEstimate {
    Category category;
    Metric metric;
    std::optional<double> point;  // full-data value; absent when undefined
    std::optional<double> lower;
    std::optional<double> upper;
};

struct PairedTestResult {
    Category category;
    std::optional<double> delta;  // model B - model A, full data
    double p_value = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
};

inline constexpr double kAlpha = 0.05;

// Linear-interpolation percentile of a sorted sample, q in [0,1].
double percentile(const std::vector<double>& sorted, double q);

// Document-level bootstrap percentile CIs of the span-level metric, one
// estimate per evaluated category.  Resample i draws |docs| documents with
// replacement from the stream keyed by (cfg.seed, i).  Iterations where a
// category's metric is undefined are dropped from that category's pool.
std::vector<CiEstimate> bootstrap_ci(const Corpus& gold, const Corpus& pred, Metric metric,
                                     const BootstrapConfig& cfg);

// Paired sign-flip bootstrap test of metric(predB) - metric(predA), the same
// document draw applied to both models.  Two-sided p = share of resamples
// whose delta sign differs from the full-data delta, zeros counted as flips,
// floored at 1/resamples; Bonferroni over the 9 evaluated categories.
std::vector<PairedTestResult> paired_bootstrap_test(const Corpus& gold, const Corpus& predA,
                                                    const Corpus& predB, Metric metric,
                                                    const BootstrapConfig& cfg);

// "0.92 [0.90--0.93]" style; throws ValidationError on undefined estimates.
std::string format_ci(const CiEstimate& est);

std::string bootstrap_report_csv(const std::vector<CiEstimate>& estimates);
std::string paired_report_csv(const std::vector<PairedTestResult>& results);

}  // namespace deid
