#include <doctest.h>

#include <string>
#include <vector>

#include "deid/rng.hpp"
#include "deid/stats.hpp"

using namespace deid;

namespace {

Document doc_with(const std::string& id, const std::string& text, std::vector<PhiSpan> spans) {
    Document d;
    d.doc_id = id;
    d.text = text;
    d.spans = std::move(spans);
    return d;
}

// Synthetic corpus: n documents, each with one PATIENT and one DATE gold
// span; predictions hit the PATIENT span on even documents only.
void build_corpora(int n, Corpus& gold, Corpus& predA, Corpus& predB) {
    for (int i = 0; i < n; ++i) {
        std::string id = "d" + std::to_string(i);
        std::string text(40, 'x');
        gold.documents.push_back(doc_with(
            id, text, {{0, 10, Category::PATIENT, {}}, {20, 30, Category::DATE, {}}}));
        std::vector<PhiSpan> a;
        if (i % 2 == 0) a.push_back({0, 10, Category::PATIENT, {}});
        predA.documents.push_back(doc_with(id, text, a));
        predB.documents.push_back(doc_with(
            id, text, {{0, 10, Category::PATIENT, {}}, {20, 30, Category::DATE, {}}}));
    }
}

}  // namespace

TEST_CASE("percentile linear interpolation") {
    std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    CHECK(percentile(v, 0.0) == doctest::Approx(1.0));
    CHECK(percentile(v, 1.0) == doctest::Approx(4.0));
    CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
    CHECK(percentile(v, 0.25) == doctest::Approx(1.75));
    CHECK(percentile({7.0}, 0.3) == doctest::Approx(7.0));
    CHECK_THROWS_AS(percentile({}, 0.5), ValidationError);
}

TEST_CASE("keyed rng streams are schedule independent") {
    // Stream i drawn in any order produces the same values.
    auto a0 = keyed_rng(42, 0);
    auto a1 = keyed_rng(42, 1);
    std::uint64_t x0 = a0(), x1 = a1();
    auto b1 = keyed_rng(42, 1);
    auto b0 = keyed_rng(42, 0);
    CHECK(b0() == x0);
    CHECK(b1() == x1);
    CHECK(keyed_rng(42, 0)() != keyed_rng(43, 0)());
}

TEST_CASE("config validation") {
    BootstrapConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.resamples = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.ci_level = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.threshold = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("bootstrap_ci point values match the full-data evaluation") {
    Corpus gold, predA, predB;
    build_corpora(30, gold, predA, predB);
    BootstrapConfig cfg;
    cfg.resamples = 200;
    auto cis = bootstrap_ci(gold, predA, Metric::Recall, cfg);
    REQUIRE(cis.size() == kNumEvaluated);
    for (const auto& est : cis) {
        if (est.category == Category::PATIENT) {
            REQUIRE(est.point.has_value());
            CHECK(*est.point == doctest::Approx(0.5));
            REQUIRE(est.lower.has_value());
            REQUIRE(est.upper.has_value());
            CHECK(*est.lower <= *est.point);
            CHECK(*est.upper >= *est.point);
            CHECK(*est.lower < *est.upper);
        } else if (est.category == Category::DATE) {
            CHECK(*est.point == doctest::Approx(0.0));
        } else {
            // No gold support anywhere: recall undefined.
            CHECK_FALSE(est.point.has_value());
            CHECK_FALSE(est.lower.has_value());
        }
    }
}

TEST_CASE("bootstrap is deterministic for a fixed seed") {
    Corpus gold, predA, predB;
    build_corpora(50, gold, predA, predB);
    BootstrapConfig cfg;  // 2000 resamples, seed 42
    auto run1 = bootstrap_report_csv(bootstrap_ci(gold, predA, Metric::Recall, cfg));
    auto run2 = bootstrap_report_csv(bootstrap_ci(gold, predA, Metric::Recall, cfg));
    CHECK(run1 == run2);
    auto p1 = paired_report_csv(paired_bootstrap_test(gold, predA, predB, Metric::Recall, cfg));
    auto p2 = paired_report_csv(paired_bootstrap_test(gold, predA, predB, Metric::Recall, cfg));
    CHECK(p1 == p2);
}

TEST_CASE("paired test: perfect B vs empty A is maximally significant") {
    Corpus gold, predA, predB;
    build_corpora(50, gold, predA, predB);
    // A predicts nothing at all.
    Corpus empty;
    for (const auto& d : gold.documents) empty.documents.push_back(doc_with(d.doc_id, d.text, {}));
    BootstrapConfig cfg;
    auto results = paired_bootstrap_test(gold, empty, predB, Metric::Recall, cfg);
    for (const auto& r : results) {
        if (r.category == Category::PATIENT || r.category == Category::DATE) {
            REQUIRE(r.delta.has_value());
            CHECK(*r.delta == doctest::Approx(1.0));
            CHECK(r.p_value == doctest::Approx(1.0 / 2000));
            CHECK(r.p_adjusted == doctest::Approx(9.0 / 2000));
            CHECK(r.significant);
        } else {
            CHECK_FALSE(r.delta.has_value());
            CHECK_FALSE(r.significant);
        }
    }
}

TEST_CASE("paired test: identical models never reach significance") {
    Corpus gold, predA, predB;
    build_corpora(30, gold, predA, predB);
    BootstrapConfig cfg;
    cfg.resamples = 500;
    auto results = paired_bootstrap_test(gold, predB, predB, Metric::Recall, cfg);
    for (const auto& r : results) {
        // Every resample delta is zero, so every resample counts as a flip.
        if (r.delta.has_value()) {
            CHECK(*r.delta == doctest::Approx(0.0));
            CHECK(r.p_value == doctest::Approx(1.0));
        }
        CHECK_FALSE(r.significant);
    }
}

TEST_CASE("format_ci") {
    CiEstimate est;
    est.category = Category::DATE;
    est.metric = Metric::Recall;
    est.point = 0.921;
    est.lower = 0.895;
    est.upper = 0.934;
    CHECK(format_ci(est) == "0.92 [0.90--0.93]");
    est.lower.reset();
    CHECK_THROWS_AS(format_ci(est), ValidationError);
}

TEST_CASE("report csv headers") {
    Corpus gold, predA, predB;
    build_corpora(10, gold, predA, predB);
    BootstrapConfig cfg;
    cfg.resamples = 50;
    auto csv = bootstrap_report_csv(bootstrap_ci(gold, predA, Metric::Recall, cfg));
    CHECK(csv.rfind("category,metric,point,lower,upper,formatted\n", 0) == 0);
    auto pcsv = paired_report_csv(paired_bootstrap_test(gold, predA, predB, Metric::Recall, cfg));
    CHECK(pcsv.rfind("category,delta,p_value,p_adjusted,significant\n", 0) == 0);
    // One row per evaluated category plus the header.
    CHECK(std::count(pcsv.begin(), pcsv.end(), '\n') == 10);
}

TEST_CASE("metric names") {
    CHECK(metric_from_string("precision") == Metric::Precision);
    CHECK(metric_from_string("recall") == Metric::Recall);
    CHECK_THROWS_AS(metric_from_string("f1"), ValidationError);
    CHECK(to_string(Metric::Precision) == "precision");
}
