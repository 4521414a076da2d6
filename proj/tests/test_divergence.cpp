#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "deid/divergence.hpp"
#include "deid/rng.hpp"

using namespace deid;

namespace {

EmbeddingSet make_set(const std::vector<std::vector<double>>& rows) {
    EmbeddingSet s;
    s.corpus_name = "test";
    s.vectors.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        s.doc_ids.push_back("d" + std::to_string(i));
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            s.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return s;
}

GaussianSummary gaussian1d(double mean, double var) {
    GaussianSummary g;
    g.mean = Eigen::VectorXd::Constant(1, mean);
    g.covariance = Eigen::MatrixXd::Constant(1, 1, var);
    return g;
}

UnigramDist dist(std::initializer_list<std::pair<const char*, long long>> items) {
    UnigramDist d;
    for (const auto& [tok, cnt] : items) d.add(tok, cnt);
    return d;
}

Corpus text_corpus(std::initializer_list<const char*> texts) {
    Corpus c;
    int i = 0;
    for (const char* t : texts) {
        Document d;
        d.doc_id = "d" + std::to_string(i++);
        d.text = t;
        c.documents.push_back(std::move(d));
    }
    return c;
}

}  // namespace

TEST_CASE("fit_gaussian against a hand-computed covariance") {
    // Rows (0,0), (2,0), (0,2), (2,2): mean (1,1), covariance (4/3) I.
    auto set = make_set({{0, 0}, {2, 0}, {0, 2}, {2, 2}});
    auto g = fit_gaussian(set);
    CHECK(g.mean(0) == doctest::Approx(1.0));
    CHECK(g.mean(1) == doctest::Approx(1.0));
    CHECK(g.covariance(0, 0) == doctest::Approx(4.0 / 3.0));
    CHECK(g.covariance(1, 1) == doctest::Approx(4.0 / 3.0));
    CHECK(g.covariance(0, 1) == doctest::Approx(0.0));
    CHECK_THROWS_AS(fit_gaussian(make_set({{1.0, 2.0}})), ValidationError);
}

TEST_CASE("one-dimensional FTD scalar cases") {
    // Means 1 apart, equal unit variance: (total, shift, cov) = (1, 1, 0).
    auto v = ftd(gaussian1d(0.0, 1.0), gaussian1d(1.0, 1.0));
    CHECK(v.total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(v.mean_shift == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(v.cov_divergence) < 1e-9);

    // Same mean, sigma 2 vs sigma 1: cov term = (2-1)^2 = 1 -> (1, 0, 1).
    v = ftd(gaussian1d(0.0, 4.0), gaussian1d(0.0, 1.0));
    CHECK(v.total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(v.mean_shift) < 1e-9);
    CHECK(v.cov_divergence == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("FTD is symmetric and zero on identical summaries") {
    auto a = gaussian1d(0.3, 2.0);
    auto b = gaussian1d(-1.1, 0.5);
    CHECK(ftd(a, b).total == doctest::Approx(ftd(b, a).total));
    CHECK(std::abs(ftd(a, a).total) < 1e-12);

    GaussianSummary wide;
    wide.mean = Eigen::VectorXd::Zero(3);
    wide.covariance = Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(ftd(a, wide), ValidationError);
}

TEST_CASE("sampled FTD tracks the closed form on generator parameters") {
    // d=3 Gaussians with known mu/Sigma (diagonal), n=500 per corpus.
    Eigen::VectorXd mu_a(3), mu_b(3);
    mu_a << 0.0, 0.0, 0.0;
    mu_b << 1.0, -0.5, 0.25;
    Eigen::VectorXd sd_a(3), sd_b(3);
    sd_a << 1.0, 0.8, 1.2;
    sd_b << 1.5, 1.0, 0.6;

    auto rng = keyed_rng(2024, 0);
    auto sample = [&](const Eigen::VectorXd& mu, const Eigen::VectorXd& sd) {
        std::normal_distribution<double> nd(0.0, 1.0);
        EmbeddingSet s;
        s.vectors.resize(500, 3);
        for (int i = 0; i < 500; ++i) {
            s.doc_ids.push_back("d" + std::to_string(i));
            for (int j = 0; j < 3; ++j) s.vectors(i, j) = mu(j) + sd(j) * nd(rng);
        }
        return s;
    };
    auto set_a = sample(mu_a, sd_a);
    auto set_b = sample(mu_b, sd_b);

    GaussianSummary ga{mu_a, sd_a.array().square().matrix().asDiagonal()};
    GaussianSummary gb{mu_b, sd_b.array().square().matrix().asDiagonal()};
    double truth = ftd(ga, gb).total;
    double estimate = ftd(fit_gaussian(set_a), fit_gaussian(set_b)).total;
    CHECK(std::abs(estimate - truth) / truth < 0.15);
}

TEST_CASE("FTD bootstrap mean is biased upward on identical sets") {
    auto rng = keyed_rng(5, 0);
    std::normal_distribution<double> nd(0.0, 1.0);
    EmbeddingSet s;
    s.vectors.resize(120, 8);
    for (int i = 0; i < 120; ++i) {
        s.doc_ids.push_back("d" + std::to_string(i));
        for (int j = 0; j < 8; ++j) s.vectors(i, j) = nd(rng);
    }
    auto res = ftd_bootstrap(s, s, 50, 42);
    CHECK(std::abs(res.full_data.total) < 1e-9);
    CHECK(res.total.mean > 0.0);
    CHECK(res.total.lower <= res.total.mean);
    CHECK(res.total.mean <= res.total.upper);
}

TEST_CASE("FTD bootstrap is deterministic") {
    auto set = make_set({{0, 0}, {2, 0}, {0, 2}, {2, 2}, {1, 1}, {3, 1}});
    auto other = make_set({{1, 0}, {2, 1}, {0, 1}, {2, 2}, {1, 2}, {3, 0}});
    auto r1 = ftd_bootstrap(set, other, 40, 42);
    auto r2 = ftd_bootstrap(set, other, 40, 42);
    CHECK(r1.total.mean == r2.total.mean);
    CHECK(r1.total.lower == r2.total.lower);
    auto r3 = ftd_bootstrap(set, other, 40, 43);
    CHECK(r1.total.mean != r3.total.mean);
}

TEST_CASE("embedding binary round trip and magic dispatch") {
    auto set = make_set({{0.5, -1.25, 3.0}, {2.0, 0.0, -0.125}});
    auto bin = std::filesystem::temp_directory_path() / "deid_emb.bin";
    save_embeddings_binary(set, bin.string());
    auto back = load_embeddings(bin.string());
    REQUIRE(back.size() == 2);
    REQUIRE(back.dim() == 3);
    CHECK(back.doc_ids[1] == "d1");
    CHECK(back.vectors(0, 1) == doctest::Approx(-1.25));
    CHECK(back.vectors(1, 2) == doctest::Approx(-0.125));

    auto jsonl = std::filesystem::temp_directory_path() / "deid_emb.jsonl";
    {
        std::ofstream out(jsonl);
        out << R"({"doc_id":"a","vector":[1.0,2.0]})" << '\n'
            << R"({"doc_id":"b","vector":[3.0,4.0]})" << '\n';
    }
    auto js = load_embeddings(jsonl.string());
    CHECK(js.size() == 2);
    CHECK(js.vectors(1, 0) == doctest::Approx(3.0));

    {
        std::ofstream out(jsonl);
        out << R"({"doc_id":"a","vector":[1.0,2.0]})" << '\n'
            << R"({"doc_id":"b","vector":[3.0]})" << '\n';
    }
    CHECK_THROWS_AS(load_embeddings(jsonl.string()), ValidationError);
    std::filesystem::remove(bin);
    std::filesystem::remove(jsonl);
}

TEST_CASE("JSD oracles") {
    auto p = dist({{"a", 3}, {"b", 1}});
    CHECK(std::abs(jsd(p, p)) < 1e-15);

    // Disjoint vocabularies: exactly ln 2.
    auto q = dist({{"c", 2}, {"d", 2}});
    CHECK(jsd(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // Hand-derived asymmetric case: P = {a}, Q = uniform {a, b}.
    // M = {a: 3/4, b: 1/4}; JSD = (ln(4/3) + 0.5 ln(2/3) + 0.5 ln 2) / 2.
    auto p1 = dist({{"a", 1}});
    auto q1 = dist({{"a", 1}, {"b", 1}});
    double expect = 0.5 * (std::log(4.0 / 3.0) +
                           0.5 * std::log(2.0 / 3.0) + 0.5 * std::log(2.0));
    CHECK(expect == doctest::Approx(0.2158).epsilon(1e-3));
    CHECK(jsd(p1, q1) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("JSD symmetry and bounds on random distributions") {
    for (int trial = 0; trial < 1000; ++trial) {
        auto rng = keyed_rng(99, static_cast<std::uint64_t>(trial));
        auto rand_dist = [&]() {
            UnigramDist d;
            std::size_t vocab = 1 + draw_index(rng, 8);
            for (std::size_t i = 0; i < vocab; ++i)
                d.add("w" + std::to_string(draw_index(rng, 10)),
                      1 + static_cast<long long>(draw_index(rng, 20)));
            return d;
        };
        auto p = rand_dist();
        auto q = rand_dist();
        double v = jsd(p, q);
        CHECK(v >= 0.0);
        CHECK(v <= std::log(2.0) + 1e-12);
        CHECK(v == doctest::Approx(jsd(q, p)).epsilon(1e-12));
    }
}

TEST_CASE("weighted JSD with equal weights reduces to the standard value") {
    auto p = dist({{"a", 5}, {"b", 2}, {"c", 1}});
    auto q = dist({{"b", 4}, {"c", 4}});
    CHECK(jsd_weighted(p, q, 0.5, 0.5) == doctest::Approx(jsd(p, q)).epsilon(1e-12));
    CHECK_THROWS_AS(jsd_weighted(p, q, 0.7, 0.7), ValidationError);
    CHECK_THROWS_AS(jsd_weighted(p, q, 1.0, 0.0), ValidationError);
    // Weighted variant is nonnegative too.
    CHECK(jsd_weighted(p, q, 0.9, 0.1) >= 0.0);
    CHECK(jsd_weighted(p, q, 0.9, 0.1, /*mixture_only=*/true) >= 0.0);
}

TEST_CASE("corpus unigram distribution and bootstrap") {
    Corpus a = text_corpus({"alpha beta beta", "gamma alpha"});
    Corpus b = text_corpus({"delta delta", "alpha delta"});
    auto da = unigram_dist(a);
    CHECK(da.total == 5);
    CHECK(da.counts.at("beta") == 2);

    auto res = jsd_bootstrap(a, b, 60, 42);
    CHECK(res.full_standard == doctest::Approx(jsd(da, unigram_dist(b))));
    CHECK(res.standard.lower <= res.standard.upper);
    auto res2 = jsd_bootstrap(a, b, 60, 42);
    CHECK(res.standard.mean == res2.standard.mean);
    CHECK_THROWS_AS(unigram_dist(Corpus{}), ValidationError);
}
