#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "deid/corpus.hpp"

namespace deid {

struct EmbeddingSet {
    std::string corpus_name;
    Eigen::MatrixXd vectors;  // n_docs x dim
    std::vector<std::string> doc_ids;

    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
    void validate() const;  // finite entries, ids aligned to rows
};

// Embedding JSONL: {"doc_id": ..., "vector": [...]} per line.
EmbeddingSet load_embeddings_jsonl(const std::string& path);
// Binary: magic "EMB1", u32 dim, u32 count, then (u16 id_len, id, dim x f32),
// all little-endian.
EmbeddingSet load_embeddings_binary(const std::string& path);
void save_embeddings_binary(const EmbeddingSet& set, const std::string& path);
// Dispatch on the magic bytes.
EmbeddingSet load_embeddings(const std::string& path);

struct GaussianSummary {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

// Column means and unbiased sample covariance (divisor n-1), symmetrized.
GaussianSummary fit_gaussian(const EmbeddingSet& emb);

struct FtdValue {
    double total = 0.0;
    double mean_shift = 0.0;
    double cov_divergence = 0.0;
};

// Frechet distance between Gaussians: ||mu_A - mu_B||^2 plus
// tr(S_A + S_B - 2 (S_A S_B)^{1/2}), the square root evaluated through the
// symmetric conjugation S_A^{1/2} S_B S_A^{1/2} with eigenvalues clamped at 0.
FtdValue ftd(const GaussianSummary& a, const GaussianSummary& b);

struct BootstrapComponent {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct FtdResult {
    FtdValue full_data;
    BootstrapComponent total;
    BootstrapComponent mean_shift;
    BootstrapComponent cov_divergence;
};

// Resamples each corpus to its own size with replacement; reports bootstrap
// means as the point values plus 95% percentile CIs, with the full-data value
// kept for diagnostics.
FtdResult ftd_bootstrap(const EmbeddingSet& a, const EmbeddingSet& b, int resamples = 1000,
                        std::uint64_t seed = 42);

struct UnigramDist {
    std::unordered_map<std::string, long long> counts;
    long long total = 0;

    void add(const std::string& token, long long n = 1);
};

UnigramDist unigram_dist(const Corpus& corpus);

// Jensen-Shannon divergence with natural logs, bounded in [0, ln 2].
double jsd(const UnigramDist& p, const UnigramDist& q);
// Lin's generalized JSD: M = wa P + wb Q and JSD = wa KL(P||M) + wb KL(Q||M).
// mixture_only weights only M, reproducing the narrower reading of the
// size-weighted variant.
double jsd_weighted(const UnigramDist& p, const UnigramDist& q, double wa, double wb,
                    bool mixture_only = false);

struct JsdResult {
    double full_standard = 0.0;
    double full_weighted = 0.0;
    BootstrapComponent standard;
    BootstrapComponent weighted;
};

// Document-level resampling per corpus; weighted variant takes its weights
// from the resampled token totals.
JsdResult jsd_bootstrap(const Corpus& a, const Corpus& b, int resamples = 1000,
                        std::uint64_t seed = 42, bool mixture_only = false);

}  // namespace deid
