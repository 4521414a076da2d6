#include "deid/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "deid/rng.hpp"
#include "deid/stats.hpp"
#include "deid/utf8.hpp"

namespace deid {

using nlohmann::json;

void EmbeddingSet::validate() const {
    if (doc_ids.size() != size())
        throw ValidationError("embedding set " + corpus_name + ": doc_ids not aligned to rows");
    if (!vectors.allFinite())
        throw ValidationError("embedding set " + corpus_name + " contains non-finite entries");
}

EmbeddingSet load_embeddings_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open embedding file " + path);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
            ids.push_back(rec.at("doc_id").get<std::string>());
            rows.push_back(rec.at("vector").get<std::vector<double>>());
        } catch (const json::exception& e) {
            throw ValidationError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (rows.back().size() != rows.front().size())
            throw ValidationError(path + " line " + std::to_string(line_no) +
                                  ": inconsistent vector dimension");
    }
    if (rows.empty()) throw ValidationError(path + ": no embeddings");
    EmbeddingSet set;
    set.corpus_name = path;
    set.doc_ids = std::move(ids);
    set.vectors.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            set.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    set.validate();
    return set;
}

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

float read_f32_le(std::istream& in) {
    std::uint32_t bits = read_le<std::uint32_t>(in);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void write_f32_le(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    write_le(out, bits);
}

}  // namespace

EmbeddingSet load_embeddings_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open embedding file " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError(path + ": missing EMB1 magic");
    std::uint32_t dim = read_le<std::uint32_t>(in);
    std::uint32_t count = read_le<std::uint32_t>(in);
    if (dim == 0 || count == 0) throw ValidationError(path + ": empty embedding file");
    EmbeddingSet set;
    set.corpus_name = path;
    set.vectors.resize(count, dim);
    set.doc_ids.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t id_len = read_le<std::uint16_t>(in);
        std::string id(id_len, '\0');
        in.read(id.data(), id_len);
        set.doc_ids.push_back(std::move(id));
        for (std::uint32_t j = 0; j < dim; ++j) set.vectors(i, j) = read_f32_le(in);
        if (!in) throw ValidationError(path + ": truncated at record " + std::to_string(i));
    }
    set.validate();
    return set;
}

void save_embeddings_binary(const EmbeddingSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write embedding file " + path);
    out.write(kMagic, 4);
    write_le(out, static_cast<std::uint32_t>(set.dim()));
    write_le(out, static_cast<std::uint32_t>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
        write_le(out, static_cast<std::uint16_t>(set.doc_ids[i].size()));
        out.write(set.doc_ids[i].data(), static_cast<std::streamsize>(set.doc_ids[i].size()));
        for (std::size_t j = 0; j < set.dim(); ++j)
            write_f32_le(out, static_cast<float>(set.vectors(static_cast<Eigen::Index>(i),
                                                             static_cast<Eigen::Index>(j))));
    }
    if (!out) throw ValidationError("IO failure writing " + path);
}

EmbeddingSet load_embeddings(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw ValidationError("cannot open embedding file " + path);
    char magic[4] = {};
    probe.read(magic, 4);
    probe.close();
    if (std::memcmp(magic, kMagic, 4) == 0) return load_embeddings_binary(path);
    return load_embeddings_jsonl(path);
}

GaussianSummary fit_gaussian(const EmbeddingSet& emb) {
    emb.validate();
    if (emb.size() < 2)
        throw ValidationError("Gaussian fit needs at least 2 rows, got " +
                              std::to_string(emb.size()));
    GaussianSummary g;
    g.mean = emb.vectors.colwise().mean();
    Eigen::MatrixXd centered = emb.vectors.rowwise() - g.mean.transpose();
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(emb.size() - 1);
    g.covariance = 0.5 * (cov + cov.transpose());
    return g;
}

namespace {

// Trace of the symmetric square root of S_A^{1/2} S_B S_A^{1/2}.
double sqrt_trace(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(sa);
    if (es_a.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    Eigen::VectorXd ev = es_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd root_a = es_a.eigenvectors() * ev.asDiagonal() * es_a.eigenvectors().transpose();
    Eigen::MatrixXd m = root_a * sb * root_a;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_m(m);
    if (es_m.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    return es_m.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

FtdValue ftd(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.mean.size() != b.mean.size())
        throw ValidationError("FTD dimension mismatch: " + std::to_string(a.mean.size()) +
                              " vs " + std::to_string(b.mean.size()));
    FtdValue v;
    v.mean_shift = (a.mean - b.mean).squaredNorm();
    v.cov_divergence =
        a.covariance.trace() + b.covariance.trace() - 2.0 * sqrt_trace(a.covariance, b.covariance);
    v.total = v.mean_shift + v.cov_divergence;
    return v;
}

namespace {

EmbeddingSet resample_rows(const EmbeddingSet& src, std::mt19937_64& rng) {
    EmbeddingSet out;
    out.corpus_name = src.corpus_name;
    out.vectors.resize(src.vectors.rows(), src.vectors.cols());
    out.doc_ids.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::size_t k = draw_index(rng, src.size());
        out.vectors.row(static_cast<Eigen::Index>(i)) = src.vectors.row(static_cast<Eigen::Index>(k));
        out.doc_ids[i] = src.doc_ids[k];
    }
    return out;
}

BootstrapComponent summarize(std::vector<double>& values) {
    BootstrapComponent c;
    double sum = 0.0;
    for (double v : values) sum += v;
    c.mean = sum / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    c.lower = percentile(values, 0.025);
    c.upper = percentile(values, 0.975);
    return c;
}

}  // namespace

FtdResult ftd_bootstrap(const EmbeddingSet& a, const EmbeddingSet& b, int resamples,
                        std::uint64_t seed) {
    if (resamples < 1) throw ValidationError("resamples must be >= 1");
    if (a.dim() != b.dim())
        throw ValidationError("FTD dimension mismatch between embedding files");
    FtdResult res;
    res.full_data = ftd(fit_gaussian(a), fit_gaussian(b));
    std::vector<double> totals, shifts, covs;
    totals.reserve(resamples);
    for (int it = 0; it < resamples; ++it) {
        auto rng = keyed_rng(seed, static_cast<std::uint64_t>(it));
        EmbeddingSet ra = resample_rows(a, rng);
        EmbeddingSet rb = resample_rows(b, rng);
        FtdValue v = ftd(fit_gaussian(ra), fit_gaussian(rb));
        totals.push_back(v.total);
        shifts.push_back(v.mean_shift);
        covs.push_back(v.cov_divergence);
    }
    res.total = summarize(totals);
    res.mean_shift = summarize(shifts);
    res.cov_divergence = summarize(covs);
    return res;
}

void UnigramDist::add(const std::string& token, long long n) {
    counts[token] += n;
    total += n;
}

UnigramDist unigram_dist(const Corpus& corpus) {
    if (corpus.documents.empty()) throw ValidationError("unigram distribution of empty corpus");
    UnigramDist dist;
    for (const auto& doc : corpus.documents)
        for (const auto& tok : utf8::tokenize(doc.text)) dist.add(tok.text);
    if (dist.total == 0) throw ValidationError("unigram distribution over empty text");
    return dist;
}

namespace {

double generalized_jsd(const UnigramDist& p, const UnigramDist& q, double wa, double wb,
                       bool mixture_only) {
    if (p.total <= 0 || q.total <= 0)
        throw ValidationError("JSD over zero-total distribution");
    double pt = static_cast<double>(p.total);
    double qt = static_cast<double>(q.total);
    // KL(P||M) summed over tokens with positive source probability; tokens
    // with zero source probability contribute 0 (0 ln 0 := 0).
    auto kl = [&](const UnigramDist& src, double st) {
        double acc = 0.0;
        for (const auto& [tok, cnt] : src.counts) {
            if (cnt == 0) continue;
            double ps = static_cast<double>(cnt) / st;
            double pp = 0.0, pq = 0.0;
            if (auto it = p.counts.find(tok); it != p.counts.end())
                pp = static_cast<double>(it->second) / pt;
            if (auto it = q.counts.find(tok); it != q.counts.end())
                pq = static_cast<double>(it->second) / qt;
            double m = wa * pp + wb * pq;
            acc += ps * std::log(ps / m);
        }
        return acc;
    };
    double ka = kl(p, pt);
    double kb = kl(q, qt);
    double value = mixture_only ? 0.5 * ka + 0.5 * kb : wa * ka + wb * kb;
    // Clamp rounding error only.
    if (value < 0.0 && value > -1e-12) value = 0.0;
    double bound = std::log(2.0);
    if (!mixture_only && value > bound && value < bound + 1e-12) value = bound;
    return value;
}

}  // namespace

double jsd(const UnigramDist& p, const UnigramDist& q) {
    return generalized_jsd(p, q, 0.5, 0.5, false);
}

double jsd_weighted(const UnigramDist& p, const UnigramDist& q, double wa, double wb,
                    bool mixture_only) {
    if (wa <= 0.0 || wb <= 0.0 || std::abs(wa + wb - 1.0) > 1e-9)
        throw ValidationError("JSD weights must be positive and sum to 1");
    return generalized_jsd(p, q, wa, wb, mixture_only);
}

JsdResult jsd_bootstrap(const Corpus& a, const Corpus& b, int resamples, std::uint64_t seed,
                        bool mixture_only) {
    if (resamples < 1) throw ValidationError("resamples must be >= 1");
    // Per-document distributions computed once; resamples merge counts.
    auto per_doc = [](const Corpus& c) {
        std::vector<UnigramDist> out;
        out.reserve(c.documents.size());
        for (const auto& doc : c.documents) {
            UnigramDist d;
            for (const auto& tok : utf8::tokenize(doc.text)) d.add(tok.text);
            out.push_back(std::move(d));
        }
        return out;
    };
    auto docs_a = per_doc(a);
    auto docs_b = per_doc(b);

    auto merge = [](const std::vector<UnigramDist>& docs, const std::vector<std::size_t>& idx) {
        UnigramDist d;
        for (std::size_t i : idx)
            for (const auto& [tok, cnt] : docs[i].counts) d.add(tok, cnt);
        return d;
    };

    UnigramDist full_a = unigram_dist(a);
    UnigramDist full_b = unigram_dist(b);
    double fa = static_cast<double>(full_a.total);
    double fb = static_cast<double>(full_b.total);

    JsdResult res;
    res.full_standard = jsd(full_a, full_b);
    res.full_weighted = jsd_weighted(full_a, full_b, fa / (fa + fb), fb / (fa + fb), mixture_only);

    std::vector<double> std_vals, wt_vals;
    std_vals.reserve(resamples);
    for (int it = 0; it < resamples; ++it) {
        auto rng = keyed_rng(seed, static_cast<std::uint64_t>(it));
        std::vector<std::size_t> ia(docs_a.size()), ib(docs_b.size());
        for (auto& v : ia) v = draw_index(rng, docs_a.size());
        for (auto& v : ib) v = draw_index(rng, docs_b.size());
        UnigramDist ra = merge(docs_a, ia);
        UnigramDist rb = merge(docs_b, ib);
        double ta = static_cast<double>(ra.total);
        double tb = static_cast<double>(rb.total);
        std_vals.push_back(jsd(ra, rb));
        wt_vals.push_back(jsd_weighted(ra, rb, ta / (ta + tb), tb / (ta + tb), mixture_only));
    }
    res.standard = summarize(std_vals);
    res.weighted = summarize(wt_vals);
    return res;
}

}  // namespace deid
