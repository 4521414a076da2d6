#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deid/corpus.hpp"
#include "deid/cost.hpp"
#include "deid/divergence.hpp"
#include "deid/llm_align.hpp"
#include "deid/sampler.hpp"
#include "deid/span_eval.hpp"
#include "deid/stats.hpp"
#include "deid/surrogate.hpp"
#include "deid/utf8.hpp"

namespace {

using deid::ValidationError;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deid::sha256_hex(buf.str());
}

// Every command writes one manifest next to its reports: command, arguments,
// seeds, input digests, tool version, timestamp.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& args,
                    const std::vector<std::string>& inputs,
                    std::optional<std::uint64_t> seed) {
    json m;
    m["command"] = command;
    m["arguments"] = args;
    if (seed) m["seeds"] = {*seed};
    m["inputs"] = json::object();
    for (const auto& p : inputs) m["inputs"][p] = sha256_file(p);
    m["tool_version"] = kVersion;
    auto now = std::chrono::system_clock::now();
    m["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "manifest.json");
    out << m.dump(2) << '\n';
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
    if (!out) throw ValidationError("IO failure writing " + path.string());
}

const deid::LabelMap* resolve_map(const std::string& name, deid::LabelMap& storage) {
    if (name.empty()) return nullptr;
    const auto& builtin = deid::builtin_label_maps();
    if (auto it = builtin.find(name); it != builtin.end()) return &it->second;
    storage = deid::load_label_map(name);
    return &storage;
}

int run(int argc, char** argv) {
    CLI::App app{"De-identification measurement toolkit"};
    app.require_subcommand(1);
    std::vector<std::string> raw_args(argv + 1, argv + argc);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Span- or token-level precision/recall");
    std::string eval_gold, eval_pred, eval_out = "eval_out", eval_level = "span", eval_map;
    double eval_threshold = 0.8;
    eval->add_option("gold", eval_gold)->required();
    eval->add_option("pred", eval_pred)->required();
    eval->add_option("--threshold", eval_threshold);
    eval->add_option("--level", eval_level)->check(CLI::IsMember({"span", "token"}));
    eval->add_option("--map", eval_map, "builtin map name (i2b2, aimi) or map file");
    eval->add_option("--out", eval_out);

    // ---- bootstrap ----
    auto* boot = app.add_subcommand("bootstrap", "Bootstrap CIs and paired tests");
    std::string boot_gold, boot_a, boot_b, boot_out = "bootstrap_out", boot_metric = "recall";
    int boot_resamples = 2000;
    std::uint64_t boot_seed = 42;
    double boot_threshold = 0.8;
    boot->add_option("gold", boot_gold)->required();
    boot->add_option("predA", boot_a)->required();
    boot->add_option("predB", boot_b);
    boot->add_option("--resamples", boot_resamples);
    boot->add_option("--seed", boot_seed);
    boot->add_option("--metric", boot_metric)->check(CLI::IsMember({"precision", "recall"}));
    boot->add_option("--threshold", boot_threshold);
    boot->add_option("--out", boot_out);

    // ---- diverge ----
    auto* div = app.add_subcommand("diverge", "FTD / JSD corpus divergence");
    std::string div_metric = "jsd", div_out = "diverge_out";
    std::vector<std::string> div_inputs;
    int div_resamples = 1000;
    std::uint64_t div_seed = 42;
    bool div_mixture_only = false;
    div->add_option("--metric", div_metric)->check(CLI::IsMember({"ftd", "jsd"}));
    div->add_option("inputs", div_inputs, "embedding files (ftd) or corpora (jsd)")
        ->expected(2, -1);
    div->add_option("--resamples", div_resamples);
    div->add_option("--seed", div_seed);
    div->add_flag("--mixture-only", div_mixture_only,
                  "weight only the JSD mixture, not the KL terms");
    div->add_option("--out", div_out);

    // ---- sample ----
    auto* sample = app.add_subcommand("sample", "Set-cover diversity sampling");
    std::string sample_corpus, sample_spec, sample_out = "sample_out";
    long long sample_budget = -1;
    sample->add_option("corpus", sample_corpus)->required();
    sample->add_option("--spec", sample_spec, "strata spec JSON (default: built-in axes)");
    sample->add_option("--budget", sample_budget);
    sample->add_option("--out", sample_out);

    // ---- surrogate ----
    auto* surr = app.add_subcommand("surrogate", "Deterministic surrogate replacement");
    std::string surr_corpus, surr_key, surr_out = "surrogate_out";
    int surr_ref_year = 0;
    surr->add_option("corpus", surr_corpus)->required();
    surr->add_option("--key", surr_key)->required();
    surr->add_option("--reference-year", surr_ref_year,
                     "resolve partial dates against this year");
    surr->add_option("--out", surr_out);

    // ---- align ----
    auto* align = app.add_subcommand("align", "Ground LLM extraction output to spans");
    std::string align_notes, align_responses, align_out = "align_out";
    double align_min_conf = 0.0;
    bool align_include_other = false;
    align->add_option("notes", align_notes, "corpus JSONL with note text")->required();
    align->add_option("responses", align_responses, "JSONL of {doc_id, response}")->required();
    align->add_option("--min-confidence", align_min_conf);
    align->add_flag("--include-other", align_include_other);
    align->add_option("--out", align_out);

    // ---- cost ----
    auto* cost = app.add_subcommand("cost", "Cloud-LLM processing cost estimate");
    double cost_chars = -1, cost_in_tokens = -1, cost_out_tokens = 0;
    double cost_price_in = 0.15, cost_price_out = 1.25, cost_cpt = 4.0;
    auto* opt_chars = cost->add_option("--input-chars", cost_chars);
    auto* opt_tokens = cost->add_option("--input-tokens", cost_in_tokens);
    opt_chars->excludes(opt_tokens);
    cost->add_option("--output-tokens", cost_out_tokens)->required();
    cost->add_option("--price-in", cost_price_in);
    cost->add_option("--price-out", cost_price_out);
    cost->add_option("--chars-per-token", cost_cpt);

    // ---- map-labels ----
    auto* maplab = app.add_subcommand("map-labels", "Map a corpus into the unified taxonomy");
    std::string ml_corpus, ml_map, ml_out = "mapped.jsonl";
    bool ml_drop_other = false;
    maplab->add_option("corpus", ml_corpus)->required();
    maplab->add_option("--map", ml_map, "builtin name (i2b2, aimi) or map file")->required();
    maplab->add_flag("--drop-other", ml_drop_other);
    maplab->add_option("--out", ml_out);

    int threads = 1;
    app.add_option("--threads", threads, "worker parallelism cap");

    CLI11_PARSE(app, argc, argv);
    std::filesystem::path out_dir;

    if (*eval) {
        deid::LabelMap storage;
        const auto* map = resolve_map(eval_map, storage);
        auto gold = deid::load_corpus(eval_gold);
        auto pred = deid::load_corpus(eval_pred, map);
        deid::PRStats stats = eval_level == "span"
                                  ? deid::evaluate_spans(gold, pred, eval_threshold)
                                  : deid::evaluate_tokens(gold, pred);
        out_dir = eval_out;
        std::filesystem::create_directories(out_dir);
        write_file(out_dir / "report.csv", deid::report_csv(stats));
        auto [p, r] = deid::micro_average(stats);
        char micro[96];
        std::snprintf(micro, sizeof(micro), "level,precision,recall\n%s,%.2f,%.2f\n",
                      eval_level.c_str(), p, r);
        write_file(out_dir / "micro.csv", micro);
        write_manifest(eval_out, "eval", raw_args, {eval_gold, eval_pred}, std::nullopt);
        std::cout << deid::report_csv(stats);
        std::printf("micro precision %.2f recall %.2f\n", p, r);
    } else if (*boot) {
        auto gold = deid::load_corpus(boot_gold);
        auto predA = deid::load_corpus(boot_a);
        deid::BootstrapConfig cfg;
        cfg.resamples = boot_resamples;
        cfg.seed = boot_seed;
        cfg.threshold = boot_threshold;
        deid::Metric metric = deid::metric_from_string(boot_metric);
        out_dir = boot_out;
        std::filesystem::create_directories(out_dir);
        auto cis = deid::bootstrap_ci(gold, predA, metric, cfg);
        write_file(out_dir / "ci.csv", deid::bootstrap_report_csv(cis));
        if (!boot_b.empty()) {
            auto predB = deid::load_corpus(boot_b);
            auto results = deid::paired_bootstrap_test(gold, predA, predB, metric, cfg);
            write_file(out_dir / "paired.csv", deid::paired_report_csv(results));
        }
        std::vector<std::string> inputs = {boot_gold, boot_a};
        if (!boot_b.empty()) inputs.push_back(boot_b);
        write_manifest(boot_out, "bootstrap", raw_args, inputs, boot_seed);
    } else if (*div) {
        out_dir = div_out;
        std::filesystem::create_directories(out_dir);
        std::ostringstream csv;
        csv << "pair,metric,bootstrap_mean,lower,upper,full_data\n";
        auto row = [&](const std::string& pair, const std::string& metric,
                       const deid::BootstrapComponent& c, double full) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f\n", pair.c_str(),
                          metric.c_str(), c.mean, c.lower, c.upper, full);
            csv << buf;
        };
        if (div_metric == "ftd") {
            std::vector<deid::EmbeddingSet> sets;
            for (const auto& p : div_inputs) sets.push_back(deid::load_embeddings(p));
            for (std::size_t i = 0; i < sets.size(); ++i)
                for (std::size_t j = i + 1; j < sets.size(); ++j) {
                    auto res = deid::ftd_bootstrap(sets[i], sets[j], div_resamples, div_seed);
                    std::string pair = sets[i].corpus_name + "|" + sets[j].corpus_name;
                    row(pair, "ftd_total", res.total, res.full_data.total);
                    row(pair, "mean_shift", res.mean_shift, res.full_data.mean_shift);
                    row(pair, "cov_divergence", res.cov_divergence, res.full_data.cov_divergence);
                }
        } else {
            std::vector<deid::Corpus> corpora;
            for (const auto& p : div_inputs) corpora.push_back(deid::load_corpus(p));
            for (std::size_t i = 0; i < corpora.size(); ++i)
                for (std::size_t j = i + 1; j < corpora.size(); ++j) {
                    auto res = deid::jsd_bootstrap(corpora[i], corpora[j], div_resamples, div_seed,
                                                   div_mixture_only);
                    std::string pair = div_inputs[i] + "|" + div_inputs[j];
                    row(pair, "jsd_standard", res.standard, res.full_standard);
                    row(pair, "jsd_weighted", res.weighted, res.full_weighted);
                }
        }
        write_file(out_dir / "divergence.csv", csv.str());
        write_manifest(div_out, "diverge", raw_args, div_inputs, div_seed);
        std::cout << csv.str();
    } else if (*sample) {
        auto corpus = deid::load_corpus(sample_corpus);
        deid::StrataSpec spec = sample_spec.empty() ? deid::default_strata_spec(corpus)
                                                    : deid::load_strata_spec(sample_spec);
        std::optional<std::size_t> budget;
        if (sample->count("--budget")) {
            if (sample_budget < 1) throw ValidationError("budget must be >= 1");
            budget = static_cast<std::size_t>(sample_budget);
        }
        auto state = deid::sample_set_cover(corpus, spec, budget);
        out_dir = sample_out;
        std::filesystem::create_directories(out_dir);
        std::ostringstream ids;
        for (const auto& id : state.selected) ids << id << '\n';
        write_file(out_dir / "selected.txt", ids.str());
        write_file(out_dir / "coverage.csv",
                   deid::coverage_csv(deid::coverage_report(state, corpus, spec)));
        std::vector<std::string> inputs = {sample_corpus};
        if (!sample_spec.empty()) inputs.push_back(sample_spec);
        write_manifest(sample_out, "sample", raw_args, inputs, std::nullopt);
        std::cout << "selected " << state.selected.size() << " documents, covered "
                  << state.covered.size() << "/" << state.target_strata.size() << " strata\n";
    } else if (*surr) {
        // Refuse corpora already produced by this pipeline.
        {
            std::ifstream probe(surr_corpus);
            std::string first;
            if (probe && std::getline(probe, first) && !first.empty()) {
                auto rec = json::parse(first, nullptr, false);
                if (rec.is_object() && rec.value("surrogated", false))
                    throw ValidationError(surr_corpus + " is already surrogate output");
            }
        }
        auto corpus = deid::load_corpus(surr_corpus);
        auto key = deid::load_key(surr_key);
        std::optional<int> ref_year;
        if (surr->count("--reference-year")) ref_year = surr_ref_year;
        auto run = deid::surrogate_corpus(corpus, key, ref_year);
        out_dir = surr_out;
        std::filesystem::create_directories(out_dir);
        deid::save_surrogate_corpus(run, (out_dir / "surrogate.jsonl").string(),
                                    (out_dir / "audit.jsonl").string());
        write_manifest(surr_out, "surrogate", raw_args, {surr_corpus}, std::nullopt);
        std::size_t flagged = 0;
        for (const auto& p : run.plans) flagged += p.flags.size();
        std::cout << "surrogated " << run.output.documents.size() << " documents, "
                  << run.audit.size() << " replacements, " << flagged << " flags\n";
    } else if (*align) {
        auto notes = deid::load_corpus(align_notes);
        auto responses = deid::load_responses(align_responses);
        deid::Corpus grounded;
        grounded.name = "grounded";
        std::size_t ungroundable = 0;
        for (const auto& doc : notes.documents) {
            auto it = responses.find(doc.doc_id);
            if (it == responses.end())
                throw ValidationError("no response for doc_id " + doc.doc_id);
            auto ext = deid::parse_extraction(it->second);
            auto res = deid::ground_spans(doc.text, ext, align_min_conf);
            ungroundable += res.ungroundable.size();
            deid::Document out = doc;
            out.spans = res.spans;
            deid::validate_document(out);
            grounded.documents.push_back(std::move(out));
        }
        out_dir = align_out;
        std::filesystem::create_directories(out_dir);
        deid::save_corpus(grounded, (out_dir / "grounded.jsonl").string());
        write_file(out_dir / "bio.conll", deid::bio_conll(grounded, align_include_other));
        write_manifest(align_out, "align", raw_args, {align_notes, align_responses}, std::nullopt);
        std::cout << "grounded " << grounded.documents.size() << " documents, " << ungroundable
                  << " ungroundable entries\n";
    } else if (*cost) {
        auto sheet = deid::PriceSheet::from_dollars(cost_price_in, cost_price_out, cost_cpt);
        deid::CostBreakdown b;
        if (cost->count("--input-chars")) {
            b = deid::estimate_cost_chars(static_cast<long long>(cost_chars),
                                          static_cast<long long>(cost_out_tokens), sheet);
        } else if (cost->count("--input-tokens")) {
            b = deid::estimate_cost_tokens(static_cast<long long>(cost_in_tokens),
                                           static_cast<long long>(cost_out_tokens), sheet);
        } else {
            throw ValidationError("one of --input-chars / --input-tokens is required");
        }
        std::cout << "input " << b.input_cost.format_dollars() << " ($" << b.input_cost.format_cents()
                  << ")\n";
        std::cout << "output " << b.output_cost.format_dollars() << " ($"
                  << b.output_cost.format_cents() << ")\n";
        std::cout << "total " << b.total.format_dollars() << " ($" << b.total.format_cents()
                  << ")\n";
    } else if (*maplab) {
        deid::LabelMap storage;
        const auto* map = resolve_map(ml_map, storage);
        auto corpus = deid::load_corpus(ml_corpus, map);
        if (ml_drop_other) {
            for (auto& doc : corpus.documents)
                std::erase_if(doc.spans,
                              [](const deid::PhiSpan& s) { return s.category == deid::Category::OTHER; });
        }
        deid::save_corpus(corpus, ml_out);
        write_manifest(std::filesystem::path(ml_out).parent_path().string().empty()
                           ? "."
                           : std::filesystem::path(ml_out).parent_path().string(),
                       "map-labels", raw_args, {ml_corpus}, std::nullopt);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
