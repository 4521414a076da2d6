#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

// One demographic/document axis with its binning rule.  Categorical axes
// pass demographic values through; numeric axes (age, note_length) bin
// against strictly increasing edges.  note_length is derived from the text's
// character count, age from the demographics value.
struct AxisSpec {
    std::string name;
    bool categorical = true;
    std::vector<long> edges;          // numeric axes only
    std::vector<std::string> labels;  // optional; edges.size()+1 entries when present
};

enum class MissingPolicy { Unknown, Error };

struct StrataSpec {
    std::vector<AxisSpec> axes;
    MissingPolicy missing = MissingPolicy::Unknown;

    void validate() const;
};

// Axes of the release: age, sex, race, ethnicity, note_type, note_length.
// Age uses the release bands (90+ top band); note_length bins at the
// quintiles of the given corpus.
StrataSpec default_strata_spec(const Corpus& corpus);

StrataSpec load_strata_spec(const std::string& path);

using Stratum = std::pair<std::string, std::string>;  // (axis, bin)

std::string numeric_bin(const AxisSpec& axis, long value);

// Exactly one (axis, bin) pair per axis.
std::set<Stratum> strata_of(const Document& doc, const StrataSpec& spec);

struct CoverageState {
    std::set<Stratum> target_strata;
    std::set<Stratum> covered;
    std::vector<std::string> selected;  // doc_id, selection order
};

// Greedy set cover: each step takes the document covering the most uncovered
// strata, ties by fewest already-covered pairs then lexicographic doc_id.
// After full cover, remaining budget goes to a balancing phase that maximizes
// the minimum per-stratum selection count.
CoverageState sample_set_cover(const Corpus& corpus, const StrataSpec& spec,
                               std::optional<std::size_t> budget = std::nullopt);

struct CoverageRow {
    std::string axis;
    std::string bin;
    std::size_t count = 0;  // selected documents covering this stratum
    bool covered = false;
};

std::vector<CoverageRow> coverage_report(const CoverageState& state, const Corpus& corpus,
                                         const StrataSpec& spec);

std::string coverage_csv(const std::vector<CoverageRow>& rows);

}  // namespace deid
