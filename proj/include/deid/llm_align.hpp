#pragma once

#include <map>
#include <string>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

struct ExtractionEntry {
    std::string text;
    double confidence = 1.0;
};

// Parsed LLM extraction response: entries per prompt entity type (the 10
// unified categories).  Duplicate (text, category) entries keep the maximum
// confidence.
struct ExtractionOutput {
    std::map<Category, std::vector<ExtractionEntry>> entries;
    bool fence_stripped = false;  // markdown fences were tolerated with a warning
};

// Strict JSON parse of the extraction schema; "{}" means no PHI.  Markdown
// fences around an otherwise-valid object are stripped and flagged.
ExtractionOutput parse_extraction(const std::string& raw);

struct GroundingResult {
    std::vector<PhiSpan> spans;
    // Entries with zero exact occurrences in the note, as "CATEGORY:text".
    std::vector<std::string> ungroundable;
};

// Every exact (case- and whitespace-sensitive) occurrence of an entry with
// confidence >= min_confidence becomes a span; same-category overlaps keep
// the longer candidate, different-category overlaps both survive.
GroundingResult ground_spans(const std::string& note_text, const ExtractionOutput& ext,
                             double min_confidence = 0.0);

struct BioSequence {
    std::vector<std::string> tokens;
    std::vector<std::size_t> starts;  // codepoint offsets
    std::vector<std::size_t> ends;
    std::vector<std::string> tags;  // B-<cat>, I-<cat>, O
};

// BIO projection onto whitespace tokens; a token overlapping two
// different-category spans takes the span covering more of it (tie: earlier
// start).  OTHER spans are skipped unless include_other.
BioSequence to_bio(const Document& doc, bool include_other = false);

// CoNLL-style export: token TAB tag, blank line between documents.
std::string bio_conll(const Corpus& corpus, bool include_other = false);

// Raw responses file: JSONL of {doc_id, response}.
std::map<std::string, std::string> load_responses(const std::string& path);

}  // namespace deid
