#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deid/corpus.hpp"

namespace deid {

struct SurrogateKey {
    std::vector<std::uint8_t> secret;  // HMAC key
    std::vector<std::uint8_t> salt;
    std::vector<std::string> first_names;
    std::vector<std::string> last_names;

    void validate() const;
};

// Key file: JSON {"secret_hex","salt_hex","name_pool_path"}; the pool file
// lists names one per line under FIRST/LAST section headers.
SurrogateKey load_key(const std::string& path);
SurrogateKey builtin_key(const std::string& secret);  // fixed demo pools, for tests/tools

// Crypto helpers (OpenSSL-backed).
std::vector<std::uint8_t> hmac_sha256(const std::vector<std::uint8_t>& key, std::string_view msg);
std::string sha256_hex(std::string_view data);
std::string to_hex(const std::vector<std::uint8_t>& bytes);

// Signed per-patient day offset: HMAC-SHA256(secret, patient_id) as a
// big-endian integer gives magnitude 3 + (value mod 88); the digest's final
// low bit picks the sign.
int derive_jitter(const SurrogateKey& key, const std::string& patient_id);

enum class DateFormat {
    SlashMDY,    // MM/DD/YYYY and M/D/YY
    SlashMD,     // M/D, year absent
    IsoYmd,      // YYYY-MM-DD (date part of ISO timestamps)
    MonthNameDY, // "Month DD, YYYY" / "Mon DD YYYY"
};

struct ParsedDate {
    std::string source;          // exact matched text
    std::size_t start = 0;       // codepoint offsets into the scanned text
    std::size_t end = 0;
    std::optional<int> year;
    int month = 0;
    int day = 0;
    DateFormat format = DateFormat::SlashMDY;
    // Rendering details so the shifted date keeps the source shape.
    int month_width = 1;
    int day_width = 1;
    int year_digits = 0;         // 0 when year absent
    bool month_abbrev = false;
    bool comma_before_year = false;
};

// Scans for MM/DD/YYYY, M/D/YY, M/D, YYYY-MM-DD and "Month DD(,) YYYY"
// (full or 3-letter month names).  ISO timestamps yield only the date part;
// times, weekday names and relative words never match.
std::vector<ParsedDate> parse_dates(const std::string& text);

// Calendar-correct day arithmetic rendered in the source format.  Partial
// dates resolve against reference_year for the arithmetic and re-render
// without the year; absent a reference year they are unshiftable (nullopt).
std::optional<std::string> shift_date(const ParsedDate& d, int jitter_days,
                                      std::optional<int> reference_year = std::nullopt);

// Days since 1970-01-01 for a civil date; inverse provided for rendering.
long days_from_civil(int y, int m, int d);
void civil_from_days(long z, int& y, int& m, int& d);

// Category-specific deterministic surrogate (everything except DATE).
std::string surrogate_for(const std::string& span_text, Category category,
                          const SurrogateKey& key, const std::string& patient_id);

struct Replacement {
    std::size_t orig_start = 0;
    std::size_t orig_end = 0;
    std::string replacement_text;
    Category category = Category::OTHER;
};

struct SurrogatePlan {
    std::string doc_id;
    std::vector<Replacement> replacements;
    std::string output_text;
    std::vector<PhiSpan> output_spans;
    std::string text_hash;     // SHA-256 hex of output_text
    std::string patient_hash;  // keyed one-way hash of patient_id
    std::vector<std::string> flags;  // e.g. unshiftable dates
};

SurrogatePlan apply_surrogates(const Document& doc, const SurrogateKey& key,
                               std::optional<int> reference_year = std::nullopt);

// Whole-corpus release: surrogate JSONL (with text_hash/patient_hash/flags)
// plus an audit log that never carries original PHI text.
struct AuditEntry {
    std::string doc_id;
    Category category = Category::OTHER;
    std::size_t orig_len = 0;
    std::size_t new_len = 0;
};

struct SurrogateRun {
    Corpus output;
    std::vector<SurrogatePlan> plans;
    std::vector<AuditEntry> audit;
};

SurrogateRun surrogate_corpus(const Corpus& corpus, const SurrogateKey& key,
                              std::optional<int> reference_year = std::nullopt);

void save_surrogate_corpus(const SurrogateRun& run, const std::string& corpus_path,
                           const std::string& audit_path);

}  // namespace deid
