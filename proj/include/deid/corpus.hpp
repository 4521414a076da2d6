#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deid {

// Raised for bad user input (malformed files, invariant violations).  The CLI
// maps this to exit code 2; anything else is an internal error (exit 1).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unified label taxonomy.  OTHER participates in mapping but is excluded from
// evaluation aggregates; the nine remaining categories are the evaluated set.
enum class Category : std::uint8_t {
    AGE,
    DATE,
    DOCTOR,
    HOSPITAL,
    ID,
    LOCATION,
    PATIENT,
    PHONE,
    WEB,
    OTHER,
};

inline constexpr std::size_t kNumCategories = 10;
inline constexpr std::size_t kNumEvaluated = 9;  // all but OTHER

std::string_view to_string(Category c);
Category category_from_string(std::string_view name);

// The nine evaluated categories in alphabetical order.
const std::array<Category, kNumEvaluated>& evaluated_categories();

// Labeled character interval [start, end); offsets index Unicode scalar
// values of the owning document's text.
struct PhiSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    Category category = Category::OTHER;
    std::optional<double> confidence;

    std::size_t length() const { return end - start; }
};

struct Document {
    std::string doc_id;
    std::string patient_id;
    std::string text;  // UTF-8
    std::string note_type;
    std::map<std::string, std::string> demographics;
    std::vector<PhiSpan> spans;  // sorted by start
};

struct Corpus {
    std::string name;
    std::vector<Document> documents;

    const Document* find(const std::string& doc_id) const;
};

// Validates and normalizes one document: offsets in range, spans sorted,
// no same-category overlap.  Throws ValidationError.
void validate_document(Document& doc);

// source label -> unified category; total over the declared source taxonomy.
struct LabelMap {
    std::map<std::string, Category> entries;
};

// Corpus JSONL IO.  One object per line: doc_id, patient_id, text, note_type,
// demographics, spans [{start, end, label, confidence?}].
//
// When a LabelMap is supplied, span labels are source-taxonomy strings and are
// mapped to unified categories during parsing; otherwise labels must already
// be unified category names.
Corpus load_corpus(const std::string& path, const LabelMap* map = nullptr);
Corpus parse_corpus(std::istream& in, const std::string& name, const LabelMap* map = nullptr);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

LabelMap load_label_map(const std::string& path);

// Maps one source label; unmapped labels are a ValidationError naming the
// label and the offending document.
Category map_label(const LabelMap& map, const std::string& label, const std::string& doc_id);

// Replaces each span's category via the map, keyed by the category's unified
// name; if drop_other, spans mapping to OTHER are removed.  Document text is
// unchanged.
Corpus apply_label_map(const Corpus& corpus, const LabelMap& map, bool drop_other);

// The two built-in source-taxonomy mappings, keyed "i2b2" and "aimi".
const std::map<std::string, LabelMap>& builtin_label_maps();

}  // namespace deid
