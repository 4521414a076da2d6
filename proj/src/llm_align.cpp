#include "deid/llm_align.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deid/utf8.hpp"

namespace deid {

using nlohmann::json;

namespace {

std::string strip_fences(const std::string& raw, bool& stripped) {
    stripped = false;
    std::size_t a = raw.find_first_not_of(" \t\r\n");
    std::size_t b = raw.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return raw;
    std::string trimmed = raw.substr(a, b - a + 1);
    if (trimmed.rfind("```", 0) != 0) return trimmed;
    std::size_t open_end = trimmed.find('\n');
    std::size_t close = trimmed.rfind("```");
    if (open_end == std::string::npos || close <= open_end) return trimmed;
    stripped = true;
    return trimmed.substr(open_end + 1, close - open_end - 1);
}

}  // namespace

ExtractionOutput parse_extraction(const std::string& raw) {
    ExtractionOutput out;
    std::string body = strip_fences(raw, out.fence_stripped);
    json obj;
    try {
        obj = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("invalid extraction JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ValidationError("extraction output must be a JSON object");
    for (auto& [key, value] : obj.items()) {
        Category cat;
        try {
            cat = category_from_string(key);
        } catch (const ValidationError&) {
            throw ValidationError("unknown entity type " + key);
        }
        if (!value.is_array())
            throw ValidationError("entity value for " + key + " must be a list");
        for (const auto& item : value) {
            if (!item.is_object() || !item.contains("text"))
                throw ValidationError("entry under " + key + " missing text field");
            ExtractionEntry entry;
            entry.text = item.at("text").get<std::string>();
            entry.confidence = item.value("confidence", 1.0);
            if (entry.confidence < 0.0 || entry.confidence > 1.0)
                throw ValidationError("confidence out of [0,1] under " + key);
            // Duplicate strings keep the maximum confidence.
            auto& list = out.entries[cat];
            auto dup = std::find_if(list.begin(), list.end(),
                                    [&](const ExtractionEntry& e) { return e.text == entry.text; });
            if (dup != list.end())
                dup->confidence = std::max(dup->confidence, entry.confidence);
            else
                list.push_back(std::move(entry));
        }
    }
    return out;
}

GroundingResult ground_spans(const std::string& note_text, const ExtractionOutput& ext,
                             double min_confidence) {
    if (min_confidence < 0.0 || min_confidence > 1.0)
        throw ValidationError("min_confidence must be in [0,1]");
    utf8::Index index(note_text);

    GroundingResult result;
    std::map<Category, std::vector<PhiSpan>> candidates;
    for (const auto& [cat, entries] : ext.entries) {
        for (const auto& entry : entries) {
            if (entry.confidence < min_confidence) continue;
            if (entry.text.empty()) continue;
            bool found = false;
            std::size_t pos = 0;
            while ((pos = note_text.find(entry.text, pos)) != std::string::npos) {
                // Byte hit must fall on codepoint boundaries.
                try {
                    std::size_t cp_start = index.cp_of(pos);
                    std::size_t cp_end = index.cp_of(pos + entry.text.size());
                    candidates[cat].push_back({cp_start, cp_end, cat, entry.confidence});
                    found = true;
                } catch (const std::invalid_argument&) {
                }
                ++pos;
            }
            if (!found)
                result.ungroundable.push_back(std::string(to_string(cat)) + ":" + entry.text);
        }
    }

    // Same-category overlaps resolve to the longer candidate.
    for (auto& [cat, spans] : candidates) {
        std::sort(spans.begin(), spans.end(), [](const PhiSpan& a, const PhiSpan& b) {
            if (a.length() != b.length()) return a.length() > b.length();
            return a.start < b.start;
        });
        std::vector<PhiSpan> kept;
        for (const auto& s : spans) {
            bool clash = std::any_of(kept.begin(), kept.end(), [&](const PhiSpan& k) {
                return s.start < k.end && k.start < s.end;
            });
            if (!clash) kept.push_back(s);
        }
        result.spans.insert(result.spans.end(), kept.begin(), kept.end());
    }
    std::sort(result.spans.begin(), result.spans.end(), [](const PhiSpan& a, const PhiSpan& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    return result;
}

BioSequence to_bio(const Document& doc, bool include_other) {
    BioSequence seq;
    auto tokens = utf8::tokenize(doc.text);
    // Winning span per token: most covered characters, tie to earlier start.
    std::vector<const PhiSpan*> winner(tokens.size(), nullptr);
    for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
        std::size_t best_ov = 0;
        for (const auto& s : doc.spans) {
            if (!include_other && s.category == Category::OTHER) continue;
            std::size_t lo = std::max(s.start, tokens[ti].start);
            std::size_t hi = std::min(s.end, tokens[ti].end);
            std::size_t ov = hi > lo ? hi - lo : 0;
            if (ov == 0) continue;
            if (ov > best_ov || (ov == best_ov && winner[ti] && s.start < winner[ti]->start)) {
                best_ov = ov;
                winner[ti] = &s;
            }
        }
    }
    for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
        seq.tokens.push_back(tokens[ti].text);
        seq.starts.push_back(tokens[ti].start);
        seq.ends.push_back(tokens[ti].end);
        if (!winner[ti]) {
            seq.tags.emplace_back("O");
        } else {
            bool continues = ti > 0 && winner[ti - 1] == winner[ti];
            seq.tags.push_back((continues ? "I-" : "B-") +
                               std::string(to_string(winner[ti]->category)));
        }
    }
    return seq;
}

std::string bio_conll(const Corpus& corpus, bool include_other) {
    std::ostringstream out;
    bool first = true;
    for (const auto& doc : corpus.documents) {
        if (!first) out << '\n';
        first = false;
        BioSequence seq = to_bio(doc, include_other);
        for (std::size_t i = 0; i < seq.tokens.size(); ++i)
            out << seq.tokens[i] << '\t' << seq.tags[i] << '\n';
    }
    return out.str();
}

std::map<std::string, std::string> load_responses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open responses file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json rec = json::parse(line);
            std::string id = rec.at("doc_id").get<std::string>();
            if (!out.emplace(id, rec.at("response").get<std::string>()).second)
                throw ValidationError(path + " line " + std::to_string(line_no) +
                                      ": duplicate doc_id " + id);
        } catch (const json::exception& e) {
            throw ValidationError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace deid
