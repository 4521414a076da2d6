#include "deid/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deid/utf8.hpp"

namespace deid {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "AGE", "DATE", "DOCTOR", "HOSPITAL", "ID", "LOCATION", "PATIENT", "PHONE", "WEB", "OTHER"};

}  // namespace

std::string_view to_string(Category c) {
    return kCategoryNames[static_cast<std::size_t>(c)];
}

Category category_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kNumCategories; ++i)
        if (kCategoryNames[i] == name) return static_cast<Category>(i);
    throw ValidationError("unknown category string \"" + std::string(name) + "\"");
}

const std::array<Category, kNumEvaluated>& evaluated_categories() {
    static const std::array<Category, kNumEvaluated> cats = {
        Category::AGE,     Category::DATE,     Category::DOCTOR,
        Category::HOSPITAL, Category::ID,      Category::LOCATION,
        Category::PATIENT, Category::PHONE,    Category::WEB};
    return cats;
}

const Document* Corpus::find(const std::string& doc_id) const {
    for (const auto& d : documents)
        if (d.doc_id == doc_id) return &d;
    return nullptr;
}

void validate_document(Document& doc) {
    std::size_t len = utf8::count_codepoints(doc.text);
    for (const auto& s : doc.spans) {
        if (s.start >= s.end || s.end > len)
            throw ValidationError("span out of bounds in doc " + doc.doc_id + ": [" +
                                  std::to_string(s.start) + "," + std::to_string(s.end) +
                                  ") on text of length " + std::to_string(len));
        if (s.confidence && (*s.confidence < 0.0 || *s.confidence > 1.0))
            throw ValidationError("confidence out of [0,1] in doc " + doc.doc_id);
    }
    std::stable_sort(doc.spans.begin(), doc.spans.end(),
                     [](const PhiSpan& a, const PhiSpan& b) {
                         return a.start != b.start ? a.start < b.start : a.end < b.end;
                     });
    // Overlapping gold spans of the same category are an ingestion error;
    // different-category overlap is allowed.
    for (std::size_t i = 0; i < doc.spans.size(); ++i)
        for (std::size_t j = i + 1; j < doc.spans.size() && doc.spans[j].start < doc.spans[i].end; ++j)
            if (doc.spans[i].category == doc.spans[j].category)
                throw ValidationError("overlapping same-category spans in doc " + doc.doc_id +
                                      " (category " + std::string(to_string(doc.spans[i].category)) + ")");
}

Category map_label(const LabelMap& map, const std::string& label, const std::string& doc_id) {
    auto it = map.entries.find(label);
    if (it == map.entries.end())
        throw ValidationError("unmapped label \"" + label + "\" in doc " + doc_id);
    return it->second;
}

Corpus parse_corpus(std::istream& in, const std::string& name, const LabelMap* map) {
    Corpus corpus;
    corpus.name = name;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(name + " line " + std::to_string(line_no) +
                                  ": malformed JSON: " + e.what());
        }
        Document doc;
        try {
            doc.doc_id = rec.at("doc_id").get<std::string>();
            doc.patient_id = rec.value("patient_id", std::string{});
            doc.text = rec.at("text").get<std::string>();
            doc.note_type = rec.value("note_type", std::string{});
            if (rec.contains("demographics"))
                for (auto& [k, v] : rec.at("demographics").items())
                    doc.demographics[k] = v.get<std::string>();
            for (const auto& s : rec.value("spans", json::array())) {
                PhiSpan span;
                span.start = s.at("start").get<std::size_t>();
                span.end = s.at("end").get<std::size_t>();
                std::string label = s.at("label").get<std::string>();
                span.category = map ? map_label(*map, label, doc.doc_id)
                                    : category_from_string(label);
                if (s.contains("confidence")) span.confidence = s.at("confidence").get<double>();
                doc.spans.push_back(span);
            }
        } catch (const json::exception& e) {
            throw ValidationError(name + " line " + std::to_string(line_no) +
                                  ": bad record: " + e.what());
        }
        if (!seen_ids.insert(doc.doc_id).second)
            throw ValidationError(name + " line " + std::to_string(line_no) +
                                  ": duplicate doc_id " + doc.doc_id);
        validate_document(doc);
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

Corpus load_corpus(const std::string& path, const LabelMap* map) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open corpus file " + path);
    return parse_corpus(in, path, map);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& doc : corpus.documents) {
        json rec;
        rec["doc_id"] = doc.doc_id;
        rec["patient_id"] = doc.patient_id;
        rec["text"] = doc.text;
        rec["note_type"] = doc.note_type;
        rec["demographics"] = json::object();
        for (const auto& [k, v] : doc.demographics) rec["demographics"][k] = v;
        rec["spans"] = json::array();
        for (const auto& s : doc.spans) {
            json js = {{"start", s.start}, {"end", s.end}, {"label", std::string(to_string(s.category))}};
            if (s.confidence) js["confidence"] = *s.confidence;
            rec["spans"].push_back(js);
        }
        out << rec.dump() << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write corpus file " + path);
    write_corpus(corpus, out);
    if (!out) throw ValidationError("IO failure writing " + path);
}

LabelMap load_label_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open label map " + path);
    json obj;
    try {
        in >> obj;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": malformed JSON: " + e.what());
    }
    LabelMap map;
    for (auto& [k, v] : obj.items())
        map.entries[k] = category_from_string(v.get<std::string>());
    return map;
}

Corpus apply_label_map(const Corpus& corpus, const LabelMap& map, bool drop_other) {
    Corpus out;
    out.name = corpus.name;
    out.documents.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents) {
        Document mapped = doc;
        mapped.spans.clear();
        for (const auto& s : doc.spans) {
            PhiSpan span = s;
            span.category = map_label(map, std::string(to_string(s.category)), doc.doc_id);
            if (drop_other && span.category == Category::OTHER) continue;
            mapped.spans.push_back(span);
        }
        validate_document(mapped);
        out.documents.push_back(std::move(mapped));
    }
    return out;
}

const std::map<std::string, LabelMap>& builtin_label_maps() {
    static const std::map<std::string, LabelMap> maps = [] {
        std::map<std::string, LabelMap> m;
        LabelMap i2b2;
        i2b2.entries = {
            {"DATE", Category::DATE},
            {"PATIENT", Category::PATIENT},
            {"DOCTOR", Category::DOCTOR},
            {"MEDICALRECORD", Category::ID},
            {"IDNUM", Category::ID},
            {"USERNAME", Category::ID},
            {"DEVICE", Category::ID},
            {"AGE", Category::AGE},
            {"HOSPITAL", Category::HOSPITAL},
            {"PHONE", Category::PHONE},
            {"FAX", Category::PHONE},
            {"STREET", Category::LOCATION},
            {"CITY", Category::LOCATION},
            {"STATE", Category::LOCATION},
            {"ZIP", Category::LOCATION},
            {"COUNTRY", Category::LOCATION},
            {"LOCATION-OTHER", Category::LOCATION},
            {"EMAIL", Category::WEB},
            {"PROFESSION", Category::OTHER},
            {"ORGANIZATION", Category::OTHER},
        };
        LabelMap aimi;
        aimi.entries = {
            {"DATES", Category::DATE},
            {"PATIENT", Category::PATIENT},
            {"HCW", Category::DOCTOR},
            {"UNIQUE", Category::ID},
            {"HOSPITAL", Category::LOCATION},
            {"VENDOR", Category::HOSPITAL},
            {"PHONE", Category::PHONE},
            {"AGE", Category::AGE},
        };
        m.emplace("i2b2", std::move(i2b2));
        m.emplace("aimi", std::move(aimi));
        return m;
    }();
    return maps;
}

}  // namespace deid
