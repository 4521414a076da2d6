#include "deid/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deid/utf8.hpp"

namespace deid {

using nlohmann::json;

void StrataSpec::validate() const {
    if (axes.empty()) throw ValidationError("strata spec has no axes");
    std::set<std::string> names;
    for (const auto& ax : axes) {
        if (!names.insert(ax.name).second)
            throw ValidationError("duplicate axis " + ax.name);
        if (!ax.categorical) {
            if (ax.edges.empty()) throw ValidationError("numeric axis " + ax.name + " has no edges");
            for (std::size_t i = 1; i < ax.edges.size(); ++i)
                if (ax.edges[i] <= ax.edges[i - 1])
                    throw ValidationError("bin edges not strictly increasing on axis " + ax.name);
            if (!ax.labels.empty() && ax.labels.size() != ax.edges.size() + 1)
                throw ValidationError("axis " + ax.name + " needs edges+1 labels");
        }
    }
}

std::string numeric_bin(const AxisSpec& axis, long value) {
    std::size_t bin = 0;
    while (bin < axis.edges.size() && value >= axis.edges[bin]) ++bin;
    if (!axis.labels.empty()) return axis.labels[bin];
    if (bin == 0) return "<" + std::to_string(axis.edges.front());
    if (bin == axis.edges.size()) return std::to_string(axis.edges.back()) + "+";
    return std::to_string(axis.edges[bin - 1]) + "-" + std::to_string(axis.edges[bin]);
}

StrataSpec default_strata_spec(const Corpus& corpus) {
    StrataSpec spec;
    AxisSpec age;
    age.name = "age";
    age.categorical = false;
    age.edges = {18, 30, 45, 60, 75, 90};
    age.labels = {"0-17", "18-29", "30-44", "45-59", "60-74", "75-89", "90+"};
    spec.axes.push_back(age);
    spec.axes.push_back({"sex", true, {}, {}});
    spec.axes.push_back({"race", true, {}, {}});
    spec.axes.push_back({"ethnicity", true, {}, {}});
    spec.axes.push_back({"note_type", true, {}, {}});

    // Note-length quintiles of the source corpus.
    AxisSpec len;
    len.name = "note_length";
    len.categorical = false;
    std::vector<long> lengths;
    for (const auto& d : corpus.documents)
        lengths.push_back(static_cast<long>(utf8::count_codepoints(d.text)));
    std::sort(lengths.begin(), lengths.end());
    if (!lengths.empty()) {
        for (int q = 1; q <= 4; ++q) {
            long edge = lengths[std::min(lengths.size() - 1, lengths.size() * q / 5)];
            if (len.edges.empty() || edge > len.edges.back()) len.edges.push_back(edge);
        }
    }
    if (len.edges.empty()) len.edges = {1};  // degenerate corpus, single bin boundary
    spec.axes.push_back(len);
    spec.validate();
    return spec;
}

StrataSpec load_strata_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open strata spec " + path);
    json obj;
    try {
        in >> obj;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": malformed JSON: " + e.what());
    }
    StrataSpec spec;
    for (const auto& ja : obj.at("axes")) {
        AxisSpec ax;
        ax.name = ja.at("name").get<std::string>();
        const auto& bins = ja.at("bins");
        if (bins.is_string() && bins.get<std::string>() == "categorical") {
            ax.categorical = true;
        } else if (bins.is_array()) {
            ax.categorical = false;
            for (const auto& e : bins) ax.edges.push_back(e.get<long>());
            if (ja.contains("labels"))
                for (const auto& l : ja.at("labels")) ax.labels.push_back(l.get<std::string>());
        } else {
            throw ValidationError("axis " + ax.name + ": bins must be \"categorical\" or an edge array");
        }
        spec.axes.push_back(std::move(ax));
    }
    if (obj.contains("missing")) {
        std::string m = obj.at("missing").get<std::string>();
        if (m == "error")
            spec.missing = MissingPolicy::Error;
        else if (m == "unknown")
            spec.missing = MissingPolicy::Unknown;
        else
            throw ValidationError("missing policy must be \"unknown\" or \"error\"");
    }
    spec.validate();
    return spec;
}

std::set<Stratum> strata_of(const Document& doc, const StrataSpec& spec) {
    std::set<Stratum> out;
    for (const auto& ax : spec.axes) {
        if (ax.name == "note_length") {
            long n = static_cast<long>(utf8::count_codepoints(doc.text));
            out.emplace(ax.name, numeric_bin(ax, n));
            continue;
        }
        auto it = doc.demographics.find(ax.name);
        std::string value;
        if (it == doc.demographics.end() || it->second.empty()) {
            if (ax.name == "note_type" && !doc.note_type.empty()) {
                value = doc.note_type;
            } else if (spec.missing == MissingPolicy::Error) {
                throw ValidationError("doc " + doc.doc_id + " missing demographic " + ax.name);
            } else {
                out.emplace(ax.name, "UNKNOWN");
                continue;
            }
        } else {
            value = it->second;
        }
        if (ax.categorical) {
            out.emplace(ax.name, value);
        } else {
            long v;
            try {
                v = std::stol(value);
            } catch (const std::exception&) {
                throw ValidationError("doc " + doc.doc_id + ": non-numeric value \"" + value +
                                      "\" on axis " + ax.name);
            }
            out.emplace(ax.name, numeric_bin(ax, v));
        }
    }
    return out;
}

CoverageState sample_set_cover(const Corpus& corpus, const StrataSpec& spec,
                               std::optional<std::size_t> budget) {
    if (corpus.documents.empty()) throw ValidationError("set cover over empty corpus");
    if (budget && *budget < 1) throw ValidationError("budget must be >= 1");
    spec.validate();

    struct Cand {
        const Document* doc;
        std::set<Stratum> strata;
        bool selected = false;
    };
    std::vector<Cand> cands;
    cands.reserve(corpus.documents.size());
    CoverageState state;
    for (const auto& d : corpus.documents) {
        Cand c{&d, strata_of(d, spec)};
        for (const auto& s : c.strata) state.target_strata.insert(s);
        cands.push_back(std::move(c));
    }
    // Deterministic candidate order: lexicographic doc_id resolves all ties.
    std::sort(cands.begin(), cands.end(),
              [](const Cand& a, const Cand& b) { return a.doc->doc_id < b.doc->doc_id; });

    std::map<Stratum, std::size_t> selection_count;
    for (const auto& s : state.target_strata) selection_count[s] = 0;

    auto select = [&](Cand& c) {
        c.selected = true;
        state.selected.push_back(c.doc->doc_id);
        for (const auto& s : c.strata) {
            state.covered.insert(s);
            selection_count[s] += 1;
        }
    };

    // Cover phase.
    while (state.covered.size() < state.target_strata.size() &&
           (!budget || state.selected.size() < *budget)) {
        Cand* best = nullptr;
        std::size_t best_gain = 0, best_old = 0;
        for (auto& c : cands) {
            if (c.selected) continue;
            std::size_t gain = 0, old = 0;
            for (const auto& s : c.strata)
                state.covered.count(s) ? ++old : ++gain;
            if (gain == 0) continue;
            if (!best || gain > best_gain || (gain == best_gain && old < best_old)) {
                best = &c;
                best_gain = gain;
                best_old = old;
            }
        }
        if (!best) break;  // remaining documents add nothing
        select(*best);
    }

    // Balancing phase: spend any remaining budget lifting the thinnest strata.
    while (budget && state.selected.size() < *budget) {
        Cand* best = nullptr;
        long best_min = -1;
        std::size_t best_old = 0;
        for (auto& c : cands) {
            if (c.selected) continue;
            long new_min = std::numeric_limits<long>::max();
            for (const auto& [s, cnt] : selection_count) {
                long v = static_cast<long>(cnt) + (c.strata.count(s) ? 1 : 0);
                new_min = std::min(new_min, v);
            }
            std::size_t old = c.strata.size();  // all covered by now
            if (!best || new_min > best_min || (new_min == best_min && old < best_old)) {
                best = &c;
                best_min = new_min;
                best_old = old;
            }
        }
        if (!best) break;  // corpus exhausted
        select(*best);
    }
    return state;
}

std::vector<CoverageRow> coverage_report(const CoverageState& state, const Corpus& corpus,
                                         const StrataSpec& spec) {
    std::map<Stratum, std::size_t> counts;
    for (const auto& s : state.target_strata) counts[s] = 0;
    std::set<std::string> selected(state.selected.begin(), state.selected.end());
    for (const auto& d : corpus.documents) {
        if (!selected.count(d.doc_id)) continue;
        for (const auto& s : strata_of(d, spec)) counts[s] += 1;
    }
    std::vector<CoverageRow> rows;
    for (const auto& [s, cnt] : counts)
        rows.push_back({s.first, s.second, cnt, state.covered.count(s) > 0});
    return rows;
}

std::string coverage_csv(const std::vector<CoverageRow>& rows) {
    std::ostringstream out;
    out << "axis,bin,count,covered\n";
    for (const auto& r : rows)
        out << r.axis << ',' << r.bin << ',' << r.count << ',' << (r.covered ? "true" : "false")
            << '\n';
    return out.str();
}

}  // namespace deid
