#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include "deid/rng.hpp"
#include "deid/surrogate.hpp"
#include "deid/utf8.hpp"

using namespace deid;

namespace {

const SurrogateKey& key() {
    static const SurrogateKey k = builtin_key("test-secret");
    return k;
}

Document doc_with(const std::string& id, const std::string& pid, const std::string& text,
                  std::vector<PhiSpan> spans) {
    Document d;
    d.doc_id = id;
    d.patient_id = pid;
    d.text = text;
    d.spans = std::move(spans);
    return d;
}

}  // namespace

TEST_CASE("sha256 known vector") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("jitter is deterministic, signed and in [3,90]") {
    for (int i = 0; i < 300; ++i) {
        std::string pid = "patient-" + std::to_string(i);
        int j1 = derive_jitter(key(), pid);
        int j2 = derive_jitter(key(), pid);
        CHECK(j1 == j2);
        CHECK(std::abs(j1) >= 3);
        CHECK(std::abs(j1) <= 90);
    }
    // Different keys give different jitters somewhere.
    auto other = builtin_key("another-secret");
    bool any_diff = false;
    for (int i = 0; i < 50; ++i) {
        std::string pid = "p" + std::to_string(i);
        if (derive_jitter(key(), pid) != derive_jitter(other, pid)) any_diff = true;
    }
    CHECK(any_diff);
    CHECK_THROWS_AS(derive_jitter(key(), ""), ValidationError);
}

TEST_CASE("date parsing covers the supported formats") {
    auto dates = parse_dates("Seen 01/02/2023, again 3/4/24 and 5/6, ISO 2023-01-02.");
    REQUIRE(dates.size() == 4);
    CHECK(dates[0].source == "01/02/2023");
    CHECK(dates[0].month == 1);
    CHECK(dates[0].day == 2);
    CHECK(dates[0].year == 2023);
    CHECK(dates[0].format == DateFormat::SlashMDY);
    CHECK(dates[1].source == "3/4/24");
    CHECK(dates[1].year == 2024);  // two-digit pivot
    CHECK(dates[2].source == "5/6");
    CHECK_FALSE(dates[2].year.has_value());
    CHECK(dates[2].format == DateFormat::SlashMD);
    CHECK(dates[3].format == DateFormat::IsoYmd);

    auto names = parse_dates("On January 5, 2021 and Mar 17 1999.");
    REQUIRE(names.size() == 2);
    CHECK(names[0].month == 1);
    CHECK(names[0].comma_before_year);
    CHECK_FALSE(names[0].month_abbrev);
    CHECK(names[1].month == 3);
    CHECK(names[1].month_abbrev);
    CHECK_FALSE(names[1].comma_before_year);
}

TEST_CASE("date parsing guards against false positives") {
    CHECK(parse_dates("ratio 12/345 and 123/4").empty());
    CHECK(parse_dates("serial 892023-01-023").empty());
    CHECK(parse_dates("13/45/2023").empty());   // invalid month/day
    CHECK(parse_dates("2/30 dosing").empty());  // February 30th never exists
    CHECK(parse_dates("no dates here on Tuesday at 14:30").empty());
    // Timestamp: the date part is extracted, the time is not part of it.
    auto d = parse_dates("2023-01-02T14:30:00Z");
    REQUIRE(d.size() == 1);
    CHECK(d[0].source == "2023-01-02");
    // The longer slash form wins over its embedded M/D prefix.
    auto s = parse_dates("1/2/2023");
    REQUIRE(s.size() == 1);
    CHECK(s[0].source == "1/2/2023");
}

TEST_CASE("date parsing reports codepoint offsets") {
    std::string text = "r\xC3\xA9sum\xC3\xA9 01/02/2023";  // two 2-byte chars before the date
    auto dates = parse_dates(text);
    REQUIRE(dates.size() == 1);
    CHECK(dates[0].start == 7);
    CHECK(dates[0].end == 17);
}

TEST_CASE("shift_date preserves the source rendering") {
    auto one = [](const std::string& s) {
        auto v = parse_dates(s);
        REQUIRE(v.size() == 1);
        return v[0];
    };
    CHECK(shift_date(one("01/02/2023"), 1) == "01/03/2023");
    CHECK(shift_date(one("1/2/2023"), -2) == "12/31/2022");  // year rollover
    CHECK(shift_date(one("3/4/24"), 3) == "3/7/24");
    CHECK(shift_date(one("2023-02-28"), 1) == "2023-03-01");  // common year
    CHECK(shift_date(one("2024-02-28"), 1) == "2024-02-29");  // leap year
    CHECK(shift_date(one("January 5, 2021"), 30) == "February 4, 2021");
    // A two-digit source day keeps its width after the shift.
    CHECK(shift_date(one("Mar 17 1999"), 20) == "Apr 06 1999");

    // Partial dates need a reference year.
    auto partial = one("5/6");
    CHECK_FALSE(shift_date(partial, 10).has_value());
    CHECK(shift_date(partial, 10, 2023) == "5/16");
    // The re-rendered partial date drops the year again after arithmetic
    // crossing a year boundary; source widths stay put.
    auto dec = one("12/30");
    CHECK(shift_date(dec, 5, 2022) == "01/04");
}

TEST_CASE("civil date arithmetic round trips") {
    for (int trial = 0; trial < 500; ++trial) {
        auto rng = keyed_rng(17, static_cast<std::uint64_t>(trial));
        long z = static_cast<long>(draw_index(rng, 80000)) - 20000;
        int y, m, d;
        civil_from_days(z, y, m, d);
        CHECK(days_from_civil(y, m, d) == z);
    }
    CHECK(days_from_civil(1970, 1, 1) == 0);
    CHECK(days_from_civil(2000, 3, 1) == 11017);
}

TEST_CASE("surrogate_for per category") {
    // ID: keyed hex of the same codepoint length.
    std::string id = surrogate_for("MRN-4471923", Category::ID, key(), "p1");
    CHECK(id.size() == 11);
    CHECK(id != "MRN-4471923");
    CHECK(surrogate_for("MRN-4471923", Category::ID, key(), "p2") == id);  // keyed, not per patient

    // PHONE keeps punctuation layout, replaces digits.
    std::string phone = surrogate_for("(617) 555-0134", Category::PHONE, key(), "p1");
    CHECK(phone.size() == 14);
    CHECK(phone[0] == '(');
    CHECK(phone[4] == ')');
    CHECK(phone[9] == '-');
    for (std::size_t i : {1, 2, 3, 6, 7, 8, 10, 11, 12, 13})
        CHECK(std::isdigit(static_cast<unsigned char>(phone[i])));
    CHECK(phone != "(617) 555-0134");

    // AGE generalizes to the release bands.
    CHECK(surrogate_for("92", Category::AGE, key(), "p1") == "90+");
    CHECK(surrogate_for("71 years old", Category::AGE, key(), "p1") == "60-74");
    CHECK(surrogate_for("aged 17", Category::AGE, key(), "p1") == "0-17");

    // WEB keeps structure and case class per character.
    std::string web = surrogate_for("www.Example.com", Category::WEB, key(), "p1");
    CHECK(web.size() == 15);
    CHECK(web[3] == '.');
    CHECK(web[11] == '.');
    CHECK(std::isupper(static_cast<unsigned char>(web[4])));
    CHECK(std::islower(static_cast<unsigned char>(web[0])));

    // Person names draw from the pools, keeping capitalization.
    std::string name = surrogate_for("Jane Doe", Category::PATIENT, key(), "p1");
    auto toks = utf8::tokenize(name);
    REQUIRE(toks.size() == 2);
    const auto& k = key();
    CHECK(std::count(k.first_names.begin(), k.first_names.end(), toks[0].text) == 1);
    CHECK(std::count(k.last_names.begin(), k.last_names.end(), toks[1].text) == 1);
    CHECK(surrogate_for("Jane Doe", Category::PATIENT, key(), "p1") == name);
    std::string upper = surrogate_for("JANE DOE", Category::PATIENT, key(), "p1");
    for (char c : upper)
        if (std::isalpha(static_cast<unsigned char>(c)))
            CHECK(std::isupper(static_cast<unsigned char>(c)));

    CHECK_THROWS_AS(surrogate_for("x", Category::OTHER, key(), "p1"), ValidationError);
}

TEST_CASE("apply_surrogates rewrites spans consistently") {
    Document d = doc_with("d1", "pat-9",
                          "Jane Doe seen 01/02/2023 at Mercy General, MRN 12345.",
                          {{0, 8, Category::PATIENT, {}},
                           {14, 24, Category::DATE, {}},
                           {28, 41, Category::HOSPITAL, {}},
                           {47, 52, Category::ID, {}}});
    auto plan = apply_surrogates(d, key());
    CHECK(plan.flags.empty());
    REQUIRE(plan.output_spans.size() == 4);
    utf8::Index idx(plan.output_text);
    for (std::size_t i = 0; i < plan.output_spans.size(); ++i) {
        const auto& s = plan.output_spans[i];
        CHECK(idx.slice(plan.output_text, s.start, s.end) == plan.replacements[i].replacement_text);
        CHECK(s.category == plan.replacements[i].category);
    }
    // Unchanged text between spans survives.
    CHECK(plan.output_text.find(" seen ") != std::string::npos);
    CHECK(plan.output_text.find(", MRN ") != std::string::npos);
    // The date moved by this patient's jitter.
    int jitter = derive_jitter(key(), "pat-9");
    auto parsed = parse_dates(plan.replacements[1].replacement_text);
    REQUIRE(parsed.size() == 1);
    long orig = days_from_civil(2023, 1, 2);
    CHECK(days_from_civil(*parsed[0].year, parsed[0].month, parsed[0].day) == orig + jitter);
    CHECK(plan.text_hash == sha256_hex(plan.output_text));
    CHECK_FALSE(plan.patient_hash.empty());
    CHECK(plan.patient_hash != "pat-9");
}

TEST_CASE("date intervals are preserved for one patient") {
    Document d = doc_with("d1", "pat-1", "From 01/10/2020 to 03/15/2020 stay.",
                          {{5, 15, Category::DATE, {}}, {19, 29, Category::DATE, {}}});
    auto plan = apply_surrogates(d, key());
    auto a = parse_dates(plan.replacements[0].replacement_text);
    auto b = parse_dates(plan.replacements[1].replacement_text);
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    long da = days_from_civil(*a[0].year, a[0].month, a[0].day);
    long db = days_from_civil(*b[0].year, b[0].month, b[0].day);
    CHECK(db - da == days_from_civil(2020, 3, 15) - days_from_civil(2020, 1, 10));
}

TEST_CASE("overlapping spans are rejected for replacement") {
    Document d = doc_with("d1", "p", "abcdefghij",
                          {{0, 5, Category::PATIENT, {}}, {3, 8, Category::DATE, {}}});
    CHECK_THROWS_WITH_AS(apply_surrogates(d, key()), doctest::Contains("overlapping"),
                         ValidationError);
}

TEST_CASE("unshiftable and unparseable dates are flagged, not dropped") {
    Document d = doc_with("d1", "p", "On 5/6 and later.", {{3, 6, Category::DATE, {}}});
    auto plan = apply_surrogates(d, key());
    REQUIRE(plan.flags.size() == 1);
    CHECK(plan.flags[0].find("unshiftable") != std::string::npos);
    CHECK(plan.output_text == d.text);  // kept verbatim

    auto shifted = apply_surrogates(d, key(), 2023);
    CHECK(shifted.flags.empty());
    CHECK(shifted.output_text != d.text);

    Document bad = doc_with("d2", "p", "on someday soon", {{3, 10, Category::DATE, {}}});
    auto plan2 = apply_surrogates(bad, key());
    REQUIRE(plan2.flags.size() == 1);
    CHECK(plan2.flags[0].find("unparseable") != std::string::npos);
}

TEST_CASE("OTHER spans are kept verbatim with a flag") {
    Document d = doc_with("d1", "p", "works as a firefighter", {{11, 22, Category::OTHER, {}}});
    auto plan = apply_surrogates(d, key());
    CHECK(plan.output_text == d.text);
    REQUIRE(plan.flags.size() == 1);
    CHECK(plan.flags[0].find("OTHER") != std::string::npos);
}

TEST_CASE("pipeline invariants on random documents") {
    const char* fillers[] = {"visit", "note", "plan", "stable", "followup"};
    for (int trial = 0; trial < 200; ++trial) {
        auto rng = keyed_rng(71, static_cast<std::uint64_t>(trial));
        std::string text;
        std::vector<PhiSpan> spans;
        auto add_plain = [&] { text += std::string(fillers[draw_index(rng, 5)]) + " "; };
        add_plain();
        std::size_t nspans = 1 + draw_index(rng, 5);
        for (std::size_t i = 0; i < nspans; ++i) {
            Category c = evaluated_categories()[draw_index(rng, kNumEvaluated)];
            std::string payload;
            switch (c) {
                case Category::DATE: payload = "01/15/2021"; break;
                case Category::AGE: payload = std::to_string(20 + draw_index(rng, 70)); break;
                case Category::PHONE: payload = "555-0" + std::to_string(100 + draw_index(rng, 900)); break;
                case Category::ID: payload = "MRN" + std::to_string(10000 + draw_index(rng, 90000)); break;
                case Category::WEB: payload = "user" + std::to_string(draw_index(rng, 100)) + "@mail.org"; break;
                default: payload = "Pat Alpha"; break;
            }
            std::size_t start = utf8::count_codepoints(text);
            text += payload;
            spans.push_back({start, start + utf8::count_codepoints(payload), c, {}});
            text += " ";
            add_plain();
        }
        Document d = doc_with("d" + std::to_string(trial), "pt" + std::to_string(trial % 23),
                              text, spans);
        auto p1 = apply_surrogates(d, key());
        auto p2 = apply_surrogates(d, key());
        CHECK(p1.output_text == p2.output_text);  // determinism
        utf8::Index idx(p1.output_text);
        REQUIRE(p1.output_spans.size() == spans.size());
        for (std::size_t i = 0; i < p1.output_spans.size(); ++i) {
            const auto& s = p1.output_spans[i];
            CHECK(idx.slice(p1.output_text, s.start, s.end) ==
                  p1.replacements[i].replacement_text);
        }
        int jitter = derive_jitter(key(), d.patient_id);
        CHECK(std::abs(jitter) >= 3);
        CHECK(std::abs(jitter) <= 90);
    }
}

TEST_CASE("surrogate corpus output and audit") {
    Corpus c;
    c.name = "mini";
    c.documents.push_back(doc_with("d1", "p1", "Jane Doe, 01/02/2023",
                                   {{0, 8, Category::PATIENT, {}}, {10, 20, Category::DATE, {}}}));
    auto run = surrogate_corpus(c, key());
    REQUIRE(run.output.documents.size() == 1);
    CHECK(run.output.documents[0].patient_id != "p1");
    CHECK(run.audit.size() == 2);
    for (const auto& e : run.audit) {
        CHECK(e.doc_id == "d1");
        CHECK(e.orig_len > 0);
    }

    auto dir = std::filesystem::temp_directory_path();
    auto cp = dir / "deid_surr.jsonl";
    auto ap = dir / "deid_audit.jsonl";
    save_surrogate_corpus(run, cp.string(), ap.string());
    std::ifstream in(cp);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("\"surrogated\":true") != std::string::npos);
    CHECK(line.find("Jane") == std::string::npos);
    std::ifstream audit(ap);
    std::getline(audit, line);
    CHECK(line.find("Jane") == std::string::npos);
    CHECK(line.find("orig_len") != std::string::npos);
    std::filesystem::remove(cp);
    std::filesystem::remove(ap);
}

TEST_CASE("key file loading") {
    auto dir = std::filesystem::temp_directory_path();
    auto pool = dir / "deid_pool.txt";
    auto kf = dir / "deid_key.json";
    {
        std::ofstream out(pool);
        out << "FIRST\nAva\nNoah\nLAST\nStone\nField\n";
    }
    {
        std::ofstream out(kf);
        out << R"({"secret_hex":"00112233aabbccdd","salt_hex":"beef","name_pool_path":")"
            << pool.string() << R"("})";
    }
    auto k = load_key(kf.string());
    CHECK(k.secret.size() == 8);
    CHECK(k.salt.size() == 2);
    CHECK(k.first_names == std::vector<std::string>{"Ava", "Noah"});
    CHECK(k.last_names == std::vector<std::string>{"Stone", "Field"});

    {
        std::ofstream out(kf);
        out << R"({"secret_hex":"0g","name_pool_path":")" << pool.string() << R"("})";
    }
    CHECK_THROWS_AS(load_key(kf.string()), ValidationError);
    std::filesystem::remove(pool);
    std::filesystem::remove(kf);
}
