#include "deid/surrogate.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include "deid/utf8.hpp"

namespace deid {

using nlohmann::json;

void SurrogateKey::validate() const {
    if (secret.empty()) throw ValidationError("surrogate key secret is empty");
    if (first_names.empty() || last_names.empty())
        throw ValidationError("name pool needs FIRST and LAST sections with entries");
}

std::vector<std::uint8_t> hmac_sha256(const std::vector<std::uint8_t>& key, std::string_view msg) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
         reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), digest, &len);
    return std::vector<std::uint8_t>(digest, digest + len);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
    return to_hex(std::vector<std::uint8_t>(digest, digest + SHA256_DIGEST_LENGTH));
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0x0F]);
    }
    return out;
}

namespace {

std::vector<std::uint8_t> from_hex(const std::string& hex, const std::string& what) {
    if (hex.size() % 2 != 0) throw ValidationError(what + ": odd-length hex string");
    auto nibble = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw ValidationError(what + ": invalid hex character");
    };
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < hex.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
    return out;
}

// Keyed hash of a labeled message, folded to a u64 for pool indexing.
std::uint64_t keyed_u64(const SurrogateKey& key, const std::string& msg) {
    auto d = hmac_sha256(key.secret, msg);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
    return v;
}

// Deterministic byte stream for digit/letter substitution.
class KeyedStream {
public:
    KeyedStream(const SurrogateKey& key, const std::string& msg) : key_(key), msg_(msg) {}

    std::uint8_t next() {
        if (pos_ >= buf_.size()) {
            buf_ = hmac_sha256(key_.secret, msg_ + "#" + std::to_string(counter_++));
            pos_ = 0;
        }
        return buf_[pos_++];
    }
    char digit() { return static_cast<char>('0' + next() % 10); }
    char letter() { return static_cast<char>('a' + next() % 26); }

private:
    const SurrogateKey& key_;
    std::string msg_;
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
    int counter_ = 0;
};

std::string normalize_name(const std::string& s) {
    std::string out;
    bool ws = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            ws = !out.empty();
        } else {
            if (ws) out.push_back(' ');
            ws = false;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

enum class CapStyle { Lower, Title, Upper };

CapStyle cap_style(const std::string& word) {
    bool any_lower = false, any_upper = false;
    for (char c : word) {
        if (std::islower(static_cast<unsigned char>(c))) any_lower = true;
        if (std::isupper(static_cast<unsigned char>(c))) any_upper = true;
    }
    if (any_upper && !any_lower) return CapStyle::Upper;
    if (any_upper) return CapStyle::Title;
    return CapStyle::Lower;
}

std::string apply_cap(const std::string& word, CapStyle style) {
    std::string out = word;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    switch (style) {
        case CapStyle::Lower:
            break;
        case CapStyle::Title:
            if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
            break;
        case CapStyle::Upper:
            for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            break;
    }
    return out;
}

}  // namespace

SurrogateKey load_key(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open key file " + path);
    json obj;
    try {
        in >> obj;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": malformed JSON: " + e.what());
    }
    SurrogateKey key;
    key.secret = from_hex(obj.at("secret_hex").get<std::string>(), "secret_hex");
    if (obj.contains("salt_hex"))
        key.salt = from_hex(obj.at("salt_hex").get<std::string>(), "salt_hex");
    std::string pool_path = obj.at("name_pool_path").get<std::string>();
    std::ifstream pool(pool_path);
    if (!pool) throw ValidationError("cannot open name pool " + pool_path);
    std::string line;
    std::vector<std::string>* section = nullptr;
    while (std::getline(pool, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (line == "FIRST") {
            section = &key.first_names;
        } else if (line == "LAST") {
            section = &key.last_names;
        } else {
            if (!section) throw ValidationError(pool_path + ": name before FIRST/LAST header");
            section->push_back(line);
        }
    }
    key.validate();
    return key;
}

SurrogateKey builtin_key(const std::string& secret) {
    SurrogateKey key;
    key.secret.assign(secret.begin(), secret.end());
    key.first_names = {"Alex",   "Blake",  "Casey",  "Dana",   "Ellis",  "Frankie",
                       "Gray",   "Harper", "Indira", "Jordan", "Kendall", "Logan",
                       "Morgan", "Noor",   "Oakley", "Parker", "Quinn",  "Riley",
                       "Sasha",  "Taylor"};
    key.last_names = {"Abbott",   "Barnes",  "Castillo", "Dawson",  "Ellison", "Foster",
                      "Galloway", "Hendrix", "Ibarra",   "Jennings", "Keller", "Lambert",
                      "Mercer",   "Navarro", "Osborne",  "Pruitt",  "Quintana", "Rhodes",
                      "Sandoval", "Thayer"};
    key.validate();
    return key;
}

int derive_jitter(const SurrogateKey& key, const std::string& patient_id) {
    key.validate();
    if (patient_id.empty()) throw ValidationError("empty patient_id");
    auto digest = hmac_sha256(key.secret, patient_id);
    // Big-endian value mod 88, reduced byte by byte.
    unsigned r = 0;
    for (auto b : digest) r = (r * 256u + b) % 88u;
    int magnitude = 3 + static_cast<int>(r);  // [3, 90]
    int sign = (digest.back() & 1) ? -1 : 1;
    return sign * magnitude;
}

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return d[m - 1];
}

const char* kMonthsFull[] = {"January", "February", "March",     "April",   "May",      "June",
                             "July",    "August",   "September", "October", "November", "December"};
const char* kMonthsAbbrev[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

int month_from_name(const std::string& name, bool& abbrev) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (int i = 0; i < 12; ++i) {
        std::string full = kMonthsFull[i];
        for (char& c : full) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower == full) {
            abbrev = false;
            return i + 1;
        }
        std::string ab = kMonthsAbbrev[i];
        for (char& c : ab) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower == ab) {
            abbrev = true;
            return i + 1;
        }
    }
    return 0;
}

int resolve_two_digit_year(int yy) { return yy < 50 ? 2000 + yy : 1900 + yy; }

bool valid_day(std::optional<int> year, int month, int day) {
    if (month < 1 || month > 12 || day < 1) return false;
    // Leap-agnostic reference for partial dates: 2/29 stays acceptable.
    int y = year.value_or(2000);
    return day <= days_in_month(y, month);
}

std::string pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
    z += 719468;
    long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long yr = static_cast<long>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

std::vector<ParsedDate> parse_dates(const std::string& text) {
    // Regexes run over UTF-8 bytes (date syntax is ASCII); byte offsets are
    // translated to codepoint offsets at the end.
    static const std::regex iso(R"((\d{4})-(\d{2})-(\d{2}))");
    static const std::regex slash(R"((\d{1,2})/(\d{1,2})(?:/(\d{4}|\d{2}))?)");
    static const std::regex month_name(
        R"((January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Oct|Nov|Dec)\s+(\d{1,2})(,)?\s+(\d{4}))",
        std::regex::icase);

    struct Raw {
        std::size_t begin, len;
        ParsedDate date;
    };
    std::vector<Raw> raws;

    auto prev_ok = [&](std::size_t pos, std::string_view banned) {
        return pos == 0 || banned.find(text[pos - 1]) == std::string_view::npos;
    };
    auto next_ok = [&](std::size_t end, std::string_view banned) {
        return end >= text.size() || banned.find(text[end]) == std::string_view::npos;
    };

    for (auto it = std::sregex_iterator(text.begin(), text.end(), iso);
         it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::size_t pos = static_cast<std::size_t>(m.position());
        std::size_t end = pos + m.length();
        if (!prev_ok(pos, "0123456789-") || !next_ok(end, "0123456789")) continue;
        ParsedDate d;
        d.year = std::stoi(m[1]);
        d.month = std::stoi(m[2]);
        d.day = std::stoi(m[3]);
        if (!valid_day(d.year, d.month, d.day)) continue;
        d.format = DateFormat::IsoYmd;
        d.month_width = 2;
        d.day_width = 2;
        d.year_digits = 4;
        d.source = m.str();
        raws.push_back({pos, static_cast<std::size_t>(m.length()), d});
    }

    for (auto it = std::sregex_iterator(text.begin(), text.end(), slash);
         it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::size_t pos = static_cast<std::size_t>(m.position());
        std::size_t end = pos + m.length();
        if (!prev_ok(pos, "0123456789/") || !next_ok(end, "0123456789/")) continue;
        ParsedDate d;
        d.month = std::stoi(m[1]);
        d.day = std::stoi(m[2]);
        if (m[3].matched) {
            std::string ys = m[3];
            d.year_digits = static_cast<int>(ys.size());
            d.year = d.year_digits == 2 ? resolve_two_digit_year(std::stoi(ys)) : std::stoi(ys);
            d.format = DateFormat::SlashMDY;
        } else {
            d.format = DateFormat::SlashMD;
        }
        if (!valid_day(d.year, d.month, d.day)) continue;
        d.month_width = static_cast<int>(m[1].length());
        d.day_width = static_cast<int>(m[2].length());
        d.source = m.str();
        raws.push_back({pos, static_cast<std::size_t>(m.length()), d});
    }

    for (auto it = std::sregex_iterator(text.begin(), text.end(), month_name);
         it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::size_t pos = static_cast<std::size_t>(m.position());
        std::size_t end = pos + m.length();
        if (!prev_ok(pos, "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ") ||
            !next_ok(end, "0123456789"))
            continue;
        ParsedDate d;
        bool abbrev = false;
        d.month = month_from_name(m[1], abbrev);
        if (d.month == 0) continue;
        d.day = std::stoi(m[2]);
        d.year = std::stoi(m[4]);
        if (!valid_day(d.year, d.month, d.day)) continue;
        d.format = DateFormat::MonthNameDY;
        d.month_abbrev = abbrev;
        d.comma_before_year = m[3].matched;
        d.day_width = static_cast<int>(m[2].length());
        d.year_digits = 4;
        d.source = m.str();
        raws.push_back({pos, static_cast<std::size_t>(m.length()), d});
    }

    // Longest match wins on overlap ("1/2/2023" is one date, not "1/2").
    std::sort(raws.begin(), raws.end(), [](const Raw& a, const Raw& b) {
        if (a.begin != b.begin) return a.begin < b.begin;
        return a.len > b.len;
    });
    std::vector<ParsedDate> out;
    utf8::Index index(text);
    std::size_t cursor = 0;
    for (auto& r : raws) {
        if (r.begin < cursor) continue;
        cursor = r.begin + r.len;
        r.date.start = index.cp_of(r.begin);
        r.date.end = index.cp_of(r.begin + r.len);
        out.push_back(std::move(r.date));
    }
    return out;
}

std::optional<std::string> shift_date(const ParsedDate& d, int jitter_days,
                                      std::optional<int> reference_year) {
    std::optional<int> year = d.year;
    if (!year) {
        if (!reference_year) return std::nullopt;
        year = *reference_year;
        if (!valid_day(year, d.month, d.day)) return std::nullopt;  // e.g. 2/29 in a common year
    }
    long serial = days_from_civil(*year, d.month, d.day) + jitter_days;
    int ny, nm, nd;
    civil_from_days(serial, ny, nm, nd);

    std::ostringstream out;
    switch (d.format) {
        case DateFormat::SlashMDY:
            out << pad(nm, d.month_width) << '/' << pad(nd, d.day_width) << '/'
                << (d.year_digits == 2 ? pad(ny % 100, 2) : pad(ny, 4));
            break;
        case DateFormat::SlashMD:
            out << pad(nm, d.month_width) << '/' << pad(nd, d.day_width);
            break;
        case DateFormat::IsoYmd:
            out << pad(ny, 4) << '-' << pad(nm, 2) << '-' << pad(nd, 2);
            break;
        case DateFormat::MonthNameDY: {
            std::string name = d.month_abbrev ? kMonthsAbbrev[nm - 1] : kMonthsFull[nm - 1];
            // Match the source month token's capitalization.
            CapStyle style = cap_style(d.source.substr(0, d.source.find_first_of(" \t")));
            out << apply_cap(name, style) << ' ' << pad(nd, d.day_width);
            if (d.comma_before_year) out << ',';
            out << ' ' << pad(ny, 4);
            break;
        }
    }
    return out.str();
}

namespace {

const std::vector<std::pair<int, const char*>>& age_bands() {
    static const std::vector<std::pair<int, const char*>> bands = {
        {18, "0-17"}, {30, "18-29"}, {45, "30-44"}, {60, "45-59"},
        {75, "60-74"}, {90, "75-89"}};
    return bands;
}

std::string age_band(int age) {
    for (const auto& [edge, label] : age_bands())
        if (age < edge) return label;
    return "90+";
}

// Splits a token into (leading punct, alphabetic-or-mixed core, trailing punct).
void split_affixes(const std::string& tok, std::string& prefix, std::string& core,
                   std::string& suffix) {
    std::size_t a = 0, b = tok.size();
    while (a < b && !std::isalnum(static_cast<unsigned char>(tok[a]))) ++a;
    while (b > a && !std::isalnum(static_cast<unsigned char>(tok[b - 1]))) --b;
    prefix = tok.substr(0, a);
    core = tok.substr(a, b - a);
    suffix = tok.substr(b);
}

std::string pooled_name(const SurrogateKey& key, const std::vector<std::string>& pool,
                        const std::string& norm, std::size_t token_index,
                        const std::string& original_core) {
    std::uint64_t idx =
        keyed_u64(key, "name:" + norm + ":" + std::to_string(token_index)) % pool.size();
    return apply_cap(pool[idx], cap_style(original_core));
}

std::string replace_name(const std::string& text, const SurrogateKey& key, bool person) {
    std::string norm = normalize_name(text);
    auto tokens = utf8::tokenize(text);
    // Indices of tokens with an alphabetic core; the last one draws from the
    // last-name pool for person names.
    std::vector<std::size_t> alpha;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string p, c, s;
        split_affixes(tokens[i].text, p, c, s);
        if (!c.empty() && std::isalpha(static_cast<unsigned char>(c[0]))) alpha.push_back(i);
    }
    utf8::Index index(text);
    std::string out;
    std::size_t byte_cursor = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::size_t tb = index.byte_of(tokens[i].start);
        std::size_t te = index.byte_of(tokens[i].end);
        out += text.substr(byte_cursor, tb - byte_cursor);  // inter-token whitespace
        std::string p, c, s;
        split_affixes(tokens[i].text, p, c, s);
        if (!c.empty() && std::isalpha(static_cast<unsigned char>(c[0]))) {
            bool last_alpha = person && !alpha.empty() && i == alpha.back() && alpha.size() > 1;
            const auto& pool = last_alpha ? key.last_names
                                          : (person ? key.first_names : key.last_names);
            out += p + pooled_name(key, pool, norm, i, c) + s;
        } else {
            // Numeric or punctuation token: rehash digits, keep the rest.
            KeyedStream stream(key, "tok:" + norm + ":" + std::to_string(i));
            for (char ch : tokens[i].text)
                out += std::isdigit(static_cast<unsigned char>(ch)) ? stream.digit() : ch;
        }
        byte_cursor = te;
    }
    out += text.substr(byte_cursor);
    return out;
}

}  // namespace

std::string surrogate_for(const std::string& span_text, Category category,
                          const SurrogateKey& key, const std::string& /*patient_id*/) {
    key.validate();
    switch (category) {
        case Category::PATIENT:
        case Category::DOCTOR:
            return replace_name(span_text, key, /*person=*/true);
        case Category::ID: {
            std::string hex = to_hex(hmac_sha256(key.secret, "id:" + span_text));
            std::size_t want = utf8::count_codepoints(span_text);
            while (hex.size() < want) hex += hex;
            return hex.substr(0, want);
        }
        case Category::PHONE: {
            KeyedStream stream(key, "phone:" + span_text);
            std::string out;
            for (char c : span_text)
                out += std::isdigit(static_cast<unsigned char>(c)) ? stream.digit() : c;
            return out;
        }
        case Category::LOCATION:
        case Category::HOSPITAL:
            return replace_name(span_text, key, /*person=*/false);
        case Category::AGE: {
            // First integer in the text is the age value.
            std::size_t i = 0;
            while (i < span_text.size() && !std::isdigit(static_cast<unsigned char>(span_text[i])))
                ++i;
            if (i == span_text.size()) return "AGE";
            int age = 0;
            while (i < span_text.size() && std::isdigit(static_cast<unsigned char>(span_text[i])))
                age = age * 10 + (span_text[i++] - '0');
            return age_band(age);
        }
        case Category::WEB: {
            KeyedStream stream(key, "web:" + span_text);
            std::string out;
            for (char c : span_text) {
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    out += stream.digit();
                } else if (std::isalpha(static_cast<unsigned char>(c))) {
                    char r = stream.letter();
                    out += std::isupper(static_cast<unsigned char>(c))
                               ? static_cast<char>(std::toupper(static_cast<unsigned char>(r)))
                               : r;
                } else {
                    out += c;
                }
            }
            return out;
        }
        default:
            throw ValidationError("no surrogate rule for category " +
                                  std::string(to_string(category)));
    }
}

SurrogatePlan apply_surrogates(const Document& doc, const SurrogateKey& key,
                               std::optional<int> reference_year) {
    key.validate();
    SurrogatePlan plan;
    plan.doc_id = doc.doc_id;

    // Replacements must not overlap, regardless of category.
    for (std::size_t i = 1; i < doc.spans.size(); ++i)
        if (doc.spans[i].start < doc.spans[i - 1].end)
            throw ValidationError("overlapping replacements in doc " + doc.doc_id + " at [" +
                                  std::to_string(doc.spans[i].start) + "," +
                                  std::to_string(doc.spans[i].end) + ")");

    utf8::Index index(doc.text);
    int jitter = doc.patient_id.empty() ? 0 : derive_jitter(key, doc.patient_id);

    std::string out_text;
    std::size_t byte_cursor = 0;
    std::size_t cp_out = 0;  // codepoint length of out_text so far
    for (const auto& span : doc.spans) {
        std::size_t span_b0 = index.byte_of(span.start);
        std::size_t span_b1 = index.byte_of(span.end);
        std::string between = doc.text.substr(byte_cursor, span_b0 - byte_cursor);
        out_text += between;
        cp_out += utf8::count_codepoints(between);

        std::string original = doc.text.substr(span_b0, span_b1 - span_b0);
        std::string replacement;
        if (span.category == Category::DATE) {
            auto dates = parse_dates(original);
            if (dates.empty()) {
                plan.flags.push_back("unparseable date in " + doc.doc_id + " at [" +
                                     std::to_string(span.start) + "," + std::to_string(span.end) + ")");
                replacement = original;
            } else {
                auto shifted = shift_date(dates.front(), jitter, reference_year);
                if (!shifted) {
                    plan.flags.push_back("unshiftable partial date in " + doc.doc_id + " at [" +
                                         std::to_string(span.start) + "," +
                                         std::to_string(span.end) + ")");
                    replacement = original;
                } else {
                    // Text outside the parsed date within the span (e.g. a
                    // timestamp's time-of-day) is preserved.
                    utf8::Index span_index(original);
                    replacement = span_index.slice(original, 0, dates.front().start) + *shifted +
                                  original.substr(span_index.byte_of(dates.front().end));
                }
            }
        } else if (span.category == Category::OTHER) {
            plan.flags.push_back("OTHER span kept verbatim in " + doc.doc_id + " at [" +
                                 std::to_string(span.start) + "," + std::to_string(span.end) + ")");
            replacement = original;
        } else {
            replacement = surrogate_for(original, span.category, key, doc.patient_id);
        }

        std::size_t rep_len = utf8::count_codepoints(replacement);
        plan.replacements.push_back({span.start, span.end, replacement, span.category});
        plan.output_spans.push_back({cp_out, cp_out + rep_len, span.category, span.confidence});
        out_text += replacement;
        cp_out += rep_len;
        byte_cursor = span_b1;
    }
    out_text += doc.text.substr(byte_cursor);

    plan.output_text = std::move(out_text);
    plan.text_hash = sha256_hex(plan.output_text);
    plan.patient_hash =
        doc.patient_id.empty() ? "" : to_hex(hmac_sha256(key.secret, "patient:" + doc.patient_id));
    return plan;
}

SurrogateRun surrogate_corpus(const Corpus& corpus, const SurrogateKey& key,
                              std::optional<int> reference_year) {
    SurrogateRun run;
    run.output.name = corpus.name + ".surrogate";
    for (const auto& doc : corpus.documents) {
        SurrogatePlan plan = apply_surrogates(doc, key, reference_year);
        Document out;
        out.doc_id = doc.doc_id;
        out.patient_id = plan.patient_hash;
        out.text = plan.output_text;
        out.note_type = doc.note_type;
        out.demographics = doc.demographics;
        out.spans = plan.output_spans;
        validate_document(out);
        run.output.documents.push_back(std::move(out));
        for (const auto& r : plan.replacements)
            run.audit.push_back({doc.doc_id, r.category, r.orig_end - r.orig_start,
                                 utf8::count_codepoints(r.replacement_text)});
        run.plans.push_back(std::move(plan));
    }
    return run;
}

void save_surrogate_corpus(const SurrogateRun& run, const std::string& corpus_path,
                           const std::string& audit_path) {
    std::ofstream out(corpus_path);
    if (!out) throw ValidationError("cannot write " + corpus_path);
    for (std::size_t i = 0; i < run.output.documents.size(); ++i) {
        const auto& doc = run.output.documents[i];
        const auto& plan = run.plans[i];
        json rec;
        rec["doc_id"] = doc.doc_id;
        rec["patient_id"] = doc.patient_id;
        rec["text"] = doc.text;
        rec["note_type"] = doc.note_type;
        rec["demographics"] = json::object();
        for (const auto& [k, v] : doc.demographics) rec["demographics"][k] = v;
        rec["spans"] = json::array();
        for (const auto& s : doc.spans)
            rec["spans"].push_back(
                {{"start", s.start}, {"end", s.end}, {"label", std::string(to_string(s.category))}});
        rec["text_hash"] = plan.text_hash;
        rec["patient_hash"] = plan.patient_hash;
        rec["flags"] = plan.flags;
        // Marker so a second pass can refuse double application.
        rec["surrogated"] = true;
        out << rec.dump() << '\n';
    }
    std::ofstream audit(audit_path);
    if (!audit) throw ValidationError("cannot write " + audit_path);
    for (const auto& e : run.audit) {
        json rec = {{"doc_id", e.doc_id},
                    {"category", std::string(to_string(e.category))},
                    {"orig_len", e.orig_len},
                    {"new_len", e.new_len}};
        audit << rec.dump() << '\n';
    }
}

}  // namespace deid
