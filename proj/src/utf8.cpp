#include "deid/utf8.hpp"

namespace deid::utf8 {

namespace {

[[noreturn]] void bad_utf8(std::size_t pos) {
    throw std::runtime_error("invalid UTF-8 at byte " + std::to_string(pos));
}

// Length of the sequence starting with lead byte b, or 0 if b is not a lead byte.
int seq_len(unsigned char b) {
    if (b < 0x80) return 1;
    if ((b & 0xE0) == 0xC0) return 2;
    if ((b & 0xF0) == 0xE0) return 3;
    if ((b & 0xF8) == 0xF0) return 4;
    return 0;
}

bool is_ws(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

}  // namespace

std::u32string decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char b = static_cast<unsigned char>(s[i]);
        int n = seq_len(b);
        if (n == 0 || i + n > s.size()) bad_utf8(i);
        char32_t c = 0;
        switch (n) {
            case 1: c = b; break;
            case 2: c = b & 0x1F; break;
            case 3: c = b & 0x0F; break;
            case 4: c = b & 0x07; break;
        }
        for (int k = 1; k < n; ++k) {
            unsigned char cont = static_cast<unsigned char>(s[i + k]);
            if ((cont & 0xC0) != 0x80) bad_utf8(i + k);
            c = (c << 6) | (cont & 0x3F);
        }
        out.push_back(c);
        i += n;
    }
    return out;
}

std::string encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

Index::Index(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        cp_to_byte_.push_back(i);
        int n = seq_len(static_cast<unsigned char>(text[i]));
        if (n == 0 || i + n > text.size()) bad_utf8(i);
        i += n;
    }
    cp_to_byte_.push_back(text.size());
}

std::size_t Index::byte_of(std::size_t cp_offset) const {
    if (cp_offset >= cp_to_byte_.size())
        throw std::out_of_range("codepoint offset " + std::to_string(cp_offset) + " out of range");
    return cp_to_byte_[cp_offset];
}

std::size_t Index::cp_of(std::size_t byte_offset) const {
    // cp_to_byte_ is strictly increasing; binary search for the codepoint
    // whose byte offset equals byte_offset.
    std::size_t lo = 0, hi = cp_to_byte_.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (cp_to_byte_[mid] < byte_offset)
            lo = mid + 1;
        else
            hi = mid;
    }
    if (cp_to_byte_[lo] != byte_offset)
        throw std::invalid_argument("byte offset " + std::to_string(byte_offset) +
                                    " is not a codepoint boundary");
    return lo;
}

std::string Index::slice(std::string_view text, std::size_t cp_start, std::size_t cp_end) const {
    std::size_t b0 = byte_of(cp_start);
    std::size_t b1 = byte_of(cp_end);
    return std::string(text.substr(b0, b1 - b0));
}

std::size_t count_codepoints(std::string_view s) {
    std::size_t n = 0, i = 0;
    while (i < s.size()) {
        int len = seq_len(static_cast<unsigned char>(s[i]));
        if (len == 0 || i + len > s.size()) bad_utf8(i);
        i += len;
        ++n;
    }
    return n;
}

std::vector<Token> tokenize(std::string_view text) {
    std::u32string cps = decode(text);
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_ws(cps[i])) ++i;
        if (i >= cps.size()) break;
        std::size_t start = i;
        while (i < cps.size() && !is_ws(cps[i])) ++i;
        out.push_back({encode(std::u32string_view(cps).substr(start, i - start)), start, i});
    }
    return out;
}

}  // namespace deid::utf8
