#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deid::utf8 {

// All span offsets in this toolkit index Unicode scalar values, not bytes.
// These helpers translate between byte positions in a UTF-8 buffer and
// codepoint positions.

std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);

// Byte <-> codepoint offset table for one string.
class Index {
public:
    explicit Index(std::string_view text);

    std::size_t codepoints() const { return cp_to_byte_.size() - 1; }

    std::size_t byte_of(std::size_t cp_offset) const;
    std::size_t cp_of(std::size_t byte_offset) const;

    // Substring [cp_start, cp_end) as UTF-8 bytes.
    std::string slice(std::string_view text, std::size_t cp_start, std::size_t cp_end) const;

private:
    std::vector<std::size_t> cp_to_byte_;  // cp_to_byte_[i] = byte offset of codepoint i; last entry = size
};

std::size_t count_codepoints(std::string_view s);

struct Token {
    std::string text;
    std::size_t start = 0;  // codepoint offsets
    std::size_t end = 0;
};

// Maximal non-whitespace runs; whitespace is ASCII space, tab, CR, LF, FF, VT.
std::vector<Token> tokenize(std::string_view text);

}  // namespace deid::utf8
