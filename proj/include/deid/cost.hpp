#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "deid/corpus.hpp"

namespace deid {

// Exact decimal money value, stored as a reduced rational number of dollars.
// All arithmetic stays exact; rounding (half-up) happens only at output.
class Money {
public:
    Money() = default;
    static Money from_rational(__int128 num, __int128 den);

    Money operator+(const Money& o) const;

    long long cents_half_up() const;
    long long dollars_half_up() const;
    double as_double() const;

    // "1.95", "23737.50" -- exact cents.
    std::string format_cents() const;
    // "$23,738" -- nearest dollar with thousands separators.
    std::string format_dollars() const;

private:
    __int128 num_ = 0;
    __int128 den_ = 1;
};

struct PriceSheet {
    long long input_micro_per_million = 0;   // micro-dollars per 1M input tokens
    long long output_micro_per_million = 0;  // micro-dollars per 1M output tokens
    long long chars_per_token_centi = 400;   // chars/token scaled by 100 (default 4.00)

    static PriceSheet from_dollars(double input_per_million, double output_per_million,
                                   double chars_per_token = 4.0);
    void validate() const;
};

// Gemini 2.5 Flash Flex/Batch tier: $0.15 / $1.25 per 1M tokens.
PriceSheet flex_price_sheet();

struct CostBreakdown {
    Money input_cost;
    Money output_cost;
    Money total;
};

// Token counts may be given directly or derived from a character count via
// the sheet's chars-per-token ratio.
CostBreakdown estimate_cost_chars(long long input_chars, long long output_tokens,
                                  const PriceSheet& sheet);
CostBreakdown estimate_cost_tokens(long long input_tokens, long long output_tokens,
                                   const PriceSheet& sheet);

// a / b; throws ValidationError when b rounds to zero cents.
double reduction_factor(const Money& a, const Money& b);

// Round to the given number of significant figures (68823 -> 68800 at 3).
double round_sig(double value, int figures);

}  // namespace deid
