#include "deid/cost.hpp"

#include <cmath>
#include <numeric>

namespace deid {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    return a == 0 ? 1 : a;
}

// Half-up rounding of num/den scaled by `scale` (num, den >= 0).
long long round_scaled(__int128 num, __int128 den, __int128 scale) {
    __int128 scaled = num * scale;
    __int128 q = scaled / den;
    __int128 r = scaled % den;
    if (2 * r >= den) ++q;
    return static_cast<long long>(q);
}

std::string group_thousands(long long v) {
    std::string digits = std::to_string(v);
    std::string out;
    int count = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (count && count % 3 == 0) out.insert(out.begin(), ',');
        out.insert(out.begin(), *it);
        ++count;
    }
    return out;
}

}  // namespace

Money Money::from_rational(__int128 num, __int128 den) {
    if (den == 0) throw ValidationError("money with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 g = gcd128(num, den);
    Money m;
    m.num_ = num / g;
    m.den_ = den / g;
    return m;
}

Money Money::operator+(const Money& o) const {
    return from_rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

long long Money::cents_half_up() const { return round_scaled(num_, den_, 100); }

long long Money::dollars_half_up() const { return round_scaled(num_, den_, 1); }

double Money::as_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string Money::format_cents() const {
    long long c = cents_half_up();
    return std::to_string(c / 100) + "." + (c % 100 < 10 ? "0" : "") + std::to_string(c % 100);
}

std::string Money::format_dollars() const {
    return "$" + group_thousands(dollars_half_up());
}

PriceSheet PriceSheet::from_dollars(double input_per_million, double output_per_million,
                                    double chars_per_token) {
    PriceSheet s;
    s.input_micro_per_million = static_cast<long long>(std::llround(input_per_million * 1e6));
    s.output_micro_per_million = static_cast<long long>(std::llround(output_per_million * 1e6));
    s.chars_per_token_centi = static_cast<long long>(std::llround(chars_per_token * 100));
    s.validate();
    return s;
}

void PriceSheet::validate() const {
    if (input_micro_per_million <= 0 || output_micro_per_million <= 0 ||
        chars_per_token_centi <= 0)
        throw ValidationError("price sheet values must be positive");
}

PriceSheet flex_price_sheet() { return PriceSheet::from_dollars(0.15, 1.25); }

namespace {

// tokens * (price micro-dollars per 1M tokens) as exact dollars.
Money token_cost(__int128 tokens_num, __int128 tokens_den, long long price_micro) {
    // dollars = tokens * price_micro / 1e12
    return Money::from_rational(tokens_num * price_micro,
                                tokens_den * static_cast<__int128>(1000000000000LL));
}

}  // namespace

CostBreakdown estimate_cost_tokens(long long input_tokens, long long output_tokens,
                                   const PriceSheet& sheet) {
    sheet.validate();
    if (input_tokens < 0 || output_tokens < 0)
        throw ValidationError("token counts must be nonnegative");
    CostBreakdown b;
    b.input_cost = token_cost(input_tokens, 1, sheet.input_micro_per_million);
    b.output_cost = token_cost(output_tokens, 1, sheet.output_micro_per_million);
    b.total = b.input_cost + b.output_cost;
    return b;
}

CostBreakdown estimate_cost_chars(long long input_chars, long long output_tokens,
                                  const PriceSheet& sheet) {
    sheet.validate();
    if (input_chars < 0 || output_tokens < 0)
        throw ValidationError("counts must be nonnegative");
    // input_tokens = chars * 100 / chars_per_token_centi, kept as a rational.
    CostBreakdown b;
    b.input_cost = token_cost(static_cast<__int128>(input_chars) * 100,
                              sheet.chars_per_token_centi, sheet.input_micro_per_million);
    b.output_cost = token_cost(output_tokens, 1, sheet.output_micro_per_million);
    b.total = b.input_cost + b.output_cost;
    return b;
}

double reduction_factor(const Money& a, const Money& b) {
    if (b.cents_half_up() == 0) throw ValidationError("reduction factor: division by zero");
    return static_cast<double>(a.cents_half_up()) / static_cast<double>(b.cents_half_up());
}

double round_sig(double value, int figures) {
    if (value == 0.0) return 0.0;
    double mag = std::pow(10.0, figures - 1 - static_cast<int>(std::floor(std::log10(std::fabs(value)))));
    return std::round(value * mag) / mag;
}

}  // namespace deid
