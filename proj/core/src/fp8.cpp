// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/fp8.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace fp8lab {

const Fp8Format& Fp8Format::e4m3() {
    static const Fp8Format fmt{4, 3, 7, 448.0, Fp8SpecialPolicy::no_inf_single_nan};
    return fmt;
}

const Fp8Format& Fp8Format::e5m2() {
    static const Fp8Format fmt{5, 2, 15, 57344.0, Fp8SpecialPolicy::ieee};
    return fmt;
}

namespace {

struct FormatMasks {
    int exp_field_max;   // all-ones exponent field
    int mant_max;        // all-ones mantissa field
    std::uint8_t max_finite_code;
    std::uint8_t nan_code;
};

FormatMasks masks_of(const Fp8Format& f) {
    FormatMasks m;
    m.exp_field_max = (1 << f.exponent_bits) - 1;
    m.mant_max = (1 << f.mantissa_bits) - 1;
    if (f.special_policy == Fp8SpecialPolicy::no_inf_single_nan) {
        // Largest finite pattern is S.1111.110: the all-ones pattern is NaN.
        m.max_finite_code =
            static_cast<std::uint8_t>((m.exp_field_max << f.mantissa_bits) | (m.mant_max - 1));
        m.nan_code = static_cast<std::uint8_t>((m.exp_field_max << f.mantissa_bits) | m.mant_max);
    } else {
        // Largest finite pattern sits just below the Inf exponent field.
        m.max_finite_code =
            static_cast<std::uint8_t>(((m.exp_field_max - 1) << f.mantissa_bits) | m.mant_max);
        m.nan_code =
            static_cast<std::uint8_t>((m.exp_field_max << f.mantissa_bits) | m.mant_max);
    }
    return m;
}

}  // namespace

std::uint8_t encode_fp8(double value, const Fp8Format& format) {
    const FormatMasks m = masks_of(format);
    const std::uint8_t sign = std::signbit(value) ? 0x80 : 0x00;

    if (std::isnan(value)) {
        return m.nan_code;  // canonical positive NaN
    }
    if (std::isinf(value)) {
        return static_cast<std::uint8_t>(sign | m.max_finite_code);
    }

    const double a = std::fabs(value);
    if (a == 0.0) {
        return sign;  // signed zero
    }

    const int min_normal_exp = 1 - format.bias;
    const double subnormal_step = std::ldexp(1.0, min_normal_exp - format.mantissa_bits);

    int exp2;
    std::frexp(a, &exp2);        // a = f * 2^exp2, f in [0.5, 1)
    const int value_exp = exp2 - 1;  // a = 1.f * 2^value_exp

    if (value_exp < min_normal_exp) {
        // Subnormal range: uniform grid of subnormal_step. A result that
        // rounds up to 2^mantissa_bits carries into the lowest normal binade
        // through the integer representation.
        const double q = std::rint(a / subnormal_step);
        return static_cast<std::uint8_t>(sign | static_cast<std::uint8_t>(q));
    }

    const double step = std::ldexp(1.0, value_exp - format.mantissa_bits);
    long long q = static_cast<long long>(std::rint(a / step));  // in [2^mant, 2^(mant+1)]
    int e = value_exp;
    if (q == (2LL << format.mantissa_bits)) {
        q >>= 1;
        ++e;
    }
    int biased = e + format.bias;
    int mant = static_cast<int>(q) - (1 << format.mantissa_bits);

    const int max_biased =
        format.special_policy == Fp8SpecialPolicy::no_inf_single_nan ? m.exp_field_max
                                                                     : m.exp_field_max - 1;
    if (biased > max_biased ||
        (format.special_policy == Fp8SpecialPolicy::no_inf_single_nan && biased == max_biased &&
         mant == m.mant_max)) {
        return static_cast<std::uint8_t>(sign | m.max_finite_code);
    }
    return static_cast<std::uint8_t>(sign | (biased << format.mantissa_bits) | mant);
}

std::uint8_t encode_fp8(float value, const Fp8Format& format) {
    const bool e4m3 = format.special_policy == Fp8SpecialPolicy::no_inf_single_nan;
    const int mant_bits = format.mantissa_bits;
    const int shift = 23 - mant_bits;
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 31) << 7;
    std::uint32_t mag = bits & 0x7FFFFFFFu;

    if (mag > 0x7F800000u) {
        return 0x7F;  // canonical NaN pattern in both formats
    }
    const float a = std::bit_cast<float>(mag);
    if (!(a <= static_cast<float>(format.max_finite))) {  // Inf or beyond the grid
        const std::uint8_t max_code = e4m3 ? 0x7E : 0x7B;
        return static_cast<std::uint8_t>(sign | max_code);
    }
    const std::uint32_t min_normal = static_cast<std::uint32_t>(127 + 1 - format.bias) << 23;
    if (mag < min_normal) {
        // Magic-add rounding onto the subnormal grid 2^(1-bias-mant); a carry
        // into the exponent field lands exactly on the smallest normal code.
        const std::uint32_t magic =
            static_cast<std::uint32_t>(127 + 23 + 1 - format.bias - mant_bits) << 23;
        const float rounded = std::bit_cast<float>(mag) + std::bit_cast<float>(magic);
        const std::uint32_t q = std::bit_cast<std::uint32_t>(rounded) - magic;
        return static_cast<std::uint8_t>(sign | q);
    }
    // Normal range: re-bias the exponent and round the mantissa to nearest
    // even through integer arithmetic (carries propagate into the exponent).
    const std::uint32_t lsb = (mag >> shift) & 1u;
    mag += (static_cast<std::uint32_t>(format.bias - 127) << 23) +
           ((1u << (shift - 1)) - 1) + lsb;
    return static_cast<std::uint8_t>(sign | (mag >> shift));
}

double decode_fp8(std::uint8_t code, const Fp8Format& format) {
    const FormatMasks m = masks_of(format);
    const int sign = (code & 0x80) ? -1 : 1;
    const int exp_field = (code >> format.mantissa_bits) & m.exp_field_max;
    const int mant = code & m.mant_max;

    if (format.special_policy == Fp8SpecialPolicy::no_inf_single_nan) {
        if (exp_field == m.exp_field_max && mant == m.mant_max) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    } else if (exp_field == m.exp_field_max) {
        if (mant == 0) {
            return sign * std::numeric_limits<double>::infinity();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    if (exp_field == 0) {
        // Subnormal (or zero): mant * 2^(1 - bias - mantissa_bits).
        const double v = std::ldexp(static_cast<double>(mant), 1 - format.bias - format.mantissa_bits);
        return sign < 0 ? -v : v;  // keeps -0.0 for code 0x80
    }
    const double frac = 1.0 + std::ldexp(static_cast<double>(mant), -format.mantissa_bits);
    const double v = std::ldexp(frac, exp_field - format.bias);
    return sign * v;
}

bool is_nan_code(std::uint8_t code, const Fp8Format& format) {
    return std::isnan(decode_fp8(code, format));
}

bool is_inf_code(std::uint8_t code, const Fp8Format& format) {
    return std::isinf(decode_fp8(code, format));
}

const std::array<float, 256>& decode_table(const Fp8Format& format) {
    static const std::array<float, 256> e4m3_table = [] {
        std::array<float, 256> t{};
        for (int c = 0; c < 256; ++c) {
            t[static_cast<std::size_t>(c)] =
                static_cast<float>(decode_fp8(static_cast<std::uint8_t>(c), Fp8Format::e4m3()));
        }
        return t;
    }();
    static const std::array<float, 256> e5m2_table = [] {
        std::array<float, 256> t{};
        for (int c = 0; c < 256; ++c) {
            t[static_cast<std::size_t>(c)] =
                static_cast<float>(decode_fp8(static_cast<std::uint8_t>(c), Fp8Format::e5m2()));
        }
        return t;
    }();
    return format.special_policy == Fp8SpecialPolicy::no_inf_single_nan ? e4m3_table : e5m2_table;
}

double fake_quant_fp8(double value, const Fp8Format& format) {
    return decode_fp8(encode_fp8(value, format), format);
}

float bf16_round(float x) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    if ((bits & 0x7F800000u) == 0x7F800000u) {
        return x;  // Inf/NaN pass through
    }
    const std::uint32_t lsb = (bits >> 16) & 1u;
    bits += 0x7FFFu + lsb;
    bits &= 0xFFFF0000u;
    return std::bit_cast<float>(bits);
}

double bf16_round(double x) {
    return static_cast<double>(bf16_round(static_cast<float>(x)));
}

}  // namespace fp8lab
