// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact FP8 codecs (E4M3 / E5M2) and BF16 rounding emulation.
//
// E4M3: 1 sign, 4 exponent, 3 mantissa bits, bias 7, no infinities,
//       NaN = S.1111.111, largest finite value 448.
// E5M2: 1 sign, 5 exponent, 2 mantissa bits, bias 15, IEEE-style
//       infinities/NaNs, largest finite value 57344.
//
// Encoding rounds to nearest-even; magnitudes beyond the largest finite
// value saturate (never produce Inf/NaN codes).

#pragma once

#include <array>
#include <cstdint>

namespace fp8lab {

enum class Fp8SpecialPolicy {
    no_inf_single_nan,  // E4M3-style: S.1111.111 is the only NaN pattern
    ieee,               // E5M2-style: max exponent field encodes Inf/NaN
};

struct Fp8Format {
    int exponent_bits;
    int mantissa_bits;
    int bias;
    double max_finite;
    Fp8SpecialPolicy special_policy;

    static const Fp8Format& e4m3();
    static const Fp8Format& e5m2();

    const char* name() const { return exponent_bits == 4 ? "e4m3" : "e5m2"; }
};

// Round-to-nearest-even encode. NaN input yields the format's canonical NaN
// code; infinities and out-of-range magnitudes saturate to +-max_finite.
// The double overload is the reference path; the float overload is a
// bit-manipulation fast path producing identical codes for float inputs.
std::uint8_t encode_fp8(double value, const Fp8Format& format);
std::uint8_t encode_fp8(float value, const Fp8Format& format);

// Exact value of a code. Total over all 256 patterns: NaN codes decode to a
// quiet NaN, E5M2 infinity codes to +-infinity.
double decode_fp8(std::uint8_t code, const Fp8Format& format);

bool is_nan_code(std::uint8_t code, const Fp8Format& format);
bool is_inf_code(std::uint8_t code, const Fp8Format& format);

// decode(encode(x)) through a per-format lookup table.
double fake_quant_fp8(double value, const Fp8Format& format);

// Decode table for the hot quantization path (256 entries, index = code).
const std::array<float, 256>& decode_table(const Fp8Format& format);

// Nearest value with an 8-bit significand and float32 exponent range,
// ties to even. NaN passes through.
float bf16_round(float x);
double bf16_round(double x);

}  // namespace fp8lab
