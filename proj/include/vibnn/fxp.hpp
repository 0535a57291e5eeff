#ifndef VIBNN_FXP_HPP
#define VIBNN_FXP_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vibnn::fxp {

// Saturating two's-complement fixed point. Value = raw * 2^-frac_bits.
struct FixedSpec {
    int total_bits = 8;
    int frac_bits = 5;
    bool is_signed = true;

    void validate() const;
    int64_t raw_min() const { return is_signed ? -(int64_t(1) << (total_bits - 1)) : 0; }
    int64_t raw_max() const {
        return is_signed ? (int64_t(1) << (total_bits - 1)) - 1
                         : (int64_t(1) << total_bits) - 1;
    }
    double step() const;
    double real_min() const { return double(raw_min()) * step(); }
    double real_max() const { return double(raw_max()) * step(); }
    bool operator==(const FixedSpec&) const = default;
};

struct FxVal {
    int32_t raw = 0;
    FixedSpec spec;
    bool saturated = false;

    double to_real() const { return double(raw) * spec.step(); }
};

// Round-to-nearest-even division of v by 2^shift (shift >= 0).
int64_t rne_shift_right(int64_t v, int shift);

// Saturate a raw integer to the spec range; sets *saturated when clamped.
int64_t saturate_raw(int64_t raw, const FixedSpec& spec, bool* saturated);

FxVal quantize(double x, const FixedSpec& spec);
FxVal fx_add(const FxVal& a, const FxVal& b);
FxVal fx_mul(const FxVal& a, const FxVal& b);

// Default spec for the 8-bit GRN / inference datapath: Q2.5 signed, range ±4.
inline FixedSpec default_inference_spec() { return FixedSpec{8, 5, true}; }

}  // namespace vibnn::fxp

#endif
