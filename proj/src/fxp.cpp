#include "vibnn/fxp.hpp"

#include <cmath>

namespace vibnn::fxp {

void FixedSpec::validate() const {
    if (total_bits < 2 || total_bits > 32)
        throw std::invalid_argument("FixedSpec: total_bits must be in [2, 32]");
    if (frac_bits < 0 || frac_bits >= total_bits)
        throw std::invalid_argument("FixedSpec: frac_bits must be in [0, total_bits)");
}

double FixedSpec::step() const { return std::ldexp(1.0, -frac_bits); }

int64_t rne_shift_right(int64_t v, int shift) {
    if (shift == 0) return v;
    const int64_t floor_part = v >> shift;
    const int64_t rem = v - (floor_part << shift);
    const int64_t half = int64_t(1) << (shift - 1);
    if (rem > half) return floor_part + 1;
    if (rem < half) return floor_part;
    // tie: round to even
    return (floor_part & 1) ? floor_part + 1 : floor_part;
}

int64_t saturate_raw(int64_t raw, const FixedSpec& spec, bool* saturated) {
    const int64_t lo = spec.raw_min(), hi = spec.raw_max();
    if (raw < lo) {
        if (saturated) *saturated = true;
        return lo;
    }
    if (raw > hi) {
        if (saturated) *saturated = true;
        return hi;
    }
    return raw;
}

FxVal quantize(double x, const FixedSpec& spec) {
    spec.validate();
    FxVal out;
    out.spec = spec;
    const double scaled = std::ldexp(x, spec.frac_bits);
    // round-half-even on the real-valued grid
    double r = std::nearbyint(scaled);  // assumes default FE_TONEAREST (ties to even)
    if (!std::isfinite(r)) r = scaled > 0 ? 1e18 : -1e18;
    int64_t raw;
    if (r >= 9.2e18) raw = spec.raw_max();
    else if (r <= -9.2e18) raw = spec.raw_min();
    else raw = int64_t(r);
    out.raw = int32_t(saturate_raw(raw, spec, &out.saturated));
    return out;
}

FxVal fx_add(const FxVal& a, const FxVal& b) {
    if (!(a.spec == b.spec)) throw std::invalid_argument("fx_add: spec mismatch");
    FxVal out;
    out.spec = a.spec;
    out.raw = int32_t(saturate_raw(int64_t(a.raw) + int64_t(b.raw), a.spec, &out.saturated));
    return out;
}

FxVal fx_mul(const FxVal& a, const FxVal& b) {
    if (!(a.spec == b.spec)) throw std::invalid_argument("fx_mul: spec mismatch");
    FxVal out;
    out.spec = a.spec;
    const int64_t prod = int64_t(a.raw) * int64_t(b.raw);
    const int64_t scaled = rne_shift_right(prod, a.spec.frac_bits);
    out.raw = int32_t(saturate_raw(scaled, a.spec, &out.saturated));
    return out;
}

}  // namespace vibnn::fxp
