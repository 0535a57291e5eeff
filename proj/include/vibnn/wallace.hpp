#ifndef VIBNN_WALLACE_HPP
#define VIBNN_WALLACE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "vibnn/fxp.hpp"
#include "vibnn/rng.hpp"

namespace vibnn::wallace {

// 4x4 orthogonal transform: t = (x1+x2+x3+x4)/2, out = (t-x1, t-x2, x3-t, x4-t).
// Multiplication-free; preserves the sum of squares exactly in real arithmetic.
std::array<double, 4> hadamard4(const std::array<double, 4>& x);

// Quantized datapath: raw sum, one-bit arithmetic right shift for the divide
// by 2, saturating subtractions. Sets *saturated when any result clamps.
std::array<int32_t, 4> hadamard4_fx(const std::array<int32_t, 4>& raw,
                                    const fxp::FixedSpec& spec, bool* saturated);

// Minimal-cost datapath: adders and subtractors wrap modulo 2^total_bits
// (plain two's complement, no saturation logic). Used by the degraded
// baseline below.
std::array<int32_t, 4> hadamard4_wrap(const std::array<int32_t, 4>& raw,
                                      const fxp::FixedSpec& spec);

struct WallacePool {
    std::vector<double> values;
    size_t read_cursor = 0;
    size_t write_cursor = 0;
};

// Fill a pool with i.i.d. N(0,1) draws by CDF inversion. K must be a
// multiple of 4.
WallacePool init_pool(size_t k, uint64_t seed);

// Software reference: each pass transforms K/4 disjoint random quadruples
// (a random permutation of indices) in place. The uniform source drives the
// permutation. Generated numbers = the whole pool after `loops` passes.
void software_wallace_step(WallacePool& pool, int loops, SplitMix64& rng);

// Streaming sampler around software_wallace_step: one transformed pool per
// refill, emitted element by element.
class SoftwareWallace {
  public:
    SoftwareWallace(size_t pool_size, int loops, uint64_t seed);
    double next();

  private:
    WallacePool pool_;
    int loops_;
    SplitMix64 rng_;
    size_t emit_pos_;
};

// Degraded negative control: sequential quadruple addressing, single pass,
// in-place write-back, and a minimal 8-bit datapath whose adders wrap on
// overflow (the cheap hardware baseline with neither sharing/shifting nor
// multi-loop transforms).
class WallaceNss {
  public:
    WallaceNss(size_t pool_size, uint64_t seed,
               fxp::FixedSpec spec = fxp::default_inference_spec());
    double next();
    // One full sweep over the pool (K/4 sequential transforms).
    void sweep();
    const std::vector<int32_t>& raw_pool() const { return raw_; }
    const fxp::FixedSpec& spec() const { return spec_; }

  private:
    void transform_quad(size_t base);

    fxp::FixedSpec spec_;
    std::vector<int32_t> raw_;
    size_t quad_pos_ = 0;
    size_t emit_pos_ = 0;
    bool primed_ = false;
};

// Sharing/shifting ring: U units, each with a K-element pool. Every cycle
// each unit fetches 4 numbers at the shared frame cursor (input lanes rotate
// through the frame slots cycle by cycle), transforms them, emits the 4
// results, and scatters them downstream: result j lands in unit (u+1+j)'s
// pool, on the slot that unit consumed this cycle. Spreading one transform's
// outputs over four pools keeps any quadruple from being re-read as a closed
// group later. The frame base slides one extra element per full rewrite, so
// frame boundaries drift across sweeps. Writes land only on already-read
// positions, which keeps the total pool energy exactly conserved in real
// arithmetic.
class WallaceRing {
  public:
    WallaceRing(size_t units, size_t pool_size, uint64_t seed, bool quantized = false,
                fxp::FixedSpec spec = fxp::default_inference_spec());

    // Appends U*4 samples for this cycle.
    void step(std::vector<double>& out);
    double next();

    size_t units() const { return units_; }
    size_t pool_size() const { return k_; }
    size_t total_pool() const { return units_ * k_; }
    bool quantized() const { return quantized_; }

    double pool_value(size_t unit, size_t idx) const;
    void set_pool_value(size_t unit, size_t idx, double v);
    // Sum of squares over all pools (real values).
    double pool_energy() const;
    // Destination unit for unit i's j-th output; structural ring check.
    size_t write_target(size_t unit, size_t slot) const {
        return (unit + 1 + slot) % units_;
    }

  private:
    size_t units_, k_;
    bool quantized_;
    fxp::FixedSpec spec_;
    std::vector<std::vector<double>> pools_;
    std::vector<std::vector<int32_t>> raw_pools_;
    size_t cursor_ = 0;
    size_t frames_done_ = 0;
    uint64_t cycle_ = 0;
    std::vector<double> pending_;
    size_t emit_pos_ = 0;
};

}  // namespace vibnn::wallace

#endif
