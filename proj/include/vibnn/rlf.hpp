#ifndef VIBNN_RLF_HPP
#define VIBNN_RLF_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "vibnn/fxp.hpp"
#include "vibnn/rng.hpp"

namespace vibnn::rlf {

// Tap offsets (relative to the head) for the supported register lengths.
// Lengths are 2^k - 1 with a 3-tap linear feedback function.
std::vector<int> taps_for_length(int n);

// Classical register-shifting LFSR (fixed head at position 1, contents shift
// every cycle, taps XORed with the head). Bit i of the vector is register i+1.
std::vector<uint8_t> lfsr_step(const std::vector<uint8_t>& state,
                               const std::vector<int>& taps);

// One entry of the combined two-step update: position h+offset is XORed with
// x(h) when uses_head0, and with x(h+1) when uses_head1.
struct CombinedTap {
    int offset;
    bool uses_head0;
    bool uses_head1;
};

// Derive the combined (two steps per cycle) update rules from a tap triple.
std::vector<CombinedTap> combine_taps(int n, const std::vector<int>& taps);

// Flat reference implementation of the RAM-based linear feedback function.
// Applies the combined five-tap update against pre-update values, then
// advances the head by 2. This is the oracle the banked engine is checked
// against.
class RlfFlat {
  public:
    explicit RlfFlat(int n = 255, std::vector<int> taps = {});

    void seed_from(SplitMix64& rng);               // rejects all-zero
    void set_bit(int pos, bool v);
    bool bit(int pos) const;
    void step();
    int popcount() const;
    int head() const { return head_; }
    int length() const { return n_; }

  private:
    int n_;
    int head_ = 0;
    std::vector<CombinedTap> combined_;
    std::vector<uint64_t> words_;
};

struct BankAccess {
    int bank;
    int slot;
    bool is_write;
};

// Banked, buffered RLF engine: m lanes (m <= 64) stepped in lockstep by one
// shared indexer. Seeds live in three banks (position p -> bank p mod 3,
// slot p div 3); a 7-slot buffer (5 tap slots + 2 head slots) keeps the
// window [h+n-5, h+n-1] plus the two heads, so a cycle needs only 2 RAM
// reads (the next heads) and 2 RAM writes (the two window positions that
// slide out). The access log records each cycle's RAM traffic for the
// 2-port discipline checks.
class RlfBanked {
  public:
    explicit RlfBanked(int lanes, int n = 255, std::vector<int> taps = {});

    void seed_from(uint64_t master_seed);          // per-lane substreams, all-zero rejected
    void seed_lane_from_bits(int lane, const std::vector<uint8_t>& bits);
    void finalize_seed();                          // loads buffer + registers; call after seeding

    void step();

    int lanes() const { return m_; }
    int length() const { return n_; }
    int head() const { return head_; }
    // Current output (popcount of the lane's full logical seed vector).
    int output(int lane) const { return result_reg_[lane]; }
    int tap_reg(int lane) const { return tap_reg_[lane]; }

    // Reconstructed logical seed bit (buffer-aware); for oracle checks.
    bool logical_bit(int pos, int lane) const;
    int logical_popcount(int lane) const;

    const std::vector<BankAccess>& last_cycle_accesses() const { return access_log_; }

    void dump_state(std::ostream& os) const;

  private:
    uint64_t bank_word(int pos) const;
    void write_bank_word(int pos, uint64_t w);

    int m_;
    int n_;
    int head_ = 0;
    int window_lo_;                                // n - 5
    std::array<bool, 5> mask_head0_{};
    std::array<bool, 5> mask_head1_{};
    std::array<std::vector<uint64_t>, 3> banks_;
    std::array<uint64_t, 5> tap_buf_{};            // window values, offset window_lo_+k
    std::array<uint64_t, 2> head_buf_{};
    std::vector<int32_t> result_reg_;
    std::vector<int32_t> tap_reg_;
    std::vector<BankAccess> access_log_;
    bool finalized_ = false;
};

// (sum - n/2) / sqrt(n/4): maps a bit-sum onto the unit normal scale.
double standardize(int64_t sum, int n);

// Binomial-to-normal validity condition: n > 9(1-p)/p and n > 9p/(1-p).
bool n_large_enough(int n, double p = 0.5);

// m-lane parallel generator: one shared indexer drives all lanes; results of
// every group of 4 lanes are routed to 4 output slots through a rotating
// selector that advances one position per cycle.
class ParallelRlf {
  public:
    ParallelRlf(int lanes, uint64_t seed, int n = 255);

    int lanes() const { return engine_.lanes(); }
    int length() const { return engine_.length(); }

    // Steps once and appends the m raw sums in output-slot order.
    void next_raw(std::vector<int>& out);
    // Same, standardized.
    void next_standardized(std::vector<double>& out);

    int lane_for_slot(int slot) const;             // current selector routing
    RlfBanked& engine() { return engine_; }
    uint64_t cycle() const { return cycle_; }

  private:
    RlfBanked engine_;
    uint64_t cycle_ = 0;
};

}  // namespace vibnn::rlf

#endif
