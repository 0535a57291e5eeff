#include "vibnn/rlf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace vibnn::rlf {

std::vector<int> taps_for_length(int n) {
    switch (n) {
        case 8: return {4, 5, 6};
        case 255: return {250, 252, 253};
        default:
            throw std::invalid_argument("taps_for_length: no built-in tap triple for n=" +
                                        std::to_string(n) + "; supply taps explicitly");
    }
}

std::vector<uint8_t> lfsr_step(const std::vector<uint8_t>& state,
                               const std::vector<int>& taps) {
    const int n = int(state.size());
    std::vector<uint8_t> next(n);
    // Circular shift with fixed head: register t takes register t+1's value,
    // register n recycles the head.
    for (int t = 1; t <= n; ++t) next[t - 1] = state[t % n];
    for (int t : taps) {
        if (t < 1 || t > n) throw std::invalid_argument("lfsr_step: tap out of range");
        next[t - 1] = uint8_t(state[t % n] ^ state[0]);
    }
    return next;
}

std::vector<CombinedTap> combine_taps(int n, const std::vector<int>& taps) {
    if (taps.size() != 3) throw std::invalid_argument("combine_taps: expected a tap triple");
    std::vector<CombinedTap> out;
    auto find = [&out](int off) -> CombinedTap& {
        for (auto& c : out)
            if (c.offset == off) return c;
        out.push_back({off, false, false});
        return out.back();
    };
    for (int t : taps) {
        if (t <= 1 || t >= n) throw std::invalid_argument("combine_taps: tap out of range");
        find(t % n).uses_head0 = true;
        find((t + 1) % n).uses_head1 = true;
    }
    std::sort(out.begin(), out.end(),
              [](const CombinedTap& a, const CombinedTap& b) { return a.offset < b.offset; });
    return out;
}

namespace {

inline bool get_word_bit(const std::vector<uint64_t>& w, int pos) {
    return (w[pos >> 6] >> (pos & 63)) & 1u;
}

inline void xor_word_bit(std::vector<uint64_t>& w, int pos, bool v) {
    w[pos >> 6] ^= uint64_t(v) << (pos & 63);
}

}  // namespace

RlfFlat::RlfFlat(int n, std::vector<int> taps) : n_(n) {
    if (n < 4) throw std::invalid_argument("RlfFlat: n too small");
    if (taps.empty()) taps = taps_for_length(n);
    combined_ = combine_taps(n, taps);
    words_.assign((n + 63) / 64, 0);
}

void RlfFlat::seed_from(SplitMix64& rng) {
    bool nonzero = false;
    while (!nonzero) {
        for (auto& w : words_) w = rng.next_u64();
        const int extra = int(words_.size()) * 64 - n_;
        if (extra > 0) words_.back() &= ~uint64_t(0) >> extra;
        for (auto w : words_) nonzero |= (w != 0);
    }
}

void RlfFlat::set_bit(int pos, bool v) {
    const bool cur = get_word_bit(words_, pos);
    if (cur != v) xor_word_bit(words_, pos, true);
}

bool RlfFlat::bit(int pos) const { return get_word_bit(words_, pos); }

void RlfFlat::step() {
    const bool h0 = bit(head_);
    const bool h1 = bit((head_ + 1) % n_);
    for (const auto& c : combined_) {
        bool v = false;
        if (c.uses_head0) v ^= h0;
        if (c.uses_head1) v ^= h1;
        xor_word_bit(words_, (head_ + c.offset) % n_, v);
    }
    head_ = (head_ + 2) % n_;
}

int RlfFlat::popcount() const {
    int s = 0;
    for (auto w : words_) s += std::popcount(w);
    return s;
}

RlfBanked::RlfBanked(int lanes, int n, std::vector<int> taps) : m_(lanes), n_(n) {
    if (lanes < 1 || lanes > 64) throw std::invalid_argument("RlfBanked: lanes must be 1..64");
    if (taps.empty()) taps = taps_for_length(n);
    const auto combined = combine_taps(n, taps);
    window_lo_ = n - 5;
    // The buffer scheme needs the combined update window to be the top five
    // positions below the head.
    for (const auto& c : combined) {
        if (c.offset < window_lo_ || c.offset > n - 1)
            throw std::invalid_argument("RlfBanked: tap triple not buffer-compatible");
        const int k = c.offset - window_lo_;
        mask_head0_[k] = c.uses_head0;
        mask_head1_[k] = c.uses_head1;
    }
    const int slots = (n + 2) / 3;
    for (auto& b : banks_) b.assign(slots, 0);
    result_reg_.assign(m_, 0);
    tap_reg_.assign(m_, 0);
}

uint64_t RlfBanked::bank_word(int pos) const { return banks_[pos % 3][pos / 3]; }

void RlfBanked::write_bank_word(int pos, uint64_t w) { banks_[pos % 3][pos / 3] = w; }

void RlfBanked::seed_from(uint64_t master_seed) {
    for (int lane = 0; lane < m_; ++lane) {
        SplitMix64 rng(SplitMix64::derive(master_seed, uint64_t(lane)));
        std::vector<uint8_t> bits(n_);
        bool nonzero = false;
        while (!nonzero) {
            for (int i = 0; i < n_; ++i) {
                bits[i] = uint8_t(rng.next_u64() & 1);
                nonzero |= bits[i];
            }
        }
        seed_lane_from_bits(lane, bits);
    }
    finalize_seed();
}

void RlfBanked::seed_lane_from_bits(int lane, const std::vector<uint8_t>& bits) {
    if (int(bits.size()) != n_) throw std::invalid_argument("seed_lane_from_bits: wrong length");
    bool nonzero = false;
    for (auto b : bits) nonzero |= (b != 0);
    if (!nonzero) throw std::invalid_argument("seed_lane_from_bits: all-zero lane rejected");
    for (int pos = 0; pos < n_; ++pos) {
        uint64_t w = bank_word(pos);
        w = (w & ~(uint64_t(1) << lane)) | (uint64_t(bits[pos] & 1) << lane);
        write_bank_word(pos, w);
    }
    finalized_ = false;
}

void RlfBanked::finalize_seed() {
    head_ = 0;
    for (int k = 0; k < 5; ++k) tap_buf_[k] = bank_word(window_lo_ + k);
    head_buf_[0] = bank_word(0);
    head_buf_[1] = bank_word(1);
    for (int lane = 0; lane < m_; ++lane) {
        int pop = 0;
        for (int pos = 0; pos < n_; ++pos) pop += int((bank_word(pos) >> lane) & 1);
        result_reg_[lane] = pop;
        int tp = 0;
        for (int k = 0; k < 5; ++k) tp += int((tap_buf_[k] >> lane) & 1);
        tap_reg_[lane] = tp;
    }
    access_log_.clear();
    finalized_ = true;
}

void RlfBanked::step() {
    if (!finalized_) throw std::logic_error("RlfBanked: finalize_seed() not called");
    access_log_.clear();

    // Combined five-tap update, lane-parallel on whole words.
    std::array<uint64_t, 5> updated;
    for (int k = 0; k < 5; ++k) {
        uint64_t v = tap_buf_[k];
        if (mask_head0_[k]) v ^= head_buf_[0];
        if (mask_head1_[k]) v ^= head_buf_[1];
        updated[k] = v;
    }

    // Output path: result register accumulates the popcount delta of the tap
    // window. Only the tap values feed the parallel counter.
    for (int lane = 0; lane < m_; ++lane) {
        int old_sum = 0, new_sum = 0;
        for (int k = 0; k < 5; ++k) {
            old_sum += int((tap_buf_[k] >> lane) & 1);
            new_sum += int((updated[k] >> lane) & 1);
        }
        result_reg_[lane] += new_sum - old_sum;
        tap_reg_[lane] = new_sum;
    }

    // The window slides by 2: the two lowest positions leave the buffer and
    // are written back; the two next heads are fetched.
    const int w0 = (head_ + window_lo_) % n_;
    const int w1 = (head_ + window_lo_ + 1) % n_;
    write_bank_word(w0, updated[0]);
    write_bank_word(w1, updated[1]);
    access_log_.push_back({w0 % 3, w0 / 3, true});
    access_log_.push_back({w1 % 3, w1 / 3, true});

    const uint64_t old_head0 = head_buf_[0], old_head1 = head_buf_[1];
    tap_buf_ = {updated[2], updated[3], updated[4], old_head0, old_head1};

    head_ = (head_ + 2) % n_;
    const int r0 = head_, r1 = (head_ + 1) % n_;
    head_buf_[0] = bank_word(r0);
    head_buf_[1] = bank_word(r1);
    access_log_.push_back({r0 % 3, r0 / 3, false});
    access_log_.push_back({r1 % 3, r1 / 3, false});

    // 2-port discipline: no bank may see more than two accesses in a cycle.
    int per_bank[3] = {0, 0, 0};
    for (const auto& a : access_log_) ++per_bank[a.bank];
    for (int b = 0; b < 3; ++b) {
        if (per_bank[b] > 2)
            throw std::logic_error("RlfBanked: bank access discipline violated");
    }
}

bool RlfBanked::logical_bit(int pos, int lane) const {
    // Buffer shadows the window [h+n-5, h+n-1] and the heads.
    const int rel = (pos - head_ + n_) % n_;
    uint64_t word;
    if (rel >= window_lo_) word = tap_buf_[rel - window_lo_];
    else if (rel <= 1) word = head_buf_[rel];
    else word = bank_word(pos);
    return (word >> lane) & 1;
}

int RlfBanked::logical_popcount(int lane) const {
    int s = 0;
    for (int pos = 0; pos < n_; ++pos) s += int(logical_bit(pos, lane));
    return s;
}

void RlfBanked::dump_state(std::ostream& os) const {
    os << "head " << head_ << "\n";
    for (int b = 0; b < 3; ++b) {
        os << "bank" << b << ":";
        for (auto w : banks_[b]) os << " " << std::hex << std::setw(16) << std::setfill('0') << w;
        os << std::dec << "\n";
    }
    os << "taps:";
    for (auto w : tap_buf_) os << " " << std::hex << std::setw(16) << std::setfill('0') << w;
    os << std::dec << "\nheads:";
    for (auto w : head_buf_) os << " " << std::hex << std::setw(16) << std::setfill('0') << w;
    os << std::dec << "\nresult:";
    for (auto r : result_reg_) os << " " << r;
    os << "\ntapreg:";
    for (auto r : tap_reg_) os << " " << r;
    os << "\n";
}

double standardize(int64_t sum, int n) {
    return (double(sum) - 0.5 * n) / std::sqrt(0.25 * n);
}

bool n_large_enough(int n, double p) {
    return n > 9.0 * (1.0 - p) / p && n > 9.0 * p / (1.0 - p);
}

ParallelRlf::ParallelRlf(int lanes, uint64_t seed, int n) : engine_(lanes, n) {
    if (lanes % 4 != 0)
        throw std::invalid_argument("ParallelRlf: lane count must be a multiple of 4");
    engine_.seed_from(seed);
}

int ParallelRlf::lane_for_slot(int slot) const {
    const int group = slot / 4;
    const int j = slot % 4;
    return group * 4 + int((uint64_t(j) + cycle_) % 4);
}

void ParallelRlf::next_raw(std::vector<int>& out) {
    engine_.step();
    for (int slot = 0; slot < engine_.lanes(); ++slot)
        out.push_back(engine_.output(lane_for_slot(slot)));
    ++cycle_;
}

void ParallelRlf::next_standardized(std::vector<double>& out) {
    engine_.step();
    const int n = engine_.length();
    for (int slot = 0; slot < engine_.lanes(); ++slot)
        out.push_back(standardize(engine_.output(lane_for_slot(slot)), n));
    ++cycle_;
}

}  // namespace vibnn::rlf
