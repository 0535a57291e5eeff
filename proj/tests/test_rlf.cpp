#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "vibnn/rlf.hpp"
#include "vibnn/rng.hpp"

using namespace vibnn;

namespace {

// Naive single-step simulator used as the lfsr_step oracle: fixed head at
// register 1, every register takes its right neighbor's value, tap registers
// additionally XOR the head in.
std::vector<uint8_t> naive_lfsr(const std::vector<uint8_t>& s, const std::vector<int>& taps) {
    const int n = int(s.size());
    std::vector<uint8_t> next(n);
    for (int r = 1; r <= n; ++r) {
        const int src = r == n ? 1 : r + 1;
        next[r - 1] = s[src - 1];
    }
    for (int t : taps) next[t - 1] = uint8_t(next[t - 1] ^ s[0]);
    return next;
}

int popcount_bits(const std::vector<uint8_t>& s) {
    int c = 0;
    for (auto b : s) c += b;
    return c;
}

std::vector<uint8_t> flat_bits(const rlf::RlfFlat& f) {
    std::vector<uint8_t> out(f.length());
    for (int i = 0; i < f.length(); ++i) out[i] = f.bit(i);
    return out;
}

}  // namespace

TEST_CASE("lfsr_step all-zero state is absorbing") {
    std::vector<uint8_t> z(8, 0);
    CHECK(rlf::lfsr_step(z, {4, 5, 6}) == z);
}

TEST_CASE("lfsr_step single step matches naive simulator") {
    std::vector<uint8_t> s(8, 0);
    s[0] = 1;
    const auto taps = rlf::taps_for_length(8);
    CHECK(taps == std::vector<int>{4, 5, 6});
    auto got = rlf::lfsr_step(s, taps);
    CHECK(got == naive_lfsr(s, taps));
    SplitMix64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        for (auto& b : s) b = rng.next_u64() & 1;
        if (popcount_bits(s) == 0) s[0] = 1;
        CHECK(rlf::lfsr_step(s, taps) == naive_lfsr(s, taps));
    }
}

TEST_CASE("8-bit lfsr has full period 255 from every nonzero seed") {
    const auto taps = rlf::taps_for_length(8);
    for (int seed = 1; seed < 256; ++seed) {
        std::vector<uint8_t> s(8);
        for (int i = 0; i < 8; ++i) s[i] = (seed >> i) & 1;
        auto cur = s;
        int period = 0;
        do {
            cur = rlf::lfsr_step(cur, taps);
            ++period;
        } while (cur != s && period <= 255);
        CHECK(period == 255);
    }
}

TEST_CASE("flat engine: all-zero seed unchanged, head advances by 2") {
    rlf::RlfFlat f(255);
    f.step();
    CHECK(f.head() == 2);
    CHECK(f.popcount() == 0);
    for (int i = 0; i < 255; ++i) CHECK_FALSE(f.bit(i));
}

TEST_CASE("flat engine: lone head bit spreads to the three head0 taps") {
    rlf::RlfFlat f(255);
    f.set_bit(0, true);  // head is 0
    f.step();
    std::vector<int> set;
    for (int i = 0; i < 255; ++i)
        if (f.bit(i)) set.push_back(i);
    CHECK(set == std::vector<int>{0, 250, 252, 253});
}

TEST_CASE("flat engine: popcount step difference bounded by 5") {
    SplitMix64 rng(3);
    rlf::RlfFlat f(255);
    f.seed_from(rng);
    int prev = f.popcount();
    for (int i = 0; i < 20000; ++i) {
        f.step();
        const int cur = f.popcount();
        CHECK(std::abs(cur - prev) <= 5);
        prev = cur;
    }
}

TEST_CASE("combined taps for 255 match the five-rule update") {
    const auto rules = rlf::combine_taps(255, rlf::taps_for_length(255));
    REQUIRE(rules.size() == 5);
    std::map<int, std::pair<bool, bool>> by_offset;
    for (const auto& r : rules) by_offset[r.offset] = {r.uses_head0, r.uses_head1};
    CHECK(by_offset[250] == std::pair<bool, bool>{true, false});
    CHECK(by_offset[251] == std::pair<bool, bool>{false, true});
    CHECK(by_offset[252] == std::pair<bool, bool>{true, false});
    CHECK(by_offset[253] == std::pair<bool, bool>{true, true});
    CHECK(by_offset[254] == std::pair<bool, bool>{false, true});
}

TEST_CASE("banked engine equals flat oracle lane by lane") {
    const int lanes = 8;
    rlf::RlfBanked banked(lanes);
    banked.seed_from(42);
    banked.finalize_seed();

    std::vector<rlf::RlfFlat> oracles;
    for (int l = 0; l < lanes; ++l) {
        rlf::RlfFlat f(255);
        for (int i = 0; i < 255; ++i) f.set_bit(i, banked.logical_bit(i, l));
        CHECK(banked.output(l) == f.popcount());
        oracles.push_back(std::move(f));
    }

    for (int step = 0; step < 30000; ++step) {
        banked.step();
        for (int l = 0; l < lanes; ++l) {
            oracles[l].step();
            CHECK(banked.output(l) == oracles[l].popcount());
            CHECK(banked.output(l) == banked.logical_popcount(l));
        }
        if (step % 997 == 0) {
            for (int l = 0; l < lanes; ++l)
                for (int i = 0; i < 255; ++i)
                    CHECK(banked.logical_bit(i, l) == oracles[l].bit(i));
        }
    }
}

TEST_CASE("banked engine: RAM discipline, 2 reads + 2 writes on 2-port banks") {
    rlf::RlfBanked banked(4);
    banked.seed_from(9);
    banked.finalize_seed();
    for (int step = 0; step < 2000; ++step) {
        banked.step();
        const auto& log = banked.last_cycle_accesses();
        int reads = 0, writes = 0;
        std::map<int, int> per_bank;
        for (const auto& a : log) {
            (a.is_write ? writes : reads)++;
            per_bank[a.bank]++;
        }
        CHECK(reads == 2);
        CHECK(writes == 2);
        for (const auto& [bank, cnt] : per_bank) CHECK(cnt <= 2);
    }
}

TEST_CASE("banked engine rejects all-zero lanes") {
    rlf::RlfBanked banked(1);
    CHECK_THROWS(banked.seed_lane_from_bits(0, std::vector<uint8_t>(255, 0)));
}

TEST_CASE("standardize formula") {
    CHECK(rlf::standardize(128, 256) == doctest::Approx(0.0));
    CHECK(rlf::standardize(127, 255) == doctest::Approx(-0.06262).epsilon(1e-3));
    // direct evaluation of (sum - n/2)/sqrt(n/4)
    CHECK(rlf::standardize(255, 255) == doctest::Approx(127.5 / std::sqrt(63.75)));
    CHECK(rlf::standardize(255, 255) == doctest::Approx(15.9687).epsilon(1e-4));
}

TEST_CASE("binomial-normal validity condition") {
    CHECK(rlf::n_large_enough(255));
    CHECK(rlf::n_large_enough(10));
    CHECK_FALSE(rlf::n_large_enough(9));
    CHECK_FALSE(rlf::n_large_enough(100, 0.01));
}

TEST_CASE("parallel array: rotating selector routes lane (j + c) mod 4") {
    rlf::ParallelRlf arr(4, 5);
    for (int c = 0; c < 12; ++c) {
        std::vector<int> out;
        arr.next_raw(out);
        REQUIRE(out.size() == 4);
        for (int j = 0; j < 4; ++j) {
            const int lane = int((j + arr.cycle() - 1) % 4);
            CHECK(arr.engine().output(lane) == out[size_t(j)]);
        }
    }
}

TEST_CASE("parallel array lane streams equal standalone flat engines") {
    rlf::ParallelRlf arr(8, 77);
    std::vector<rlf::RlfFlat> oracles;
    for (int l = 0; l < 8; ++l) {
        rlf::RlfFlat f(255);
        for (int i = 0; i < 255; ++i) f.set_bit(i, arr.engine().logical_bit(i, l));
        oracles.push_back(std::move(f));
    }
    for (int c = 0; c < 5000; ++c) {
        std::vector<int> out;
        arr.next_raw(out);
        for (int l = 0; l < 8; ++l) {
            oracles[l].step();
            CHECK(arr.engine().output(l) == oracles[l].popcount());
        }
    }
}

TEST_CASE("parallel array requires a multiple of 4 lanes") {
    CHECK_THROWS(rlf::ParallelRlf(6, 1));
    CHECK_THROWS(rlf::ParallelRlf(0, 1));
}
