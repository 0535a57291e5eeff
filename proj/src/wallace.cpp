#include "vibnn/wallace.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vibnn/normal.hpp"

namespace vibnn::wallace {

std::array<double, 4> hadamard4(const std::array<double, 4>& x) {
    const double t = 0.5 * (x[0] + x[1] + x[2] + x[3]);
    return {t - x[0], t - x[1], x[2] - t, x[3] - t};
}

std::array<int32_t, 4> hadamard4_fx(const std::array<int32_t, 4>& raw,
                                    const fxp::FixedSpec& spec, bool* saturated) {
    const int64_t sum = int64_t(raw[0]) + raw[1] + raw[2] + raw[3];
    const int64_t t = sum >> 1;  // arithmetic shift, floor
    std::array<int32_t, 4> out;
    out[0] = int32_t(fxp::saturate_raw(t - raw[0], spec, saturated));
    out[1] = int32_t(fxp::saturate_raw(t - raw[1], spec, saturated));
    out[2] = int32_t(fxp::saturate_raw(raw[2] - t, spec, saturated));
    out[3] = int32_t(fxp::saturate_raw(raw[3] - t, spec, saturated));
    return out;
}

std::array<int32_t, 4> hadamard4_wrap(const std::array<int32_t, 4>& raw,
                                      const fxp::FixedSpec& spec) {
    const int bits = spec.total_bits;
    auto wrap = [bits](int64_t v) {
        const uint64_t mask = (uint64_t(1) << bits) - 1;
        uint64_t u = uint64_t(v) & mask;
        if (u & (uint64_t(1) << (bits - 1))) u |= ~mask;
        return int32_t(int64_t(u));
    };
    int32_t acc = wrap(int64_t(raw[0]) + raw[1]);
    acc = wrap(int64_t(acc) + raw[2]);
    acc = wrap(int64_t(acc) + raw[3]);
    const int32_t t = acc >> 1;
    return {wrap(int64_t(t) - raw[0]), wrap(int64_t(t) - raw[1]),
            wrap(int64_t(raw[2]) - t), wrap(int64_t(raw[3]) - t)};
}

WallacePool init_pool(size_t k, uint64_t seed) {
    if (k == 0 || k % 4 != 0)
        throw std::invalid_argument("init_pool: pool size must be a positive multiple of 4");
    WallacePool p;
    p.values.resize(k);
    InverseCdfGaussian g(seed);
    for (auto& v : p.values) v = g.next();
    p.write_cursor = k / 2;
    return p;
}

namespace {

// Fisher-Yates permutation driven by the supplied uniform source.
void shuffle_indices(std::vector<size_t>& idx, SplitMix64& rng) {
    for (size_t i = idx.size() - 1; i > 0; --i) {
        const size_t j = rng.next_u64() % (i + 1);
        std::swap(idx[i], idx[j]);
    }
}

}  // namespace

void software_wallace_step(WallacePool& pool, int loops, SplitMix64& rng) {
    if (loops < 1) throw std::invalid_argument("software_wallace_step: loops must be >= 1");
    const size_t k = pool.values.size();
    std::vector<size_t> idx(k);
    for (int loop = 0; loop < loops; ++loop) {
        std::iota(idx.begin(), idx.end(), size_t(0));
        shuffle_indices(idx, rng);
        for (size_t q = 0; q < k; q += 4) {
            const std::array<double, 4> in = {pool.values[idx[q]], pool.values[idx[q + 1]],
                                              pool.values[idx[q + 2]], pool.values[idx[q + 3]]};
            const auto out = hadamard4(in);
            for (int j = 0; j < 4; ++j) pool.values[idx[q + j]] = out[j];
        }
    }
}

SoftwareWallace::SoftwareWallace(size_t pool_size, int loops, uint64_t seed)
    : pool_(init_pool(pool_size, SplitMix64::derive(seed, 0))),
      loops_(loops),
      rng_(SplitMix64::derive(seed, 1)),
      emit_pos_(pool_size) {}

double SoftwareWallace::next() {
    if (emit_pos_ >= pool_.values.size()) {
        software_wallace_step(pool_, loops_, rng_);
        emit_pos_ = 0;
    }
    return pool_.values[emit_pos_++];
}

WallaceNss::WallaceNss(size_t pool_size, uint64_t seed, fxp::FixedSpec spec) : spec_(spec) {
    const auto pool = init_pool(pool_size, seed);
    raw_.reserve(pool_size);
    for (double v : pool.values) raw_.push_back(fxp::quantize(v, spec_).raw);
}

void WallaceNss::transform_quad(size_t base) {
    const std::array<int32_t, 4> in = {raw_[base], raw_[base + 1], raw_[base + 2],
                                       raw_[base + 3]};
    const auto out = hadamard4_wrap(in, spec_);
    for (int j = 0; j < 4; ++j) raw_[base + j] = out[j];
}

void WallaceNss::sweep() {
    for (size_t base = 0; base < raw_.size(); base += 4) transform_quad(base);
}

double WallaceNss::next() {
    if (emit_pos_ >= raw_.size()) {
        sweep();
        emit_pos_ = 0;
    }
    const double step = spec_.step();
    return double(raw_[emit_pos_++]) * step;
}

WallaceRing::WallaceRing(size_t units, size_t pool_size, uint64_t seed, bool quantized,
                         fxp::FixedSpec spec)
    : units_(units), k_(pool_size), quantized_(quantized), spec_(spec) {
    if (units_ < 2) throw std::invalid_argument("WallaceRing: need at least 2 units");
    if (k_ == 0 || k_ % 4 != 0)
        throw std::invalid_argument("WallaceRing: pool size must be a positive multiple of 4");
    pools_.resize(units_);
    if (quantized_) raw_pools_.resize(units_);
    for (size_t u = 0; u < units_; ++u) {
        pools_[u] = init_pool(k_, SplitMix64::derive(seed, u)).values;
        if (quantized_) {
            raw_pools_[u].reserve(k_);
            for (double v : pools_[u]) raw_pools_[u].push_back(fxp::quantize(v, spec_).raw);
        }
    }
}

double WallaceRing::pool_value(size_t unit, size_t idx) const {
    if (quantized_) return double(raw_pools_[unit][idx]) * spec_.step();
    return pools_[unit][idx];
}

void WallaceRing::set_pool_value(size_t unit, size_t idx, double v) {
    if (quantized_) raw_pools_[unit][idx] = fxp::quantize(v, spec_).raw;
    else pools_[unit][idx] = v;
}

double WallaceRing::pool_energy() const {
    double e = 0;
    for (size_t u = 0; u < units_; ++u)
        for (size_t i = 0; i < k_; ++i) {
            const double v = pool_value(u, i);
            e += v * v;
        }
    return e;
}

void WallaceRing::step(std::vector<double>& out) {
    // All units fetch the frame at the shared cursor, transform against the
    // pre-cycle pools, then scatter: result j overwrites the slot unit
    // (u+1+j) consumed this cycle. Input lanes rotate through the frame
    // slots so no pool position is pinned to one output role. Writes land
    // only on positions already read this cycle.
    const size_t rot = size_t(cycle_ % 4);
    auto slot = [&](int j) { return (cursor_ + (size_t(j) + rot) % 4) % k_; };
    std::vector<std::array<double, 4>> results(units_);
    std::vector<std::array<int32_t, 4>> raw_results;
    if (quantized_) raw_results.resize(units_);

    for (size_t u = 0; u < units_; ++u) {
        if (quantized_) {
            std::array<int32_t, 4> in;
            for (int j = 0; j < 4; ++j) in[j] = raw_pools_[u][slot(j)];
            raw_results[u] = hadamard4_fx(in, spec_, nullptr);
            for (int j = 0; j < 4; ++j)
                results[u][j] = double(raw_results[u][j]) * spec_.step();
        } else {
            std::array<double, 4> in;
            for (int j = 0; j < 4; ++j) in[j] = pools_[u][slot(j)];
            results[u] = hadamard4(in);
        }
    }

    for (size_t u = 0; u < units_; ++u) {
        for (int j = 0; j < 4; ++j) {
            const size_t dst = write_target(u, size_t(j));
            const size_t p = slot(j);
            if (quantized_) raw_pools_[dst][p] = raw_results[u][j];
            else pools_[dst][p] = results[u][j];
        }
    }

    ++cycle_;
    // The frame base slides one extra element after a full rewrite, so
    // frame boundaries drift across sweeps.
    if (++frames_done_ == k_ / 4) {
        frames_done_ = 0;
        cursor_ = (cursor_ + 5) % k_;
    } else {
        cursor_ = (cursor_ + 4) % k_;
    }

    for (size_t u = 0; u < units_; ++u)
        for (int j = 0; j < 4; ++j) out.push_back(results[u][j]);
}

double WallaceRing::next() {
    if (emit_pos_ >= pending_.size()) {
        pending_.clear();
        step(pending_);
        emit_pos_ = 0;
    }
    return pending_[emit_pos_++];
}

}  // namespace vibnn::wallace
