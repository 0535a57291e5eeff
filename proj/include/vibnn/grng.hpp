#ifndef VIBNN_GRNG_HPP
#define VIBNN_GRNG_HPP

#include <memory>
#include <string>
#include <vector>

#include "vibnn/normal.hpp"
#include "vibnn/rlf.hpp"
#include "vibnn/wallace.hpp"

namespace vibnn {

// Common interface over the unit-Gaussian sources the inference and stats
// paths consume.
class GrnSource {
  public:
    virtual ~GrnSource() = default;
    virtual double next() = 0;
    void fill(std::vector<double>& out, size_t count) {
        out.clear();
        out.reserve(count);
        for (size_t i = 0; i < count; ++i) out.push_back(next());
    }
};

// Emits one standardized sum per lane every `stride` engine cycles. A lane's
// sum is a slow random walk (each cycle flips at most 5 of its 255 bits), so
// consecutive cycles are heavily correlated; skipping cycles between emitted
// batches decorrelates the stream at negligible cost.
class RlfGrnSource : public GrnSource {
  public:
    explicit RlfGrnSource(uint64_t seed, int lanes = 64, int stride = 129)
        : gen_(lanes, seed), stride_(stride > 0 ? stride : 1) {}
    double next() override {
        if (pos_ >= buf_.size()) {
            for (int i = 0; i < stride_ - 1; ++i) gen_.engine().step();
            buf_.clear();
            gen_.next_standardized(buf_);
            pos_ = 0;
        }
        return buf_[pos_++];
    }
    rlf::ParallelRlf& generator() { return gen_; }
    int stride() const { return stride_; }

  private:
    rlf::ParallelRlf gen_;
    int stride_;
    std::vector<double> buf_;
    size_t pos_ = 0;
};

class WallaceRingSource : public GrnSource {
  public:
    WallaceRingSource(uint64_t seed, size_t units = 8, size_t pool = 1024)
        : ring_(units, pool, seed) {}
    double next() override { return ring_.next(); }
    wallace::WallaceRing& ring() { return ring_; }

  private:
    wallace::WallaceRing ring_;
};

class SoftwareWallaceSource : public GrnSource {
  public:
    SoftwareWallaceSource(uint64_t seed, size_t pool = 4096, int loops = 2)
        : gen_(pool, loops, seed) {}
    double next() override { return gen_.next(); }

  private:
    wallace::SoftwareWallace gen_;
};

class WallaceNssSource : public GrnSource {
  public:
    explicit WallaceNssSource(uint64_t seed, size_t pool = 256) : gen_(pool, seed) {}
    double next() override { return gen_.next(); }

  private:
    wallace::WallaceNss gen_;
};

class ReferenceGaussianSource : public GrnSource {
  public:
    explicit ReferenceGaussianSource(uint64_t seed) : gen_(seed) {}
    double next() override { return gen_.next(); }

  private:
    InverseCdfGaussian gen_;
};

// Factory keyed by the CLI variant names: rlf, wallace (ring), software,
// nss, reference.
std::unique_ptr<GrnSource> make_grn_source(const std::string& name, uint64_t seed);

}  // namespace vibnn

#endif
