#ifndef VIBNN_RNG_HPP
#define VIBNN_RNG_HPP

#include <cstdint>

namespace vibnn {

// Counter-based splittable generator used for seeding and as the uniform
// reference source. splitmix64 core.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in (0, 1), never exactly 0 or 1
    double next_unit() {
        return (double(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // Derive an independent stream for substream `index`.
    static uint64_t derive(uint64_t master, uint64_t index) {
        SplitMix64 g(master ^ (0xd1342543de82ef95ULL * (index + 1)));
        g.next_u64();
        return g.next_u64();
    }

  private:
    uint64_t state_;
};

}  // namespace vibnn

#endif
