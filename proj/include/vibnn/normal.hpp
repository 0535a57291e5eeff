#ifndef VIBNN_NORMAL_HPP
#define VIBNN_NORMAL_HPP

#include "vibnn/rng.hpp"

namespace vibnn {

// Rational-polynomial inverse of the standard normal CDF (Acklam's
// approximation, |abs err| < 1.2e-9 on (1e-9, 1-1e-9)).
double inverse_normal_cdf(double p);

// Standard normal CDF, via erfc. Used by the runs test and as the
// high-precision side of quantile checks.
double normal_cdf(double x);

// i.i.d. N(0,1) stream by CDF inversion of a splitmix64 uniform source.
class InverseCdfGaussian {
  public:
    explicit InverseCdfGaussian(uint64_t seed) : uniform_(seed) {}
    double next() { return inverse_normal_cdf(uniform_.next_unit()); }

  private:
    SplitMix64 uniform_;
};

}  // namespace vibnn

#endif
