#ifndef VIBNN_STATS_HPP
#define VIBNN_STATS_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vibnn/grng.hpp"

namespace vibnn::stats {

struct StabilityReport {
    double mu_error = 0;
    double sigma_error = 0;
    size_t sample_count = 0;
};

// |mean| and |stddev - 1| against N(0,1), unbiased stddev estimator.
StabilityReport stability(const std::vector<double>& samples);

struct RunsTestResult {
    long runs = 0;
    long n_above = 0;
    long n_below = 0;
    double z_stat = 0;
    bool passed = false;
    double alpha = 0.05;
    bool degenerate = false;
};

// Wald-Wolfowitz runs test about the sample median; values equal to the
// median are dropped.
RunsTestResult runs_test(const std::vector<double>& samples, double alpha = 0.05);

// Fraction of runs tests passed over independently seeded trials. The trial
// factory receives the trial's derived seed and returns a fresh source.
using SourceFactory = std::function<std::unique_ptr<GrnSource>(uint64_t seed)>;
double pass_rate(const SourceFactory& factory, uint64_t master_seed, int trials,
                 size_t samples_per_trial, double alpha = 0.05, int threads = 1);

// Chi-square goodness of fit of observed sums against B(n, p); bins pooled
// until expected count >= 5. Returns the p-value.
double binomial_gof(const std::vector<int>& raw_sums, int n, double p);

// Upper regularized incomplete gamma Q(a, x); chi-square survival function
// is Q(k/2, x/2).
double gamma_q(double a, double x);

}  // namespace vibnn::stats

#endif
