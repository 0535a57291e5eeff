#include "vibnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

#include "vibnn/normal.hpp"
#include "vibnn/rng.hpp"

namespace vibnn::stats {

StabilityReport stability(const std::vector<double>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("stability: need at least 2 samples");
    const size_t n = samples.size();
    double mean = 0;
    for (double v : samples) mean += v;
    mean /= double(n);
    double ss = 0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / double(n - 1));
    return {std::fabs(mean), std::fabs(sd - 1.0), n};
}

RunsTestResult runs_test(const std::vector<double>& samples, double alpha) {
    if (samples.size() < 50) throw std::invalid_argument("runs_test: need at least 50 samples");
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("runs_test: alpha out of range");

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    const double median = (n % 2) ? sorted[n / 2]
                                  : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    RunsTestResult r;
    r.alpha = alpha;
    int prev = 0;  // 0 = none yet, +1 above, -1 below
    for (double v : samples) {
        if (v == median) continue;  // ties dropped
        const int sign = v > median ? 1 : -1;
        if (sign > 0) ++r.n_above;
        else ++r.n_below;
        if (sign != prev) ++r.runs;
        prev = sign;
    }
    if (r.n_above == 0 || r.n_below == 0) {
        r.degenerate = true;
        r.passed = false;
        return r;
    }
    const double n1 = double(r.n_above), n2 = double(r.n_below);
    const double mu = 2.0 * n1 * n2 / (n1 + n2) + 1.0;
    const double var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n1 - n2) /
                       ((n1 + n2) * (n1 + n2) * (n1 + n2 - 1.0));
    r.z_stat = (double(r.runs) - mu) / std::sqrt(var);
    const double crit = inverse_normal_cdf(1.0 - alpha / 2.0);
    r.passed = std::fabs(r.z_stat) < crit;
    return r;
}

double pass_rate(const SourceFactory& factory, uint64_t master_seed, int trials,
                 size_t samples_per_trial, double alpha, int threads) {
    if (trials < 1) throw std::invalid_argument("pass_rate: trials must be >= 1");
    threads = std::max(1, threads);

    auto run_trial = [&](int t) -> int {
        auto src = factory(SplitMix64::derive(master_seed, uint64_t(t)));
        std::vector<double> samples;
        src->fill(samples, samples_per_trial);
        return runs_test(samples, alpha).passed ? 1 : 0;
    };

    int passed = 0;
    if (threads == 1) {
        for (int t = 0; t < trials; ++t) passed += run_trial(t);
    } else {
        // Trials are independent with per-trial derived seeds; the result is
        // scheduling-invariant.
        std::vector<std::future<int>> futs;
        for (int chunk = 0; chunk < threads; ++chunk) {
            futs.push_back(std::async(std::launch::async, [&, chunk]() {
                int local = 0;
                for (int t = chunk; t < trials; t += threads) local += run_trial(t);
                return local;
            }));
        }
        for (auto& f : futs) passed += f.get();
    }
    return double(passed) / double(trials);
}

namespace {

double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum;
    for (int k = 1; k < 1000; ++k) {
        term *= x / (a + k);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    // Lentz's algorithm for the continued fraction representation.
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (x < 0 || a <= 0) throw std::domain_error("gamma_q: invalid arguments");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

double binomial_gof(const std::vector<int>& raw_sums, int n, double p) {
    if (raw_sums.empty()) throw std::invalid_argument("binomial_gof: empty sample");
    for (int s : raw_sums)
        if (s < 0 || s > n) throw std::invalid_argument("binomial_gof: sum out of [0, n]");

    // Binomial pmf via log-space recurrence.
    std::vector<double> pmf(size_t(n) + 1);
    const double logp = std::log(p), logq = std::log1p(-p);
    for (int k = 0; k <= n; ++k) {
        const double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                          std::lgamma(n - k + 1.0) + k * logp + (n - k) * logq;
        pmf[k] = std::exp(lg);
    }

    std::vector<long> counts(size_t(n) + 1, 0);
    for (int s : raw_sums) ++counts[s];
    const double total = double(raw_sums.size());

    // Pool adjacent bins left to right until each pooled bin expects >= 5.
    std::vector<double> exp_bins, obs_bins;
    double e_acc = 0, o_acc = 0;
    for (int k = 0; k <= n; ++k) {
        e_acc += pmf[k] * total;
        o_acc += double(counts[k]);
        if (e_acc >= 5.0) {
            exp_bins.push_back(e_acc);
            obs_bins.push_back(o_acc);
            e_acc = o_acc = 0;
        }
    }
    if (e_acc > 0 || o_acc > 0) {
        if (!exp_bins.empty()) {
            exp_bins.back() += e_acc;
            obs_bins.back() += o_acc;
        } else {
            exp_bins.push_back(e_acc);
            obs_bins.push_back(o_acc);
        }
    }
    if (exp_bins.size() < 5)
        throw std::invalid_argument("binomial_gof: too few samples for >=5 pooled bins");

    double chi2 = 0;
    for (size_t b = 0; b < exp_bins.size(); ++b) {
        const double d = obs_bins[b] - exp_bins[b];
        chi2 += d * d / exp_bins[b];
    }
    const double dof = double(exp_bins.size() - 1);
    return gamma_q(dof / 2.0, chi2 / 2.0);
}

}  // namespace vibnn::stats
