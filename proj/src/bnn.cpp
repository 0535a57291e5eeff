#include "vibnn/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vibnn::bnn {

void NetworkTopology::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("NetworkTopology: need at least 2 layers");
    for (int s : layer_sizes)
        if (s < 1) throw std::invalid_argument("NetworkTopology: layer sizes must be >= 1");
}

int NetworkTopology::min_fan_in() const {
    int m = layer_sizes[0];
    for (size_t i = 0; i + 1 < layer_sizes.size(); ++i) m = std::min(m, layer_sizes[i]);
    return m;
}

NetworkTopology VariationalParams::topology() const {
    NetworkTopology t;
    if (layers.empty()) return t;
    t.layer_sizes.push_back(int(layers[0].mu_w.cols));
    for (const auto& l : layers) t.layer_sizes.push_back(int(l.mu_w.rows));
    return t;
}

size_t VariationalParams::parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.mu_w.size() + l.mu_b.size();
    return 2 * n;
}

double sigma_from_rho(double rho) {
    // softplus, overflow-safe
    if (rho > 30.0) return rho;
    return std::log1p(std::exp(rho));
}

Matrix sigma_from_rho(const Matrix& rho) {
    Matrix s(rho.rows, rho.cols);
    for (size_t i = 0; i < rho.size(); ++i) s.data[i] = float(sigma_from_rho(double(rho.data[i])));
    return s;
}

std::vector<float> sigma_from_rho(const std::vector<float>& rho) {
    std::vector<float> s(rho.size());
    for (size_t i = 0; i < rho.size(); ++i) s[i] = float(sigma_from_rho(double(rho[i])));
    return s;
}

SampledWeights sample_weights(const VariationalParams& params,
                              const std::vector<Matrix>& eps_w,
                              const std::vector<std::vector<float>>& eps_b) {
    if (eps_w.size() != params.layers.size() || eps_b.size() != params.layers.size())
        throw std::invalid_argument("sample_weights: eps shape mismatch");
    SampledWeights out;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& p = params.layers[l];
        if (eps_w[l].rows != p.mu_w.rows || eps_w[l].cols != p.mu_w.cols ||
            eps_b[l].size() != p.mu_b.size())
            throw std::invalid_argument("sample_weights: eps shape mismatch");
        Matrix w(p.mu_w.rows, p.mu_w.cols);
        for (size_t i = 0; i < w.size(); ++i)
            w.data[i] = p.mu_w.data[i] +
                        eps_w[l].data[i] * float(sigma_from_rho(double(p.rho_w.data[i])));
        std::vector<float> b(p.mu_b.size());
        for (size_t i = 0; i < b.size(); ++i)
            b[i] = p.mu_b[i] + eps_b[l][i] * float(sigma_from_rho(double(p.rho_b[i])));
        out.w.push_back(std::move(w));
        out.b.push_back(std::move(b));
    }
    return out;
}

NetworkTopology QuantizedParams::topology() const {
    NetworkTopology t;
    if (layers.empty()) return t;
    t.layer_sizes.push_back(int(layers[0].in));
    for (const auto& l : layers) t.layer_sizes.push_back(int(l.out));
    return t;
}

QuantizedParams quantize_params(const VariationalParams& params, const fxp::FixedSpec& spec,
                                int hidden_shift) {
    spec.validate();
    if (hidden_shift < 0) throw std::invalid_argument("quantize_params: hidden_shift < 0");
    QuantizedParams q;
    q.spec = spec;
    int cum_shift = 0;
    for (size_t li = 0; li < params.layers.size(); ++li) {
        const auto& p = params.layers[li];
        QuantizedParams::Layer l;
        l.out = p.mu_w.rows;
        l.in = p.mu_w.cols;
        l.bias_shift = cum_shift;
        l.out_shift = (li + 1 < params.layers.size()) ? hidden_shift : 0;
        l.mu_w.reserve(p.mu_w.size());
        l.sigma_w.reserve(p.mu_w.size());
        for (size_t i = 0; i < p.mu_w.size(); ++i) {
            l.mu_w.push_back(fxp::quantize(p.mu_w.data[i], spec).raw);
            l.sigma_w.push_back(fxp::quantize(sigma_from_rho(double(p.rho_w.data[i])), spec).raw);
        }
        // Incoming activations were shifted down by cum_shift, so the bias must
        // be represented at the same reduced scale to add correctly.
        const double bs = std::ldexp(1.0, -cum_shift);
        for (size_t i = 0; i < p.mu_b.size(); ++i) {
            l.mu_b.push_back(fxp::quantize(p.mu_b[i] * bs, spec).raw);
            l.sigma_b.push_back(
                fxp::quantize(sigma_from_rho(double(p.rho_b[i])) * bs, spec).raw);
        }
        cum_shift += l.out_shift;
        q.layers.push_back(std::move(l));
    }
    return q;
}

double max_quantization_error(const VariationalParams& params, const QuantizedParams& q) {
    const double step = q.spec.step();
    const double lo = q.spec.real_min(), hi = q.spec.real_max();
    double worst = 0;
    auto check = [&](double x, int32_t raw) {
        const double clamped = std::clamp(x, lo, hi);
        worst = std::max(worst, std::fabs(double(raw) * step - clamped));
    };
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& p = params.layers[l];
        const auto& ql = q.layers[l];
        const double bs = std::ldexp(1.0, -ql.bias_shift);
        for (size_t i = 0; i < p.mu_w.size(); ++i) {
            check(p.mu_w.data[i], ql.mu_w[i]);
            check(sigma_from_rho(double(p.rho_w.data[i])), ql.sigma_w[i]);
        }
        for (size_t i = 0; i < p.mu_b.size(); ++i) {
            check(p.mu_b[i] * bs, ql.mu_b[i]);
            check(sigma_from_rho(double(p.rho_b[i])) * bs, ql.sigma_b[i]);
        }
    }
    return worst;
}

std::vector<float> pe_forward(const std::vector<float>& inputs, const Matrix& weights,
                              const std::vector<float>& bias, int chunk, bool relu) {
    if (inputs.size() != weights.cols || bias.size() != weights.rows)
        throw std::invalid_argument("pe_forward: shape mismatch");
    if (chunk < 1) throw std::invalid_argument("pe_forward: chunk must be >= 1");
    std::vector<float> out(weights.rows);
    for (size_t o = 0; o < weights.rows; ++o) {
        const float* w = weights.row(o);
        double acc = 0;  // wide accumulator
        for (size_t base = 0; base < inputs.size(); base += size_t(chunk)) {
            const size_t end = std::min(inputs.size(), base + size_t(chunk));
            double partial = 0;
            for (size_t i = base; i < end; ++i) partial += double(w[i]) * double(inputs[i]);
            acc += partial;
        }
        acc += double(bias[o]);
        out[o] = float(relu ? std::max(0.0, acc) : acc);
    }
    return out;
}

std::vector<int32_t> pe_forward_fx(const std::vector<int32_t>& inputs_raw,
                                   const std::vector<int32_t>& weights_raw,
                                   const std::vector<int32_t>& bias_raw, size_t out,
                                   size_t in, const fxp::FixedSpec& spec, bool relu) {
    if (inputs_raw.size() != in || weights_raw.size() != out * in || bias_raw.size() != out)
        throw std::invalid_argument("pe_forward_fx: shape mismatch");
    std::vector<int32_t> result(out);
    const int f = spec.frac_bits;
    for (size_t o = 0; o < out; ++o) {
        const int32_t* w = weights_raw.data() + o * in;
        int64_t acc = 0;  // scale 2^-2f
        for (size_t i = 0; i < in; ++i) acc += int64_t(w[i]) * int64_t(inputs_raw[i]);
        acc += int64_t(bias_raw[o]) << f;
        int64_t v = fxp::rne_shift_right(acc, f);
        if (relu && v < 0) v = 0;
        result[o] = int32_t(fxp::saturate_raw(v, spec, nullptr));
    }
    return result;
}

namespace {

void finalize_inference(InferenceResult& r) {
    const size_t n = r.mc_outputs.rows, classes = r.mc_outputs.cols;
    r.mean_output.assign(classes, 0.0);
    r.predictive_std.assign(classes, 0.0);
    for (size_t s = 0; s < n; ++s)
        for (size_t c = 0; c < classes; ++c) r.mean_output[c] += r.mc_outputs.at(s, c);
    for (auto& m : r.mean_output) m /= double(n);
    if (n > 1) {
        for (size_t s = 0; s < n; ++s)
            for (size_t c = 0; c < classes; ++c) {
                const double d = double(r.mc_outputs.at(s, c)) - r.mean_output[c];
                r.predictive_std[c] += d * d;
            }
        for (auto& v : r.predictive_std) v = std::sqrt(v / double(n - 1));
    }
    r.predicted = int(std::max_element(r.mean_output.begin(), r.mean_output.end()) -
                      r.mean_output.begin());
}

}  // namespace

InferenceResult mc_inference(const std::vector<float>& x0, const VariationalParams& params,
                             int n_samples, GrnSource& grng) {
    if (n_samples < 1) throw std::invalid_argument("mc_inference: n_samples must be >= 1");
    const auto topo = params.topology();
    InferenceResult r;
    r.mc_outputs = Matrix(size_t(n_samples), size_t(topo.outputs()));
    const size_t L = params.layers.size();
    for (int s = 0; s < n_samples; ++s) {
        std::vector<float> act = x0;
        for (size_t l = 0; l < L; ++l) {
            const auto& p = params.layers[l];
            const bool relu = l + 1 < L;
            std::vector<float> next(p.mu_w.rows);
            for (size_t o = 0; o < p.mu_w.rows; ++o) {
                const float* mu = p.mu_w.row(o);
                const float* rho = p.rho_w.row(o);
                double acc = 0;
                for (size_t i = 0; i < p.mu_w.cols; ++i) {
                    const double w =
                        double(mu[i]) + grng.next() * sigma_from_rho(double(rho[i]));
                    acc += w * double(act[i]);
                }
                acc += double(p.mu_b[o]) + grng.next() * sigma_from_rho(double(p.rho_b[o]));
                next[o] = float(relu ? std::max(0.0, acc) : acc);
            }
            act = std::move(next);
        }
        for (size_t c = 0; c < act.size(); ++c) r.mc_outputs.at(size_t(s), c) = act[c];
    }
    finalize_inference(r);
    return r;
}

InferenceResult mc_inference_fx(const std::vector<float>& x0, const QuantizedParams& params,
                                int n_samples, GrnSource& grng) {
    if (n_samples < 1) throw std::invalid_argument("mc_inference_fx: n_samples must be >= 1");
    const auto spec = params.spec;
    const int f = spec.frac_bits;
    const int64_t lo = spec.raw_min(), hi = spec.raw_max();
    const double scale = std::ldexp(1.0, f);

    // quantize the input image once
    std::vector<int32_t> input_raw(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) input_raw[i] = fxp::quantize(x0[i], spec).raw;

    auto sat = [lo, hi](int64_t v) { return int32_t(std::clamp(v, lo, hi)); };
    auto quantize_eps = [&](double e) {
        const double r = std::nearbyint(e * scale);
        return sat(int64_t(r));
    };

    const auto topo = params.topology();
    InferenceResult r;
    r.mc_outputs = Matrix(size_t(n_samples), size_t(topo.outputs()));
    const size_t L = params.layers.size();
    for (int s = 0; s < n_samples; ++s) {
        std::vector<int32_t> act = input_raw;
        for (size_t l = 0; l < L; ++l) {
            const auto& p = params.layers[l];
            const bool relu = l + 1 < L;
            std::vector<int32_t> next(p.out);
            for (size_t o = 0; o < p.out; ++o) {
                const int32_t* mu = p.mu_w.data() + o * p.in;
                const int32_t* sg = p.sigma_w.data() + o * p.in;
                int64_t acc = 0;  // scale 2^-2f, full-width
                for (size_t i = 0; i < p.in; ++i) {
                    const int32_t eps = quantize_eps(grng.next());
                    // weight updater: w = sat(mu + rne(eps*sigma))
                    const int64_t prod = fxp::rne_shift_right(int64_t(eps) * sg[i], f);
                    const int32_t w = sat(int64_t(mu[i]) + prod);
                    acc += int64_t(w) * int64_t(act[i]);
                }
                const int32_t eps_b = quantize_eps(grng.next());
                const int64_t prod_b =
                    fxp::rne_shift_right(int64_t(eps_b) * p.sigma_b[o], f);
                const int32_t b = sat(int64_t(p.mu_b[o]) + prod_b);
                acc += int64_t(b) << f;
                int64_t v = fxp::rne_shift_right(acc, f);
                if (relu && v < 0) v = 0;
                v = fxp::rne_shift_right(v, p.out_shift);
                next[o] = sat(v);
            }
            act = std::move(next);
        }
        const double step = spec.step();
        for (size_t c = 0; c < act.size(); ++c)
            r.mc_outputs.at(size_t(s), c) = float(double(act[c]) * step);
    }
    finalize_inference(r);
    return r;
}

std::vector<ConfigCheck> validate_config(const PEConfig& cfg, const NetworkTopology& topo) {
    if (cfg.T <= 0 || cfg.S <= 0 || cfg.N <= 0 || cfg.B <= 0 || cfg.MaxWS <= 0)
        throw std::invalid_argument("validate_config: fields must be positive");
    topo.validate();
    std::vector<ConfigCheck> checks;

    const int min_in = topo.min_fan_in();
    const int rhs = (min_in + cfg.N - 1) / cfg.N;
    const bool c14a = cfg.T * cfg.S < rhs;
    checks.push_back({"14a: T*S < ceil(MinIn/N)", c14a ? CheckStatus::Pass : CheckStatus::Warn,
                      std::to_string(cfg.T * cfg.S) + " < " + std::to_string(rhs) +
                          (c14a ? "" : " violated (reported as warning)")});

    const bool c14b = cfg.B * cfg.N * cfg.S <= cfg.MaxWS;
    checks.push_back({"14b: B*N*S <= MaxWS", c14b ? CheckStatus::Pass : CheckStatus::Fail,
                      std::to_string(cfg.B * cfg.N * cfg.S) + " <= " + std::to_string(cfg.MaxWS)});

    const bool c14c = cfg.S == cfg.N;
    checks.push_back({"14c: S == N", c14c ? CheckStatus::Pass : CheckStatus::Fail,
                      std::to_string(cfg.S) + " == " + std::to_string(cfg.N)});

    checks.push_back({"14d: M == T*S", CheckStatus::Pass,
                      "M = " + std::to_string(cfg.M()) + " (derived)"});
    return checks;
}

CycleEstimate cycle_estimate(const PEConfig& cfg, const NetworkTopology& topo,
                             double clock_hz) {
    topo.validate();
    CycleEstimate e;
    const int M = cfg.M();
    for (int l = 0; l < topo.num_layers(); ++l) {
        const int in = topo.layer_sizes[l], out = topo.layer_sizes[l + 1];
        e.cycles_per_image +=
            uint64_t((out + M - 1) / M) * uint64_t((in + cfg.N - 1) / cfg.N);
    }
    e.cycles_per_image += kPipelineFillCycles;
    e.images_per_second = clock_hz / double(e.cycles_per_image);
    return e;
}

double accuracy_float(const VariationalParams& params, const Matrix& images,
                      const std::vector<int>& labels, int mc_samples, GrnSource& grng) {
    size_t correct = 0;
    for (size_t i = 0; i < images.rows; ++i) {
        std::vector<float> x(images.row(i), images.row(i) + images.cols);
        if (mc_inference(x, params, mc_samples, grng).predicted == labels[i]) ++correct;
    }
    return double(correct) / double(images.rows);
}

double accuracy_fx(const QuantizedParams& params, const Matrix& images,
                   const std::vector<int>& labels, int mc_samples, GrnSource& grng) {
    size_t correct = 0;
    for (size_t i = 0; i < images.rows; ++i) {
        std::vector<float> x(images.row(i), images.row(i) + images.cols);
        if (mc_inference_fx(x, params, mc_samples, grng).predicted == labels[i]) ++correct;
    }
    return double(correct) / double(images.rows);
}

SweepResult bitlength_sweep(const VariationalParams& params, const Matrix& images,
                            const std::vector<int>& labels,
                            const std::vector<fxp::FixedSpec>& specs, int mc_samples,
                            const std::function<std::unique_ptr<GrnSource>(uint64_t)>& grng,
                            uint64_t seed, double threshold) {
    SweepResult out;
    out.threshold = threshold;
    {
        auto src = grng(SplitMix64::derive(seed, 0));
        out.float_accuracy = accuracy_float(params, images, labels, mc_samples, *src);
    }
    for (size_t i = 0; i < specs.size(); ++i) {
        const auto q = quantize_params(params, specs[i]);
        auto src = grng(SplitMix64::derive(seed, i + 1));
        const double acc = accuracy_fx(q, images, labels, mc_samples, *src);
        out.points.push_back({specs[i], acc});
        if (acc >= threshold &&
            (out.smallest_passing_bits < 0 || specs[i].total_bits < out.smallest_passing_bits))
            out.smallest_passing_bits = specs[i].total_bits;
    }
    return out;
}

}  // namespace vibnn::bnn
