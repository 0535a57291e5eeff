#ifndef VIBNN_BNN_HPP
#define VIBNN_BNN_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vibnn/fxp.hpp"
#include "vibnn/grng.hpp"
#include "vibnn/tensor.hpp"

namespace vibnn::bnn {

struct NetworkTopology {
    std::vector<int> layer_sizes;  // e.g. 784, 200, 200, 10

    void validate() const;
    int num_layers() const { return int(layer_sizes.size()) - 1; }
    int min_fan_in() const;
    int inputs() const { return layer_sizes.front(); }
    int outputs() const { return layer_sizes.back(); }
};

// Per-connection variational parameters (mu, rho); sigma = softplus(rho).
struct VariationalParams {
    struct Layer {
        Matrix mu_w, rho_w;                  // out x in
        std::vector<float> mu_b, rho_b;      // out
    };
    std::vector<Layer> layers;

    NetworkTopology topology() const;
    size_t parameter_count() const;
};

double sigma_from_rho(double rho);
Matrix sigma_from_rho(const Matrix& rho);
std::vector<float> sigma_from_rho(const std::vector<float>& rho);

// w = mu + eps .* sigma, elementwise; eps must match shapes.
struct SampledWeights {
    std::vector<Matrix> w;
    std::vector<std::vector<float>> b;
};
SampledWeights sample_weights(const VariationalParams& params,
                              const std::vector<Matrix>& eps_w,
                              const std::vector<std::vector<float>>& eps_b);

// Hidden activations can be an order of magnitude larger than the weights, so
// a single fixed-point format cannot hold both. Each layer therefore carries a
// static `out_shift`: its post-activation values are shifted right by that many
// bits before being stored, and the *next* layer's biases are quantized at the
// matching scale. Because ReLU commutes with positive scaling this rescaling is
// exact in real arithmetic (the logits all shrink by the same power of two, so
// the argmax is unchanged); in fixed point it trades activation precision for
// headroom.
struct QuantizedParams {
    struct Layer {
        size_t out = 0, in = 0;
        std::vector<int32_t> mu_w, sigma_w;  // out x in, row-major raw values
        std::vector<int32_t> mu_b, sigma_b;  // raw at scale step * 2^bias_shift
        int out_shift = 0;    // right shift applied to this layer's activations
        int bias_shift = 0;   // cumulative shift the biases were scaled by
    };
    std::vector<Layer> layers;
    fxp::FixedSpec spec;

    NetworkTopology topology() const;
};

// Default activation shift for hidden layers; the output layer is never
// shifted (its scale only rescales the logits uniformly).
inline constexpr int kHiddenActShift = 2;

QuantizedParams quantize_params(const VariationalParams& params, const fxp::FixedSpec& spec,
                                int hidden_shift = kHiddenActShift);
// Largest |dequantized - clamped float| over all tensors; quantizer contract check.
double max_quantization_error(const VariationalParams& params, const QuantizedParams& q);

struct PEConfig {
    int T = 16;     // PE-set count
    int S = 8;      // PEs per set
    int N = 8;      // PE input width
    int B = 8;      // operand bit-length
    int MaxWS = 512;
    int M() const { return T * S; }
};

// Chunked time-multiplexed MAC emulation: each neuron's dot product is
// accumulated in chunks of N inputs, bias added once at the end; ReLU
// optional. Functionally a dense layer.
std::vector<float> pe_forward(const std::vector<float>& inputs, const Matrix& weights,
                              const std::vector<float>& bias, int chunk, bool relu);

// Quantized datapath: raw int64 accumulator over the whole dot product,
// one rescale + saturation at write-back.
std::vector<int32_t> pe_forward_fx(const std::vector<int32_t>& inputs_raw,
                                   const std::vector<int32_t>& weights_raw,
                                   const std::vector<int32_t>& bias_raw, size_t out,
                                   size_t in, const fxp::FixedSpec& spec, bool relu);

struct InferenceResult {
    Matrix mc_outputs;                 // n_samples x classes
    std::vector<double> mean_output;
    std::vector<double> predictive_std;
    int predicted = -1;
};

// Monte Carlo averaged inference; fresh eps for every weight on every sample.
InferenceResult mc_inference(const std::vector<float>& x0, const VariationalParams& params,
                             int n_samples, GrnSource& grng);

// Same on the fixed-point datapath: eps, mu, sigma, weights and activations
// all share `spec`.
InferenceResult mc_inference_fx(const std::vector<float>& x0, const QuantizedParams& params,
                                int n_samples, GrnSource& grng);

enum class CheckStatus { Pass, Warn, Fail };

struct ConfigCheck {
    std::string name;
    CheckStatus status;
    std::string detail;
};

// Evaluates the PE/memory sizing constraints against a topology. The
// T*S < ceil(MinIn/N) constraint is reported as a warning when violated.
std::vector<ConfigCheck> validate_config(const PEConfig& cfg, const NetworkTopology& topo);

struct CycleEstimate {
    uint64_t cycles_per_image = 0;
    double images_per_second = 0;
};

// Analytic throughput model: sum over layers of ceil(out/M)*ceil(in/N)
// plus a fixed pipeline fill overhead. Informational only.
inline constexpr uint64_t kPipelineFillCycles = 5;
CycleEstimate cycle_estimate(const PEConfig& cfg, const NetworkTopology& topo,
                             double clock_hz = 200e6);

struct SweepPoint {
    fxp::FixedSpec spec;
    double accuracy = 0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    double float_accuracy = 0;
    int smallest_passing_bits = -1;    // -1 when none meets the threshold
    double threshold = 0.975;
};

// Dataset rows are images; labels parallel. Factory yields a fresh GRNG per
// evaluation so points are independent.
SweepResult bitlength_sweep(const VariationalParams& params, const Matrix& images,
                            const std::vector<int>& labels,
                            const std::vector<fxp::FixedSpec>& specs, int mc_samples,
                            const std::function<std::unique_ptr<GrnSource>(uint64_t)>& grng,
                            uint64_t seed, double threshold = 0.975);

// Test-set accuracy helpers.
double accuracy_float(const VariationalParams& params, const Matrix& images,
                      const std::vector<int>& labels, int mc_samples, GrnSource& grng);
double accuracy_fx(const QuantizedParams& params, const Matrix& images,
                   const std::vector<int>& labels, int mc_samples, GrnSource& grng);

}  // namespace vibnn::bnn

#endif
