#ifndef VIBNN_TRAIN_HPP
#define VIBNN_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "vibnn/bnn.hpp"
#include "vibnn/dataset.hpp"

namespace vibnn::train {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 100;
    double learning_rate = 0.1;
    double momentum = 0.9;
    double prior_std = 1.0;
    double kl_weight = -1.0;   // < 0: 1 / number of minibatches per epoch
    double data_fraction = 1.0;
    double dropout = 0.5;      // FNN baseline only
    uint64_t seed = 1;

    void validate() const;
};

// Deterministic point weights for the dropout-FNN baseline.
struct FnnWeights {
    std::vector<Matrix> w;
    std::vector<std::vector<float>> b;
};

// Gradients in the same shape as the variational parameters.
struct BbbGrads {
    std::vector<Matrix> d_mu_w, d_rho_w;
    std::vector<std::vector<float>> d_mu_b, d_rho_b;
};

// KL(q(w; mu, sigma) || N(0, prior_std^2)) summed over all parameters,
// closed form for diagonal Gaussians.
double kl_to_prior(const bnn::VariationalParams& params, double prior_std);

// One-sample ELBO estimate and its gradients for a minibatch, with the eps
// draws supplied explicitly (for finite-difference checking).
// loss = kl_weight * KL + sum over batch of softmax cross-entropy.
double bbb_loss_and_grads(const bnn::VariationalParams& params, const Matrix& x,
                          const std::vector<int>& y, const std::vector<Matrix>& eps_w,
                          const std::vector<std::vector<float>>& eps_b, double prior_std,
                          double kl_weight, BbbGrads* grads);

struct TrainLog {
    std::vector<double> epoch_loss;
};

bnn::VariationalParams train_bbb(const io::Dataset& data, const bnn::NetworkTopology& topo,
                                 const TrainConfig& cfg, TrainLog* log = nullptr);

FnnWeights train_fnn_dropout(const io::Dataset& data, const bnn::NetworkTopology& topo,
                             const TrainConfig& cfg, TrainLog* log = nullptr);

// Deterministic forward pass (dropout off), argmax prediction.
int fnn_predict(const FnnWeights& w, const std::vector<float>& x);
double fnn_accuracy(const FnnWeights& w, const Matrix& images, const std::vector<int>& labels);

}  // namespace vibnn::train

#endif
