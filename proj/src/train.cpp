#include "vibnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vibnn/normal.hpp"
#include "vibnn/rng.hpp"

namespace vibnn::train {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("TrainConfig: bad epochs/batch");
    if (learning_rate <= 0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (prior_std <= 0) throw std::invalid_argument("TrainConfig: prior_std must be > 0");
    if (!(data_fraction > 0 && data_fraction <= 1))
        throw std::invalid_argument("TrainConfig: data_fraction must be in (0, 1]");
    if (dropout < 0 || dropout >= 1) throw std::invalid_argument("TrainConfig: dropout in [0, 1)");
}

double kl_to_prior(const bnn::VariationalParams& params, double prior_std) {
    const double s2 = prior_std * prior_std;
    double kl = 0;
    auto acc = [&](double mu, double rho) {
        const double sigma = bnn::sigma_from_rho(rho);
        kl += std::log(prior_std / sigma) + (sigma * sigma + mu * mu) / (2.0 * s2) - 0.5;
    };
    for (const auto& l : params.layers) {
        for (size_t i = 0; i < l.mu_w.size(); ++i) acc(l.mu_w.data[i], l.rho_w.data[i]);
        for (size_t i = 0; i < l.mu_b.size(); ++i) acc(l.mu_b[i], l.rho_b[i]);
    }
    return kl;
}

namespace {

// batch forward of one dense layer: out[b] = act[b] * W^T + bias
void dense_forward(const Matrix& act, const Matrix& w, const std::vector<float>& b,
                   Matrix& out, bool relu) {
    out = Matrix(act.rows, w.rows);
    for (size_t r = 0; r < act.rows; ++r) {
        const float* a = act.row(r);
        float* o = out.row(r);
        for (size_t j = 0; j < w.rows; ++j) {
            const float* wr = w.row(j);
            double acc = 0;
            for (size_t i = 0; i < w.cols; ++i) acc += double(wr[i]) * double(a[i]);
            acc += double(b[j]);
            o[j] = float(relu ? std::max(0.0, acc) : acc);
        }
    }
}

// Softmax cross-entropy over a batch; fills dlogits and returns summed loss.
double softmax_ce(const Matrix& logits, const std::vector<int>& y, Matrix& dlogits) {
    dlogits = Matrix(logits.rows, logits.cols);
    double loss = 0;
    for (size_t r = 0; r < logits.rows; ++r) {
        const float* z = logits.row(r);
        float mx = z[0];
        for (size_t c = 1; c < logits.cols; ++c) mx = std::max(mx, z[c]);
        double denom = 0;
        for (size_t c = 0; c < logits.cols; ++c) denom += std::exp(double(z[c]) - mx);
        const double logdenom = std::log(denom) + mx;
        loss += logdenom - double(z[y[r]]);
        float* d = dlogits.row(r);
        for (size_t c = 0; c < logits.cols; ++c)
            d[c] = float(std::exp(double(z[c]) - logdenom) - (int(c) == y[r] ? 1.0 : 0.0));
    }
    return loss;
}

// dW = dout^T * act ; db = column sums of dout ; dact = dout * W
void dense_backward(const Matrix& act, const Matrix& w, const Matrix& dout, Matrix& dw,
                    std::vector<float>& db, Matrix* dact) {
    dw = Matrix(w.rows, w.cols);
    db.assign(w.rows, 0.f);
    for (size_t r = 0; r < act.rows; ++r) {
        const float* a = act.row(r);
        const float* d = dout.row(r);
        for (size_t j = 0; j < w.rows; ++j) {
            float* dwr = dw.row(j);
            const float dj = d[j];
            for (size_t i = 0; i < w.cols; ++i) dwr[i] += dj * a[i];
            db[j] += dj;
        }
    }
    if (dact) {
        *dact = Matrix(act.rows, act.cols);
        for (size_t r = 0; r < act.rows; ++r) {
            const float* d = dout.row(r);
            float* da = dact->row(r);
            for (size_t j = 0; j < w.rows; ++j) {
                const float* wr = w.row(j);
                const float dj = d[j];
                for (size_t i = 0; i < w.cols; ++i) da[i] += dj * wr[i];
            }
        }
    }
}

void relu_backward_inplace(Matrix& dact, const Matrix& activated) {
    for (size_t i = 0; i < dact.size(); ++i)
        if (activated.data[i] <= 0.f) dact.data[i] = 0.f;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bnn::VariationalParams init_variational(const bnn::NetworkTopology& topo, uint64_t seed) {
    bnn::VariationalParams p;
    InverseCdfGaussian g(seed);
    for (int l = 0; l < topo.num_layers(); ++l) {
        const size_t in = size_t(topo.layer_sizes[l]);
        const size_t out = size_t(topo.layer_sizes[l + 1]);
        bnn::VariationalParams::Layer lay;
        lay.mu_w = Matrix(out, in);
        lay.rho_w = Matrix(out, in, -5.f);  // sigma ~ 6.7e-3 initially
        const double scale = std::sqrt(2.0 / double(in));
        for (auto& v : lay.mu_w.data) v = float(g.next() * scale);
        lay.mu_b.assign(out, 0.f);
        lay.rho_b.assign(out, -5.f);
        p.layers.push_back(std::move(lay));
    }
    return p;
}

struct Momentum {
    std::vector<Matrix> vw_mu, vw_rho;
    std::vector<std::vector<float>> vb_mu, vb_rho;
};

}  // namespace

double bbb_loss_and_grads(const bnn::VariationalParams& params, const Matrix& x,
                          const std::vector<int>& y, const std::vector<Matrix>& eps_w,
                          const std::vector<std::vector<float>>& eps_b, double prior_std,
                          double kl_weight, BbbGrads* grads) {
    const size_t L = params.layers.size();
    const auto sampled = bnn::sample_weights(params, eps_w, eps_b);

    std::vector<Matrix> acts(L + 1);
    acts[0] = x;
    for (size_t l = 0; l < L; ++l)
        dense_forward(acts[l], sampled.w[l], sampled.b[l], acts[l + 1], l + 1 < L);

    Matrix dout;
    double loss = softmax_ce(acts[L], y, dout);
    loss += kl_weight * kl_to_prior(params, prior_std);
    if (!grads) return loss;

    grads->d_mu_w.resize(L);
    grads->d_rho_w.resize(L);
    grads->d_mu_b.resize(L);
    grads->d_rho_b.resize(L);

    const double s2 = prior_std * prior_std;
    for (size_t l = L; l-- > 0;) {
        Matrix dw, dact;
        std::vector<float> db;
        dense_backward(acts[l], sampled.w[l], dout, dw, db, l > 0 ? &dact : nullptr);

        const auto& p = params.layers[l];
        auto& dmu = grads->d_mu_w[l];
        auto& drho = grads->d_rho_w[l];
        dmu = Matrix(dw.rows, dw.cols);
        drho = Matrix(dw.rows, dw.cols);
        for (size_t i = 0; i < dw.size(); ++i) {
            const double mu = p.mu_w.data[i], rho = p.rho_w.data[i];
            const double sg = bnn::sigma_from_rho(rho);
            const double dL_dw = dw.data[i];
            dmu.data[i] = float(dL_dw + kl_weight * mu / s2);
            const double dKL_dsigma = -1.0 / sg + sg / s2;
            drho.data[i] =
                float((dL_dw * double(eps_w[l].data[i]) + kl_weight * dKL_dsigma) * sigmoid(rho));
        }
        auto& dmub = grads->d_mu_b[l];
        auto& drhob = grads->d_rho_b[l];
        dmub.assign(db.size(), 0.f);
        drhob.assign(db.size(), 0.f);
        for (size_t i = 0; i < db.size(); ++i) {
            const double mu = p.mu_b[i], rho = p.rho_b[i];
            const double sg = bnn::sigma_from_rho(rho);
            dmub[i] = float(double(db[i]) + kl_weight * mu / s2);
            const double dKL_dsigma = -1.0 / sg + sg / s2;
            drhob[i] =
                float((double(db[i]) * double(eps_b[l][i]) + kl_weight * dKL_dsigma) * sigmoid(rho));
        }

        if (l > 0) {
            relu_backward_inplace(dact, acts[l]);
            dout = std::move(dact);
        }
    }
    return loss;
}

bnn::VariationalParams train_bbb(const io::Dataset& full, const bnn::NetworkTopology& topo,
                                 const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    topo.validate();
    if (full.features.rows == 0) throw std::invalid_argument("train_bbb: empty dataset");

    const io::Dataset data = cfg.data_fraction < 1.0
                                 ? io::subsample(full, cfg.data_fraction,
                                                 SplitMix64::derive(cfg.seed, 900))
                                 : full;

    auto params = init_variational(topo, SplitMix64::derive(cfg.seed, 0));
    const size_t n = data.features.rows;
    const size_t batches = (n + size_t(cfg.batch_size) - 1) / size_t(cfg.batch_size);
    const double klw = cfg.kl_weight >= 0 ? cfg.kl_weight : 1.0 / double(batches);

    Momentum mom;
    const size_t L = params.layers.size();
    mom.vw_mu.resize(L);
    mom.vw_rho.resize(L);
    mom.vb_mu.resize(L);
    mom.vb_rho.resize(L);
    for (size_t l = 0; l < L; ++l) {
        mom.vw_mu[l] = Matrix(params.layers[l].mu_w.rows, params.layers[l].mu_w.cols);
        mom.vw_rho[l] = Matrix(params.layers[l].mu_w.rows, params.layers[l].mu_w.cols);
        mom.vb_mu[l].assign(params.layers[l].mu_b.size(), 0.f);
        mom.vb_rho[l].assign(params.layers[l].mu_b.size(), 0.f);
    }

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix64 shuffle_rng(SplitMix64::derive(cfg.seed, 1));
    InverseCdfGaussian eps_rng(SplitMix64::derive(cfg.seed, 2));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);
        double epoch_loss = 0;
        for (size_t b = 0; b < batches; ++b) {
            const size_t lo = b * size_t(cfg.batch_size);
            const size_t hi = std::min(n, lo + size_t(cfg.batch_size));
            Matrix bx(hi - lo, data.features.cols);
            std::vector<int> by(hi - lo);
            for (size_t r = lo; r < hi; ++r) {
                std::copy(data.features.row(order[r]), data.features.row(order[r]) + bx.cols,
                          bx.row(r - lo));
                by[r - lo] = data.labels[order[r]];
            }

            // one eps draw per weight per minibatch
            std::vector<Matrix> eps_w(L);
            std::vector<std::vector<float>> eps_b(L);
            for (size_t l = 0; l < L; ++l) {
                eps_w[l] = Matrix(params.layers[l].mu_w.rows, params.layers[l].mu_w.cols);
                for (auto& v : eps_w[l].data) v = float(eps_rng.next());
                eps_b[l].resize(params.layers[l].mu_b.size());
                for (auto& v : eps_b[l]) v = float(eps_rng.next());
            }

            BbbGrads g;
            const double loss =
                bbb_loss_and_grads(params, bx, by, eps_w, eps_b, cfg.prior_std, klw, &g);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_bbb: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(b));
            epoch_loss += loss;

            const float lr = float(cfg.learning_rate / double(bx.rows));
            const float mu = float(cfg.momentum);
            for (size_t l = 0; l < L; ++l) {
                auto& p = params.layers[l];
                for (size_t i = 0; i < p.mu_w.size(); ++i) {
                    mom.vw_mu[l].data[i] = mu * mom.vw_mu[l].data[i] - lr * g.d_mu_w[l].data[i];
                    p.mu_w.data[i] += mom.vw_mu[l].data[i];
                    mom.vw_rho[l].data[i] = mu * mom.vw_rho[l].data[i] - lr * g.d_rho_w[l].data[i];
                    p.rho_w.data[i] += mom.vw_rho[l].data[i];
                }
                for (size_t i = 0; i < p.mu_b.size(); ++i) {
                    mom.vb_mu[l][i] = mu * mom.vb_mu[l][i] - lr * g.d_mu_b[l][i];
                    p.mu_b[i] += mom.vb_mu[l][i];
                    mom.vb_rho[l][i] = mu * mom.vb_rho[l][i] - lr * g.d_rho_b[l][i];
                    p.rho_b[i] += mom.vb_rho[l][i];
                }
            }
        }
        if (log) log->epoch_loss.push_back(epoch_loss / double(n));
    }
    return params;
}

FnnWeights train_fnn_dropout(const io::Dataset& full, const bnn::NetworkTopology& topo,
                             const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    topo.validate();
    if (full.features.rows == 0) throw std::invalid_argument("train_fnn_dropout: empty dataset");

    const io::Dataset data = cfg.data_fraction < 1.0
                                 ? io::subsample(full, cfg.data_fraction,
                                                 SplitMix64::derive(cfg.seed, 900))
                                 : full;

    const size_t L = size_t(topo.num_layers());
    FnnWeights w;
    InverseCdfGaussian ginit(SplitMix64::derive(cfg.seed, 0));
    for (size_t l = 0; l < L; ++l) {
        const size_t in = size_t(topo.layer_sizes[l]), out = size_t(topo.layer_sizes[l + 1]);
        Matrix m(out, in);
        const double scale = std::sqrt(2.0 / double(in));
        for (auto& v : m.data) v = float(ginit.next() * scale);
        w.w.push_back(std::move(m));
        w.b.emplace_back(out, 0.f);
    }

    std::vector<Matrix> vw(L);
    std::vector<std::vector<float>> vb(L);
    for (size_t l = 0; l < L; ++l) {
        vw[l] = Matrix(w.w[l].rows, w.w[l].cols);
        vb[l].assign(w.b[l].size(), 0.f);
    }

    const size_t n = data.features.rows;
    const size_t batches = (n + size_t(cfg.batch_size) - 1) / size_t(cfg.batch_size);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix64 shuffle_rng(SplitMix64::derive(cfg.seed, 1));
    SplitMix64 drop_rng(SplitMix64::derive(cfg.seed, 2));

    const double keep = 1.0 - cfg.dropout;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.next_u64() % i]);
        double epoch_loss = 0;
        for (size_t b = 0; b < batches; ++b) {
            const size_t lo = b * size_t(cfg.batch_size);
            const size_t hi = std::min(n, lo + size_t(cfg.batch_size));
            Matrix bx(hi - lo, data.features.cols);
            std::vector<int> by(hi - lo);
            for (size_t r = lo; r < hi; ++r) {
                std::copy(data.features.row(order[r]), data.features.row(order[r]) + bx.cols,
                          bx.row(r - lo));
                by[r - lo] = data.labels[order[r]];
            }

            std::vector<Matrix> acts(L + 1);
            std::vector<Matrix> masks(L);  // inverted dropout on hidden activations
            acts[0] = bx;
            for (size_t l = 0; l < L; ++l) {
                dense_forward(acts[l], w.w[l], w.b[l], acts[l + 1], l + 1 < L);
                if (l + 1 < L && cfg.dropout > 0) {
                    masks[l] = Matrix(acts[l + 1].rows, acts[l + 1].cols);
                    for (size_t i = 0; i < masks[l].size(); ++i) {
                        const bool kept = drop_rng.next_unit() < keep;
                        masks[l].data[i] = kept ? float(1.0 / keep) : 0.f;
                        acts[l + 1].data[i] *= masks[l].data[i];
                    }
                }
            }

            Matrix dout;
            const double loss = softmax_ce(acts[L], by, dout);
            if (!std::isfinite(loss))
                throw std::runtime_error("train_fnn_dropout: loss diverged at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;

            const float lr = float(cfg.learning_rate / double(bx.rows));
            const float mo = float(cfg.momentum);
            for (size_t l = L; l-- > 0;) {
                Matrix dw, dact;
                std::vector<float> db;
                dense_backward(acts[l], w.w[l], dout, dw, db, l > 0 ? &dact : nullptr);
                for (size_t i = 0; i < dw.size(); ++i) {
                    vw[l].data[i] = mo * vw[l].data[i] - lr * dw.data[i];
                    w.w[l].data[i] += vw[l].data[i];
                }
                for (size_t i = 0; i < db.size(); ++i) {
                    vb[l][i] = mo * vb[l][i] - lr * db[i];
                    w.b[l][i] += vb[l][i];
                }
                if (l > 0) {
                    if (cfg.dropout > 0)
                        for (size_t i = 0; i < dact.size(); ++i)
                            dact.data[i] *= masks[l - 1].data[i];
                    relu_backward_inplace(dact, acts[l]);
                    dout = std::move(dact);
                }
            }
        }
        if (log) log->epoch_loss.push_back(epoch_loss / double(n));
    }
    return w;
}

int fnn_predict(const FnnWeights& w, const std::vector<float>& x) {
    std::vector<float> act = x;
    for (size_t l = 0; l < w.w.size(); ++l)
        act = bnn::pe_forward(act, w.w[l], w.b[l], int(w.w[l].cols), l + 1 < w.w.size());
    return int(std::max_element(act.begin(), act.end()) - act.begin());
}

double fnn_accuracy(const FnnWeights& w, const Matrix& images, const std::vector<int>& labels) {
    size_t correct = 0;
    for (size_t i = 0; i < images.rows; ++i) {
        std::vector<float> x(images.row(i), images.row(i) + images.cols);
        if (fnn_predict(w, x) == labels[i]) ++correct;
    }
    return double(correct) / double(images.rows);
}

}  // namespace vibnn::train
