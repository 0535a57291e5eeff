#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "vibnn/bnn.hpp"
#include "vibnn/dataset.hpp"
#include "vibnn/grng.hpp"
#include "vibnn/params_io.hpp"
#include "vibnn/rlf.hpp"
#include "vibnn/stats.hpp"
#include "vibnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vibnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitWarning = 2;
constexpr int kExitError = 3;

struct GlobalOpts {
    uint64_t seed = 1;
    bool json_out = false;
    int threads = 1;
};

bnn::NetworkTopology parse_topology(const std::string& spec) {
    std::string s = spec;
    for (auto& c : s)
        if (c == '-' || c == 'x') c = ',';  // accept 784,200,10 / 784-200-10 / 784x200x10
    bnn::NetworkTopology topo;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) topo.layer_sizes.push_back(std::stoi(tok));
    topo.validate();
    return topo;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

// A dataset path is either a directory holding the IDX quartet or a CSV file.
io::Dataset load_split(const std::string& path, bool train_split, int label_col) {
    if (fs::is_directory(path)) {
        const std::string stem = train_split ? "train" : "t10k";
        return io::read_idx(path + "/" + stem + "-images-idx3-ubyte",
                            path + "/" + stem + "-labels-idx1-ubyte");
    }
    io::CsvSchema schema;
    schema.label_column = label_col;
    return io::read_csv_labeled(path, schema);
}

void emit(const json& report, const GlobalOpts& g) {
    if (g.json_out) {
        std::cout << report.dump(2) << "\n";
        return;
    }
    for (const auto& [k, v] : report.items())
        std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
}

struct WallaceOpts {
    std::string variant = "ring";
    size_t units = 8;
    size_t pool = 0;  // 0 = variant default
    int loops = 2;
};

// rlf_stride: decimation for the RLF stream. Statistics commands keep the
// default so the emitted samples are serially independent; inference paths
// pass 1 because MC weight sampling does not need decorrelated batches and
// the stride multiplies runtime.
std::unique_ptr<GrnSource> build_source(const std::string& grng, const WallaceOpts& w,
                                        uint64_t seed, int rlf_stride = 129) {
    if (grng == "rlf") return std::make_unique<RlfGrnSource>(seed, 64, rlf_stride);
    if (grng == "reference") return make_grn_source(grng, seed);
    if (grng == "nss") return std::make_unique<WallaceNssSource>(seed, w.pool ? w.pool : 256);
    if (grng == "software")
        return std::make_unique<SoftwareWallaceSource>(seed, w.pool ? w.pool : 4096, w.loops);
    if (grng == "wallace") {
        if (w.variant == "ring")
            return std::make_unique<WallaceRingSource>(seed, w.units, w.pool ? w.pool : 1024);
        if (w.variant == "nss")
            return std::make_unique<WallaceNssSource>(seed, w.pool ? w.pool : 256);
        if (w.variant == "software")
            return std::make_unique<SoftwareWallaceSource>(seed, w.pool ? w.pool : 4096, w.loops);
        throw CLI::ValidationError("--variant must be ring, nss or software");
    }
    throw CLI::ValidationError("--grng must be rlf, wallace, nss, software or reference");
}

json source_config(const std::string& grng, const WallaceOpts& w, uint64_t seed) {
    json j{{"grng", grng}, {"seed", seed}};
    if (grng == "wallace") j["variant"] = w.variant;
    if (grng == "wallace" && w.variant == "ring") j["units"] = w.units;
    if (grng != "rlf" && grng != "reference") {
        size_t def = 256;
        if (grng == "software" || w.variant == "software") def = 4096;
        else if (grng == "wallace" && w.variant == "ring") def = 1024;
        j["pool"] = w.pool ? w.pool : def;
        if (grng == "software" || w.variant == "software") j["loops"] = w.loops;
    }
    return j;
}

int cmd_gen(const GlobalOpts& g, const std::string& grng, const WallaceOpts& w, size_t count,
            bool raw_sums, bool dump_state) {
    if (raw_sums && grng != "rlf")
        throw CLI::ValidationError("--raw-sums is only available with --grng rlf");

    json report = source_config(grng, w, g.seed);
    report["count"] = count;
    report["raw_sums"] = raw_sums;

    if (raw_sums || (dump_state && grng == "rlf")) {
        rlf::ParallelRlf gen(64, g.seed);
        std::vector<int> raw;
        std::vector<double> std_samples;
        while (raw_sums ? raw.size() < count : std_samples.size() < count) {
            if (raw_sums) gen.next_raw(raw);
            else gen.next_standardized(std_samples);
        }
        if (g.json_out) {
            if (raw_sums) {
                raw.resize(count);
                report["samples"] = raw;
            } else {
                std_samples.resize(count);
                report["samples"] = std_samples;
            }
            std::cout << report.dump(2) << "\n";
        } else {
            for (size_t i = 0; i < count; ++i) {
                if (raw_sums) std::cout << raw[i] << "\n";
                else std::cout << std_samples[i] << "\n";
            }
        }
        if (dump_state) gen.engine().dump_state(std::cerr);
        return kExitOk;
    }

    auto src = build_source(grng, w, g.seed);
    std::vector<double> samples;
    src->fill(samples, count);
    if (g.json_out) {
        report["samples"] = samples;
        std::cout << report.dump(2) << "\n";
    } else {
        for (double v : samples) std::cout << v << "\n";
    }
    return kExitOk;
}

int cmd_stats(const GlobalOpts& g, const std::string& grng, const WallaceOpts& w, size_t samples,
              int trials, double alpha) {
    auto factory = [&](uint64_t seed) { return build_source(grng, w, seed); };

    auto src = factory(SplitMix64::derive(g.seed, 1));
    std::vector<double> stream;
    src->fill(stream, samples);
    const auto stab = stats::stability(stream);
    const double rate =
        stats::pass_rate(factory, SplitMix64::derive(g.seed, 2), trials, samples, alpha, g.threads);

    json report = source_config(grng, w, g.seed);
    report["samples"] = samples;
    report["trials"] = trials;
    report["alpha"] = alpha;
    report["mu_error"] = stab.mu_error;
    report["sigma_error"] = stab.sigma_error;
    report["runs_test_pass_rate"] = rate;

    if (grng == "rlf") {
        // decorrelate the per-lane random walk by striding across the stream
        rlf::ParallelRlf gen(64, SplitMix64::derive(g.seed, 3));
        std::vector<int> raw;
        const size_t stride = 129;
        while (raw.size() < samples * stride) gen.next_raw(raw);
        std::vector<int> picked;
        for (size_t i = 0; i < samples; ++i) picked.push_back(raw[i * stride]);
        report["binomial_gof_p"] = stats::binomial_gof(picked, gen.length(), 0.5);
    }
    emit(report, g);
    return kExitOk;
}

int cmd_train(const GlobalOpts& g, const std::string& dataset, int label_col,
              const std::string& topology, train::TrainConfig cfg, bool fnn,
              const std::string& out_path) {
    const auto topo = parse_topology(topology);
    auto data = load_split(dataset, true, label_col);
    if (!fs::is_directory(dataset)) {
        const auto zs = io::zscore_fit(data.features);
        io::zscore_apply(data.features, zs);
    }
    cfg.seed = g.seed;

    train::TrainLog log;
    json report{{"dataset", dataset},  {"topology", topology},
                {"epochs", cfg.epochs}, {"batch_size", cfg.batch_size},
                {"learning_rate", cfg.learning_rate}, {"momentum", cfg.momentum},
                {"fraction", cfg.data_fraction}, {"seed", g.seed},
                {"model", fnn ? "fnn_dropout" : "bnn_bbb"}, {"out", out_path}};
    if (fnn) {
        report["dropout"] = cfg.dropout;
        const auto wts = train::train_fnn_dropout(data, topo, cfg, &log);
        report["train_accuracy"] = train::fnn_accuracy(wts, data.features, data.labels);
        // persist the point weights as a variational file with sigma ~ 0
        bnn::VariationalParams p;
        for (size_t l = 0; l < wts.w.size(); ++l) {
            bnn::VariationalParams::Layer lay;
            lay.mu_w = wts.w[l];
            lay.rho_w = Matrix(wts.w[l].rows, wts.w[l].cols, -30.f);
            lay.mu_b = wts.b[l];
            lay.rho_b.assign(wts.b[l].size(), -30.f);
            p.layers.push_back(std::move(lay));
        }
        io::write_params(out_path, p);
    } else {
        report["prior_std"] = cfg.prior_std;
        const auto params = train::train_bbb(data, topo, cfg, &log);
        io::write_params(out_path, params);
    }
    report["epoch_loss"] = log.epoch_loss;
    emit(report, g);
    return kExitOk;
}

int cmd_quantize(const GlobalOpts& g, const std::string& in_path, const std::string& out_path,
                 int bits, int frac) {
    const auto params = io::read_params(in_path);
    fxp::FixedSpec spec{bits, frac >= 0 ? frac : bits - 3, true};
    spec.validate();
    const auto q = bnn::quantize_params(params, spec);
    io::write_quant(out_path, q);
    json report{{"in", in_path},
                {"out", out_path},
                {"total_bits", spec.total_bits},
                {"frac_bits", spec.frac_bits},
                {"max_quantization_error", bnn::max_quantization_error(params, q)},
                {"quantization_step", spec.step()}};
    emit(report, g);
    return kExitOk;
}

int cmd_infer(const GlobalOpts& g, const std::string& params_path, const std::string& dataset,
              int label_col, int mc, const std::string& grng, const WallaceOpts& w, int quant,
              size_t limit) {
    const auto params = io::read_params(params_path);
    auto data = load_split(dataset, false, label_col);
    if (!fs::is_directory(dataset)) {
        const auto zs = io::zscore_fit(data.features);
        io::zscore_apply(data.features, zs);
    }
    if (limit && limit < data.features.rows) {
        Matrix m(limit, data.features.cols);
        std::copy(data.features.data.begin(), data.features.data.begin() + m.size(),
                  m.data.begin());
        data.features = std::move(m);
        data.labels.resize(limit);
    }

    auto src = build_source(grng, w, SplitMix64::derive(g.seed, 11), 1);
    json report = source_config(grng, w, g.seed);
    report["params"] = params_path;
    report["dataset"] = dataset;
    report["mc_samples"] = mc;
    report["images"] = data.features.rows;
    report["quant_bits"] = quant;
    if (quant > 0) {
        fxp::FixedSpec spec{quant, quant - 3, true};
        const auto q = bnn::quantize_params(params, spec);
        report["accuracy"] = bnn::accuracy_fx(q, data.features, data.labels, mc, *src);
    } else {
        report["accuracy"] = bnn::accuracy_float(params, data.features, data.labels, mc, *src);
    }
    emit(report, g);
    return kExitOk;
}

int cmd_validate_config(const GlobalOpts& g, const bnn::PEConfig& cfg,
                        const std::string& topology) {
    const auto topo = parse_topology(topology);
    const auto checks = bnn::validate_config(cfg, topo);
    const auto est = bnn::cycle_estimate(cfg, topo);

    bool warn = false, fail = false;
    json jchecks = json::array();
    for (const auto& c : checks) {
        const char* s = c.status == bnn::CheckStatus::Pass ? "pass"
                        : c.status == bnn::CheckStatus::Warn ? "warning" : "fail";
        warn |= c.status == bnn::CheckStatus::Warn;
        fail |= c.status == bnn::CheckStatus::Fail;
        jchecks.push_back({{"name", c.name}, {"status", s}, {"detail", c.detail}});
    }
    json report{{"T", cfg.T}, {"S", cfg.S}, {"N", cfg.N}, {"B", cfg.B},
                {"MaxWS", cfg.MaxWS}, {"topology", topology}, {"checks", jchecks},
                {"cycles_per_image", est.cycles_per_image},
                {"images_per_second", est.images_per_second}};
    if (g.json_out) std::cout << report.dump(2) << "\n";
    else {
        for (const auto& c : jchecks)
            std::cout << c["name"].get<std::string>() << ": " << c["status"].get<std::string>()
                      << " (" << c["detail"].get<std::string>() << ")\n";
        std::cout << "cycles_per_image: " << est.cycles_per_image << "\n";
    }
    if (fail) return kExitError;
    return warn ? kExitWarning : kExitOk;
}

int cmd_sweep(const GlobalOpts& g, const std::string& params_path, const std::string& dataset,
              int label_col, const std::string& bits_csv, int mc, const std::string& grng,
              const WallaceOpts& w, double threshold, size_t limit) {
    const auto params = io::read_params(params_path);
    auto data = load_split(dataset, false, label_col);
    if (limit && limit < data.features.rows) {
        Matrix m(limit, data.features.cols);
        std::copy(data.features.data.begin(), data.features.data.begin() + m.size(),
                  m.data.begin());
        data.features = std::move(m);
        data.labels.resize(limit);
    }
    std::vector<fxp::FixedSpec> specs;
    for (int b : parse_int_list(bits_csv)) specs.push_back({b, b - 3, true});

    auto factory = [&](uint64_t seed) { return build_source(grng, w, seed, 1); };
    const auto sweep = bnn::bitlength_sweep(params.layers.empty() ? params : params, data.features,
                                            data.labels, specs, mc, factory, g.seed, threshold);

    json points = json::array();
    for (const auto& p : sweep.points)
        points.push_back({{"total_bits", p.spec.total_bits},
                          {"frac_bits", p.spec.frac_bits},
                          {"accuracy", p.accuracy}});
    json report = source_config(grng, w, g.seed);
    report["params"] = params_path;
    report["dataset"] = dataset;
    report["mc_samples"] = mc;
    report["images"] = data.features.rows;
    report["threshold"] = threshold;
    report["float_accuracy"] = sweep.float_accuracy;
    report["points"] = points;
    report["smallest_passing_bits"] = sweep.smallest_passing_bits;
    emit(report, g);
    return kExitOk;
}

int cmd_small_data(const GlobalOpts& g, const std::string& dataset, int label_col,
                   const std::string& topology, double fraction, train::TrainConfig cfg,
                   double dropout, int mc) {
    const auto topo = parse_topology(topology);
    auto tr = load_split(dataset, true, label_col);
    auto te = load_split(dataset, false, label_col);
    cfg.seed = g.seed;
    cfg.data_fraction = fraction;

    auto bnn_cfg = cfg;
    const auto params = train::train_bbb(tr, topo, bnn_cfg);
    auto ref = make_grn_source("reference", SplitMix64::derive(g.seed, 21));
    const double bnn_acc = bnn::accuracy_float(params, te.features, te.labels, mc, *ref);

    auto fnn_cfg = cfg;
    fnn_cfg.dropout = dropout;
    const auto wts = train::train_fnn_dropout(tr, topo, fnn_cfg);
    const double fnn_acc = train::fnn_accuracy(wts, te.features, te.labels);

    json report{{"experiment", "small-data"}, {"dataset", dataset}, {"topology", topology},
                {"fraction", fraction},       {"epochs", cfg.epochs}, {"seed", g.seed},
                {"mc_samples", mc},           {"dropout", dropout},
                {"bnn_accuracy", bnn_acc},    {"fnn_accuracy", fnn_acc},
                {"bnn_wins", bnn_acc >= fnn_acc}};
    emit(report, g);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian RNG hardware models, statistical checks and Bayesian "
                 "neural network tooling"};
    app.require_subcommand(1);
    app.fallthrough(true);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master RNG seed")->capture_default_str();
    app.add_flag("--json", g.json_out, "emit a JSON report");
    app.add_option("--threads", g.threads, "worker threads where supported")
        ->capture_default_str();

    std::string grng = "rlf";
    WallaceOpts w;
    size_t count = 16, samples = 100000, limit = 0;
    int trials = 100, mc = 8, quant = 0, label_col = 0, bits = 8, frac = -1;
    double alpha = 0.05, threshold = 0.975, fraction = 1.0 / 256.0, dropout = 0.5;
    bool raw_sums = false, dump_state = false, fnn = false;
    std::string dataset, topology = "784,200,200,10", params_path, out_path = "params.vib";
    std::string bits_csv = "4,6,8,10,12,16";
    train::TrainConfig tcfg;

    auto add_grng_opts = [&](CLI::App* c) {
        c->add_option("--grng", grng, "rlf | wallace | nss | software | reference")
            ->capture_default_str();
        c->add_option("--variant", w.variant, "wallace variant: ring | nss | software")
            ->capture_default_str();
        c->add_option("--units", w.units, "ring units")->capture_default_str();
        c->add_option("--pool", w.pool, "pool size per unit (0 = variant default)");
        c->add_option("--loops", w.loops, "software-variant transform passes")
            ->capture_default_str();
    };
    auto add_dataset_opt = [&](CLI::App* c) {
        c->add_option("--dataset", dataset, "IDX directory or labeled CSV file")->required();
        c->add_option("--label-col", label_col, "CSV label column")->capture_default_str();
    };

    auto* gen = app.add_subcommand("gen", "emit Gaussian samples");
    add_grng_opts(gen);
    gen->add_option("--count", count, "samples to emit")->capture_default_str();
    gen->add_flag("--raw-sums", raw_sums, "emit raw bit sums (rlf only)");
    gen->add_flag("--dump-state", dump_state, "hex state dump to stderr (rlf)");

    auto* st = app.add_subcommand("stats", "distribution quality report");
    add_grng_opts(st);
    st->add_option("--samples", samples, "samples per stream")->capture_default_str();
    st->add_option("--trials", trials, "runs-test trials")->capture_default_str();
    st->add_option("--alpha", alpha, "runs-test significance")->capture_default_str();

    auto* tr = app.add_subcommand("train", "train a model");
    add_dataset_opt(tr);
    tr->add_option("--topology", topology, "comma-separated layer sizes")->capture_default_str();
    tr->add_option("--epochs", tcfg.epochs)->capture_default_str();
    tr->add_option("--batch", tcfg.batch_size)->capture_default_str();
    tr->add_option("--lr", tcfg.learning_rate)->capture_default_str();
    tr->add_option("--momentum", tcfg.momentum)->capture_default_str();
    tr->add_option("--prior-std", tcfg.prior_std)->capture_default_str();
    tr->add_option("--kl-weight", tcfg.kl_weight, "< 0 selects 1/minibatches");
    tr->add_option("--fraction", tcfg.data_fraction, "training data fraction")
        ->capture_default_str();
    tr->add_flag("--fnn", fnn, "train the dropout FNN baseline instead");
    tr->add_option("--dropout", tcfg.dropout, "FNN hidden dropout")->capture_default_str();
    tr->add_option("--out", out_path, "output parameter file")->capture_default_str();

    auto* qz = app.add_subcommand("quantize", "quantize a parameter file");
    qz->add_option("--params", params_path, "input parameter file")->required();
    qz->add_option("--out", out_path, "output quantized file")->required();
    qz->add_option("--bits", bits, "total bits")->capture_default_str();
    qz->add_option("--frac", frac, "fractional bits (default bits-3)");

    auto* inf = app.add_subcommand("infer", "Monte Carlo test-set inference");
    inf->add_option("--params", params_path)->required();
    add_dataset_opt(inf);
    inf->add_option("--mc", mc, "Monte Carlo samples per image")->capture_default_str();
    add_grng_opts(inf);
    inf->add_option("--quant", quant, "quantize to this bit width (0 = float)")
        ->capture_default_str();
    inf->add_option("--limit", limit, "cap on evaluated images (0 = all)");

    auto* vc = app.add_subcommand("validate-config", "check accelerator sizing constraints");
    bnn::PEConfig pe;
    vc->add_option("--T", pe.T)->capture_default_str();
    vc->add_option("--S", pe.S)->capture_default_str();
    vc->add_option("--N", pe.N)->capture_default_str();
    vc->add_option("--B", pe.B)->capture_default_str();
    vc->add_option("--maxws", pe.MaxWS)->capture_default_str();
    vc->add_option("--topology", topology)->capture_default_str();

    auto* sw = app.add_subcommand("sweep-bitlength", "accuracy vs quantization bit width");
    sw->add_option("--params", params_path)->required();
    add_dataset_opt(sw);
    sw->add_option("--bits", bits_csv, "comma-separated total bit widths")->capture_default_str();
    sw->add_option("--mc", mc)->capture_default_str();
    add_grng_opts(sw);
    sw->add_option("--threshold", threshold)->capture_default_str();
    sw->add_option("--limit", limit, "cap on evaluated images (0 = all)");

    auto* ex = app.add_subcommand("experiment", "scripted comparisons");
    ex->require_subcommand(1);
    auto* sd = ex->add_subcommand("small-data", "variational net vs dropout FNN on a fraction");
    add_dataset_opt(sd);
    sd->add_option("--topology", topology)->capture_default_str();
    sd->add_option("--fraction", fraction)->capture_default_str();
    sd->add_option("--epochs", tcfg.epochs)->capture_default_str();
    sd->add_option("--lr", tcfg.learning_rate)->capture_default_str();
    sd->add_option("--dropout", dropout)->capture_default_str();
    sd->add_option("--mc", mc)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_gen(g, grng, w, count, raw_sums, dump_state);
        if (*st) return cmd_stats(g, grng, w, samples, trials, alpha);
        if (*tr) return cmd_train(g, dataset, label_col, topology, tcfg, fnn, out_path);
        if (*qz) return cmd_quantize(g, params_path, out_path, bits, frac);
        if (*inf) return cmd_infer(g, params_path, dataset, label_col, mc, grng, w, quant, limit);
        if (*vc) return cmd_validate_config(g, pe, topology);
        if (*sw)
            return cmd_sweep(g, params_path, dataset, label_col, bits_csv, mc, grng, w, threshold,
                             limit);
        if (*sd) return cmd_small_data(g, dataset, label_col, topology, fraction, tcfg, dropout, mc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitOk;
}
