#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "astroseg/errors.hpp"
#include "astroseg/rng.hpp"

namespace astroseg {

// Multilayer perceptron trained by plain per-sample backpropagation: sigmoid on
// every non-input layer, half squared error loss, uniform [-0.5, 0.5) init.
// Training splits the dataset into train/validation/test, walks the training
// half in a reshuffled order each epoch, and keeps the parameters of the epoch
// with the lowest validation MSE (early stopping).

struct BadTopology : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};
struct EmptyDataset : FormatError {
    using FormatError::FormatError;
};
struct EmptySet : FormatError {
    using FormatError::FormatError;
};
struct ModelShapeMismatch : FormatError {
    using FormatError::FormatError;
};

struct MlpNetwork {
    std::vector<int> layer_sizes;              // first = inputs, last = outputs
    std::vector<std::vector<double>> weights;  // [l]: layer_sizes[l+1] x layer_sizes[l], row-major
    std::vector<std::vector<double>> biases;   // [l]: layer_sizes[l+1]
    std::uint64_t seed = 0;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }
};

struct Sample {
    std::vector<double> features;
    std::vector<double> target;
};

struct TrainConfig {
    double learning_rate = 0.1;
    int max_epochs = 1000;
    int patience = 6; // validation checks without improvement before halting
    std::uint64_t seed = 1;
    std::array<double, 3> split{0.70, 0.15, 0.15}; // train, validation, test
};

struct EpochStats {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;
    double mse = 0.0;
    double error_rate = 0.0;
    std::string set_name;
};

struct TrainResult {
    MlpNetwork net; // parameters of the best-validation epoch
    std::vector<EpochStats> history;
    int best_epoch = 0;
    std::vector<std::size_t> train_indices, val_indices, test_indices;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline MlpNetwork init_network(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw BadTopology("need at least an input and an output layer");
    for (int s : layer_sizes)
        if (s < 1)
            throw BadTopology("every layer needs at least one unit");
    MlpNetwork net;
    net.layer_sizes = layer_sizes;
    net.seed = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = static_cast<std::size_t>(layer_sizes[l]);
        const std::size_t fan_out = static_cast<std::size_t>(layer_sizes[l + 1]);
        std::vector<double> w(fan_out * fan_in), b(fan_out);
        for (double& v : w)
            v = uniform01(rng) - 0.5;
        for (double& v : b)
            v = uniform01(rng) - 0.5;
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

struct ForwardResult {
    std::vector<double> output;
    std::vector<std::vector<double>> activations; // [0] = input ... [L] = output
};

inline ForwardResult forward(const MlpNetwork& net, std::span<const double> input) {
    if (input.size() != static_cast<std::size_t>(net.input_size()))
        throw DimensionMismatch("input has " + std::to_string(input.size()) + " components, network expects " +
                                std::to_string(net.input_size()));
    ForwardResult fr;
    fr.activations.reserve(net.layer_count() + 1);
    fr.activations.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const std::vector<double>& prev = fr.activations.back();
        const std::size_t fan_in = prev.size();
        const std::size_t fan_out = net.biases[l].size();
        std::vector<double> act(fan_out);
        for (std::size_t j = 0; j < fan_out; ++j) {
            double z = net.biases[l][j];
            const double* row = net.weights[l].data() + j * fan_in;
            for (std::size_t i = 0; i < fan_in; ++i)
                z += row[i] * prev[i];
            act[j] = sigmoid(z);
        }
        fr.activations.push_back(std::move(act));
    }
    fr.output = fr.activations.back();
    return fr;
}

struct Gradients {
    std::vector<std::vector<double>> weights, biases;
};

// Reverse-mode gradients of loss = 1/2 sum (output - target)^2, using
// sigma'(z) = a (1 - a). Returns the loss at the current parameters.
inline double compute_gradients(const MlpNetwork& net, std::span<const double> input,
                                std::span<const double> target, Gradients& grads) {
    if (target.size() != static_cast<std::size_t>(net.output_size()))
        throw DimensionMismatch("target has " + std::to_string(target.size()) + " components, network produces " +
                                std::to_string(net.output_size()));
    ForwardResult fr = forward(net, input);

    grads.weights.resize(net.layer_count());
    grads.biases.resize(net.layer_count());

    double loss = 0.0;
    const std::vector<double>& out = fr.output;
    std::vector<double> delta(out.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        double diff = out[j] - target[j];
        loss += 0.5 * diff * diff;
        delta[j] = diff * out[j] * (1.0 - out[j]);
    }

    for (std::size_t l = net.layer_count(); l-- > 0;) {
        const std::vector<double>& prev = fr.activations[l];
        const std::size_t fan_in = prev.size();
        const std::size_t fan_out = delta.size();
        grads.weights[l].assign(fan_out * fan_in, 0.0);
        grads.biases[l].assign(fan_out, 0.0);
        for (std::size_t j = 0; j < fan_out; ++j) {
            grads.biases[l][j] = delta[j];
            double* grow = grads.weights[l].data() + j * fan_in;
            for (std::size_t i = 0; i < fan_in; ++i)
                grow[i] = delta[j] * prev[i];
        }
        if (l > 0) {
            std::vector<double> next_delta(fan_in, 0.0);
            for (std::size_t i = 0; i < fan_in; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < fan_out; ++j)
                    acc += net.weights[l][j * fan_in + i] * delta[j];
                next_delta[i] = acc * prev[i] * (1.0 - prev[i]);
            }
            delta = std::move(next_delta);
        }
    }
    return loss;
}

// One SGD step on a single sample; returns the pre-update loss.
inline double backprop_step(MlpNetwork& net, std::span<const double> input,
                            std::span<const double> target, double lr) {
    if (!(lr > 0.0))
        throw InvalidArgument("learning rate must be positive");
    Gradients grads;
    double loss = compute_gradients(net, input, target, grads);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i)
            net.weights[l][i] -= lr * grads.weights[l][i];
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
            net.biases[l][i] -= lr * grads.biases[l][i];
    }
    return loss;
}

namespace detail {

inline double mean_sample_mse(const MlpNetwork& net, const std::vector<Sample>& samples,
                              std::span<const std::size_t> indices) {
    double total = 0.0;
    for (std::size_t idx : indices) {
        ForwardResult fr = forward(net, samples[idx].features);
        double loss = 0.0;
        for (std::size_t j = 0; j < fr.output.size(); ++j) {
            double d = fr.output[j] - samples[idx].target[j];
            loss += 0.5 * d * d;
        }
        total += loss;
    }
    return indices.empty() ? 0.0 : total / static_cast<double>(indices.size());
}

} // namespace detail

inline TrainResult train(const MlpNetwork& initial, const std::vector<Sample>& dataset,
                         const TrainConfig& cfg) {
    if (dataset.empty())
        throw EmptyDataset("training dataset is empty");
    for (const Sample& s : dataset) {
        if (s.features.size() != static_cast<std::size_t>(initial.input_size()) ||
            s.target.size() != static_cast<std::size_t>(initial.output_size()))
            throw DimensionMismatch("sample shape does not match network topology");
    }
    double split_sum = cfg.split[0] + cfg.split[1] + cfg.split[2];
    if (cfg.split[0] <= 0.0 || cfg.split[1] <= 0.0 || cfg.split[2] <= 0.0 ||
        std::abs(split_sum - 1.0) > 1e-9)
        throw InvalidArgument("split fractions must be positive and sum to 1");
    if (cfg.patience < 1)
        throw InvalidArgument("patience must be at least 1");

    TrainResult res;
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    deterministic_shuffle(order, rng);

    const std::size_t n = dataset.size();
    const auto n_train = static_cast<std::size_t>(std::floor(cfg.split[0] * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.split[1] * static_cast<double>(n)));
    res.train_indices.assign(order.begin(), order.begin() + n_train);
    res.val_indices.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    res.test_indices.assign(order.begin() + n_train + n_val, order.end());

    MlpNetwork net = initial;
    MlpNetwork best = net;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stall = 0;

    std::vector<std::size_t> epoch_order = res.train_indices;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        deterministic_shuffle(epoch_order, rng);
        for (std::size_t idx : epoch_order)
            backprop_step(net, dataset[idx].features, dataset[idx].target, cfg.learning_rate);

        double train_mse = detail::mean_sample_mse(net, dataset, res.train_indices);
        // tiny datasets can leave the validation slice empty; fall back to train MSE
        double val_mse = res.val_indices.empty() ? train_mse
                                                 : detail::mean_sample_mse(net, dataset, res.val_indices);
        res.history.push_back({epoch, train_mse, val_mse});

        if (val_mse < best_val) {
            best_val = val_mse;
            best = net;
            best_epoch = epoch;
            stall = 0;
        } else if (++stall >= cfg.patience) {
            break;
        }
    }
    res.net = std::move(best);
    res.best_epoch = best_epoch;
    return res;
}

// Thresholds every output at the cutoff and scores a sample as correct when all
// thresholded outputs match the thresholded targets.
inline EvalReport evaluate(const MlpNetwork& net, const std::vector<Sample>& samples, double cutoff,
                           std::string set_name = {}) {
    if (samples.empty())
        throw EmptySet("evaluation set is empty");
    if (!(cutoff > 0.0 && cutoff < 1.0))
        throw InvalidArgument("cutoff must lie strictly inside (0, 1)");
    std::size_t correct = 0;
    double mse = 0.0;
    for (const Sample& s : samples) {
        ForwardResult fr = forward(net, s.features);
        bool ok = true;
        double loss = 0.0;
        for (std::size_t j = 0; j < fr.output.size(); ++j) {
            double d = fr.output[j] - s.target[j];
            loss += 0.5 * d * d;
            if ((fr.output[j] > cutoff) != (s.target[j] > 0.5))
                ok = false;
        }
        mse += loss;
        correct += ok;
    }
    EvalReport r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    r.mse = mse / static_cast<double>(samples.size());
    r.error_rate = 1.0 - r.accuracy;
    r.set_name = std::move(set_name);
    return r;
}

inline std::string save_model(const MlpNetwork& net) {
    nlohmann::json j;
    j["layer_sizes"] = net.layer_sizes;
    j["weights"] = net.weights;
    j["biases"] = net.biases;
    j["activation"] = "sigmoid";
    j["seed"] = net.seed;
    return j.dump(2) + "\n";
}

inline MlpNetwork load_model(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw FormatError("model file is not valid JSON");
    MlpNetwork net;
    try {
        net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        net.seed = j.value("seed", std::uint64_t{0});
        if (j.value("activation", "sigmoid") != std::string("sigmoid"))
            throw FormatError("unsupported activation in model file");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file is missing fields: ") + e.what());
    }
    if (net.layer_sizes.size() < 2 || net.weights.size() != net.layer_sizes.size() - 1 ||
        net.biases.size() != net.weights.size())
        throw ModelShapeMismatch("layer/weight/bias counts are inconsistent");
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const auto fan_in = static_cast<std::size_t>(net.layer_sizes[l]);
        const auto fan_out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
        if (net.weights[l].size() != fan_in * fan_out || net.biases[l].size() != fan_out)
            throw ModelShapeMismatch("weight matrix shapes do not chain with layer_sizes");
    }
    return net;
}

inline std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_mse,val_mse\n";
    char buf[96];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", e.epoch, e.train_mse, e.val_mse);
        out += buf;
    }
    return out;
}

} // namespace astroseg
