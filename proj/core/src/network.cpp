#include "dm/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "dm/core_math.hpp"

namespace dm {

namespace {

double activate(Activation a, double x) {
    return a == Activation::ReLU ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activate_deriv(Activation a, double pre) {
    if (a == Activation::ReLU) return pre > 0.0 ? 1.0 : 0.0;
    double t = std::tanh(pre);
    return 1.0 - t * t;
}

}  // namespace

std::size_t Mlp::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
        off += layer_dims[l + 1] * layer_dims[l] + layer_dims[l + 1];
    return off;
}

std::span<double> Mlp::weights(std::size_t layer) {
    return {theta.data() + weight_offset(layer), layer_dims[layer + 1] * layer_dims[layer]};
}

std::span<const double> Mlp::weights(std::size_t layer) const {
    return {theta.data() + weight_offset(layer), layer_dims[layer + 1] * layer_dims[layer]};
}

std::span<double> Mlp::bias(std::size_t layer) {
    return {theta.data() + weight_offset(layer) + layer_dims[layer + 1] * layer_dims[layer],
            layer_dims[layer + 1]};
}

std::span<const double> Mlp::bias(std::size_t layer) const {
    return {theta.data() + weight_offset(layer) + layer_dims[layer + 1] * layer_dims[layer],
            layer_dims[layer + 1]};
}

Mlp init_mlp(const std::vector<std::size_t>& layer_dims, Activation activation,
             double dropout_rate, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw std::invalid_argument("init_mlp: need at least two dims");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("init_mlp: zero layer dimension");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("init_mlp: dropout_rate must be in [0,1)");

    Mlp net;
    net.layer_dims = layer_dims;
    net.activation = activation;
    net.dropout_rate = dropout_rate;

    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
        total += layer_dims[l + 1] * layer_dims[l] + layer_dims[l + 1];
    net.theta.assign(total, 0.0);

    Rng rng = Rng(seed).stream("init");
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        double fan_in = static_cast<double>(layer_dims[l]);
        double fan_out = static_cast<double>(layer_dims[l + 1]);
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : net.weights(l)) w = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return net;
}

ForwardCache forward(const Mlp& net, std::span<const double> features, std::size_t batch,
                     bool train_mode, Rng dropout_rng) {
    std::size_t d = net.input_dim();
    if (features.size() != batch * d)
        throw std::invalid_argument("forward: feature width does not match input dim");

    std::size_t layers = net.layer_count();
    ForwardCache cache;
    cache.batch = batch;
    cache.train_mode = train_mode;
    cache.inputs.resize(layers);
    cache.pre.resize(layers);
    cache.masks.resize(layers > 1 ? layers - 1 : 0);

    std::vector<double> a(features.begin(), features.end());
    bool use_dropout = train_mode && net.dropout_rate > 0.0;
    double keep = 1.0 - net.dropout_rate;

    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t in = net.layer_dims[l];
        std::size_t out = net.layer_dims[l + 1];
        cache.inputs[l] = a;

        auto w = net.weights(l);
        auto b = net.bias(l);
        std::vector<double> s(batch * out);
        for (std::size_t n = 0; n < batch; ++n) {
            const double* x = a.data() + n * in;
            double* sn = s.data() + n * out;
            for (std::size_t o = 0; o < out; ++o) {
                double acc = b[o];
                const double* wrow = w.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
                sn[o] = acc;
            }
        }
        cache.pre[l] = s;

        if (l + 1 == layers) {
            a = std::move(s);
            break;  // linear output layer
        }

        std::vector<double> h(batch * out);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = activate(net.activation, s[i]);
        if (use_dropout) {
            std::vector<double> mask(batch * out);
            for (std::size_t i = 0; i < mask.size(); ++i)
                mask[i] = dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
            for (std::size_t i = 0; i < h.size(); ++i) h[i] *= mask[i];
            cache.masks[l] = std::move(mask);
        }
        a = std::move(h);
    }

    cache.logits = a;
    std::size_t c = net.class_count();
    cache.probs.resize(batch);
    for (std::size_t n = 0; n < batch; ++n)
        cache.probs[n] = softmax({cache.logits.begin() + n * c, cache.logits.begin() + (n + 1) * c});
    return cache;
}

std::vector<double> backward(const Mlp& net, const ForwardCache& cache,
                             std::span<const double> logit_grads) {
    std::size_t batch = cache.batch;
    std::size_t c = net.class_count();
    if (logit_grads.size() != batch * c)
        throw std::invalid_argument("backward: logit_grads shape mismatch");

    std::size_t layers = net.layer_count();
    std::vector<double> grads(net.theta.size(), 0.0);
    std::vector<double> delta(logit_grads.begin(), logit_grads.end());
    double inv_batch = 1.0 / static_cast<double>(batch);

    for (std::size_t li = layers; li-- > 0;) {
        std::size_t in = net.layer_dims[li];
        std::size_t out = net.layer_dims[li + 1];
        const auto& a = cache.inputs[li];

        std::size_t woff = net.weight_offset(li);
        double* gw = grads.data() + woff;
        double* gb = grads.data() + woff + out * in;
        for (std::size_t n = 0; n < batch; ++n) {
            const double* dn = delta.data() + n * out;
            const double* an = a.data() + n * in;
            for (std::size_t o = 0; o < out; ++o) {
                double d = dn[o] * inv_batch;
                gb[o] += d;
                double* gwrow = gw + o * in;
                for (std::size_t i = 0; i < in; ++i) gwrow[i] += d * an[i];
            }
        }

        if (li == 0) break;

        auto w = net.weights(li);
        std::vector<double> dprev(batch * in, 0.0);
        for (std::size_t n = 0; n < batch; ++n) {
            const double* dn = delta.data() + n * out;
            double* dp = dprev.data() + n * in;
            for (std::size_t o = 0; o < out; ++o) {
                const double* wrow = w.data() + o * in;
                double d = dn[o];
                for (std::size_t i = 0; i < in; ++i) dp[i] += d * wrow[i];
            }
        }
        // back through dropout, then the activation of layer li-1
        if (!cache.masks[li - 1].empty())
            for (std::size_t i = 0; i < dprev.size(); ++i) dprev[i] *= cache.masks[li - 1][i];
        const auto& pre = cache.pre[li - 1];
        for (std::size_t i = 0; i < dprev.size(); ++i)
            dprev[i] *= activate_deriv(net.activation, pre[i]);
        delta = std::move(dprev);
    }
    return grads;
}

Prediction predict(const Mlp& net, std::span<const double> features, std::size_t batch) {
    ForwardCache cache = forward(net, features, batch, /*train_mode=*/false, Rng(0));
    Prediction pred;
    pred.labels.resize(batch);
    pred.probs = std::move(cache.probs);
    for (std::size_t n = 0; n < batch; ++n) {
        const auto& p = pred.probs[n];
        std::size_t best = 0;
        for (std::size_t j = 1; j < p.size(); ++j)
            if (p[j] > p[best]) best = j;
        pred.labels[n] = best;
    }
    return pred;
}

void save_checkpoint(const Mlp& net, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    std::fwrite("DMF1", 1, 4, f);
    std::uint32_t n = static_cast<std::uint32_t>(net.layer_dims.size());
    std::fwrite(&n, sizeof n, 1, f);
    for (std::size_t d : net.layer_dims) {
        std::uint32_t v = static_cast<std::uint32_t>(d);
        std::fwrite(&v, sizeof v, 1, f);
    }
    std::fwrite(net.theta.data(), sizeof(double), net.theta.size(), f);
    std::fclose(f);
}

Mlp load_checkpoint(const std::string& path, Activation activation, double dropout_rate) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "DMF1", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    std::uint32_t n = 0;
    if (std::fread(&n, sizeof n, 1, f) != 1 || n < 2) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: bad header in " + path);
    }
    std::vector<std::size_t> dims(n);
    for (auto& d : dims) {
        std::uint32_t v = 0;
        if (std::fread(&v, sizeof v, 1, f) != 1) {
            std::fclose(f);
            throw std::runtime_error("load_checkpoint: truncated dims in " + path);
        }
        d = v;
    }
    Mlp net = init_mlp(dims, activation, dropout_rate, 0);
    if (std::fread(net.theta.data(), sizeof(double), net.theta.size(), f) != net.theta.size()) {
        std::fclose(f);
        throw std::runtime_error("load_checkpoint: truncated parameters in " + path);
    }
    std::fclose(f);
    return net;
}

}  // namespace dm
