#include "blefp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "blefp/rng.hpp"
#include "json.hpp"

namespace blefp {

void NetworkConfig::validate() const {
    if (conv_blocks.empty()) {
        throw std::invalid_argument("NetworkConfig: need at least one conv block");
    }
    if (n_classes < 2) {
        throw std::invalid_argument("NetworkConfig: n_classes must be >= 2");
    }
    for (const auto& cb : conv_blocks) {
        if (cb.filters < 1 || cb.kernel < 1) {
            throw std::invalid_argument("NetworkConfig: bad conv block");
        }
    }
    for (const auto& fb : fc_blocks) {
        if (fb.neurons < 1 || fb.dropout < 0.0 || fb.dropout >= 1.0) {
            throw std::invalid_argument("NetworkConfig: bad fc block");
        }
    }
    if (batch_size < 1 || epochs < 1 || decay_steps < 1) {
        throw std::invalid_argument("NetworkConfig: bad schedule");
    }
}

NetworkConfig table1_config(int n_classes) {
    NetworkConfig cfg;
    cfg.conv_blocks = {{64, 48}, {64, 8}, {96, 6}, {128, 5}, {96, 6}};
    cfg.fc_blocks = {{1024, 0.5}, {512, 0.6}};
    cfg.n_classes = n_classes;
    cfg.lr0 = 0.05;
    cfg.decay_steps = 600;
    cfg.decay_rate = 0.75;
    cfg.epochs = 25;
    cfg.batch_size = 64;
    return cfg;
}

NetworkConfig desk_config(int n_classes) {
    NetworkConfig cfg;
    cfg.conv_blocks = {{16, 9}, {32, 5}};
    cfg.fc_blocks = {{64, 0.3}};
    cfg.n_classes = n_classes;
    cfg.lr0 = 0.05;
    cfg.decay_steps = 600;
    cfg.decay_rate = 0.75;
    cfg.epochs = 15;
    cfg.batch_size = 32;
    return cfg;
}

std::vector<int> trace_lengths(const NetworkConfig& cfg, int input_length) {
    std::vector<int> trace;
    trace.push_back(input_length);
    int len = input_length;
    for (const auto& cb : cfg.conv_blocks) {
        if (!cfg.same_padding) {
            len = len - cb.kernel + 1;
        }
        if (len < 2) {
            throw InsufficientLength("trace_lengths: conv output shorter than pool width");
        }
        trace.push_back(len);
        len /= 2;
        trace.push_back(len);
    }
    return trace;
}

namespace {

std::vector<double> uniform_init(Rng& rng, std::size_t count, int fan_in) {
    const double limit = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<double> v(count);
    for (auto& x : v) {
        x = rng.uniform(-limit, limit);
    }
    return v;
}

}  // namespace

Model init_model(const NetworkConfig& cfg, int input_channels, int input_length) {
    cfg.validate();
    trace_lengths(cfg, input_length);  // throws on underflow
    Rng rng(derive_seed(cfg.seed, 0x1A17));
    Model m;
    m.config = cfg;
    m.input_channels = input_channels;
    m.input_length = input_length;

    int in_ch = input_channels;
    int len = input_length;
    for (const auto& cb : cfg.conv_blocks) {
        ConvBlockParams p;
        p.in_channels = in_ch;
        p.filters = cb.filters;
        p.kernel = cb.kernel;
        if (cfg.same_padding) {
            p.pad_left = (cb.kernel - 1) / 2;
            p.pad_right = cb.kernel - 1 - p.pad_left;
        }
        const int fan_in = in_ch * cb.kernel;
        p.w = uniform_init(rng, static_cast<std::size_t>(cb.filters) * in_ch * cb.kernel, fan_in);
        p.b.assign(cb.filters, 0.0);
        p.gamma.assign(cb.filters, 1.0);
        p.beta.assign(cb.filters, 0.0);
        p.run_mean.assign(cb.filters, 0.0);
        p.run_var.assign(cb.filters, 1.0);
        m.conv.push_back(std::move(p));
        in_ch = cb.filters;
        len = (cfg.same_padding ? len : len - cb.kernel + 1) / 2;
    }
    int features = in_ch * len;
    for (const auto& fb : cfg.fc_blocks) {
        DenseParams d;
        d.in = features;
        d.out = fb.neurons;
        d.w = uniform_init(rng, static_cast<std::size_t>(d.out) * d.in, d.in);
        d.b.assign(d.out, 0.0);
        m.fc.push_back(std::move(d));
        features = fb.neurons;
    }
    m.head.in = features;
    m.head.out = cfg.n_classes;
    m.head.w = uniform_init(rng, static_cast<std::size_t>(cfg.n_classes) * features, features);
    m.head.b.assign(cfg.n_classes, 0.0);
    return m;
}

namespace {

Tensor conv1d_forward_padded(const Tensor& x, const std::vector<double>& w,
                             const std::vector<double>& b, int filters, int in_channels,
                             int kernel, int pad_left, int pad_right) {
    if (x.channels != static_cast<std::size_t>(in_channels)) {
        throw ShapeMismatch("conv1d_forward: channel count mismatch");
    }
    const long padded = static_cast<long>(x.length) + pad_left + pad_right;
    if (padded < kernel) {
        throw InsufficientLength("conv1d_forward: input shorter than kernel");
    }
    const std::size_t out_len = static_cast<std::size_t>(padded - kernel + 1);
    const long L = static_cast<long>(x.length);
    Tensor y(x.batch, static_cast<std::size_t>(filters), out_len);
    for (std::size_t bi = 0; bi < x.batch; ++bi) {
        for (int f = 0; f < filters; ++f) {
            const double* wf = &w[static_cast<std::size_t>(f) * in_channels * kernel];
            for (std::size_t l = 0; l < out_len; ++l) {
                double acc = b[static_cast<std::size_t>(f)];
                for (int c = 0; c < in_channels; ++c) {
                    const double* xr = &x.data[(bi * x.channels + c) * x.length];
                    const double* wr = &wf[static_cast<std::size_t>(c) * kernel];
                    for (int k = 0; k < kernel; ++k) {
                        const long xi = static_cast<long>(l) + k - pad_left;
                        if (xi >= 0 && xi < L) {
                            acc += wr[k] * xr[xi];
                        }
                    }
                }
                y.at(bi, static_cast<std::size_t>(f), l) = acc;
            }
        }
    }
    return y;
}

}  // namespace

Tensor conv1d_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>& b,
                      int filters, int in_channels, int kernel) {
    return conv1d_forward_padded(x, w, b, filters, in_channels, kernel, 0, 0);
}

namespace {

struct BnCache {
    std::vector<double> mean, inv_std;  // per channel
    Tensor xhat;
};

Tensor batchnorm_forward(const Tensor& x, ConvBlockParams& p, Mode mode, double momentum,
                         double eps, BnCache* cache, bool update_running) {
    const std::size_t C = x.channels;
    const std::size_t m = x.batch * x.length;
    Tensor y(x.batch, C, x.length);
    std::vector<double> mean(C, 0.0), var(C, 0.0), inv_std(C, 0.0);
    if (mode == Mode::Train) {
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t b = 0; b < x.batch; ++b) {
                for (std::size_t l = 0; l < x.length; ++l) {
                    s += x.at(b, c, l);
                }
            }
            mean[c] = s / static_cast<double>(m);
            double v = 0.0;
            for (std::size_t b = 0; b < x.batch; ++b) {
                for (std::size_t l = 0; l < x.length; ++l) {
                    const double d = x.at(b, c, l) - mean[c];
                    v += d * d;
                }
            }
            var[c] = v / static_cast<double>(m);
        }
        if (update_running) {
            for (std::size_t c = 0; c < C; ++c) {
                p.run_mean[c] = momentum * p.run_mean[c] + (1.0 - momentum) * mean[c];
                p.run_var[c] = momentum * p.run_var[c] + (1.0 - momentum) * var[c];
            }
        }
    } else {
        mean = p.run_mean;
        var = p.run_var;
    }
    for (std::size_t c = 0; c < C; ++c) {
        inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    }
    if (cache) {
        cache->mean = mean;
        cache->inv_std = inv_std;
        cache->xhat = Tensor(x.batch, C, x.length);
    }
    for (std::size_t b = 0; b < x.batch; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t l = 0; l < x.length; ++l) {
                const double xhat = (x.at(b, c, l) - mean[c]) * inv_std[c];
                if (cache) {
                    cache->xhat.at(b, c, l) = xhat;
                }
                y.at(b, c, l) = p.gamma[c] * xhat + p.beta[c];
            }
        }
    }
    return y;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor y = x;
    for (auto& v : y.data) {
        if (v < 0.0) {
            v *= slope;
        }
    }
    return y;
}

Tensor maxpool2(const Tensor& x, std::vector<std::size_t>* argmax) {
    const std::size_t out_len = x.length / 2;
    if (out_len == 0) {
        throw InsufficientLength("maxpool2: length < 2");
    }
    Tensor y(x.batch, x.channels, out_len);
    if (argmax) {
        argmax->assign(x.batch * x.channels * out_len, 0);
    }
    std::size_t oi = 0;
    for (std::size_t b = 0; b < x.batch; ++b) {
        for (std::size_t c = 0; c < x.channels; ++c) {
            for (std::size_t l = 0; l < out_len; ++l, ++oi) {
                const double a = x.at(b, c, 2 * l);
                const double bb = x.at(b, c, 2 * l + 1);
                if (a >= bb) {
                    y.at(b, c, l) = a;
                    if (argmax) (*argmax)[oi] = 2 * l;
                } else {
                    y.at(b, c, l) = bb;
                    if (argmax) (*argmax)[oi] = 2 * l + 1;
                }
            }
        }
    }
    return y;
}

struct BlockCache {
    Tensor input;
    Tensor conv_out;
    BnCache bn;
    Tensor bn_out;  // pre-activation
    std::vector<std::size_t> pool_argmax;
    Tensor act_out;
};

Tensor conv_block_apply(const Tensor& x, ConvBlockParams& p, Mode mode, double slope,
                        double momentum, double eps, BlockCache* cache, bool update_running) {
    Tensor conv_out = conv1d_forward_padded(x, p.w, p.b, p.filters, p.in_channels, p.kernel,
                                            p.pad_left, p.pad_right);
    Tensor bn_out = batchnorm_forward(conv_out, p, mode, momentum, eps,
                                      cache ? &cache->bn : nullptr, update_running);
    Tensor act = leaky_relu(bn_out, slope);
    Tensor pooled = maxpool2(act, cache ? &cache->pool_argmax : nullptr);
    if (cache) {
        cache->input = x;
        cache->conv_out = std::move(conv_out);
        cache->bn_out = std::move(bn_out);
        cache->act_out = std::move(act);
    }
    return pooled;
}

// Dense over flattened (batch, features) tensors carried as (batch, features, 1).
Tensor dense_forward(const Tensor& x, const DenseParams& p) {
    if (x.channels * x.length != static_cast<std::size_t>(p.in)) {
        throw ShapeMismatch("dense_forward: feature count mismatch");
    }
    Tensor y(x.batch, static_cast<std::size_t>(p.out), 1);
    for (std::size_t b = 0; b < x.batch; ++b) {
        const double* xr = &x.data[b * x.channels * x.length];
        for (int o = 0; o < p.out; ++o) {
            const double* wr = &p.w[static_cast<std::size_t>(o) * p.in];
            double acc = p.b[static_cast<std::size_t>(o)];
            for (int i = 0; i < p.in; ++i) {
                acc += wr[i] * xr[i];
            }
            y.at(b, static_cast<std::size_t>(o), 0) = acc;
        }
    }
    return y;
}

Tensor flatten(const Tensor& x) {
    Tensor y = x;
    y.channels = x.channels * x.length;
    y.length = 1;
    return y;
}

struct FcCache {
    Tensor input;
    Tensor pre_act;
    Tensor act;
    std::vector<double> drop_mask;  // empty when dropout inactive
};

struct ForwardCache {
    std::vector<BlockCache> blocks;
    Tensor flat;
    std::vector<FcCache> fc;
    Tensor logits;
};

Tensor forward_impl(Model& m, const Tensor& batch, Mode mode, uint64_t dropout_seed,
                    ForwardCache* cache, bool update_running) {
    if (batch.channels != static_cast<std::size_t>(m.input_channels) ||
        batch.length != static_cast<std::size_t>(m.input_length)) {
        throw ShapeMismatch("forward: batch shape does not match model input");
    }
    Tensor x = batch;
    if (cache) {
        cache->blocks.resize(m.conv.size());
    }
    for (std::size_t i = 0; i < m.conv.size(); ++i) {
        x = conv_block_apply(x, m.conv[i], mode, m.config.leaky_slope, m.config.bn_momentum,
                             m.config.bn_eps, cache ? &cache->blocks[i] : nullptr, update_running);
    }
    x = flatten(x);
    if (cache) {
        cache->flat = x;
        cache->fc.resize(m.fc.size());
    }
    Rng drop_rng(derive_seed(dropout_seed, 0xD30));
    for (std::size_t i = 0; i < m.fc.size(); ++i) {
        Tensor pre = dense_forward(x, m.fc[i]);
        Tensor act = leaky_relu(pre, m.config.leaky_slope);
        std::vector<double> mask;
        const double p = m.config.fc_blocks[i].dropout;
        if (mode == Mode::Train && p > 0.0) {
            mask.resize(act.data.size());
            const double scale = 1.0 / (1.0 - p);
            for (std::size_t k = 0; k < mask.size(); ++k) {
                mask[k] = drop_rng.uniform() < p ? 0.0 : scale;
                act.data[k] *= mask[k];
            }
        }
        if (cache) {
            cache->fc[i].input = x;
            cache->fc[i].pre_act = pre;
            cache->fc[i].act = act;
            cache->fc[i].drop_mask = mask;
        }
        x = std::move(act);
    }
    Tensor logits = dense_forward(x, m.head);
    if (cache) {
        cache->logits = logits;
    }
    return logits;
}

void dense_backward(const Tensor& dy, const Tensor& x, const DenseParams& p, DenseGrads& g,
                    Tensor& dx) {
    g.w.assign(p.w.size(), 0.0);
    g.b.assign(p.b.size(), 0.0);
    dx = Tensor(x.batch, x.channels, x.length);
    for (std::size_t b = 0; b < x.batch; ++b) {
        const double* xr = &x.data[b * x.channels * x.length];
        double* dxr = &dx.data[b * x.channels * x.length];
        for (int o = 0; o < p.out; ++o) {
            const double d = dy.at(b, static_cast<std::size_t>(o), 0);
            g.b[static_cast<std::size_t>(o)] += d;
            double* gw = &g.w[static_cast<std::size_t>(o) * p.in];
            const double* wr = &p.w[static_cast<std::size_t>(o) * p.in];
            for (int i = 0; i < p.in; ++i) {
                gw[i] += d * xr[i];
                dxr[i] += d * wr[i];
            }
        }
    }
}

void leaky_relu_backward(Tensor& d, const Tensor& pre, double slope) {
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        if (pre.data[i] < 0.0) {
            d.data[i] *= slope;
        }
    }
}

Tensor conv_block_backward(const Tensor& dpool, ConvBlockParams& p, const BlockCache& cache,
                           ConvBlockGrads& g, double slope, double eps) {
    // Unpool.
    Tensor dact(cache.act_out.batch, cache.act_out.channels, cache.act_out.length);
    std::size_t oi = 0;
    for (std::size_t b = 0; b < dpool.batch; ++b) {
        for (std::size_t c = 0; c < dpool.channels; ++c) {
            for (std::size_t l = 0; l < dpool.length; ++l, ++oi) {
                dact.at(b, c, cache.pool_argmax[oi]) += dpool.at(b, c, l);
            }
        }
    }
    // Leaky ReLU.
    leaky_relu_backward(dact, cache.bn_out, slope);
    // Batchnorm (train-mode statistics).
    const std::size_t C = dact.channels;
    const double m = static_cast<double>(dact.batch * dact.length);
    g.gamma.assign(C, 0.0);
    g.beta.assign(C, 0.0);
    Tensor dconv(dact.batch, C, dact.length);
    for (std::size_t c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < dact.batch; ++b) {
            for (std::size_t l = 0; l < dact.length; ++l) {
                const double dy = dact.at(b, c, l);
                sum_dy += dy;
                sum_dy_xhat += dy * cache.bn.xhat.at(b, c, l);
            }
        }
        g.beta[c] = sum_dy;
        g.gamma[c] = sum_dy_xhat;
        const double k = p.gamma[c] * cache.bn.inv_std[c];
        for (std::size_t b = 0; b < dact.batch; ++b) {
            for (std::size_t l = 0; l < dact.length; ++l) {
                const double dy = dact.at(b, c, l);
                dconv.at(b, c, l) =
                    k * (dy - sum_dy / m - cache.bn.xhat.at(b, c, l) * sum_dy_xhat / m);
            }
        }
    }
    (void)eps;
    // Convolution.
    const Tensor& x = cache.input;
    g.w.assign(p.w.size(), 0.0);
    g.b.assign(p.b.size(), 0.0);
    Tensor dx(x.batch, x.channels, x.length);
    const std::size_t out_len = dconv.length;
    const long L = static_cast<long>(x.length);
    for (std::size_t b = 0; b < x.batch; ++b) {
        for (int f = 0; f < p.filters; ++f) {
            const double* wf = &p.w[static_cast<std::size_t>(f) * p.in_channels * p.kernel];
            double* gwf = &g.w[static_cast<std::size_t>(f) * p.in_channels * p.kernel];
            for (std::size_t l = 0; l < out_len; ++l) {
                const double d = dconv.at(b, static_cast<std::size_t>(f), l);
                g.b[static_cast<std::size_t>(f)] += d;
                for (int c = 0; c < p.in_channels; ++c) {
                    const double* xr = &x.data[(b * x.channels + c) * x.length];
                    double* dxr = &dx.data[(b * x.channels + c) * x.length];
                    double* gwr = &gwf[static_cast<std::size_t>(c) * p.kernel];
                    const double* wr = &wf[static_cast<std::size_t>(c) * p.kernel];
                    for (int k = 0; k < p.kernel; ++k) {
                        const long xi = static_cast<long>(l) + k - p.pad_left;
                        if (xi >= 0 && xi < L) {
                            gwr[k] += d * xr[xi];
                            dxr[xi] += d * wr[k];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

}  // namespace

Tensor block_forward(const Tensor& x, ConvBlockParams& block, Mode mode, double leaky_slope,
                     double bn_momentum, double bn_eps) {
    return conv_block_apply(x, block, mode, leaky_slope, bn_momentum, bn_eps, nullptr,
                            mode == Mode::Train);
}

Tensor forward(Model& model, const Tensor& batch, Mode mode, uint64_t dropout_seed) {
    return forward_impl(model, batch, mode, dropout_seed, nullptr, mode == Mode::Train);
}

Grads zero_grads_like(const Model& m) {
    Grads g;
    g.conv.resize(m.conv.size());
    for (std::size_t i = 0; i < m.conv.size(); ++i) {
        g.conv[i].w.assign(m.conv[i].w.size(), 0.0);
        g.conv[i].b.assign(m.conv[i].b.size(), 0.0);
        g.conv[i].gamma.assign(m.conv[i].gamma.size(), 0.0);
        g.conv[i].beta.assign(m.conv[i].beta.size(), 0.0);
    }
    g.fc.resize(m.fc.size());
    for (std::size_t i = 0; i < m.fc.size(); ++i) {
        g.fc[i].w.assign(m.fc[i].w.size(), 0.0);
        g.fc[i].b.assign(m.fc[i].b.size(), 0.0);
    }
    g.head.w.assign(m.head.w.size(), 0.0);
    g.head.b.assign(m.head.b.size(), 0.0);
    return g;
}

std::pair<double, Grads> loss_and_grad(Model& model, const Tensor& batch,
                                       const std::vector<int>& labels, uint64_t dropout_seed,
                                       bool update_running_stats) {
    if (labels.size() != batch.batch) {
        throw ShapeMismatch("loss_and_grad: label count != batch size");
    }
    for (int y : labels) {
        if (y < 0 || y >= model.config.n_classes) {
            throw LabelOutOfRange("loss_and_grad: label out of range");
        }
    }
    ForwardCache cache;
    Tensor logits =
        forward_impl(model, batch, Mode::Train, dropout_seed, &cache, update_running_stats);

    const std::size_t B = batch.batch;
    const int K = model.config.n_classes;
    double loss = 0.0;
    Tensor dlogits(B, static_cast<std::size_t>(K), 1);
    for (std::size_t b = 0; b < B; ++b) {
        double mx = logits.at(b, 0, 0);
        for (int k = 1; k < K; ++k) {
            mx = std::max(mx, logits.at(b, static_cast<std::size_t>(k), 0));
        }
        double denom = 0.0;
        for (int k = 0; k < K; ++k) {
            denom += std::exp(logits.at(b, static_cast<std::size_t>(k), 0) - mx);
        }
        const double log_denom = std::log(denom) + mx;
        loss += log_denom - logits.at(b, static_cast<std::size_t>(labels[b]), 0);
        for (int k = 0; k < K; ++k) {
            const double pk = std::exp(logits.at(b, static_cast<std::size_t>(k), 0) - log_denom);
            dlogits.at(b, static_cast<std::size_t>(k), 0) =
                (pk - (k == labels[b] ? 1.0 : 0.0)) / static_cast<double>(B);
        }
    }
    loss /= static_cast<double>(B);

    Grads grads = zero_grads_like(model);
    const Tensor& head_in = model.fc.empty() ? cache.flat : cache.fc.back().act;
    Tensor dx;
    dense_backward(dlogits, head_in, model.head, grads.head, dx);
    for (std::size_t i = model.fc.size(); i-- > 0;) {
        FcCache& fcc = cache.fc[i];
        if (!fcc.drop_mask.empty()) {
            for (std::size_t k = 0; k < dx.data.size(); ++k) {
                dx.data[k] *= fcc.drop_mask[k];
            }
        }
        leaky_relu_backward(dx, fcc.pre_act, model.config.leaky_slope);
        Tensor dprev;
        dense_backward(dx, fcc.input, model.fc[i], grads.fc[i], dprev);
        dx = std::move(dprev);
    }
    // Un-flatten back to the last block's pooled shape.
    const BlockCache& last = cache.blocks.back();
    dx.channels = last.act_out.channels;
    dx.length = dx.data.size() / (dx.batch * dx.channels);
    for (std::size_t i = model.conv.size(); i-- > 0;) {
        dx = conv_block_backward(dx, model.conv[i], cache.blocks[i], grads.conv[i],
                                 model.config.leaky_slope, model.config.bn_eps);
    }
    return {loss, std::move(grads)};
}

double lr_schedule(int step, const NetworkConfig& cfg) {
    double exponent = static_cast<double>(step) / static_cast<double>(cfg.decay_steps);
    if (cfg.staircase_decay) {
        exponent = std::floor(exponent);
    }
    return cfg.lr0 * std::pow(cfg.decay_rate, exponent);
}

std::vector<std::pair<std::string, std::vector<double>*>> param_blobs(Model& m) {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (std::size_t i = 0; i < m.conv.size(); ++i) {
        const std::string tag = "conv" + std::to_string(i);
        out.emplace_back(tag + ".w", &m.conv[i].w);
        out.emplace_back(tag + ".b", &m.conv[i].b);
        out.emplace_back(tag + ".gamma", &m.conv[i].gamma);
        out.emplace_back(tag + ".beta", &m.conv[i].beta);
    }
    for (std::size_t i = 0; i < m.fc.size(); ++i) {
        const std::string tag = "fc" + std::to_string(i);
        out.emplace_back(tag + ".w", &m.fc[i].w);
        out.emplace_back(tag + ".b", &m.fc[i].b);
    }
    out.emplace_back("head.w", &m.head.w);
    out.emplace_back("head.b", &m.head.b);
    return out;
}

std::vector<std::vector<double>*> grad_blobs(Grads& g) {
    std::vector<std::vector<double>*> out;
    for (auto& c : g.conv) {
        out.push_back(&c.w);
        out.push_back(&c.b);
        out.push_back(&c.gamma);
        out.push_back(&c.beta);
    }
    for (auto& f : g.fc) {
        out.push_back(&f.w);
        out.push_back(&f.b);
    }
    out.push_back(&g.head.w);
    out.push_back(&g.head.b);
    return out;
}

Tensor batch_from_features(const std::vector<FeatureTensor>& tensors, std::size_t first,
                           std::size_t count) {
    if (tensors.empty() || first + count > tensors.size()) {
        throw ShapeMismatch("batch_from_features: bad slice");
    }
    const std::size_t C = tensors[first].channels();
    const std::size_t L = tensors[first].length();
    Tensor batch(count, C, L);
    for (std::size_t i = 0; i < count; ++i) {
        const FeatureTensor& t = tensors[first + i];
        if (t.channels() != C || t.length() != L) {
            throw ShapeMismatch("batch_from_features: tensors differ in shape");
        }
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t l = 0; l < L; ++l) {
                batch.at(i, c, l) = t.data[c][l];
            }
        }
    }
    return batch;
}

Model train(const FeatureDataset& dataset, const NetworkConfig& cfg) {
    cfg.validate();
    if (dataset.tensors.empty() || dataset.tensors.size() != dataset.labels.size()) {
        throw ShapeMismatch("train: empty dataset or label mismatch");
    }
    std::vector<int> class_count(static_cast<std::size_t>(cfg.n_classes), 0);
    for (int y : dataset.labels) {
        if (y < 0 || y >= cfg.n_classes) {
            throw LabelOutOfRange("train: label out of range");
        }
        ++class_count[static_cast<std::size_t>(y)];
    }
    for (int c : class_count) {
        if (c == 0) {
            throw EmptyClass("train: class with no examples");
        }
    }
    const std::size_t n = dataset.tensors.size();
    Model model = init_model(cfg, static_cast<int>(dataset.tensors[0].channels()),
                             static_cast<int>(dataset.tensors[0].length()));

    Grads velocity = zero_grads_like(model);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, static_cast<uint64_t>(epoch), 0x5F0FF));
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t bs = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
            std::vector<FeatureTensor> slice(bs);
            std::vector<int> labels(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                slice[i] = dataset.tensors[order[start + i]];
                labels[i] = dataset.labels[order[start + i]];
            }
            Tensor batch = batch_from_features(slice, 0, bs);
            auto [loss, grads] =
                loss_and_grad(model, batch, labels,
                              derive_seed(cfg.seed, static_cast<uint64_t>(step), 0xD0D0), true);
            (void)loss;
            const double lr = lr_schedule(step, cfg);
            auto params = param_blobs(model);
            auto gblobs = grad_blobs(grads);
            auto vblobs = grad_blobs(velocity);
            for (std::size_t p = 0; p < params.size(); ++p) {
                std::vector<double>& w = *params[p].second;
                std::vector<double>& gv = *gblobs[p];
                std::vector<double>& vel = *vblobs[p];
                for (std::size_t k = 0; k < w.size(); ++k) {
                    if (cfg.sgd_momentum != 0.0) {
                        vel[k] = cfg.sgd_momentum * vel[k] - lr * gv[k];
                        w[k] += vel[k];
                    } else {
                        w[k] -= lr * gv[k];
                    }
                }
            }
            ++step;
        }
    }
    return model;
}

std::vector<int> predict(Model& model, const Tensor& batch) {
    Tensor logits = forward(model, batch, Mode::Eval);
    std::vector<int> out(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        int best = 0;
        double best_v = logits.at(b, 0, 0);
        for (int k = 1; k < model.config.n_classes; ++k) {
            const double v = logits.at(b, static_cast<std::size_t>(k), 0);
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
        out[b] = best;
    }
    return out;
}

// ---- checkpoint I/O ----

namespace {
constexpr char kMagic[8] = {'B', 'L', 'E', 'F', 'P', 'M', '1', '\0'};

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    }
    os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    }
    return v;
}

void write_vec(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    for (double d : v) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(os, bits);
    }
}

std::vector<double> read_vec(std::istream& is) {
    const uint64_t n = read_u64(is);
    std::vector<double> v(n);
    for (auto& d : v) {
        const uint64_t bits = read_u64(is);
        std::memcpy(&d, &bits, 8);
    }
    return v;
}

nlohmann::json config_to_json(const NetworkConfig& cfg) {
    nlohmann::json j;
    for (const auto& cb : cfg.conv_blocks) {
        j["conv_blocks"].push_back({{"filters", cb.filters}, {"kernel", cb.kernel}});
    }
    j["fc_blocks"] = nlohmann::json::array();
    for (const auto& fb : cfg.fc_blocks) {
        j["fc_blocks"].push_back({{"neurons", fb.neurons}, {"dropout", fb.dropout}});
    }
    j["n_classes"] = cfg.n_classes;
    j["same_padding"] = cfg.same_padding;
    j["leaky_slope"] = cfg.leaky_slope;
    j["lr0"] = cfg.lr0;
    j["decay_steps"] = cfg.decay_steps;
    j["decay_rate"] = cfg.decay_rate;
    j["staircase_decay"] = cfg.staircase_decay;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["bn_momentum"] = cfg.bn_momentum;
    j["bn_eps"] = cfg.bn_eps;
    j["sgd_momentum"] = cfg.sgd_momentum;
    return j;
}

NetworkConfig config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.conv_blocks.clear();
    for (const auto& cb : j.at("conv_blocks")) {
        cfg.conv_blocks.push_back({cb.at("filters").get<int>(), cb.at("kernel").get<int>()});
    }
    for (const auto& fb : j.at("fc_blocks")) {
        cfg.fc_blocks.push_back({fb.at("neurons").get<int>(), fb.at("dropout").get<double>()});
    }
    cfg.n_classes = j.at("n_classes").get<int>();
    cfg.same_padding = j.at("same_padding").get<bool>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.lr0 = j.at("lr0").get<double>();
    cfg.decay_steps = j.at("decay_steps").get<int>();
    cfg.decay_rate = j.at("decay_rate").get<double>();
    cfg.staircase_decay = j.at("staircase_decay").get<bool>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.bn_momentum = j.at("bn_momentum").get<double>();
    cfg.bn_eps = j.at("bn_eps").get<double>();
    cfg.sgd_momentum = j.at("sgd_momentum").get<double>();
    return cfg;
}
}  // namespace

void save_model(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("save_model: cannot open " + path);
    }
    os.write(kMagic, 8);
    write_u64(os, static_cast<uint64_t>(model.input_channels));
    write_u64(os, static_cast<uint64_t>(model.input_length));
    write_u64(os, model.conv.size());
    for (const auto& c : model.conv) {
        write_u64(os, static_cast<uint64_t>(c.in_channels));
        write_u64(os, static_cast<uint64_t>(c.filters));
        write_u64(os, static_cast<uint64_t>(c.kernel));
        write_vec(os, c.w);
        write_vec(os, c.b);
        write_vec(os, c.gamma);
        write_vec(os, c.beta);
        write_vec(os, c.run_mean);
        write_vec(os, c.run_var);
    }
    write_u64(os, model.fc.size());
    for (const auto& d : model.fc) {
        write_u64(os, static_cast<uint64_t>(d.in));
        write_u64(os, static_cast<uint64_t>(d.out));
        write_vec(os, d.w);
        write_vec(os, d.b);
    }
    write_u64(os, static_cast<uint64_t>(model.head.in));
    write_u64(os, static_cast<uint64_t>(model.head.out));
    write_vec(os, model.head.w);
    write_vec(os, model.head.b);
    const std::string footer = config_to_json(model.config).dump();
    write_u64(os, footer.size());
    os.write(footer.data(), static_cast<std::streamsize>(footer.size()));
}

Model load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("load_model: cannot open " + path);
    }
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("load_model: bad magic");
    }
    Model m;
    m.input_channels = static_cast<int>(read_u64(is));
    m.input_length = static_cast<int>(read_u64(is));
    const uint64_t n_conv = read_u64(is);
    for (uint64_t i = 0; i < n_conv; ++i) {
        ConvBlockParams c;
        c.in_channels = static_cast<int>(read_u64(is));
        c.filters = static_cast<int>(read_u64(is));
        c.kernel = static_cast<int>(read_u64(is));
        c.w = read_vec(is);
        c.b = read_vec(is);
        c.gamma = read_vec(is);
        c.beta = read_vec(is);
        c.run_mean = read_vec(is);
        c.run_var = read_vec(is);
        m.conv.push_back(std::move(c));
    }
    const uint64_t n_fc = read_u64(is);
    for (uint64_t i = 0; i < n_fc; ++i) {
        DenseParams d;
        d.in = static_cast<int>(read_u64(is));
        d.out = static_cast<int>(read_u64(is));
        d.w = read_vec(is);
        d.b = read_vec(is);
        m.fc.push_back(std::move(d));
    }
    m.head.in = static_cast<int>(read_u64(is));
    m.head.out = static_cast<int>(read_u64(is));
    m.head.w = read_vec(is);
    m.head.b = read_vec(is);
    const uint64_t footer_len = read_u64(is);
    std::string footer(footer_len, '\0');
    is.read(footer.data(), static_cast<std::streamsize>(footer_len));
    if (!is) {
        throw std::runtime_error("load_model: truncated file");
    }
    m.config = config_from_json(nlohmann::json::parse(footer));
    if (m.config.same_padding) {
        for (auto& c : m.conv) {
            c.pad_left = (c.kernel - 1) / 2;
            c.pad_right = c.kernel - 1 - c.pad_left;
        }
    }
    return m;
}

}  // namespace blefp
