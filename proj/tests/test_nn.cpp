#include <cmath>
#include <cstdio>

#include "blefp/nn.hpp"
#include "blefp/rng.hpp"
#include "doctest.h"

using namespace blefp;

TEST_CASE("conv1d: identity, hand-computed difference kernel, naive oracle") {
    // kernel [1] passes the input through.
    Tensor x(1, 1, 4);
    x.data = {1, 2, 3, 4};
    auto y = conv1d_forward(x, {1.0}, {0.0}, 1, 1, 1);
    CHECK(y.data == std::vector<double>{1, 2, 3, 4});

    // [1,-1] as cross-correlation of [1,2,3,4] gives x[l]-x[l+1].
    y = conv1d_forward(x, {1.0, -1.0}, {0.0}, 1, 1, 2);
    CHECK(y.length == 3);
    CHECK(y.data == std::vector<double>{-1, -1, -1});

    // Random case against a naive triple loop.
    Rng rng(3);
    const int B = 2, C = 3, L = 11, F = 4, K = 5;
    Tensor rx(B, C, L);
    for (auto& v : rx.data) {
        v = rng.gaussian();
    }
    std::vector<double> w(static_cast<std::size_t>(F) * C * K), b(F);
    for (auto& v : w) {
        v = rng.gaussian();
    }
    for (auto& v : b) {
        v = rng.gaussian();
    }
    const auto fast = conv1d_forward(rx, w, b, F, C, K);
    for (int bi = 0; bi < B; ++bi) {
        for (int f = 0; f < F; ++f) {
            for (int l = 0; l <= L - K; ++l) {
                double acc = b[static_cast<std::size_t>(f)];
                for (int c = 0; c < C; ++c) {
                    for (int k = 0; k < K; ++k) {
                        acc += w[(static_cast<std::size_t>(f) * C + c) * K + k] *
                               rx.at(bi, static_cast<std::size_t>(c),
                                     static_cast<std::size_t>(l + k));
                    }
                }
                CHECK(fast.at(bi, static_cast<std::size_t>(f), static_cast<std::size_t>(l)) ==
                      doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }

    CHECK_THROWS_AS(conv1d_forward(x, {1.0, 0.0}, {0.0}, 1, 2, 1), ShapeMismatch);
}

TEST_CASE("block_forward building blocks") {
    // Zero input with zero beta stays zero through conv+bn+lrelu+pool.
    ConvBlockParams p;
    p.in_channels = 1;
    p.filters = 1;
    p.kernel = 1;
    p.w = {0.5};
    p.b = {0.0};
    p.gamma = {1.0};
    p.beta = {0.0};
    p.run_mean = {0.0};
    p.run_var = {1.0};
    Tensor x(1, 1, 6);
    auto y = block_forward(x, p, Mode::Eval, 0.3, 0.99, 1e-3);
    CHECK(y.length == 3);
    for (double v : y.data) {
        CHECK(v == doctest::Approx(0.0));
    }

    // Pooling picks pairwise maxima: [3,1,4,1,5,9] -> [3,4,9] (via identity bn).
    Tensor px(1, 1, 6);
    px.data = {3, 1, 4, 1, 5, 9};
    ConvBlockParams ident = p;
    ident.w = {1.0};
    ident.run_var = {1.0 - 1e-3};  // cancels bn epsilon so eval bn is exact identity
    y = block_forward(px, ident, Mode::Eval, 0.3, 0.99, 1e-3);
    REQUIRE(y.data.size() == 3);
    CHECK(y.data[0] == doctest::Approx(3.0));
    CHECK(y.data[1] == doctest::Approx(4.0));
    CHECK(y.data[2] == doctest::Approx(9.0));

    // Leaky ReLU slope on the negative side.
    Tensor nx(1, 1, 2);
    nx.data = {-1.0, -1.0};
    ConvBlockParams lp = ident;
    y = block_forward(nx, lp, Mode::Eval, 0.1, 0.99, 1e-3);
    CHECK(y.data[0] == doctest::Approx(-0.1));
}

TEST_CASE("trace_lengths matches runtime shapes, including table-1 on length 53") {
    // With valid convolution the kernel-48 stack underflows on a length-53
    // input (53 -> 6 -> 3, then kernel 8 cannot fit).
    NetworkConfig cfg = table1_config(4);
    CHECK_THROWS_AS(trace_lengths(cfg, 53), InsufficientLength);

    // Same-padding preserves length through each conv, so only pooling shrinks.
    cfg.same_padding = true;
    const auto trace = trace_lengths(cfg, 53);
    CHECK(trace == std::vector<int>{53, 53, 26, 26, 13, 13, 6, 6, 3, 3, 1});

    NetworkConfig desk = desk_config(4);
    const auto dtrace = trace_lengths(desk, 53);
    // 53 -> conv9 45 -> pool 22 -> conv5 18 -> pool 9
    CHECK(dtrace == std::vector<int>{53, 45, 22, 18, 9});

    Model m = init_model(desk, 1, 53);
    Tensor x(2, 1, 53);
    auto logits = forward(m, x, Mode::Eval);
    CHECK(logits.channels == 4);
    CHECK(logits.length == 1);
}

TEST_CASE("table-1 config carries the published hyperparameters") {
    NetworkConfig cfg = table1_config(31);
    REQUIRE(cfg.conv_blocks.size() == 5);
    CHECK(cfg.conv_blocks[0].filters == 64);
    CHECK(cfg.conv_blocks[0].kernel == 48);
    CHECK(cfg.conv_blocks[3].filters == 128);
    CHECK(cfg.fc_blocks[0].neurons == 1024);
    CHECK(cfg.fc_blocks[1].dropout == 0.6);
    CHECK(cfg.lr0 == 0.05);
    CHECK(cfg.decay_steps == 600);
    CHECK(cfg.decay_rate == 0.75);
    CHECK(cfg.epochs == 25);
    CHECK(cfg.batch_size == 64);
}

TEST_CASE("lr_schedule: anchors and monotonicity") {
    NetworkConfig cfg = table1_config(4);
    CHECK(lr_schedule(0, cfg) == doctest::Approx(0.05));
    CHECK(lr_schedule(600, cfg) == doctest::Approx(0.0375));
    CHECK(lr_schedule(1200, cfg) == doctest::Approx(0.028125));
    double prev = lr_schedule(0, cfg);
    for (int s = 1; s < 3000; s += 97) {
        const double lr = lr_schedule(s, cfg);
        CHECK(lr <= prev + 1e-15);
        prev = lr;
    }
}

TEST_CASE("softmax cross-entropy: uniform logits, shift invariance, label checks") {
    NetworkConfig cfg;
    cfg.conv_blocks = {{2, 3}};
    cfg.fc_blocks = {};
    cfg.n_classes = 4;
    Model m = init_model(cfg, 1, 8);
    // Zero head weights give uniform logits: loss = ln 4.
    std::fill(m.head.w.begin(), m.head.w.end(), 0.0);
    std::fill(m.head.b.begin(), m.head.b.end(), 0.0);
    Tensor x(3, 1, 8);
    Rng rng(9);
    for (auto& v : x.data) {
        v = rng.gaussian();
    }
    auto [loss, grads] = loss_and_grad(m, x, {0, 1, 2}, 0, false);
    CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // Shift invariance: adding a constant per-sample bias leaves loss alone.
    for (auto& b : m.head.b) {
        b += 3.25;
    }
    auto [loss2, grads2] = loss_and_grad(m, x, {0, 1, 2}, 0, false);
    CHECK(loss2 == doctest::Approx(loss).epsilon(1e-12));

    CHECK_THROWS_AS(loss_and_grad(m, x, {0, 1, 9}, 0, false), LabelOutOfRange);
    CHECK_THROWS_AS(loss_and_grad(m, x, {0, 1}, 0, false), ShapeMismatch);
}

TEST_CASE("gradient check: backprop vs central finite differences") {
    NetworkConfig cfg;
    cfg.conv_blocks = {{3, 3}, {4, 3}};
    cfg.fc_blocks = {{8, 0.0}};
    cfg.n_classes = 3;
    const auto report = gradient_check(cfg, 1, 16, 4, 1e-5, 1e-4, 7);
    for (const auto& e : report.entries) {
        INFO(e.name, " rel err ", e.max_rel_err);
        CHECK(e.max_rel_err <= 1e-4);
    }
    CHECK(report.pass);
    // Report covers every parameter group: 2 conv blocks x4 + fc x2 + head x2.
    CHECK(report.entries.size() == 12);

    // Negative control: a corrupted gradient must be caught.
    const auto bad = gradient_check(cfg, 1, 16, 4, 1e-5, 1e-4, 7, true);
    CHECK_FALSE(bad.pass);

    // Padded convolution backward must agree with finite differences too.
    cfg.same_padding = true;
    const auto padded = gradient_check(cfg, 1, 16, 4, 1e-5, 1e-4, 11);
    CHECK(padded.pass);
}

TEST_CASE("predict: argmax with ties toward the lowest index") {
    NetworkConfig cfg;
    cfg.conv_blocks = {{1, 1}};
    cfg.fc_blocks = {};
    cfg.n_classes = 2;
    Model m = init_model(cfg, 1, 4);
    // Force logits directly through the head bias.
    std::fill(m.head.w.begin(), m.head.w.end(), 0.0);
    m.head.b = {0.1, 0.9};
    Tensor x(1, 1, 4);
    CHECK(predict(m, x) == std::vector<int>{1});
    m.head.b = {0.5, 0.5};
    CHECK(predict(m, x) == std::vector<int>{0});
    m.head.b = {1.5, 1.5};  // constant shift changes nothing
    CHECK(predict(m, x) == std::vector<int>{0});
}

TEST_CASE("train: determinism and separable two-class convergence") {
    // Two synthetic classes with well separated constant features.
    FeatureDataset ds;
    Rng rng(21);
    for (int i = 0; i < 40; ++i) {
        FeatureTensor t;
        t.method = FeatureMethod::TPD;
        const int label = i % 2;
        t.data.assign(1, std::vector<double>(24));
        for (auto& v : t.data[0]) {
            v = (label ? 1.0 : -1.0) + 0.1 * rng.gaussian();
        }
        ds.tensors.push_back(std::move(t));
        ds.labels.push_back(label);
    }
    NetworkConfig cfg;
    cfg.conv_blocks = {{4, 5}};
    cfg.fc_blocks = {{8, 0.0}};
    cfg.n_classes = 2;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.lr0 = 0.02;
    cfg.seed = 5;

    Model a = train(ds, cfg);
    Model b = train(ds, cfg);
    CHECK(a.head.w == b.head.w);
    CHECK(a.conv[0].w == b.conv[0].w);
    CHECK(a.conv[0].run_mean == b.conv[0].run_mean);

    Tensor batch = batch_from_features(ds.tensors, 0, ds.tensors.size());
    const auto preds = predict(a, batch);
    int correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == ds.labels[i]) {
            ++correct;
        }
    }
    CHECK(correct == static_cast<int>(preds.size()));

    // Missing class detection.
    FeatureDataset lop = ds;
    for (auto& l : lop.labels) {
        l = 0;
    }
    CHECK_THROWS_AS(train(lop, cfg), EmptyClass);
}

TEST_CASE("checkpoint round trip") {
    NetworkConfig cfg = desk_config(5);
    Model m = init_model(cfg, 1, 53);
    m.conv[0].run_mean[0] = 0.25;  // make running stats non-default
    const std::string path = "test_model.bin";
    save_model(m, path);
    Model r = load_model(path);
    CHECK(r.input_channels == m.input_channels);
    CHECK(r.input_length == m.input_length);
    CHECK(r.conv.size() == m.conv.size());
    CHECK(r.conv[0].w == m.conv[0].w);
    CHECK(r.conv[0].run_mean == m.conv[0].run_mean);
    CHECK(r.fc[0].w == m.fc[0].w);
    CHECK(r.head.b == m.head.b);
    CHECK(r.config.n_classes == 5);
    CHECK(r.config.decay_steps == cfg.decay_steps);

    Tensor x(1, 1, 53);
    Rng rng(2);
    for (auto& v : x.data) {
        v = rng.gaussian();
    }
    auto la = forward(m, x, Mode::Eval);
    auto lb = forward(r, x, Mode::Eval);
    CHECK(la.data == lb.data);
    std::remove(path.c_str());
}

TEST_CASE("eval forward is deterministic, dropout only fires in train mode") {
    NetworkConfig cfg;
    cfg.conv_blocks = {{4, 3}};
    cfg.fc_blocks = {{16, 0.5}};
    cfg.n_classes = 3;
    Model m = init_model(cfg, 2, 20);
    Tensor x(2, 2, 20);
    Rng rng(13);
    for (auto& v : x.data) {
        v = rng.gaussian();
    }
    const auto a = forward(m, x, Mode::Eval);
    const auto b = forward(m, x, Mode::Eval);
    CHECK(a.data == b.data);
    const auto t1 = forward(m, x, Mode::Train, 1);
    const auto t2 = forward(m, x, Mode::Train, 2);
    CHECK(t1.data != t2.data);
}
