#include <algorithm>
#include <cmath>

#include "blefp/nn.hpp"
#include "blefp/rng.hpp"

namespace blefp {

namespace {
double loss_only(Model& model, const Tensor& batch, const std::vector<int>& labels) {
    return loss_and_grad(model, batch, labels, 0, false).first;
}
}  // namespace

GradCheckReport gradient_check(const NetworkConfig& cfg_in, int input_channels, int input_length,
                               int batch, double eps, double tol, uint64_t seed, bool corrupt) {
    NetworkConfig cfg = cfg_in;
    for (auto& fb : cfg.fc_blocks) {
        fb.dropout = 0.0;  // stochastic layers off for the check
    }
    cfg.seed = seed;
    Model model = init_model(cfg, input_channels, input_length);

    Rng rng(derive_seed(seed, 0xF00D));
    Tensor batch_x(static_cast<std::size_t>(batch), static_cast<std::size_t>(input_channels),
                   static_cast<std::size_t>(input_length));
    for (auto& v : batch_x.data) {
        v = rng.gaussian();
    }
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (auto& y : labels) {
        y = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.n_classes)));
    }

    auto [loss0, grads] = loss_and_grad(model, batch_x, labels, 0, false);
    (void)loss0;
    auto params = param_blobs(model);
    auto gblobs = grad_blobs(grads);
    if (corrupt && !gblobs.empty() && !gblobs[0]->empty()) {
        (*gblobs[0])[0] = (*gblobs[0])[0] * 1.5 + 1.0;
    }

    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckReport::Entry entry;
        entry.name = params[p].first;
        std::vector<double>& w = *params[p].second;
        const std::vector<double>& g = *gblobs[p];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double orig = w[k];
            w[k] = orig + eps;
            const double lp = loss_only(model, batch_x, labels);
            w[k] = orig - eps;
            const double lm = loss_only(model, batch_x, labels);
            w[k] = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double denom = std::max({std::abs(fd), std::abs(g[k]), 1e-6});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - g[k]) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace blefp
