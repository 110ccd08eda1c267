#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace ecol {

struct AdamConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over flat (pointer, count) parameter views. The caller passes the same
// block layout every step; first-/second-moment state is kept per element.
class Adam {
public:
    Adam(AdamConfig config, size_t n_params)
        : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

    template <typename ParamBlocks, typename GradBlocks>
    void step(const ParamBlocks& params, const GradBlocks& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        size_t off = 0;
        for (size_t b = 0; b < params.size(); ++b) {
            double* p = params[b].first;
            const double* g = grads[b].first;
            const size_t n = params[b].second;
            for (size_t i = 0; i < n; ++i) {
                double& m = m_[off + i];
                double& v = v_[off + i];
                m = config_.beta1 * m + (1.0 - config_.beta1) * g[i];
                v = config_.beta2 * v + (1.0 - config_.beta2) * g[i] * g[i];
                p[i] -= config_.lr * (m / bc1) / (std::sqrt(v / bc2) + config_.eps);
            }
            off += n;
        }
    }

    long steps_taken() const { return t_; }

private:
    AdamConfig config_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

template <typename Blocks>
size_t total_param_count(const Blocks& blocks) {
    size_t n = 0;
    for (const auto& [ptr, count] : blocks) n += count;
    return n;
}

} // namespace ecol
