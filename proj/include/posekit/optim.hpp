#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "posekit/layers.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

struct TrainConfig {
    double learning_rate = 0.001;
    int lr_step_epochs = 3;       // decay boundary spacing, in epochs
    double lr_decay_factor = 0.1; // multiplier applied at each boundary
    double momentum = 0.9;
    int max_epochs = 10;
    int early_stop_patience = 3; // epochs without val-loss improvement; 0 = off
    int batch_size = 32;
    double dropout_p = 0.5;
    uint64_t seed = 0;
    // Optional stop once train accuracy reaches this level (0 = off); used by
    // the overfit harnesses.
    double target_train_accuracy = 0.0;

    void validate() const {
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
        if (lr_step_epochs < 1) throw ConfigError("lr_step_epochs must be >= 1");
        if (!(lr_decay_factor > 0) || lr_decay_factor > 1)
            throw ConfigError("lr_decay_factor must be in (0,1]");
        if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0,1)");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (dropout_p < 0 || dropout_p >= 1) throw ConfigError("dropout_p must be in [0,1)");
        if (target_train_accuracy < 0 || target_train_accuracy > 1)
            throw ConfigError("target_train_accuracy must be in [0,1]");
    }
};

inline double effective_lr(const TrainConfig& cfg, int epoch) {
    return cfg.learning_rate * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_step_epochs);
}

// SGD with momentum and step decay:
//   v <- momentum * v + g
//   p <- p - lr_epoch * v
// Velocity buffers are keyed by position in the params list, which must stay
// stable across steps.
template <class T>
class Sgd {
public:
    explicit Sgd(TrainConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    void step(std::vector<ParamRef<T>>& params, int epoch) {
        const T lr = static_cast<T>(effective_lr(cfg_, epoch));
        const T mom = static_cast<T>(cfg_.momentum);
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            velocity_.reserve(params.size());
            for (auto& p : params) velocity_.emplace_back(p.value->dims);
        }
        for (size_t i = 0; i < params.size(); ++i) {
            TensorT<T>& v = velocity_[i];
            TensorT<T>& val = *params[i].value;
            TensorT<T>& g = *params[i].grad;
            if (!v.same_shape(val) || !g.same_shape(val))
                throw ConfigError("sgd_step: gradient/velocity shape mismatch");
            for (size_t j = 0; j < val.numel(); ++j) {
                v.data[j] = mom * v.data[j] + g.data[j];
                val.data[j] -= lr * v.data[j];
            }
        }
    }

    const TrainConfig& config() const { return cfg_; }

private:
    TrainConfig cfg_;
    std::vector<TensorT<T>> velocity_;
};

// One-shot step for callers that keep their own optimizer state out of scope;
// momentum-free (velocity = gradient).
template <class T>
inline void sgd_step(std::vector<ParamRef<T>>& params, const TrainConfig& cfg, int epoch) {
    const T lr = static_cast<T>(effective_lr(cfg, epoch));
    for (auto& p : params) {
        for (size_t j = 0; j < p.value->numel(); ++j)
            p.value->data[j] -= lr * p.grad->data[j];
    }
}

template <class T>
inline void zero_grads(std::vector<ParamRef<T>>& params) {
    for (auto& p : params) p.grad->zero();
}

} // namespace posekit
