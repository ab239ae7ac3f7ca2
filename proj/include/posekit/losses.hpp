#pragma once

#include <cmath>
#include <vector>

#include "posekit/layers.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// Cross-entropy of one logit row against a target class, log-sum-exp stable.
// Gradient is softmax(logits) - onehot(target).
template <class T>
inline double cross_entropy(const TensorT<T>& logits, int target, TensorT<T>* grad = nullptr) {
    if (logits.rank() != 1) throw ConfigError("cross_entropy: logits must be rank 1");
    const int k = logits.dim(0);
    if (target < 0 || target >= k) throw ConfigError("cross_entropy: target out of range");
    double m = logits.at(0);
    for (int j = 1; j < k; ++j) m = std::max(m, static_cast<double>(logits.at(j)));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(logits.at(j)) - m);
    const double lse = m + std::log(sum);
    const double loss = lse - static_cast<double>(logits.at(target));
    if (grad) {
        *grad = TensorT<T>(logits.dims);
        for (int j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(logits.at(j)) - lse);
            grad->at(j) = static_cast<T>(p - (j == target ? 1.0 : 0.0));
        }
    }
    return loss;
}

// Batched version over [B,K] logits; returns the mean loss, and the gradient
// already carries the 1/B factor so it feeds the backward pass directly.
template <class T>
inline double cross_entropy_batch(const TensorT<T>& logits, const std::vector<int>& targets,
                                  TensorT<T>* grad = nullptr) {
    if (logits.rank() != 2) throw ConfigError("cross_entropy_batch: logits must be rank 2");
    const int b = logits.dim(0);
    const int k = logits.dim(1);
    if (static_cast<int>(targets.size()) != b)
        throw ConfigError("cross_entropy_batch: target count mismatch");
    if (grad) *grad = TensorT<T>(logits.dims);
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        const T* row = logits.data.data() + static_cast<size_t>(i) * k;
        const int t = targets[static_cast<size_t>(i)];
        if (t < 0 || t >= k) throw ConfigError("cross_entropy_batch: target out of range");
        double m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - m);
        const double lse = m + std::log(sum);
        total += lse - static_cast<double>(row[t]);
        if (grad) {
            T* g = grad->data.data() + static_cast<size_t>(i) * k;
            for (int j = 0; j < k; ++j) {
                const double p = std::exp(static_cast<double>(row[j]) - lse);
                g[j] = static_cast<T>((p - (j == t ? 1.0 : 0.0)) / b);
            }
        }
    }
    return total / b;
}

constexpr double kBceEps = 1e-7;

// Binary cross entropy on a probability (already through the sigmoid),
// clamped away from 0/1 so the logs stay finite.
inline double bce(double prediction, int target, double* dpred = nullptr) {
    const double p = std::min(1.0 - kBceEps, std::max(kBceEps, prediction));
    const double y = target != 0 ? 1.0 : 0.0;
    if (dpred) *dpred = -(y / p) + (1.0 - y) / (1.0 - p);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

// Mean over a batch of (prediction, target) pairs.
inline double bce_batch(const std::vector<std::pair<double, int>>& batch,
                        std::vector<double>* dpred = nullptr) {
    if (batch.empty()) throw ConfigError("bce_batch: empty batch");
    if (dpred) dpred->assign(batch.size(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        double d = 0.0;
        total += bce(batch[i].first, batch[i].second, &d);
        if (dpred) (*dpred)[i] = d / static_cast<double>(batch.size());
    }
    return total / static_cast<double>(batch.size());
}

} // namespace posekit
