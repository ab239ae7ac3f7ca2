#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/layers.hpp"
#include "posekit/losses.hpp"
#include "posekit/rng.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// Finite-difference gradient verification. Runs in double precision only;
// float rounding would drown the signal at the 1e-4 tolerance.

struct GradCheckItem {
    std::string name;
    DTensor* value = nullptr;
    DTensor* grad = nullptr; // analytic gradient, populated by the closure
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    std::string worst_coord; // "item[index]"
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    size_t coords_checked = 0;

    bool pass() const { return max_rel_err < tolerance; }
    std::string summary() const {
        std::ostringstream os;
        os << (pass() ? "pass" : "FAIL") << " max_rel_err=" << max_rel_err << " at "
           << worst_coord << " (analytic=" << worst_analytic << " numeric=" << worst_numeric
           << ", " << coords_checked << " coords, tol=" << tolerance << ")";
        return os.str();
    }
};

// `loss_with_grads` must zero the grads, run forward + backward and return
// the scalar loss; it is re-invoked after each coordinate perturbation, so it
// has to be deterministic in the item values (fix any dropout masks first).
inline GradCheckReport grad_check(std::vector<GradCheckItem> items,
                                  const std::function<double()>& loss_with_grads,
                                  double tolerance, double step = 1e-5) {
    GradCheckReport rep;
    rep.tolerance = tolerance;

    loss_with_grads();
    std::vector<DTensor> analytic;
    analytic.reserve(items.size());
    for (auto& it : items) analytic.push_back(*it.grad);

    for (size_t t = 0; t < items.size(); ++t) {
        DTensor& v = *items[t].value;
        for (size_t i = 0; i < v.numel(); ++i) {
            const double saved = v.data[i];
            const double h = step * std::max(1.0, std::abs(saved));
            v.data[i] = saved + h;
            const double lp = loss_with_grads();
            v.data[i] = saved - h;
            const double lm = loss_with_grads();
            v.data[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[t].data[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / denom;
            ++rep.coords_checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_coord = items[t].name + "[" + std::to_string(i) + "]";
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
            }
        }
    }
    // restore analytic grads for the unperturbed point
    loss_with_grads();
    return rep;
}

// ---------------------------------------------------------------------------
// Per-layer checks used by the verification suite. Each builds a small random
// instance and measures d(c . output)/d(params, input) against central
// differences.
// ---------------------------------------------------------------------------
namespace gradsuite {

inline DTensor random_tensor(std::vector<int> dims, Rng& rng, double scale = 1.0) {
    DTensor t(std::move(dims));
    for (auto& v : t.data) v = rng.normal() * scale;
    return t;
}

inline GradCheckReport check_linear(uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    Linear<double> layer(16, 8);
    layer.init(rng);
    DTensor x = random_tensor({16}, rng);
    DTensor c = random_tensor({8}, rng);
    DTensor grad_x({16});
    auto loss = [&] {
        layer.grad_weight.zero();
        layer.grad_bias.zero();
        DTensor y = layer.forward(x);
        double l = 0.0;
        DTensor dy(y.dims);
        for (size_t i = 0; i < y.numel(); ++i) {
            l += c.data[i] * y.data[i];
            dy.data[i] = c.data[i];
        }
        grad_x = layer.backward(x, dy);
        return l;
    };
    return grad_check({{"weight", &layer.weight, &layer.grad_weight},
                       {"bias", &layer.bias, &layer.grad_bias},
                       {"input", &x, &grad_x}},
                      loss, tol);
}

inline GradCheckReport check_conv(uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    Conv2d<double> layer(3, 2, 4, 1, 1);
    layer.init(rng);
    DTensor x = random_tensor({8, 8, 2}, rng);
    DTensor grad_x(x.dims);
    DTensor c;
    auto loss = [&] {
        layer.grad_weight.zero();
        layer.grad_bias.zero();
        DTensor y = layer.forward(x);
        if (c.numel() == 0) c = random_tensor(y.dims, rng);
        double l = 0.0;
        DTensor dy(y.dims);
        for (size_t i = 0; i < y.numel(); ++i) {
            l += c.data[i] * y.data[i];
            dy.data[i] = c.data[i];
        }
        grad_x = layer.backward(x, dy);
        return l;
    };
    return grad_check({{"weight", &layer.weight, &layer.grad_weight},
                       {"bias", &layer.bias, &layer.grad_bias},
                       {"input", &x, &grad_x}},
                      loss, tol);
}

inline GradCheckReport check_batchnorm(uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    BatchNorm<double> layer(3);
    for (auto& g : layer.gamma.data) g = 0.5 + rng.uniform();
    for (auto& b : layer.beta.data) b = rng.normal();
    DTensor x = random_tensor({4, 3}, rng);
    DTensor c = random_tensor({4, 3}, rng);
    DTensor grad_x(x.dims);
    // freeze running stats so repeated forwards are identical
    auto loss = [&, mean0 = layer.running_mean, var0 = layer.running_var] {
        layer.running_mean = mean0;
        layer.running_var = var0;
        layer.grad_gamma.zero();
        layer.grad_beta.zero();
        DTensor y = layer.forward(x, Mode::Train);
        double l = 0.0;
        DTensor dy(y.dims);
        for (size_t i = 0; i < y.numel(); ++i) {
            l += c.data[i] * y.data[i];
            dy.data[i] = c.data[i];
        }
        grad_x = layer.backward(x, dy);
        return l;
    };
    return grad_check({{"gamma", &layer.gamma, &layer.grad_gamma},
                       {"beta", &layer.beta, &layer.grad_beta},
                       {"input", &x, &grad_x}},
                      loss, tol);
}

inline GradCheckReport check_upsample(uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    DTensor x = random_tensor({4, 4, 2}, rng);
    DTensor c = random_tensor({9, 11, 2}, rng);
    DTensor grad_x(x.dims);
    auto loss = [&] {
        DTensor y = upsample_bilinear(x, 9, 11);
        double l = 0.0;
        DTensor dy(y.dims);
        for (size_t i = 0; i < y.numel(); ++i) {
            l += c.data[i] * y.data[i];
            dy.data[i] = c.data[i];
        }
        grad_x = upsample_bilinear_backward(x.dims, dy);
        return l;
    };
    return grad_check({{"input", &x, &grad_x}}, loss, tol);
}

inline GradCheckReport check_cross_entropy(uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    DTensor logits = random_tensor({7}, rng);
    const int target = static_cast<int>(rng.uniform_int(7));
    DTensor grad({7});
    auto loss = [&] { return cross_entropy(logits, target, &grad); };
    return grad_check({{"logits", &logits, &grad}}, loss, tol);
}

inline GradCheckReport check_relu(uint64_t seed, double tol = 1e-4) {
    Rng rng(seed);
    DTensor x = random_tensor({24}, rng);
    // keep coordinates away from the kink, finite differences straddle it
    for (auto& v : x.data) {
        if (std::abs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
    }
    DTensor c = random_tensor({24}, rng);
    DTensor grad_x(x.dims);
    auto loss = [&] {
        DTensor y = relu(x);
        double l = 0.0;
        DTensor dy(y.dims);
        for (size_t i = 0; i < y.numel(); ++i) {
            l += c.data[i] * y.data[i];
            dy.data[i] = c.data[i];
        }
        grad_x = relu_backward(x, dy);
        return l;
    };
    return grad_check({{"input", &x, &grad_x}}, loss, tol);
}

} // namespace gradsuite
} // namespace posekit
