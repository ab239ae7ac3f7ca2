#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "posekit/binning.hpp"
#include "posekit/datasets.hpp"
#include "posekit/layers.hpp"
#include "posekit/losses.hpp"
#include "posekit/mask.hpp"
#include "posekit/optim.hpp"
#include "posekit/parallel.hpp"
#include "posekit/silhouette.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// Architecture constants. The trunk is the smallest net satisfying the
// two-stage layout: fused features -> one conv -> three FC layers with
// batch-norm/ReLU/dropout -> separate azimuth and elevation heads; the
// verifier stacks the D-mask as a ninth channel on the mask-gated features.
constexpr int kFeatureSize = 16;   // input feature maps are 16x16x8
constexpr int kFeatureCh = 8;
constexpr int kConcatCh = 2 * kFeatureCh;
constexpr int kFusedSize = 128;    // upsampled plane
constexpr int kFusedCh = 8;

struct FeatureInput {
    Tensor normal;    // 16x16x8
    Tensor reshading; // 16x16x8

    void validate() const {
        expect_shape(normal.dims, {kFeatureSize, kFeatureSize, kFeatureCh}, "normal features");
        expect_shape(reshading.dims, {kFeatureSize, kFeatureSize, kFeatureCh},
                     "reshading features");
        check_finite(normal, "normal features");
        check_finite(reshading, "reshading features");
    }
};

// channel order contract: normal block first, reshading second
inline Tensor concat_features(const FeatureInput& in) {
    in.validate();
    Tensor out({kFeatureSize, kFeatureSize, kConcatCh});
    for (int i = 0; i < kFeatureSize * kFeatureSize; ++i) {
        for (int c = 0; c < kFeatureCh; ++c) {
            out.data[static_cast<size_t>(i) * kConcatCh + c] =
                in.normal.data[static_cast<size_t>(i) * kFeatureCh + c];
            out.data[static_cast<size_t>(i) * kConcatCh + kFeatureCh + c] =
                in.reshading.data[static_cast<size_t>(i) * kFeatureCh + c];
        }
    }
    return out;
}

// Fusion: upsample the concatenated 16x16x16 block to 128x128 and reduce to
// 8 channels with a trainable 1x1 convolution.
template <class T>
inline TensorT<T> fuse_features(const Conv2d<T>& reduce, const TensorT<T>& concat) {
    const TensorT<T> up = upsample_bilinear(concat, kFusedSize, kFusedSize);
    return reduce.forward(up);
}

// ---------------------------------------------------------------------------
// Stage 1: azimuth/elevation classifier.
//   concat 16x16x16 -> bilinear 128x128x16 -> 1x1 conv -> 128x128x8
//   -> conv 5x5 s4 p2 (16 ch) -> relu -> flatten 16384
//   -> fc 512 -> bn -> relu -> dropout
//   -> fc 256 -> bn -> relu -> dropout
//   -> fc 128 -> az head (K_az), el head (K_el)
// Heads start at zero so an untrained net emits uniform logits.
// ---------------------------------------------------------------------------
template <class T>
struct Stage1NetT {
    int k_az = 9, k_el = 5;
    Conv2d<T> fuse;   // 1x1, 16 -> 8
    Conv2d<T> conv;   // 5x5, 8 -> 16, stride 4, pad 2
    Linear<T> fc1, fc2, fc3;
    BatchNorm<T> bn1, bn2;
    Linear<T> head_az, head_el;
    Dropout<T> drop1, drop2;
    Rng rng;

    static constexpr int kFlat = 32 * 32 * 16;

    Stage1NetT(int az_bins, int el_bins, double dropout_p, uint64_t seed)
        : k_az(az_bins), k_el(el_bins), fuse(1, kConcatCh, kFusedCh, 1, 0),
          conv(5, kFusedCh, 16, 4, 2), fc1(kFlat, 512), fc2(512, 256), fc3(256, 128),
          bn1(512), bn2(256), head_az(128, az_bins), head_el(128, el_bins),
          drop1(dropout_p), drop2(dropout_p), rng(seed ^ 0xA11CE) {
        Rng init_rng(seed);
        fuse.init(init_rng);
        conv.init(init_rng);
        fc1.init(init_rng);
        fc2.init(init_rng);
        fc3.init(init_rng);
        // zero heads: untrained logits are exactly uniform
        head_az.weight.zero();
        head_az.bias.zero();
        head_el.weight.zero();
        head_el.bias.zero();
    }

    struct Cache {
        Tensor up, fused, conv_out, flat, f1, b1, r1, d1, f2, b2, r2, d2, f3;
    };
    Cache cache;

    // training forward; keeps activations for backward()
    std::pair<Tensor, Tensor> forward(const Tensor& concat_batch, Mode mode) {
        const int b = concat_batch.dim(0);
        cache.up = upsample_bilinear(concat_batch, kFusedSize, kFusedSize);
        cache.fused = fuse.forward(cache.up);
        cache.conv_out = conv.forward(cache.fused);
        Tensor flat = relu(cache.conv_out);
        flat.dims = {b, kFlat};
        cache.flat = std::move(flat);
        cache.f1 = fc1.forward(cache.flat);
        cache.b1 = bn1.forward(cache.f1, mode);
        cache.r1 = relu(cache.b1);
        cache.d1 = drop1.forward(cache.r1, mode, rng);
        cache.f2 = fc2.forward(cache.d1);
        cache.b2 = bn2.forward(cache.f2, mode);
        cache.r2 = relu(cache.b2);
        cache.d2 = drop2.forward(cache.r2, mode, rng);
        cache.f3 = fc3.forward(cache.d2);
        Tensor az = head_az.forward(cache.f3);
        Tensor el = head_el.forward(cache.f3);
        check_finite_fast(az, "stage1 azimuth logits");
        check_finite_fast(el, "stage1 elevation logits");
        return {std::move(az), std::move(el)};
    }

    void backward(const Tensor& daz, const Tensor& del) {
        TensorT<T> d3 = head_az.backward(cache.f3, daz);
        const TensorT<T> d3b = head_el.backward(cache.f3, del);
        for (size_t i = 0; i < d3.numel(); ++i) d3.data[i] += d3b.data[i];
        TensorT<T> dd2 = fc3.backward(cache.d2, d3);
        TensorT<T> dr2 = drop2.backward(dd2);
        TensorT<T> db2 = relu_backward(cache.b2, dr2);
        TensorT<T> df2 = bn2.backward(cache.f2, db2);
        TensorT<T> dd1 = fc2.backward(cache.d1, df2);
        TensorT<T> dr1 = drop1.backward(dd1);
        TensorT<T> db1 = relu_backward(cache.b1, dr1);
        TensorT<T> df1 = bn1.backward(cache.f1, db1);
        TensorT<T> dflat = fc1.backward(cache.flat, df1);
        dflat.dims = cache.conv_out.dims;
        TensorT<T> dconv = relu_backward(cache.conv_out, dflat);
        TensorT<T> dfused = conv.backward(cache.fused, dconv);
        fuse.backward(cache.up, dfused, /*need_dx=*/false);
        check_finite_fast(dfused, "stage1 backward");
    }

    // thread-safe inference path, no cached state
    std::pair<Tensor, Tensor> forward_eval(const Tensor& concat_batch) const {
        const int b = concat_batch.rank() == 4 ? concat_batch.dim(0) : 1;
        Tensor up = upsample_bilinear(concat_batch, kFusedSize, kFusedSize);
        Tensor fused = fuse.forward(up);
        Tensor flat = relu(conv.forward(fused));
        flat.dims = {b, kFlat};
        const Tensor f1 = fc1.forward(flat);
        const Tensor r1 = relu(const_cast<BatchNorm<T>&>(bn1).forward_eval_const(f1));
        const Tensor f2 = fc2.forward(r1);
        const Tensor r2 = relu(const_cast<BatchNorm<T>&>(bn2).forward_eval_const(f2));
        const Tensor f3 = fc3.forward(r2);
        Tensor az = head_az.forward(f3);
        Tensor el = head_el.forward(f3);
        check_finite_fast(az, "stage1 azimuth logits");
        check_finite_fast(el, "stage1 elevation logits");
        return {std::move(az), std::move(el)};
    }

    // fused features for one sample (used by stage 2), eval path
    Tensor fuse_single(const Tensor& concat) const {
        return fuse_features(fuse, concat);
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (auto& p : fuse.params("stage1.fuse")) out.push_back(p);
        for (auto& p : conv.params("stage1.conv")) out.push_back(p);
        for (auto& p : fc1.params("stage1.fc1")) out.push_back(p);
        for (auto& p : bn1.params("stage1.bn1")) out.push_back(p);
        for (auto& p : fc2.params("stage1.fc2")) out.push_back(p);
        for (auto& p : bn2.params("stage1.bn2")) out.push_back(p);
        for (auto& p : fc3.params("stage1.fc3")) out.push_back(p);
        for (auto& p : head_az.params("stage1.head_az")) out.push_back(p);
        for (auto& p : head_el.params("stage1.head_el")) out.push_back(p);
        return out;
    }
    std::vector<StateRef<T>> state() {
        std::vector<StateRef<T>> out;
        for (auto& s : bn1.state("stage1.bn1")) out.push_back(s);
        for (auto& s : bn2.state("stage1.bn2")) out.push_back(s);
        return out;
    }
};
using Stage1Net = Stage1NetT<float>;

// ---------------------------------------------------------------------------
// Stage 2: binary verifier.
//   input 128x128x9 (features gated by the predicted mask + D-mask channel)
//   -> conv 3x3 s2 p1 (16) -> bn -> relu
//   -> conv 3x3 s2 p1 (32) -> bn -> relu
//   -> flatten 32768 -> fc 256 -> relu -> fc 64 -> relu -> fc 1 -> sigmoid
// ---------------------------------------------------------------------------
constexpr int kStage2InCh = kFusedCh + 1;

template <class T>
struct Stage2NetT {
    Conv2d<T> conv1, conv2;
    BatchNorm<T> bnc1, bnc2;
    Linear<T> fc1, fc2, fc3;

    static constexpr int kFlat = 32 * 32 * 32;

    explicit Stage2NetT(uint64_t seed)
        : conv1(3, kStage2InCh, 16, 2, 1), conv2(3, 16, 32, 2, 1), bnc1(16), bnc2(32),
          fc1(kFlat, 256), fc2(256, 64), fc3(64, 1) {
        Rng init_rng(seed ^ 0xBEEF);
        conv1.init(init_rng);
        conv2.init(init_rng);
        fc1.init(init_rng);
        fc2.init(init_rng);
        // zero final layer: untrained output probability is exactly 0.5
        fc3.weight.zero();
        fc3.bias.zero();
    }

    struct Cache {
        Tensor c1, b1, r1, c2, b2, r2, flat, f1, r3, f2, r4;
    };
    Cache cache;

    Tensor forward(const Tensor& input_batch, Mode mode) {
        const int b = input_batch.dim(0);
        cache.c1 = conv1.forward(input_batch);
        cache.b1 = bnc1.forward(cache.c1, mode);
        cache.r1 = relu(cache.b1);
        cache.c2 = conv2.forward(cache.r1);
        cache.b2 = bnc2.forward(cache.c2, mode);
        Tensor flat = relu(cache.b2);
        flat.dims = {b, kFlat};
        cache.flat = std::move(flat);
        cache.f1 = fc1.forward(cache.flat);
        cache.r3 = relu(cache.f1);
        cache.f2 = fc2.forward(cache.r3);
        cache.r4 = relu(cache.f2);
        Tensor logits = fc3.forward(cache.r4);
        check_finite_fast(logits, "stage2 logits");
        return logits;
    }

    // needs the input batch back for the first conv's weight gradients
    void backward(const Tensor& input_batch, const Tensor& dlogits) {
        TensorT<T> dr4 = fc3.backward(cache.r4, dlogits);
        TensorT<T> df2 = relu_backward(cache.f2, dr4);
        TensorT<T> dr3 = fc2.backward(cache.r3, df2);
        TensorT<T> df1 = relu_backward(cache.f1, dr3);
        TensorT<T> dflat = fc1.backward(cache.flat, df1);
        dflat.dims = cache.b2.dims;
        TensorT<T> db2 = relu_backward(cache.b2, dflat);
        TensorT<T> dc2 = bnc2.backward(cache.c2, db2);
        TensorT<T> dr1 = conv2.backward(cache.r1, dc2);
        TensorT<T> db1 = relu_backward(cache.b1, dr1);
        TensorT<T> dc1 = bnc1.backward(cache.c1, db1);
        conv1.backward(input_batch, dc1, /*need_dx=*/false);
        check_finite_fast(dc1, "stage2 backward");
    }

    Tensor forward_eval(const Tensor& input_batch) const {
        const int b = input_batch.rank() == 4 ? input_batch.dim(0) : 1;
        Tensor r1 = relu(const_cast<BatchNorm<T>&>(bnc1).forward_eval_const(
            conv1.forward(input_batch)));
        Tensor flat = relu(const_cast<BatchNorm<T>&>(bnc2).forward_eval_const(
            conv2.forward(r1)));
        flat.dims = {b, kFlat};
        const Tensor f1 = relu(fc1.forward(flat));
        const Tensor f2 = relu(fc2.forward(f1));
        Tensor logits = fc3.forward(f2);
        check_finite_fast(logits, "stage2 logits");
        return logits;
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (auto& p : conv1.params("stage2.conv1")) out.push_back(p);
        for (auto& p : bnc1.params("stage2.bnc1")) out.push_back(p);
        for (auto& p : conv2.params("stage2.conv2")) out.push_back(p);
        for (auto& p : bnc2.params("stage2.bnc2")) out.push_back(p);
        for (auto& p : fc1.params("stage2.fc1")) out.push_back(p);
        for (auto& p : fc2.params("stage2.fc2")) out.push_back(p);
        for (auto& p : fc3.params("stage2.fc3")) out.push_back(p);
        return out;
    }
    std::vector<StateRef<T>> state() {
        std::vector<StateRef<T>> out;
        for (auto& s : bnc1.state("stage2.bnc1")) out.push_back(s);
        for (auto& s : bnc2.state("stage2.bnc2")) out.push_back(s);
        return out;
    }
};
using Stage2Net = Stage2NetT<float>;

// Stage-2 input: fused features gated by the predicted mask (channels 0..7)
// with the candidate D-mask stacked as channel 8.
inline Tensor make_stage2_input(const Tensor& fused, const Mask& pmask, const Mask& dmask) {
    expect_shape(fused.dims, {kFusedSize, kFusedSize, kFusedCh}, "fused features");
    if (pmask.width != kFusedSize || pmask.height != kFusedSize ||
        dmask.width != kFusedSize || dmask.height != kFusedSize)
        throw ConfigError("stage2 masks must be 128x128");
    Tensor out({kFusedSize, kFusedSize, kStage2InCh});
    for (int i = 0; i < kFusedSize * kFusedSize; ++i) {
        const float gate = pmask.bits[static_cast<size_t>(i)] ? 1.0f : 0.0f;
        for (int c = 0; c < kFusedCh; ++c)
            out.data[static_cast<size_t>(i) * kStage2InCh + c] =
                fused.data[static_cast<size_t>(i) * kFusedCh + c] * gate;
        out.data[static_cast<size_t>(i) * kStage2InCh + kFusedCh] =
            dmask.bits[static_cast<size_t>(i)] ? 1.0f : 0.0f;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Candidates and the selection rule.
// ---------------------------------------------------------------------------
struct CandidateSet {
    std::vector<std::pair<int, double>> entries; // (bin, probability), descending
};

inline CandidateSet top_k_candidates(const Tensor& az_logits, int k = 3) {
    if (az_logits.rank() != 1) throw ConfigError("top_k_candidates: logits must be rank 1");
    const int n = az_logits.dim(0);
    if (k > n) throw ConfigError("top_k_candidates: k exceeds bin count");
    const Tensor p = softmax(az_logits);
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (p.at(a) != p.at(b)) return p.at(a) > p.at(b);
        return a < b; // ties toward the lower bin index
    });
    CandidateSet out;
    for (int i = 0; i < k; ++i)
        out.entries.push_back({idx[static_cast<size_t>(i)], p.at(idx[static_cast<size_t>(i)])});
    return out;
}

// The verifier gates the candidates: keep candidates whose stage-2
// probability clears the threshold, then pick the one with the largest
// stage-1 probability. If the verifier rejects everything, fall back to the
// stage-1 top choice.
inline int select_pose(const CandidateSet& candidates, const std::vector<double>& stage2_probs,
                       double threshold = 0.5) {
    if (candidates.entries.empty()) throw ConfigError("select_pose: empty candidate set");
    if (stage2_probs.size() != candidates.entries.size())
        throw ConfigError("select_pose: probability count mismatch");
    int best = -1;
    double best_p = -1.0;
    for (size_t i = 0; i < candidates.entries.size(); ++i) {
        if (stage2_probs[i] < threshold) continue;
        if (candidates.entries[i].second > best_p) {
            best_p = candidates.entries[i].second;
            best = static_cast<int>(i);
        }
    }
    if (best < 0) return candidates.entries[0].first;
    return candidates.entries[static_cast<size_t>(best)].first;
}

// ---------------------------------------------------------------------------
// Samples and training.
// ---------------------------------------------------------------------------
struct Sample {
    std::string sample_id, category, mesh_id;
    double azimuth_deg = 0.0, elevation_deg = 0.0;
    int az_bin = 0, el_bin = 0;
    Tensor concat; // 16x16x16
    Mask predicted_mask;
};

inline std::vector<Sample> load_samples(const std::string& dataset_dir,
                                        const std::vector<Annotation>& anns,
                                        const BinSpec& az_spec, const BinSpec& el_spec) {
    const fs::path base(dataset_dir);
    std::vector<Sample> out(anns.size());
    parallel_for(static_cast<int>(anns.size()), [&](int i) {
        const Annotation& a = anns[static_cast<size_t>(i)];
        if (a.normal_path.empty() || a.reshading_path.empty() ||
            a.predicted_mask_path.empty())
            throw ConfigError("sample " + a.sample_id + " lacks feature or mask files");
        FeatureInput fi{load_tensor((base / a.normal_path).string()),
                        load_tensor((base / a.reshading_path).string())};
        Sample s;
        s.sample_id = a.sample_id;
        s.category = a.category;
        s.mesh_id = a.mesh_id;
        s.azimuth_deg = a.azimuth_deg;
        s.elevation_deg = a.elevation_deg;
        s.az_bin = assign_bin(a.azimuth_deg, az_spec);
        s.el_bin = assign_bin(a.elevation_deg, el_spec);
        s.concat = concat_features(fi);
        s.predicted_mask = load_mask_pgm((base / a.predicted_mask_path).string());
        out[static_cast<size_t>(i)] = std::move(s);
    });
    return out;
}

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0, train_az_acc = 0.0, train_el_acc = 0.0;
    double val_loss = 0.0, val_az_acc = 0.0, val_el_acc = 0.0;
};
using History = std::vector<EpochStats>;

namespace detail {

inline Tensor gather_concat_batch(const std::vector<Sample>& samples,
                                  const std::vector<size_t>& idx, size_t from, size_t to) {
    const int b = static_cast<int>(to - from);
    Tensor batch({b, kFeatureSize, kFeatureSize, kConcatCh});
    const size_t stride = TensorT<float>::numel_of(
        {kFeatureSize, kFeatureSize, kConcatCh});
    for (size_t i = from; i < to; ++i) {
        const Tensor& src = samples[idx[i]].concat;
        std::copy(src.data.begin(), src.data.end(),
                  batch.data.begin() + static_cast<long>((i - from) * stride));
    }
    return batch;
}

inline int argmax_row(const Tensor& logits, int row) {
    const int k = logits.dim(1);
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (logits.at(row, j) > logits.at(row, best)) best = j;
    return best;
}

// batch boundaries over n items; a trailing batch of one is folded into its
// predecessor so batch-norm always sees at least two rows
inline std::vector<std::pair<size_t, size_t>> batch_ranges(size_t n, int batch_size) {
    std::vector<std::pair<size_t, size_t>> out;
    for (size_t at = 0; at < n; at += static_cast<size_t>(batch_size))
        out.push_back({at, std::min(n, at + static_cast<size_t>(batch_size))});
    if (out.size() >= 2 && out.back().second - out.back().first == 1) {
        out[out.size() - 2].second = out.back().second;
        out.pop_back();
    }
    return out;
}

} // namespace detail

// loss + accuracy of a stage-1 net over a sample set, eval mode, batched
inline EpochStats stage1_metrics(Stage1Net& net, const std::vector<Sample>& samples,
                                 int batch_size) {
    EpochStats st;
    if (samples.empty()) return st;
    std::vector<size_t> idx(samples.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    double loss = 0.0;
    int az_ok = 0, el_ok = 0;
    for (const auto& [from, to] : detail::batch_ranges(samples.size(), batch_size)) {
        const Tensor batch = detail::gather_concat_batch(samples, idx, from, to);
        const auto [az, el] = net.forward_eval(batch);
        std::vector<int> az_t, el_t;
        for (size_t i = from; i < to; ++i) {
            az_t.push_back(samples[idx[i]].az_bin);
            el_t.push_back(samples[idx[i]].el_bin);
        }
        loss += (cross_entropy_batch(az, az_t) + cross_entropy_batch(el, el_t)) *
                static_cast<double>(to - from);
        for (size_t i = from; i < to; ++i) {
            const int r = static_cast<int>(i - from);
            az_ok += detail::argmax_row(az, r) == samples[idx[i]].az_bin ? 1 : 0;
            el_ok += detail::argmax_row(el, r) == samples[idx[i]].el_bin ? 1 : 0;
        }
    }
    st.train_loss = loss / static_cast<double>(samples.size());
    st.train_az_acc = static_cast<double>(az_ok) / static_cast<double>(samples.size());
    st.train_el_acc = static_cast<double>(el_ok) / static_cast<double>(samples.size());
    return st;
}

// Trains the classifier with L = CE(azimuth) + CE(elevation). Per-epoch
// history carries eval-mode train/val metrics; early stopping watches the
// validation loss when a validation set is supplied.
inline History train_stage1(Stage1Net& net, const std::vector<Sample>& train,
                            const std::vector<Sample>& val, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ConfigError("train_stage1: empty dataset");
    Sgd<float> opt(cfg);
    auto params = net.params();
    Rng shuffle_rng(cfg.seed ^ 0x51A6E1);
    History history;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<size_t> idx(train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(idx);
        for (const auto& [from, to] : detail::batch_ranges(train.size(), cfg.batch_size)) {
            const Tensor batch = detail::gather_concat_batch(train, idx, from, to);
            const auto [az, el] = net.forward(batch, Mode::Train);
            std::vector<int> az_t, el_t;
            for (size_t i = from; i < to; ++i) {
                az_t.push_back(train[idx[i]].az_bin);
                el_t.push_back(train[idx[i]].el_bin);
            }
            Tensor daz, del;
            cross_entropy_batch(az, az_t, &daz);
            cross_entropy_batch(el, el_t, &del);
            zero_grads(params);
            net.backward(daz, del);
            opt.step(params, epoch);
        }

        EpochStats st = stage1_metrics(net, train, cfg.batch_size);
        st.epoch = epoch;
        st.lr = effective_lr(cfg, epoch);
        if (!val.empty()) {
            const EpochStats v = stage1_metrics(net, val, cfg.batch_size);
            st.val_loss = v.train_loss;
            st.val_az_acc = v.train_az_acc;
            st.val_el_acc = v.train_el_acc;
        }
        history.push_back(st);

        if (cfg.target_train_accuracy > 0 && st.train_az_acc >= cfg.target_train_accuracy)
            break;
        if (!val.empty() && cfg.early_stop_patience > 0) {
            if (st.val_loss < best_val - 1e-9) {
                best_val = st.val_loss;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_patience) {
                break;
            }
        }
    }
    return history;
}

// ---------------------------------------------------------------------------
// Stage-2 training data: one positive (ground-truth bin D-mask) and one
// negative per sample. Negatives come from the stage-1 wrong top candidates
// when available, otherwise a uniformly drawn wrong bin.
// ---------------------------------------------------------------------------
struct Stage2Pair {
    int sample_idx = 0;   // indexes the fused cache
    const Mask* dmask = nullptr;
    int target = 0;
};

struct Stage2Data {
    std::vector<Tensor> fused;          // per sample, stage-1 fusion output
    std::vector<const Mask*> pmask;     // per sample
    std::vector<Stage2Pair> pairs;      // interleaved positive, negative
};

using DmaskLibrary = std::map<std::string, DmaskSet>;

inline Stage2Data build_stage2_pairs(const Stage1Net& stage1, const std::vector<Sample>& samples,
                                     const DmaskLibrary& library, const BinSpec& az_spec,
                                     uint64_t seed, bool negatives_from_top3 = true) {
    Stage2Data data;
    data.fused.resize(samples.size());
    data.pmask.resize(samples.size());
    parallel_for(static_cast<int>(samples.size()), [&](int i) {
        data.fused[static_cast<size_t>(i)] =
            stage1.fuse_single(samples[static_cast<size_t>(i)].concat);
        data.pmask[static_cast<size_t>(i)] = &samples[static_cast<size_t>(i)].predicted_mask;
    });
    Rng rng(seed ^ 0x57A6E2);
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const auto lib = library.find(s.mesh_id);
        if (lib == library.end())
            throw ConfigError("no D-mask set for mesh " + s.mesh_id);
        const DmaskSet& dm = lib->second;

        data.pairs.push_back({static_cast<int>(i), &dm.at(s.az_bin, s.el_bin), 1});

        int neg_bin = -1;
        if (negatives_from_top3) {
            const auto [az, el] = stage1.forward_eval(s.concat.rank() == 3
                                                          ? [&] {
                                                                Tensor b({1, kFeatureSize,
                                                                          kFeatureSize, kConcatCh});
                                                                std::copy(s.concat.data.begin(),
                                                                          s.concat.data.end(),
                                                                          b.data.begin());
                                                                return b;
                                                            }()
                                                          : s.concat);
            Tensor row({az_spec.n_bins});
            for (int j = 0; j < az_spec.n_bins; ++j) row.at(j) = az.at(0, j);
            const CandidateSet cands = top_k_candidates(row, 3);
            for (const auto& [bin, prob] : cands.entries) {
                if (bin != s.az_bin) {
                    neg_bin = bin;
                    break; // highest-probability wrong candidate
                }
            }
        }
        if (neg_bin < 0) {
            neg_bin = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(az_spec.n_bins - 1)));
            if (neg_bin >= s.az_bin) ++neg_bin;
        }
        data.pairs.push_back({static_cast<int>(i), &dm.at(neg_bin, s.el_bin), 0});
    }
    return data;
}

namespace detail {

inline Tensor gather_stage2_batch(const Stage2Data& data, const std::vector<size_t>& order,
                                  size_t from, size_t to) {
    const int b = static_cast<int>(to - from);
    Tensor batch({b, kFusedSize, kFusedSize, kStage2InCh});
    const size_t stride =
        TensorT<float>::numel_of({kFusedSize, kFusedSize, kStage2InCh});
    for (size_t i = from; i < to; ++i) {
        const Stage2Pair& pr = data.pairs[order[i]];
        const Tensor input = make_stage2_input(
            data.fused[static_cast<size_t>(pr.sample_idx)],
            *data.pmask[static_cast<size_t>(pr.sample_idx)], *pr.dmask);
        std::copy(input.data.begin(), input.data.end(),
                  batch.data.begin() + static_cast<long>((i - from) * stride));
    }
    return batch;
}

} // namespace detail

// Trains the verifier with the mean binary cross entropy over (prediction,
// is-ground-truth-bin) pairs. The pair list alternates positive/negative, and
// shuffling moves those two-pair blocks together so batches stay balanced.
inline History train_stage2(Stage2Net& net, const Stage2Data& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.pairs.empty()) throw ConfigError("train_stage2: empty pair set");
    Sgd<float> opt(cfg);
    auto params = net.params();
    Rng shuffle_rng(cfg.seed ^ 0x57A6E3);
    History history;

    const size_t n_blocks = data.pairs.size() / 2;
    std::vector<size_t> blocks(n_blocks);
    for (size_t i = 0; i < n_blocks; ++i) blocks[i] = i;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(blocks);
        std::vector<size_t> order;
        order.reserve(data.pairs.size());
        for (size_t b : blocks) {
            order.push_back(2 * b);
            order.push_back(2 * b + 1);
        }
        for (const auto& [from, to] : detail::batch_ranges(order.size(), cfg.batch_size)) {
            const Tensor batch = detail::gather_stage2_batch(data, order, from, to);
            const Tensor logits = net.forward(batch, Mode::Train);
            const int b = static_cast<int>(to - from);
            std::vector<std::pair<double, int>> preds;
            for (int r = 0; r < b; ++r)
                preds.push_back({sigmoid(static_cast<double>(logits.at(r, 0))),
                                 data.pairs[order[from + static_cast<size_t>(r)]].target});
            std::vector<double> dpred;
            bce_batch(preds, &dpred);
            Tensor dlogits({b, 1});
            for (int r = 0; r < b; ++r) {
                const double p = preds[static_cast<size_t>(r)].first;
                dlogits.at(r, 0) = static_cast<float>(dpred[static_cast<size_t>(r)] * p * (1.0 - p));
            }
            zero_grads(params);
            net.backward(batch, dlogits);
            opt.step(params, epoch);
        }

        // eval-mode metrics over all pairs
        EpochStats st;
        st.epoch = epoch;
        st.lr = effective_lr(cfg, epoch);
        std::vector<size_t> seq(data.pairs.size());
        for (size_t i = 0; i < seq.size(); ++i) seq[i] = i;
        double loss = 0.0;
        int ok = 0;
        for (const auto& [from, to] : detail::batch_ranges(seq.size(), cfg.batch_size)) {
            const Tensor batch = detail::gather_stage2_batch(data, seq, from, to);
            const Tensor logits = net.forward_eval(batch);
            for (size_t i = from; i < to; ++i) {
                const int r = static_cast<int>(i - from);
                const double p = sigmoid(static_cast<double>(logits.at(r, 0)));
                const int t = data.pairs[i].target;
                loss += bce(p, t);
                ok += (p >= 0.5 ? 1 : 0) == t ? 1 : 0;
            }
        }
        st.train_loss = loss / static_cast<double>(data.pairs.size());
        st.train_az_acc = static_cast<double>(ok) / static_cast<double>(data.pairs.size());
        history.push_back(st);
        if (cfg.target_train_accuracy > 0 && st.train_az_acc >= cfg.target_train_accuracy)
            break;
    }
    return history;
}

// ---------------------------------------------------------------------------
// Evaluation: per-category azimuth/elevation accuracy under the binning
// correctness rule. With a stage-2 net, azimuth goes through top-3
// candidates, CAD retrieval by template matching, D-mask verification and
// the selection rule; elevation always comes from stage 1.
// ---------------------------------------------------------------------------
struct GalleryEntry {
    Mask mask;
    std::string mesh_id;
    std::string category;
};

struct EvalOptions {
    int top_k = 3;
    double threshold = 0.5;
    bool oracle = false; // test instrument: predict assign_bin(ground truth)
};

struct CategoryRow {
    std::string category;
    int n = 0;
    int az_correct = 0;
    int el_correct = 0;
};

struct EvalReport {
    std::vector<CategoryRow> rows; // sorted by category
    int n = 0, az_correct = 0, el_correct = 0;
    bool prediction_always_in_top3 = true;

    double az_acc() const { return n ? 100.0 * az_correct / n : 0.0; }
    double el_acc() const { return n ? 100.0 * el_correct / n : 0.0; }
};

inline EvalReport evaluate(const Stage1Net& stage1, const Stage2Net* stage2,
                           const std::vector<Sample>& samples, const BinSpec& az_spec,
                           const BinSpec& el_spec, const std::vector<GalleryEntry>& gallery,
                           const DmaskLibrary& library, const EvalOptions& opts = {}) {
    struct PerSample {
        int az_bin = 0, el_bin = 0;
        bool in_top3 = true;
    };
    std::vector<PerSample> results(samples.size());

    parallel_for(static_cast<int>(samples.size()), [&](int i) {
        const Sample& s = samples[static_cast<size_t>(i)];
        PerSample r;
        if (opts.oracle) {
            r.az_bin = assign_bin(s.azimuth_deg, az_spec);
            r.el_bin = assign_bin(s.elevation_deg, el_spec);
            results[static_cast<size_t>(i)] = r;
            return;
        }
        Tensor batch({1, kFeatureSize, kFeatureSize, kConcatCh});
        std::copy(s.concat.data.begin(), s.concat.data.end(), batch.data.begin());
        const auto [az, el] = stage1.forward_eval(batch);
        Tensor az_row({az_spec.n_bins}), el_row({el_spec.n_bins});
        for (int j = 0; j < az_spec.n_bins; ++j) az_row.at(j) = az.at(0, j);
        for (int j = 0; j < el_spec.n_bins; ++j) el_row.at(j) = el.at(0, j);
        r.el_bin = 0;
        for (int j = 1; j < el_spec.n_bins; ++j)
            if (el_row.at(j) > el_row.at(r.el_bin)) r.el_bin = j;

        const CandidateSet cands = top_k_candidates(az_row, opts.top_k);
        r.az_bin = cands.entries[0].first;

        if (stage2 && !gallery.empty() && !library.empty() && !s.predicted_mask.empty_fg()) {
            // retrieve the nearest CAD model within the category
            std::vector<Mask> cat_masks;
            std::vector<const GalleryEntry*> cat_entries;
            for (const auto& g : gallery) {
                if (g.category == s.category) {
                    cat_masks.push_back(g.mask);
                    cat_entries.push_back(&g);
                }
            }
            if (cat_masks.empty()) {
                for (const auto& g : gallery) {
                    cat_masks.push_back(g.mask);
                    cat_entries.push_back(&g);
                }
            }
            const MatchResult match = template_match(s.predicted_mask, cat_masks);
            const std::string& mesh_id = cat_entries[static_cast<size_t>(match.index)]->mesh_id;
            const auto lib = library.find(mesh_id);
            if (lib != library.end()) {
                const Tensor fused = stage1.fuse_single(s.concat);
                std::vector<double> probs;
                for (const auto& [bin, p1] : cands.entries) {
                    const Tensor input =
                        make_stage2_input(fused, s.predicted_mask, lib->second.at(bin, r.el_bin));
                    Tensor b({1, kFusedSize, kFusedSize, kStage2InCh});
                    std::copy(input.data.begin(), input.data.end(), b.data.begin());
                    const Tensor logit = stage2->forward_eval(b);
                    probs.push_back(sigmoid(static_cast<double>(logit.at(0, 0))));
                }
                r.az_bin = select_pose(cands, probs, opts.threshold);
            }
        }
        r.in_top3 = false;
        for (const auto& [bin, p] : cands.entries)
            if (bin == r.az_bin) r.in_top3 = true;
        results[static_cast<size_t>(i)] = r;
    });

    std::map<std::string, CategoryRow> rows;
    EvalReport report;
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        CategoryRow& row = rows[s.category];
        row.category = s.category;
        row.n++;
        const bool az_ok = is_correct(results[i].az_bin, s.azimuth_deg, az_spec);
        const bool el_ok = is_correct(results[i].el_bin, s.elevation_deg, el_spec);
        row.az_correct += az_ok ? 1 : 0;
        row.el_correct += el_ok ? 1 : 0;
        report.n++;
        report.az_correct += az_ok ? 1 : 0;
        report.el_correct += el_ok ? 1 : 0;
        if (!opts.oracle && !results[i].in_top3) report.prediction_always_in_top3 = false;
    }
    for (auto& [cat, row] : rows) report.rows.push_back(row);
    return report;
}

// report.csv contract: "category,n,az_acc,el_acc" rows plus a final "mean"
// row, percentages with two decimals.
inline std::string format_report_csv(const EvalReport& report) {
    std::string out = "category,n,az_acc,el_acc\n";
    char buf[160];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.2f,%.2f\n", row.category.c_str(), row.n,
                      row.n ? 100.0 * row.az_correct / row.n : 0.0,
                      row.n ? 100.0 * row.el_correct / row.n : 0.0);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%d,%.2f,%.2f\n", report.n, report.az_acc(),
                  report.el_acc());
    out += buf;
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: "PNV1" container of named float tensors.
//   magic "PNV1" | u32 count | entries:
//     u32 name_len | name bytes | u8 ndim | ndim x u32 dims | f32 payload
// All integers and floats little endian. Reload is bitwise.
// ---------------------------------------------------------------------------
using NamedTensors = std::vector<std::pair<std::string, const Tensor*>>;

inline void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write("PNV1", 4);
    const uint32_t count = static_cast<uint32_t>(tensors.size());
    f.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [name, tensor] : tensors) {
        const uint32_t len = static_cast<uint32_t>(name.size());
        f.write(reinterpret_cast<const char*>(&len), 4);
        f.write(name.data(), len);
        const uint8_t ndim = static_cast<uint8_t>(tensor->dims.size());
        f.write(reinterpret_cast<const char*>(&ndim), 1);
        for (int d : tensor->dims) {
            const uint32_t dim = static_cast<uint32_t>(d);
            f.write(reinterpret_cast<const char*>(&dim), 4);
        }
        f.write(reinterpret_cast<const char*>(tensor->data.data()),
                static_cast<std::streamsize>(4 * tensor->numel()));
    }
    if (!f) throw IoError("checkpoint write failed: " + path);
}

inline std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "PNV1", 4) != 0)
        throw BadMagicError("bad checkpoint magic: " + path);
    uint32_t count = 0;
    if (!f.read(reinterpret_cast<char*>(&count), 4))
        throw TruncatedFileError("truncated checkpoint: " + path);
    std::map<std::string, Tensor> out;
    for (uint32_t e = 0; e < count; ++e) {
        uint32_t len = 0;
        if (!f.read(reinterpret_cast<char*>(&len), 4) || len > 4096)
            throw TruncatedFileError("truncated checkpoint entry: " + path);
        std::string name(len, '\0');
        if (!f.read(name.data(), len)) throw TruncatedFileError("truncated name: " + path);
        uint8_t ndim = 0;
        if (!f.read(reinterpret_cast<char*>(&ndim), 1) || ndim < 1 || ndim > 8)
            throw TruncatedFileError("bad tensor rank: " + path);
        std::vector<int> dims(ndim);
        for (int i = 0; i < ndim; ++i) {
            uint32_t d = 0;
            if (!f.read(reinterpret_cast<char*>(&d), 4) || d == 0)
                throw TruncatedFileError("bad dims: " + path);
            dims[static_cast<size_t>(i)] = static_cast<int>(d);
        }
        Tensor t(dims);
        if (!f.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(4 * t.numel())))
            throw TruncatedFileError("truncated payload: " + path);
        if (!out.emplace(name, std::move(t)).second)
            throw ParseError("duplicate tensor name in checkpoint: " + name);
    }
    return out;
}

template <class Net>
inline NamedTensors named_tensors(Net& net) {
    NamedTensors out;
    for (auto& p : net.params()) out.push_back({p.name, p.value});
    for (auto& s : net.state()) out.push_back({s.name, s.value});
    return out;
}

template <class Net>
inline void load_net(Net& net, const std::map<std::string, Tensor>& ckpt,
                     const std::string& prefix) {
    for (auto& [name, tensor] : named_tensors(net)) {
        const auto it = ckpt.find(name);
        if (it == ckpt.end()) throw ConfigError("checkpoint missing tensor " + name);
        if (it->second.dims != tensor->dims)
            throw ConfigError("checkpoint shape mismatch for " + name);
        const_cast<Tensor*>(tensor)->data = it->second.data;
    }
    (void)prefix;
}

inline bool checkpoint_has_stage2(const std::map<std::string, Tensor>& ckpt) {
    for (const auto& [name, t] : ckpt)
        if (name.rfind("stage2.", 0) == 0) return true;
    return false;
}

} // namespace posekit
