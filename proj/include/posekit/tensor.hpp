#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/errors.hpp"

namespace posekit {

// Dense row-major n-d array. float is the working precision, double is the
// verification precision used by the gradient checker.
template <class T>
struct TensorT {
    std::vector<int> dims;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> d, T fill = T(0)) : dims(std::move(d)) {
        for (int n : dims) {
            if (n <= 0) throw ConfigError("tensor dims must be positive");
        }
        data.assign(numel_of(dims), fill);
    }

    static size_t numel_of(const std::vector<int>& d) {
        size_t n = 1;
        for (int x : d) n *= static_cast<size_t>(x);
        return n;
    }

    size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(dims.size()); }
    int dim(int i) const { return dims[static_cast<size_t>(i)]; }

    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    T& at(int i) { return data[static_cast<size_t>(i)]; }
    const T& at(int i) const { return data[static_cast<size_t>(i)]; }

    T& at(int i, int j) { return data[static_cast<size_t>(i) * dims[1] + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * dims[1] + j]; }

    T& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * dims[1] + j) * dims[2] + k];
    }
    const T& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * dims[1] + j) * dims[2] + k];
    }

    T& at(int n, int i, int j, int k) {
        return data[((static_cast<size_t>(n) * dims[1] + i) * dims[2] + j) * dims[3] + k];
    }
    const T& at(int n, int i, int j, int k) const {
        return data[((static_cast<size_t>(n) * dims[1] + i) * dims[2] + j) * dims[3] + k];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
    void zero() { fill(T(0)); }

    bool same_shape(const TensorT& o) const { return dims == o.dims; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
        os << "]";
        return os.str();
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out(dims);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

template <class T>
inline bool all_finite(const TensorT<T>& t) {
    for (T v : t.data) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

// NaN/Inf anywhere is a hard error for the NN kit.
template <class T>
inline void check_finite(const TensorT<T>& t, const char* where) {
    if (!all_finite(t)) {
        throw NumericError(std::string("non-finite value in ") + where + " " + t.shape_str());
    }
}

// Single-pass variant for hot paths: a NaN or Inf anywhere poisons the sum.
// Finite float inputs cannot overflow the double accumulator.
template <class T>
inline void check_finite_fast(const TensorT<T>& t, const char* where) {
    double acc = 0.0;
    for (T v : t.data) acc += static_cast<double>(v);
    if (!std::isfinite(acc)) check_finite(t, where); // locate and throw
}

inline void expect_shape(const std::vector<int>& got, const std::vector<int>& want,
                         const char* what) {
    if (got != want) {
        std::ostringstream os;
        os << what << ": shape mismatch, got [";
        for (size_t i = 0; i < got.size(); ++i) os << (i ? "," : "") << got[i];
        os << "] want [";
        for (size_t i = 0; i < want.size(); ++i) os << (i ? "," : "") << want[i];
        os << "]";
        throw ConfigError(os.str());
    }
}

// --- small dense kernels ------------------------------------------------
// Row-major GEMM in the three transpose layouts the layers need. The k-inner
// / j-contiguous loop orders below auto-vectorize and are the difference
// between seconds and minutes for the FC layers.

// C[M,N] += A[M,K] * B[K,N]
template <class T>
inline void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<size_t>(i) * N;
        const T* a = A + static_cast<size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const T av = a[k];
            if (av == T(0)) continue;
            const T* b = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T  (dot products along contiguous rows)
template <class T>
inline void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<size_t>(i) * K;
        T* c = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const T* b = B + static_cast<size_t>(j) * K;
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <class T>
inline void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C) {
    for (int k = 0; k < K; ++k) {
        const T* a = A + static_cast<size_t>(k) * M;
        const T* b = B + static_cast<size_t>(k) * N;
        for (int i = 0; i < M; ++i) {
            const T av = a[i];
            if (av == T(0)) continue;
            T* c = C + static_cast<size_t>(i) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

} // namespace posekit
