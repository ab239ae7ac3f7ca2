#include <catch2/catch_amalgamated.hpp>

#include "posekit/rng.hpp"
#include "posekit/tensor.hpp"

using namespace posekit;

TEST_CASE("tensor shape and indexing") {
    Tensor t({2, 3, 4});
    REQUIRE(t.numel() == 24);
    t.at(1, 2, 3) = 7.0f;
    REQUIRE(t.data[23] == 7.0f);
    REQUIRE(t.shape_str() == "[2x3x4]");
    REQUIRE_THROWS_AS(Tensor({2, 0}), ConfigError);
}

TEST_CASE("finite check") {
    Tensor t({4});
    check_finite(t, "zeros");
    t.at(2) = std::numeric_limits<float>::infinity();
    REQUIRE_THROWS_AS(check_finite(t, "inf"), NumericError);
    t.at(2) = std::numeric_limits<float>::quiet_NaN();
    REQUIRE_THROWS_AS(check_finite(t, "nan"), NumericError);
}

namespace {

// reference triple loop used as the GEMM oracle
template <class F>
std::vector<double> naive(int M, int N, int K, const std::vector<double>& a,
                          const std::vector<double>& b, F idx) {
    std::vector<double> c(static_cast<size_t>(M) * N, 0.0);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < K; ++k)
                c[static_cast<size_t>(i) * N + j] += idx(a, b, i, j, k);
    return c;
}

} // namespace

TEST_CASE("gemm kernels match the naive oracle") {
    Rng rng(7);
    const int M = 5, N = 7, K = 9;
    std::vector<double> A(static_cast<size_t>(M) * K), B_nn(static_cast<size_t>(K) * N),
        B_nt(static_cast<size_t>(N) * K), A_tn(static_cast<size_t>(K) * M);
    for (auto& v : A) v = rng.normal();
    for (auto& v : B_nn) v = rng.normal();
    for (auto& v : B_nt) v = rng.normal();
    for (auto& v : A_tn) v = rng.normal();

    std::vector<double> c(static_cast<size_t>(M) * N, 0.0);
    gemm_nn(M, N, K, A.data(), B_nn.data(), c.data());
    auto ref = naive(M, N, K, A, B_nn, [&](const auto& a, const auto& b, int i, int j, int k) {
        return a[static_cast<size_t>(i) * K + k] * b[static_cast<size_t>(k) * N + j];
    });
    for (size_t i = 0; i < c.size(); ++i) REQUIRE(c[i] == Catch::Approx(ref[i]).margin(1e-12));

    std::fill(c.begin(), c.end(), 0.0);
    gemm_nt(M, N, K, A.data(), B_nt.data(), c.data());
    ref = naive(M, N, K, A, B_nt, [&](const auto& a, const auto& b, int i, int j, int k) {
        return a[static_cast<size_t>(i) * K + k] * b[static_cast<size_t>(j) * K + k];
    });
    for (size_t i = 0; i < c.size(); ++i) REQUIRE(c[i] == Catch::Approx(ref[i]).margin(1e-12));

    std::fill(c.begin(), c.end(), 0.0);
    gemm_tn(M, N, K, A_tn.data(), B_nn.data(), c.data());
    ref = naive(M, N, K, A_tn, B_nn, [&](const auto& a, const auto& b, int i, int j, int k) {
        return a[static_cast<size_t>(k) * M + i] * b[static_cast<size_t>(k) * N + j];
    });
    for (size_t i = 0; i < c.size(); ++i) REQUIRE(c[i] == Catch::Approx(ref[i]).margin(1e-12));
}

TEST_CASE("rng determinism and ranges") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(r.uniform_int(7) < 7);
    }
}
