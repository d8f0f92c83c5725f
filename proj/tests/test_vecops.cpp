#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "finq/errors.hpp"
#include "finq/vecops.hpp"

using namespace finq;

namespace {

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) {
        x = dist(rng);
    }
    return v;
}

// Independent reference: accumulate in double, sequentially.
double dot_reference(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

struct BackendGuard {
    ~BackendGuard() { vec::force_backend("auto"); }
};

} // namespace

TEST_CASE("dot and norm match a double-precision reference") {
    std::mt19937_64 rng(7);
    for (std::size_t n : {1u, 2u, 7u, 8u, 9u, 31u, 32u, 33u, 256u, 1000u}) {
        const auto a = random_vector(rng, n);
        const auto b = random_vector(rng, n);
        const double expected = dot_reference(a, b);
        // fp32 accumulation error grows with n; scale the tolerance.
        const double tol = 1e-4 * static_cast<double>(n);
        CHECK(std::abs(vec::dot(a, b) - expected) <= tol);
        CHECK(std::abs(vec::l2_norm_squared(a) - dot_reference(a, a)) <= tol);
        CHECK(vec::l2_norm(a) == doctest::Approx(std::sqrt(dot_reference(a, a))).epsilon(1e-4));
    }
}

TEST_CASE("scalar and avx2 kernels agree") {
    if (vec::active_backend() != "avx2") {
        return; // no AVX2 on this machine; dispatch test is moot
    }
    BackendGuard guard;
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 700);
        const auto a = random_vector(rng, n);
        const auto b = random_vector(rng, n);

        vec::force_backend("scalar");
        REQUIRE(vec::active_backend() == "scalar");
        const float dot_scalar = vec::dot(a, b);
        const float norm_scalar = vec::l2_norm_squared(a);

        vec::force_backend("avx2");
        REQUIRE(vec::active_backend() == "avx2");
        const float dot_avx2 = vec::dot(a, b);
        const float norm_avx2 = vec::l2_norm_squared(a);

        const double tol = 1e-4 * static_cast<double>(n);
        CHECK(std::abs(static_cast<double>(dot_scalar) - dot_avx2) <= tol);
        CHECK(std::abs(static_cast<double>(norm_scalar) - norm_avx2) <= tol);
    }
}

TEST_CASE("direct kernel entry points agree with each other") {
#if defined(__x86_64__)
    std::mt19937_64 rng(13);
    const auto a = random_vector(rng, 256);
    const auto b = random_vector(rng, 256);
    const float s = vec::detail::dot_scalar(a.data(), b.data(), a.size());
    const float v = vec::detail::dot_avx2(a.data(), b.data(), a.size());
    CHECK(std::abs(s - v) <= 1e-2f);
    CHECK(std::abs(vec::detail::norm_sq_scalar(a.data(), a.size()) -
                   vec::detail::norm_sq_avx2(a.data(), a.size())) <= 1e-2f);
#endif
}

TEST_CASE("normalize produces unit vectors and rejects zero input") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 20; ++round) {
        auto v = random_vector(rng, 64);
        REQUIRE(vec::normalize(v));
        CHECK(std::abs(vec::l2_norm(v) - 1.0f) <= 1e-5f);
    }

    std::vector<float> zero(16, 0.0f);
    CHECK_FALSE(vec::normalize(zero));
    for (float x : zero) {
        CHECK(x == 0.0f);
    }
}

TEST_CASE("dot of a vector with itself equals its squared norm") {
    std::mt19937_64 rng(19);
    const auto v = random_vector(rng, 200);
    CHECK(vec::dot(v, v) == doctest::Approx(vec::l2_norm_squared(v)).epsilon(1e-6));
}

TEST_CASE("force_backend validates its argument") {
    BackendGuard guard;
    CHECK_THROWS_AS(vec::force_backend("neon"), Error);
    try {
        vec::force_backend("neon");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidParameter);
    }
    vec::force_backend("auto");
    CHECK((vec::active_backend() == "avx2" || vec::active_backend() == "scalar"));
}
