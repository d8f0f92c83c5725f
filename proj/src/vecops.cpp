#include "finq/vecops.hpp"

#include "finq/errors.hpp"

#include <atomic>
#include <cmath>

namespace finq::vec {

namespace detail {

float dot_scalar(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

float norm_sq_scalar(const float* v, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        acc += v[i] * v[i];
    }
    return acc;
}

} // namespace detail

namespace {

using DotFn = float (*)(const float*, const float*, std::size_t);
using NormFn = float (*)(const float*, std::size_t);

struct Kernels {
    DotFn dot;
    NormFn norm_sq;
    std::string_view name;
};

constexpr Kernels kScalar{detail::dot_scalar, detail::norm_sq_scalar, "scalar"};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Kernels kAvx2{detail::dot_avx2, detail::norm_sq_avx2, "avx2"};

bool cpu_has_avx2() {
    return __builtin_cpu_supports("avx2") != 0;
}
#endif

const Kernels& detect() {
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) {
        return kAvx2;
    }
#endif
    return kScalar;
}

std::atomic<const Kernels*> g_active{nullptr};

const Kernels& active() {
    const Kernels* k = g_active.load(std::memory_order_acquire);
    if (k == nullptr) {
        k = &detect();
        g_active.store(k, std::memory_order_release);
    }
    return *k;
}

} // namespace

float dot(std::span<const float> a, std::span<const float> b) {
    return active().dot(a.data(), b.data(), std::min(a.size(), b.size()));
}

float l2_norm_squared(std::span<const float> v) {
    return active().norm_sq(v.data(), v.size());
}

float l2_norm(std::span<const float> v) {
    return std::sqrt(l2_norm_squared(v));
}

bool normalize(std::span<float> v) {
    const float norm = l2_norm(v);
    if (!(norm > 0.0f) || !std::isfinite(norm)) {
        return false;
    }
    const float inv = 1.0f / norm;
    for (float& x : v) {
        x *= inv;
    }
    return true;
}

std::string_view active_backend() {
    return active().name;
}

void force_backend(std::string_view name) {
    if (name == "auto") {
        g_active.store(&detect(), std::memory_order_release);
        return;
    }
    if (name == "scalar") {
        g_active.store(&kScalar, std::memory_order_release);
        return;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2") {
        if (!cpu_has_avx2()) {
            raise(ErrorCode::InvalidParameter, "kernels", "avx2 not supported on this CPU");
        }
        g_active.store(&kAvx2, std::memory_order_release);
        return;
    }
#endif
    raise(ErrorCode::InvalidParameter, "kernels", "unknown kernel backend: " + std::string(name));
}

} // namespace finq::vec
