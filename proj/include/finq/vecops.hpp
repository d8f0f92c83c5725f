#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace finq::vec {

/// Dense f32 kernels behind the similarity math. A scalar reference
/// implementation always exists; an AVX2 variant is compiled on x86-64 and
/// selected at runtime when the CPU supports it. Both variants are
/// equivalence-tested against each other.

float dot(std::span<const float> a, std::span<const float> b);
float l2_norm_squared(std::span<const float> v);
float l2_norm(std::span<const float> v);

/// Scales v so its L2 norm is 1. Returns false (v untouched) for a zero vector.
bool normalize(std::span<float> v);

/// Name of the kernel set currently dispatched: "avx2" or "scalar".
std::string_view active_backend();

/// Test hook: force a specific backend ("avx2", "scalar", "auto").
/// Throws InvalidParameter for unknown names or unsupported hardware.
void force_backend(std::string_view name);

namespace detail {
float dot_scalar(const float* a, const float* b, std::size_t n);
float norm_sq_scalar(const float* v, std::size_t n);
#if defined(__x86_64__) || defined(_M_X64)
float dot_avx2(const float* a, const float* b, std::size_t n);
float norm_sq_avx2(const float* v, std::size_t n);
#endif
} // namespace detail

} // namespace finq::vec
