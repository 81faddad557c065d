#pragma once

#include <cstddef>
#include <span>

// Arithmetic inner loops used by the analytics modules. Every kernel has a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant.
// Dispatch is resolved once at startup from CPUID; CONC_SIMD=scalar|avx2 in
// the environment forces a lane. Scalar and SIMD variants are
// equivalence-tested against each other in tests/test_kernels.cpp.
//
// Results are deterministic for a fixed lane: re-running the same binary on
// the same machine reproduces every bit. Lanes may differ from each other in
// the last few ulps (different accumulation order), which is why callers
// never mix lanes within one computation.

namespace conc::kernels {

enum class Isa { Scalar, Avx2 };

Isa active_isa() noexcept;
const char* isa_name(Isa isa) noexcept;

/// Force a lane (used by the equivalence tests). Returns the previous lane.
/// Requesting an unsupported lane falls back to scalar.
Isa select_isa(Isa isa) noexcept;

double sum(std::span<const double> x) noexcept;
double dot(std::span<const double> x, std::span<const double> y) noexcept;
double sumsq(std::span<const double> x) noexcept;

/// Sum of (i+1) * x[i] (1-based ranks); the sorted-Gini accumulator.
double rank_weighted_sum(std::span<const double> x) noexcept;

/// Sum of -x * ln(x). Caller guarantees every element is > 0.
double neg_xlogx_sum(std::span<const double> x) noexcept;

void subtract_scalar(std::span<const double> x, double c, std::span<double> out) noexcept;
void scale(std::span<const double> x, double c, std::span<double> out) noexcept;

// Reference implementations (always available, any architecture).
namespace scalar {
double sum(std::span<const double> x) noexcept;
double dot(std::span<const double> x, std::span<const double> y) noexcept;
double sumsq(std::span<const double> x) noexcept;
double rank_weighted_sum(std::span<const double> x) noexcept;
double neg_xlogx_sum(std::span<const double> x) noexcept;
void subtract_scalar(std::span<const double> x, double c, std::span<double> out) noexcept;
void scale(std::span<const double> x, double c, std::span<double> out) noexcept;
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define CONC_KERNELS_HAVE_AVX2 1
namespace avx2 {
double sum(std::span<const double> x) noexcept;
double dot(std::span<const double> x, std::span<const double> y) noexcept;
double sumsq(std::span<const double> x) noexcept;
double rank_weighted_sum(std::span<const double> x) noexcept;
double neg_xlogx_sum(std::span<const double> x) noexcept;
void subtract_scalar(std::span<const double> x, double c, std::span<double> out) noexcept;
void scale(std::span<const double> x, double c, std::span<double> out) noexcept;
}  // namespace avx2
#endif

}  // namespace conc::kernels
