#include "conc/kernels/kernels.hpp"

#include <cmath>

namespace conc::kernels::scalar {

double sum(std::span<const double> x) noexcept {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
}

double dot(std::span<const double> x, std::span<const double> y) noexcept {
    double acc = 0.0;
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sumsq(std::span<const double> x) noexcept {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

double rank_weighted_sum(std::span<const double> x) noexcept {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
        acc += static_cast<double>(i + 1) * x[i];
    return acc;
}

double neg_xlogx_sum(std::span<const double> x) noexcept {
    double acc = 0.0;
    for (double v : x) acc -= v * std::log(v);
    return acc;
}

void subtract_scalar(std::span<const double> x, double c, std::span<double> out) noexcept {
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out[i] = x[i] - c;
}

void scale(std::span<const double> x, double c, std::span<double> out) noexcept {
    const size_t n = x.size();
    for (size_t i = 0; i < n; ++i) out[i] = x[i] * c;
}

}  // namespace conc::kernels::scalar
