#include "conc/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace conc::kernels {

namespace {

struct Vtable {
    double (*sum)(std::span<const double>) noexcept;
    double (*dot)(std::span<const double>, std::span<const double>) noexcept;
    double (*sumsq)(std::span<const double>) noexcept;
    double (*rank_weighted_sum)(std::span<const double>) noexcept;
    double (*neg_xlogx_sum)(std::span<const double>) noexcept;
    void (*subtract_scalar)(std::span<const double>, double, std::span<double>) noexcept;
    void (*scale)(std::span<const double>, double, std::span<double>) noexcept;
};

constexpr Vtable kScalarTable{
    scalar::sum,    scalar::dot,
    scalar::sumsq,  scalar::rank_weighted_sum,
    scalar::neg_xlogx_sum, scalar::subtract_scalar,
    scalar::scale,
};

#if defined(CONC_KERNELS_HAVE_AVX2)
constexpr Vtable kAvx2Table{
    avx2::sum,    avx2::dot,
    avx2::sumsq,  avx2::rank_weighted_sum,
    avx2::neg_xlogx_sum, avx2::subtract_scalar,
    avx2::scale,
};

bool cpu_has_avx2() noexcept {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

Isa pick_startup_isa() noexcept {
    const char* forced = std::getenv("CONC_SIMD");
#if defined(CONC_KERNELS_HAVE_AVX2)
    if (forced != nullptr) {
        if (std::strcmp(forced, "scalar") == 0) return Isa::Scalar;
        if (std::strcmp(forced, "avx2") == 0 && cpu_has_avx2()) return Isa::Avx2;
        return Isa::Scalar;
    }
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
#else
    (void)forced;
    return Isa::Scalar;
#endif
}

struct Dispatch {
    Isa isa;
    const Vtable* table;
    Dispatch() noexcept : isa(pick_startup_isa()) { table = table_for(isa); }
    static const Vtable* table_for(Isa isa) noexcept {
#if defined(CONC_KERNELS_HAVE_AVX2)
        if (isa == Isa::Avx2) return &kAvx2Table;
#else
        (void)isa;
#endif
        return &kScalarTable;
    }
};

Dispatch& dispatch() noexcept {
    static Dispatch d;
    return d;
}

}  // namespace

Isa active_isa() noexcept { return dispatch().isa; }

const char* isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::Avx2: return "avx2";
        case Isa::Scalar: return "scalar";
    }
    return "scalar";
}

Isa select_isa(Isa isa) noexcept {
#if defined(CONC_KERNELS_HAVE_AVX2)
    if (isa == Isa::Avx2 && !cpu_has_avx2()) isa = Isa::Scalar;
#else
    isa = Isa::Scalar;
#endif
    Dispatch& d = dispatch();
    const Isa prev = d.isa;
    d.isa = isa;
    d.table = Dispatch::table_for(isa);
    return prev;
}

double sum(std::span<const double> x) noexcept { return dispatch().table->sum(x); }

double dot(std::span<const double> x, std::span<const double> y) noexcept {
    return dispatch().table->dot(x, y);
}

double sumsq(std::span<const double> x) noexcept { return dispatch().table->sumsq(x); }

double rank_weighted_sum(std::span<const double> x) noexcept {
    return dispatch().table->rank_weighted_sum(x);
}

double neg_xlogx_sum(std::span<const double> x) noexcept {
    return dispatch().table->neg_xlogx_sum(x);
}

void subtract_scalar(std::span<const double> x, double c, std::span<double> out) noexcept {
    dispatch().table->subtract_scalar(x, c, out);
}

void scale(std::span<const double> x, double c, std::span<double> out) noexcept {
    dispatch().table->scale(x, c, out);
}

}  // namespace conc::kernels
