#include "bflow/fft.hpp"

#include <fftw3.h>

#include <stdexcept>

namespace bflow::fft {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

namespace {

// FFTW_ESTIMATE keeps plan selection deterministic (no runtime measurement),
// which the bit-identical reproducibility contract relies on.
constexpr unsigned kFlags = FFTW_ESTIMATE;

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }
fftwf_complex* as_fftwf(std::complex<float>* p) { return reinterpret_cast<fftwf_complex*>(p); }

} // namespace

// ============================================================================
// Complex1d
// ============================================================================

Complex1d::Complex1d(std::size_t n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    data_ = reinterpret_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!data_) throw std::bad_alloc();
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(data_), as_fftw(data_), FFTW_FORWARD,
                            kFlags);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(data_), as_fftw(data_), FFTW_BACKWARD,
                            kFlags);
}

Complex1d::~Complex1d() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(data_);
}

void Complex1d::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }
void Complex1d::backward() { fftw_execute(static_cast<fftw_plan>(bwd_)); }

// ============================================================================
// Complex2d
// ============================================================================

Complex2d::Complex2d(std::size_t n0, std::size_t n1) : n0_(n0), n1_(n1) {
    std::lock_guard lock(planner_mutex());
    data_ = reinterpret_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * n0 * n1));
    if (!data_) throw std::bad_alloc();
    fwd_ = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), as_fftw(data_),
                            as_fftw(data_), FFTW_FORWARD, kFlags);
    bwd_ = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), as_fftw(data_),
                            as_fftw(data_), FFTW_BACKWARD, kFlags);
}

Complex2d::~Complex2d() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(data_);
}

void Complex2d::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }
void Complex2d::backward() { fftw_execute(static_cast<fftw_plan>(bwd_)); }

// ============================================================================
// HalfSpectrumToReal2f
// ============================================================================

HalfSpectrumToReal2f::HalfSpectrumToReal2f(std::size_t n0, std::size_t n1) : n0_(n0), n1_(n1) {
    std::lock_guard lock(planner_mutex());
    spec_ = reinterpret_cast<std::complex<float>*>(
        fftwf_malloc(sizeof(fftwf_complex) * n0 * (n1 / 2 + 1)));
    out_ = static_cast<float*>(fftwf_malloc(sizeof(float) * n0 * n1));
    if (!spec_ || !out_) throw std::bad_alloc();
    plan_ = fftwf_plan_dft_c2r_2d(static_cast<int>(n0), static_cast<int>(n1), as_fftwf(spec_),
                                  out_, kFlags);
}

HalfSpectrumToReal2f::~HalfSpectrumToReal2f() {
    std::lock_guard lock(planner_mutex());
    fftwf_destroy_plan(static_cast<fftwf_plan>(plan_));
    fftwf_free(spec_);
    fftwf_free(out_);
}

void HalfSpectrumToReal2f::execute() { fftwf_execute(static_cast<fftwf_plan>(plan_)); }

// ============================================================================
// Real1d
// ============================================================================

Real1d::Real1d(std::size_t n) : n_(n) {
    std::lock_guard lock(planner_mutex());
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    spec_ = reinterpret_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    if (!real_ || !spec_) throw std::bad_alloc();
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, as_fftw(spec_), kFlags);
    bwd_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), as_fftw(spec_), real_, kFlags);
}

Real1d::~Real1d() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(real_);
    fftw_free(spec_);
}

void Real1d::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }
void Real1d::backward() { fftw_execute(static_cast<fftw_plan>(bwd_)); }

} // namespace bflow::fft
