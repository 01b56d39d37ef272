#pragma once

#include <complex>
#include <cstddef>
#include <mutex>

namespace bflow::fft {

/// FFTW plan creation/destruction is not thread-safe; all wrappers serialize
/// through this mutex. Execution on distinct plans is safe concurrently.
std::mutex& planner_mutex();

/// Signed FFT frequency index for bin i of an n-point transform.
inline long freq_index(std::size_t i, std::size_t n) {
    return static_cast<long>(i) <= static_cast<long>(n) / 2 ? static_cast<long>(i)
                                                            : static_cast<long>(i) - static_cast<long>(n);
}

/// Angular wavenumber of bin i on a grid with spacing dx.
inline double wavenumber(std::size_t i, std::size_t n, double dx) {
    return 2.0 * M_PI * static_cast<double>(freq_index(i, n)) /
           (static_cast<double>(n) * dx);
}

/// In-place complex-to-complex 1D transform pair on an owned aligned buffer.
/// Transforms are unnormalized (FFTW convention).
class Complex1d {
public:
    explicit Complex1d(std::size_t n);
    ~Complex1d();
    Complex1d(const Complex1d&) = delete;
    Complex1d& operator=(const Complex1d&) = delete;

    std::size_t size() const { return n_; }
    std::complex<double>* data() { return data_; }
    const std::complex<double>* data() const { return data_; }

    void forward();
    void backward();

private:
    std::size_t n_;
    std::complex<double>* data_;
    void* fwd_;
    void* bwd_;
};

/// In-place complex-to-complex 2D transform pair (row-major n0 x n1).
class Complex2d {
public:
    Complex2d(std::size_t n0, std::size_t n1);
    ~Complex2d();
    Complex2d(const Complex2d&) = delete;
    Complex2d& operator=(const Complex2d&) = delete;

    std::size_t rows() const { return n0_; }
    std::size_t cols() const { return n1_; }
    std::complex<double>* data() { return data_; }
    const std::complex<double>* data() const { return data_; }

    void forward();
    void backward();

private:
    std::size_t n0_, n1_;
    std::complex<double>* data_;
    void* fwd_;
    void* bwd_;
};

/// Single-precision complex-to-real 2D transform used by the Gaussian field
/// synthesis (half-spectrum in, real field out). Out-of-place, unnormalized.
class HalfSpectrumToReal2f {
public:
    HalfSpectrumToReal2f(std::size_t n0, std::size_t n1);
    ~HalfSpectrumToReal2f();
    HalfSpectrumToReal2f(const HalfSpectrumToReal2f&) = delete;
    HalfSpectrumToReal2f& operator=(const HalfSpectrumToReal2f&) = delete;

    std::size_t rows() const { return n0_; }
    std::size_t cols() const { return n1_; }
    std::size_t spec_cols() const { return n1_ / 2 + 1; }
    std::complex<float>* spectrum() { return spec_; }
    float* real_out() { return out_; }

    /// Executes c2r; the spectrum buffer is destroyed by FFTW in the process.
    void execute();

private:
    std::size_t n0_, n1_;
    std::complex<float>* spec_;
    float* out_;
    void* plan_;
};

/// Double-precision r2c/c2r pair of length n sharing owned buffers, for
/// spectral derivatives of real rows.
class Real1d {
public:
    explicit Real1d(std::size_t n);
    ~Real1d();
    Real1d(const Real1d&) = delete;
    Real1d& operator=(const Real1d&) = delete;

    std::size_t size() const { return n_; }
    double* real_data() { return real_; }
    std::complex<double>* spectrum() { return spec_; }

    void forward();  // r2c
    void backward(); // c2r (destroys the spectrum buffer)

private:
    std::size_t n_;
    double* real_;
    std::complex<double>* spec_;
    void* fwd_;
    void* bwd_;
};

} // namespace bflow::fft
