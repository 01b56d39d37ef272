#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace bflow {

/// Philox4x32-10 counter-based block cipher used as the random bit source.
///
/// Counter-based generation gives every (key, counter) pair an independent,
/// reproducible 128-bit block, so realizations can be computed in any order
/// and on any number of workers with bit-identical results.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter counter, Key key);
};

/// One logical random stream: (root seed, stream index, substream index).
///
/// The stream index selects the realization, the substream separates
/// independent draws within one realization (e.g. the potential vs. the
/// initial speckles). Draw order within a stream is sequential and fully
/// determined by the identifiers.
class RngStream {
public:
    RngStream(std::uint64_t root_seed, std::uint32_t stream, std::uint32_t substream);

    std::uint64_t root_seed() const { return root_seed_; }
    std::uint32_t stream() const { return stream_; }
    std::uint32_t substream() const { return substream_; }

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53-bit resolution.
    double next_double();

    /// Standard normal via Box-Muller (exactly two uniforms per pair).
    double next_normal();

    /// Complex circular Gaussian with E|z|^2 = 1.
    std::complex<double> next_complex_normal();

private:
    void refill();

    std::uint64_t root_seed_;
    std::uint32_t stream_;
    std::uint32_t substream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

} // namespace bflow
