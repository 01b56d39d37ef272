#include "bflow/paraxial.hpp"

#include "bflow/errors.hpp"
#include "bflow/fft.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bflow {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr double kAlignTol = 1e-9;

long nearest_index(double value, double origin, double step) {
    return std::lround((value - origin) / step);
}

} // namespace

double TransverseGrid::x(std::size_t i) const {
    return dx * static_cast<double>(fft::freq_index(i, n));
}

double TransverseGrid::k(std::size_t i) const { return fft::wavenumber(i, n, dx); }

void TransverseGrid::validate() const {
    if (!is_power_of_two(n)) throw ConfigError("TransverseGrid: n must be a power of two");
    if (!(dx > 0.0) || dx > 0.5 + 1e-12)
        throw ConfigError("TransverseGrid: dx must satisfy 0 < dx <= 1/2 (spectral cutoff >= 2 pi)");
}

double WaveState::norm() const {
    double acc = 0.0;
    for (const auto& c : psi) acc += std::norm(c);
    return acc * grid.dx;
}

std::vector<double> intensity(const WaveState& state) {
    std::vector<double> out(state.psi.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::norm(state.psi[i]);
    return out;
}

PotentialField zero_potential(const TransverseGrid& grid, double dz, double z_extent) {
    GridSpec2D g;
    g.nx = grid.n;
    g.dx = grid.dx;
    g.dz = dz;
    g.z0 = dz / 2.0;
    g.nz = static_cast<std::size_t>(std::ceil(z_extent / dz)) + 1;
    return PotentialField(g, std::vector<float>(g.nz * g.nx, 0.0f), SeedRecord{});
}

namespace {

class Stepper {
public:
    Stepper(const WaveState& initial, const PotentialField& pot, const StepPlan& plan,
            double alpha)
        : grid_(initial.grid), pot_(pot), plan_(plan), fft_(initial.grid.n) {
        grid_.validate();
        if (initial.psi.size() != grid_.n) throw ConfigError("propagate: psi size != grid size");
        if (!(plan.dz > 0.0)) throw ConfigError("propagate: dz must be positive");
        if (pot.nx() != grid_.n || std::abs(pot.dx() - grid_.dx) > kAlignTol)
            throw ConfigError("propagate: potential and state grids do not coincide");
        if (plan.z_out.empty()) throw ConfigError("propagate: empty output schedule");
        if (!std::is_sorted(plan.z_out.begin(), plan.z_out.end()))
            throw ConfigError("propagate: output schedule must be sorted");

        z0_ = initial.z;
        for (double zo : plan.z_out) {
            const long m = nearest_index(zo, z0_, plan.dz);
            if (m < 0 || std::abs(z0_ + static_cast<double>(m) * plan.dz - zo) > kAlignTol * plan.dz)
                throw ConfigError("propagate: scheduled z does not lie on the step lattice");
            out_steps_.push_back(static_cast<std::size_t>(m));
        }
        total_steps_ = out_steps_.back();

        // Midpoint plane of step m: z0 + (m + 1/2) dz must be a potential plane.
        plane_stride_ = plan.dz / pot.dz();
        const double stride_err = std::abs(plane_stride_ - std::round(plane_stride_));
        if (stride_err > kAlignTol)
            throw ConfigError("propagate: potential dz must integer-divide the step dz");
        const double first_mid = z0_ + plan.dz / 2.0;
        plane0_ = nearest_index(first_mid, pot.z0(), pot.dz());
        if (plane0_ < 0 ||
            std::abs(pot.z0() + static_cast<double>(plane0_) * pot.dz() - first_mid) >
                kAlignTol * plan.dz)
            throw ConfigError("propagate: potential planes are not aligned with step midpoints");
        const long last_plane =
            plane0_ + static_cast<long>(std::round(plane_stride_)) *
                          (static_cast<long>(total_steps_) - 1);
        if (total_steps_ > 0 && last_plane >= static_cast<long>(pot.nz()))
            throw ConfigError("propagate: schedule extends beyond the potential extent");

        kin_.resize(grid_.n);
        const double scale = 1.0 / static_cast<double>(grid_.n);
        for (std::size_t i = 0; i < grid_.n; ++i) {
            const double k = grid_.k(i);
            kin_[i] = std::polar(scale, -alpha * k * k * plan.dz);
        }
        if (plan.absorber_fraction > 0.0) build_absorber();
    }

    void run(const WaveState& initial, const std::function<void(const WaveState&)>& sink) {
        std::copy(initial.psi.begin(), initial.psi.end(), fft_.data());
        norm0_ = initial.norm();

        std::size_t next_out = 0;
        auto emit = [&](std::size_t step) {
            while (next_out < out_steps_.size() && out_steps_[next_out] == step) {
                state_.grid = grid_;
                state_.z = z0_ + static_cast<double>(step) * plan_.dz;
                state_.psi.assign(fft_.data(), fft_.data() + grid_.n);
                check_health(state_, step);
                sink(state_);
                ++next_out;
            }
        };
        emit(0);

        const bool strang = plan_.order == SplitOrder::strang;
        bool half_open = false;
        for (std::size_t m = 0; m < total_steps_; ++m) {
            const float* v = plane(m);
            if (strang) {
                if (!half_open) apply_phase(v, plan_.dz / 2.0);
            } else {
                apply_phase(v, plan_.dz);
            }
            fft_.forward();
            auto* psi = fft_.data();
            for (std::size_t i = 0; i < grid_.n; ++i) psi[i] *= kin_[i];
            fft_.backward();

            const std::size_t done = m + 1;
            const bool out_here =
                next_out < out_steps_.size() && out_steps_[next_out] == done;
            if (strang) {
                if (out_here || done == total_steps_) {
                    apply_phase(v, plan_.dz / 2.0);
                    half_open = false;
                } else {
                    // fuse the trailing half of this step with the leading half
                    // of the next one (a single pointwise pass)
                    apply_phase_pair(v, plane(done), plan_.dz / 2.0);
                    half_open = true;
                }
            }
            if (!absorber_.empty()) {
                for (std::size_t i = 0; i < grid_.n; ++i) fft_.data()[i] *= absorber_[i];
            }
            if (out_here) emit(done);
        }
    }

private:
    const float* plane(std::size_t step) const {
        const auto idx = static_cast<std::size_t>(
            plane0_ + static_cast<long>(std::round(plane_stride_)) * static_cast<long>(step));
        return pot_.row(idx);
    }

    void apply_phase(const float* v, double dt) {
        auto* psi = fft_.data();
        for (std::size_t i = 0; i < grid_.n; ++i)
            psi[i] *= std::polar(1.0, -static_cast<double>(v[i]) * dt);
    }

    void apply_phase_pair(const float* va, const float* vb, double dt) {
        auto* psi = fft_.data();
        for (std::size_t i = 0; i < grid_.n; ++i)
            psi[i] *= std::polar(1.0, -(static_cast<double>(va[i]) + static_cast<double>(vb[i])) * dt);
    }

    void build_absorber() {
        absorber_.resize(grid_.n);
        const double w = plan_.absorber_fraction * grid_.window();
        const double half = grid_.window() / 2.0;
        for (std::size_t i = 0; i < grid_.n; ++i) {
            const double d = half - std::abs(grid_.x(i));
            absorber_[i] = d >= w ? 1.0 : std::pow(std::sin(0.5 * M_PI * d / w), 2);
        }
    }

    void check_health(const WaveState& s, std::size_t step) const {
        const double n = s.norm();
        if (!std::isfinite(n)) {
            std::ostringstream msg;
            msg << "propagate: non-finite field at step " << step << " (z = " << s.z << ")";
            throw NumericalError(msg.str());
        }
        if (absorber_.empty() && plan_.order == SplitOrder::strang &&
            std::abs(n - norm0_) > 1e-8 * norm0_) {
            std::ostringstream msg;
            msg << "propagate: norm drift " << std::abs(n - norm0_) / norm0_ << " at step "
                << step;
            throw NumericalError(msg.str());
        }
    }

    TransverseGrid grid_;
    const PotentialField& pot_;
    const StepPlan& plan_;
    fft::Complex1d fft_;
    std::vector<std::complex<double>> kin_;
    std::vector<double> absorber_;
    std::vector<std::size_t> out_steps_;
    std::size_t total_steps_ = 0;
    double z0_ = 0.0;
    double norm0_ = 0.0;
    long plane0_ = 0;
    double plane_stride_ = 1.0;
    WaveState state_;
};

} // namespace

void propagate(const WaveState& initial, const PotentialField& potential, const StepPlan& plan,
               double alpha, const std::function<void(const WaveState&)>& sink) {
    Stepper stepper(initial, potential, plan, alpha);
    stepper.run(initial, sink);
}

std::vector<WaveState> propagate(const WaveState& initial, const PotentialField& potential,
                                 const StepPlan& plan, double alpha) {
    std::vector<WaveState> out;
    propagate(initial, potential, plan, alpha, [&](const WaveState& s) { out.push_back(s); });
    return out;
}

} // namespace bflow
