#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "mcga/grid.hpp"
#include "mcga/particles.hpp"
#include "mcga/rng.hpp"

namespace mcga {

// Handling of the cross-component coupling term in the field-component
// source: drop it, or evaluate it from the exact manufactured solution.
enum class CouplingMode { neglect, exact };

inline std::string to_string(CouplingMode m) {
    return m == CouplingMode::neglect ? "neglect" : "exact";
}

inline CouplingMode coupling_mode_from_string(const std::string& s) {
    if (s == "neglect") return CouplingMode::neglect;
    if (s == "exact") return CouplingMode::exact;
    throw std::invalid_argument("unknown coupling mode: " + s);
}

struct Rect {
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

    GridSpec make_grid(int mx, int my) const {
        return GridSpec(x_min, x_max, y_min, y_max, mx, my);
    }
    GridSpec make_grid(int m) const { return make_grid(m, m); }
};

// One scalar transport problem
//   du/dt = -div(v u) + div(D grad u) + c u + s
// with Dirichlet data g, initial condition u0 and an optional exact solution.
// grad_diffusion is always supplied analytically; differentiating D
// numerically would reintroduce the noise amplification this solver avoids.
struct ProblemSpec {
    std::string name;
    Rect domain;

    std::function<double(Vec2)> diffusion;      // D(r) >= 0
    std::function<Vec2(Vec2)> grad_diffusion;   // analytic grad D, null = zero
    std::function<Vec2(Vec2)> advection;        // v(r), null = zero
    std::function<double(double, Vec2)> reaction;  // c(t,r), null = zero

    // Per-cell injection rate evaluated from the companion-field snapshot;
    // null = no injection source.
    std::function<double(double, Vec2, const SourceFieldSet&, CouplingMode)> injection;
    bool injection_uses_exact_coupling = false;

    // Full closed-form source of the manufactured problem (coupling included);
    // used by the deterministic reference solver and the residual check.
    std::function<double(double, Vec2)> source_exact;

    std::function<double(double, Vec2)> dirichlet;  // g(t,r)
    std::function<double(Vec2)> initial;            // u0(r)
    std::function<double(double, Vec2)> exact;      // optional

    // Constant-diffusion shortcut for the transport hot path.
    std::optional<double> constant_diffusion;

    double diffusion_at(Vec2 p) const {
        return constant_diffusion ? *constant_diffusion : diffusion(p);
    }
};

// Ito drift of the process whose law solves the problem PDE when paired with
// diffusion amplitude sqrt(2 D): b = v + grad D.
inline Vec2 effective_drift(const ProblemSpec& spec, Vec2 r) {
    Vec2 b{0.0, 0.0};
    if (spec.advection) {
        const Vec2 v = spec.advection(r);
        b.x += v.x;
        b.y += v.y;
    }
    if (spec.grad_diffusion) {
        const Vec2 g = spec.grad_diffusion(r);
        b.x += g.x;
        b.y += g.y;
    }
    return b;
}

// PDE residual  du/dt + div(v u) - div(D grad u) - (c u + s_exact)  of the
// spec's exact solution, evaluated with central differences of step h.
// Closed-form solutions extend smoothly past the domain edge, so no stencil
// clamping is needed.
inline double manufactured_residual(const ProblemSpec& spec, double t, Vec2 r,
                                    double h = 1e-5) {
    if (!spec.exact) throw std::invalid_argument("manufactured_residual: no exact solution");
    const auto& u = spec.exact;

    const double dudt = (u(t + h, r) - u(t - h, r)) / (2.0 * h);

    double div_vu = 0.0;
    if (spec.advection) {
        const auto vu_x = [&](double xx) {
            const Vec2 p{xx, r.y};
            return spec.advection(p).x * u(t, p);
        };
        const auto vu_y = [&](double yy) {
            const Vec2 p{r.x, yy};
            return spec.advection(p).y * u(t, p);
        };
        div_vu = (vu_x(r.x + h) - vu_x(r.x - h)) / (2.0 * h) +
                 (vu_y(r.y + h) - vu_y(r.y - h)) / (2.0 * h);
    }

    const auto flux_x = [&](double xx) {
        const Vec2 p{xx, r.y};
        const double dudx = (u(t, {xx + h, r.y}) - u(t, {xx - h, r.y})) / (2.0 * h);
        return spec.diffusion_at(p) * dudx;
    };
    const auto flux_y = [&](double yy) {
        const Vec2 p{r.x, yy};
        const double dudy = (u(t, {r.x, yy + h}) - u(t, {r.x, yy - h})) / (2.0 * h);
        return spec.diffusion_at(p) * dudy;
    };
    const double div_dgrad = (flux_x(r.x + h) - flux_x(r.x - h)) / (2.0 * h) +
                             (flux_y(r.y + h) - flux_y(r.y - h)) / (2.0 * h);

    const double c = spec.reaction ? spec.reaction(t, r) : 0.0;
    const double s = spec.source_exact ? spec.source_exact(t, r) : 0.0;

    return dudt + div_vu - div_dgrad - (c * u(t, r) + s);
}

// Max |residual| over n random interior points and random times in
// [t_lo, t_hi].
inline double max_manufactured_residual(const ProblemSpec& spec, double t_lo, double t_hi,
                                        int n_points, RngStream& rng, double h = 1e-5) {
    double worst = 0.0;
    for (int k = 0; k < n_points; ++k) {
        const Vec2 r{rng.uniform(spec.domain.x_min, spec.domain.x_max),
                     rng.uniform(spec.domain.y_min, spec.domain.y_max)};
        const double t = rng.uniform(t_lo, t_hi);
        worst = std::max(worst, std::abs(manufactured_residual(spec, t, r, h)));
    }
    return worst;
}

// Particle count, time window, step size, seed, coupling mode and replicate
// count of one run.
class RunConfig {
  public:
    RunConfig(long long n, double t0, double t_star, double dt, std::uint64_t seed,
              CouplingMode mode = CouplingMode::neglect, int replicates = 1)
        : n_(n), t0_(t0), t_star_(t_star), dt_(dt), seed_(seed), mode_(mode),
          replicates_(replicates) {
        if (n < 1) throw std::invalid_argument("RunConfig: N must be positive");
        if (!(t0 < t_star)) throw std::invalid_argument("RunConfig: t0 must precede T*");
        if (!(dt > 0.0)) throw std::invalid_argument("RunConfig: dt must be positive");
        if (replicates < 1) throw std::invalid_argument("RunConfig: replicates must be positive");
        const double ratio = (t_star - t0) / dt;
        steps_ = std::llround(ratio);
        if (steps_ < 1 || std::abs(ratio - static_cast<double>(steps_)) > 1e-9)
            throw std::invalid_argument("RunConfig: (T*-t0)/dt must be a positive integer");
    }

    long long particle_count() const { return n_; }
    double t0() const { return t0_; }
    double t_star() const { return t_star_; }
    double dt() const { return dt_; }
    std::uint64_t seed() const { return seed_; }
    CouplingMode coupling_mode() const { return mode_; }
    int replicates() const { return replicates_; }
    long long step_count() const { return steps_; }

  private:
    long long n_;
    double t0_, t_star_, dt_;
    std::uint64_t seed_;
    CouplingMode mode_;
    int replicates_;
    long long steps_;
};

}  // namespace mcga
