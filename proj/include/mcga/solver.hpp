#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "mcga/particles.hpp"
#include "mcga/problem.hpp"
#include "mcga/problems.hpp"
#include "mcga/rng.hpp"
#include "mcga/sources.hpp"
#include "mcga/transport.hpp"

namespace mcga {

// Knobs of the particle machinery that are not part of the physical problem.
struct SolverOptions {
    int n_per_cell = 4;            // injection particles per cell per step
    double w_cap = 0.25;           // roulette threshold, fraction of median |w|
    // Invoke population control only above this multiple of N; 0 runs it
    // every step. Per-step control thins injected low-weight particles while
    // the weight median is still set by the transport population, so the
    // count reduction never falls to position-averaging merges.
    double pop_cap_factor = 0.0;
    long long trailing_window = 0; // 0 = report the final-time estimate only
};

enum class FieldTag : std::uint64_t { phi = 0, ex = 1, ey = 2 };

// Stream discipline: every (seed, replicate, field) triple owns a distinct
// stream, so replicates parallelize and reruns are bit-identical regardless
// of scheduling.
inline RngStream make_field_stream(std::uint64_t seed, int replicate, FieldTag field) {
    return RngStream(seed,
                     static_cast<std::uint64_t>(replicate) * 8u + static_cast<std::uint64_t>(field));
}

struct McgaResult {
    ScalarField phi;
    ScalarField ex;
    ScalarField ey;
};

// Final particle states, filled on request (snapshot dumps).
struct FinalEnsembles {
    ParticleEnsemble phi;
    ParticleEnsemble ex;
    ParticleEnsemble ey;
};

// Per-cell magnitude sqrt(ex^2 + ey^2) of the estimated field.
inline ScalarField field_norm(const ScalarField& ex, const ScalarField& ey) {
    if (!(ex.grid() == ey.grid()))
        throw std::invalid_argument("field_norm: fields on different grids");
    ScalarField out(ex.grid());
    for (std::size_t c = 0; c < out.values().size(); ++c)
        out.values()[c] = std::hypot(ex.values()[c], ey.values()[c]);
    return out;
}

namespace detail {

struct FieldSolver {
    const ProblemSpec* spec;
    GridSpec grid;
    long long n_target;
    SolverOptions opt;
    RngStream rng;
    ParticleEnsemble ensemble;
    double mass_scale = 0.0;

    FieldSolver(const ProblemSpec& s, const GridSpec& g, long long n, const SolverOptions& o,
                RngStream stream)
        : spec(&s), grid(g), n_target(n), opt(o), rng(stream) {
        ensemble = sample_initial(*spec, grid, n_target, rng);
        mass_scale = initial_abs_mass(*spec, grid);
    }

    // transport -> reaction -> injection -> boundary -> population control
    void advance(double t, double dt, const SourceFieldSet* snapshot, CouplingMode mode,
                 long long step_index) {
        transport_step(ensemble, *spec, dt, rng);
        apply_reaction(ensemble, *spec, t, dt, grid);
        if (spec->injection) {
            if (!snapshot)
                throw std::logic_error("field solver: injection source requires a snapshot");
            const ScalarField rate = evaluate_injection(*spec, *snapshot, mode, grid, t);
            inject(ensemble, rate, dt, opt.n_per_cell, rng);
        }
        apply_boundary(ensemble, *spec, grid, t + dt, n_target, mass_scale, rng);
        if (opt.pop_cap_factor <= 0.0 ||
            static_cast<double>(ensemble.size()) >
                opt.pop_cap_factor * static_cast<double>(n_target))
            control_population(ensemble, grid, opt.w_cap, n_target, rng);
        for (double w : ensemble.w)
            if (!std::isfinite(w))
                throw std::runtime_error(spec->name + ": non-finite weight after step " +
                                         std::to_string(step_index));
    }
};

inline void check_domain(const ProblemSpec& spec, const GridSpec& grid) {
    const Rect& d = spec.domain;
    if (d.x_min != grid.x_min() || d.x_max != grid.x_max() || d.y_min != grid.y_min() ||
        d.y_max != grid.y_max())
        throw std::invalid_argument(spec.name + ": problem domain does not match grid");
}

// Mean of per-step estimates over the trailing window (identity for w = 1).
class TrailingAverage {
  public:
    TrailingAverage(const GridSpec& grid, long long window, long long total_steps)
        : window_(std::min(window, total_steps)), first_step_(total_steps - window_),
          sum_(grid) {}

    bool active() const { return window_ > 0; }
    bool wants(long long step) const { return active() && step >= first_step_; }

    void accumulate(const ScalarField& estimate) {
        for (std::size_t c = 0; c < sum_.values().size(); ++c)
            sum_.values()[c] += estimate.values()[c];
        ++count_;
    }

    ScalarField average() const {
        ScalarField out = sum_;
        for (double& v : out.values()) v /= static_cast<double>(count_);
        return out;
    }

  private:
    long long window_;
    long long first_step_;
    ScalarField sum_;
    long long count_ = 0;
};

}  // namespace detail

// Coupled three-field solve of phi, E_x and E_y in lockstep. Each step
// publishes a snapshot of all three field estimates (Jacobi-style coupling,
// so the per-field updates are order-independent), then advances every field
// through the full splitting pipeline. The cross-component coupling term is
// handled per config.coupling_mode.
inline McgaResult run_mcga(const ProblemTriplet& problems, const GridSpec& grid,
                           const RunConfig& config, const SolverOptions& opt = {},
                           int replicate = 0, FinalEnsembles* final_ensembles = nullptr) {
    detail::check_domain(problems.phi, grid);
    detail::check_domain(problems.ex, grid);
    detail::check_domain(problems.ey, grid);

    const long long n = config.particle_count();
    detail::FieldSolver phi(problems.phi, grid, n, opt,
                            make_field_stream(config.seed(), replicate, FieldTag::phi));
    detail::FieldSolver ex(problems.ex, grid, n, opt,
                           make_field_stream(config.seed(), replicate, FieldTag::ex));
    detail::FieldSolver ey(problems.ey, grid, n, opt,
                           make_field_stream(config.seed(), replicate, FieldTag::ey));

    const long long steps = config.step_count();
    detail::TrailingAverage avg_phi(grid, opt.trailing_window, steps);
    detail::TrailingAverage avg_ex(grid, opt.trailing_window, steps);
    detail::TrailingAverage avg_ey(grid, opt.trailing_window, steps);

    for (long long k = 0; k < steps; ++k) {
        const double t = config.t0() + static_cast<double>(k) * config.dt();
        const SourceFieldSet snapshot(estimate_field(phi.ensemble, grid),
                                      estimate_field(ex.ensemble, grid),
                                      estimate_field(ey.ensemble, grid), t);
        phi.advance(t, config.dt(), &snapshot, config.coupling_mode(), k);
        ex.advance(t, config.dt(), &snapshot, config.coupling_mode(), k);
        ey.advance(t, config.dt(), &snapshot, config.coupling_mode(), k);
        if (avg_phi.wants(k)) {
            avg_phi.accumulate(estimate_field(phi.ensemble, grid));
            avg_ex.accumulate(estimate_field(ex.ensemble, grid));
            avg_ey.accumulate(estimate_field(ey.ensemble, grid));
        }
    }
    if (final_ensembles)
        *final_ensembles = {phi.ensemble, ex.ensemble, ey.ensemble};
    if (avg_phi.active())
        return {avg_phi.average(), avg_ex.average(), avg_ey.average()};
    return {estimate_field(phi.ensemble, grid), estimate_field(ex.ensemble, grid),
            estimate_field(ey.ensemble, grid)};
}

// Single-field solve for injection-free problems; consumes the same RNG
// stream as the corresponding field inside run_mcga, so results for inert
// coupling are bit-identical.
inline ScalarField run_single_field(const ProblemSpec& spec, const GridSpec& grid,
                                    const RunConfig& config, const SolverOptions& opt = {},
                                    FieldTag field = FieldTag::phi, int replicate = 0) {
    if (spec.injection)
        throw std::invalid_argument(
            "run_single_field: spec has an injection source; use run_mcga");
    detail::check_domain(spec, grid);
    detail::FieldSolver solver(spec, grid, config.particle_count(), opt,
                               make_field_stream(config.seed(), replicate, field));
    const long long steps = config.step_count();
    detail::TrailingAverage avg(grid, opt.trailing_window, steps);
    for (long long k = 0; k < steps; ++k) {
        const double t = config.t0() + static_cast<double>(k) * config.dt();
        solver.advance(t, config.dt(), nullptr, config.coupling_mode(), k);
        if (avg.wants(k)) avg.accumulate(estimate_field(solver.ensemble, grid));
    }
    return avg.active() ? avg.average() : estimate_field(solver.ensemble, grid);
}

}  // namespace mcga
