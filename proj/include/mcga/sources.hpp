#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "mcga/particles.hpp"
#include "mcga/problem.hpp"
#include "mcga/rng.hpp"

namespace mcga {

// Multiplicative reaction sub-step: w <- w (1 + c(t, X) dt), first-order
// splitting with c evaluated at the particle's own position. Stability of the
// update requires dt max|c| < 1, checked at cell centers.
inline void apply_reaction(ParticleEnsemble& e, const ProblemSpec& spec, double t, double dt,
                           const GridSpec& grid) {
    if (!spec.reaction) return;
    double max_c = 0.0;
    for (int i = 0; i < grid.mx(); ++i)
        for (int j = 0; j < grid.my(); ++j)
            max_c = std::max(max_c, std::abs(spec.reaction(t, grid.cell_center(i, j))));
    if (dt * max_c >= 1.0)
        throw std::runtime_error("apply_reaction: dt*max|c| = " + std::to_string(dt * max_c) +
                                 " >= 1; reduce dt below " + std::to_string(1.0 / max_c));
    for (std::size_t k = 0; k < e.size(); ++k)
        e.w[k] *= 1.0 + spec.reaction(t, {e.x[k], e.y[k]}) * dt;
}

// Per-cell injection rate from the published companion-field snapshot. Specs
// without an injection source yield a zero field for every mode.
inline ScalarField evaluate_injection(const ProblemSpec& spec, const SourceFieldSet& fields,
                                      CouplingMode mode, const GridSpec& grid, double t) {
    ScalarField rate(grid);
    if (!spec.injection) return rate;
    if (!(fields.phi_hat.grid() == grid))
        throw std::invalid_argument("evaluate_injection: snapshot grid mismatch");
    if (mode == CouplingMode::exact && spec.injection_uses_exact_coupling && !spec.exact)
        throw std::invalid_argument(
            "evaluate_injection: exact coupling requested but the problem has no exact solution");
    for (int i = 0; i < grid.mx(); ++i)
        for (int j = 0; j < grid.my(); ++j)
            rate.at(i, j) = spec.injection(t, grid.cell_center(i, j), fields, mode);
    return rate;
}

// Add n_per_cell particles per nonzero-rate cell, each carrying
// rate * dt * area / n_per_cell, so the injected signed mass per cell is
// exactly rate * dt * area.
inline void inject(ParticleEnsemble& e, const ScalarField& rate, double dt, int n_per_cell,
                   RngStream& rng) {
    if (n_per_cell < 1) throw std::invalid_argument("inject: n_per_cell must be at least 1");
    const GridSpec& grid = rate.grid();
    const double area = grid.cell_area();
    for (int i = 0; i < grid.mx(); ++i) {
        for (int j = 0; j < grid.my(); ++j) {
            const double s = rate.at(i, j);
            if (s == 0.0) continue;
            const double w = s * dt * area / n_per_cell;
            const double cx = grid.x_min() + i * grid.dx();
            const double cy = grid.y_min() + j * grid.dy();
            for (int k = 0; k < n_per_cell; ++k)
                e.add(cx + rng.unit() * grid.dx(), cy + rng.unit() * grid.dy(), w);
        }
    }
}

}  // namespace mcga
