#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mcga/particles.hpp"
#include "mcga/problem.hpp"
#include "mcga/rng.hpp"

namespace mcga {

// Sum of |u0(center)| * area over all cells; the normalization used to budget
// particle counts at initialization and boundary repopulation.
inline double initial_abs_mass(const ProblemSpec& spec, const GridSpec& grid) {
    CompensatedSum acc;
    const double area = grid.cell_area();
    for (int i = 0; i < grid.mx(); ++i)
        for (int j = 0; j < grid.my(); ++j)
            acc.add(std::abs(spec.initial(grid.cell_center(i, j))) * area);
    return acc.value();
}

// Stratified initialization: each cell receives its exact target mass
// u0(center) * area, split over max(1, round(N |m_c| / sum|m|)) particles
// placed uniformly inside the cell. Signs are preserved; zero-mass cells
// stay empty. An all-zero initial condition yields an empty ensemble.
inline ParticleEnsemble sample_initial(const ProblemSpec& spec, const GridSpec& grid,
                                       long long n_target, RngStream& rng) {
    if (n_target < grid.cell_count())
        std::fprintf(stderr,
                     "sample_initial: N=%lld is below the cell count %d; cells will be "
                     "under-resolved\n",
                     n_target, grid.cell_count());
    const double total_abs = initial_abs_mass(spec, grid);
    ParticleEnsemble out;
    if (total_abs == 0.0) return out;
    out.reserve(static_cast<std::size_t>(n_target));
    const double area = grid.cell_area();
    for (int i = 0; i < grid.mx(); ++i) {
        for (int j = 0; j < grid.my(); ++j) {
            const double mass = spec.initial(grid.cell_center(i, j)) * area;
            if (mass == 0.0) continue;
            const long long n_c = std::max<long long>(
                1, std::llround(static_cast<double>(n_target) * std::abs(mass) / total_abs));
            const double w = mass / static_cast<double>(n_c);
            const double cx = grid.x_min() + i * grid.dx();
            const double cy = grid.y_min() + j * grid.dy();
            for (long long k = 0; k < n_c; ++k)
                out.add(cx + rng.unit() * grid.dx(), cy + rng.unit() * grid.dy(), w);
        }
    }
    return out;
}

// Euler-Maruyama transport: X <- X + b(X) dt + sqrt(2 D(X) dt) xi with
// b = v + grad D (Ito drift for the law d/dt u = -div(v u) + div(D grad u)).
// Weights are untouched.
inline void transport_step(ParticleEnsemble& e, const ProblemSpec& spec, double dt,
                           RngStream& rng) {
    const bool has_drift = static_cast<bool>(spec.advection) ||
                           static_cast<bool>(spec.grad_diffusion);
    const double two_dt = 2.0 * dt;
    if (spec.constant_diffusion && !has_drift) {
        const double amp = std::sqrt(two_dt * *spec.constant_diffusion);
        for (std::size_t k = 0; k < e.size(); ++k) {
            const auto [z1, z2] = rng.normal_pair();
            e.x[k] += amp * z1;
            e.y[k] += amp * z2;
        }
        return;
    }
    for (std::size_t k = 0; k < e.size(); ++k) {
        const Vec2 p{e.x[k], e.y[k]};
        const Vec2 b = effective_drift(spec, p);
        const double amp = std::sqrt(two_dt * spec.diffusion_at(p));
        const auto [z1, z2] = rng.normal_pair();
        e.x[k] = p.x + b.x * dt + amp * z1;
        e.y[k] = p.y + b.y * dt + amp * z2;
    }
}

// Dirichlet maintenance: absorb particles that left the closed domain, then
// wipe every boundary cell and repopulate it to mass g(t, center) * area.
// n_target and mass_scale are the initialization budget (N and sum|m| at t0),
// so boundary particle weights stay comparable to interior ones.
inline void apply_boundary(ParticleEnsemble& e, const ProblemSpec& spec, const GridSpec& grid,
                           double t, long long n_target, double mass_scale, RngStream& rng) {
    std::size_t keep = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        const Vec2 p{e.x[k], e.y[k]};
        const auto cell = locate_cell(grid, p);
        if (!cell || grid.is_boundary_cell(cell->i, cell->j)) continue;
        e.x[keep] = p.x;
        e.y[keep] = p.y;
        e.w[keep] = e.w[k];
        ++keep;
    }
    e.x.resize(keep);
    e.y.resize(keep);
    e.w.resize(keep);

    const double area = grid.cell_area();
    double scale = mass_scale;
    if (scale == 0.0) {
        // Degenerate start (all-zero u0): budget against the boundary data.
        CompensatedSum acc;
        for (int i = 0; i < grid.mx(); ++i)
            for (int j = 0; j < grid.my(); ++j)
                if (grid.is_boundary_cell(i, j))
                    acc.add(std::abs(spec.dirichlet(t, grid.cell_center(i, j))) * area);
        scale = acc.value();
    }

    for (int i = 0; i < grid.mx(); ++i) {
        for (int j = 0; j < grid.my(); ++j) {
            if (!grid.is_boundary_cell(i, j)) continue;
            const double mass = spec.dirichlet(t, grid.cell_center(i, j)) * area;
            if (mass == 0.0) continue;
            long long n_b = 1;
            if (scale > 0.0)
                n_b = std::max<long long>(
                    1, std::llround(static_cast<double>(n_target) * std::abs(mass) / scale));
            const double w = mass / static_cast<double>(n_b);
            const double cx = grid.x_min() + i * grid.dx();
            const double cy = grid.y_min() + j * grid.dy();
            for (long long k = 0; k < n_b; ++k)
                e.add(cx + rng.unit() * grid.dx(), cy + rng.unit() * grid.dy(), w);
        }
    }
}

namespace detail {

// Pack (cell, sign) into one map key; nullopt for positions off the grid,
// which are never merged.
inline std::optional<std::uint64_t> merge_bucket_key(const GridSpec& grid, double x, double y,
                                                     bool negative) {
    const auto cell = locate_cell(grid, {x, y});
    if (!cell) return std::nullopt;
    const std::uint64_t flat =
        static_cast<std::uint64_t>(cell->i) * static_cast<std::uint64_t>(grid.my()) +
        static_cast<std::uint64_t>(cell->j);
    return (flat << 1) | (negative ? 1u : 0u);
}

}  // namespace detail

namespace detail {

// One roulette pass: particles below w_cap * median |w| survive with
// probability |w| / threshold and are rescaled to the threshold weight
// (expectation preserved). Returns the number of removals.
inline std::size_t roulette_pass(ParticleEnsemble& e, double w_cap, RngStream& rng) {
    std::vector<double> mags(e.w.size());
    for (std::size_t k = 0; k < e.w.size(); ++k) mags[k] = std::abs(e.w[k]);
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    const double threshold = w_cap * mags[mags.size() / 2];
    if (!(threshold > 0.0)) return 0;

    std::size_t keep = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        double w = e.w[k];
        const double mag = std::abs(w);
        if (mag < threshold) {
            if (rng.unit() * threshold >= mag) continue;  // killed
            w = std::copysign(threshold, w);
        }
        e.x[keep] = e.x[k];
        e.y[keep] = e.y[k];
        e.w[keep] = w;
        ++keep;
    }
    const std::size_t removed = e.size() - keep;
    e.x.resize(keep);
    e.y.resize(keep);
    e.w.resize(keep);
    return removed;
}

}  // namespace detail

// Two-stage population control. Russian roulette removes light particles
// (|w| below w_cap * median |w|) unbiasedly, rescaling survivors to the
// threshold weight; while the ensemble holds more than 2 * target_count
// particles the pass is repeated with the median recomputed, which thins
// heavily over-resolved low-weight populations without touching positions.
// Only if roulette stalls above the target are same-cell same-sign pairs
// merged: position becomes the weight-magnitude-weighted mean (stays inside
// the cell), weight the sum, so per-cell signed weight is preserved exactly.
inline void control_population(ParticleEnsemble& e, const GridSpec& grid, double w_cap,
                               long long target_count, RngStream& rng) {
    if (e.empty()) return;
    if (!(w_cap > 0.0)) throw std::invalid_argument("control_population: w_cap must be positive");

    detail::roulette_pass(e, w_cap, rng);
    while (e.size() > 2 * static_cast<std::size_t>(target_count)) {
        if (detail::roulette_pass(e, w_cap, rng) == 0) break;
    }

    while (e.size() > 2 * static_cast<std::size_t>(target_count)) {
        std::unordered_map<std::uint64_t, std::size_t> pending;  // bucket -> slot index
        ParticleEnsemble merged;
        merged.reserve(e.size() / 2 + 1);
        bool any_merge = false;
        for (std::size_t k = 0; k < e.size(); ++k) {
            const auto key = detail::merge_bucket_key(grid, e.x[k], e.y[k], e.w[k] < 0.0);
            if (!key) {
                merged.add(e.x[k], e.y[k], e.w[k]);
                continue;
            }
            const auto it = pending.find(*key);
            if (it == pending.end()) {
                pending.emplace(*key, merged.size());
                merged.add(e.x[k], e.y[k], e.w[k]);
                continue;
            }
            const std::size_t slot = it->second;
            pending.erase(it);
            const double wa = std::abs(merged.w[slot]);
            const double wb = std::abs(e.w[k]);
            const double inv = 1.0 / (wa + wb);
            merged.x[slot] = (wa * merged.x[slot] + wb * e.x[k]) * inv;
            merged.y[slot] = (wa * merged.y[slot] + wb * e.y[k]) * inv;
            merged.w[slot] += e.w[k];
            any_merge = true;
        }
        e = std::move(merged);
        if (!any_merge) break;
    }
}

}  // namespace mcga
