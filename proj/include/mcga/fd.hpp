#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcga/grid.hpp"
#include "mcga/problem.hpp"

namespace mcga {

struct GradientPair {
    ScalarField ex;
    ScalarField ey;
};

// First-order difference comparator for E = -grad phi: backward differences,
// with a forward difference in the first row/column. One-sided differences
// mirror the estimator whose noise amplification this solver avoids; central
// differences would change the constant but not the 1/dx^2 growth.
inline GradientPair fd_gradient(const ScalarField& phi) {
    const GridSpec& g = phi.grid();
    GradientPair out{ScalarField(g), ScalarField(g)};
    for (int i = 0; i < g.mx(); ++i) {
        for (int j = 0; j < g.my(); ++j) {
            const int il = i >= 1 ? i : 1;
            out.ex.at(i, j) = -(phi.at(il, j) - phi.at(il - 1, j)) / g.dx();
            const int jl = j >= 1 ? j : 1;
            out.ey.at(i, j) = -(phi.at(i, jl) - phi.at(i, jl - 1)) / g.dy();
        }
    }
    return out;
}

namespace detail {

struct FdCoefficients {
    std::vector<double> d_face_x;  // (mx+1) x my faces
    std::vector<double> d_face_y;  // mx x (my+1) faces
    std::vector<double> vx_face;
    std::vector<double> vy_face;
    double max_d = 0.0;
    double max_vx = 0.0;
    double max_vy = 0.0;
};

inline FdCoefficients fd_coefficients(const ProblemSpec& spec, const GridSpec& g) {
    FdCoefficients c;
    const int mx = g.mx(), my = g.my();
    c.d_face_x.assign(static_cast<std::size_t>(mx + 1) * my, 0.0);
    c.d_face_y.assign(static_cast<std::size_t>(mx) * (my + 1), 0.0);
    c.vx_face.assign(c.d_face_x.size(), 0.0);
    c.vy_face.assign(c.d_face_y.size(), 0.0);

    const auto d_at = [&](int i, int j) {
        const double di = spec.diffusion_at(g.cell_center(std::clamp(i, 0, mx - 1),
                                                          std::clamp(j, 0, my - 1)));
        return di;
    };
    for (int i = 0; i <= mx; ++i) {
        for (int j = 0; j < my; ++j) {
            const std::size_t f = static_cast<std::size_t>(i) * my + j;
            c.d_face_x[f] = 0.5 * (d_at(i - 1, j) + d_at(i, j));
            if (spec.advection) {
                const Vec2 face{g.x_min() + i * g.dx(), g.cell_center(0, j).y};
                c.vx_face[f] = spec.advection(face).x;
            }
            c.max_d = std::max(c.max_d, c.d_face_x[f]);
            c.max_vx = std::max(c.max_vx, std::abs(c.vx_face[f]));
        }
    }
    for (int i = 0; i < mx; ++i) {
        for (int j = 0; j <= my; ++j) {
            const std::size_t f = static_cast<std::size_t>(i) * (my + 1) + j;
            c.d_face_y[f] = 0.5 * (d_at(i, j - 1) + d_at(i, j));
            if (spec.advection) {
                const Vec2 face{g.cell_center(i, 0).x, g.y_min() + j * g.dy()};
                c.vy_face[f] = spec.advection(face).y;
            }
            c.max_d = std::max(c.max_d, c.d_face_y[f]);
            c.max_vy = std::max(c.max_vy, std::abs(c.vy_face[f]));
        }
    }
    for (int i = 0; i < mx; ++i)
        for (int j = 0; j < my; ++j)
            c.max_d = std::max(c.max_d, spec.diffusion_at(g.cell_center(i, j)));
    return c;
}

}  // namespace detail

// Largest stable explicit step for the given problem and grid (0.9 safety on
// both the diffusion and advection limits).
inline double fd_stable_dt(const ProblemSpec& spec, const GridSpec& grid) {
    const auto c = detail::fd_coefficients(spec, grid);
    const double h2 = std::min(grid.dx() * grid.dx(), grid.dy() * grid.dy());
    double dt = c.max_d > 0.0 ? 0.9 * h2 / (4.0 * c.max_d) : 1e30;
    if (c.max_vx > 0.0) dt = std::min(dt, 0.9 * grid.dx() / c.max_vx);
    if (c.max_vy > 0.0) dt = std::min(dt, 0.9 * grid.dy() / c.max_vy);
    return dt;
}

// Explicit-Euler, second-order central, conservative-flux discretization of
//   du/dt = -div(v u) + div(D grad u) + c u + s_exact,
// with D at faces taken as the arithmetic mean of the adjacent centers and
// Dirichlet values pinned in boundary cells. Noise-free reference for the
// particle solver; uses the closed-form source, never Monte Carlo estimates.
inline ScalarField solve_deterministic(const ProblemSpec& spec, const GridSpec& grid, double t0,
                                       double t_star, double dt) {
    if (!(t_star > t0)) throw std::invalid_argument("solve_deterministic: t_star must exceed t0");
    if (!(dt > 0.0)) throw std::invalid_argument("solve_deterministic: dt must be positive");
    const double limit = fd_stable_dt(spec, grid);
    if (dt > limit)
        throw std::invalid_argument("solve_deterministic: dt " + std::to_string(dt) +
                                    " violates the CFL bound; use dt <= " + std::to_string(limit));
    const double ratio = (t_star - t0) / dt;
    const long long steps = std::llround(ratio);
    if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9)
        throw std::invalid_argument("solve_deterministic: (t_star-t0)/dt must be an integer");

    const auto coeff = detail::fd_coefficients(spec, grid);
    const int mx = grid.mx(), my = grid.my();
    const double dx = grid.dx(), dy = grid.dy();

    ScalarField u = field_from_function(grid, [&](Vec2 r) { return spec.initial(r); });
    const auto pin_boundary = [&](ScalarField& f, double t) {
        for (int i = 0; i < mx; ++i)
            for (int j = 0; j < my; ++j)
                if (grid.is_boundary_cell(i, j))
                    f.at(i, j) = spec.dirichlet(t, grid.cell_center(i, j));
    };
    pin_boundary(u, t0);

    ScalarField next = u;
    for (long long n = 0; n < steps; ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        for (int i = 1; i < mx - 1; ++i) {
            for (int j = 1; j < my - 1; ++j) {
                const std::size_t fxl = static_cast<std::size_t>(i) * my + j;
                const std::size_t fxr = static_cast<std::size_t>(i + 1) * my + j;
                const std::size_t fyl = static_cast<std::size_t>(i) * (my + 1) + j;
                const std::size_t fyr = fyl + 1;
                // net flux D du/dn - v u through each face
                const double flux_xr = coeff.d_face_x[fxr] * (u.at(i + 1, j) - u.at(i, j)) / dx -
                                       coeff.vx_face[fxr] * 0.5 * (u.at(i, j) + u.at(i + 1, j));
                const double flux_xl = coeff.d_face_x[fxl] * (u.at(i, j) - u.at(i - 1, j)) / dx -
                                       coeff.vx_face[fxl] * 0.5 * (u.at(i - 1, j) + u.at(i, j));
                const double flux_yr = coeff.d_face_y[fyr] * (u.at(i, j + 1) - u.at(i, j)) / dy -
                                       coeff.vy_face[fyr] * 0.5 * (u.at(i, j) + u.at(i, j + 1));
                const double flux_yl = coeff.d_face_y[fyl] * (u.at(i, j) - u.at(i, j - 1)) / dy -
                                       coeff.vy_face[fyl] * 0.5 * (u.at(i, j - 1) + u.at(i, j));
                double rhs = (flux_xr - flux_xl) / dx + (flux_yr - flux_yl) / dy;
                const Vec2 center = grid.cell_center(i, j);
                if (spec.reaction) rhs += spec.reaction(t, center) * u.at(i, j);
                if (spec.source_exact) rhs += spec.source_exact(t, center);
                next.at(i, j) = u.at(i, j) + dt * rhs;
            }
        }
        pin_boundary(next, t0 + static_cast<double>(n + 1) * dt);
        std::swap(u, next);
    }
    return u;
}

}  // namespace mcga
