#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mcga/grid.hpp"

namespace mcga {

// Positions and signed weights representing one scalar field's mass
// distribution. Weight units are field units times cell area. Zero-weight
// particles are never stored.
struct ParticleEnsemble {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;

    std::size_t size() const { return w.size(); }
    bool empty() const { return w.empty(); }

    void reserve(std::size_t n) {
        x.reserve(n);
        y.reserve(n);
        w.reserve(n);
    }

    void add(double px, double py, double weight) {
        x.push_back(px);
        y.push_back(py);
        w.push_back(weight);
    }

    void clear() {
        x.clear();
        y.clear();
        w.clear();
    }
};

inline double total_signed_weight(const ParticleEnsemble& e) {
    CompensatedSum s;
    for (double w : e.w) s.add(w);
    return s.value();
}

inline double total_abs_weight(const ParticleEnsemble& e) {
    CompensatedSum s;
    for (double w : e.w) s.add(std::abs(w));
    return s.value();
}

// Histogram estimator: cell value = (signed weight in cell) / cell area.
// Requires every particle inside the closed domain; absorb strays first.
inline ScalarField estimate_field(const ParticleEnsemble& particles, const GridSpec& grid) {
    const std::size_t n_cells = static_cast<std::size_t>(grid.cell_count());
    std::vector<CompensatedSum> sums(n_cells);
    const double dx = grid.dx(), dy = grid.dy();
    const double x0 = grid.x_min(), y0 = grid.y_min();
    const int mx = grid.mx(), my = grid.my();
    for (std::size_t k = 0; k < particles.size(); ++k) {
        const double px = particles.x[k], py = particles.y[k];
        if (px < x0 || px > grid.x_max() || py < y0 || py > grid.y_max())
            throw std::invalid_argument("estimate_field: particle outside domain");
        int i = static_cast<int>((px - x0) / dx);
        int j = static_cast<int>((py - y0) / dy);
        if (i >= mx) i = mx - 1;
        if (j >= my) j = my - 1;
        sums[static_cast<std::size_t>(i) * my + j].add(particles.w[k]);
    }
    ScalarField out(grid);
    const double inv_area = 1.0 / grid.cell_area();
    for (std::size_t c = 0; c < n_cells; ++c) out.values()[c] = sums[c].value() * inv_area;
    return out;
}

// Debug dump of one ensemble, one particle per row.
inline void write_ensemble_csv(const ParticleEnsemble& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "x,y,weight\n";
    for (std::size_t k = 0; k < e.size(); ++k)
        out << format_full(e.x[k]) << ',' << format_full(e.y[k]) << ',' << format_full(e.w[k])
            << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Snapshot of the three concurrently estimated fields, published once per
// time step and immutable afterwards.
struct SourceFieldSet {
    ScalarField phi_hat;
    ScalarField ex_hat;
    ScalarField ey_hat;
    double time = 0.0;

    SourceFieldSet(ScalarField phi, ScalarField ex, ScalarField ey, double t)
        : phi_hat(std::move(phi)), ex_hat(std::move(ex)), ey_hat(std::move(ey)), time(t) {
        if (!(phi_hat.grid() == ex_hat.grid()) || !(phi_hat.grid() == ey_hat.grid()))
            throw std::invalid_argument("SourceFieldSet: fields on different grids");
    }
};

}  // namespace mcga
