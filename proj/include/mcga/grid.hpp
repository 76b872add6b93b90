#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcga {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct CellIndex {
    int i = 0;
    int j = 0;
    bool operator==(const CellIndex&) const = default;
};

// Neumaier compensated accumulator; keeps weighted sums testable to
// near round-off independently of summation order.
class CompensatedSum {
  public:
    void add(double value) {
        const double t = sum_ + value;
        if (std::abs(sum_) >= std::abs(value)) {
            comp_ += (sum_ - t) + value;
        } else {
            comp_ += (value - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Uniform rectangular cell-centered 2D grid.
class GridSpec {
  public:
    GridSpec(double x_min, double x_max, double y_min, double y_max, int mx, int my)
        : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), mx_(mx), my_(my) {
        if (!(x_min < x_max) || !(y_min < y_max))
            throw std::invalid_argument("GridSpec: domain bounds must satisfy min < max");
        if (mx < 3 || my < 3)
            throw std::invalid_argument("GridSpec: at least 3 cells per dimension");
        dx_ = (x_max - x_min) / mx;
        dy_ = (y_max - y_min) / my;
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }
    int mx() const { return mx_; }
    int my() const { return my_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    double cell_area() const { return dx_ * dy_; }
    int cell_count() const { return mx_ * my_; }

    Vec2 cell_center(int i, int j) const {
        return {x_min_ + (i + 0.5) * dx_, y_min_ + (j + 0.5) * dy_};
    }

    bool contains(Vec2 p) const {
        return p.x >= x_min_ && p.x <= x_max_ && p.y >= y_min_ && p.y <= y_max_;
    }

    bool is_boundary_cell(int i, int j) const {
        return i == 0 || j == 0 || i == mx_ - 1 || j == my_ - 1;
    }

    // Midpoint cell of the grid: unique central cell for odd M, the
    // (M/2, M/2) cell for even M.
    CellIndex mid_cell() const {
        return {mx_ % 2 == 1 ? (mx_ - 1) / 2 : mx_ / 2,
                my_ % 2 == 1 ? (my_ - 1) / 2 : my_ / 2};
    }

    bool operator==(const GridSpec& o) const {
        return x_min_ == o.x_min_ && x_max_ == o.x_max_ && y_min_ == o.y_min_ &&
               y_max_ == o.y_max_ && mx_ == o.mx_ && my_ == o.my_;
    }

  private:
    double x_min_, x_max_, y_min_, y_max_;
    int mx_, my_;
    double dx_, dy_;
};

// Cells are half-open in each direction; the closed upper domain edge belongs
// to the last cell. Positions outside the closed domain map to nullopt.
inline std::optional<CellIndex> locate_cell(const GridSpec& grid, Vec2 p) {
    if (!grid.contains(p)) return std::nullopt;
    int i = static_cast<int>((p.x - grid.x_min()) / grid.dx());
    int j = static_cast<int>((p.y - grid.y_min()) / grid.dy());
    if (i >= grid.mx()) i = grid.mx() - 1;
    if (j >= grid.my()) j = grid.my() - 1;
    return CellIndex{i, j};
}

// Cell-centered scalar samples of one quantity on a GridSpec.
class ScalarField {
  public:
    explicit ScalarField(const GridSpec& grid, double fill = 0.0)
        : grid_(grid), values_(static_cast<std::size_t>(grid.cell_count()), fill) {}

    ScalarField(const GridSpec& grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != static_cast<std::size_t>(grid.cell_count()))
            throw std::invalid_argument("ScalarField: value count does not match grid");
        if (!all_finite()) throw std::invalid_argument("ScalarField: non-finite entries");
    }

    const GridSpec& grid() const { return grid_; }

    double& at(int i, int j) { return values_[index(i, j)]; }
    double at(int i, int j) const { return values_[index(i, j)]; }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    // Piecewise-constant lookup; 0 outside the domain.
    double value_at(Vec2 p) const {
        const auto c = locate_cell(grid_, p);
        return c ? at(c->i, c->j) : 0.0;
    }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * grid_.my() + j;
    }

  private:
    GridSpec grid_;
    std::vector<double> values_;
};

inline ScalarField field_from_function(const GridSpec& grid,
                                       const std::function<double(Vec2)>& f) {
    ScalarField out(grid);
    for (int i = 0; i < grid.mx(); ++i)
        for (int j = 0; j < grid.my(); ++j)
            out.at(i, j) = f(grid.cell_center(i, j));
    return out;
}

// Per-cell |estimate - exact| / max(|exact|, floor).
inline ScalarField relative_error(const ScalarField& estimate, const ScalarField& exact,
                                  double floor = 1e-12) {
    if (!(estimate.grid() == exact.grid()))
        throw std::invalid_argument("relative_error: fields on different grids");
    ScalarField out(estimate.grid());
    for (int i = 0; i < out.grid().mx(); ++i)
        for (int j = 0; j < out.grid().my(); ++j)
            out.at(i, j) = std::abs(estimate.at(i, j) - exact.at(i, j)) /
                           std::max(std::abs(exact.at(i, j)), floor);
    return out;
}

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_field_csv(const ScalarField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "i,j,x_center,y_center,value\n";
    const auto& g = field.grid();
    for (int i = 0; i < g.mx(); ++i) {
        for (int j = 0; j < g.my(); ++j) {
            const Vec2 c = g.cell_center(i, j);
            out << i << ',' << j << ',' << format_full(c.x) << ',' << format_full(c.y)
                << ',' << format_full(field.at(i, j)) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ScalarField read_field_csv(const GridSpec& grid, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "i,j,x_center,y_center,value")
        throw std::runtime_error("bad field CSV header in " + path);
    ScalarField out(grid);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int i = 0, j = 0;
        double xc = 0, yc = 0, v = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &i, &j, &xc, &yc, &v) != 5)
            throw std::runtime_error("bad field CSV row in " + path + ": " + line);
        out.at(i, j) = v;
    }
    return out;
}

}  // namespace mcga
