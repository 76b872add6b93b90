#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "mcga/fd.hpp"
#include "mcga/parallel.hpp"
#include "mcga/solver.hpp"

namespace mcga {

// Single-pass mean/variance accumulator with a parallel merge form.
class WelfordAccumulator {
  public:
    void update(double x) {
        if (!std::isfinite(x))
            throw std::invalid_argument("WelfordAccumulator: non-finite sample");
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (x - mean_);
    }

    void merge(const WelfordAccumulator& o) {
        if (o.count_ == 0) return;
        if (count_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(count_);
        const double nb = static_cast<double>(o.count_);
        const double delta = o.mean_ - mean_;
        mean_ += delta * nb / (na + nb);
        m2_ += o.m2_ + delta * delta * na * nb / (na + nb);
        count_ += o.count_;
    }

    long long count() const { return count_; }

    double mean() const {
        if (count_ < 1) throw std::logic_error("WelfordAccumulator: mean of empty accumulator");
        return mean_;
    }

    // Sample variance (n - 1); replicates are a sample, and at the replicate
    // counts used here the population/sample distinction is immaterial to
    // slope fitting anyway.
    double variance() const {
        if (count_ < 2) throw std::logic_error("WelfordAccumulator: variance needs two samples");
        return m2_ / static_cast<double>(count_ - 1);
    }

  private:
    long long count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 1.0;
};

// Ordinary least squares on (log x, log y).
inline LogLogFit fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("fit_loglog_slope: need at least two aligned points");
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(xs[k] > 0.0) || !(ys[k] > 0.0))
            throw std::invalid_argument("fit_loglog_slope: inputs must be positive");
        lx[k] = std::log(xs[k]);
        ly[k] = std::log(ys[k]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
        syy += (ly[k] - my) * (ly[k] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_loglog_slope: degenerate abscissae");
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double pred = fit.intercept + fit.slope * lx[k];
            ss_res += (ly[k] - pred) * (ly[k] - pred);
        }
        fit.r2 = 1.0 - ss_res / syy;
    }
    return fit;
}

struct VarianceStudyResult {
    std::vector<int> resolutions;
    std::vector<double> variances_mc;
    std::vector<double> variances_fd;
    bool slopes_defined = false;
    double slope_mc = std::numeric_limits<double>::quiet_NaN();
    double slope_fd = std::numeric_limits<double>::quiet_NaN();
    double r2_mc = std::numeric_limits<double>::quiet_NaN();
    double r2_fd = std::numeric_limits<double>::quiet_NaN();
};

// Welford-accumulate per-resolution samples (layout u[mi * reps + rep]) and
// fit log Var against log M. Noise-free input leaves the slopes flagged as
// undefined (NaN) rather than failing.
inline VarianceStudyResult finalize_variance_study(std::span<const int> resolutions,
                                                   std::span<const double> u_mc,
                                                   std::span<const double> u_fd, int reps) {
    VarianceStudyResult out;
    out.resolutions.assign(resolutions.begin(), resolutions.end());
    std::vector<double> ms;
    for (std::size_t mi = 0; mi < resolutions.size(); ++mi) {
        WelfordAccumulator acc_mc, acc_fd;
        for (int rep = 0; rep < reps; ++rep) {
            acc_mc.update(u_mc[mi * reps + rep]);
            acc_fd.update(u_fd[mi * reps + rep]);
        }
        out.variances_mc.push_back(acc_mc.variance());
        out.variances_fd.push_back(acc_fd.variance());
        ms.push_back(static_cast<double>(resolutions[mi]));
    }

    const auto positive = [](const std::vector<double>& vs) {
        for (double v : vs)
            if (!(v > 0.0)) return false;
        return true;
    };
    if (positive(out.variances_mc) && positive(out.variances_fd)) {
        const LogLogFit mc = fit_loglog_slope(ms, out.variances_mc);
        const LogLogFit fd = fit_loglog_slope(ms, out.variances_fd);
        out.slopes_defined = true;
        out.slope_mc = mc.slope;
        out.slope_fd = fd.slope;
        out.r2_mc = mc.r2;
        out.r2_fd = fd.r2;
    }
    return out;
}

// Grid-resolution noise study: for every M, run independent replicate solves
// of the E_x equation (direct particle estimate) and of the phi equation
// (first-order differences of the phi estimate), record both estimators at
// the midpoint cell, and fit log Var against log M. The difference estimator
// is computed from the phi runs already at hand, pairing the two columns per
// replicate.
inline VarianceStudyResult variance_study(const ProblemTriplet& problems,
                                          std::span<const int> resolutions,
                                          const RunConfig& config, const SolverOptions& opt = {},
                                          int jobs = 1) {
    if (resolutions.size() < 2)
        throw std::invalid_argument("variance_study: need at least two resolutions");
    if (config.replicates() < 2)
        throw std::invalid_argument("variance_study: need at least two replicates");

    const int reps = config.replicates();
    const std::size_t n_res = resolutions.size();
    std::vector<double> u_mc(n_res * reps), u_fd(n_res * reps);

    parallel_for_index(static_cast<long long>(n_res) * reps, jobs, [&](long long task) {
        const std::size_t mi = static_cast<std::size_t>(task) / reps;
        const int rep = static_cast<int>(task % reps);
        const GridSpec grid = problems.phi.domain.make_grid(resolutions[mi]);
        // Per-resolution sub-seed keeps replicate streams independent across M.
        const RunConfig run(config.particle_count(), config.t0(), config.t_star(), config.dt(),
                            RngStream::mix(config.seed(), 0xa11ceULL + resolutions[mi]),
                            config.coupling_mode(), config.replicates());
        const ScalarField ex_hat =
            run_single_field(problems.ex, grid, run, opt, FieldTag::ex, rep);
        const ScalarField phi_hat =
            run_single_field(problems.phi, grid, run, opt, FieldTag::phi, rep);
        const CellIndex mid = grid.mid_cell();
        u_mc[task] = ex_hat.at(mid.i, mid.j);
        u_fd[task] = fd_gradient(phi_hat).ex.at(mid.i, mid.j);
    });

    return finalize_variance_study(resolutions, u_mc, u_fd, reps);
}

}  // namespace mcga
