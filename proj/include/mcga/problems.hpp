#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcga/problem.hpp"

namespace mcga {

struct ProblemTriplet {
    ProblemSpec phi;
    ProblemSpec ex;
    ProblemSpec ey;
};

// Verification problem on [0,1]^2 with spatially varying diffusion D x^2:
//   phi:  d/dt phi = div(D x^2 grad phi) + (-D + 2Dx - 2Dx^2) phi
//   E_x:  d/dt E_x + div([-2Dx, 0] E_x) = div(D x^2 grad E_x)
//           + (2D - 4Dx) phi + (-D + 2Dx - 2Dx^2) E_x + 2Dx dEy/dy
//   E_y:  d/dt E_y = div(D x^2 grad E_y) + (-D + 2Dx - 2Dx^2) E_y
// with exact phi = exp(-(x+y)) exp(-D t) and E_x = E_y = -phi. The
// (...)*u sources are realized as reaction terms; the phi-dependent part of
// the E_x source is injection driven by the concurrently estimated phi.
inline ProblemTriplet experiment1_problems(double d_coef = 0.1, double t0 = 0.0) {
    if (!(d_coef > 0.0)) throw std::invalid_argument("experiment1_problems: D must be positive");
    const double D = d_coef;
    const Rect domain{0.0, 1.0, 0.0, 1.0};

    const auto phi_exact = [D](double t, Vec2 r) {
        return std::exp(-(r.x + r.y)) * std::exp(-D * t);
    };
    const auto diffusion = [D](Vec2 r) { return D * r.x * r.x; };
    const auto grad_diffusion = [D](Vec2 r) { return Vec2{2.0 * D * r.x, 0.0}; };
    const auto reaction = [D](double, Vec2 r) {
        return -D + 2.0 * D * r.x - 2.0 * D * r.x * r.x;
    };

    ProblemTriplet out;

    out.phi.name = "exp1_phi";
    out.phi.domain = domain;
    out.phi.diffusion = diffusion;
    out.phi.grad_diffusion = grad_diffusion;
    out.phi.reaction = reaction;
    out.phi.exact = phi_exact;
    out.phi.dirichlet = phi_exact;
    out.phi.initial = [phi_exact, t0](Vec2 r) { return phi_exact(t0, r); };

    const auto field_exact = [phi_exact](double t, Vec2 r) { return -phi_exact(t, r); };
    // dEy/dy of the exact solution equals phi itself.
    const auto dy_ey_exact = phi_exact;

    out.ex.name = "exp1_ex";
    out.ex.domain = domain;
    out.ex.diffusion = diffusion;
    out.ex.grad_diffusion = grad_diffusion;
    out.ex.advection = [D](Vec2 r) { return Vec2{-2.0 * D * r.x, 0.0}; };
    out.ex.reaction = reaction;
    out.ex.injection = [D, dy_ey_exact](double t, Vec2 r, const SourceFieldSet& fields,
                                        CouplingMode mode) {
        double s = (2.0 * D - 4.0 * D * r.x) * fields.phi_hat.value_at(r);
        if (mode == CouplingMode::exact) s += 2.0 * D * r.x * dy_ey_exact(t, r);
        return s;
    };
    out.ex.injection_uses_exact_coupling = true;
    out.ex.source_exact = [D, phi_exact, dy_ey_exact](double t, Vec2 r) {
        return (2.0 * D - 4.0 * D * r.x) * phi_exact(t, r) +
               2.0 * D * r.x * dy_ey_exact(t, r);
    };
    out.ex.exact = field_exact;
    out.ex.dirichlet = field_exact;
    out.ex.initial = [field_exact, t0](Vec2 r) { return field_exact(t0, r); };

    out.ey.name = "exp1_ey";
    out.ey.domain = domain;
    out.ey.diffusion = diffusion;
    out.ey.grad_diffusion = grad_diffusion;
    out.ey.reaction = reaction;
    out.ey.exact = field_exact;
    out.ey.dirichlet = field_exact;
    out.ey.initial = [field_exact, t0](Vec2 r) { return field_exact(t0, r); };

    return out;
}

// Noise-robustness problem on [0,2]^2 with constant diffusion:
//   d/dt u = D laplace u
// for u in {phi, E_x, E_y}, with the heat-kernel solution
//   phi = exp(-(x^2+y^2)/(4Dt)) / (4 pi D t).
// The field components carry the same sign convention as the verification
// problem (there E_x = -phi = dphi/dx), so E_x = dphi/dx = -x/(2Dt) phi and
// E_y = dphi/dy, which solve the same diffusion equation. Singular at t = 0,
// so runs require t0 > 0.
inline ProblemTriplet experiment2_problems(double d_coef = 0.1, double t0 = 5.0) {
    if (!(d_coef > 0.0)) throw std::invalid_argument("experiment2_problems: D must be positive");
    if (!(t0 > 0.0)) throw std::invalid_argument("experiment2_problems: t0 must be positive");
    const double D = d_coef;
    const Rect domain{0.0, 2.0, 0.0, 2.0};

    const auto gauss = [D](double t, Vec2 r) {
        return std::exp(-(r.x * r.x + r.y * r.y) / (4.0 * D * t)) /
               (4.0 * std::numbers::pi * D * t);
    };
    const auto ex_exact = [D, gauss](double t, Vec2 r) {
        return -r.x / (2.0 * D * t) * gauss(t, r);
    };
    const auto ey_exact = [D, gauss](double t, Vec2 r) {
        return -r.y / (2.0 * D * t) * gauss(t, r);
    };

    const auto make = [&](const std::string& name,
                          const std::function<double(double, Vec2)>& exact) {
        ProblemSpec spec;
        spec.name = name;
        spec.domain = domain;
        spec.constant_diffusion = D;
        spec.diffusion = [D](Vec2) { return D; };
        spec.exact = exact;
        spec.dirichlet = exact;
        spec.initial = [exact, t0](Vec2 r) { return exact(t0, r); };
        return spec;
    };

    ProblemTriplet out;
    out.phi = make("exp2_phi", gauss);
    out.ex = make("exp2_ex", ex_exact);
    out.ey = make("exp2_ey", ey_exact);
    return out;
}

// ---------------------------------------------------------------------------
// Custom problems: coefficients given as 2D polynomials, solutions as
// P(x,y) * exp(Q(x,y)) * exp(gamma t). The family is closed under the
// derivatives the PDE needs, so the manufactured source is computed
// symbolically and custom problems pass the same residual check as the
// built-in experiments.
// ---------------------------------------------------------------------------

struct PolyTerm {
    double coef = 0.0;
    int px = 0;
    int py = 0;
};

class Polynomial2D {
  public:
    Polynomial2D() = default;
    explicit Polynomial2D(std::vector<PolyTerm> terms) : terms_(std::move(terms)) {}

    static Polynomial2D constant(double c) {
        if (c == 0.0) return Polynomial2D{};
        return Polynomial2D{{{c, 0, 0}}};
    }

    // "coef,px,py; coef,px,py; ..."
    static Polynomial2D parse(const std::string& text) {
        std::vector<PolyTerm> terms;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ';')) {
            if (item.find_first_not_of(" \t") == std::string::npos) continue;
            PolyTerm t;
            char c1 = 0, c2 = 0;
            std::stringstream ts(item);
            if (!(ts >> t.coef >> c1 >> t.px >> c2 >> t.py) || c1 != ',' || c2 != ',')
                throw std::invalid_argument("bad polynomial term: '" + item + "'");
            if (t.px < 0 || t.py < 0)
                throw std::invalid_argument("negative exponent in polynomial term: '" + item + "'");
            terms.push_back(t);
        }
        return Polynomial2D(std::move(terms));
    }

    bool empty() const { return terms_.empty(); }
    const std::vector<PolyTerm>& terms() const { return terms_; }

    double operator()(Vec2 r) const {
        double acc = 0.0;
        for (const auto& t : terms_) acc += t.coef * ipow(r.x, t.px) * ipow(r.y, t.py);
        return acc;
    }

    Polynomial2D dx() const {
        std::vector<PolyTerm> out;
        for (const auto& t : terms_)
            if (t.px > 0) out.push_back({t.coef * t.px, t.px - 1, t.py});
        return Polynomial2D(std::move(out));
    }

    Polynomial2D dy() const {
        std::vector<PolyTerm> out;
        for (const auto& t : terms_)
            if (t.py > 0) out.push_back({t.coef * t.py, t.px, t.py - 1});
        return Polynomial2D(std::move(out));
    }

    Polynomial2D operator+(const Polynomial2D& o) const {
        std::vector<PolyTerm> out = terms_;
        out.insert(out.end(), o.terms_.begin(), o.terms_.end());
        return Polynomial2D(std::move(out)).compact();
    }

    Polynomial2D operator-(const Polynomial2D& o) const { return *this + o * -1.0; }

    Polynomial2D operator*(double s) const {
        std::vector<PolyTerm> out = terms_;
        for (auto& t : out) t.coef *= s;
        return Polynomial2D(std::move(out));
    }

    Polynomial2D operator*(const Polynomial2D& o) const {
        std::vector<PolyTerm> out;
        for (const auto& a : terms_)
            for (const auto& b : o.terms_)
                out.push_back({a.coef * b.coef, a.px + b.px, a.py + b.py});
        return Polynomial2D(std::move(out)).compact();
    }

    std::string to_string() const {
        std::string s;
        for (const auto& t : terms_) {
            if (!s.empty()) s += "; ";
            s += format_full(t.coef) + "," + std::to_string(t.px) + "," + std::to_string(t.py);
        }
        return s;
    }

  private:
    Polynomial2D compact() const {
        std::vector<PolyTerm> out;
        for (const auto& t : terms_) {
            bool merged = false;
            for (auto& u : out) {
                if (u.px == t.px && u.py == t.py) {
                    u.coef += t.coef;
                    merged = true;
                    break;
                }
            }
            if (!merged) out.push_back(t);
        }
        std::erase_if(out, [](const PolyTerm& t) { return t.coef == 0.0; });
        return Polynomial2D(std::move(out));
    }

    static double ipow(double base, int e) {
        double acc = 1.0;
        for (int k = 0; k < e; ++k) acc *= base;
        return acc;
    }

    std::vector<PolyTerm> terms_;
};

// P(x,y) * exp(Q(x,y)) * exp(gamma t)
struct ExpPolyDesc {
    Polynomial2D poly = Polynomial2D::constant(1.0);
    Polynomial2D exponent;      // empty = no exponential factor
    double time_decay = 0.0;    // gamma

    double operator()(double t, Vec2 r) const {
        double v = poly(r);
        if (!exponent.empty()) v *= std::exp(exponent(r));
        if (time_decay != 0.0) v *= std::exp(time_decay * t);
        return v;
    }
};

struct CustomProblemDesc {
    std::string name = "custom";
    Rect domain;
    Polynomial2D diffusion;      // D(x,y), required, >= 0 on the domain
    Polynomial2D advection_x;    // optional
    Polynomial2D advection_y;    // optional
    Polynomial2D reaction;       // optional c(x,y)
    bool has_exact = false;
    ExpPolyDesc exact;           // defines u0, g and the manufactured source
    bool has_initial = false;
    ExpPolyDesc initial;         // required when exact is absent
    bool has_dirichlet = false;
    ExpPolyDesc dirichlet;       // required when exact is absent
};

// Manufactured source of the custom family, computed symbolically:
//   s = du/dt + div(v u) - div(D grad u) - c u
// for u = P e^Q e^(gamma t); every piece stays polynomial * e^Q.
inline ExpPolyDesc custom_manufactured_source(const CustomProblemDesc& d) {
    const Polynomial2D& P = d.exact.poly;
    const Polynomial2D& Q = d.exact.exponent;
    // (P e^Q)' = (P' + P Q') e^Q
    const auto ddx = [&Q](const Polynomial2D& f) { return f.dx() + f * Q.dx(); };
    const auto ddy = [&Q](const Polynomial2D& f) { return f.dy() + f * Q.dy(); };

    Polynomial2D bracket = P * d.exact.time_decay;            // du/dt
    if (!d.advection_x.empty()) bracket = bracket + ddx(d.advection_x * P);
    if (!d.advection_y.empty()) bracket = bracket + ddy(d.advection_y * P);
    bracket = bracket - ddx(d.diffusion * ddx(P));            // -div(D grad u)
    bracket = bracket - ddy(d.diffusion * ddy(P));
    if (!d.reaction.empty()) bracket = bracket - d.reaction * P;

    ExpPolyDesc s;
    s.poly = bracket;
    s.exponent = Q;
    s.time_decay = d.exact.time_decay;
    return s;
}

inline ProblemSpec build_custom_problem(const CustomProblemDesc& desc, double t0) {
    if (desc.diffusion.empty())
        throw std::invalid_argument("custom problem: diffusion polynomial is required");
    if (!desc.has_exact && (!desc.has_initial || !desc.has_dirichlet))
        throw std::invalid_argument(
            "custom problem: initial and dirichlet are required when no exact solution is given");

    // D >= 0 sampled over the closed domain.
    for (int i = 0; i <= 100; ++i) {
        for (int j = 0; j <= 100; ++j) {
            const Vec2 r{desc.domain.x_min + (desc.domain.x_max - desc.domain.x_min) * i / 100.0,
                         desc.domain.y_min + (desc.domain.y_max - desc.domain.y_min) * j / 100.0};
            if (desc.diffusion(r) < 0.0)
                throw std::invalid_argument("custom problem: diffusion is negative on the domain");
        }
    }

    ProblemSpec spec;
    spec.name = desc.name;
    spec.domain = desc.domain;
    const Polynomial2D d_poly = desc.diffusion;
    spec.diffusion = [d_poly](Vec2 r) { return d_poly(r); };
    const Polynomial2D gx = desc.diffusion.dx();
    const Polynomial2D gy = desc.diffusion.dy();
    if (!gx.empty() || !gy.empty())
        spec.grad_diffusion = [gx, gy](Vec2 r) { return Vec2{gx(r), gy(r)}; };
    if (!desc.advection_x.empty() || !desc.advection_y.empty()) {
        const Polynomial2D vx = desc.advection_x, vy = desc.advection_y;
        spec.advection = [vx, vy](Vec2 r) { return Vec2{vx(r), vy(r)}; };
    }
    if (!desc.reaction.empty()) {
        const Polynomial2D c = desc.reaction;
        spec.reaction = [c](double, Vec2 r) { return c(r); };
    }

    if (desc.has_exact) {
        const ExpPolyDesc u = desc.exact;
        spec.exact = [u](double t, Vec2 r) { return u(t, r); };
        spec.dirichlet = spec.exact;
        spec.initial = [u, t0](Vec2 r) { return u(t0, r); };
        const ExpPolyDesc s = custom_manufactured_source(desc);
        if (!s.poly.empty()) {
            spec.source_exact = [s](double t, Vec2 r) { return s(t, r); };
            spec.injection = [s](double t, Vec2 r, const SourceFieldSet&, CouplingMode) {
                return s(t, r);
            };
        }
    } else {
        const ExpPolyDesc u0 = desc.initial, g = desc.dirichlet;
        spec.initial = [u0, t0](Vec2 r) { return u0(t0, r); };
        spec.dirichlet = [g](double t, Vec2 r) { return g(t, r); };
    }
    return spec;
}

}  // namespace mcga
