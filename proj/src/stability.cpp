#include "fdot/stability.hpp"

#include <algorithm>
#include <cmath>

namespace fdot {

namespace {

int level_of(const SpaceTimeGrid& grid, double t) {
    const double s = t / grid.ht();
    const int lvl = static_cast<int>(std::lround(s));
    if (std::abs(s - lvl) > 1e-9 || lvl < 0 || lvl >= grid.nt())
        throw std::invalid_argument("time mesh point " + std::to_string(t) + " is not a grid level");
    return lvl;
}

double area_dot(const SpaceTimeGrid& grid, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (int n = 0; n < grid.nodes(); ++n) s += grid.area_weight(n) * a[n] * b[n];
    return s;
}

void check_mesh(const SourceVector& p, const OmegaBasis& basis) {
    if (p.mesh != basis.mesh() || !p.grid->same_shape(*basis.grid()))
        throw std::invalid_argument("source and basis use different meshes");
}

// cos(a pi x) cos(b pi y) cos(c pi t / T) in coordinates scaled to the unit square.
BoundaryTrace trig_trace(const GridPtr& grid, int a, int b, int c) {
    const Domain& d = grid->domain();
    const double T = grid->final_time();
    BoundaryTrace w(grid);
    for (int lvl = 0; lvl < w.levels(); ++lvl)
        for (int k = 0; k < w.nodes(); ++k) {
            const int n = grid->gamma()[k];
            const double x = (grid->x(n) - d.x_min) / d.length_x();
            const double y = (grid->y(n) - d.y_min) / d.length_y();
            w.at(lvl, k) = std::cos(a * M_PI * x) * std::cos(b * M_PI * y) * std::cos(c * M_PI * grid->t(lvl) / T);
        }
    return w;
}

}  // namespace

std::vector<std::vector<double>> interval_integrals(const FieldSeries& phi, const std::vector<double>& mesh) {
    const auto& grid = *phi.grid();
    std::vector<std::vector<double>> out(mesh.size() - 1, std::vector<double>(grid.nodes(), 0.0));
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k) {
        const int a = level_of(grid, mesh[k]), b = level_of(grid, mesh[k + 1]);
        for (int lvl = a; lvl < b; ++lvl) {
            const double dt = 0.5 * (grid.t(lvl + 1) - grid.t(lvl));
            const auto u0 = phi.level(lvl), u1 = phi.level(lvl + 1);
            for (int n = 0; n < grid.nodes(); ++n) out[k][n] += dt * (u0[n] + u1[n]);
        }
    }
    return out;
}

double bilinear_functional(const SourceVector& p, const BoundaryTrace& omega, const Coefficients& coeffs) {
    p.validate();
    const FieldSeries phi = solve_adjoint(omega, p.grid, coeffs);
    const auto integrals = interval_integrals(phi, p.mesh);
    double s = 0;
    for (int k = 0; k < p.K(); ++k) s += area_dot(*p.grid, p.p[k], integrals[k]);
    return s;
}

// ---------------------------------------------------------------------------

BoundaryTrace smoothed_random_trace(const GridPtr& grid, RngStream& rng) {
    BoundaryTrace w(grid);
    for (double& v : w.data()) v = rng.normal();
    const int L = w.levels(), G = w.nodes();
    std::vector<double> tmp;
    for (int pass = 0; pass < 4; ++pass) {
        // along the measurement nodes (list order follows the edges)
        for (int lvl = 0; lvl < L; ++lvl) {
            auto row = w.level(lvl);
            tmp.assign(row.begin(), row.end());
            for (int k = 0; k < G; ++k) {
                const double l = tmp[std::max(k - 1, 0)], r = tmp[std::min(k + 1, G - 1)];
                row[k] = 0.25 * l + 0.5 * tmp[k] + 0.25 * r;
            }
        }
        // in time
        for (int k = 0; k < G; ++k) {
            tmp.resize(L);
            for (int lvl = 0; lvl < L; ++lvl) tmp[lvl] = w.at(lvl, k);
            for (int lvl = 0; lvl < L; ++lvl)
                w.at(lvl, k) = 0.25 * tmp[std::max(lvl - 1, 0)] + 0.5 * tmp[lvl] + 0.25 * tmp[std::min(lvl + 1, L - 1)];
        }
    }
    return w;
}

SourceVector random_source(const GridPtr& grid, const std::vector<double>& mesh, RngStream& rng) {
    SourceVector s = SourceVector::zeros(grid, mesh);
    const Domain& d = grid->domain();
    for (auto& pk : s.p) {
        for (int mode = 0; mode < 4; ++mode) {
            const double a = rng.normal();
            const int fx = static_cast<int>(rng.index(4)), fy = static_cast<int>(rng.index(4));
            const double px = rng.uniform(0, 2 * M_PI), py = rng.uniform(0, 2 * M_PI);
            for (int n = 0; n < grid->nodes(); ++n) {
                const double x = (grid->x(n) - d.x_min) / d.length_x(), y = (grid->y(n) - d.y_min) / d.length_y();
                pk[n] += a * std::cos(M_PI * fx * x + px) * std::cos(M_PI * fy * y + py);
            }
        }
    }
    return s;
}

SourceVector random_positive_source(const GridPtr& grid, const std::vector<double>& mesh, RngStream& rng) {
    SourceVector s = random_source(grid, mesh, rng);
    for (auto& pk : s.p) {
        double m = 0;
        for (double v : pk) m = std::max(m, std::abs(v));
        for (double& v : pk) v += 1.2 * m + 1e-3;
    }
    return s;
}

BoundaryTrace random_positive_trace(const GridPtr& grid, RngStream& rng) {
    BoundaryTrace w(grid);
    double offset = 1e-3;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 4; ++c) {
                const double z = rng.normal();
                offset += std::abs(z);
                const BoundaryTrace e = trig_trace(grid, a, b, c);
                for (std::size_t i = 0; i < w.data().size(); ++i) w.data()[i] += z * e.data()[i];
            }
    for (double& v : w.data()) v += offset;
    return w;
}

OmegaBasis OmegaBasis::from_traces(const std::vector<BoundaryTrace>& traces, const Coefficients& coeffs,
                                   const std::vector<double>& mesh) {
    if (traces.empty()) throw std::invalid_argument("omega basis must not be empty");
    OmegaBasis b;
    b.grid_ = traces.front().grid();
    b.mesh_ = mesh;
    for (const auto& w : traces) {
        const double norm = l2_norm(w);
        if (!(norm > 0)) throw std::invalid_argument("omega basis element has zero norm");
        b.elements_.push_back(
            {Family::smoothed_random, w, norm, interval_integrals(solve_adjoint(w, b.grid_, coeffs), mesh)});
    }
    return b;
}

OmegaBasis OmegaBasis::build(const GridPtr& grid, const Coefficients& coeffs, const std::vector<double>& mesh, int M,
                             const RngStream& rng) {
    if (M < 1) throw std::invalid_argument("omega basis needs at least one element");
    std::vector<BoundaryTrace> traces;
    std::vector<Family> family;
    for (int a = 0; a < 4 && static_cast<int>(traces.size()) < std::min(M, 32); ++a)
        for (int b = 0; b < 2 && static_cast<int>(traces.size()) < std::min(M, 32); ++b)
            for (int c = 0; c < 4 && static_cast<int>(traces.size()) < std::min(M, 32); ++c) {
                traces.push_back(trig_trace(grid, a, b, c));
                family.push_back(Family::trigonometric);
            }
    RngStream r = rng.substream("omega-basis");
    while (static_cast<int>(traces.size()) < M) {
        traces.push_back(smoothed_random_trace(grid, r));
        family.push_back(Family::smoothed_random);
    }
    OmegaBasis basis = from_traces(traces, coeffs, mesh);
    for (int j = 0; j < M; ++j) basis.elements_[j].family = family[j];
    return basis;
}

OmegaBasis OmegaBasis::prefix(int m) const {
    if (m < 1 || m > size()) throw std::invalid_argument("basis prefix out of range");
    OmegaBasis b;
    b.grid_ = grid_;
    b.mesh_ = mesh_;
    b.elements_.assign(elements_.begin(), elements_.begin() + m);
    return b;
}

double OmegaBasis::pair(const SourceVector& p, int j) const {
    const auto& e = elements_[j];
    double s = 0;
    for (int k = 0; k < p.K(); ++k) s += area_dot(*grid_, p.p[k], e.integrals[k]);
    return s;
}

double weighted_norm_estimate(const SourceVector& p, const OmegaBasis& basis) {
    check_mesh(p, basis);
    double best = 0;
    for (int j = 0; j < basis.size(); ++j) best = std::max(best, std::abs(basis.pair(p, j)) / basis[j].norm);
    return best;
}

BoundaryTrace emission_flux(const SourceVector& p, const Coefficients& coeffs) {
    p.validate();
    ParabolicProblem prob;
    prob.coeffs = coeffs;
    prob.source = source_from_semidiscrete(p);
    return boundary_flux(solve_forward(prob, p.grid));
}

StabilityRecord stability_check(const SourceVector& p, const SourceVector& q, const OmegaBasis& basis,
                                const Coefficients& coeffs) {
    check_mesh(p, basis);
    check_mesh(q, basis);
    StabilityRecord r;
    r.lhs = weighted_norm_estimate(p - q, basis);
    BoundaryTrace diff = emission_flux(p, coeffs);
    const BoundaryTrace fq = emission_flux(q, coeffs);
    for (std::size_t i = 0; i < diff.data().size(); ++i) diff.data()[i] -= fq.data()[i];
    r.rhs = l2_norm(diff);
    r.satisfied = r.lhs <= r.rhs * (1 + kStabilityTolerance);
    return r;
}

double relative_mismatch(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0 ? std::abs(a - b) / scale : 0.0;
}

IdentityRecord identity_check(const SourceVector& p, const BoundaryTrace& omega, const Coefficients& coeffs) {
    IdentityRecord r;
    r.lhs = bilinear_functional(p, omega, coeffs);
    r.plain = inner_product_space_time(omega, emission_flux(p, coeffs));
    r.weighted = -coeffs.kappa / coeffs.beta * r.plain;
    r.plain_mismatch = relative_mismatch(r.lhs, r.plain);
    r.weighted_mismatch = relative_mismatch(r.lhs, r.weighted);
    return r;
}

double operator_norm_constant(const OmegaBasis& basis) {
    double c = 0;
    for (int j = 0; j < basis.size(); ++j)
        for (const auto& phi : basis[j].integrals)
            c = std::max(c, std::sqrt(area_dot(*basis.grid(), phi, phi)) / basis[j].norm);
    return c;
}

NormAxiomReport norm_axiom_suite(const OmegaBasis& basis, int trials, RngStream& rng) {
    NormAxiomReport rep;
    rep.trials = trials;
    rep.constant = operator_norm_constant(basis);
    rep.zero_value = weighted_norm_estimate(SourceVector::zeros(basis.grid(), basis.mesh()), basis);
    for (int i = 0; i < trials; ++i) {
        const SourceVector p = random_source(basis.grid(), basis.mesh(), rng);
        const SourceVector q = random_source(basis.grid(), basis.mesh(), rng);
        const double ep = weighted_norm_estimate(p, basis);
        const double eq = weighted_norm_estimate(q, basis);
        if (ep < 0 || eq < 0) rep.nonnegative = false;
        for (double c : {-2.0, rng.uniform(-5, 5)}) {
            const double ec = weighted_norm_estimate(c * p, basis);
            if (ep > 0) rep.homogeneity_error = std::max(rep.homogeneity_error, std::abs(ec - std::abs(c) * ep) / (std::abs(c) * ep));
        }
        if (weighted_norm_estimate(p + q, basis) > ep + eq + 1e-10) ++rep.triangle_violations;
        if (ep > rep.constant * p.l1_l2_norm() * (1 + 1e-12)) ++rep.bound_violations;
    }
    return rep;
}

}  // namespace fdot
