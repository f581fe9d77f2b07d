#include "fdot/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace fdot {

SpaceTimeGrid::SpaceTimeGrid(const Domain& domain, double final_time, int nx, int ny, int nt,
                             const GammaSpec& gamma)
    : domain_(domain), final_time_(final_time), nx_(nx), ny_(ny), nt_(nt), gamma_spec_(gamma) {
    if (nx < 3 || ny < 3) throw std::invalid_argument("grid needs at least 3 nodes per direction");
    if (nt < 2) throw std::invalid_argument("grid needs at least 2 time levels");
    if (!(final_time > 0)) throw std::invalid_argument("final time must be positive");
    if (gamma.empty()) throw std::invalid_argument("measurement set must be nonempty");
    hx_ = domain.length_x() / (nx - 1);
    hy_ = domain.length_y() / (ny - 1);
    ht_ = final_time / (nt - 1);

    boundary_index_.assign(nodes(), -1);
    gamma_index_.assign(nodes(), -1);
    for (int n = 0; n < nodes(); ++n) {
        const int i = ix(n), j = iy(n);
        const bool on_x = (i == 0 || i == nx - 1);
        const bool on_y = (j == 0 || j == ny - 1);
        if (!on_x && !on_y) continue;
        Vec2 normal{on_x ? (i == 0 ? -1.0 : 1.0) : 0.0, on_y ? (j == 0 ? -1.0 : 1.0) : 0.0};
        if (on_x && on_y) {
            normal.x /= std::sqrt(2.0);
            normal.y /= std::sqrt(2.0);
        }
        boundary_index_[n] = static_cast<int>(boundary_.size());
        boundary_.push_back(n);
        boundary_normal_.push_back(normal);
        if (on_x && on_y) continue;

        const Edge edge = on_x ? (i == 0 ? Edge::left : Edge::right) : (j == 0 ? Edge::bottom : Edge::top);
        if (!gamma.contains(edge)) continue;
        gamma_index_[n] = static_cast<int>(gamma_.size());
        gamma_.push_back(n);
        gamma_normal_.push_back(normal);
        // Corners are excluded, so their half cells go to the adjacent edge nodes.
        const int along = on_x ? j : i, count = on_x ? ny : nx;
        const double h = on_x ? hy_ : hx_;
        gamma_weight_.push_back(h * (1.0 + 0.5 * (along == 1) + 0.5 * (along == count - 2)));
    }
    if (gamma_.empty()) throw std::invalid_argument("measurement set resolves to no grid nodes");
}

std::vector<double> SpaceTimeGrid::times() const {
    std::vector<double> ts(nt_);
    for (int n = 0; n < nt_; ++n) ts[n] = t(n);
    return ts;
}

double SpaceTimeGrid::area_weight(int n) const {
    const int i = ix(n), j = iy(n);
    double w = hx_ * hy_;
    if (i == 0 || i == nx_ - 1) w *= 0.5;
    if (j == 0 || j == ny_ - 1) w *= 0.5;
    return w;
}

bool SpaceTimeGrid::same_shape(const SpaceTimeGrid& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && nt_ == o.nt_ && domain_ == o.domain_ && final_time_ == o.final_time_ &&
           gamma_spec_ == o.gamma_spec_;
}

GridPtr make_grid(const Domain& domain, double final_time, int nx, int ny, int nt, const GammaSpec& gamma) {
    return std::make_shared<const SpaceTimeGrid>(domain, final_time, nx, ny, nt, gamma);
}

GridPtr make_grid(const ExperimentConfig& cfg) {
    return make_grid(cfg.domain, cfg.final_time, cfg.grid.nx, cfg.grid.ny, cfg.grid.nt, cfg.gamma_spec);
}

GridPtr make_data_grid(const ExperimentConfig& cfg) {
    const int r = cfg.data_refinement;
    return make_grid(cfg.domain, cfg.final_time, r * (cfg.grid.nx - 1) + 1, r * (cfg.grid.ny - 1) + 1,
                     r * (cfg.grid.nt - 1) + 1, cfg.gamma_spec);
}

// ---------------------------------------------------------------------------

FieldSeries::FieldSeries(GridPtr grid) : FieldSeries(grid, grid->times()) {}

FieldSeries::FieldSeries(GridPtr grid, std::vector<double> times)
    : grid_(std::move(grid)), times_(std::move(times)), nodes_(grid_->nodes()) {
    data_.assign(times_.size() * static_cast<std::size_t>(nodes_), 0.0);
}

BoundaryTrace::BoundaryTrace(GridPtr grid)
    : grid_(std::move(grid)), levels_(grid_->nt()), nodes_(static_cast<int>(grid_->gamma().size())) {
    data_.assign(static_cast<std::size_t>(levels_) * nodes_, 0.0);
}

// ---------------------------------------------------------------------------

void ParabolicProblem::validate(const SpaceTimeGrid& grid) const {
    if (!(coeffs.c > 0)) throw std::invalid_argument("c must be positive");
    if (!(coeffs.beta > 0)) throw std::invalid_argument("beta must be positive");
    for (int n = 0; n < grid.nodes(); ++n) {
        const double k = kappa ? kappa(grid.x(n), grid.y(n)) : coeffs.kappa;
        const double m = mu_a ? mu_a(grid.x(n), grid.y(n)) : coeffs.mu_a;
        if (!(k > 0)) throw std::invalid_argument("kappa must be positive everywhere");
        if (!(m >= 0)) throw std::invalid_argument("mu_a must be nonnegative everywhere");
    }
    if (!initial.empty() && static_cast<int>(initial.size()) != grid.nodes())
        throw std::invalid_argument("initial field does not match the grid");
}

SourceFn source_from_function(const SpaceTimeGrid& grid, SpaceTimeFn f) {
    std::vector<double> xs(grid.nodes()), ys(grid.nodes());
    for (int n = 0; n < grid.nodes(); ++n) {
        xs[n] = grid.x(n);
        ys[n] = grid.y(n);
    }
    return [xs = std::move(xs), ys = std::move(ys), f = std::move(f)](int, double, double t1, std::span<double> out) {
        for (std::size_t n = 0; n < out.size(); ++n) out[n] = f(xs[n], ys[n], t1);
    };
}

SourceFn source_from_series(const FieldSeries& series) {
    return [&series](int step, double, double, std::span<double> out) {
        const auto lvl = series.level(step + 1);
        std::copy(lvl.begin(), lvl.end(), out.begin());
    };
}

RobinFn robin_from_function(const SpaceTimeGrid& grid, SpaceTimeFn g) {
    std::vector<double> xs, ys;
    for (int n : grid.boundary()) {
        xs.push_back(grid.x(n));
        ys.push_back(grid.y(n));
    }
    return [xs = std::move(xs), ys = std::move(ys), g = std::move(g)](int, double, double t1, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = g(xs[k], ys[k], t1);
    };
}

namespace {

// Robin data on all boundary nodes from values on the measurement nodes. A corner takes half the
// sum of its measurement neighbours, so each adjacent edge owns half of the corner cell.
void scatter_to_boundary(const SpaceTimeGrid& grid, std::span<const double> level, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < grid.gamma().size(); ++k) out[grid.boundary_index(grid.gamma()[k])] = level[k];
    const int nx = grid.nx(), ny = grid.ny();
    for (int ci : {0, nx - 1})
        for (int cj : {0, ny - 1}) {
            double v = 0;
            for (int nb : {grid.node(ci == 0 ? 1 : nx - 2, cj), grid.node(ci, cj == 0 ? 1 : ny - 2)})
                if (grid.gamma_index(nb) >= 0) v += 0.5 * level[grid.gamma_index(nb)];
            out[grid.boundary_index(grid.node(ci, cj))] = v;
        }
}

}  // namespace

RobinFn robin_from_trace(const BoundaryTrace& trace) {
    return [&trace](int step, double, double, std::span<double> out) {
        scatter_to_boundary(*trace.grid(), trace.level(step + 1), out);
    };
}

// ---------------------------------------------------------------------------

StepOperator::StepOperator(const SpaceTimeGrid& grid, const ParabolicProblem& problem)
    : grid_(grid), inv_c_ht_(1.0 / (problem.coeffs.c * grid.ht())) {
    const int nx = grid.nx(), ny = grid.ny(), nn = grid.nodes();
    const double beta = problem.coeffs.beta;
    std::vector<double> kap(nn), mua(nn);
    for (int n = 0; n < nn; ++n) {
        kap[n] = problem.kappa ? problem.kappa(grid.x(n), grid.y(n)) : problem.coeffs.kappa;
        mua[n] = problem.mu_a ? problem.mu_a(grid.x(n), grid.y(n)) : problem.coeffs.mu_a;
    }
    auto face = [&](int a, int b) { return 2.0 * kap[a] * kap[b] / (kap[a] + kap[b]); };

    weight_.resize(nn);
    robin_gain_.setZero(static_cast<Eigen::Index>(grid.boundary().size()));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nn) * 5);

    for (int n = 0; n < nn; ++n) {
        const int i = grid.ix(n), j = grid.iy(n);
        const double w = grid.area_weight(n);
        weight_[n] = w;
        double diag = inv_c_ht_ + mua[n];
        double gain = 0.0;

        // One direction of the 5-point operator; `lo`/`hi` are neighbours, h the spacing.
        auto direction = [&](int idx, int count, int lo, int hi, double h) {
            if (idx > 0 && idx < count - 1) {
                const double kw = face(n, lo) / (h * h), ke = face(n, hi) / (h * h);
                diag += kw + ke;
                trip.emplace_back(n, lo, -w * kw);
                trip.emplace_back(n, hi, -w * ke);
            } else {
                // Ghost node eliminated with the central Robin closure.
                const int inner = idx == 0 ? hi : lo;
                const double kf = face(n, inner);
                const double k = 2.0 * kf / (h * h);
                diag += k + 2.0 * kf * beta / h;
                trip.emplace_back(n, inner, -w * k);
                gain += 2.0 * kf / h;
            }
        };
        direction(i, nx, i > 0 ? n - 1 : -1, i < nx - 1 ? n + 1 : -1, grid.hx());
        direction(j, ny, j > 0 ? n - nx : -1, j < ny - 1 ? n + nx : -1, grid.hy());
        trip.emplace_back(n, n, w * diag);
        if (grid.boundary_index(n) >= 0) robin_gain_[grid.boundary_index(n)] = w * gain;
    }
    matrix_.resize(nn, nn);
    matrix_.setFromTriplets(trip.begin(), trip.end());
    matrix_.makeCompressed();
    cg_.setTolerance(tolerance);
    cg_.setMaxIterations(10 * nn);
    cg_.compute(matrix_);
}

void StepOperator::rhs(std::span<const double> u_old, std::span<const double> source,
                       std::span<const double> robin, Eigen::VectorXd& out) const {
    const int nn = grid_.nodes();
    out.resize(nn);
    for (int n = 0; n < nn; ++n) out[n] = weight_[n] * (inv_c_ht_ * u_old[n] + (source.empty() ? 0.0 : source[n]));
    if (!robin.empty()) {
        const auto& bnd = grid_.boundary();
        for (std::size_t k = 0; k < bnd.size(); ++k) out[bnd[k]] += robin_gain_[static_cast<Eigen::Index>(k)] * robin[k];
    }
}

void StepOperator::solve(const Eigen::VectorXd& b, Eigen::VectorXd& x) const {
    if (b.squaredNorm() == 0.0) {
        x.setZero(b.size());
        return;
    }
    if (x.size() != b.size()) x.setZero(b.size());
    Eigen::VectorXd sol = cg_.solveWithGuess(b, x);
    if (cg_.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "conjugate gradient did not converge: iterations=" << cg_.iterations() << " error=" << cg_.error();
        throw SolverError(msg.str());
    }
    if (!sol.allFinite()) throw SolverError("non-finite values in implicit step solution");
    x = std::move(sol);
}

FieldSeries solve_forward(const ParabolicProblem& problem, const GridPtr& grid_ptr) {
    const auto& grid = *grid_ptr;
    problem.validate(grid);
    StepOperator op(grid, problem);
    FieldSeries u(grid_ptr);
    if (!problem.initial.empty()) std::copy(problem.initial.begin(), problem.initial.end(), u.level(0).begin());

    std::vector<double> src(problem.source ? grid.nodes() : 0);
    std::vector<double> g(problem.robin ? grid.boundary().size() : 0);
    Eigen::VectorXd b, x = Eigen::Map<const Eigen::VectorXd>(u.level(0).data(), grid.nodes());
    for (int n = 0; n + 1 < grid.nt(); ++n) {
        const double t0 = grid.t(n), t1 = grid.t(n + 1);
        if (problem.source) problem.source(n, t0, t1, src);
        if (problem.robin) problem.robin(n, t0, t1, g);
        op.rhs(u.level(n), src, g, b);
        try {
            op.solve(b, x);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " at step " + std::to_string(n) + " (t=" + std::to_string(t1) + ")");
        }
        std::copy(x.data(), x.data() + x.size(), u.level(n + 1).begin());
    }
    return u;
}

FieldSeries solve_adjoint(const BoundaryTrace& omega, const GridPtr& grid_ptr, const Coefficients& coeffs) {
    const auto& grid = *grid_ptr;
    if (!omega.grid() || !omega.grid()->same_shape(grid)) throw std::invalid_argument("omega is not defined on this grid");
    const int last = grid.nt() - 1;
    ParabolicProblem reversed;
    reversed.coeffs = coeffs;
    // Reversed step m -> m+1 lands on original level last-(m+1).
    reversed.robin = [&omega, &grid, last](int m, double, double, std::span<double> out) {
        scatter_to_boundary(grid, omega.level(last - (m + 1)), out);
    };
    FieldSeries psi = solve_forward(reversed, grid_ptr);
    FieldSeries phi(grid_ptr);
    for (int n = 0; n <= last; ++n) {
        const auto src = psi.level(last - n);
        std::copy(src.begin(), src.end(), phi.level(n).begin());
    }
    return phi;
}

BoundaryTrace boundary_flux(const FieldSeries& field) {
    const auto& grid = *field.grid();
    if (field.levels() != grid.nt()) throw std::invalid_argument("boundary_flux needs one level per grid time level");
    BoundaryTrace flux(field.grid());
    const int nx = grid.nx();
    for (std::size_t k = 0; k < grid.gamma().size(); ++k) {
        const int n = grid.gamma()[k];
        const int i = grid.ix(n), j = grid.iy(n);
        int step;
        double h;
        if (i == 0) { step = 1; h = grid.hx(); }
        else if (i == nx - 1) { step = -1; h = grid.hx(); }
        else if (j == 0) { step = nx; h = grid.hy(); }
        else { step = -nx; h = grid.hy(); }
        for (int lvl = 0; lvl < field.levels(); ++lvl) {
            const auto u = field.level(lvl);
            flux.at(lvl, static_cast<int>(k)) = (3.0 * u[n] - 4.0 * u[n + step] + u[n + 2 * step]) / (2.0 * h);
        }
    }
    return flux;
}

std::vector<double> trapezoid_weights(const std::vector<double>& times) {
    std::vector<double> w(times.size(), 0.0);
    for (std::size_t n = 0; n + 1 < times.size(); ++n) {
        const double dt = times[n + 1] - times[n];
        w[n] += 0.5 * dt;
        w[n + 1] += 0.5 * dt;
    }
    return w;
}

double inner_product_space_time(const FieldSeries& a, const FieldSeries& b) {
    if (!a.grid() || !b.grid() || !a.grid()->same_shape(*b.grid()) || a.times() != b.times())
        throw std::invalid_argument("inner product of fields on different domains");
    const auto& grid = *a.grid();
    const auto tw = trapezoid_weights(a.times());
    std::vector<double> aw(grid.nodes());
    for (int n = 0; n < grid.nodes(); ++n) aw[n] = grid.area_weight(n);
    double total = 0.0;
    for (int lvl = 0; lvl < a.levels(); ++lvl) {
        const auto x = a.level(lvl), y = b.level(lvl);
        double s = 0.0;
        for (int n = 0; n < grid.nodes(); ++n) s += aw[n] * x[n] * y[n];
        total += tw[lvl] * s;
    }
    return total;
}

double inner_product_space_time(const BoundaryTrace& a, const BoundaryTrace& b) {
    if (!a.grid() || !b.grid() || !a.grid()->same_shape(*b.grid()))
        throw std::invalid_argument("inner product of traces on different domains");
    const auto& grid = *a.grid();
    const auto tw = trapezoid_weights(grid.times());
    const auto& gw = grid.gamma_weight();
    double total = 0.0;
    for (int lvl = 0; lvl < a.levels(); ++lvl) {
        const auto x = a.level(lvl), y = b.level(lvl);
        double s = 0.0;
        for (int k = 0; k < a.nodes(); ++k) s += gw[k] * x[k] * y[k];
        total += tw[lvl] * s;
    }
    return total;
}

double l2_norm(const BoundaryTrace& a) { return std::sqrt(inner_product_space_time(a, a)); }

void write_csv(const FieldSeries& field, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const auto& grid = *field.grid();
    out << "t,x,y,value\n";
    for (int lvl = 0; lvl < field.levels(); ++lvl) {
        for (int n = 0; n < grid.nodes(); ++n) {
            out << format_double(field.times()[lvl]) << ',' << format_double(grid.x(n)) << ','
                << format_double(grid.y(n)) << ',' << format_double(field.at(lvl, n)) << '\n';
        }
    }
}

void write_csv(const BoundaryTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const auto& grid = *trace.grid();
    out << "t,x,y,value\n";
    for (int lvl = 0; lvl < trace.levels(); ++lvl) {
        for (int k = 0; k < trace.nodes(); ++k) {
            const int n = grid.gamma()[k];
            out << format_double(grid.t(lvl)) << ',' << format_double(grid.x(n)) << ',' << format_double(grid.y(n))
                << ',' << format_double(trace.at(lvl, k)) << '\n';
        }
    }
}

}  // namespace fdot
