#include "fdot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace fdot {

ExactSourceSpec ExactSourceSpec::from_name(const std::string& name) {
    if (name == "example1") return example1();
    if (name == "example2") return example2();
    throw std::invalid_argument("unknown example '" + name + "'");
}

double example2_profile(double r) {
    if (r <= M_PI / 6.0) return 15.0 * (std::cos(r) - std::sqrt(3.0) / 2.0) + 2.0;
    return 2.0;
}

double exact_mu_f(const ExactSourceSpec& spec, double x, double y, double t) {
    switch (spec.tag) {
        case ExactSourceSpec::Tag::example1:
            return 5.0 + t + std::cos(M_PI * x) * std::cos(M_PI * y);
        case ExactSourceSpec::Tag::example2:
            return (t + 1.0) * example2_profile(std::hypot(x - 0.5, y - 0.5));
        case ExactSourceSpec::Tag::custom:
            return spec.custom(x, y, t);
    }
    return 0.0;
}

double excitation_input(double x, double, double t) { return -20.0 * t * x * (x - 1.0); }

// ---------------------------------------------------------------------------

std::vector<double> uniform_time_mesh(double final_time, int K) {
    if (K < 1) throw std::invalid_argument("time mesh needs at least one interval");
    std::vector<double> mesh(K + 1);
    for (int k = 0; k <= K; ++k) mesh[k] = final_time * k / K;
    mesh[K] = final_time;
    return mesh;
}

SourceVector SourceVector::zeros(GridPtr grid, std::vector<double> mesh) {
    SourceVector s;
    s.grid = std::move(grid);
    s.mesh = std::move(mesh);
    s.p.assign(s.mesh.size() - 1, std::vector<double>(s.grid->nodes(), 0.0));
    s.validate();
    return s;
}

void SourceVector::validate() const {
    if (!grid) throw std::invalid_argument("source vector without grid");
    if (p.empty() || mesh.size() != p.size() + 1) throw std::invalid_argument("source vector needs K >= 1 and K+1 mesh times");
    if (mesh.front() != 0.0) throw std::invalid_argument("time mesh must start at 0");
    for (std::size_t k = 0; k + 1 < mesh.size(); ++k)
        if (!(mesh[k + 1] > mesh[k])) throw std::invalid_argument("time mesh must be strictly increasing");
    for (const auto& pk : p)
        if (static_cast<int>(pk.size()) != grid->nodes()) throw std::invalid_argument("component does not match grid");
}

namespace {
void check_compatible(const SourceVector& a, const SourceVector& b) {
    if (a.mesh != b.mesh || a.p.size() != b.p.size() || !a.grid->same_shape(*b.grid))
        throw std::invalid_argument("source vectors live on different meshes");
}
}  // namespace

SourceVector& SourceVector::operator+=(const SourceVector& o) {
    check_compatible(*this, o);
    for (std::size_t k = 0; k < p.size(); ++k)
        for (std::size_t n = 0; n < p[k].size(); ++n) p[k][n] += o.p[k][n];
    return *this;
}

SourceVector& SourceVector::operator-=(const SourceVector& o) {
    check_compatible(*this, o);
    for (std::size_t k = 0; k < p.size(); ++k)
        for (std::size_t n = 0; n < p[k].size(); ++n) p[k][n] -= o.p[k][n];
    return *this;
}

SourceVector& SourceVector::operator*=(double s) {
    for (auto& pk : p)
        for (double& v : pk) v *= s;
    return *this;
}

int SourceVector::interval(double t) const {
    auto it = std::upper_bound(mesh.begin(), mesh.end(), t);
    int k = static_cast<int>(it - mesh.begin()) - 1;
    return std::clamp(k, 0, K() - 1);
}

double SourceVector::l1_l2_norm() const {
    double total = 0.0;
    for (const auto& pk : p) {
        double s = 0.0;
        for (int n = 0; n < grid->nodes(); ++n) s += grid->area_weight(n) * pk[n] * pk[n];
        total += std::sqrt(s);
    }
    return total;
}

SourceFn source_from_semidiscrete(const SourceVector& p) {
    return [&p](int, double t0, double t1, std::span<double> out) {
        const auto& pk = p.p[p.interval(0.5 * (t0 + t1))];
        std::copy(pk.begin(), pk.end(), out.begin());
    };
}

namespace {

// Linear interpolation of a field series in time.
void interpolate_level(const FieldSeries& f, double t, std::vector<double>& out) {
    const auto& ts = f.times();
    if (t < ts.front() - 1e-12 || t > ts.back() + 1e-12) throw std::invalid_argument("time outside the field's range");
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    int hi = std::clamp(static_cast<int>(it - ts.begin()), 1, f.levels() - 1);
    int lo = hi - 1;
    const double span = ts[hi] - ts[lo];
    double a = span > 0 ? (t - ts[lo]) / span : 0.0;
    a = std::clamp(a, 0.0, 1.0);
    out.resize(f.nodes());
    const auto L = f.level(lo), H = f.level(hi);
    if (a == 0.0) {
        std::copy(L.begin(), L.end(), out.begin());
    } else if (a == 1.0) {
        std::copy(H.begin(), H.end(), out.begin());
    } else {
        for (int n = 0; n < f.nodes(); ++n) out[n] = (1.0 - a) * L[n] + a * H[n];
    }
}

}  // namespace

SourceVector project_semidiscrete(const SpaceTimeFn& mu_f, const FieldSeries& u_e, const std::vector<double>& mesh) {
    const auto& grid = *u_e.grid();
    if (mesh.size() < 2) throw std::invalid_argument("time mesh needs at least one interval");
    if (mesh.front() < 0.0 || mesh.back() > grid.final_time() + 1e-12)
        throw std::invalid_argument("time mesh lies outside [0, T]");
    SourceVector s = SourceVector::zeros(u_e.grid(), mesh);
    std::vector<double> ue;
    for (int k = 0; k < s.K(); ++k) {
        const double t = mesh[k];
        interpolate_level(u_e, t, ue);
        for (int n = 0; n < grid.nodes(); ++n) s.p[k][n] = mu_f(grid.x(n), grid.y(n), t) * ue[n];
    }
    return s;
}

double default_eps_floor(const FieldSeries& u_e) {
    double m = 0.0;
    for (double v : u_e.data()) m = std::max(m, std::abs(v));
    return m > 0 ? 1e-3 * m : std::numeric_limits<double>::min();
}

FieldSeries recover_mu_from_p(const SourceVector& p, const FieldSeries& u_e, double eps_floor) {
    if (!(eps_floor > 0)) throw std::invalid_argument("eps_floor must be positive");
    std::vector<double> times(p.mesh.begin(), p.mesh.end() - 1);
    FieldSeries mu(u_e.grid(), times);
    std::vector<double> ue;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < p.K(); ++k) {
        interpolate_level(u_e, times[k], ue);
        auto out = mu.level(k);
        for (int n = 0; n < mu.nodes(); ++n) out[n] = std::abs(ue[n]) >= eps_floor ? p.p[k][n] / ue[n] : nan;
    }
    return mu;
}

// ---------------------------------------------------------------------------

FieldSeries solve_excitation(const Coefficients& coeffs, const GridPtr& grid) {
    ParabolicProblem prob;
    prob.coeffs = coeffs;
    prob.robin = robin_from_function(*grid, excitation_input);
    return solve_forward(prob, grid);
}

FieldSeries solve_emission(const Coefficients& coeffs, const GridPtr& grid, const SpaceTimeFn& mu_f,
                           const FieldSeries& u_e) {
    ParabolicProblem prob;
    prob.coeffs = coeffs;
    std::vector<double> xs(grid->nodes()), ys(grid->nodes());
    for (int n = 0; n < grid->nodes(); ++n) {
        xs[n] = grid->x(n);
        ys[n] = grid->y(n);
    }
    prob.source = [&u_e, &mu_f, xs, ys](int step, double, double t1, std::span<double> out) {
        const auto ue = u_e.level(step + 1);
        for (std::size_t n = 0; n < out.size(); ++n) out[n] = mu_f(xs[n], ys[n], t1) * ue[n];
    };
    return solve_forward(prob, grid);
}

BoundaryTrace generate_measurement(const Coefficients& coeffs, const GridPtr& grid, const ExactSourceSpec& spec) {
    const FieldSeries u_e = solve_excitation(coeffs, grid);
    const SpaceTimeFn mu = [&spec](double x, double y, double t) { return exact_mu_f(spec, x, y, t); };
    return boundary_flux(solve_emission(coeffs, grid, mu, u_e));
}

BoundaryTrace generate_measurement(const Coefficients& coeffs, const GridPtr& data_grid,
                                   const SpaceTimeGrid& inversion_grid, const ExactSourceSpec& spec) {
    const auto& g = *data_grid;
    if (g.nx() - 1 < 2 * (inversion_grid.nx() - 1) || g.ny() - 1 < 2 * (inversion_grid.ny() - 1) ||
        g.nt() - 1 < 2 * (inversion_grid.nt() - 1))
        throw std::invalid_argument("measurement grid must be at least twice as fine as the inversion grid");
    return generate_measurement(coeffs, data_grid, spec);
}

BoundaryTrace add_noise(const BoundaryTrace& trace, double delta, RngStream& rng) {
    if (delta < 0) throw std::invalid_argument("noise level must be nonnegative");
    BoundaryTrace out = trace;
    if (delta == 0.0) return out;
    for (double& v : out.data()) v += delta * (2.0 * rng.uniform() - 1.0);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<MeasurementSample> to_samples(const BoundaryTrace& clean, const BoundaryTrace& noisy) {
    const auto& grid = *clean.grid();
    if (noisy.data().size() != clean.data().size()) throw std::invalid_argument("trace shapes differ");
    std::vector<MeasurementSample> out;
    out.reserve(clean.data().size());
    for (int lvl = 0; lvl < clean.levels(); ++lvl) {
        for (int k = 0; k < clean.nodes(); ++k) {
            const int n = grid.gamma()[k];
            const auto nrm = grid.gamma_normal()[k];
            out.push_back({grid.t(lvl), grid.x(n), grid.y(n), nrm.x, nrm.y, clean.at(lvl, k), noisy.at(lvl, k)});
        }
    }
    return out;
}

void write_measurement_csv(const std::vector<MeasurementSample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "t,x,y,value,noisy_value\n";
    for (const auto& s : samples) {
        out << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
            << format_double(s.value) << ',' << format_double(s.noisy_value) << '\n';
    }
}

std::vector<MeasurementSample> read_measurement_csv(const std::filesystem::path& path, const Domain& domain) {
    const Table t = import_table(path);
    auto col = [&](const std::string& name) {
        auto it = std::find(t.columns.begin(), t.columns.end(), name);
        if (it == t.columns.end()) throw std::runtime_error("measurement CSV lacks column '" + name + "'");
        return static_cast<std::size_t>(it - t.columns.begin());
    };
    const auto ct = col("t"), cx = col("x"), cy = col("y"), cv = col("value"), cn = col("noisy_value");
    const double tol = 1e-9 * std::max(domain.length_x(), domain.length_y());
    std::vector<MeasurementSample> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        MeasurementSample s{r[ct], r[cx], r[cy], 0.0, 0.0, r[cv], r[cn]};
        if (std::abs(s.x - domain.x_min) < tol) s.nx = -1;
        else if (std::abs(s.x - domain.x_max) < tol) s.nx = 1;
        else if (std::abs(s.y - domain.y_min) < tol) s.ny = -1;
        else if (std::abs(s.y - domain.y_max) < tol) s.ny = 1;
        else throw std::runtime_error("measurement sample is not on the boundary");
        out.push_back(s);
    }
    return out;
}

}  // namespace fdot
