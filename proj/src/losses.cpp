#include "fdot/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fdot {

namespace {

constexpr std::array<Edge, 4> kEdges{Edge::left, Edge::right, Edge::bottom, Edge::top};

double edge_length(const Domain& d, Edge e) {
    return (e == Edge::left || e == Edge::right) ? d.length_y() : d.length_x();
}

Vec2 edge_normal(Edge e) {
    switch (e) {
    case Edge::left: return {-1, 0};
    case Edge::right: return {1, 0};
    case Edge::bottom: return {0, -1};
    case Edge::top: return {0, 1};
    }
    return {};
}

// Edge of an axis-aligned outward normal, or -1 when the normal is not one of the four.
int edge_of_normal(double nx, double ny) {
    if (nx == -1 && ny == 0) return 0;
    if (nx == 1 && ny == 0) return 1;
    if (nx == 0 && ny == -1) return 2;
    if (nx == 0 && ny == 1) return 3;
    return -1;
}

// Interior jets need u, u_t and the Laplacian only.
const JetLayout& interior_layout() {
    static const JetLayout l = JetLayout::of({T, X, Y, XX, YY});
    return l;
}

double apply(const std::array<double, 10>& a, const JetLayout& l, const Eigen::MatrixXd& out, int j) {
    double s = 0;
    for (int c = 0; c < 10; ++c)
        if (a[c] != 0) s += a[c] * out(l.pos(Comp(c)), j);
    return s;
}

void scatter(const std::array<double, 10>& a, const JetLayout& l, double scale, Eigen::MatrixXd& d_out, int j) {
    for (int c = 0; c < 10; ++c)
        if (a[c] != 0) d_out(l.pos(Comp(c)), j) += scale * a[c];
}

double interior_operator(const JetLayout& l, const Eigen::MatrixXd& out, int j, const Coefficients& k) {
    return out(l.pos(T), j) / k.c - k.kappa * (out(l.pos(XX), j) + out(l.pos(YY), j)) + k.mu_a * out(V, j);
}

void interior_adjoint(const JetLayout& l, double g, Eigen::MatrixXd& d_out, int j, const Coefficients& k) {
    d_out(l.pos(T), j) += g / k.c;
    d_out(l.pos(XX), j) -= g * k.kappa;
    d_out(l.pos(YY), j) -= g * k.kappa;
    d_out(V, j) += g * k.mu_a;
}

// Persistent per-thread tapes, one per collocation subset, so buffers keep their size across epochs.
struct Workspace {
    JetTape interior, spatial, spatial2, temporal, data, source;
    Eigen::MatrixXd d_out, d_out2, d_f;
};

Workspace& workspace() {
    thread_local Workspace ws;
    return ws;
}

JetTape::Points single(const CollocationPoint& p) {
    JetTape::Points pts(3, 1);
    pts << p.x, p.y, p.t;
    return pts;
}

Eigen::Matrix2Xd single_normal(const CollocationPoint& p) {
    Eigen::Matrix2Xd n(2, 1);
    n << p.nx, p.ny;
    return n;
}

// (n + sign tau) / sqrt 2 per column, tau = (-n_y, n_x).
Eigen::Matrix2Xd diagonal_directions(const Eigen::Matrix2Xd& n, double sign) {
    Eigen::Matrix2Xd d(2, n.cols());
    d.row(0) = (n.row(0) - sign * n.row(1)) * M_SQRT1_2;
    d.row(1) = (n.row(1) + sign * n.row(0)) * M_SQRT1_2;
    return d;
}

}  // namespace

std::array<int, 4> split_by_edge_length(const Domain& domain, int total) {
    const double perimeter = 2 * (domain.length_x() + domain.length_y());
    std::array<int, 4> n{};
    std::array<double, 4> frac{};
    int assigned = 0;
    for (int e = 0; e < 4; ++e) {
        const double share = total * edge_length(domain, kEdges[e]) / perimeter;
        n[e] = static_cast<int>(std::floor(share));
        frac[e] = share - n[e];
        assigned += n[e];
    }
    std::array<int, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (int i = 0; assigned < total; ++i, ++assigned) ++n[order[i % 4]];
    return n;
}

CollocationSet sample_collocation(const ExperimentConfig& cfg, const CollocationCounts& counts, const RngStream& rng,
                                  int epoch, const std::vector<MeasurementSample>& data) {
    const Domain& dom = cfg.domain;
    const double T = cfg.final_time;
    const double area = dom.length_x() * dom.length_y();
    const RngStream base = rng.substream("epoch/" + std::to_string(epoch));
    CollocationSet set;

    RngStream ri = base.substream("interior");
    set.interior.resize(counts.n_int);
    for (int i = 0; i < counts.n_int; ++i) {
        set.interior.points(0, i) = ri.uniform(dom.x_min, dom.x_max);
        set.interior.points(1, i) = ri.uniform(dom.y_min, dom.y_max);
        set.interior.points(2, i) = ri.uniform(0.0, T);
    }
    set.interior.weight.setConstant(counts.n_int > 0 ? area * T / counts.n_int : 0.0);

    RngStream rs = base.substream("spatial");
    const auto per_edge = split_by_edge_length(dom, counts.n_sb);
    set.spatial.resize(counts.n_sb);
    set.spatial.normal.resize(2, counts.n_sb);
    int col = 0;
    for (int e = 0; e < 4; ++e) {
        const Edge edge = kEdges[e];
        const Vec2 n = edge_normal(edge);
        const double w = per_edge[e] > 0 ? edge_length(dom, edge) * T / per_edge[e] : 0.0;
        for (int i = 0; i < per_edge[e]; ++i, ++col) {
            double x, y;
            if (edge == Edge::left || edge == Edge::right) {
                x = edge == Edge::left ? dom.x_min : dom.x_max;
                y = rs.uniform(dom.y_min, dom.y_max);
            } else {
                x = rs.uniform(dom.x_min, dom.x_max);
                y = edge == Edge::bottom ? dom.y_min : dom.y_max;
            }
            set.spatial.points.col(col) << x, y, rs.uniform(0.0, T);
            set.spatial.normal.col(col) << n.x, n.y;
            set.spatial.weight(col) = w;
        }
    }

    RngStream rt = base.substream("temporal");
    set.temporal.resize(counts.n_tb);
    for (int i = 0; i < counts.n_tb; ++i) {
        set.temporal.points(0, i) = rt.uniform(dom.x_min, dom.x_max);
        set.temporal.points(1, i) = rt.uniform(dom.y_min, dom.y_max);
        set.temporal.points(2, i) = 0.0;
    }
    set.temporal.weight.setConstant(counts.n_tb > 0 ? area / counts.n_tb : 0.0);

    set.data.resize(0);
    set.data.normal.resize(2, 0);
    set.data.phi.resize(0);
    if (counts.n_d > 0 && !data.empty()) {
        std::vector<int> pool;
        for (int i = 0; i < static_cast<int>(data.size()); ++i) {
            const int e = edge_of_normal(data[i].nx, data[i].ny);
            if (data[i].t > 0 && e >= 0 && cfg.gamma_spec.contains(kEdges[e])) pool.push_back(i);
        }
        if (pool.empty()) throw std::invalid_argument("no measurement samples with t > 0 on the measurement set");
        double gamma_length = 0;
        for (Edge e : kEdges)
            if (cfg.gamma_spec.contains(e)) gamma_length += edge_length(dom, e);

        RngStream rd = base.substream("data");
        set.data.resize(counts.n_d);
        set.data.normal.resize(2, counts.n_d);
        set.data.phi.resize(counts.n_d);
        for (int i = 0; i < counts.n_d; ++i) {
            const MeasurementSample& s = data[pool[rd.index(pool.size())]];
            set.data.points.col(i) << s.x, s.y, s.t;
            set.data.normal.col(i) << s.nx, s.ny;
            set.data.phi(i) = s.noisy_value;
        }
        set.data.weight.setConstant(gamma_length * T / counts.n_d);
    }
    return set;
}

double mc_integrate(const PointSet& set, const SpaceTimeFn& f) {
    double s = 0;
    for (int i = 0; i < set.size(); ++i)
        s += set.weight(i) * f(set.points(0, i), set.points(1, i), set.points(2, i));
    return s;
}

JetLayout normal_layout() { return JetLayout::of({T, X, XX, XT, XXT}); }

std::array<double, 10> boundary_operator(int derivative, double beta) {
    std::array<double, 10> a{};
    switch (derivative) {
    case 0: a[X] = 1, a[V] = beta; break;
    case 1: a[XX] = 1, a[X] = beta; break;
    case 2: a[XT] = 1, a[T] = beta; break;
    case 3: a[XXT] = 1, a[XT] = beta; break;
    default: throw std::invalid_argument("boundary derivative index must be 0..3");
    }
    return a;
}

BoundaryStencil boundary_stencil(int derivative, double beta, BoundaryDerivative mode) {
    BoundaryStencil s;
    if (mode == BoundaryDerivative::normal) {
        s.a = boundary_operator(derivative, beta);
        return s;
    }
    constexpr double r = M_SQRT1_2;
    switch (derivative) {
    case 0: s.a[X] = r, s.a[V] = beta, s.b[X] = r; break;
    case 1: s.a[XX] = 0.5, s.a[X] = beta * r, s.b[XX] = -0.5, s.b[X] = -beta * r; break;
    case 2: s.a[XT] = r, s.a[T] = beta, s.b[XT] = r; break;
    case 3: s.a[XXT] = 0.5, s.a[XT] = beta * r, s.b[XXT] = -0.5, s.b[XT] = -beta * r; break;
    default: throw std::invalid_argument("boundary derivative index must be 0..3");
    }
    return s;
}

// ---------------------------------------------------------------------------

double residual_excitation(const Mlp& net_e, const Coefficients& coeffs, const CollocationPoint& p,
                           ExcitationResidual kind) {
    JetTape tape;
    switch (kind) {
    case ExcitationResidual::interior:
        return interior_operator(interior_layout(), tape.forward(net_e, single(p), interior_layout()), 0, coeffs);
    case ExcitationResidual::spatial: {
        const Eigen::Matrix2Xd n = single_normal(p);
        const JetLayout l = normal_layout();
        return apply(boundary_operator(0, coeffs.beta), l, tape.forward(net_e, single(p), l, &n), 0) -
               excitation_input(p.x, p.y, p.t);
    }
    case ExcitationResidual::temporal: return evaluate(net_e, p.x, p.y, p.t);
    }
    return 0;
}

double residual_emission(const Mlp& net_m, const Mlp& net_f, const Mlp& ue_star, const Coefficients& coeffs,
                         const CollocationPoint& p, EmissionResidual kind, BoundaryDerivative mode) {
    JetTape tape;
    const Eigen::Matrix2Xd n = single_normal(p);
    const JetLayout l = normal_layout();
    auto sb = [&](int j) {
        const BoundaryStencil st = boundary_stencil(j, coeffs.beta, mode);
        if (mode == BoundaryDerivative::normal) return apply(st.a, l, tape.forward(net_m, single(p), l, &n), 0);
        const Eigen::Matrix2Xd d1 = diagonal_directions(n, 1), d2 = diagonal_directions(n, -1);
        const double ra = apply(st.a, l, tape.forward(net_m, single(p), l, &d1), 0);
        return ra + apply(st.b, l, tape.forward(net_m, single(p), l, &d2), 0);
    };
    switch (kind) {
    case EmissionResidual::interior:
        return interior_operator(interior_layout(), tape.forward(net_m, single(p), interior_layout()), 0, coeffs) -
               evaluate(net_f, p.x, p.y, p.t) * evaluate(ue_star, p.x, p.y, p.t);
    case EmissionResidual::sb0: return sb(0);
    case EmissionResidual::sb1: return sb(1);
    case EmissionResidual::sb2: return sb(2);
    case EmissionResidual::sb3: return sb(3);
    case EmissionResidual::tb0: return evaluate(net_m, p.x, p.y, p.t);
    case EmissionResidual::tb1: return tape.forward(net_m, single(p), JetOrder::first)(T, 0);
    case EmissionResidual::data: return tape.forward(net_m, single(p), l, &n)(l.pos(X), 0) - p.phi;
    }
    return 0;
}

// ---------------------------------------------------------------------------

LossBreakdown empirical_loss_j1(const Mlp& net_e, const CollocationSet& set, const Coefficients& coeffs,
                                std::vector<double>* grad) {
    LossBreakdown b;
    if (grad) grad->assign(net_e.param_count(), 0.0);
    Workspace& ws = workspace();
    Eigen::MatrixXd& d_out = ws.d_out;

    if (set.interior.size() > 0) {
        const JetLayout& l = interior_layout();
        const auto& out = ws.interior.forward(net_e, set.interior.points, l);
        d_out.setZero(out.rows(), out.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double r = interior_operator(l, out, j, coeffs);
            b.interior += set.interior.weight(j) * r * r;
            interior_adjoint(l, 2 * set.interior.weight(j) * r, d_out, j, coeffs);
        }
        if (grad) ws.interior.backward(net_e, d_out, *grad);
    }

    if (set.spatial.size() > 0) {
        const JetLayout l = JetLayout::of({X});
        const auto& out = ws.spatial.forward(net_e, set.spatial.points, l, &set.spatial.normal);
        const auto a = boundary_operator(0, coeffs.beta);
        const auto& p = set.spatial.points;
        d_out.setZero(out.rows(), out.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double r = apply(a, l, out, j) - excitation_input(p(0, j), p(1, j), p(2, j));
            b.sb[0] += set.spatial.weight(j) * r * r;
            scatter(a, l, 2 * set.spatial.weight(j) * r, d_out, j);
        }
        if (grad) ws.spatial.backward(net_e, d_out, *grad);
    }

    if (set.temporal.size() > 0) {
        const auto& out = ws.temporal.forward(net_e, set.temporal.points, JetOrder::value);
        d_out.setZero(out.rows(), out.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double r = out(V, j);
            b.tb0 += set.temporal.weight(j) * r * r;
            d_out(V, j) = 2 * set.temporal.weight(j) * r;
        }
        if (grad) ws.temporal.backward(net_e, d_out, *grad);
    }
    return b;
}

LossBreakdown empirical_loss_j2(const Mlp& net_f, const Mlp& net_m, const Mlp& ue_star, const CollocationSet& set,
                                const Coefficients& coeffs, double lambda, std::vector<double>* grad_f,
                                std::vector<double>* grad_m, BoundaryDerivative mode) {
    if (lambda < 0) throw std::invalid_argument("lambda must be nonnegative");
    LossBreakdown b;
    b.lambda = lambda;
    if (grad_f) grad_f->assign(net_f.param_count(), 0.0);
    if (grad_m) grad_m->assign(net_m.param_count(), 0.0);
    Workspace& ws = workspace();
    Eigen::MatrixXd& d_out = ws.d_out;
    Eigen::MatrixXd& d_f = ws.d_f;

    if (set.interior.size() > 0) {
        const JetLayout& l = interior_layout();
        const Eigen::VectorXd ue = evaluate(ue_star, set.interior.points);
        const auto& f = ws.source.forward(net_f, set.interior.points, JetOrder::value);
        const auto& out = ws.interior.forward(net_m, set.interior.points, l);
        d_out.setZero(out.rows(), out.cols());
        d_f.setZero(1, f.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double r = interior_operator(l, out, j, coeffs) - f(0, j) * ue(j);
            const double g = 2 * set.interior.weight(j) * r;
            b.interior += set.interior.weight(j) * r * r;
            interior_adjoint(l, g, d_out, j, coeffs);
            d_f(0, j) = -g * ue(j);
        }
        if (grad_m) ws.interior.backward(net_m, d_out, *grad_m);
        if (grad_f) ws.source.backward(net_f, d_f, *grad_f);
    }

    if (set.spatial.size() > 0) {
        const JetLayout l = normal_layout();
        const bool two = mode == BoundaryDerivative::tangential;
        std::array<BoundaryStencil, 4> st;
        for (int k = 0; k < 4; ++k) st[k] = boundary_stencil(k, coeffs.beta, mode);
        const Eigen::Matrix2Xd d1 = two ? diagonal_directions(set.spatial.normal, 1) : set.spatial.normal;
        const auto& out = ws.spatial.forward(net_m, set.spatial.points, l, &d1);
        Eigen::Matrix2Xd d2;
        const Eigen::MatrixXd* out2 = nullptr;
        if (two) {
            d2 = diagonal_directions(set.spatial.normal, -1);
            out2 = &ws.spatial2.forward(net_m, set.spatial.points, l, &d2);
            ws.d_out2.setZero(out2->rows(), out2->cols());
        }
        d_out.setZero(out.rows(), out.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double w = set.spatial.weight(j);
            for (int k = 0; k < 4; ++k) {
                double r = apply(st[k].a, l, out, j);
                if (two) r += apply(st[k].b, l, *out2, j);
                b.sb[k] += w * r * r;
                scatter(st[k].a, l, 2 * w * r, d_out, j);
                if (two) scatter(st[k].b, l, 2 * w * r, ws.d_out2, j);
            }
        }
        if (grad_m) {
            ws.spatial.backward(net_m, d_out, *grad_m);
            if (two) ws.spatial2.backward(net_m, ws.d_out2, *grad_m);
        }
    }

    if (set.temporal.size() > 0) {
        const JetLayout l = JetLayout::of({T});
        const int t = l.pos(T);
        const auto& out = ws.temporal.forward(net_m, set.temporal.points, l);
        d_out.setZero(out.rows(), out.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double w = set.temporal.weight(j);
            b.tb0 += w * out(V, j) * out(V, j);
            b.tb1 += w * out(t, j) * out(t, j);
            d_out(V, j) = 2 * w * out(V, j);
            d_out(t, j) = 2 * w * out(t, j);
        }
        if (grad_m) ws.temporal.backward(net_m, d_out, *grad_m);
    }

    if (set.data.size() > 0) {
        const JetLayout l = JetLayout::of({X});
        const int n = l.pos(X);
        const auto& out = ws.data.forward(net_m, set.data.points, l, &set.data.normal);
        d_out.setZero(out.rows(), out.cols());
        for (int j = 0; j < out.cols(); ++j) {
            const double r = out(n, j) - set.data.phi(j);
            const double w = set.data.weight(j);
            b.d += w * r * r;
            d_out(n, j) = 2 * lambda * w * r;
        }
        if (grad_m && lambda > 0) ws.data.backward(net_m, d_out, *grad_m);
    }
    return b;
}

Record training_errors(const LossBreakdown& b) {
    return {
        {"E_int", std::sqrt(b.interior)}, {"E_sb0", std::sqrt(b.sb[0])}, {"E_sb1", std::sqrt(b.sb[1])},
        {"E_sb2", std::sqrt(b.sb[2])},    {"E_sb3", std::sqrt(b.sb[3])}, {"E_tb0", std::sqrt(b.tb0)},
        {"E_tb1", std::sqrt(b.tb1)},      {"E_d", std::sqrt(b.d)},       {"lambda", b.lambda},
        {"total", b.total()},
    };
}

}  // namespace fdot
