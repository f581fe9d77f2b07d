#include "fdot/mlp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace fdot {

std::size_t parameter_count(const std::vector<int>& widths) {
    std::size_t n = 0;
    for (std::size_t k = 1; k < widths.size(); ++k)
        n += static_cast<std::size_t>(widths[k]) * widths[k - 1] + widths[k];
    return n;
}

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("network needs at least two layer widths");
    for (int w : widths_)
        if (w < 1) throw std::invalid_argument("layer widths must be positive");
    std::size_t off = 0;
    for (int k = 1; k <= layers(); ++k) {
        offsets_.push_back(off);
        off += static_cast<std::size_t>(widths_[k]) * widths_[k - 1] + widths_[k];
    }
    params_.assign(off, 0.0);
}

Eigen::Map<const Mlp::RowMatrix> Mlp::weight(int k) const {
    return {params_.data() + weight_offset(k), widths_[k], widths_[k - 1]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int k) const { return {params_.data() + bias_offset(k), widths_[k]}; }
Eigen::Map<Mlp::RowMatrix> Mlp::weight(int k) { return {params_.data() + weight_offset(k), widths_[k], widths_[k - 1]}; }
Eigen::Map<Eigen::VectorXd> Mlp::bias(int k) { return {params_.data() + bias_offset(k), widths_[k]}; }

Mlp init_mlp(const std::vector<int>& widths, RngStream& rng, double scale) {
    Mlp net(widths);
    for (int k = 1; k <= net.layers(); ++k) {
        const double s = scale / std::sqrt(static_cast<double>(widths[k - 1]));
        auto w = net.weight(k);
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) w(r, c) = s == 0.0 ? 0.0 : rng.uniform(-s, s);
    }
    return net;
}

// ---------------------------------------------------------------------------

namespace {

// tanh through the vectorized exponential; Eigen evaluates double tanh one scalar at a time.
// Absolute error stays at a few ulp, and the form saturates cleanly to +-1.
template <typename Derived>
auto tanh_vec(const Eigen::ArrayBase<Derived>& z) {
    return 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

}  // namespace

JetLayout::JetLayout(JetOrder order) : size_(components(order)) {
    for (int c = 0; c < 10; ++c) pos_[c] = c < size_ ? c : -1;
}

JetLayout JetLayout::of(std::initializer_list<Comp> comps) {
    std::array<bool, 10> want{};
    want[V] = true;
    for (Comp c : comps) want[c] = true;
    auto need = [&](Comp c, Comp dep) {
        if (want[c] && !want[dep]) throw std::invalid_argument("jet layout is not closed under the chain rule");
    };
    need(XX, X), need(YY, Y), need(XT, X), need(XT, T), need(YT, Y), need(YT, T);
    need(XXT, XX), need(XXT, XT), need(YYT, YY), need(YYT, YT);
    JetLayout l;
    for (int c = 0; c < 10; ++c) l.pos_[c] = want[c] ? l.size_++ : -1;
    return l;
}

const Eigen::MatrixXd& JetTape::forward(const Mlp& net, const Points& points, const JetLayout& layout,
                                        const Eigen::Matrix2Xd* x_direction) {
    if (net.widths().front() != 3) throw std::invalid_argument("jet propagation expects inputs (x, y, t)");
    if (net.widths().back() != 1) throw std::invalid_argument("jet propagation expects a scalar output");
    if (x_direction && x_direction->cols() != points.cols())
        throw std::invalid_argument("one direction per point expected");
    const int C = layout.size();
    const int N = static_cast<int>(points.cols());
    const int K = net.layers();
    layout_ = layout;
    n_ = N;
    acts_.resize(K);
    pre_.resize(K - 1);
    s_.resize(K - 1);
    d1_.resize(K - 1);
    d2_.resize(K - 1);
    d3_.resize(K - 1);
    auto has = [&](Comp c) { return layout.has(c); };
    auto col = [&](Comp c) { return static_cast<Eigen::Index>(layout.pos(c)) * N; };

    auto& a0 = acts_[0];
    a0.setZero(3, static_cast<Eigen::Index>(C) * N);
    a0.middleCols(0, N) = points;
    if (has(T)) a0.block(2, col(T), 1, N).setOnes();
    if (has(X)) {
        if (x_direction)
            a0.block(0, col(X), 2, N) = *x_direction;
        else
            a0.block(0, col(X), 1, N).setOnes();
    }
    if (has(Y)) a0.block(1, col(Y), 1, N).setOnes();

    for (int k = 1; k <= K; ++k) {
        Eigen::MatrixXd& z = k == K ? last_ : pre_[k - 1];
        z.noalias() = net.weight(k) * acts_[k - 1];
        z.middleCols(0, N).colwise() += net.bias(k);
        if (k == K) {
            out_ = Eigen::Map<const Eigen::MatrixXd>(z.data(), N, C).transpose();
            break;
        }
        const int h = k - 1;
        const auto& Z = pre_[h];
        auto zb = [&](Comp c) { return Z.middleCols(col(c), N).array(); };

        auto& s = s_[h];
        auto& d1 = d1_[h];
        auto& d2 = d2_[h];
        auto& d3 = d3_[h];
        s = tanh_vec(zb(V));
        d1 = 1.0 - s.square();
        if (C > 1) d2 = -2.0 * s * d1;
        if (has(XXT) || has(YYT) || has(XX) || has(YY) || has(XT) || has(YT))
            d3 = -2.0 * d1.square() + 4.0 * s.square() * d1;

        auto& A = acts_[k];
        A.resize(Z.rows(), Z.cols());
        auto ab = [&](Comp c) { return A.middleCols(col(c), N).array(); };
        ab(V) = s;
        for (Comp c : {T, X, Y})
            if (has(c)) ab(c) = d1 * zb(c);
        // a_xx = d2 zx^2 + d1 zxx, a_xt = d2 zx zt + d1 zxt,
        // a_xxt = d3 zt zx^2 + d2 (2 zx zxt + zt zxx) + d1 zxxt
        auto second = [&](Comp x, Comp xx, Comp xt, Comp xxt) {
            if (has(xx)) ab(xx) = d2 * zb(x).square() + d1 * zb(xx);
            if (has(xt)) ab(xt) = d2 * zb(x) * zb(T) + d1 * zb(xt);
            if (has(xxt))
                ab(xxt) = d3 * zb(T) * zb(x).square() + d2 * (2.0 * zb(x) * zb(xt) + zb(T) * zb(xx)) + d1 * zb(xxt);
        };
        second(X, XX, XT, XXT);
        second(Y, YY, YT, YYT);
    }
    return out_;
}

void JetTape::backward(const Mlp& net, const Eigen::MatrixXd& d_out, std::span<double> grad) {
    const JetLayout& layout = layout_;
    const int C = layout.size();
    const int N = n_;
    const int K = net.layers();
    if (d_out.rows() != C || d_out.cols() != N) throw std::invalid_argument("output adjoint has the wrong shape");
    if (grad.size() != net.param_count()) throw std::invalid_argument("gradient buffer has the wrong size");
    auto has = [&](Comp c) { return layout.has(c); };
    auto col = [&](Comp c) { return static_cast<Eigen::Index>(layout.pos(c)) * N; };

    dz_.resize(K);
    dz_[K - 1].resize(1, static_cast<Eigen::Index>(C) * N);
    Eigen::Map<Eigen::MatrixXd>(dz_[K - 1].data(), N, C) = d_out.transpose();

    for (int k = K; k >= 1; --k) {
        const auto& A = acts_[k - 1];
        const Eigen::MatrixXd& dz = dz_[k - 1];
        Eigen::Map<Mlp::RowMatrix> gw(grad.data() + net.weight_offset(k), net.widths()[k], net.widths()[k - 1]);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.bias_offset(k), net.widths()[k]);
        gw.noalias() += dz * A.transpose();
        gb += dz.middleCols(0, N).rowwise().sum();
        if (k == 1) break;

        g_.noalias() = net.weight(k).transpose() * dz;
        const int h = k - 2;
        const auto& Z = pre_[h];
        const auto& s = s_[h];
        const auto& d1 = d1_[h];
        const auto& d2 = d2_[h];
        const auto& d3 = d3_[h];
        auto zb = [&](Comp c) { return Z.middleCols(col(c), N).array(); };
        auto G = [&](Comp c) { return g_.middleCols(col(c), N).array(); };
        Eigen::MatrixXd& dzp = dz_[k - 2];
        dzp.resize(Z.rows(), Z.cols());
        auto D = [&](Comp c) { return dzp.middleCols(col(c), N).array(); };

        // Each present output component pushes its sensitivity onto the inputs it was formed from.
        D(V) = G(V) * d1;
        for (Comp c : {T, X, Y})
            if (has(c)) {
                D(V) += G(c) * d2 * zb(c);
                D(c) = G(c) * d1;
            }
        Eigen::ArrayXXd d4;
        if (has(XXT) || has(YYT)) d4 = -4.0 * d1 * d2 + 8.0 * s * d1.square() + 4.0 * s.square() * d2;
        auto second = [&](Comp x, Comp xx, Comp xt, Comp xxt) {
            if (has(xx)) {
                D(V) += G(xx) * (d3 * zb(x).square() + d2 * zb(xx));
                D(x) += 2.0 * G(xx) * d2 * zb(x);
                D(xx) = G(xx) * d1;
            }
            if (has(xt)) {
                D(V) += G(xt) * (d3 * zb(x) * zb(T) + d2 * zb(xt));
                D(x) += G(xt) * d2 * zb(T);
                D(T) += G(xt) * d2 * zb(x);
                D(xt) = G(xt) * d1;
            }
            if (has(xxt)) {
                D(V) += G(xxt) * (d4 * zb(T) * zb(x).square() + d3 * (2.0 * zb(x) * zb(xt) + zb(T) * zb(xx)) +
                                  d2 * zb(xxt));
                D(T) += G(xxt) * (d3 * zb(x).square() + d2 * zb(xx));
                D(x) += 2.0 * G(xxt) * (d3 * zb(T) * zb(x) + d2 * zb(xt));
                D(xx) += G(xxt) * d2 * zb(T);
                D(xt) += 2.0 * G(xxt) * d2 * zb(x);
                D(xxt) = G(xxt) * d1;
            }
        };
        second(X, XX, XT, XXT);
        second(Y, YY, YT, YYT);
    }
}

Jet2 forward_jet(const Mlp& net, double x, double y, double t) {
    JetTape tape;
    JetTape::Points p(3, 1);
    p << x, y, t;
    const auto& o = tape.forward(net, p, JetOrder::second);
    return {o(V, 0), o(T, 0), o(X, 0), o(Y, 0), o(XX, 0), o(YY, 0), o(XT, 0), o(YT, 0)};
}

double evaluate(const Mlp& net, double x, double y, double t) {
    JetTape tape;
    JetTape::Points p(3, 1);
    p << x, y, t;
    return tape.forward(net, p, JetOrder::value)(0, 0);
}

Eigen::VectorXd evaluate(const Mlp& net, const JetTape::Points& points) {
    constexpr Eigen::Index chunk = 4096;
    Eigen::VectorXd out(points.cols());
    JetTape tape;
    for (Eigen::Index start = 0; start < points.cols(); start += chunk) {
        const Eigen::Index len = std::min(chunk, points.cols() - start);
        out.segment(start, len) = tape.forward(net, points.middleCols(start, len), JetOrder::value).row(0).transpose();
    }
    return out;
}

double param_grad(const Mlp& net, const JetTape::Points& points, const JetLayout& layout,
                  const JetFunctional& functional, std::vector<double>& grad) {
    JetTape tape;
    const auto& out = tape.forward(net, points, layout);
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(out.rows(), out.cols());
    const double loss = functional(out, d_out);
    grad.assign(net.param_count(), 0.0);
    tape.backward(net, d_out, grad);
    return loss;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
    nlohmann::json j;
    j["widths"] = net.widths();
    j["activation"] = "tanh";
    j["param_count"] = net.param_count();
    j["params"] = net.params();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
    }
    Mlp net(j.at("widths").get<std::vector<int>>());
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != net.param_count() || j.value("param_count", params.size()) != params.size())
        throw std::runtime_error("checkpoint parameter count does not match its shape header");
    net.params() = std::move(params);
    return net;
}

}  // namespace fdot
