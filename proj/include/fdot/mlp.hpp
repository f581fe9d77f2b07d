#pragma once

#include "fdot/config.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <initializer_list>
#include <functional>
#include <span>
#include <vector>

namespace fdot {

/// Fully connected network s(z) = W_K l_{K-1}(...l_1(z)) + b_K with l_k(z) = tanh(W_k z + b_k).
///
/// Parameters live in one flat vector, layer by layer: W_k row-major (d_k x d_{k-1}), then b_k.
class Mlp {
public:
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Mlp() = default;
    explicit Mlp(std::vector<int> widths);

    const std::vector<int>& widths() const { return widths_; }
    int layers() const { return static_cast<int>(widths_.size()) - 1; }
    std::size_t param_count() const { return params_.size(); }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    /// Weight matrix and bias of layer k = 1..K.
    Eigen::Map<const RowMatrix> weight(int k) const;
    Eigen::Map<const Eigen::VectorXd> bias(int k) const;
    Eigen::Map<RowMatrix> weight(int k);
    Eigen::Map<Eigen::VectorXd> bias(int k);
    std::size_t weight_offset(int k) const { return offsets_[k - 1]; }
    std::size_t bias_offset(int k) const { return offsets_[k - 1] + static_cast<std::size_t>(widths_[k]) * widths_[k - 1]; }

    bool operator==(const Mlp& o) const { return widths_ == o.widths_ && params_ == o.params_; }

private:
    std::vector<int> widths_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

std::size_t parameter_count(const std::vector<int>& widths);

/// Weights uniform on [-s, s] with s = scale / sqrt(fan_in); biases zero. scale = 0 gives the all-zero net.
Mlp init_mlp(const std::vector<int>& widths, RngStream& rng, double scale = 1.0);

/// Derivative components that can be carried through the network. Truncating the list at any
/// JetOrder keeps it closed under the chain rule.
enum Comp : int { V = 0, T, X, Y, XX, YY, XT, YT, XXT, YYT };
enum class JetOrder : int { value = 1, first = 4, second = 8, third = 10 };
constexpr int components(JetOrder o) { return static_cast<int>(o); }

/// Subset of components propagated by a tape, closed under the chain rule (XX needs X, XT needs X
/// and T, XXT needs XX and XT, likewise for Y; V is always present). Output rows follow Comp order.
class JetLayout {
public:
    JetLayout(JetOrder order);  // NOLINT: implicit on purpose
    static JetLayout of(std::initializer_list<Comp> comps);

    bool has(Comp c) const { return pos_[c] >= 0; }
    /// Output row of a component; -1 when absent.
    int pos(Comp c) const { return pos_[c]; }
    int size() const { return size_; }

private:
    JetLayout() = default;
    std::array<int, 10> pos_{};
    int size_ = 0;
};

/// Value and derivatives of a network at one point.
struct Jet2 {
    double value = 0, dt = 0, dx = 0, dy = 0, dxx = 0, dyy = 0, dxdt = 0, dydt = 0;
};

/// Batched forward jet propagation with a tape for reverse accumulation of parameter gradients.
///
/// Points are columns (x, y, t). Outputs are a layout.size() x N matrix. When `x_direction` is
/// given, the X slot differentiates along that per-point spatial direction instead of e_x (for
/// normal derivatives on the boundary pass the outward normals).
class JetTape {
public:
    using Points = Eigen::Matrix<double, 3, Eigen::Dynamic>;

    const Eigen::MatrixXd& forward(const Mlp& net, const Points& points, const JetLayout& layout,
                                   const Eigen::Matrix2Xd* x_direction = nullptr);
    /// Adds d(loss)/d(params) to `grad` given d(loss)/d(outputs) with the shape of forward()'s result.
    void backward(const Mlp& net, const Eigen::MatrixXd& d_out, std::span<double> grad);

    const Eigen::MatrixXd& output() const { return out_; }
    const JetLayout& layout() const { return layout_; }
    int size() const { return n_; }

private:
    JetLayout layout_ = JetOrder::value;
    int n_ = 0;
    std::vector<Eigen::MatrixXd> acts_;   // acts_[k]: input of layer k+1, d_k x (C*N)
    std::vector<Eigen::MatrixXd> pre_;    // pre-activations of hidden layers
    std::vector<Eigen::ArrayXXd> s_, d1_, d2_, d3_;
    Eigen::MatrixXd last_;                // pre-activation of the output layer
    Eigen::MatrixXd out_;
    Eigen::MatrixXd g_;
    std::vector<Eigen::MatrixXd> dz_;     // dz_[k-1]: adjoint of layer k's pre-activation
};

Jet2 forward_jet(const Mlp& net, double x, double y, double t);
double evaluate(const Mlp& net, double x, double y, double t);
/// Values at many points, evaluated in chunks.
Eigen::VectorXd evaluate(const Mlp& net, const JetTape::Points& points);

/// Loss over network outputs: returns the loss and writes d(loss)/d(outputs).
using JetFunctional = std::function<double(const Eigen::MatrixXd& out, Eigen::MatrixXd& d_out)>;

/// Exact gradient of functional(forward(net, points)) with respect to all parameters.
double param_grad(const Mlp& net, const JetTape::Points& points, const JetLayout& layout, const JetFunctional& functional,
                  std::vector<double>& grad);

/// JSON checkpoint with a shape header; values round-trip bit-exactly.
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace fdot
