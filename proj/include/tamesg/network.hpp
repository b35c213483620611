#pragma once

// Fully connected ReLU network with square loss,
//   a_0 = x_j,  a_i = rho_i(V_i a_{i-1} + b_i),  f(w) = sum_j 1/2 (a_L - y_j)^2,
// where rho_i = ReLU on hidden layers and the identity on the output.
//
// The backprop selection uses derivative 0 for max{0, t} at t = 0. It is a
// Clarke subgradient wherever no pre-activation vanishes; elsewhere it is
// only a selection of the chain-rule product, which is why criticality for
// networks is judged with the sampled-gradient surrogate.

#include <cmath>
#include <string>
#include <vector>

#include "tamesg/core.hpp"
#include "tamesg/function_model.hpp"

namespace tamesg {

struct Sample {
  Point input;
  double target = 0.0;
};

class ReluNetwork {
public:
  /// `widths` = {input, hidden..., 1}.
  ReluNetwork(std::vector<std::size_t> widths, std::vector<Sample> data)
      : widths_(std::move(widths)), data_(std::move(data)) {
    if (widths_.size() < 2 || widths_.back() != 1)
      throw ContractViolation("ReluNetwork: need >= 2 layers and scalar output");
    for (auto w : widths_)
      if (w == 0) throw ContractViolation("ReluNetwork: zero-width layer");
    for (const auto &s : data_)
      if (static_cast<std::size_t>(s.input.size()) != widths_.front())
        throw ContractViolation("ReluNetwork: input dimension mismatch");
    for (std::size_t l = 1; l < widths_.size(); ++l)
      dim_ += widths_[l] * widths_[l - 1] + widths_[l];
  }

  std::size_t dim() const { return dim_; }
  const std::vector<std::size_t> &widths() const { return widths_; }
  const std::vector<Sample> &data() const { return data_; }

  double output(const Point &w, const Point &input) const {
    std::vector<Eigen::VectorXd> pre, act;
    forward(w, input, pre, act);
    return act.back()[0];
  }

  double loss(const Point &w) const {
    require_dim(w, dim_, "network_loss");
    double total = 0.0;
    std::vector<Eigen::VectorXd> pre, act;
    for (const auto &s : data_) {
      forward(w, s.input, pre, act);
      const double r = act.back()[0] - s.target;
      total += 0.5 * r * r;
    }
    return total;
  }

  /// Backpropagated selection with ReLU'(0) = 0.
  Point subgrad_select(const Point &w) const {
    require_dim(w, dim_, "network_subgrad_select");
    Point grad = Point::Zero(static_cast<Eigen::Index>(dim_));
    std::vector<Eigen::VectorXd> pre, act;
    const std::size_t L = widths_.size() - 1;
    for (const auto &s : data_) {
      forward(w, s.input, pre, act);
      Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, act.back()[0] - s.target);
      for (std::size_t l = L; l >= 1; --l) {
        if (l < L)
          for (Eigen::Index i = 0; i < delta.size(); ++i)
            if (!(pre[l][i] > 0.0)) delta[i] = 0.0;
        const auto [v_off, b_off] = offsets(l);
        const auto rows = static_cast<Eigen::Index>(widths_[l]);
        const auto cols = static_cast<Eigen::Index>(widths_[l - 1]);
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gV(
            grad.data() + v_off, rows, cols);
        gV += delta * act[l - 1].transpose();
        grad.segment(static_cast<Eigen::Index>(b_off), rows) += delta;
        if (l > 1) delta = weights(w, l).transpose() * delta;
      }
    }
    return grad;
  }

  PiecewiseLipschitzFunction as_function(std::string name = "relu-net") const {
    ReluNetwork net = *this;
    return PiecewiseLipschitzFunction({std::move(name), dim_,
                                       [net](const Point &w) { return net.loss(w); },
                                       [net](const Point &w) { return net.subgrad_select(w); },
                                       {},
                                       {}});
  }

private:
  // Row-major V_l (widths[l] x widths[l-1]) followed by b_l, layer by layer.
  std::pair<std::size_t, std::size_t> offsets(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t i = 1; i < l; ++i) off += widths_[i] * widths_[i - 1] + widths_[i];
    return {off, off + widths_[l] * widths_[l - 1]};
  }

  Eigen::MatrixXd weights(const Point &w, std::size_t l) const {
    const auto [v_off, b_off] = offsets(l);
    (void)b_off;
    const auto rows = static_cast<Eigen::Index>(widths_[l]);
    const auto cols = static_cast<Eigen::Index>(widths_[l - 1]);
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data() + v_off, rows, cols);
  }

  void forward(const Point &w, const Point &input, std::vector<Eigen::VectorXd> &pre,
               std::vector<Eigen::VectorXd> &act) const {
    const std::size_t L = widths_.size() - 1;
    pre.assign(L + 1, {});
    act.assign(L + 1, {});
    act[0] = input;
    for (std::size_t l = 1; l <= L; ++l) {
      const auto [v_off, b_off] = offsets(l);
      (void)v_off;
      pre[l] = weights(w, l) * act[l - 1] +
               w.segment(static_cast<Eigen::Index>(b_off), static_cast<Eigen::Index>(widths_[l]));
      act[l] = l < L ? Eigen::VectorXd(pre[l].cwiseMax(0.0)) : pre[l];
    }
  }

  std::vector<std::size_t> widths_;
  std::vector<Sample> data_;
  std::size_t dim_ = 0;
};

} // namespace tamesg
