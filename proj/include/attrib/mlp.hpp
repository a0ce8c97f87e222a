#pragma once

#include <cmath>
#include <random>

#include <Eigen/Core>

namespace attrib {

/// Numerically stable logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(z)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  return z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// One-hidden-layer network: D inputs -> H rectified units -> 1 logit.
/// Inputs are columns of a D x N matrix.
template <typename Scalar>
struct Mlp {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Matrix w1;  // H x D
  Vector b1;  // H
  Vector w2;  // H
  Scalar b2 = Scalar(0);

  Mlp() = default;
  Mlp(Eigen::Index inputs, Eigen::Index hidden)
      : w1(Matrix::Zero(hidden, inputs)), b1(Vector::Zero(hidden)), w2(Vector::Zero(hidden)) {}

  Eigen::Index inputs() const { return w1.cols(); }
  Eigen::Index hidden() const { return w1.rows(); }
  Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  /// He-normal first layer, 1/sqrt(H) output layer, zero biases.
  template <typename Rng>
  void initialize(Rng& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double s1 = std::sqrt(2.0 / static_cast<double>(inputs()));
    const double s2 = std::sqrt(1.0 / static_cast<double>(hidden()));
    for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = Scalar(s1 * unit(rng));
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2[i] = Scalar(s2 * unit(rng));
    b1.setZero();
    b2 = Scalar(0);
  }

  template <typename Derived>
  RowVector logits(const Eigen::MatrixBase<Derived>& x) const {
    const Matrix act = ((w1 * x).colwise() + b1).cwiseMax(Scalar(0));
    return (w2.transpose() * act).array() + b2;
  }

  Vector flatten() const {
    Vector theta(parameter_count());
    theta << Eigen::Map<const Vector>(w1.data(), w1.size()), b1, w2, b2;
    return theta;
  }

  void unflatten(const Vector& theta) {
    Eigen::Index at = 0;
    Eigen::Map<Vector>(w1.data(), w1.size()) = theta.segment(at, w1.size());
    at += w1.size();
    b1 = theta.segment(at, b1.size());
    at += b1.size();
    w2 = theta.segment(at, w2.size());
    at += w2.size();
    b2 = theta[at];
  }
};

/// Mean binary cross-entropy over the batch, computed from logits.
/// When `grad` is non-null it receives d(loss)/d(theta) in `Mlp::flatten` order.
template <typename Scalar, typename Derived, typename LabelDerived>
Scalar bce_loss(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<LabelDerived>& y,
                typename Mlp<Scalar>::Vector* grad = nullptr) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  using Vector = typename Mlp<Scalar>::Vector;
  const Eigen::Index n = x.cols();
  const Matrix pre = (net.w1 * x).colwise() + net.b1;
  const Matrix act = pre.cwiseMax(Scalar(0));
  const Vector z = (net.w2.transpose() * act).transpose().array() + net.b2;

  Scalar loss(0);
  Vector dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    dz[i] = (sigmoid(z[i]) - y[i]) / Scalar(n);
  }
  loss /= Scalar(n);
  if (grad) {
    const Vector g_w2 = act * dz;
    const Matrix d_act = (net.w2 * dz.transpose()).cwiseProduct((pre.array() > Scalar(0)).matrix().template cast<Scalar>());
    const Matrix g_w1 = d_act * x.transpose();
    const Vector g_b1 = d_act.rowwise().sum();
    grad->resize(net.parameter_count());
    *grad << Eigen::Map<const Vector>(g_w1.data(), g_w1.size()), g_b1, g_w2, dz.sum();
  }
  return loss;
}

/// Adam with bias-corrected moment estimates.
template <typename Scalar>
class Adam {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Adam(Eigen::Index size, Scalar step, Scalar beta1 = Scalar(0.9), Scalar beta2 = Scalar(0.999),
       Scalar epsilon = Scalar(1e-8))
      : m_(Vector::Zero(size)), v_(Vector::Zero(size)), step_(step), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void update(Vector& theta, const Vector& grad) {
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(beta1_, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, Scalar(t_));
    theta.array() -= step_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const { return t_; }

 private:
  Vector m_, v_;
  Scalar step_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace attrib
