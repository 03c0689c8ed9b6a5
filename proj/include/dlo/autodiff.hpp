#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace dlo::ad {

using Matrix = Eigen::MatrixXd;

struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

/// Reverse-mode tape over dense matrices. Every op records a backward
/// closure; backward() runs them in reverse order from a scalar root.
class Tape {
 public:
  Var leaf(Matrix m) {
    nodes_.push_back(std::move(m));
    grads_.emplace_back();
    backs_.emplace_back();
    return {static_cast<int>(nodes_.size()) - 1};
  }
  Var constant(Matrix m) { return leaf(std::move(m)); }

  const Matrix& val(Var v) const { return nodes_[v.i]; }

  Matrix& grad(Var v) {
    if (grads_[v.i].size() == 0) grads_[v.i] = Matrix::Zero(nodes_[v.i].rows(), nodes_[v.i].cols());
    return grads_[v.i];
  }

  std::size_t size() const { return nodes_.size(); }

  void backward(Var root) {
    if (val(root).size() != 1) throw std::invalid_argument("backward root must be scalar");
    grad(root)(0, 0) = 1.0;
    for (int i = root.i; i >= 0; --i)
      if (backs_[i] && grads_[i].size() != 0) backs_[i]();
  }

  // ---- ops ----

  Var add(Var a, Var b) {
    Var out = leaf(val(a) + val(b));
    backs_[out.i] = [this, a, b, out] {
      grad(a) += grads_[out.i];
      grad(b) += grads_[out.i];
    };
    return out;
  }

  Var sub(Var a, Var b) {
    Var out = leaf(val(a) - val(b));
    backs_[out.i] = [this, a, b, out] {
      grad(a) += grads_[out.i];
      grad(b) -= grads_[out.i];
    };
    return out;
  }

  Var scale(Var a, double s) {
    Var out = leaf(val(a) * s);
    backs_[out.i] = [this, a, s, out] { grad(a) += s * grads_[out.i]; };
    return out;
  }

  Var hadamard(Var a, Var b) {
    Var out = leaf(val(a).cwiseProduct(val(b)));
    backs_[out.i] = [this, a, b, out] {
      grad(a) += grads_[out.i].cwiseProduct(val(b));
      grad(b) += grads_[out.i].cwiseProduct(val(a));
    };
    return out;
  }

  Var matmul(Var a, Var b) {
    Var out = leaf(val(a) * val(b));
    backs_[out.i] = [this, a, b, out] {
      grad(a).noalias() += grads_[out.i] * val(b).transpose();
      grad(b).noalias() += val(a).transpose() * grads_[out.i];
    };
    return out;
  }

  /// Adds a 1 x C bias row to every row of X.
  Var add_rowvec(Var x, Var b) {
    Matrix m = val(x);
    m.rowwise() += val(b).row(0);
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, b, out] {
      grad(x) += grads_[out.i];
      grad(b).row(0) += grads_[out.i].colwise().sum();
    };
    return out;
  }

  Var scale_cols_const(Var x, const Eigen::RowVectorXd& s) {
    Matrix m = val(x);
    m.array().rowwise() *= s.array();
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, s, out] {
      grad(x).array() += grads_[out.i].array().rowwise() * s.array();
    };
    return out;
  }

  Var shift_cols_const(Var x, const Eigen::RowVectorXd& s) {
    Matrix m = val(x);
    m.rowwise() += s;
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, out] { grad(x) += grads_[out.i]; };
    return out;
  }

  Var scale_rows_const(Var x, const Eigen::VectorXd& s) {
    Matrix m = val(x);
    m.array().colwise() *= s.array();
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, s, out] {
      grad(x).array() += grads_[out.i].array().colwise() * s.array();
    };
    return out;
  }

  Var slice_cols(Var x, int c0, int ncols) {
    Var out = leaf(val(x).middleCols(c0, ncols));
    backs_[out.i] = [this, x, c0, ncols, out] {
      grad(x).middleCols(c0, ncols) += grads_[out.i];
    };
    return out;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    Eigen::Index rows = val(parts[0]).rows(), cols = 0;
    for (Var p : parts) cols += val(p).cols();
    Matrix m(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
      m.middleCols(c, val(p).cols()) = val(p);
      c += val(p).cols();
    }
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, parts, out] {
      Eigen::Index cc = 0;
      for (Var p : parts) {
        grad(p) += grads_[out.i].middleCols(cc, val(p).cols());
        cc += val(p).cols();
      }
    };
    return out;
  }

  /// Column-wise mean producing a 1 x C row.
  Var mean_rows(Var x) {
    Var out = leaf(val(x).colwise().mean());
    backs_[out.i] = [this, x, out] {
      const double inv = 1.0 / static_cast<double>(val(x).rows());
      grad(x).rowwise() += grads_[out.i].row(0) * inv;
    };
    return out;
  }

  Var repeat_rows(Var x, int count) {
    Var out = leaf(val(x).row(0).replicate(count, 1));
    backs_[out.i] = [this, x, out] {
      grad(x).row(0) += grads_[out.i].colwise().sum();
    };
    return out;
  }

  /// Subtracts a 1 x C row (as a Var) from every row of X.
  Var sub_rowvec(Var x, Var r) {
    Matrix m = val(x);
    m.rowwise() -= val(r).row(0);
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, r, out] {
      grad(x) += grads_[out.i];
      grad(r).row(0) -= grads_[out.i].colwise().sum();
    };
    return out;
  }

  Var unary_cos(Var x) {
    Var out = leaf(val(x).array().cos());
    backs_[out.i] = [this, x, out] {
      grad(x).array() -= grads_[out.i].array() * val(x).array().sin();
    };
    return out;
  }

  Var unary_sin(Var x) {
    Var out = leaf(val(x).array().sin());
    backs_[out.i] = [this, x, out] {
      grad(x).array() += grads_[out.i].array() * val(x).array().cos();
    };
    return out;
  }

  /// Exact GELU, x * Phi(x) with the normal CDF.
  Var gelu(Var x) {
    const auto phi_cdf = [](double v) { return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))); };
    Matrix m = val(x).unaryExpr([&](double v) { return v * phi_cdf(v); });
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, out] {
      const Matrix& xv = val(x);
      Matrix d = xv.unaryExpr([](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
        return cdf + v * pdf;
      });
      grad(x) += grads_[out.i].cwiseProduct(d);
    };
    return out;
  }

  /// Row-wise layer normalization with gain and bias rows (1 x C).
  Var layernorm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Matrix& xv = val(x);
    const Eigen::Index rows = xv.rows(), cols = xv.cols();
    Matrix xhat(rows, cols);
    Eigen::VectorXd inv_std(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mu = xv.row(r).mean();
      const double var = (xv.row(r).array() - mu).square().mean();
      inv_std[r] = 1.0 / std::sqrt(var + eps);
      xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
    }
    Matrix y = xhat.array().rowwise() * val(gain).row(0).array();
    y.rowwise() += val(bias).row(0);
    Var out = leaf(std::move(y));
    backs_[out.i] = [this, x, gain, bias, xhat, inv_std, out] {
      const Matrix& dy = grads_[out.i];
      const Eigen::Index rows = dy.rows();
      grad(gain).row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
      grad(bias).row(0) += dy.colwise().sum();
      Matrix dxhat = dy.array().rowwise() * val(gain).row(0).array();
      Matrix& gx = grad(x);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
        gx.row(r).array() +=
            inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
    };
    return out;
  }

  /// Multi-head block attention over stacked per-sample token blocks:
  /// Q is (B*nq) x d, K and V are (B*nk) x d. Softmax matrices are retained
  /// for the backward pass and exposed via attn_records for inspection.
  Var attention(Var q, Var k, Var v, int heads, int nq, int nk) {
    const Matrix& Q = val(q);
    const Matrix& K = val(k);
    const Matrix& V = val(v);
    const int d = static_cast<int>(Q.cols());
    if (d % heads != 0) throw std::invalid_argument("embed dim not divisible by heads");
    const int dh = d / heads;
    const int batch = static_cast<int>(Q.rows()) / nq;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    auto probs = std::make_shared<std::vector<Matrix>>();
    probs->reserve(static_cast<std::size_t>(batch) * heads);
    Matrix out(Q.rows(), d);
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const auto Qb = Q.block(b * nq, h * dh, nq, dh);
        const auto Kb = K.block(b * nk, h * dh, nk, dh);
        const auto Vb = V.block(b * nk, h * dh, nk, dh);
        Matrix s = (Qb * Kb.transpose()) * inv_sqrt;
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
          const double mx = s.row(r).maxCoeff();
          s.row(r) = (s.row(r).array() - mx).exp();
          s.row(r) /= s.row(r).sum();
        }
        out.block(b * nq, h * dh, nq, dh).noalias() = s * Vb;
        probs->push_back(std::move(s));
      }
    }
    Var o = leaf(std::move(out));
    attn_records_.push_back(probs);
    backs_[o.i] = [this, q, k, v, heads, nq, nk, dh, batch, inv_sqrt, probs, o] {
      const Matrix& dOut = grads_[o.i];
      const Matrix& Q = val(q);
      const Matrix& K = val(k);
      const Matrix& V = val(v);
      Matrix& gQ = grad(q);
      Matrix& gK = grad(k);
      Matrix& gV = grad(v);
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const Matrix& P = (*probs)[static_cast<std::size_t>(b) * heads + h];
          const auto dOb = dOut.block(b * nq, h * dh, nq, dh);
          const auto Qb = Q.block(b * nq, h * dh, nq, dh);
          const auto Kb = K.block(b * nk, h * dh, nk, dh);
          const auto Vb = V.block(b * nk, h * dh, nk, dh);
          gV.block(b * nk, h * dh, nk, dh).noalias() += P.transpose() * dOb;
          Matrix dP = dOb * Vb.transpose();
          const Eigen::VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
          Matrix dS = P.array() * (dP.array().colwise() - rowdot.array());
          dS *= inv_sqrt;
          gQ.block(b * nq, h * dh, nq, dh).noalias() += dS * Kb;
          gK.block(b * nk, h * dh, nk, dh).noalias() += dS.transpose() * Qb;
        }
      }
    };
    return o;
  }

  Var sum_all(Var x) {
    Matrix m(1, 1);
    m(0, 0) = val(x).sum();
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, out] {
      grad(x).array() += grads_[out.i](0, 0);
    };
    return out;
  }

  /// Custom scalar op with caller-supplied local gradient (r x c matching x).
  Var custom_scalar(Var x, double value, Matrix local_grad) {
    Matrix m(1, 1);
    m(0, 0) = value;
    Var out = leaf(std::move(m));
    backs_[out.i] = [this, x, lg = std::move(local_grad), out] {
      grad(x) += grads_[out.i](0, 0) * lg;
    };
    return out;
  }

  /// Per-sample softmax matrices of every attention op, in record order.
  const std::vector<std::shared_ptr<std::vector<Matrix>>>& attn_records() const {
    return attn_records_;
  }

 private:
  std::vector<Matrix> nodes_;
  std::vector<Matrix> grads_;
  std::vector<std::function<void()>> backs_;
  std::vector<std::shared_ptr<std::vector<Matrix>>> attn_records_;
};

}  // namespace dlo::ad
