#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/tensor.hpp"

namespace resdyn::core {

struct NodeId {
  std::int64_t v = -1;
  bool valid() const { return v >= 0; }
};

/// Reverse-mode tape over 2-D tensors. Operations compute values eagerly
/// and record a pullback closure; backward() replays the closures in
/// reverse creation order, which is a valid topological order because
/// every operand must already exist when an op is recorded.
class Tape {
 public:
  using EigenMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstEigenMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  /// With recording off, ops still compute values (so forward composition
  /// works) but skip the pullback closures; backward() is then unavailable.
  bool recording() const { return recording_; }

  NodeId leaf(const Tensor& value) {
    nodes_.push_back(Node{value, Tensor(), false, {}});
    return NodeId{static_cast<std::int64_t>(nodes_.size()) - 1};
  }

  const Tensor& value(NodeId id) const { return node(id).value; }

  /// Gradient of the last backward() root w.r.t. this node; zeros if the
  /// node did not influence the root.
  Tensor grad(NodeId id) const {
    const Node& n = node(id);
    if (n.grad_alloc) return n.grad;
    return Tensor(n.value.rows(), n.value.cols(), 0.0);
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  void reset() { nodes_.clear(); }

  // ---- operations ----

  /// C = A * B
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.cols() == B.rows(), "matmul: inner dimensions differ");
    Tensor C(A.rows(), B.cols());
    emap(C) = cmap(A) * cmap(B);
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      const Tensor& Av = t.value(a);
      const Tensor& Bv = t.value(b);
      emap(t.grad_ref(a)) += cmap(dC) * cmap(Bv).transpose();
      emap(t.grad_ref(b)) += cmap(Av).transpose() * cmap(dC);
    });
  }

  /// C = A * B^T  (A: m x k, B: n x k, C: m x n)
  NodeId matmul_nt(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.cols() == B.cols(), "matmul_nt: inner dimensions differ");
    Tensor C(A.rows(), B.rows());
    emap(C) = cmap(A) * cmap(B).transpose();
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      const Tensor& Av = t.value(a);
      const Tensor& Bv = t.value(b);
      emap(t.grad_ref(a)) += cmap(dC) * cmap(Bv);
      emap(t.grad_ref(b)) += cmap(dC).transpose() * cmap(Av);
    });
  }

  NodeId add(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.rows() == B.rows() && A.cols() == B.cols(), "add: shape mismatch");
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] = A.data()[i] + B.data()[i];
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      accumulate(t.grad_ref(a), dC, +1.0);
      accumulate(t.grad_ref(b), dC, +1.0);
    });
  }

  NodeId sub(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.rows() == B.rows() && A.cols() == B.cols(), "sub: shape mismatch");
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] = A.data()[i] - B.data()[i];
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      accumulate(t.grad_ref(a), dC, +1.0);
      accumulate(t.grad_ref(b), dC, -1.0);
    });
  }

  /// X + b broadcast over rows (X: m x n, b: 1 x n).
  NodeId add_rowvec(NodeId x, NodeId b) {
    const Tensor& X = value(x);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(B.rows() == 1 && B.cols() == X.cols(), "add_rowvec: bias must be 1 x cols");
    Tensor C(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r)
      for (std::size_t c = 0; c < X.cols(); ++c) C.at(r, c) = X.at(r, c) + B.at(0, c);
    return record(std::move(C), [x, b](Tape& t, const Tensor& dC) {
      accumulate(t.grad_ref(x), dC, +1.0);
      Tensor& db = t.grad_ref(b);
      for (std::size_t r = 0; r < dC.rows(); ++r)
        for (std::size_t c = 0; c < dC.cols(); ++c) db.at(0, c) += dC.at(r, c);
    });
  }

  NodeId scale(NodeId a, double s) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] = s * A.data()[i];
    return record(std::move(C), [a, s](Tape& t, const Tensor& dC) {
      accumulate(t.grad_ref(a), dC, s);
    });
  }

  NodeId mul_elem(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.rows() == B.rows() && A.cols() == B.cols(), "mul_elem: shape mismatch");
    Tensor C(A.rows(), A.cols());
    for (std::size_t i = 0; i < C.size(); ++i) C.data()[i] = A.data()[i] * B.data()[i];
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      const Tensor& Av = t.value(a);
      const Tensor& Bv = t.value(b);
      Tensor& da = t.grad_ref(a);
      Tensor& db = t.grad_ref(b);
      for (std::size_t i = 0; i < dC.size(); ++i) {
        da.data()[i] += dC.data()[i] * Bv.data()[i];
        db.data()[i] += dC.data()[i] * Av.data()[i];
      }
    });
  }

  /// Row-wise softmax with the usual max-shift for stability.
  NodeId softmax_rows(NodeId x) {
    const Tensor& X = value(x);
    Tensor Y(X.rows(), X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      double mx = X.at(r, 0);
      for (std::size_t c = 1; c < X.cols(); ++c) mx = std::max(mx, X.at(r, c));
      double sum = 0.0;
      for (std::size_t c = 0; c < X.cols(); ++c) {
        const double e = std::exp(X.at(r, c) - mx);
        Y.at(r, c) = e;
        sum += e;
      }
      for (std::size_t c = 0; c < X.cols(); ++c) Y.at(r, c) /= sum;
    }
    NodeId out = record(std::move(Y), {});
    if (recording_) {
      node(out).backward = [x, out](Tape& t, const Tensor& dC) {
        const Tensor& Yv = t.value(out);
        Tensor& dx = t.grad_ref(x);
        for (std::size_t r = 0; r < Yv.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < Yv.cols(); ++c) dot += dC.at(r, c) * Yv.at(r, c);
          for (std::size_t c = 0; c < Yv.cols(); ++c)
            dx.at(r, c) += Yv.at(r, c) * (dC.at(r, c) - dot);
        }
      };
    }
    return out;
  }

  /// GELU, tanh approximation.
  NodeId gelu(NodeId x) {
    const Tensor& X = value(x);
    Tensor Y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.size(); ++i) Y.data()[i] = gelu_value(X.data()[i]);
    return record(std::move(Y), [x](Tape& t, const Tensor& dC) {
      const Tensor& Xv = t.value(x);
      Tensor& dx = t.grad_ref(x);
      for (std::size_t i = 0; i < Xv.size(); ++i)
        dx.data()[i] += dC.data()[i] * gelu_derivative(Xv.data()[i]);
    });
  }

  NodeId concat_rows(const std::vector<NodeId>& parts) {
    RESDYN_REQUIRE(!parts.empty(), "concat_rows: no operands");
    const std::size_t cols = value(parts[0]).cols();
    std::size_t rows = 0;
    for (NodeId p : parts) {
      RESDYN_REQUIRE(value(p).cols() == cols, "concat_rows: column mismatch");
      rows += value(p).rows();
    }
    Tensor C(rows, cols);
    std::size_t r0 = 0;
    for (NodeId p : parts) {
      const Tensor& P = value(p);
      for (std::size_t r = 0; r < P.rows(); ++r)
        for (std::size_t c = 0; c < cols; ++c) C.at(r0 + r, c) = P.at(r, c);
      r0 += P.rows();
    }
    return record(std::move(C), [parts](Tape& t, const Tensor& dC) {
      std::size_t r0 = 0;
      for (NodeId p : parts) {
        Tensor& dp = t.grad_ref(p);
        for (std::size_t r = 0; r < dp.rows(); ++r)
          for (std::size_t c = 0; c < dp.cols(); ++c) dp.at(r, c) += dC.at(r0 + r, c);
        r0 += dp.rows();
      }
    });
  }

  NodeId concat_cols(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.rows() == B.rows(), "concat_cols: row mismatch");
    Tensor C(A.rows(), A.cols() + B.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
      for (std::size_t c = 0; c < A.cols(); ++c) C.at(r, c) = A.at(r, c);
      for (std::size_t c = 0; c < B.cols(); ++c) C.at(r, A.cols() + c) = B.at(r, c);
    }
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      Tensor& da = t.grad_ref(a);
      Tensor& db = t.grad_ref(b);
      for (std::size_t r = 0; r < da.rows(); ++r) {
        for (std::size_t c = 0; c < da.cols(); ++c) da.at(r, c) += dC.at(r, c);
        for (std::size_t c = 0; c < db.cols(); ++c) db.at(r, c) += dC.at(r, da.cols() + c);
      }
    });
  }

  /// Rows [r0, r1) of x.
  NodeId slice_rows(NodeId x, std::size_t r0, std::size_t r1) {
    const Tensor& X = value(x);
    RESDYN_REQUIRE(r0 < r1 && r1 <= X.rows(), "slice_rows: bad range");
    Tensor C(r1 - r0, X.cols());
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = 0; c < X.cols(); ++c) C.at(r - r0, c) = X.at(r, c);
    return record(std::move(C), [x, r0](Tape& t, const Tensor& dC) {
      Tensor& dx = t.grad_ref(x);
      for (std::size_t r = 0; r < dC.rows(); ++r)
        for (std::size_t c = 0; c < dC.cols(); ++c) dx.at(r0 + r, c) += dC.at(r, c);
    });
  }

  /// Columns [c0, c1) of x.
  NodeId slice_cols(NodeId x, std::size_t c0, std::size_t c1) {
    const Tensor& X = value(x);
    RESDYN_REQUIRE(c0 < c1 && c1 <= X.cols(), "slice_cols: bad range");
    Tensor C(X.rows(), c1 - c0);
    for (std::size_t r = 0; r < X.rows(); ++r)
      for (std::size_t c = c0; c < c1; ++c) C.at(r, c - c0) = X.at(r, c);
    return record(std::move(C), [x, c0](Tape& t, const Tensor& dC) {
      Tensor& dx = t.grad_ref(x);
      for (std::size_t r = 0; r < dC.rows(); ++r)
        for (std::size_t c = 0; c < dC.cols(); ++c) dx.at(r, c0 + c) += dC.at(r, c);
    });
  }

  /// Row-major reinterpretation; element count must be preserved.
  NodeId reshape(NodeId x, std::size_t rows, std::size_t cols) {
    const Tensor& X = value(x);
    RESDYN_REQUIRE(rows * cols == X.size(), "reshape: element count changes");
    Tensor C(rows, cols);
    std::copy(X.data(), X.data() + X.size(), C.data());
    return record(std::move(C), [x](Tape& t, const Tensor& dC) {
      Tensor& dx = t.grad_ref(x);
      for (std::size_t i = 0; i < dC.size(); ++i) dx.data()[i] += dC.data()[i];
    });
  }

  /// Column means over rows: (m x n) -> (1 x n).
  NodeId mean_rows(NodeId x) {
    const Tensor& X = value(x);
    RESDYN_REQUIRE(X.rows() > 0, "mean_rows: empty input");
    Tensor C(1, X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r)
      for (std::size_t c = 0; c < X.cols(); ++c) C.at(0, c) += X.at(r, c);
    const double inv_m = 1.0 / static_cast<double>(X.rows());
    for (std::size_t c = 0; c < X.cols(); ++c) C.at(0, c) *= inv_m;
    return record(std::move(C), [x, inv_m](Tape& t, const Tensor& dC) {
      Tensor& dx = t.grad_ref(x);
      for (std::size_t r = 0; r < dx.rows(); ++r)
        for (std::size_t c = 0; c < dx.cols(); ++c) dx.at(r, c) += inv_m * dC.at(0, c);
    });
  }

  /// X (m x n) + tile(p, reps) where p is (m / reps) x n repeated vertically.
  NodeId add_tile_rows(NodeId x, NodeId p, std::size_t reps) {
    const Tensor& X = value(x);
    const Tensor& P = value(p);
    RESDYN_REQUIRE(reps >= 1 && X.rows() == reps * P.rows() && X.cols() == P.cols(),
                   "add_tile_rows: shape mismatch");
    Tensor C(X.rows(), X.cols());
    const std::size_t block = P.rows();
    for (std::size_t r = 0; r < X.rows(); ++r)
      for (std::size_t c = 0; c < X.cols(); ++c) C.at(r, c) = X.at(r, c) + P.at(r % block, c);
    return record(std::move(C), [x, p, block](Tape& t, const Tensor& dC) {
      accumulate(t.grad_ref(x), dC, +1.0);
      Tensor& dp = t.grad_ref(p);
      for (std::size_t r = 0; r < dC.rows(); ++r)
        for (std::size_t c = 0; c < dC.cols(); ++c) dp.at(r % block, c) += dC.at(r, c);
    });
  }

  /// Per-row standardization y = (x - mean) / sqrt(var + eps), no affine.
  NodeId layer_norm_rows(NodeId x, double eps = 1e-6) {
    const Tensor& X = value(x);
    Tensor Y(X.rows(), X.cols());
    const auto nc = static_cast<double>(X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      double mu = 0.0;
      for (std::size_t c = 0; c < X.cols(); ++c) mu += X.at(r, c);
      mu /= nc;
      double var = 0.0;
      for (std::size_t c = 0; c < X.cols(); ++c) {
        const double d = X.at(r, c) - mu;
        var += d * d;
      }
      var /= nc;
      const double inv_sd = 1.0 / std::sqrt(var + eps);
      for (std::size_t c = 0; c < X.cols(); ++c) Y.at(r, c) = (X.at(r, c) - mu) * inv_sd;
    }
    NodeId out = record(std::move(Y), {});
    if (recording_) {
      node(out).backward = [x, out, eps](Tape& t, const Tensor& dC) {
        // With xhat = (x - mu)/sd: dx = (dC - mean(dC) - xhat * mean(dC .* xhat)) / sd.
        const Tensor& Xv = t.value(x);
        const Tensor& Yv = t.value(out);
        Tensor& dx = t.grad_ref(x);
        const auto nc = static_cast<double>(Xv.cols());
        for (std::size_t r = 0; r < Xv.rows(); ++r) {
          double mu = 0.0;
          for (std::size_t c = 0; c < Xv.cols(); ++c) mu += Xv.at(r, c);
          mu /= nc;
          double var = 0.0;
          for (std::size_t c = 0; c < Xv.cols(); ++c) {
            const double d = Xv.at(r, c) - mu;
            var += d * d;
          }
          var /= nc;
          const double inv_sd = 1.0 / std::sqrt(var + eps);
          double mean_d = 0.0, mean_dy = 0.0;
          for (std::size_t c = 0; c < Xv.cols(); ++c) {
            mean_d += dC.at(r, c);
            mean_dy += dC.at(r, c) * Yv.at(r, c);
          }
          mean_d /= nc;
          mean_dy /= nc;
          for (std::size_t c = 0; c < Xv.cols(); ++c)
            dx.at(r, c) += inv_sd * (dC.at(r, c) - mean_d - Yv.at(r, c) * mean_dy);
        }
      };
    }
    return out;
  }

  /// Scalar sum of squared differences: sum((a - b)^2), shape 1 x 1.
  NodeId sum_sq_diff(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    RESDYN_REQUIRE(A.rows() == B.rows() && A.cols() == B.cols(), "sum_sq_diff: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double d = A.data()[i] - B.data()[i];
      s += d * d;
    }
    Tensor C(1, 1);
    C.at(0, 0) = s;
    return record(std::move(C), [a, b](Tape& t, const Tensor& dC) {
      const Tensor& Av = t.value(a);
      const Tensor& Bv = t.value(b);
      Tensor& da = t.grad_ref(a);
      Tensor& db = t.grad_ref(b);
      const double g = 2.0 * dC.at(0, 0);
      for (std::size_t i = 0; i < Av.size(); ++i) {
        const double d = Av.data()[i] - Bv.data()[i];
        da.data()[i] += g * d;
        db.data()[i] -= g * d;
      }
    });
  }

  /// Backpropagate from a scalar root; the root's seed gradient is 1.
  void backward(NodeId root) {
    RESDYN_REQUIRE(recording_, "backward: tape was not recording");
    RESDYN_REQUIRE(value(root).size() == 1, "backward: root must be scalar");
    grad_ref(root).at(0, 0) = 1.0;
    for (std::int64_t i = root.v; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && n.grad_alloc) n.backward(*this, n.grad);
    }
  }

  static double gelu_value(double x) {
    const double k = 0.7978845608028653558798921198687;  // sqrt(2/pi)
    const double u = k * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
  }

  static double gelu_derivative(double x) {
    const double k = 0.7978845608028653558798921198687;
    const double u = k * (x + 0.044715 * x * x * x);
    const double th = std::tanh(u);
    const double du = k * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_alloc = false;
    std::function<void(Tape&, const Tensor&)> backward;
  };

  Node& node(NodeId id) {
    RESDYN_REQUIRE(id.valid() && id.v < static_cast<std::int64_t>(nodes_.size()),
                   "tape: invalid node id");
    return nodes_[static_cast<std::size_t>(id.v)];
  }

  const Node& node(NodeId id) const {
    RESDYN_REQUIRE(id.valid() && id.v < static_cast<std::int64_t>(nodes_.size()),
                   "tape: invalid node id");
    return nodes_[static_cast<std::size_t>(id.v)];
  }

  Tensor& grad_ref(NodeId id) {
    Node& n = node(id);
    if (!n.grad_alloc) {
      n.grad = Tensor(n.value.rows(), n.value.cols(), 0.0);
      n.grad_alloc = true;
    }
    return n.grad;
  }

  NodeId record(Tensor value, std::function<void(Tape&, const Tensor&)> backward) {
    if (!recording_) backward = {};
    nodes_.push_back(Node{std::move(value), Tensor(), false, std::move(backward)});
    return NodeId{static_cast<std::int64_t>(nodes_.size()) - 1};
  }

  static void accumulate(Tensor& dst, const Tensor& src, double s) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += s * src.data()[i];
  }

  static EigenMap emap(Tensor& t) {
    return EigenMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(t.cols()));
  }

  static ConstEigenMap cmap(const Tensor& t) {
    return ConstEigenMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                         static_cast<Eigen::Index>(t.cols()));
  }

  std::vector<Node> nodes_;
  bool recording_ = true;
};

}  // namespace resdyn::core
