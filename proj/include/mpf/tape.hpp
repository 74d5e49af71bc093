#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpf/core.hpp"

namespace mpf {

// Reverse-mode differentiation over an explicit operation tape. Nodes are
// dense row-major blocks (vectors are cols==1). Values live in one arena so a
// tape can be rebuilt every frame without reallocating. Leaves borrow their
// storage from the caller; the tape only records shape and pointer.
//
// Single-writer: one thread builds and differentiates a tape. Replaying
// backward() on the same tape is a pure function of the recorded values and
// yields bit-identical adjoints every time.

using NodeId = std::uint32_t;

enum class TapeOp : std::uint8_t {
  Leaf,
  LinearMap,   // y = A * x             a: matrix leaf, b: vector
  Add,         // y = a + b
  Hadamard,    // y = a (*) b           elementwise
  ScaleS,      // y = s * x             a: scalar node, b: vector
  Dot,         // y = <a, b>            scalar output
  Tanh,
  Relu,
  Cube,
  BceLogit,    // y = softplus(-(2*label-1) * z), z scalar; label in aux
};

class Tape {
 public:
  struct Node {
    TapeOp op;
    bool needs_grad;            // false branches are skipped in backward()
    NodeId a = 0;
    NodeId b = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::size_t offset = 0;     // into vals_ (non-leaf) or external data (leaf)
    const double* leaf_data = nullptr;
    double aux = 0.0;
  };

  /// Clears recorded operations but keeps arena capacity.
  void reset() {
    nodes_.clear();
    vals_.clear();
  }

  std::size_t node_count() const { return nodes_.size(); }

  NodeId leaf(const double* data, std::size_t rows, std::size_t cols, bool needs_grad) {
    Node n{TapeOp::Leaf, needs_grad, 0, 0,
           static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols), 0, data, 0.0};
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId leaf(const Vector& v, bool needs_grad) { return leaf(v.data(), v.size(), 1, needs_grad); }
  NodeId leaf(const Matrix& m, bool needs_grad) { return leaf(m.data(), m.rows(), m.cols(), needs_grad); }
  NodeId leaf_scalar(const double* s, bool needs_grad) { return leaf(s, 1, 1, needs_grad); }

  NodeId linear_map(NodeId w, NodeId x) {
    const Node& nw = nodes_[w];
    const Node& nx = nodes_[x];
    if (nw.cols != nx.rows || nx.cols != 1) {
      throw std::invalid_argument("tape linear_map: dimension mismatch");
    }
    NodeId y = alloc(TapeOp::LinearMap, w, x, nw.rows, 1);
    const double* wd = value_ptr(w);
    const double* xd = value_ptr(x);
    double* yd = out_ptr(y);
    for (std::uint32_t r = 0; r < nw.rows; ++r) {
      double acc = 0.0;
      const double* row = wd + static_cast<std::size_t>(r) * nw.cols;
      for (std::uint32_t c = 0; c < nw.cols; ++c) acc += row[c] * xd[c];
      yd[r] = acc;
    }
    return y;
  }

  NodeId add(NodeId a, NodeId b) {
    check_same_shape(a, b, "tape add");
    NodeId y = alloc(TapeOp::Add, a, b, nodes_[a].rows, nodes_[a].cols);
    binary_loop(a, b, y, [](double u, double v) { return u + v; });
    return y;
  }

  NodeId hadamard(NodeId a, NodeId b) {
    check_same_shape(a, b, "tape hadamard");
    NodeId y = alloc(TapeOp::Hadamard, a, b, nodes_[a].rows, nodes_[a].cols);
    binary_loop(a, b, y, [](double u, double v) { return u * v; });
    return y;
  }

  /// Scalar node times vector node.
  NodeId scale(NodeId s, NodeId x) {
    if (elem_count(s) != 1) throw std::invalid_argument("tape scale: scalar expected");
    NodeId y = alloc(TapeOp::ScaleS, s, x, nodes_[x].rows, nodes_[x].cols);
    double sv = *value_ptr(s);
    const double* xd = value_ptr(x);
    double* yd = out_ptr(y);
    for (std::size_t i = 0; i < elem_count(x); ++i) yd[i] = sv * xd[i];
    return y;
  }

  NodeId dot(NodeId a, NodeId b) {
    check_same_shape(a, b, "tape dot");
    NodeId y = alloc(TapeOp::Dot, a, b, 1, 1);
    const double* ad = value_ptr(a);
    const double* bd = value_ptr(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < elem_count(a); ++i) acc += ad[i] * bd[i];
    *out_ptr(y) = acc;
    return y;
  }

  NodeId tanh(NodeId x) {
    NodeId y = alloc(TapeOp::Tanh, x, x, nodes_[x].rows, nodes_[x].cols);
    unary_loop(x, y, [](double u) { return bounded_tanh(u); });
    return y;
  }

  NodeId relu(NodeId x) {
    NodeId y = alloc(TapeOp::Relu, x, x, nodes_[x].rows, nodes_[x].cols);
    unary_loop(x, y, [](double u) { return u > 0.0 ? u : 0.0; });
    return y;
  }

  NodeId cube(NodeId x) {
    NodeId y = alloc(TapeOp::Cube, x, x, nodes_[x].rows, nodes_[x].cols);
    unary_loop(x, y, [](double u) { return u * u * u; });
    return y;
  }

  /// Binary cross-entropy of a logit against label in {0,1}:
  /// softplus(-(2*label-1)*z), stable for |z| up to ~1e6.
  NodeId bce_logit(NodeId z, double label) {
    if (elem_count(z) != 1) throw std::invalid_argument("tape bce_logit: scalar logit expected");
    NodeId y = alloc(TapeOp::BceLogit, z, z, 1, 1);
    nodes_[y].aux = label;
    double s = 2.0 * label - 1.0;
    double t = -s * *value_ptr(z);
    *out_ptr(y) = softplus(t);
    return y;
  }

  std::span<const double> value(NodeId id) const {
    return {value_ptr(id), elem_count(id)};
  }

  double scalar_value(NodeId id) const {
    if (elem_count(id) != 1) throw std::invalid_argument("tape scalar_value: not a scalar node");
    return *value_ptr(id);
  }

  /// Runs the reverse sweep from a scalar output. Adjoints of every node with
  /// needs_grad are available through adjoint() afterwards; parameters that
  /// never influence the output keep zero adjoints.
  void backward(NodeId output) {
    if (elem_count(output) != 1) {
      throw std::invalid_argument("backward: output node must be scalar-valued");
    }
    adj_.assign(total_elems(), 0.0);
    adj_offsets_.resize(nodes_.size());
    {
      std::size_t off = 0;
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        adj_offsets_[i] = off;
        off += elem_count(static_cast<NodeId>(i));
      }
    }
    adj_[adj_offsets_[output]] = 1.0;

    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.needs_grad || n.op == TapeOp::Leaf) continue;
      const double* dy = adj_.data() + adj_offsets_[i];
      switch (n.op) {
        case TapeOp::LinearMap: {
          const Node& nw = nodes_[n.a];
          const double* wd = value_ptr(n.a);
          const double* xd = value_ptr(n.b);
          if (nodes_[n.a].needs_grad) {
            double* dw = adj_.data() + adj_offsets_[n.a];
            for (std::uint32_t r = 0; r < nw.rows; ++r) {
              double g = dy[r];
              double* drow = dw + static_cast<std::size_t>(r) * nw.cols;
              for (std::uint32_t c = 0; c < nw.cols; ++c) drow[c] += g * xd[c];
            }
          }
          if (nodes_[n.b].needs_grad) {
            double* dx = adj_.data() + adj_offsets_[n.b];
            for (std::uint32_t r = 0; r < nw.rows; ++r) {
              double g = dy[r];
              const double* row = wd + static_cast<std::size_t>(r) * nw.cols;
              for (std::uint32_t c = 0; c < nw.cols; ++c) dx[c] += g * row[c];
            }
          }
          break;
        }
        case TapeOp::Add: {
          accumulate(n.a, dy, elem_count(static_cast<NodeId>(i)), 1.0);
          accumulate(n.b, dy, elem_count(static_cast<NodeId>(i)), 1.0);
          break;
        }
        case TapeOp::Hadamard: {
          const double* ad = value_ptr(n.a);
          const double* bd = value_ptr(n.b);
          std::size_t m = elem_count(static_cast<NodeId>(i));
          if (nodes_[n.a].needs_grad) {
            double* da = adj_.data() + adj_offsets_[n.a];
            for (std::size_t k = 0; k < m; ++k) da[k] += dy[k] * bd[k];
          }
          if (nodes_[n.b].needs_grad) {
            double* db = adj_.data() + adj_offsets_[n.b];
            for (std::size_t k = 0; k < m; ++k) db[k] += dy[k] * ad[k];
          }
          break;
        }
        case TapeOp::ScaleS: {
          double sv = *value_ptr(n.a);
          const double* xd = value_ptr(n.b);
          std::size_t m = elem_count(static_cast<NodeId>(i));
          if (nodes_[n.a].needs_grad) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += dy[k] * xd[k];
            adj_[adj_offsets_[n.a]] += acc;
          }
          if (nodes_[n.b].needs_grad) {
            double* dx = adj_.data() + adj_offsets_[n.b];
            for (std::size_t k = 0; k < m; ++k) dx[k] += dy[k] * sv;
          }
          break;
        }
        case TapeOp::Dot: {
          double g = dy[0];
          const double* ad = value_ptr(n.a);
          const double* bd = value_ptr(n.b);
          std::size_t m = elem_count(n.a);
          if (nodes_[n.a].needs_grad) {
            double* da = adj_.data() + adj_offsets_[n.a];
            for (std::size_t k = 0; k < m; ++k) da[k] += g * bd[k];
          }
          if (nodes_[n.b].needs_grad) {
            double* db = adj_.data() + adj_offsets_[n.b];
            for (std::size_t k = 0; k < m; ++k) db[k] += g * ad[k];
          }
          break;
        }
        case TapeOp::Tanh: {
          if (!nodes_[n.a].needs_grad) break;
          const double* yd = value_ptr(static_cast<NodeId>(i));
          double* dx = adj_.data() + adj_offsets_[n.a];
          std::size_t m = elem_count(static_cast<NodeId>(i));
          for (std::size_t k = 0; k < m; ++k) dx[k] += dy[k] * (1.0 - yd[k] * yd[k]);
          break;
        }
        case TapeOp::Relu: {
          if (!nodes_[n.a].needs_grad) break;
          const double* xd = value_ptr(n.a);
          double* dx = adj_.data() + adj_offsets_[n.a];
          std::size_t m = elem_count(static_cast<NodeId>(i));
          for (std::size_t k = 0; k < m; ++k) dx[k] += xd[k] > 0.0 ? dy[k] : 0.0;
          break;
        }
        case TapeOp::Cube: {
          if (!nodes_[n.a].needs_grad) break;
          const double* xd = value_ptr(n.a);
          double* dx = adj_.data() + adj_offsets_[n.a];
          std::size_t m = elem_count(static_cast<NodeId>(i));
          for (std::size_t k = 0; k < m; ++k) dx[k] += dy[k] * 3.0 * xd[k] * xd[k];
          break;
        }
        case TapeOp::BceLogit: {
          if (!nodes_[n.a].needs_grad) break;
          double z = *value_ptr(n.a);
          adj_[adj_offsets_[n.a]] += dy[0] * (sigmoid(z) - n.aux);
          break;
        }
        case TapeOp::Leaf:
          break;
      }
    }
  }

  /// Adjoint of a node after backward(); same shape as its value.
  std::span<const double> adjoint(NodeId id) const {
    return {adj_.data() + adj_offsets_[id], elem_count(id)};
  }

 private:
  static double softplus(double t) {
    // log(1 + exp(t)) without overflow.
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
  }

  std::size_t elem_count(NodeId id) const {
    return static_cast<std::size_t>(nodes_[id].rows) * nodes_[id].cols;
  }

  std::size_t total_elems() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) n += elem_count(static_cast<NodeId>(i));
    return n;
  }

  const double* value_ptr(NodeId id) const {
    const Node& n = nodes_[id];
    return n.op == TapeOp::Leaf ? n.leaf_data : vals_.data() + n.offset;
  }

  // Only valid for freshly allocated non-leaf nodes.
  double* out_ptr(NodeId id) {
    return vals_.data() + nodes_[id].offset;
  }

  NodeId alloc(TapeOp op, NodeId a, NodeId b, std::uint32_t rows, std::uint32_t cols) {
    Node n{op, nodes_[a].needs_grad || nodes_[b].needs_grad, a, b, rows, cols,
           vals_.size(), nullptr, 0.0};
    vals_.resize(vals_.size() + static_cast<std::size_t>(rows) * cols, 0.0);
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void check_same_shape(NodeId a, NodeId b, const char* op) const {
    if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
  }

  template <typename F>
  void binary_loop(NodeId a, NodeId b, NodeId y, F f) {
    const double* ad = value_ptr(a);
    const double* bd = value_ptr(b);
    double* yd = out_ptr(y);
    std::size_t m = elem_count(y);
    for (std::size_t i = 0; i < m; ++i) yd[i] = f(ad[i], bd[i]);
  }

  template <typename F>
  void unary_loop(NodeId x, NodeId y, F f) {
    const double* xd = value_ptr(x);
    double* yd = out_ptr(y);
    std::size_t m = elem_count(y);
    for (std::size_t i = 0; i < m; ++i) yd[i] = f(xd[i]);
  }

  void accumulate(NodeId target, const double* dy, std::size_t m, double w) {
    if (!nodes_[target].needs_grad) return;
    double* dst = adj_.data() + adj_offsets_[target];
    for (std::size_t k = 0; k < m; ++k) dst[k] += w * dy[k];
  }

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> adj_;
  std::vector<std::size_t> adj_offsets_;
};

}  // namespace mpf
