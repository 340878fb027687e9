#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dot/matrix.hpp"

namespace dot {

// Reverse-mode differentiation over a fixed primitive set. The training
// objective is a small static graph, so the tape records one node per
// primitive call and replays them backwards. A tape is single-writer: build
// the graph, call backward once, read gradients, discard.
class Tape {
 public:
  enum class Op {
    Input,
    Param,
    MatMul,      // a * b
    MatMulNT,    // a * b^T
    AddRowVec,   // a + broadcast row vector b (1 x n)
    Add,         // a + b elementwise
    Scale,       // k * a
    Tanh,        // tanh(a) elementwise
    RowSoftmax,  // softmax of rows of a / k
    MeanNll,     // mean over rows of -log p[i, label_i]; a holds probabilities
    EntropyMean, // mean over rows of sum_k -p log p; a holds probabilities
    Lpp,         // sum_{ij} w_ij ||a_i - a_j||^2 via cached graph Laplacian
  };

  int input(Matrix value) { return push(Op::Input, std::move(value), -1, -1, false); }

  int param(Matrix value) {
    int id = push(Op::Param, std::move(value), -1, -1, true);
    params_.push_back(id);
    return id;
  }

  int matmul(int a, int b) {
    return push(Op::MatMul, dot::matmul(value(a), value(b)), a, b);
  }

  int matmul_nt(int a, int b) {
    return push(Op::MatMulNT, dot::matmul_nt(value(a), value(b)), a, b);
  }

  int add_rowvec(int a, int b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (bv.rows() != 1 || bv.cols() != av.cols())
      throw ShapeError("add_rowvec: bias " + bv.shape_str() +
                       " does not broadcast over " + av.shape_str());
    Matrix out = av;
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
    return push(Op::AddRowVec, std::move(out), a, b);
  }

  int add(int a, int b) { return push(Op::Add, dot::add(value(a), value(b)), a, b); }

  int scale(int a, double k) {
    int id = push(Op::Scale, dot::scaled(value(a), k), a, -1);
    nodes_[id].k = k;
    return id;
  }

  int tanh_of(int a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = std::tanh(v);
    return push(Op::Tanh, std::move(out), a, -1);
  }

  int row_softmax(int a, double scale) {
    int id = push(Op::RowSoftmax, softmax_rows(value(a), scale), a, -1);
    nodes_[id].k = scale;
    return id;
  }

  int mean_nll(int probs, const std::vector<int>& labels) {
    const Matrix& p = value(probs);
    if (static_cast<int>(labels.size()) != p.rows())
      throw ShapeError("mean_nll: " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(p.rows()) + " rows");
    double loss = 0.0;
    for (int i = 0; i < p.rows(); ++i) {
      const int y = labels[i];
      if (y < 0 || y >= p.cols())
        throw InputError("mean_nll: label " + std::to_string(y) + " at row " +
                         std::to_string(i) + " outside [0," +
                         std::to_string(p.cols()) + ")");
      loss -= std::log(std::max(p(i, y), kLogClamp));
    }
    Matrix out(1, 1);
    out(0, 0) = loss / p.rows();
    int id = push(Op::MeanNll, std::move(out), probs, -1);
    nodes_[id].labels = labels;
    return id;
  }

  int entropy_mean(int probs) {
    const Matrix& p = value(probs);
    double h = 0.0;
    for (double v : p.data()) h -= v * std::log(std::max(v, kLogClamp));
    Matrix out(1, 1);
    out(0, 0) = h / p.rows();
    return push(Op::EntropyMean, std::move(out), probs, -1);
  }

  // laplacian = degree - adjacency of a symmetric 0/1 graph over the rows of a
  int lpp(int a, Matrix laplacian) {
    const Matrix& f = value(a);
    if (laplacian.rows() != f.rows() || laplacian.cols() != f.rows())
      throw ShapeError("lpp: Laplacian " + laplacian.shape_str() +
                       " does not match " + std::to_string(f.rows()) + " rows");
    Matrix lf = dot::matmul(laplacian, f);
    Matrix out(1, 1);
    out(0, 0) = 2.0 * frobenius_dot(f, lf);
    int id = push(Op::Lpp, std::move(out), a, -1);
    nodes_[id].aux = std::move(laplacian);
    return id;
  }

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  const std::vector<int>& params() const { return params_; }

  void backward(int root) {
    const Matrix& v = value(root);
    if (v.rows() != 1 || v.cols() != 1)
      throw ShapeError("backward: root must be scalar, got " + v.shape_str());
    for (auto& n : nodes_)
      if (n.needs_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
    if (!nodes_[root].needs_grad) return;
    nodes_[root].grad(0, 0) = 1.0;
    for (int id = root; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad) continue;
      backprop(n);
    }
  }

  static constexpr double kLogClamp = 1e-12;

 private:
  struct Node {
    Op op;
    int a, b;
    bool needs_grad;
    double k = 0.0;
    Matrix value;
    Matrix grad;
    Matrix aux;
    std::vector<int> labels;
  };

  int push(Op op, Matrix value, int a, int b, bool needs = false) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    n.needs_grad = needs || (a >= 0 && nodes_[a].needs_grad) ||
                   (b >= 0 && nodes_[b].needs_grad);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void accumulate(int id, const Matrix& g) {
    if (id < 0) return;
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    for (size_t i = 0; i < n.grad.size(); ++i) n.grad.data()[i] += g.data()[i];
  }

  void backprop(Node& n) {
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
        break;
      case Op::MatMul:
        accumulate(n.a, dot::matmul_nt(g, value(n.b)));
        accumulate(n.b, dot::matmul_tn(value(n.a), g));
        break;
      case Op::MatMulNT:
        accumulate(n.a, dot::matmul(g, value(n.b)));
        accumulate(n.b, dot::matmul_tn(g, value(n.a)));
        break;
      case Op::AddRowVec: {
        accumulate(n.a, g);
        Matrix gb(1, g.cols());
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
        accumulate(n.b, gb);
        break;
      }
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Scale:
        accumulate(n.a, scaled(g, n.k));
        break;
      case Op::Tanh: {
        Matrix ga = g;
        for (size_t i = 0; i < ga.size(); ++i) {
          const double t = n.value.data()[i];
          ga.data()[i] *= 1.0 - t * t;
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::RowSoftmax: {
        // dS = P (dP - rowsum(dP o P)) / scale
        const Matrix& p = n.value;
        Matrix gs(p.rows(), p.cols());
        for (int i = 0; i < p.rows(); ++i) {
          double dotrow = 0.0;
          for (int j = 0; j < p.cols(); ++j) dotrow += g(i, j) * p(i, j);
          for (int j = 0; j < p.cols(); ++j)
            gs(i, j) = p(i, j) * (g(i, j) - dotrow) / n.k;
        }
        accumulate(n.a, gs);
        break;
      }
      case Op::MeanNll: {
        const Matrix& p = value(n.a);
        Matrix gp(p.rows(), p.cols());
        const double go = g(0, 0) / p.rows();
        for (int i = 0; i < p.rows(); ++i) {
          const int y = n.labels[i];
          const double pv = p(i, y);
          if (pv > kLogClamp) gp(i, y) = -go / pv;
        }
        accumulate(n.a, gp);
        break;
      }
      case Op::EntropyMean: {
        const Matrix& p = value(n.a);
        Matrix gp(p.rows(), p.cols());
        const double go = g(0, 0) / p.rows();
        for (size_t i = 0; i < p.size(); ++i) {
          const double pv = p.data()[i];
          gp.data()[i] = -go * (std::log(std::max(pv, kLogClamp)) +
                                (pv > kLogClamp ? 1.0 : 0.0));
        }
        accumulate(n.a, gp);
        break;
      }
      case Op::Lpp: {
        Matrix ga = dot::matmul(n.aux, value(n.a));
        const double go = 4.0 * g(0, 0);
        for (double& v : ga.data()) v *= go;
        accumulate(n.a, ga);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<int> params_;
};

}  // namespace dot
