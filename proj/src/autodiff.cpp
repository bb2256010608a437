#include "wassreg/autodiff.hpp"

#include <algorithm>

#include "wassreg/errors.hpp"

namespace wassreg::ad {

Tape::Id Tape::push(Node n) {
  n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tape::Id Tape::input(Matrix value) { return push(make_node(Op::leaf, std::move(value))); }

Tape::Id Tape::input(std::span<const double> row_vector) {
  return input(Matrix(1, row_vector.size(), std::vector<double>(row_vector.begin(), row_vector.end())));
}

Tape::Id Tape::linear(Id x, Id w, Id b) {
  const Matrix& X = nodes_[x].value;
  const Matrix& W = nodes_[w].value;
  const Matrix& B = nodes_[b].value;
  if (X.cols() != W.cols() || B.rows() != 1 || B.cols() != W.rows())
    throw DimensionError("linear: shape mismatch");
  Matrix out(X.rows(), W.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto xr = X.row(r);
    for (std::size_t o = 0; o < W.rows(); ++o) {
      const auto wr = W.row(o);
      double s = B(0, o);
      for (std::size_t i = 0; i < xr.size(); ++i) s += xr[i] * wr[i];
      out(r, o) = s;
    }
  }
  Node n = make_node(Op::linear, std::move(out));
  n.a = x;
  n.b = w;
  n.c = b;
  return push(std::move(n));
}

Tape::Id Tape::relu(Id x) {
  Matrix out = nodes_[x].value;
  for (auto& v : out.storage()) v = std::max(v, 0.0);
  Node n = make_node(Op::relu, std::move(out));
  n.a = x;
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const Matrix& A = nodes_[a].value;
  const Matrix& B = nodes_[b].value;
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw DimensionError("add: shape mismatch");
  Matrix out = A;
  out += B;
  Node n = make_node(Op::add, std::move(out));
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  const Matrix& A = nodes_[a].value;
  const Matrix& B = nodes_[b].value;
  if (A.rows() != B.rows()) throw DimensionError("concat_cols: row count mismatch");
  Matrix out(A.rows(), A.cols() + B.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    std::copy(A.row(r).begin(), A.row(r).end(), out.row(r).begin());
    std::copy(B.row(r).begin(), B.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(A.cols()));
  }
  Node n = make_node(Op::concat, std::move(out));
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

Tape::Id Tape::repeat_rows(Id x, std::size_t count) {
  const Matrix& X = nodes_[x].value;
  if (X.rows() != 1) throw DimensionError("repeat_rows: expects a single row");
  Matrix out(count, X.cols());
  for (std::size_t r = 0; r < count; ++r) std::copy(X.row(0).begin(), X.row(0).end(), out.row(r).begin());
  Node n = make_node(Op::repeat, std::move(out));
  n.a = x;
  return push(std::move(n));
}

Tape::Id Tape::weighted_pool(Id x, std::span<const double> weights) {
  const Matrix& X = nodes_[x].value;
  if (weights.size() != X.rows()) throw DimensionError("weighted_pool: weight count mismatch");
  Matrix out(1, X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c) out(0, c) += weights[r] * X(r, c);
  Node n = make_node(Op::pool, std::move(out));
  n.a = x;
  n.weights.assign(weights.begin(), weights.end());
  return push(std::move(n));
}

void Tape::backward(Id out, const Matrix& seed) {
  Node& top = nodes_[out];
  if (seed.rows() != top.value.rows() || seed.cols() != top.value.cols())
    throw DimensionError("backward: seed shape mismatch");
  top.grad += seed;

  for (std::size_t id = out + 1; id-- > 0;) {
    Node& n = nodes_[id];
    const Matrix& G = n.grad;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::linear: {
        const Matrix& X = nodes_[n.a].value;
        const Matrix& W = nodes_[n.b].value;
        Matrix& gx = nodes_[n.a].grad;
        Matrix& gw = nodes_[n.b].grad;
        Matrix& gb = nodes_[n.c].grad;
        for (std::size_t r = 0; r < G.rows(); ++r) {
          const auto xr = X.row(r);
          auto gxr = gx.row(r);
          for (std::size_t o = 0; o < G.cols(); ++o) {
            const double g = G(r, o);
            if (g == 0.0) continue;
            gb(0, o) += g;
            const auto wr = W.row(o);
            auto gwr = gw.row(o);
            for (std::size_t i = 0; i < xr.size(); ++i) {
              gxr[i] += g * wr[i];
              gwr[i] += g * xr[i];
            }
          }
        }
        break;
      }
      case Op::relu: {
        const Matrix& Y = n.value;
        Matrix& gx = nodes_[n.a].grad;
        for (std::size_t i = 0; i < G.size(); ++i)
          if (Y.data()[i] > 0.0) gx.data()[i] += G.data()[i];
        break;
      }
      case Op::add:
        nodes_[n.a].grad += G;
        nodes_[n.b].grad += G;
        break;
      case Op::concat: {
        Matrix& ga = nodes_[n.a].grad;
        Matrix& gb = nodes_[n.b].grad;
        for (std::size_t r = 0; r < G.rows(); ++r) {
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += G(r, c);
          for (std::size_t c = 0; c < gb.cols(); ++c) gb(r, c) += G(r, ga.cols() + c);
        }
        break;
      }
      case Op::repeat: {
        Matrix& gx = nodes_[n.a].grad;
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) gx(0, c) += G(r, c);
        break;
      }
      case Op::pool: {
        Matrix& gx = nodes_[n.a].grad;
        for (std::size_t r = 0; r < gx.rows(); ++r)
          for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += n.weights[r] * G(0, c);
        break;
      }
    }
  }
}

}  // namespace wassreg::ad
