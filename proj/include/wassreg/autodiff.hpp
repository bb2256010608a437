#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wassreg/matrix.hpp"

namespace wassreg::ad {

// Matrix-valued reverse-mode tape covering the operations the map families
// need. Nodes are appended in evaluation order; backward() walks them in
// reverse and accumulates adjoints. Rows index points, columns features.
class Tape {
 public:
  using Id = std::size_t;

  // Leaf whose adjoint is accumulated.
  Id input(Matrix value);
  Id input(std::span<const double> row_vector);

  // x: n x in, w: out x in, b: 1 x out  ->  x w^T + b  (n x out)
  Id linear(Id x, Id w, Id b);
  Id relu(Id x);
  Id add(Id a, Id b);
  // [a | b] for a: n x p, b: n x q.
  Id concat_cols(Id a, Id b);
  // 1 x c -> n x c.
  Id repeat_rows(Id x, std::size_t n);
  // n x c -> 1 x c, sum_i weights[i] * x_i, summed in index order.
  Id weighted_pool(Id x, std::span<const double> weights);

  const Matrix& value(Id id) const { return nodes_[id].value; }
  const Matrix& grad(Id id) const { return nodes_[id].grad; }

  // Seeds the adjoint of `out` and propagates to every earlier node.
  // May be called once per tape.
  void backward(Id out, const Matrix& seed);

 private:
  enum class Op { leaf, linear, relu, add, concat, repeat, pool };
  struct Node {
    Op op = Op::leaf;
    Matrix value;
    Matrix grad;
    Id a = 0, b = 0, c = 0;
    std::vector<double> weights;
  };

  static Node make_node(Op op, Matrix value) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    return n;
  }
  Id push(Node n);

  std::vector<Node> nodes_;
};

}  // namespace wassreg::ad
