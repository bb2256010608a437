#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "wassreg/errors.hpp"
#include "wassreg/ot.hpp"

namespace wassreg::ot {

Matrix squared_distances(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) throw DimensionError("squared_distances: dimension mismatch");
  Matrix c(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < y.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double t = x(i, k) - y(j, k);
        s += t * t;
      }
      c(i, j) = s;
    }
  return c;
}

// Shortest augmenting path Hungarian method with row/column potentials,
// O(n^3). Indices are 1-based internally; slot 0 is the virtual column.
std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DimensionError("solve_assignment: cost matrix must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_for_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_for_row[p[j] - 1] = j - 1;
  return col_for_row;
}

// Successive shortest paths on the bipartite transport network with
// Johnson potentials and dense Dijkstra. Flows are real-valued; every
// augmentation exhausts a supply, a demand, or a reverse arc.
Matrix solve_transport(std::span<const double> a, std::span<const double> b, const Matrix& cost) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (cost.rows() != na || cost.cols() != nb) throw DimensionError("solve_transport: cost shape mismatch");
  const double total_a = std::accumulate(a.begin(), a.end(), 0.0);
  const double total_b = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(total_a > 0.0) || std::abs(total_a - total_b) > 1e-9 * std::max(1.0, total_a))
    throw ValidationError("solve_transport: supplies and demands must have equal positive totals");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double tiny = 1e-15 * total_a;
  std::vector<double> supply(a.begin(), a.end());
  std::vector<double> demand(nb);
  for (std::size_t j = 0; j < nb; ++j) demand[j] = b[j] * (total_a / total_b);

  Matrix flow(na, nb);
  const std::size_t nv = na + nb;
  std::vector<double> pot(nv, 0.0), dist(nv);
  std::vector<std::ptrdiff_t> prev(nv);
  std::vector<char> done(nv);
  for (std::size_t j = 0; j < nb; ++j) {
    double m = kInf;
    for (std::size_t i = 0; i < na; ++i) m = std::min(m, cost(i, j));
    pot[na + j] = m;
  }

  double remaining = total_a;
  while (remaining > tiny * static_cast<double>(nv)) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < na; ++i)
      if (supply[i] > tiny) dist[i] = 0.0;

    std::ptrdiff_t sink = -1;
    for (;;) {
      std::ptrdiff_t best = -1;
      for (std::size_t v = 0; v < nv; ++v)
        if (!done[v] && dist[v] < kInf && (best < 0 || dist[v] < dist[static_cast<std::size_t>(best)]))
          best = static_cast<std::ptrdiff_t>(v);
      if (best < 0) break;
      const auto v = static_cast<std::size_t>(best);
      done[v] = 1;
      if (v >= na && demand[v - na] > tiny) {
        sink = best;
        break;
      }
      if (v < na) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t w = na + j;
          if (done[w]) continue;
          const double nd = dist[v] + std::max(0.0, cost(v, j) + pot[v] - pot[w]);
          if (nd < dist[w]) {
            dist[w] = nd;
            prev[w] = best;
          }
        }
      } else {
        const std::size_t j = v - na;
        for (std::size_t i = 0; i < na; ++i) {
          if (done[i] || flow(i, j) <= tiny) continue;
          const double nd = dist[v] + std::max(0.0, -cost(i, j) + pot[v] - pot[i]);
          if (nd < dist[i]) {
            dist[i] = nd;
            prev[i] = best;
          }
        }
      }
    }
    if (sink < 0) break;  // remaining mass below resolution

    const double reach = dist[static_cast<std::size_t>(sink)];
    for (std::size_t v = 0; v < nv; ++v) pot[v] += std::min(dist[v], reach);

    // Bottleneck along the path.
    auto t = static_cast<std::size_t>(sink);
    double delta = demand[t - na];
    std::size_t v = t;
    while (prev[v] >= 0) {
      const auto u = static_cast<std::size_t>(prev[v]);
      if (u >= na) delta = std::min(delta, flow(v, u - na));  // reverse arc sink u -> source v
      v = u;
    }
    delta = std::min(delta, supply[v]);
    const std::size_t source = v;

    v = t;
    while (prev[v] >= 0) {
      const auto u = static_cast<std::size_t>(prev[v]);
      if (u < na) {
        flow(u, v - na) += delta;
      } else {
        flow(v, u - na) -= delta;
        if (flow(v, u - na) < tiny) flow(v, u - na) = 0.0;
      }
      v = u;
    }
    supply[source] -= delta;
    demand[t - na] -= delta;
    remaining -= delta;
  }
  return flow;
}

double exact_w2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != b.dim()) throw DimensionError("exact_w2_squared: dimension mismatch");
  if (a.size() * b.size() > kExactSizeLimit)
    throw CapacityError("exact_w2_squared: " + std::to_string(a.size()) + " x " + std::to_string(b.size()) +
                        " exceeds the exact-solver limit; use sinkhorn_divergence instead");
  const Matrix cost = squared_distances(a.points(), b.points());
  double total = 0.0;
  if (a.size() == b.size() && a.is_uniform() && b.is_uniform()) {
    const auto col = solve_assignment(cost);
    for (std::size_t i = 0; i < col.size(); ++i) total += cost(i, col[i]);
    return total / static_cast<double>(a.size());
  }
  const Matrix plan = solve_transport(a.weights(), b.weights(), cost);
  for (std::size_t i = 0; i < plan.size(); ++i) total += plan.data()[i] * cost.data()[i];
  return std::max(0.0, total);
}

}  // namespace wassreg::ot
