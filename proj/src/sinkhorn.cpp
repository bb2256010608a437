#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "wassreg/errors.hpp"
#include "wassreg/ot.hpp"
#include "wassreg/simd.hpp"

namespace wassreg::ot {

void SinkhornConfig::validate() const {
  if (!(blur > 0.0) || !std::isfinite(blur)) throw ValidationError("sinkhorn: blur must be > 0");
  if (!(tol > 0.0)) throw ValidationError("sinkhorn: tol must be > 0");
  if (max_iters < 1) throw ValidationError("sinkhorn: max_iters must be >= 1");
  if (unroll_iters < 1 || unroll_iters > max_iters)
    throw ValidationError("sinkhorn: unroll_iters must lie in [1, max_iters]");
  if (!(scaling > 0.0 && scaling < 1.0)) throw ValidationError("sinkhorn: scaling must lie in (0, 1)");
}

namespace {

using Vec = std::vector<double>;

// Measure prepared for the kernels: coordinate-major copy and log-weights.
struct Cloud {
  const Matrix* points;
  Vec coords;  // d x k
  Vec log_weights;
  Vec weights;
  std::size_t k;
  std::size_t d;
};

Cloud prepare(const EmpiricalMeasure& m) {
  Cloud c{&m.points(), m.points().transposed_storage(), Vec(m.size()), Vec(m.weights().begin(), m.weights().end()),
          m.size(), m.dim()};
  for (std::size_t j = 0; j < c.k; ++j) c.log_weights[j] = std::log(c.weights[j]);
  return c;
}

double dotv(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

struct Scratch {
  Vec bias;
  Vec row;
};

// out_i = -eps * log sum_j w_j exp((h_j - |x_i - y_j|^2) / eps), h = 0 when empty.
void softmin(const Cloud& src, const Cloud& tgt, const Vec& h, double eps, Vec& out, Scratch& s) {
  const auto& K = simd::active();
  const std::size_t m = tgt.k;
  s.bias.resize(m);
  s.row.resize(m);
  const double inv = 1.0 / eps;
  for (std::size_t j = 0; j < m; ++j) s.bias[j] = tgt.log_weights[j] + (h.empty() ? 0.0 : h[j] * inv);
  out.resize(src.k);
  for (std::size_t i = 0; i < src.k; ++i) {
    const double mx = K.neg_cost_logits(src.points->row(i).data(), tgt.coords.data(), m, tgt.d, s.bias.data(), inv,
                                        s.row.data());
    const double sum = K.exp_shift_sum(s.row.data(), m, mx);
    out[i] = -eps * (mx + std::log(sum));
  }
}

// Reverse mode of softmin for the output adjoint u. Accumulates into
// h_bar (length k_tgt), src_bar (k_src x d, row-major, may be null) and
// tgt_bar (d x k_tgt, coordinate-major, may be null).
void softmin_vjp(const Cloud& src, const Cloud& tgt, const Vec& h, double eps, const Vec& u, Vec* h_bar,
                 Matrix* src_bar, Vec* tgt_bar, Scratch& s) {
  const auto& K = simd::active();
  const std::size_t m = tgt.k;
  const std::size_t d = tgt.d;
  s.bias.resize(m);
  s.row.resize(m);
  const double inv = 1.0 / eps;
  for (std::size_t j = 0; j < m; ++j) s.bias[j] = tgt.log_weights[j] + (h.empty() ? 0.0 : h[j] * inv);
  for (std::size_t i = 0; i < src.k; ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    const double* p = src.points->row(i).data();
    const double mx = K.neg_cost_logits(p, tgt.coords.data(), m, d, s.bias.data(), inv, s.row.data());
    const double sum = K.exp_shift_sum(s.row.data(), m, mx);
    const double scale = ui / sum;  // row holds sum * pi(. | i)
    if (h_bar) K.axpy(-scale, s.row.data(), h_bar->data(), m);
    for (std::size_t c = 0; c < d; ++c) {
      const double* qc = tgt.coords.data() + c * m;
      if (src_bar) {
        const double mean_q = K.dot(s.row.data(), qc, m) / sum;
        (*src_bar)(i, c) += 2.0 * ui * (p[c] - mean_q);
      }
      if (tgt_bar) K.axpy_shifted(2.0 * scale, s.row.data(), qc, p[c], tgt_bar->data() + c * m, m);
    }
  }
}

double max_abs_change(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Annealed temperatures: diameter^2, then geometric decrease to eps.
Vec temperature_schedule(double diam, double eps, double scaling) {
  Vec out;
  double e = std::max(diam * diam, eps);
  while (e > eps) {
    out.push_back(e);
    e *= scaling;
  }
  out.push_back(eps);
  return out;
}

double bbox_diameter(const Cloud& a, const Cloud& b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.d; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Cloud* m : {&a, &b})
      for (std::size_t j = 0; j < m->k; ++j) {
        const double v = m->coords[c * m->k + j];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    s += (hi - lo) * (hi - lo);
  }
  return std::sqrt(s);
}

// One state of the iteration: potentials on the a side and the b side. For
// a self problem only `f` is used.
struct State {
  Vec f;
  Vec g;
};

// Forward run of the Sinkhorn iteration with temperature annealing. Cross
// problems alternate f <- softmin_b(g), g <- softmin_a(f); self problems
// use the averaged symmetric update p <- (p + softmin_a(p)) / 2, which
// converges in a handful of steps. Alternating is the faster of the two on
// cross problems: near-gauge modes (f + c, g - c on a cluster) contract like
// sigma^2 instead of (1 + sigma) / 2. Keeps the last `keep` states for
// differentiation.
constexpr double kStallFactor = 1e3;

struct Run {
  std::deque<State> history;  // states t0 .. T
  std::deque<double> temps;   // temperature of update t (t0 .. T-1)
  std::size_t t0 = 0;         // index of history.front()
  double init_temp = 0.0;
  // Warm-started runs begin from given potentials, which are constants for
  // differentiation; cold runs begin from softmin of zero at init_temp.
  bool warm = false;
  std::size_t updates = 0;
  bool converged = false;
  double last_change = 0.0;
  const State& last() const { return history.back(); }
};

void trim(Run& run, std::size_t keep) {
  while (run.history.size() > keep + 1) {
    run.history.pop_front();
    run.temps.pop_front();
    ++run.t0;
  }
}

// State 0 is (0, softmin_a(0)); update t maps g_t to
// f_{t+1} = softmin_b(g_t), g_{t+1} = softmin_a(f_{t+1}).
// A warm start skips annealing and starts from (warm_f, warm_g).
Run run_cross(const Cloud& a, const Cloud& b, const SinkhornConfig& cfg, std::size_t keep, Scratch& s,
              const Vec* warm_f = nullptr, const Vec* warm_g = nullptr, std::size_t checkpoint = 0) {
  const double eps = cfg.epsilon();
  Run run;
  run.warm = warm_f != nullptr && warm_g != nullptr;
  const Vec schedule = run.warm ? Vec{eps} : temperature_schedule(bbox_diameter(a, b), eps, cfg.scaling);
  run.init_temp = schedule.front();
  if (run.warm) {
    run.history.push_back(State{*warm_f, *warm_g});
  } else {
    State st{Vec(a.k, 0.0), {}};
    softmin(b, a, {}, run.init_temp, st.g, s);
    run.history.push_back(std::move(st));
  }
  const auto max_updates = static_cast<std::size_t>(cfg.max_iters);
  while (run.updates < max_updates) {
    const double e = run.updates < schedule.size() ? schedule[run.updates] : eps;
    const State& cur = run.history.back();
    State next;
    softmin(a, b, cur.g, e, next.f, s);
    softmin(b, a, next.f, e, next.g, s);
    const double change = std::max(max_abs_change(next.f, cur.f), max_abs_change(next.g, cur.g));
    run.history.push_back(std::move(next));
    run.temps.push_back(e);
    ++run.updates;
    trim(run, keep);
    run.last_change = change;
    if (run.updates > schedule.size() && change < cfg.tol) {
      run.converged = true;
      break;
    }
    if (run.updates == checkpoint && change > kStallFactor * cfg.tol) break;
  }
  return run;
}

Run run_self(const Cloud& a, const SinkhornConfig& cfg, std::size_t keep, Scratch& s, const Vec* warm = nullptr,
             std::size_t checkpoint = 0) {
  const double eps = cfg.epsilon();
  Run run;
  run.warm = warm != nullptr;
  const Vec schedule = run.warm ? Vec{eps} : temperature_schedule(bbox_diameter(a, a), eps, cfg.scaling);
  run.init_temp = schedule.front();
  State st;
  if (run.warm) {
    st.f = *warm;
  } else {
    softmin(a, a, {}, run.init_temp, st.f, s);
  }
  run.history.push_back(st);
  Vec pt;
  const auto max_updates = static_cast<std::size_t>(cfg.max_iters);
  while (run.updates < max_updates) {
    const double e = run.updates < schedule.size() ? schedule[run.updates] : eps;
    const State& cur = run.history.back();
    softmin(a, a, cur.f, e, pt, s);
    State next{Vec(a.k), {}};
    for (std::size_t i = 0; i < a.k; ++i) next.f[i] = 0.5 * (cur.f[i] + pt[i]);
    const double change = max_abs_change(next.f, cur.f);
    run.history.push_back(std::move(next));
    run.temps.push_back(e);
    ++run.updates;
    trim(run, keep);
    run.last_change = change;
    if (run.updates >= schedule.size() && change < cfg.tol) {
      run.converged = true;
      break;
    }
    if (run.updates == checkpoint && change > kStallFactor * cfg.tol) break;
  }
  return run;
}

// OT_eps(a,b) as the average of the two semi-dual values
//   D_a(g) = <a, softmin_b(g)> + <b, g>,  D_b(f) = <b, softmin_a(f)> + <a, f>,
// both stationary in the potentials at the fixed point.
double cross_value(const Cloud& a, const Cloud& b, const State& st, double eps, Scratch& s) {
  Vec ft, gt;
  softmin(a, b, st.g, eps, ft, s);
  softmin(b, a, st.f, eps, gt, s);
  const double da = dotv(a.weights, ft) + dotv(b.weights, st.g);
  const double db = dotv(b.weights, gt) + dotv(a.weights, st.f);
  return 0.5 * (da + db);
}

double self_value(const Cloud& a, const State& st, double eps, Scratch& s) {
  Vec pt;
  softmin(a, a, st.f, eps, pt, s);
  return dotv(a.weights, pt) + dotv(a.weights, st.f);
}

void add_coordinate_major(Matrix& dst, const Vec& src_t, double scale) {
  const std::size_t k = dst.rows();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t c = 0; c < dst.cols(); ++c) dst(i, c) += scale * src_t[c * k + i];
}

// d cross_value / d (points of a), reverse mode through the stored window.
Matrix cross_grad(const Cloud& a, const Cloud& b, const Run& run, double eps, Scratch& s) {
  const std::size_t d = a.d;
  Matrix xbar(a.k, d);
  Vec xbar_t(d * a.k, 0.0);
  const State& fin = run.last();

  // value = 1/2 [<a, softmin_b(g)> + <b, g> + <b, softmin_a(f)> + <a, f>]
  Vec fbar(a.k), gbar(b.k);
  {
    Vec ua(a.k), ub(b.k);
    for (std::size_t i = 0; i < a.k; ++i) fbar[i] = ua[i] = 0.5 * a.weights[i];
    for (std::size_t j = 0; j < b.k; ++j) gbar[j] = ub[j] = 0.5 * b.weights[j];
    softmin_vjp(a, b, fin.g, eps, ua, &gbar, &xbar, nullptr, s);
    softmin_vjp(b, a, fin.f, eps, ub, &fbar, nullptr, &xbar_t, s);
  }

  // Update t: f' = S_b(g_t), g' = S_a(f'). Walk the window backwards.
  for (std::size_t step = run.history.size() - 1; step-- > 0;) {
    const State& next = run.history[step + 1];
    const State& cur = run.history[step];
    const double e = run.temps[step];
    softmin_vjp(b, a, next.f, e, gbar, &fbar, nullptr, &xbar_t, s);
    Vec g_prev(b.k, 0.0);
    softmin_vjp(a, b, cur.g, e, fbar, &g_prev, &xbar, nullptr, s);
    std::fill(fbar.begin(), fbar.end(), 0.0);  // f_t does not feed update t
    gbar.swap(g_prev);
  }
  if (run.t0 == 0 && !run.warm) softmin_vjp(b, a, {}, run.init_temp, gbar, nullptr, nullptr, &xbar_t, s);
  add_coordinate_major(xbar, xbar_t, 1.0);
  return xbar;
}

// d self_value / d (points of a); a is both source and target.
Matrix self_grad(const Cloud& a, const Run& run, double eps, Scratch& s) {
  const std::size_t d = a.d;
  Matrix xbar(a.k, d);
  Vec xbar_t(d * a.k, 0.0);
  const State& fin = run.last();
  Vec pbar(a.weights);
  softmin_vjp(a, a, fin.f, eps, a.weights, &pbar, &xbar, &xbar_t, s);

  const std::size_t n_updates = run.history.size() - 1;
  Vec half(a.k);
  for (std::size_t step = n_updates; step-- > 0;) {
    const State& cur = run.history[step];
    Vec np(a.k);
    for (std::size_t i = 0; i < a.k; ++i) {
      half[i] = 0.5 * pbar[i];
      np[i] = half[i];
    }
    softmin_vjp(a, a, cur.f, run.temps[step], half, &np, &xbar, &xbar_t, s);
    pbar.swap(np);
  }
  if (run.t0 == 0 && !run.warm) softmin_vjp(a, a, {}, run.init_temp, pbar, nullptr, &xbar, &xbar_t, s);
  add_coordinate_major(xbar, xbar_t, 1.0);
  return xbar;
}

void check_dims(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != b.dim())
    throw DimensionError("sinkhorn: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()) + ")");
}

}  // namespace

SelfTerm self_transport(const EmpiricalMeasure& b, const SinkhornConfig& cfg) {
  cfg.validate();
  Scratch s;
  const Cloud cb = prepare(b);
  const Run run = run_self(cb, cfg, 0, s);
  return {self_value(cb, run.last(), cfg.epsilon(), s), run.converged, static_cast<int>(run.updates)};
}

namespace {

bool fits(const Vec& v, std::size_t k) { return v.size() == k; }

bool same_measure(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.size() != b.size()) return false;
  const auto& pa = a.points();
  const auto& pb = b.points();
  return std::equal(pa.data(), pa.data() + pa.size(), pb.data()) &&
         std::ranges::equal(a.weights(), b.weights());
}

// A warm-started run still far from tol after this many updates is
// abandoned for a cold, annealed one. Without annealing, potentials that are
// far from the solution move by about eps per update, which is hopeless at
// small eps; runs that are merely slow carry on to max_iters.
std::size_t warm_checkpoint(const SinkhornConfig& cfg) {
  return std::min<std::size_t>(static_cast<std::size_t>(cfg.max_iters),
                               std::max<std::size_t>(100, static_cast<std::size_t>(cfg.max_iters) / 10));
}

Run solve_cross(const Cloud& a, const Cloud& b, const SinkhornConfig& cfg, std::size_t keep, Scratch& s,
                const WarmStart* warm) {
  if (warm && fits(warm->f, a.k) && fits(warm->g, b.k)) {
    Run run = run_cross(a, b, cfg, keep, s, &warm->f, &warm->g, warm_checkpoint(cfg));
    if (run.converged) return run;
  }
  return run_cross(a, b, cfg, keep, s);
}

Run solve_self(const Cloud& a, const SinkhornConfig& cfg, std::size_t keep, Scratch& s, const WarmStart* warm) {
  if (warm && fits(warm->self_a, a.k)) {
    Run run = run_self(a, cfg, keep, s, &warm->self_a, warm_checkpoint(cfg));
    if (run.converged) return run;
  }
  return run_self(a, cfg, keep, s);
}

ValueAndGrad evaluate(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const SinkhornConfig& cfg, bool want_grad,
                      const std::optional<SelfTerm>& b_self, const WarmStart* warm) {
  check_dims(a, b);
  cfg.validate();
  Scratch s;
  const double eps = cfg.epsilon();
  const Cloud ca = prepare(a);
  const Cloud cb = prepare(b);
  const std::size_t keep = want_grad ? static_cast<std::size_t>(cfg.unroll_iters) : 0;

  ValueAndGrad out;
  if (same_measure(a, b)) {
    // OT_eps(a, a) comes from the symmetric self solve; moving the points of
    // one side only contributes half of its gradient.
    const Run self_a = solve_self(ca, cfg, keep, s, warm);
    const double va = self_value(ca, self_a.last(), eps, s);
    out.result.potential_a = self_a.last().f;
    out.result.potential_b = self_a.last().f;
    out.result.converged = self_a.converged;
    out.result.iters_used = static_cast<int>(self_a.updates);
    if (cfg.debiased) {
      out.result.potential_self_a = self_a.last().f;
      out.result.value = 0.0;
      if (want_grad) out.grad = Matrix(a.size(), a.dim());
    } else {
      out.result.value = va;
      if (want_grad) {
        out.grad = self_grad(ca, self_a, eps, s);
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data()[i] *= 0.5;
      }
    }
    return out;
  }

  const Run cross = solve_cross(ca, cb, cfg, keep, s, warm);
  double value = cross_value(ca, cb, cross.last(), eps, s);
  out.result.potential_a = cross.last().f;
  out.result.potential_b = cross.last().g;
  out.result.converged = cross.converged;
  out.result.iters_used = static_cast<int>(cross.updates);
  if (want_grad) out.grad = cross_grad(ca, cb, cross, eps, s);

  if (cfg.debiased) {
    const Run self_a = solve_self(ca, cfg, keep, s, warm);
    out.result.potential_self_a = self_a.last().f;
    const double va = self_value(ca, self_a.last(), eps, s);
    const SelfTerm sb = b_self ? *b_self : SelfTerm{self_value(cb, run_self(cb, cfg, 0, s).last(), eps, s), true, 0};
    value -= 0.5 * va + 0.5 * sb.value;
    out.result.converged = out.result.converged && self_a.converged && sb.converged;
    out.result.iters_used = std::max(out.result.iters_used, static_cast<int>(self_a.updates));
    if (want_grad) {
      const Matrix ga = self_grad(ca, self_a, eps, s);
      for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data()[i] -= 0.5 * ga.data()[i];
    }
  }
  out.result.value = value;
  return out;
}

}  // namespace

OtResult sinkhorn_divergence(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const SinkhornConfig& cfg) {
  return evaluate(a, b, cfg, false, std::nullopt, nullptr).result;
}

ValueAndGrad sinkhorn_value_and_grad(const EmpiricalMeasure& a_pushed, const EmpiricalMeasure& b,
                                     const SinkhornConfig& cfg, const std::optional<SelfTerm>& b_self,
                                     const WarmStart* warm) {
  return evaluate(a_pushed, b, cfg, true, b_self, warm);
}

Matrix sinkhorn_grad_points(const EmpiricalMeasure& a_pushed, const EmpiricalMeasure& b, const SinkhornConfig& cfg) {
  return evaluate(a_pushed, b, cfg, true, std::nullopt, nullptr).grad;
}

EntropicPlan entropic_plan(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const SinkhornConfig& cfg,
                           const WarmStart* warm) {
  check_dims(a, b);
  cfg.validate();
  Scratch s;
  const double eps = cfg.epsilon();
  const Cloud ca = prepare(a);
  const Cloud cb = prepare(b);
  const Run run = solve_cross(ca, cb, cfg, 0, s, warm);
  const State& st = run.last();

  EntropicPlan plan{Matrix(a.size(), b.size()), cross_value(ca, cb, st, eps, s), run.converged, {st.f, st.g, {}}};
  const auto& K = simd::active();
  s.bias.resize(cb.k);
  for (std::size_t j = 0; j < cb.k; ++j) s.bias[j] = cb.log_weights[j] + st.g[j] / eps;
  for (std::size_t i = 0; i < ca.k; ++i) {
    double* row = plan.conditional.row(i).data();
    const double mx = K.neg_cost_logits(a.point(i).data(), cb.coords.data(), cb.k, cb.d, s.bias.data(), 1.0 / eps, row);
    const double sum = K.exp_shift_sum(row, cb.k, mx);
    for (std::size_t j = 0; j < cb.k; ++j) row[j] /= sum;
  }
  return plan;
}

}  // namespace wassreg::ot
