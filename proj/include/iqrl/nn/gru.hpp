#pragma once

// Gated recurrent unit, frozen convention:
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   hc = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * hc

#include <string>
#include <vector>

#include "iqrl/nn/ops.hpp"

namespace iqrl::nn {

struct GruShape {
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// Registers a GRU's nine parameters under `prefix` (e.g. "turn.fwd.W_z").
inline void add_gru_parameters(ParameterSet& params, const std::string& prefix, GruShape shape, double init_scale) {
  for (const char* gate : {"z", "r", "h"}) {
    params.add_uniform(prefix + ".W_" + gate, {shape.hidden, shape.input}, init_scale);
    params.add_uniform(prefix + ".U_" + gate, {shape.hidden, shape.hidden}, init_scale);
    params.add_zeros(prefix + ".b_" + gate, {shape.hidden});
  }
}

/// Tape handles for one GRU's parameters.
struct GruVars {
  Var w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h;

  std::size_t input_dim() const { return w_z.value().cols(); }
  std::size_t hidden_dim() const { return w_z.value().rows(); }

  static GruVars bind(Tape& tape, ParameterSet& params, const std::string& prefix) {
    auto p = [&](const std::string& name) { return tape.parameter(params.at(prefix + "." + name)); };
    return {p("W_z"), p("U_z"), p("b_z"), p("W_r"), p("U_r"), p("b_r"), p("W_h"), p("U_h"), p("b_h")};
  }

  static GruVars bind_const(Tape& tape, const ParameterSet& params, const std::string& prefix) {
    auto p = [&](const std::string& name) { return tape.constant_ref(params.at(prefix + "." + name)); };
    return {p("W_z"), p("U_z"), p("b_z"), p("W_r"), p("U_r"), p("b_r"), p("W_h"), p("U_h"), p("b_h")};
  }

  void validate(const std::string& context) const {
    const std::size_t u = hidden_dim(), d = input_dim();
    auto check = [&](const Var& v, const char* name, Shape expected) {
      if (v.shape() != expected) {
        throw ShapeError(context + ": parameter " + name + " has shape " + shape_string(v.shape()) + ", expected " +
                         shape_string(expected));
      }
    };
    check(w_z, "W_z", {u, d});
    check(w_r, "W_r", {u, d});
    check(w_h, "W_h", {u, d});
    check(u_z, "U_z", {u, u});
    check(u_r, "U_r", {u, u});
    check(u_h, "U_h", {u, u});
    check(b_z, "b_z", {u});
    check(b_r, "b_r", {u});
    check(b_h, "b_h", {u});
  }
};

/// Runs a GRU over the rows of `inputs` ([K x d]) starting from `h0` ([u]).
/// Output row k is the state right after consuming input row k; with
/// `reverse`, inputs are consumed from row K-1 down to row 0, so row k is the
/// state after rows K-1..k. One tape node covers the whole sequence.
inline Var gru_sequence(Var inputs, Var h0, const GruVars& gru, bool reverse = false) {
  gru.validate("gru_sequence");
  const Tensor& xv = inputs.value();
  const std::size_t d = gru.input_dim(), u = gru.hidden_dim();
  if (xv.rank() != 2 || xv.cols() != d) {
    throw ShapeError("gru_sequence: inputs " + shape_string(xv.shape()) + " do not have " + std::to_string(d) +
                     " columns (parameter W_z)");
  }
  if (h0.shape() != Shape{u}) {
    throw ShapeError("gru_sequence: initial state " + shape_string(h0.shape()) + " does not match U_z hidden size " +
                     std::to_string(u));
  }
  const std::size_t steps = xv.rows();

  const double* Wz = gru.w_z.value().data().data();
  const double* Uz = gru.u_z.value().data().data();
  const double* bz = gru.b_z.value().data().data();
  const double* Wr = gru.w_r.value().data().data();
  const double* Ur = gru.u_r.value().data().data();
  const double* br = gru.b_r.value().data().data();
  const double* Wh = gru.w_h.value().data().data();
  const double* Uh = gru.u_h.value().data().data();
  const double* bh = gru.b_h.value().data().data();

  // Per-step caches in processing order: z, r, hc, and r*h_prev.
  std::vector<double> z(steps * u), r(steps * u), hc(steps * u), rh(steps * u);
  Tensor out({steps, u});
  std::vector<double> h(h0.value().data().begin(), h0.value().data().end());
  std::vector<double> acc(u);

  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t k = reverse ? steps - 1 - s : s;
    const double* x = xv.data().data() + k * d;
    double* zs = z.data() + s * u;
    double* rs = r.data() + s * u;
    double* hs = hc.data() + s * u;
    double* rhs = rh.data() + s * u;

    std::copy_n(bz, u, zs);
    detail::gemv_acc(Wz, x, zs, u, d);
    detail::gemv_acc(Uz, h.data(), zs, u, u);
    for (std::size_t i = 0; i < u; ++i) zs[i] = detail::sigmoid(zs[i]);

    std::copy_n(br, u, rs);
    detail::gemv_acc(Wr, x, rs, u, d);
    detail::gemv_acc(Ur, h.data(), rs, u, u);
    for (std::size_t i = 0; i < u; ++i) {
      rs[i] = detail::sigmoid(rs[i]);
      rhs[i] = rs[i] * h[i];
    }

    std::copy_n(bh, u, hs);
    detail::gemv_acc(Wh, x, hs, u, d);
    detail::gemv_acc(Uh, rhs, hs, u, u);
    for (std::size_t i = 0; i < u; ++i) hs[i] = std::tanh(hs[i]);

    double* o = out.data().data() + k * u;
    for (std::size_t i = 0; i < u; ++i) {
      h[i] = (1.0 - zs[i]) * h[i] + zs[i] * hs[i];
      o[i] = h[i];
    }
  }

  const bool needs = inputs.needs_grad() || h0.needs_grad() || gru.w_z.needs_grad() || gru.u_z.needs_grad() ||
                     gru.b_z.needs_grad() || gru.w_r.needs_grad() || gru.u_r.needs_grad() || gru.b_r.needs_grad() ||
                     gru.w_h.needs_grad() || gru.u_h.needs_grad() || gru.b_h.needs_grad();
  const std::size_t ix = inputs.id(), ih0 = h0.id();
  const std::size_t io = inputs.tape().size();
  const GruVars g = gru;

  return inputs.tape().emit(
      std::move(out), needs,
      [=, z = std::move(z), r = std::move(r), hc = std::move(hc), rh = std::move(rh)](
          Tape& t, std::span<const double> gout) {
        const double* X = t.value(ix).data().data();
        const double* H = t.value(io).data().data();
        const double* H0 = t.value(ih0).data().data();
        const double* Wz = t.value(g.w_z.id()).data().data();
        const double* Uz = t.value(g.u_z.id()).data().data();
        const double* Wr = t.value(g.w_r.id()).data().data();
        const double* Ur = t.value(g.u_r.id()).data().data();
        const double* Wh = t.value(g.w_h.id()).data().data();
        const double* Uh = t.value(g.u_h.id()).data().data();

        auto buf = [&](const Var& v) -> double* { return t.needs_grad(v.id()) ? t.grad_buffer(v.id()).data() : nullptr; };
        double* dX = t.needs_grad(ix) ? t.grad_buffer(ix).data() : nullptr;
        double* dWz = buf(g.w_z);
        double* dUz = buf(g.u_z);
        double* dbz = buf(g.b_z);
        double* dWr = buf(g.w_r);
        double* dUr = buf(g.u_r);
        double* dbr = buf(g.b_r);
        double* dWh = buf(g.w_h);
        double* dUh = buf(g.u_h);
        double* dbh = buf(g.b_h);

        std::vector<double> dh(u, 0.0), dh_prev(u), da_z(u), da_r(u), da_h(u), drh(u);
        for (std::size_t s = steps; s-- > 0;) {
          const std::size_t k = reverse ? steps - 1 - s : s;
          const double* hprev;
          if (s == 0) {
            hprev = H0;
          } else {
            const std::size_t kp = reverse ? k + 1 : k - 1;
            hprev = H + kp * u;
          }
          const double* x = X + k * d;
          const double* zs = z.data() + s * u;
          const double* rs = r.data() + s * u;
          const double* hs = hc.data() + s * u;
          const double* rhs = rh.data() + s * u;

          for (std::size_t i = 0; i < u; ++i) dh[i] += gout[k * u + i];

          for (std::size_t i = 0; i < u; ++i) {
            da_h[i] = dh[i] * zs[i] * (1.0 - hs[i] * hs[i]);
            da_z[i] = dh[i] * (hs[i] - hprev[i]) * zs[i] * (1.0 - zs[i]);
            dh_prev[i] = dh[i] * (1.0 - zs[i]);
          }
          std::fill(drh.begin(), drh.end(), 0.0);
          detail::gemv_t_acc(Uh, da_h.data(), drh.data(), u, u);
          for (std::size_t i = 0; i < u; ++i) {
            da_r[i] = drh[i] * hprev[i] * rs[i] * (1.0 - rs[i]);
            dh_prev[i] += drh[i] * rs[i];
          }
          detail::gemv_t_acc(Uz, da_z.data(), dh_prev.data(), u, u);
          detail::gemv_t_acc(Ur, da_r.data(), dh_prev.data(), u, u);

          if (dX) {
            double* dx = dX + k * d;
            detail::gemv_t_acc(Wz, da_z.data(), dx, u, d);
            detail::gemv_t_acc(Wr, da_r.data(), dx, u, d);
            detail::gemv_t_acc(Wh, da_h.data(), dx, u, d);
          }
          if (dWz) detail::ger_acc(dWz, da_z.data(), x, u, d);
          if (dWr) detail::ger_acc(dWr, da_r.data(), x, u, d);
          if (dWh) detail::ger_acc(dWh, da_h.data(), x, u, d);
          if (dUz) detail::ger_acc(dUz, da_z.data(), hprev, u, u);
          if (dUr) detail::ger_acc(dUr, da_r.data(), hprev, u, u);
          if (dUh) detail::ger_acc(dUh, da_h.data(), rhs, u, u);
          for (std::size_t i = 0; i < u; ++i) {
            if (dbz) dbz[i] += da_z[i];
            if (dbr) dbr[i] += da_r[i];
            if (dbh) dbh[i] += da_h[i];
          }
          dh.swap(dh_prev);
        }
        if (t.needs_grad(ih0)) {
          auto& dst = t.grad_buffer(ih0);
          for (std::size_t i = 0; i < u; ++i) dst[i] += dh[i];
        }
      });
}

/// Single GRU step on the tape: x [d], h [u] -> h' [u].
inline Var gru_cell(Var x, Var h, const GruVars& gru) {
  if (x.shape().size() != 1) throw ShapeError("gru_cell: input must be 1-D");
  const std::size_t d = x.value().size();
  Tape& tape = x.tape();
  Var seq = tape.emit(Tensor({1, d}, x.value().storage()), x.needs_grad(),
                      [ix = x.id()](Tape& t, std::span<const double> g) {
                        auto& dst = t.grad_buffer(ix);
                        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                      });
  return row(gru_sequence(seq, h, gru), 0);
}

/// The same step assembled from primitive ops. Slower; exists so the fused
/// kernel has an independent second route to be checked against.
inline Var gru_cell_composed(Var x, Var h, const GruVars& gru) {
  Var z = sigmoid(add(add(matmul(gru.w_z, x), matmul(gru.u_z, h)), gru.b_z));
  Var r = sigmoid(add(add(matmul(gru.w_r, x), matmul(gru.u_r, h)), gru.b_r));
  Var hc = tanh(add(add(matmul(gru.w_h, x), matmul(gru.u_h, mul(r, h))), gru.b_h));
  return add(mul(one_minus(z), h), mul(z, hc));
}

/// Plain-value GRU step using parameters `prefix.*` of `params`.
inline Tensor gru_cell_forward(const Tensor& x, const Tensor& h_prev, const ParameterSet& params,
                               const std::string& prefix) {
  Tape tape;
  GruVars gru = GruVars::bind_const(tape, params, prefix);
  return gru_cell(tape.constant_ref(x), tape.constant_ref(h_prev), gru).value();
}

/// Bidirectional pass over a sequence of K input vectors (rows of `inputs`).
/// Row k of the result is [forward state after 1..k, backward state after K..k].
inline Var bigru_sequence(Var inputs, const GruVars& forward, const GruVars& backward) {
  if (inputs.shape().size() != 2) throw ShapeError("bigru_sequence: inputs must be a [K x d] matrix");
  Tape& tape = inputs.tape();
  Var hf = gru_sequence(inputs, tape.constant(Tensor({forward.hidden_dim()})), forward, false);
  Var hb = gru_sequence(inputs, tape.constant(Tensor({backward.hidden_dim()})), backward, true);
  return hconcat(hf, hb);
}

inline Tensor bigru_sequence(const std::vector<Tensor>& inputs, const ParameterSet& params,
                             const std::string& forward_prefix, const std::string& backward_prefix) {
  if (inputs.empty()) throw Error("bigru_sequence: empty input sequence");
  const std::size_t d = inputs.front().size();
  std::vector<double> stacked;
  for (const Tensor& v : inputs) {
    if (v.rank() != 1 || v.size() != d) throw ShapeError("bigru_sequence: inputs must be equal-length vectors");
    stacked.insert(stacked.end(), v.data().begin(), v.data().end());
  }
  Tape tape;
  Var x = tape.constant(Tensor({inputs.size(), d}, std::move(stacked)));
  return bigru_sequence(x, GruVars::bind_const(tape, params, forward_prefix),
                        GruVars::bind_const(tape, params, backward_prefix))
      .value();
}

}  // namespace iqrl::nn
