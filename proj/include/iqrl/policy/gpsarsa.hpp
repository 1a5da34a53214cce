#pragma once

// GP-SARSA: Q(b, a) modelled by a Gaussian process with kernel
// <b1, b2> * [a1 == a2], learned online with Engel's sparse temporal-
// difference recursions. The dictionary holds representative points; a
// point is admitted when its squared residual after projection onto the
// span of the dictionary exceeds nu.

#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <vector>

#include "iqrl/binary_io.hpp"
#include "iqrl/error.hpp"
#include "iqrl/random.hpp"

namespace iqrl::policy {

struct GpConfig {
  double noise_std = 5.0;
  double nu = 0.001;
  double gamma = 1.0;
  std::size_t cap = 1000;

  bool operator==(const GpConfig&) const = default;
};

struct GpPoint {
  std::vector<double> belief;
  std::size_t action = 0;

  bool operator==(const GpPoint&) const = default;
};

inline double kernel(const GpPoint& x1, const GpPoint& x2) {
  if (x1.belief.size() != x2.belief.size()) {
    throw Error("kernel: summary lengths " + std::to_string(x1.belief.size()) + " and " +
                std::to_string(x2.belief.size()) + " differ");
  }
  if (x1.action != x2.action) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < x1.belief.size(); ++i) dot += x1.belief[i] * x2.belief[i];
  return dot;
}

struct QPosterior {
  double mean = 0.0;
  double variance = 0.0;         // predictive: latent + noise
  double latent_variance = 0.0;  // uncertainty in Q itself
};

/// Square matrix stored row-major, grown one row and column at a time.
class GrowMatrix {
 public:
  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  const double* row(std::size_t i) const { return v_.data() + i * n_; }
  double* row(std::size_t i) { return v_.data() + i * n_; }
  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

  void grow() {
    std::vector<double> next((n_ + 1) * (n_ + 1), 0.0);
    for (std::size_t i = 0; i < n_; ++i) std::memcpy(next.data() + i * (n_ + 1), v_.data() + i * n_, n_ * sizeof(double));
    v_ = std::move(next);
    ++n_;
  }
  void resize(std::size_t n) {
    n_ = n;
    v_.assign(n * n, 0.0);
  }

  bool operator==(const GrowMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> v_;
};

class GpSarsa {
 public:
  GpSarsa(std::size_t feature_dim, std::size_t action_count, GpConfig cfg = {})
      : cfg_(cfg), dim_(feature_dim), actions_(action_count), by_action_(action_count) {
    if (action_count == 0) throw Error("GpSarsa: empty action space");
    if (!(cfg.noise_std > 0.0)) throw Error("GpSarsa: noise_std must be positive");
    if (cfg.nu < 0.0) throw Error("GpSarsa: nu must be non-negative");
    if (cfg.cap == 0) throw Error("GpSarsa: cap must be positive");
  }

  const GpConfig& config() const { return cfg_; }
  std::size_t feature_dim() const { return dim_; }
  std::size_t action_count() const { return actions_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<GpPoint>& points() const { return points_; }
  const std::vector<double>& alpha() const { return alpha_; }
  const GrowMatrix& covariance() const { return C_; }
  bool in_episode() const { return current_.has_value(); }
  /// Number of posterior variances that came out negative and were clamped.
  std::size_t negative_variance_count() const { return negative_variances_; }

  QPosterior q_posterior(const GpPoint& x) const {
    check(x);
    const double kxx = kernel(x, x);
    const double noise = cfg_.noise_std * cfg_.noise_std;
    const auto& idx = by_action_[x.action];
    std::vector<double> kv(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) kv[j] = kernel(points_[idx[j]], x);
    double mean = 0.0, quad = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      mean += kv[j] * alpha_[idx[j]];
      const double* crow = C_.row(idx[j]);
      double acc = 0.0;
      for (std::size_t l = 0; l < idx.size(); ++l) acc += crow[idx[l]] * kv[l];
      quad += kv[j] * acc;
    }
    double latent = kxx - quad;
    if (latent < 0.0) {
      if (latent < -1e-9 * std::max(1.0, kxx)) ++negative_variances_;
      latent = 0.0;
    }
    return {mean, latent + noise, latent};
  }

  void start_episode(const GpPoint& x0) {
    check(x0);
    if (current_) throw Error("GpSarsa: start_episode called before the previous episode ended");
    if (points_.empty()) {
      const double k00 = kernel(x0, x0);
      if (!(k00 > cfg_.nu)) throw Error("GpSarsa: degenerate first point, k(x,x) = " + std::to_string(k00));
      admit(x0, {}, k00);
      a_ = {1.0};
    } else {
      const std::vector<double> kt = kvec(x0);
      std::vector<double> a = kinv_times(kt);
      const double delta = kernel(x0, x0) - dot(kt, a);
      if (delta > cfg_.nu && points_.size() < cfg_.cap) {
        admit(x0, a, delta);
        a.assign(points_.size(), 0.0);
        a.back() = 1.0;
      }
      a_ = std::move(a);
    }
    c_.assign(points_.size(), 0.0);
    d_ = 0.0;
    inv_s_ = 0.0;
    current_ = x0;
  }

  /// Reward for the current point, followed by `next` or episode end.
  void observe_step(double r, const std::optional<GpPoint>& next) {
    if (!current_) throw Error("GpSarsa: observe_step outside an episode");
    if (next) check(*next);
    const double g = cfg_.gamma, s2 = cfg_.noise_std * cfg_.noise_std;
    const std::size_t n = points_.size();
    const std::vector<double> kx = kvec(*current_);
    std::vector<double> kn(n, 0.0), an(n, 0.0);
    double knn = 0.0, delta = 0.0;
    if (next) {
      kn = kvec(*next);
      an = kinv_times(kn);
      knn = kernel(*next, *next);
      delta = knn - dot(kn, an);
    }
    const double nt = next ? 1.0 : 0.0;
    std::vector<double> dk(n);
    for (std::size_t i = 0; i < n; ++i) dk[i] = kx[i] - g * kn[i];
    const double carry = g * s2 * inv_s_;
    d_ = carry * d_ + r - dot(dk, alpha_);

    const std::vector<double> cdk = c_times(dk);
    std::vector<double> cn;
    double s = 0.0;
    if (next && delta > cfg_.nu && n < cfg_.cap) {
      const double dktt = [&] {
        double acc = g * g * knn;
        for (std::size_t i = 0; i < n; ++i) acc += a_[i] * (kx[i] - 2.0 * g * kn[i]);
        return acc;
      }();
      cn.assign(n + 1, 0.0);
      for (std::size_t i = 0; i < n; ++i) cn[i] = carry * c_[i] + a_[i] - cdk[i];
      cn[n] = -g;
      s = (1.0 + g * g) * s2 + dktt - dot(dk, cdk) + 2.0 * carry * dot(c_, dk) - g * g * s2 * s2 * inv_s_;
      admit(*next, an, delta);
      an.assign(n + 1, 0.0);
      an[n] = 1.0;
    } else {
      cn.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) cn[i] = carry * c_[i] + a_[i] - g * an[i] - cdk[i];
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += dk[i] * (cn[i] + carry * c_[i]);
      s = s2 * (1.0 + g * g * nt) + acc - g * g * s2 * s2 * inv_s_;
    }
    const std::size_t m = points_.size();
    const double step = d_ / s;
    for (std::size_t i = 0; i < m; ++i) alpha_[i] += cn[i] * step;
    for (std::size_t i = 0; i < m; ++i) {
      if (cn[i] == 0.0) continue;
      const double ci = cn[i] / s;
      double* row = C_.row(i);
      for (std::size_t j = 0; j < m; ++j) row[j] += ci * cn[j];
    }
    c_ = std::move(cn);
    inv_s_ = 1.0 / s;
    a_ = std::move(an);
    if (next) {
      current_ = *next;
    } else {
      current_.reset();
    }
  }

  /// Abandons an unfinished episode without a final update.
  void abort_episode() { current_.reset(); }

  bool operator==(const GpSarsa& o) const {
    return cfg_ == o.cfg_ && dim_ == o.dim_ && actions_ == o.actions_ && points_ == o.points_ && alpha_ == o.alpha_ &&
           C_ == o.C_ && Kinv_ == o.Kinv_;
  }

  void write(std::ostream& out) const;
  static GpSarsa read(std::istream& in, const std::string& what);

 private:
  void check(const GpPoint& x) const {
    if (x.belief.size() != dim_) {
      throw Error("GpSarsa: summary has " + std::to_string(x.belief.size()) + " entries, expected " + std::to_string(dim_));
    }
    if (x.action >= actions_) throw Error("GpSarsa: action " + std::to_string(x.action) + " out of range");
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }

  /// Kernel vector against the dictionary; zero outside x's action.
  std::vector<double> kvec(const GpPoint& x) const {
    std::vector<double> k(points_.size(), 0.0);
    for (std::size_t i : by_action_[x.action]) k[i] = kernel(points_[i], x);
    return k;
  }

  std::vector<double> sparse_times(const GrowMatrix& M, const std::vector<double>& v) const {
    const std::size_t n = points_.size();
    std::vector<std::size_t> nz;
    for (std::size_t j = 0; j < n; ++j)
      if (v[j] != 0.0) nz.push_back(j);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = M.row(i);
      double acc = 0.0;
      for (std::size_t j : nz) acc += row[j] * v[j];
      out[i] = acc;
    }
    return out;
  }
  std::vector<double> kinv_times(const std::vector<double>& v) const { return sparse_times(Kinv_, v); }
  std::vector<double> c_times(const std::vector<double>& v) const { return sparse_times(C_, v); }

  /// Appends x; `a` is its projection coefficients, `delta` its residual.
  void admit(const GpPoint& x, const std::vector<double>& a, double delta) {
    const std::size_t m = points_.size();
    Kinv_.grow();
    for (std::size_t i = 0; i < m; ++i) {
      double* row = Kinv_.row(i);
      for (std::size_t j = 0; j < m; ++j) row[j] = (delta * row[j] + a[i] * a[j]) / delta;
      row[m] = -a[i] / delta;
    }
    for (std::size_t j = 0; j < m; ++j) Kinv_(m, j) = -a[j] / delta;
    Kinv_(m, m) = 1.0 / delta;
    C_.grow();
    alpha_.push_back(0.0);
    by_action_[x.action].push_back(m);
    points_.push_back(x);
  }

  GpConfig cfg_;
  std::size_t dim_, actions_;
  std::vector<GpPoint> points_;
  std::vector<std::vector<std::size_t>> by_action_;
  std::vector<double> alpha_;
  GrowMatrix C_, Kinv_;
  mutable std::size_t negative_variances_ = 0;

  // Episode state.
  std::optional<GpPoint> current_;
  std::vector<double> a_, c_;
  double d_ = 0.0, inv_s_ = 0.0;
};

enum class SelectMode { sample, greedy };

/// Greedy: best posterior mean. Sample: best draw from N(mean, latent
/// variance) per executable action. Ties go to the lowest index.
inline std::size_t select_action(const GpSarsa& gp, const std::vector<double>& summary, SelectMode mode,
                                 const std::vector<bool>& executable, Rng& rng) {
  if (executable.size() != gp.action_count()) throw Error("select_action: mask length does not match the action space");
  std::optional<std::size_t> best;
  double best_value = 0.0;
  for (std::size_t a = 0; a < executable.size(); ++a) {
    if (!executable[a]) continue;
    const QPosterior q = gp.q_posterior(GpPoint{summary, a});
    const double value = mode == SelectMode::greedy ? q.mean : q.mean + std::sqrt(q.latent_variance) * standard_normal(rng);
    if (!best || value > best_value) {
      best = a;
      best_value = value;
    }
  }
  if (!best) throw Error("select_action: no executable action");
  return *best;
}

// Policy file, little-endian:
//   bytes 0..7  magic "IQRLGPSP"
//   u32         version (1)
//   f64 x 3     noise_std, nu, gamma
//   u64 x 4     cap, feature dim, action count, dictionary size n
//   n x (u64 action, f64 x dim belief)
//   f64 x n     alpha
//   f64 x n*n   C, row-major
//   f64 x n*n   K^-1, row-major
inline constexpr char kPolicyMagic[9] = "IQRLGPSP";
inline constexpr std::uint32_t kPolicyVersion = 1;

inline void GpSarsa::write(std::ostream& out) const {
  io::Writer w(out);
  io::write_magic(w, kPolicyMagic, kPolicyVersion);
  w.f64(cfg_.noise_std);
  w.f64(cfg_.nu);
  w.f64(cfg_.gamma);
  w.u64(cfg_.cap);
  w.u64(dim_);
  w.u64(actions_);
  w.u64(points_.size());
  for (const auto& p : points_) {
    w.u64(p.action);
    w.f64s(p.belief);
  }
  w.f64s(alpha_);
  w.f64s(C_.raw());
  w.f64s(Kinv_.raw());
}

inline GpSarsa GpSarsa::read(std::istream& in, const std::string& what) {
  io::Reader r(in, what);
  io::read_magic(r, kPolicyMagic, kPolicyVersion);
  GpConfig cfg;
  cfg.noise_std = r.f64();
  cfg.nu = r.f64();
  cfg.gamma = r.f64();
  cfg.cap = r.u64();
  const std::uint64_t dim = r.u64(), actions = r.u64(), n = r.u64();
  if (dim > (1u << 20) || actions > (1u << 20) || n > (1u << 16)) throw CorruptFileError(what + ": implausible sizes");
  GpSarsa gp = [&] {
    try {
      return GpSarsa(dim, actions, cfg);
    } catch (const Error& e) {
      throw CorruptFileError(what + ": " + e.what());
    }
  }();
  for (std::uint64_t i = 0; i < n; ++i) {
    GpPoint p;
    p.action = r.u64();
    if (p.action >= actions) throw CorruptFileError(what + ": dictionary action out of range");
    p.belief = r.f64s(dim);
    gp.by_action_[p.action].push_back(i);
    gp.points_.push_back(std::move(p));
  }
  gp.alpha_ = r.f64s(n);
  gp.C_.resize(n);
  gp.C_.raw() = r.f64s(n * n);
  gp.Kinv_.resize(n);
  gp.Kinv_.raw() = r.f64s(n * n);
  r.expect_end();
  return gp;
}

inline void save_policy(const std::string& path, const GpSarsa& gp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  gp.write(out);
  if (!out) throw Error("write failed: " + path);
}

inline GpSarsa load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return GpSarsa::read(in, path);
}

}  // namespace iqrl::policy
