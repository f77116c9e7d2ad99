#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "wyner/metrics.hpp"
#include "wyner/prob.hpp"
#include "wyner/rng.hpp"

namespace wyner {

struct BipartiteConfig {
  // One kappa per bipartition (enumerate_bipartitions order), a single
  // shared value, or empty for the 1/|Pi_V| default. Any positive kappa is
  // accepted: the normalized form beta/(1 + sum beta) stays below 1 for
  // finite multipliers, but the shared default itself is 1 when V = 2.
  std::vector<double> kappas;
  std::size_t max_iters = 10000;
  double loss_tol = 1e-6;
  std::size_t restarts = 25;
  std::uint64_t seed = 0;
  // Optional explicit per-restart seeds (overrides restarts/seed derivation);
  // the sweep layer uses this to pin its (grid index, restart index) hashes.
  std::vector<std::uint64_t> restart_seeds;

  std::vector<std::uint64_t> resolve_restart_seeds() const {
    if (!restart_seeds.empty()) return restart_seeds;
    if (restarts < 1) throw std::invalid_argument("solver config: restarts must be >= 1");
    std::vector<std::uint64_t> seeds(restarts);
    for (std::size_t r = 0; r < restarts; ++r) seeds[r] = derive_seed(seed, r);
    return seeds;
  }

  std::vector<double> resolve_kappas(std::size_t num_bipartitions) const {
    std::vector<double> ks;
    if (kappas.empty())
      ks.assign(num_bipartitions, 1.0 / static_cast<double>(num_bipartitions));
    else if (kappas.size() == 1)
      ks.assign(num_bipartitions, kappas[0]);
    else if (kappas.size() == num_bipartitions)
      ks = kappas;
    else
      throw std::invalid_argument("BipartiteConfig: kappas size must be 1 or |Pi_V|");
    for (double k : ks)
      if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("BipartiteConfig: each kappa must be positive and finite");
    return ks;
  }
};

enum class Termination { tolerance, max_iters, stall };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::tolerance: return "tolerance";
    case Termination::max_iters: return "max_iters";
    case Termination::stall: return "stall";
  }
  return "?";
}

struct SolveTrace {
  std::vector<double> losses;  // objective in bits, entry 0 is the initial point
  std::size_t iterations = 0;
  Termination terminated_by = Termination::max_iters;
  std::size_t reseeds = 0;     // cluster-death reseed events
};

// Uniform(0,1) entries, rows normalized.
inline Encoder random_encoder(const SourceSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t nx = spec.joint_size();
  const std::size_t nz = spec.z_cardinality;
  Encoder enc{spec, std::vector<double>(nx * nz)};
  SplitMix64 rng(seed);
  for (std::size_t r = 0; r < nx; ++r) {
    double sum = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      const double v = rng.next_unit();
      enc.rows[r * nz + z] = v;
      sum += v;
    }
    if (sum <= 0.0) {  // astronomically unlikely; keep the row valid anyway
      for (std::size_t z = 0; z < nz; ++z) enc.rows[r * nz + z] = 1.0 / nz;
    } else {
      for (std::size_t z = 0; z < nz; ++z) enc.rows[r * nz + z] /= sum;
    }
  }
  return enc;
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Fixed-point machinery for the DCA update
//   p^{k+1}(z|x^V) ~ p^k(z) exp{ sum_S kappa_S [log p^k(x_S|z)/p(x_S)
//                                             + log p^k(x_{S^c}|z)/p(x_{S^c})] }.
// Per joint realization the marginal-log terms are constant over z, so the
// softmax works on the reduced logits
//   (1 - 2 sum kappa) log p^k(z) + sum_S kappa_S [log T_S(z,x_S) + log T_{S^c}(z,x_{S^c})]
// where T_S(z,x_S) = p^k(z,x_S). A z with p^k(z)=0 keeps only its (dead)
// prior factor, i.e. logit -inf, and receives no mass until reseeded.
class BipartiteKernel {
 public:
  BipartiteKernel(const JointDist& joint, std::vector<double> kappas)
      : joint_(joint),
        bips_(enumerate_bipartitions(joint.spec.num_sources)),
        kappas_(std::move(kappas)),
        nx_(joint.spec.joint_size()),
        nz_(joint.spec.z_cardinality) {
    if (kappas_.size() != bips_.size())
      throw std::invalid_argument("BipartiteKernel: kappa count mismatch");
    kappa_total_ = 0.0;
    for (double k : kappas_) kappa_total_ += k;

    const auto& cards = joint_.spec.cardinalities;
    std::vector<std::size_t> sym(joint_.spec.num_sources);
    side_size_.resize(bips_.size());
    idx_side_.resize(bips_.size());
    log_marg_.resize(bips_.size());
    for (std::size_t b = 0; b < bips_.size(); ++b) {
      const auto groups = {bips_[b].s, bips_[b].s_complement};
      std::size_t side = 0;
      for (const auto& g : groups) {
        std::size_t n = 1;
        for (std::size_t i : g) n *= cards[i];
        side_size_[b][side] = n;
        idx_side_[b][side].resize(nx_);
        log_marg_[b][side].assign(n, 0.0);
        ++side;
      }
      for (std::size_t x = 0; x < nx_; ++x) {
        unflatten_index(cards, x, sym);
        side = 0;
        for (const auto& g : groups) {
          std::size_t k = 0;
          for (std::size_t i : g) k = k * cards[i] + sym[i];
          idx_side_[b][side][x] = k;
          ++side;
        }
      }
      for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t side2 = 0; side2 < 2; ++side2)
          log_marg_[b][side2][idx_side_[b][side2][x]] += joint_.probs[x];
      for (std::size_t side2 = 0; side2 < 2; ++side2)
        for (double& v : log_marg_[b][side2]) v = v > 0.0 ? std::log(v) : kNegInf;
    }
  }

  struct Stats {
    std::vector<double> pz, log_pz;
    // t[b][side]: z-major p(z, x_side), plus elementwise logs
    std::vector<std::array<std::vector<double>, 2>> t, log_t;
  };

  Stats compute_stats(const Encoder& enc) const {
    Stats st;
    st.pz.assign(nz_, 0.0);
    st.t.resize(bips_.size());
    for (std::size_t b = 0; b < bips_.size(); ++b)
      for (std::size_t side = 0; side < 2; ++side)
        st.t[b][side].assign(nz_ * side_size_[b][side], 0.0);

    for (std::size_t x = 0; x < nx_; ++x) {
      const double px = joint_.probs[x];
      if (px <= 0.0) continue;
      const double* row = enc.rows.data() + x * nz_;
      for (std::size_t z = 0; z < nz_; ++z) {
        const double w = px * row[z];
        st.pz[z] += w;
        for (std::size_t b = 0; b < bips_.size(); ++b) {
          st.t[b][0][z * side_size_[b][0] + idx_side_[b][0][x]] += w;
          st.t[b][1][z * side_size_[b][1] + idx_side_[b][1][x]] += w;
        }
      }
    }
    st.log_pz.resize(nz_);
    for (std::size_t z = 0; z < nz_; ++z)
      st.log_pz[z] = st.pz[z] > 0.0 ? std::log(st.pz[z]) : kNegInf;
    st.log_t.resize(bips_.size());
    for (std::size_t b = 0; b < bips_.size(); ++b)
      for (std::size_t side = 0; side < 2; ++side) {
        st.log_t[b][side].resize(st.t[b][side].size());
        for (std::size_t i = 0; i < st.t[b][side].size(); ++i)
          st.log_t[b][side][i] =
              st.t[b][side][i] > 0.0 ? std::log(st.t[b][side][i]) : kNegInf;
      }
    return st;
  }

  // Reduced logits for one joint realization; any per-row constant is
  // immaterial (softmax) and omitted.
  void row_logits(const Stats& st, std::size_t x, double* out) const {
    const double prior_coeff = 1.0 - 2.0 * kappa_total_;
    for (std::size_t z = 0; z < nz_; ++z) {
      if (!(st.pz[z] > 0.0)) {
        out[z] = kNegInf;
        continue;
      }
      double l = prior_coeff * st.log_pz[z];
      for (std::size_t b = 0; b < bips_.size(); ++b)
        l += kappas_[b] * (st.log_t[b][0][z * side_size_[b][0] + idx_side_[b][0][x]] +
                           st.log_t[b][1][z * side_size_[b][1] + idx_side_[b][1][x]]);
      out[z] = l;
    }
  }

  // Softmax with max subtraction; writes the row and its exact log
  // (logits - logsumexp). Rows with no finite logit fall back to uniform.
  void softmax_row(const double* logits, double* row, double* row_log) const {
    double m = kNegInf;
    for (std::size_t z = 0; z < nz_; ++z) m = std::max(m, logits[z]);
    if (!(m > kNegInf)) {
      const double u = 1.0 / static_cast<double>(nz_);
      for (std::size_t z = 0; z < nz_; ++z) {
        row[z] = u;
        row_log[z] = std::log(u);
      }
      return;
    }
    double sum = 0.0;
    for (std::size_t z = 0; z < nz_; ++z) {
      row[z] = logits[z] > kNegInf ? std::exp(logits[z] - m) : 0.0;
      sum += row[z];
    }
    const double lse = m + std::log(sum);
    for (std::size_t z = 0; z < nz_; ++z) {
      row[z] /= sum;
      row_log[z] = logits[z] > kNegInf ? logits[z] - lse : kNegInf;
    }
  }

  Encoder step(const Encoder& enc, std::vector<double>* row_logs = nullptr) const {
    const Stats st = compute_stats(enc);
    return step_from_stats(st, row_logs);
  }

  Encoder step_from_stats(const Stats& st, std::vector<double>* row_logs = nullptr) const {
    Encoder next{joint_.spec, std::vector<double>(nx_ * nz_)};
    if (row_logs) row_logs->assign(nx_ * nz_, 0.0);
    std::vector<double> logits(nz_), rl(nz_);
    for (std::size_t x = 0; x < nx_; ++x) {
      row_logits(st, x, logits.data());
      softmax_row(logits.data(), next.rows.data() + x * nz_,
                  row_logs ? row_logs->data() + x * nz_ : rl.data());
    }
    return next;
  }

  // Objective in nats: I(X^V;Z) - sum_S kappa_S [I(X_S;Z) + I(X_{S^c};Z)],
  // additive constants of the Lagrangian dropped.
  double objective_nats(const Stats& st, double h_z_given_x_nats) const {
    double hz = 0.0;
    for (std::size_t z = 0; z < nz_; ++z)
      if (st.pz[z] > 0.0) hz -= st.pz[z] * st.log_pz[z];
    double val = hz - h_z_given_x_nats;
    for (std::size_t b = 0; b < bips_.size(); ++b) {
      double mi2 = 0.0;
      for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t n = side_size_[b][side];
        for (std::size_t z = 0; z < nz_; ++z)
          for (std::size_t k = 0; k < n; ++k) {
            const double t = st.t[b][side][z * n + k];
            if (t > 0.0)
              mi2 += t * (st.log_t[b][side][z * n + k] - st.log_pz[z] - log_marg_[b][side][k]);
          }
      }
      val -= kappas_[b] * mi2;
    }
    return val;
  }

  // H(Z|X^V) in nats from an encoder and the exact logs of its rows.
  double h_z_given_x_nats(const Encoder& enc, const std::vector<double>& row_logs) const {
    double h = 0.0;
    for (std::size_t x = 0; x < nx_; ++x) {
      const double px = joint_.probs[x];
      if (px <= 0.0) continue;
      double inner = 0.0;
      for (std::size_t z = 0; z < nz_; ++z) {
        const double p = enc.rows[x * nz_ + z];
        if (p > 0.0) inner += p * row_logs[x * nz_ + z];
      }
      h -= px * inner;
    }
    return h;
  }

  double h_z_given_x_nats(const Encoder& enc) const {
    double h = 0.0;
    for (std::size_t x = 0; x < nx_; ++x) {
      const double px = joint_.probs[x];
      if (px <= 0.0) continue;
      double inner = 0.0;
      for (std::size_t z = 0; z < nz_; ++z) {
        const double p = enc.rows[x * nz_ + z];
        if (p > 0.0) inner += p * std::log(p);
      }
      h -= px * inner;
    }
    return h;
  }

  std::size_t num_bipartitions() const { return bips_.size(); }
  std::size_t nz() const { return nz_; }

 private:
  const JointDist& joint_;
  std::vector<Bipartition> bips_;
  std::vector<double> kappas_;
  std::size_t nx_, nz_;
  double kappa_total_ = 0.0;
  std::vector<std::array<std::size_t, 2>> side_size_;
  std::vector<std::array<std::vector<std::size_t>, 2>> idx_side_;   // x -> side index
  std::vector<std::array<std::vector<double>, 2>> log_marg_;        // log p(x_side)
};

}  // namespace detail

// One DCA fixed-point step (Bayes-converted marginal statistics from the
// previous encoder, exponential-family tilt, per-row normalization).
inline Encoder dca_step(const JointDist& joint, const Encoder& enc, const BipartiteConfig& cfg) {
  if (!(joint.spec == enc.spec)) throw std::invalid_argument("dca_step: spec mismatch");
  detail::BipartiteKernel kernel(
      joint, cfg.resolve_kappas(enumerate_bipartitions(joint.spec.num_sources).size()));
  return kernel.step(enc);
}

// DC objective value in bits.
inline double objective(const JointDist& joint, const Encoder& enc, const BipartiteConfig& cfg) {
  if (!(joint.spec == enc.spec)) throw std::invalid_argument("objective: spec mismatch");
  detail::BipartiteKernel kernel(
      joint, cfg.resolve_kappas(enumerate_bipartitions(joint.spec.num_sources).size()));
  const auto st = kernel.compute_stats(enc);
  return kernel.objective_nats(st, kernel.h_z_given_x_nats(enc)) / std::numbers::ln2;
}

struct RestartResult {
  std::uint64_t seed = 0;
  Encoder encoder;
  SolveTrace trace;
  double final_loss = 0.0;  // bits
  double wall_ms = 0.0;
};

struct BipartiteResult {
  std::vector<RestartResult> restarts;
  std::size_t best_index = 0;

  const RestartResult& best() const { return restarts[best_index]; }
};

namespace detail {

inline bool better_restart(const RestartResult& a, const RestartResult& b) {
  if (a.final_loss != b.final_loss) return a.final_loss < b.final_loss;
  if (a.trace.iterations != b.trace.iterations) return a.trace.iterations < b.trace.iterations;
  return a.seed < b.seed;
}

}  // namespace detail

inline BipartiteResult bipartite_solve(const JointDist& joint, const BipartiteConfig& cfg) {
  joint.validate();
  const auto bips = enumerate_bipartitions(joint.spec.num_sources);
  detail::BipartiteKernel kernel(joint, cfg.resolve_kappas(bips.size()));
  const std::size_t nz = joint.spec.z_cardinality;
  constexpr double ln2 = std::numbers::ln2;
  const std::vector<std::uint64_t> seeds = cfg.resolve_restart_seeds();

  BipartiteResult result;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const std::uint64_t seed = seeds[r];
    const auto t0 = std::chrono::steady_clock::now();

    Encoder enc = random_encoder(joint.spec, seed);
    auto stats = kernel.compute_stats(enc);
    double loss = kernel.objective_nats(stats, kernel.h_z_given_x_nats(enc)) / ln2;

    SolveTrace trace;
    trace.losses.push_back(loss);
    std::vector<std::size_t> dead(nz, 0);
    std::vector<double> row_logs;

    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
      Encoder next = kernel.step_from_stats(stats, &row_logs);
      auto next_stats = kernel.compute_stats(next);

      bool reseeded = false;
      for (std::size_t z = 0; z < nz; ++z) {
        if (!(next_stats.pz[z] > 0.0)) {
          if (++dead[z] >= 10) {
            for (std::size_t x = 0; x < next.rows.size() / nz; ++x)
              next.rows[x * nz + z] += 1e-6;
            reseeded = true;
            dead[z] = 0;
          }
        } else {
          dead[z] = 0;
        }
      }
      if (reseeded) {
        ++trace.reseeds;
        for (std::size_t x = 0; x < next.rows.size() / nz; ++x) {
          double s = 0.0;
          for (std::size_t z = 0; z < nz; ++z) s += next.rows[x * nz + z];
          for (std::size_t z = 0; z < nz; ++z) next.rows[x * nz + z] /= s;
        }
        next_stats = kernel.compute_stats(next);
      }

      const double h_zx = reseeded ? kernel.h_z_given_x_nats(next)
                                   : kernel.h_z_given_x_nats(next, row_logs);
      const double next_loss = kernel.objective_nats(next_stats, h_zx) / ln2;
      trace.losses.push_back(next_loss);
      trace.iterations = k;
      enc = std::move(next);
      stats = std::move(next_stats);
      if (std::abs(loss - next_loss) < cfg.loss_tol) {
        trace.terminated_by = Termination::tolerance;
        loss = next_loss;
        break;
      }
      loss = next_loss;
    }

    const auto t1 = std::chrono::steady_clock::now();
    RestartResult rr;
    rr.seed = seed;
    rr.encoder = std::move(enc);
    rr.final_loss = trace.losses.back();
    rr.trace = std::move(trace);
    rr.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.restarts.push_back(std::move(rr));
    if (detail::better_restart(result.restarts.back(), result.restarts[result.best_index]))
      result.best_index = result.restarts.size() - 1;
  }
  return result;
}

}  // namespace wyner
