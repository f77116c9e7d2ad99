#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "wyner/bipartite.hpp"  // SolveTrace, Termination, RestartResult plumbing
#include "wyner/metrics.hpp"
#include "wyner/prob.hpp"
#include "wyner/rng.hpp"

namespace wyner {

// Variables of the variational formulation: a prior over Z (held uniform by
// the solver) and one column-stochastic table P(X_i|Z) per source. Column z
// of table i is stored contiguously: source_conds[i][z*|X_i| + x].
struct VIParams {
  std::vector<double> z_prior;
  std::vector<std::size_t> x_cardinalities;
  std::vector<std::vector<double>> source_conds;

  std::size_t num_sources() const { return source_conds.size(); }
  std::size_t z_cardinality() const { return z_prior.size(); }

  double cond(std::size_t i, std::size_t x, std::size_t z) const {
    return source_conds[i][z * x_cardinalities[i] + x];
  }
  double& cond(std::size_t i, std::size_t x, std::size_t z) {
    return source_conds[i][z * x_cardinalities[i] + x];
  }

  // Free parameters: |Z| * sum_i |X_i| (linear in V).
  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t c : x_cardinalities) n += c;
    return n * z_cardinality();
  }

  void validate() const {
    if (z_prior.empty()) throw std::invalid_argument("VIParams: empty z_prior");
    if (source_conds.size() != x_cardinalities.size() || source_conds.size() < 2)
      throw std::invalid_argument("VIParams: need one table per source, V >= 2");
    double s = 0.0;
    for (double p : z_prior) {
      if (p < 0.0) throw std::invalid_argument("VIParams: negative prior entry");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("VIParams: z_prior not a simplex");
    for (std::size_t i = 0; i < source_conds.size(); ++i) {
      const std::size_t nx = x_cardinalities[i];
      if (source_conds[i].size() != nx * z_prior.size())
        throw std::invalid_argument("VIParams: table size mismatch");
      for (std::size_t z = 0; z < z_prior.size(); ++z) {
        double cs = 0.0;
        for (std::size_t x = 0; x < nx; ++x) {
          const double p = source_conds[i][z * nx + x];
          if (p < 0.0) throw std::invalid_argument("VIParams: negative table entry");
          cs += p;
        }
        if (std::abs(cs - 1.0) > 1e-12)
          throw std::invalid_argument("VIParams: column is not a simplex");
      }
    }
  }

  SourceSpec source_spec() const {
    return SourceSpec{source_conds.size(), x_cardinalities, z_prior.size()};
  }
};

struct VIConfig {
  double beta = 1.0;  // multiplier on the KL matching penalty
  std::size_t max_iters = 10000;
  double loss_tol = 1e-6;
  std::size_t restarts = 25;
  std::uint64_t seed = 0;
  std::size_t patience = 50;   // stalled iterations before re-initialization
  double stall_eps = 1e-8;
  std::vector<std::uint64_t> restart_seeds;  // optional, as in BipartiteConfig

  std::vector<std::uint64_t> resolve_restart_seeds() const {
    if (!restart_seeds.empty()) return restart_seeds;
    std::vector<std::uint64_t> seeds(restarts);
    for (std::size_t r = 0; r < restarts; ++r) seeds[r] = derive_seed(seed, r);
    return seeds;
  }

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("VIConfig: beta must be > 0");
    if (restarts < 1 && restart_seeds.empty())
      throw std::invalid_argument("VIConfig: restarts must be >= 1");
  }
};

// Mixture-of-products joint P_theta(X^V) = sum_z P(z) prod_i P(x_i|z).
inline JointDist model_joint(const VIParams& params) {
  params.validate();
  JointDist out;
  out.spec = params.source_spec();
  const std::size_t nv = params.num_sources();
  const std::size_t nz = params.z_cardinality();
  out.probs.assign(out.spec.joint_size(), 0.0);
  std::vector<std::size_t> sym(nv);
  for (std::size_t idx = 0; idx < out.probs.size(); ++idx) {
    unflatten_index(out.spec.cardinalities, idx, sym);
    double total = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      double prod = params.z_prior[z];
      for (std::size_t i = 0; i < nv && prod > 0.0; ++i) prod *= params.cond(i, sym[i], z);
      total += prod;
    }
    out.probs[idx] = total;
  }
  const double s = detail::stable_sum(out.probs);
  if (s > 0.0)
    for (double& p : out.probs) p /= s;
  return out;
}

// Surrogate loss in bits:
//   -sum_i H_theta(X_i|Z) - E_theta[log P(X^V)] + beta * KL[P_theta || P].
// Model mass on a zero of P makes the bound vacuous; that is reported as
// +inf, not an error.
inline double surrogate_loss(const VIParams& params, const JointDist& joint,
                             const VIConfig& cfg) {
  const JointDist model = model_joint(params);
  if (model.spec.cardinalities != joint.spec.cardinalities)
    throw std::invalid_argument("surrogate_loss: alphabet mismatch");

  double neg_cond_entropy = 0.0;  // -sum_i H(X_i|Z), bits
  for (std::size_t i = 0; i < params.num_sources(); ++i) {
    const std::size_t nx = params.x_cardinalities[i];
    for (std::size_t z = 0; z < params.z_cardinality(); ++z) {
      const double pz = params.z_prior[z];
      if (pz <= 0.0) continue;
      for (std::size_t x = 0; x < nx; ++x) {
        const double p = params.cond(i, x, z);
        if (p > 0.0) neg_cond_entropy += pz * p * std::log2(p);
      }
    }
  }

  double cross = 0.0;  // -E_theta[log2 P(X^V)]
  for (std::size_t idx = 0; idx < model.probs.size(); ++idx) {
    const double q = model.probs[idx];
    if (q <= 0.0) continue;
    if (joint.probs[idx] <= 0.0) return std::numeric_limits<double>::infinity();
    cross -= q * std::log2(joint.probs[idx]);
  }

  const double kl = kl_divergence(model.probs, joint.probs);
  return neg_cond_entropy + cross + cfg.beta * kl;
}

namespace detail {

// Support floor: zeros of the data joint enter the update and the solve
// trace as kLogFloor (log 1e-50) rather than -inf. A raw -inf would zero
// out every candidate symbol on the first pass against a full-support
// random initialization (each one has infinite KL against the true
// conditional), leaving the column undefined; the floor completes that
// case smoothly. log 1e-50 sits between the extremes measured on the
// synthetic family: a much harder floor hard-assigns the first pass into
// whatever block leads the initialization noise, a much softer one washes
// every run into the same symmetric attractor. Support-aligned stationary
// points move by far less than 1e-9, so the exact-factorization fixed
// point is preserved.
constexpr double kLogFloor = -115.12925464970229;

inline double floored_log(double x) { return x > 0.0 ? std::max(std::log(x), kLogFloor) : kLogFloor; }

class VIKernel {
 public:
  VIKernel(const JointDist& joint, const VIConfig& cfg) : joint_(joint), cfg_(cfg) {
    log_p_.resize(joint_.probs.size());
    for (std::size_t i = 0; i < joint_.probs.size(); ++i)
      log_p_[i] = floored_log(joint_.probs[i]);
  }

  // Closed-form update for source i with the other tables fixed. After
  // cancelling per-column constants, the stationarity condition reduces to
  //   p(x_i|z) ~ exp{ sum_{x^w} q(x^w|z) [ (1+beta) log p(x) - beta log p_theta(x) ] }
  // with q(x^w|z) the product over the other sources and x assembled from
  // (x_i, x^w). The model-joint term is implicit (it contains p(x_i|z)
  // itself), and applying the raw map once can overshoot badly enough to
  // limit-cycle. Minimizing instead the touching upper bound
  //   Phi(l) + beta * sum_z p(z) KL(l(.|z) || l_old(.|z))
  // gives the prox-damped closed form used here,
  //   l_new ~ raw^{1/(1+beta)} * l_old^{beta/(1+beta)}  (per column),
  // which shares the raw map's fixed points and never increases the
  // sub-problem objective.
  void update_source(VIParams& params, std::size_t i) const {
    const std::size_t nv = params.num_sources();
    const std::size_t nz = params.z_cardinality();
    const auto& cards = joint_.spec.cardinalities;
    const std::size_t nxi = cards[i];

    const JointDist model = model_joint(params);
    std::vector<double> weight(model.probs.size());
    for (std::size_t idx = 0; idx < weight.size(); ++idx)
      weight[idx] = (1.0 + cfg_.beta) * log_p_[idx] -
                    cfg_.beta * floored_log(model.probs[idx]);

    // stride of source i in the flat joint index
    std::size_t stride = 1;
    for (std::size_t j = i + 1; j < nv; ++j) stride *= cards[j];

    // enumerate x^w (all sources but i) with a base index at x_i = 0
    std::size_t nw = 1;
    for (std::size_t j = 0; j < nv; ++j)
      if (j != i) nw *= cards[j];
    std::vector<std::size_t> wsym(nv, 0);
    std::vector<std::size_t> base(nw);
    std::vector<double> q(nw);

    std::vector<double> logits(nz * nxi, 0.0);
    for (std::size_t z = 0; z < nz; ++z) {
      // walk x^w via an odometer over the other sources
      std::fill(wsym.begin(), wsym.end(), 0);
      for (std::size_t w = 0; w < nw; ++w) {
        double prod = 1.0;
        for (std::size_t j = 0; j < nv; ++j)
          if (j != i) prod *= params.cond(j, wsym[j], z);
        q[w] = prod;
        if (z == 0) base[w] = flat_index(cards, wsym);
        for (std::size_t j = nv; j-- > 0;) {
          if (j == i) continue;
          if (++wsym[j] < cards[j]) break;
          wsym[j] = 0;
        }
      }
      double* lrow = logits.data() + z * nxi;
      for (std::size_t w = 0; w < nw; ++w) {
        if (q[w] <= 0.0) continue;
        const std::size_t b0 = base[w];
        for (std::size_t x = 0; x < nxi; ++x) lrow[x] += q[w] * weight[b0 + x * stride];
      }
      // prox damping toward the previous column, then softmax
      const double damp = cfg_.beta / (1.0 + cfg_.beta);
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t x = 0; x < nxi; ++x) {
        const double old = params.cond(i, x, z);
        lrow[x] = (1.0 - damp) * lrow[x] +
                  (old > 0.0 ? damp * std::log(old)
                             : -std::numeric_limits<double>::infinity());
        m = std::max(m, lrow[x]);
      }
      double sum = 0.0;
      for (std::size_t x = 0; x < nxi; ++x) {
        const double e =
            lrow[x] > -std::numeric_limits<double>::infinity() ? std::exp(lrow[x] - m) : 0.0;
        params.cond(i, x, z) = e;
        sum += e;
      }
      for (std::size_t x = 0; x < nxi; ++x) params.cond(i, x, z) /= sum;
    }
  }

  // Floored counterpart of surrogate_loss, in bits; finite for any params.
  double internal_loss(const VIParams& params) const {
    constexpr double ln2 = std::numbers::ln2;
    const JointDist model = model_joint(params);
    double acc = 0.0;  // nats
    for (std::size_t i = 0; i < params.num_sources(); ++i) {
      const std::size_t nx = params.x_cardinalities[i];
      for (std::size_t z = 0; z < params.z_cardinality(); ++z) {
        const double pz = params.z_prior[z];
        if (pz <= 0.0) continue;
        for (std::size_t x = 0; x < nx; ++x) {
          const double p = params.cond(i, x, z);
          if (p > 0.0) acc += pz * p * std::log(p);
        }
      }
    }
    for (std::size_t idx = 0; idx < model.probs.size(); ++idx) {
      const double q = model.probs[idx];
      if (q <= 0.0) continue;
      const double lp = log_p_[idx];
      acc -= q * lp;
      acc += cfg_.beta * q * (std::max(std::log(q), kLogFloor) - lp);
    }
    return acc / ln2;
  }

 private:
  const JointDist& joint_;
  const VIConfig& cfg_;
  std::vector<double> log_p_;
};

}  // namespace detail

// Public single-source update (the closed-form step with the true marginal as the
// leading factor; see VIKernel::update_source for the reduced form).
inline std::vector<double> update_source(const VIParams& params, const JointDist& joint,
                                         std::size_t i, const VIConfig& cfg) {
  params.validate();
  cfg.validate();
  if (i >= params.num_sources()) throw std::invalid_argument("update_source: bad source index");
  if (params.x_cardinalities != joint.spec.cardinalities)
    throw std::invalid_argument("update_source: alphabet mismatch");
  detail::VIKernel kernel(joint, cfg);
  VIParams work = params;
  kernel.update_source(work, i);
  return work.source_conds[i];
}

// Bayes projection P_theta(Z|x^V) = softmax_z(log prior + sum_i log P(x_i|z)).
// Realizations given zero mass by every z get a uniform row and are counted.
struct ProjectionStats {
  std::size_t uniform_rows = 0;
};

inline Encoder project_encoder(const VIParams& params, ProjectionStats* stats = nullptr) {
  params.validate();
  const SourceSpec spec = params.source_spec();
  const std::size_t nx = spec.joint_size();
  const std::size_t nz = spec.z_cardinality;
  Encoder enc{spec, std::vector<double>(nx * nz)};
  if (stats) stats->uniform_rows = 0;

  std::vector<std::size_t> sym(spec.num_sources);
  std::vector<double> logits(nz);
  for (std::size_t x = 0; x < nx; ++x) {
    unflatten_index(spec.cardinalities, x, sym);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < nz; ++z) {
      double l = params.z_prior[z] > 0.0 ? std::log(params.z_prior[z])
                                         : -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < spec.num_sources; ++i) {
        const double p = params.cond(i, sym[i], z);
        l = p > 0.0 ? l + std::log(p) : -std::numeric_limits<double>::infinity();
        if (!(l > -std::numeric_limits<double>::infinity())) break;
      }
      logits[z] = l;
      m = std::max(m, l);
    }
    double* row = enc.rows.data() + x * nz;
    if (!(m > -std::numeric_limits<double>::infinity())) {
      for (std::size_t z = 0; z < nz; ++z) row[z] = 1.0 / static_cast<double>(nz);
      if (stats) ++stats->uniform_rows;
      continue;
    }
    double sum = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      row[z] = logits[z] > -std::numeric_limits<double>::infinity() ? std::exp(logits[z] - m) : 0.0;
      sum += row[z];
    }
    for (std::size_t z = 0; z < nz; ++z) row[z] /= sum;
  }
  return enc;
}

// Same init scheme as random_encoder: uniform(0,1) entries, normalized per
// column, tables in source order.
inline VIParams random_vi_params(const SourceSpec& spec, std::uint64_t seed) {
  spec.validate();
  VIParams params;
  params.z_prior.assign(spec.z_cardinality, 1.0 / static_cast<double>(spec.z_cardinality));
  params.x_cardinalities = spec.cardinalities;
  params.source_conds.resize(spec.num_sources);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < spec.num_sources; ++i) {
    const std::size_t nx = spec.cardinalities[i];
    params.source_conds[i].resize(nx * spec.z_cardinality);
    for (std::size_t z = 0; z < spec.z_cardinality; ++z) {
      double sum = 0.0;
      for (std::size_t x = 0; x < nx; ++x) {
        const double v = rng.next_unit();
        params.cond(i, x, z) = v;
        sum += v;
      }
      for (std::size_t x = 0; x < nx; ++x) params.cond(i, x, z) /= sum;
    }
  }
  return params;
}

struct VIRestartResult {
  std::uint64_t seed = 0;
  VIParams params;
  SolveTrace trace;
  double final_loss = 0.0;  // bits (floored internal loss)
  double wall_ms = 0.0;
};

struct VIResult {
  std::vector<VIRestartResult> restarts;
  std::size_t best_index = 0;
  Encoder encoder;  // projection of the best restart's params

  const VIRestartResult& best() const { return restarts[best_index]; }
};

// One iteration = V sequential source updates + loss evaluation. A run that
// improves by less than stall_eps for `patience` iterations while sitting
// above the best loss seen so far is abandoned and re-initialized; every
// initialization, stalled or not, consumes one unit of the restart budget.
inline VIResult vi_solve(const JointDist& joint, const VIConfig& cfg) {
  joint.validate();
  cfg.validate();
  detail::VIKernel kernel(joint, cfg);
  const std::size_t nv = joint.spec.num_sources;

  VIResult result;
  double best_seen = std::numeric_limits<double>::infinity();
  const std::vector<std::uint64_t> seeds = cfg.resolve_restart_seeds();
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const std::uint64_t seed = seeds[r];
    const auto t0 = std::chrono::steady_clock::now();

    VIParams params = random_vi_params(joint.spec, seed);
    double loss = kernel.internal_loss(params);
    SolveTrace trace;
    trace.losses.push_back(loss);
    std::size_t stall_count = 0;

    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
      for (std::size_t i = 0; i < nv; ++i) kernel.update_source(params, i);
      const double next_loss = kernel.internal_loss(params);
      trace.losses.push_back(next_loss);
      trace.iterations = k;
      if (std::abs(loss - next_loss) < cfg.loss_tol) {
        trace.terminated_by = Termination::tolerance;
        loss = next_loss;
        break;
      }
      if (loss - next_loss < cfg.stall_eps && next_loss > best_seen) {
        if (++stall_count >= cfg.patience) {
          trace.terminated_by = Termination::stall;
          loss = next_loss;
          break;
        }
      } else {
        stall_count = 0;
      }
      loss = next_loss;
    }

    const auto t1 = std::chrono::steady_clock::now();
    VIRestartResult rr;
    rr.seed = seed;
    rr.params = std::move(params);
    rr.final_loss = trace.losses.back();
    rr.trace = std::move(trace);
    rr.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    best_seen = std::min(best_seen, rr.final_loss);
    result.restarts.push_back(std::move(rr));

    const auto& cur = result.restarts.back();
    const auto& inc = result.restarts[result.best_index];
    if (r == 0 || cur.final_loss < inc.final_loss ||
        (cur.final_loss == inc.final_loss &&
         (cur.trace.iterations < inc.trace.iterations ||
          (cur.trace.iterations == inc.trace.iterations && cur.seed < inc.seed))))
      result.best_index = r;
  }
  result.encoder = project_encoder(result.best().params);
  return result;
}

}  // namespace wyner
