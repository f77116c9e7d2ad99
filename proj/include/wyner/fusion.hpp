#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wyner/linalg.hpp"
#include "wyner/prob.hpp"

namespace wyner {

// Exponential-family fusion of per-bipartition posteriors against a fixed
// reference prior (standard normal / uniform categorical). Everything in
// this module is in nats.

struct GaussianExpert {
  std::vector<double> mean;
  Mat covariance;

  std::size_t dim() const { return mean.size(); }

  void validate() const {
    if (mean.empty() || covariance.n != mean.size())
      throw std::invalid_argument("GaussianExpert: mean/covariance shape mismatch");
    if (!is_symmetric(covariance))
      throw std::invalid_argument("GaussianExpert: covariance not symmetric within 1e-10");
    if (!cholesky(covariance))
      throw std::invalid_argument("GaussianExpert: covariance not positive definite");
  }
};

struct CategoricalExpert {
  std::vector<double> log_probs;

  std::size_t size() const { return log_probs.size(); }

  void validate() const {
    if (log_probs.empty()) throw std::invalid_argument("CategoricalExpert: empty");
    double s = 0.0;
    for (double lp : log_probs) s += std::exp(lp);
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("CategoricalExpert: exp entries sum to " + std::to_string(s));
  }
};

enum class ExpFamily { gaussian, categorical };

// Canonical-form expert. Gaussian with feature dim d: eta holds the d
// entries of Sigma^{-1} mu followed by the d*d entries of Sigma^{-1}
// (row-major). Categorical over K categories: the K-1 log-odds against the
// last category.
struct NaturalParamExpert {
  ExpFamily family = ExpFamily::gaussian;
  std::size_t dim = 0;  // d for gaussian, K for categorical
  std::vector<double> eta;

  void validate() const {
    if (family == ExpFamily::gaussian) {
      if (dim < 1 || eta.size() != dim + dim * dim)
        throw std::invalid_argument("NaturalParamExpert: gaussian eta size mismatch");
      Mat prec(dim);
      for (std::size_t i = 0; i < dim * dim; ++i) prec.a[i] = eta[dim + i];
      if (!is_symmetric(prec) || !cholesky(prec))
        throw std::domain_error("NaturalParamExpert: precision block outside gaussian domain");
    } else {
      if (dim < 2 || eta.size() != dim - 1)
        throw std::invalid_argument("NaturalParamExpert: categorical eta size mismatch");
      for (double e : eta)
        if (!std::isfinite(e))
          throw std::domain_error("NaturalParamExpert: categorical eta must be finite");
    }
  }
};

template <typename E>
struct ExpertPair {
  E s;
  E sc;
};

namespace detail {

inline void check_kappas(std::size_t pairs, const std::vector<double>& kappas) {
  if (kappas.size() != pairs)
    throw std::invalid_argument("fusion: one kappa per bipartition required");
  for (double k : kappas)
    if (!(k > 0.0)) throw std::invalid_argument("fusion: kappas must be positive");
}

// Product-of-experts core over weighted components against the N(0,I) prior:
//   precision = I + sum_c w_c (Sigma_c^{-1} - I),
//   mu_eq = precision^{-1} sum_c w_c Sigma_c^{-1} mu_c.
inline GaussianExpert gaussian_poe(const std::vector<const GaussianExpert*>& experts,
                                   const std::vector<double>& weights,
                                   const std::string& kappa_label) {
  const std::size_t d = experts.front()->dim();
  Mat precision = Mat::identity(d);
  std::vector<double> h(d, 0.0);
  for (std::size_t c = 0; c < experts.size(); ++c) {
    const GaussianExpert& e = *experts[c];
    if (e.dim() != d) throw std::invalid_argument("gaussian fusion: dimension mismatch");
    const auto l = cholesky(e.covariance);
    if (!l) throw std::invalid_argument("gaussian fusion: expert covariance not SPD");
    const Mat prec = chol_inverse(*l);
    const std::vector<double> pm = matvec(prec, e.mean);
    for (std::size_t i = 0; i < d; ++i) {
      h[i] += weights[c] * pm[i];
      for (std::size_t j = 0; j < d; ++j)
        precision(i, j) += weights[c] * (prec(i, j) - (i == j ? 1.0 : 0.0));
    }
  }
  const auto lp = cholesky(precision);
  if (!lp)
    throw std::domain_error("gaussian fusion: assembled precision indefinite at kappa scale " +
                            kappa_label);
  GaussianExpert out;
  out.covariance = chol_inverse(*lp);
  out.mean = chol_solve(*lp, h);
  return out;
}

inline std::string kappa_label(const std::vector<double>& kappas) {
  std::string s = "[";
  for (std::size_t i = 0; i < kappas.size(); ++i)
    s += (i ? "," : "") + std::to_string(kappas[i]);
  return s + "]";
}

inline CategoricalExpert categorical_logit_fuse(const std::vector<const CategoricalExpert*>& experts,
                                                const std::vector<double>& weights) {
  const std::size_t k = experts.front()->size();
  std::vector<double> logits(k, 0.0);
  for (std::size_t c = 0; c < experts.size(); ++c) {
    if (experts[c]->size() != k)
      throw std::invalid_argument("categorical fusion: |Z| mismatch");
    for (std::size_t z = 0; z < k; ++z) logits[z] += weights[c] * experts[c]->log_probs[z];
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double l : logits) m = std::max(m, l);
  double sum = 0.0;
  std::vector<double> probs(k);
  for (std::size_t z = 0; z < k; ++z) {
    probs[z] = std::isinf(logits[z]) && logits[z] < 0 ? 0.0 : std::exp(logits[z] - m);
    sum += probs[z];
  }
  CategoricalExpert out;
  out.log_probs.resize(k);
  const double lse = m + std::log(sum);
  for (std::size_t z = 0; z < k; ++z) out.log_probs[z] = logits[z] - lse;
  return out;
}

}  // namespace detail

// Product-of-experts over one (S, S^c) expert pair per bipartition.
inline GaussianExpert gaussian_fuse(const std::vector<ExpertPair<GaussianExpert>>& experts,
                                    const std::vector<double>& kappas) {
  if (experts.empty()) throw std::invalid_argument("gaussian_fuse: no experts");
  detail::check_kappas(experts.size(), kappas);
  std::vector<const GaussianExpert*> ptrs;
  std::vector<double> weights;
  for (std::size_t b = 0; b < experts.size(); ++b) {
    ptrs.push_back(&experts[b].s);
    ptrs.push_back(&experts[b].sc);
    weights.push_back(kappas[b]);
    weights.push_back(kappas[b]);
  }
  return detail::gaussian_poe(ptrs, weights, detail::kappa_label(kappas));
}

// Softmax fusion of categorical posteriors (uniform reference prior).
inline CategoricalExpert categorical_fuse(const std::vector<ExpertPair<CategoricalExpert>>& experts,
                                          const std::vector<double>& kappas) {
  if (experts.empty()) throw std::invalid_argument("categorical_fuse: no experts");
  detail::check_kappas(experts.size(), kappas);
  std::vector<const CategoricalExpert*> ptrs;
  std::vector<double> weights;
  for (std::size_t b = 0; b < experts.size(); ++b) {
    ptrs.push_back(&experts[b].s);
    ptrs.push_back(&experts[b].sc);
    weights.push_back(kappas[b]);
    weights.push_back(kappas[b]);
  }
  return detail::categorical_logit_fuse(ptrs, weights);
}

// Generic natural-parameter fusion:
//   eta_eq = eta(prior) + sum_S kappa_S [eta(S) + eta(S^c) - 2 eta(prior)].
inline NaturalParamExpert expfam_fuse(const std::vector<ExpertPair<NaturalParamExpert>>& experts,
                                      const NaturalParamExpert& prior,
                                      const std::vector<double>& kappas) {
  if (experts.empty()) throw std::invalid_argument("expfam_fuse: no experts");
  detail::check_kappas(experts.size(), kappas);
  prior.validate();
  NaturalParamExpert out = prior;
  for (std::size_t b = 0; b < experts.size(); ++b) {
    for (const NaturalParamExpert* e : {&experts[b].s, &experts[b].sc}) {
      if (e->family != prior.family || e->dim != prior.dim || e->eta.size() != prior.eta.size())
        throw std::invalid_argument("expfam_fuse: mixed families or shapes");
      for (std::size_t i = 0; i < out.eta.size(); ++i)
        out.eta[i] += kappas[b] * (e->eta[i] - prior.eta[i]);
    }
  }
  out.validate();  // domain check on the fused parameter
  return out;
}

// D_KL[N(mu,Sigma) || N(0,I)] = (tr Sigma + mu^T mu - d - log|Sigma|) / 2.
inline double gaussian_kl_to_standard(const GaussianExpert& expert) {
  expert.validate();
  const auto l = cholesky(expert.covariance);
  return 0.5 * (trace(expert.covariance) + dot(expert.mean, expert.mean) -
                static_cast<double>(expert.dim()) - logdet_from_chol(*l));
}

// Conversions between the concrete experts and canonical form.
inline NaturalParamExpert to_natural(const GaussianExpert& e) {
  e.validate();
  const auto l = cholesky(e.covariance);
  const Mat prec = chol_inverse(*l);
  NaturalParamExpert out;
  out.family = ExpFamily::gaussian;
  out.dim = e.dim();
  out.eta = matvec(prec, e.mean);
  out.eta.insert(out.eta.end(), prec.a.begin(), prec.a.end());
  return out;
}

inline GaussianExpert from_natural_gaussian(const NaturalParamExpert& e) {
  e.validate();
  if (e.family != ExpFamily::gaussian)
    throw std::invalid_argument("from_natural_gaussian: wrong family");
  Mat prec(e.dim);
  for (std::size_t i = 0; i < e.dim * e.dim; ++i) prec.a[i] = e.eta[e.dim + i];
  const auto l = cholesky(prec);
  GaussianExpert out;
  out.covariance = chol_inverse(*l);
  out.mean = chol_solve(*l, std::vector<double>(e.eta.begin(), e.eta.begin() + e.dim));
  return out;
}

inline NaturalParamExpert to_natural(const CategoricalExpert& e) {
  e.validate();
  NaturalParamExpert out;
  out.family = ExpFamily::categorical;
  out.dim = e.size();
  out.eta.resize(e.size() - 1);
  const double ref = e.log_probs.back();
  for (std::size_t z = 0; z + 1 < e.size(); ++z) out.eta[z] = e.log_probs[z] - ref;
  return out;
}

inline CategoricalExpert from_natural_categorical(const NaturalParamExpert& e) {
  e.validate();
  if (e.family != ExpFamily::categorical)
    throw std::invalid_argument("from_natural_categorical: wrong family");
  std::vector<double> logits(e.eta.begin(), e.eta.end());
  logits.push_back(0.0);
  double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double lse = m + std::log(sum);
  CategoricalExpert out;
  out.log_probs.resize(logits.size());
  for (std::size_t z = 0; z < logits.size(); ++z) out.log_probs[z] = logits[z] - lse;
  return out;
}

namespace detail {

// Shared Monte-Carlo objective behind the bipartite (per-bipartition) and
// variational (per-source, single kappa) configurations: per sample,
//   KL[fused || prior] - sum_c w_c E_fused[log q_c - log prior].
inline double categorical_sample_loss(const std::vector<const CategoricalExpert*>& experts,
                                      const std::vector<double>& weights) {
  const CategoricalExpert fused = categorical_logit_fuse(experts, weights);
  const std::size_t k = fused.size();
  const double log_u = -std::log(static_cast<double>(k));
  double kl = 0.0;
  for (std::size_t z = 0; z < k; ++z) {
    const double p = std::exp(fused.log_probs[z]);
    if (p > 0.0) kl += p * (fused.log_probs[z] - log_u);
  }
  double tilt = 0.0;
  for (std::size_t c = 0; c < experts.size(); ++c) {
    double ex = 0.0;
    for (std::size_t z = 0; z < k; ++z) {
      const double p = std::exp(fused.log_probs[z]);
      if (p > 0.0) ex += p * (experts[c]->log_probs[z] - log_u);
    }
    tilt += weights[c] * ex;
  }
  return kl - tilt;
}

// E_{z~N(m,C)}[log N(z;mu,Sigma) - log N(z;0,I)], closed form.
inline double gaussian_log_ratio_expectation(const GaussianExpert& fused,
                                             const GaussianExpert& expert) {
  const auto l = cholesky(expert.covariance);
  if (!l) throw std::invalid_argument("empirical loss: expert covariance not SPD");
  const Mat prec = chol_inverse(*l);
  const std::size_t d = fused.dim();
  double quad = 0.0, tr_pc = 0.0;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = fused.mean[i] - expert.mean[i];
  const std::vector<double> pd = matvec(prec, diff);
  quad = dot(diff, pd);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) tr_pc += prec(i, j) * fused.covariance(j, i);
  return -0.5 * (logdet_from_chol(*l) + tr_pc + quad - trace(fused.covariance) -
                 dot(fused.mean, fused.mean));
}

inline double gaussian_sample_loss(const std::vector<const GaussianExpert*>& experts,
                                   const std::vector<double>& weights,
                                   const std::string& label) {
  const GaussianExpert fused = gaussian_poe(experts, weights, label);
  double loss = gaussian_kl_to_standard(fused);
  for (std::size_t c = 0; c < experts.size(); ++c)
    loss -= weights[c] * gaussian_log_ratio_expectation(fused, *experts[c]);
  return loss;
}

template <typename E>
void pair_components(const std::vector<ExpertPair<E>>& pairs, const std::vector<double>& kappas,
                     std::vector<const E*>& ptrs, std::vector<double>& weights) {
  ptrs.clear();
  weights.clear();
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    ptrs.push_back(&pairs[b].s);
    ptrs.push_back(&pairs[b].sc);
    weights.push_back(kappas[b]);
    weights.push_back(kappas[b]);
  }
}

}  // namespace detail

// Monte-Carlo estimate of the bipartite objective on per-sample expert
// outputs (categorical flavor).
inline double bipartite_empirical_loss(
    const std::vector<std::vector<ExpertPair<CategoricalExpert>>>& samples,
    const std::vector<double>& kappas) {
  if (samples.empty()) throw std::invalid_argument("bipartite_empirical_loss: no samples");
  double total = 0.0;
  std::vector<const CategoricalExpert*> ptrs;
  std::vector<double> weights;
  for (const auto& sample : samples) {
    detail::check_kappas(sample.size(), kappas);
    detail::pair_components(sample, kappas, ptrs, weights);
    total += detail::categorical_sample_loss(ptrs, weights);
  }
  return total / static_cast<double>(samples.size());
}

inline double bipartite_empirical_loss(
    const std::vector<std::vector<ExpertPair<GaussianExpert>>>& samples,
    const std::vector<double>& kappas) {
  if (samples.empty()) throw std::invalid_argument("bipartite_empirical_loss: no samples");
  const std::string label = detail::kappa_label(kappas);
  double total = 0.0;
  std::vector<const GaussianExpert*> ptrs;
  std::vector<double> weights;
  for (const auto& sample : samples) {
    detail::check_kappas(sample.size(), kappas);
    detail::pair_components(sample, kappas, ptrs, weights);
    total += detail::gaussian_sample_loss(ptrs, weights, label);
  }
  return total / static_cast<double>(samples.size());
}

// Variational configuration of the same evaluator: per-source experts and a
// single shared kappa.
inline double variational_empirical_loss(
    const std::vector<std::vector<CategoricalExpert>>& samples, double kappa_v) {
  if (samples.empty()) throw std::invalid_argument("variational_empirical_loss: no samples");
  if (!(kappa_v > 0.0)) throw std::invalid_argument("variational_empirical_loss: kappa must be > 0");
  double total = 0.0;
  for (const auto& sample : samples) {
    std::vector<const CategoricalExpert*> ptrs;
    for (const auto& e : sample) ptrs.push_back(&e);
    total += detail::categorical_sample_loss(ptrs, std::vector<double>(ptrs.size(), kappa_v));
  }
  return total / static_cast<double>(samples.size());
}

inline double variational_empirical_loss(const std::vector<std::vector<GaussianExpert>>& samples,
                                         double kappa_v) {
  if (samples.empty()) throw std::invalid_argument("variational_empirical_loss: no samples");
  if (!(kappa_v > 0.0)) throw std::invalid_argument("variational_empirical_loss: kappa must be > 0");
  double total = 0.0;
  for (const auto& sample : samples) {
    std::vector<const GaussianExpert*> ptrs;
    for (const auto& e : sample) ptrs.push_back(&e);
    total += detail::gaussian_sample_loss(ptrs, std::vector<double>(ptrs.size(), kappa_v),
                                          std::to_string(kappa_v));
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace wyner
