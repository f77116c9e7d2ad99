#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "wyner/prob.hpp"

namespace wyner {

// All information quantities in this module are in bits.

inline constexpr double kNegativityTol = 1e-9;

// -sum p log2 p with 0*log 0 = 0.
inline double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p < -1e-12) throw std::invalid_argument("entropy: negative probability entry");
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h < 0.0 ? 0.0 : h;
}

// sum p log2(p/q). Support violation (p>0 where q==0) is reported as +inf,
// not an error.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return d;
}

// I(A;B) from a dense joint over (A,B), a-major. Tiny negative values from
// rounding are clamped to zero; anything past the tolerance is a bug.
inline double mutual_information(std::span<const double> joint2, std::size_t na,
                                 std::size_t nb) {
  if (joint2.size() != na * nb) throw std::invalid_argument("mutual_information: shape mismatch");
  std::vector<double> pa(na, 0.0), pb(nb, 0.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      pa[a] += joint2[a * nb + b];
      pb[b] += joint2[a * nb + b];
    }
  double mi = entropy(pa) + entropy(pb) - entropy(joint2);
  if (mi < 0.0) {
    if (mi < -kNegativityTol)
      throw ConsistencyError("mutual_information: negative beyond tolerance");
    mi = 0.0;
  }
  return mi;
}

struct BipartitionInfo {
  Bipartition bipartition;
  double mi_s = 0.0;      // I(X_S; Z)
  double mi_sc = 0.0;     // I(X_{S^c}; Z)
  double cond_mi = 0.0;   // I(X_S; X_{S^c} | Z)
  double mi_pair = 0.0;   // I(X_S; X_{S^c}), encoder-independent
};

// Every term of the key relation
//   I(X_S;X_{S^c}|Z) = I(X^V;Z) - I(X_S;Z) - I(X_{S^c};Z) + I(X_S;X_{S^c})
// for all bipartitions, with the identity itself used as a cross-check.
struct InfoReport {
  double mi_z_xv = 0.0;
  std::vector<BipartitionInfo> parts;
  double cond_mi_sum = 0.0;
};

namespace detail {

// Marginal of a z-major P(Z,X^V) tensor onto (z, X_keep), z-major output.
inline std::vector<double> zx_marginal(std::span<const double> pzx, const SourceSpec& spec,
                                       const std::vector<std::size_t>& keep) {
  const std::size_t nx = spec.joint_size();
  const std::size_t nz = spec.z_cardinality;
  std::size_t nk = 1;
  for (std::size_t i : keep) nk *= spec.cardinalities[i];
  std::vector<double> out(nz * nk, 0.0);
  std::vector<std::size_t> sym(spec.num_sources);
  for (std::size_t x = 0; x < nx; ++x) {
    unflatten_index(spec.cardinalities, x, sym);
    std::size_t k = 0;
    for (std::size_t i : keep) k = k * spec.cardinalities[i] + sym[i];
    for (std::size_t z = 0; z < nz; ++z) out[z * nk + k] += pzx[z * nx + x];
  }
  return out;
}

}  // namespace detail

inline InfoReport info_report(const JointDist& joint, const Encoder& enc) {
  if (!(joint.spec == enc.spec)) throw std::invalid_argument("info_report: spec mismatch");
  const SourceSpec& spec = joint.spec;
  const std::size_t nx = spec.joint_size();
  const std::size_t nz = spec.z_cardinality;

  const std::vector<double> pzx = joint_zx(joint, enc);
  std::vector<double> pz(nz, 0.0);
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t x = 0; x < nx; ++x) pz[z] += pzx[z * nx + x];

  InfoReport rep;
  {
    // I(X^V;Z) = H(Z) + H(X^V) - H(Z,X^V)
    rep.mi_z_xv = entropy(pz) + entropy(joint.probs) - entropy(pzx);
    if (rep.mi_z_xv < 0.0) {
      if (rep.mi_z_xv < -kNegativityTol) throw ConsistencyError("info_report: negative I(X^V;Z)");
      rep.mi_z_xv = 0.0;
    }
  }

  for (const Bipartition& bip : enumerate_bipartitions(spec.num_sources)) {
    BipartitionInfo bi;
    bi.bipartition = bip;

    const std::vector<double> t_s = detail::zx_marginal(pzx, spec, bip.s);
    const std::vector<double> t_sc = detail::zx_marginal(pzx, spec, bip.s_complement);
    const std::size_t ns = t_s.size() / nz;
    const std::size_t nsc = t_sc.size() / nz;

    bi.mi_s = mutual_information(t_s, nz, ns);
    bi.mi_sc = mutual_information(t_sc, nz, nsc);

    // Direct route: I(X_S;X_{S^c}|Z) = H(X_S|Z) + H(X_{S^c}|Z) - H(X^V|Z)
    //             = H(Z,X_S) + H(Z,X_{S^c}) - H(Z,X^V) - H(Z).
    double direct = entropy(t_s) + entropy(t_sc) - entropy(pzx) - entropy(pz);

    // Identity route via the pairwise term of the true joint.
    std::vector<double> pair(ns * nsc, 0.0);
    std::vector<std::size_t> sym(spec.num_sources);
    for (std::size_t x = 0; x < nx; ++x) {
      unflatten_index(spec.cardinalities, x, sym);
      std::size_t is = 0, isc = 0;
      for (std::size_t i : bip.s) is = is * spec.cardinalities[i] + sym[i];
      for (std::size_t i : bip.s_complement) isc = isc * spec.cardinalities[i] + sym[i];
      pair[is * nsc + isc] += joint.probs[x];
    }
    bi.mi_pair = mutual_information(pair, ns, nsc);
    const double via_identity = rep.mi_z_xv - bi.mi_s - bi.mi_sc + bi.mi_pair;

    if (std::abs(direct - via_identity) > 1e-9)
      throw ConsistencyError("info_report: key-relation identity breach (" +
                             std::to_string(direct) + " vs " + std::to_string(via_identity) + ")");
    if (direct < 0.0) {
      if (direct < -kNegativityTol)
        throw ConsistencyError("info_report: negative conditional MI beyond tolerance");
      direct = 0.0;
    }
    bi.cond_mi = direct;
    rep.cond_mi_sum += direct;
    rep.parts.push_back(std::move(bi));
  }
  return rep;
}

}  // namespace wyner
