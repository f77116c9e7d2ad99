#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wyner {

// Raised when two independently computed routes to the same quantity
// disagree beyond tolerance (maps to CLI exit code 4).
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
// Neumaier-compensated sum; keeps simplex checks honest on larger tensors.
inline double stable_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}
}  // namespace detail

// Alphabet sizes of the V sources plus the common-randomness cardinality.
struct SourceSpec {
  std::size_t num_sources = 0;
  std::vector<std::size_t> cardinalities;
  std::size_t z_cardinality = 1;

  void validate() const {
    if (num_sources < 2) throw std::invalid_argument("SourceSpec: num_sources must be >= 2");
    if (cardinalities.size() != num_sources)
      throw std::invalid_argument("SourceSpec: cardinalities size mismatch");
    for (std::size_t c : cardinalities)
      if (c < 2) throw std::invalid_argument("SourceSpec: every cardinality must be >= 2");
    if (z_cardinality < 1) throw std::invalid_argument("SourceSpec: z_cardinality must be >= 1");
  }

  std::size_t joint_size() const {
    std::size_t n = 1;
    for (std::size_t c : cardinalities) n *= c;
    return n;
  }

  bool operator==(const SourceSpec&) const = default;
};

// Flat row-major indexing over the source alphabets. Source 0 is the
// slowest-varying axis; this stride convention is shared by every module.
inline std::size_t flat_index(const std::vector<std::size_t>& cards,
                              std::span<const std::size_t> symbols) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < cards.size(); ++i) idx = idx * cards[i] + symbols[i];
  return idx;
}

inline void unflatten_index(const std::vector<std::size_t>& cards, std::size_t idx,
                            std::span<std::size_t> out) {
  for (std::size_t i = cards.size(); i-- > 0;) {
    out[i] = idx % cards[i];
    idx /= cards[i];
  }
}

// Dense joint distribution P(X^V) in natural scale.
struct JointDist {
  SourceSpec spec;
  std::vector<double> probs;  // size prod |X_i|, source 0 slowest

  void validate() const {
    spec.validate();
    if (probs.size() != spec.joint_size())
      throw std::invalid_argument("JointDist: tensor size does not match spec");
    for (double p : probs)
      if (p < 0.0) throw std::invalid_argument("JointDist: negative probability entry");
    const double s = detail::stable_sum(probs);
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("JointDist: entries sum to " + std::to_string(s) +
                                  ", expected 1 within 1e-12");
  }
};

// Conditional table P(Z | X^V): one simplex row per joint realization,
// Z always the last axis.
struct Encoder {
  SourceSpec spec;
  std::vector<double> rows;  // (prod |X_i|) x |Z|, row-major

  double operator()(std::size_t x_flat, std::size_t z) const {
    return rows[x_flat * spec.z_cardinality + z];
  }
  double& operator()(std::size_t x_flat, std::size_t z) {
    return rows[x_flat * spec.z_cardinality + z];
  }

  void validate() const {
    spec.validate();
    const std::size_t nx = spec.joint_size();
    const std::size_t nz = spec.z_cardinality;
    if (rows.size() != nx * nz) throw std::invalid_argument("Encoder: size mismatch");
    for (std::size_t r = 0; r < nx; ++r) {
      double s = 0.0;
      for (std::size_t z = 0; z < nz; ++z) {
        const double p = rows[r * nz + z];
        if (p < 0.0) throw std::invalid_argument("Encoder: negative entry");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("Encoder: row " + std::to_string(r) + " sums to " +
                                    std::to_string(s));
    }
  }
};

// Unordered split (S, S^c) of the source index set, |S| <= |S^c|.
struct Bipartition {
  std::vector<std::size_t> s;
  std::vector<std::size_t> s_complement;

  bool operator==(const Bipartition&) const = default;
};

// Every unordered split exactly once. When |S| == |S^c| the half containing
// source 0 is the one emitted; output sorted by (|S|, lexicographic S).
inline std::vector<Bipartition> enumerate_bipartitions(std::size_t num_sources) {
  if (num_sources < 2) throw std::invalid_argument("enumerate_bipartitions: V must be >= 2");
  if (num_sources > 20) throw std::invalid_argument("enumerate_bipartitions: V too large");
  std::vector<Bipartition> out;
  const std::size_t full = (std::size_t{1} << num_sources) - 1;
  for (std::size_t mask = 1; mask < full; ++mask) {
    const std::size_t size_s = static_cast<std::size_t>(__builtin_popcountll(mask));
    const std::size_t size_sc = num_sources - size_s;
    if (size_s > size_sc) continue;
    if (size_s == size_sc && !(mask & 1)) continue;  // keep the half holding source 0
    Bipartition b;
    for (std::size_t i = 0; i < num_sources; ++i)
      (mask >> i & 1 ? b.s : b.s_complement).push_back(i);
    out.push_back(std::move(b));
  }
  std::sort(out.begin(), out.end(), [](const Bipartition& a, const Bipartition& b) {
    if (a.s.size() != b.s.size()) return a.s.size() < b.s.size();
    return a.s < b.s;
  });
  return out;
}

// Marginal tensor over the kept sources (ascending index order, first kept
// source slowest).
inline std::vector<double> marginalize(const JointDist& joint,
                                       const std::vector<std::size_t>& keep) {
  if (keep.empty()) throw std::invalid_argument("marginalize: empty keep set");
  std::vector<std::size_t> kept = keep;
  std::sort(kept.begin(), kept.end());
  for (std::size_t i : kept)
    if (i >= joint.spec.num_sources) throw std::invalid_argument("marginalize: index out of range");
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end())
    throw std::invalid_argument("marginalize: duplicate index");

  std::size_t out_size = 1;
  for (std::size_t i : kept) out_size *= joint.spec.cardinalities[i];
  std::vector<double> out(out_size, 0.0);

  const std::size_t nv = joint.spec.num_sources;
  std::vector<std::size_t> sym(nv);
  for (std::size_t idx = 0; idx < joint.probs.size(); ++idx) {
    unflatten_index(joint.spec.cardinalities, idx, sym);
    std::size_t o = 0;
    for (std::size_t i : kept) o = o * joint.spec.cardinalities[i] + sym[i];
    out[o] += joint.probs[idx];
  }
  return out;
}

// P(X_target | X_given): one simplex row per given-realization. Rows whose
// conditioning event has zero mass are filled uniformly and flagged so the
// solvers can keep iterating through transient dead regions.
struct ConditionalTable {
  std::vector<std::size_t> given;         // sorted source indices
  std::vector<std::size_t> target;        // sorted source indices
  std::size_t given_size = 0;             // number of given-realizations (rows)
  std::size_t target_size = 0;            // number of target-realizations (cols)
  std::vector<double> values;             // given_size x target_size, rows are simplices
  std::vector<std::uint8_t> uniform_fill; // per-row zero-mass flag

  bool any_uniform_fill() const {
    return std::any_of(uniform_fill.begin(), uniform_fill.end(), [](auto f) { return f != 0; });
  }
};

inline ConditionalTable conditional_on(const JointDist& joint,
                                       const std::vector<std::size_t>& target,
                                       const std::vector<std::size_t>& given) {
  if (target.empty() || given.empty())
    throw std::invalid_argument("conditional_on: target and given must be nonempty");
  ConditionalTable ct;
  ct.target = target;
  ct.given = given;
  std::sort(ct.target.begin(), ct.target.end());
  std::sort(ct.given.begin(), ct.given.end());
  for (std::size_t t : ct.target)
    if (std::binary_search(ct.given.begin(), ct.given.end(), t))
      throw std::invalid_argument("conditional_on: target and given overlap");

  ct.given_size = 1;
  for (std::size_t i : ct.given) ct.given_size *= joint.spec.cardinalities[i];
  ct.target_size = 1;
  for (std::size_t i : ct.target) ct.target_size *= joint.spec.cardinalities[i];
  ct.values.assign(ct.given_size * ct.target_size, 0.0);

  const std::size_t nv = joint.spec.num_sources;
  std::vector<std::size_t> sym(nv);
  for (std::size_t idx = 0; idx < joint.probs.size(); ++idx) {
    unflatten_index(joint.spec.cardinalities, idx, sym);
    std::size_t g = 0, t = 0;
    for (std::size_t i : ct.given) g = g * joint.spec.cardinalities[i] + sym[i];
    for (std::size_t i : ct.target) t = t * joint.spec.cardinalities[i] + sym[i];
    ct.values[g * ct.target_size + t] += joint.probs[idx];
  }

  ct.uniform_fill.assign(ct.given_size, 0);
  for (std::size_t g = 0; g < ct.given_size; ++g) {
    double* row = ct.values.data() + g * ct.target_size;
    const double mass = std::accumulate(row, row + ct.target_size, 0.0);
    if (mass <= 0.0) {
      std::fill(row, row + ct.target_size, 1.0 / static_cast<double>(ct.target_size));
      ct.uniform_fill[g] = 1;
    } else {
      for (std::size_t t = 0; t < ct.target_size; ++t) row[t] /= mass;
    }
  }
  return ct;
}

// P(Z, X^V) with the z axis first: entry (z, x^V) = enc(x^V, z) * joint(x^V).
inline std::vector<double> joint_zx(const JointDist& joint, const Encoder& enc) {
  if (!(joint.spec == enc.spec)) throw std::invalid_argument("joint_zx: spec mismatch");
  const std::size_t nx = joint.spec.joint_size();
  const std::size_t nz = joint.spec.z_cardinality;
  std::vector<double> out(nz * nx);
  for (std::size_t x = 0; x < nx; ++x) {
    const double px = joint.probs[x];
    for (std::size_t z = 0; z < nz; ++z) out[z * nx + x] = enc(x, z) * px;
  }
  return out;
}

}  // namespace wyner
