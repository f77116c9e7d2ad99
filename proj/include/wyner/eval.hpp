#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "wyner/prob.hpp"
#include "wyner/rng.hpp"
#include "wyner/synth.hpp"

namespace wyner {

enum class DecodeMode { sample, argmax };

// Posterior-sampling decode: smallest z whose cumulative row mass strictly
// exceeds u. argmax is available for diagnostics only.
inline std::size_t bayes_decode(const Encoder& enc, std::size_t x_flat, double u,
                                DecodeMode mode = DecodeMode::sample) {
  const std::size_t nz = enc.spec.z_cardinality;
  const double* row = enc.rows.data() + x_flat * nz;
  if (mode == DecodeMode::argmax) {
    std::size_t best = 0;
    for (std::size_t z = 1; z < nz; ++z)
      if (row[z] > row[best]) best = z;
    return best;
  }
  double cum = 0.0;
  for (std::size_t z = 0; z < nz; ++z) {
    cum += row[z];
    if (cum > u) return z;
  }
  return nz - 1;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Jonker-Volgenant style shortest augmenting path assignment, minimizing.
// cost is n x n row-major; returns row -> column.
inline std::vector<std::size_t> hungarian_min(const std::vector<double>& cost, std::size_t n) {
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

inline double assignment_value(const std::vector<double>& score, std::size_t n,
                               const std::vector<std::size_t>& row_to_col) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += score[i * n + row_to_col[i]];
  return s;
}

}  // namespace detail

// Maximum-agreement assignment for a nonnegative |Z| x |Y| count matrix.
// Rectangular inputs are zero-padded to square; padded matches come back as
// SIZE_MAX. Ties are broken toward the lexicographically smallest assignment
// vector by fixing rows in order and re-solving.
inline std::vector<std::size_t> label_match(const std::vector<std::vector<double>>& confusion) {
  if (confusion.empty() || confusion.front().empty())
    throw std::invalid_argument("label_match: empty matrix");
  const std::size_t rows = confusion.size();
  const std::size_t cols = confusion.front().size();
  const std::size_t n = std::max(rows, cols);
  std::vector<double> score(n * n, 0.0);
  double max_entry = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (confusion[i].size() != cols) throw std::invalid_argument("label_match: ragged matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      if (confusion[i][j] < 0.0) throw std::invalid_argument("label_match: negative count");
      score[i * n + j] = confusion[i][j];
      max_entry = std::max(max_entry, confusion[i][j]);
    }
  }

  const auto solve_forced = [&](const std::vector<std::size_t>& forced) {
    // rows 0..forced.size()-1 pinned to their columns; returns best total or
    // -inf when the forcing is inconsistent
    std::vector<char> col_taken(n, 0);
    double fixed = 0.0;
    for (std::size_t i = 0; i < forced.size(); ++i) {
      if (col_taken[forced[i]]) return -detail::kInf;
      col_taken[forced[i]] = 1;
      fixed += score[i * n + forced[i]];
    }
    const std::size_t m = n - forced.size();
    if (m == 0) return fixed;
    std::vector<std::size_t> free_cols;
    for (std::size_t j = 0; j < n; ++j)
      if (!col_taken[j]) free_cols.push_back(j);
    std::vector<double> sub(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        sub[i * m + j] = max_entry - score[(forced.size() + i) * n + free_cols[j]];
    const auto assign = detail::hungarian_min(sub, m);
    double rest = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      rest += score[(forced.size() + i) * n + free_cols[assign[i]]];
    return fixed + rest;
  };

  const double optimum = solve_forced({});
  std::vector<std::size_t> assignment;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      assignment.push_back(j);
      if (solve_forced(assignment) >= optimum - 1e-9) break;
      assignment.pop_back();
    }
    if (assignment.size() != i + 1)
      throw ConsistencyError("label_match: tie-break search failed");
  }

  assignment.resize(rows);
  for (std::size_t i = 0; i < rows; ++i)
    if (assignment[i] >= cols) assignment[i] = static_cast<std::size_t>(-1);  // padded column
  return assignment;
}

struct ClusterResult {
  double accuracy = 0.0;
  std::vector<std::size_t> permutation;        // z -> matched y (SIZE_MAX if padded)
  std::vector<std::vector<double>> confusion;  // |Z| x |Y| counts
};

// Decode every sample through the seeded uniform stream (one draw per sample,
// indexed by position), build the confusion matrix, match labels, report the
// matched fraction.
inline ClusterResult clustering_accuracy(const Encoder& enc, const LabeledDataset& data,
                                         std::uint64_t seed,
                                         DecodeMode mode = DecodeMode::sample) {
  if (enc.spec.cardinalities != data.spec.cardinalities)
    throw std::invalid_argument("clustering_accuracy: alphabet mismatch");
  if (data.samples.empty()) throw std::invalid_argument("clustering_accuracy: empty dataset");
  const std::size_t nz = enc.spec.z_cardinality;
  std::size_t ny = 0;
  for (const auto& s : data.samples) {
    if (s.x.size() != enc.spec.num_sources)
      throw std::invalid_argument("clustering_accuracy: sample arity mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (s.x[i] >= enc.spec.cardinalities[i])
        throw std::invalid_argument("clustering_accuracy: sample symbol out of range");
    ny = std::max(ny, s.y + 1);
  }

  ClusterResult result;
  result.confusion.assign(nz, std::vector<double>(ny, 0.0));
  for (std::size_t idx = 0; idx < data.samples.size(); ++idx) {
    const LabeledSample& s = data.samples[idx];
    const std::size_t x_flat = flat_index(enc.spec.cardinalities, s.x);
    SplitMix64 rng(derive_seed(seed, idx));
    const std::size_t z = bayes_decode(enc, x_flat, rng.next_unit(), mode);
    result.confusion[z][s.y] += 1.0;
  }
  result.permutation = label_match(result.confusion);
  double matched = 0.0;
  for (std::size_t z = 0; z < nz; ++z)
    if (result.permutation[z] != static_cast<std::size_t>(-1))
      matched += result.confusion[z][result.permutation[z]];
  result.accuracy = matched / static_cast<double>(data.samples.size());
  return result;
}

// Contrastive correlation loss over an N x N nonnegative similarity matrix
// (diagonal = positive pairs):
//   L_cor = -(1/N) sum_n log( h_nn / sum_k h_nk ),   in nats.
// The log-N lower bound only binds for marginal-consistent critics; the
// caller-facing contract just evaluates the objective.
inline double contrastive_loss(const std::vector<std::vector<double>>& scores) {
  const std::size_t n = scores.size();
  if (n < 2) throw std::invalid_argument("contrastive_loss: need N >= 2");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i].size() != n) throw std::invalid_argument("contrastive_loss: not square");
    double row_sum = 0.0;
    for (double v : scores[i]) {
      if (v < 0.0) throw std::invalid_argument("contrastive_loss: negative score");
      row_sum += v;
    }
    if (!(row_sum > 0.0) || !(scores[i][i] > 0.0))
      return std::numeric_limits<double>::infinity();
    total -= std::log(scores[i][i] / row_sum);
  }
  return total / static_cast<double>(n);
}

}  // namespace wyner
