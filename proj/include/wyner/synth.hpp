#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "wyner/prob.hpp"
#include "wyner/rng.hpp"

namespace wyner {

// Family of synthetic conditionals P(X_i|Y): a banded block structure where
// column y carries the block weights l - delta on block y and leaks delta
// onto block y+1 (mod |Y|). The wrap keeps every column stochastic for any
// delta. delta = 0 makes every observation symbol identify y uniquely
// (the "invertible" case).
struct SynthSpec {
  std::size_t y_cardinality = 0;
  std::vector<double> block;   // l, length b
  std::vector<double> shift;   // delta, length b
  std::size_t num_sources = 0;

  std::size_t block_size() const { return block.size(); }
  std::size_t x_cardinality() const { return block.size() * y_cardinality; }

  void validate() const {
    if (y_cardinality < 1) throw std::invalid_argument("SynthSpec: y_cardinality must be >= 1");
    if (num_sources < 2) throw std::invalid_argument("SynthSpec: num_sources must be >= 2");
    if (block.empty()) throw std::invalid_argument("SynthSpec: block vector is empty");
    if (shift.size() != block.size())
      throw std::invalid_argument("SynthSpec: shift length must match block length");
    double sum = 0.0;
    for (std::size_t j = 0; j < block.size(); ++j) {
      if (shift[j] < 0.0 || shift[j] > block[j])
        throw std::invalid_argument("SynthSpec: shift must satisfy 0 <= delta_j <= l_j");
      sum += block[j];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("SynthSpec: block must sum to 1");
    if (x_cardinality() < 2) throw std::invalid_argument("SynthSpec: alphabet too small");
  }

  SourceSpec source_spec(std::size_t z_cardinality) const {
    return SourceSpec{num_sources,
                      std::vector<std::size_t>(num_sources, x_cardinality()), z_cardinality};
  }
};

// Column-stochastic (b*|Y|) x |Y| table, rows index x_i, columns index y.
inline std::vector<double> build_source_conditional(const SynthSpec& spec) {
  spec.validate();
  const std::size_t b = spec.block_size();
  const std::size_t ny = spec.y_cardinality;
  const std::size_t nx = spec.x_cardinality();
  std::vector<double> table(nx * ny, 0.0);
  for (std::size_t y = 0; y < ny; ++y) {
    const std::size_t wrap = (y + 1) % ny;
    for (std::size_t j = 0; j < b; ++j) {
      table[(y * b + j) * ny + y] = spec.block[j] - spec.shift[j];
      table[(wrap * b + j) * ny + y] += spec.shift[j];  // += so |Y|=1 folds onto itself
    }
  }
  return table;
}

// P(X^V) = sum_y (1/|Y|) prod_i P(X_i|y), all sources sharing the same
// conditional.
inline JointDist build_joint(const SynthSpec& spec, std::size_t z_cardinality) {
  spec.validate();
  SourceSpec sspec = spec.source_spec(z_cardinality);
  if (static_cast<double>(sspec.joint_size()) > 1e8)
    throw std::invalid_argument("build_joint: joint tensor would exceed the 1e8 entry guard");

  const std::vector<double> cond = build_source_conditional(spec);
  const std::size_t ny = spec.y_cardinality;
  const std::size_t nx = spec.x_cardinality();
  const double py = 1.0 / static_cast<double>(ny);

  JointDist joint;
  joint.spec = sspec;
  joint.probs.assign(sspec.joint_size(), 0.0);
  std::vector<std::size_t> sym(spec.num_sources);
  for (std::size_t idx = 0; idx < joint.probs.size(); ++idx) {
    unflatten_index(sspec.cardinalities, idx, sym);
    double total = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
      double prod = py;
      for (std::size_t i = 0; i < spec.num_sources && prod > 0.0; ++i)
        prod *= cond[sym[i] * ny + y];
      total += prod;
    }
    joint.probs[idx] = total;
  }
  // Renormalize away accumulated rounding so downstream 1e-12 checks hold.
  const double s = detail::stable_sum(joint.probs);
  for (double& p : joint.probs) p /= s;
  return joint;
}

struct LabeledSample {
  std::vector<std::size_t> x;  // one symbol per source
  std::size_t y = 0;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;
  SourceSpec spec;
};

// y uniform over |Y|, then each x_i by inverse transform over column y of
// P(X_i|Y), i.i.d. across sources. Draw order per sample: y, x_1, ..., x_V.
inline LabeledDataset sample_dataset(const SynthSpec& spec, std::size_t n, std::uint64_t seed,
                                     std::size_t z_cardinality = 1) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  const std::vector<double> cond = build_source_conditional(spec);
  const std::size_t ny = spec.y_cardinality;
  const std::size_t nx = spec.x_cardinality();

  std::vector<double> uniform_y(ny, 1.0 / static_cast<double>(ny));
  std::vector<double> column(nx);

  LabeledDataset data;
  data.spec = spec.source_spec(std::max<std::size_t>(z_cardinality, 1));
  data.samples.resize(n);
  SplitMix64 rng(seed);
  for (std::size_t s = 0; s < n; ++s) {
    LabeledSample& sample = data.samples[s];
    sample.y = sample_from(uniform_y, rng.next_unit());
    sample.x.resize(spec.num_sources);
    for (std::size_t x = 0; x < nx; ++x) column[x] = cond[x * ny + sample.y];
    for (std::size_t i = 0; i < spec.num_sources; ++i)
      sample.x[i] = sample_from(column, rng.next_unit());
  }
  return data;
}

}  // namespace wyner
