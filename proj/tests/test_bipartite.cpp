#include <doctest.h>

#include <cmath>

#include "wyner/bipartite.hpp"
#include "wyner/metrics.hpp"
#include "wyner/synth.hpp"

using namespace wyner;

namespace {

const SynthSpec kInvertible{8, {0.5, 0.5}, {0.0, 0.0}, 2};

Encoder exact_invertible_encoder(const JointDist& joint) {
  Encoder enc{joint.spec, std::vector<double>(joint.probs.size() * 8, 0.0)};
  for (std::size_t x1 = 0; x1 < 16; ++x1)
    for (std::size_t x2 = 0; x2 < 16; ++x2) {
      const std::size_t row = x1 * 16 + x2;
      if (x1 / 2 == x2 / 2)
        enc(row, x1 / 2) = 1.0;
      else
        for (std::size_t z = 0; z < 8; ++z) enc(row, z) = 0.125;
    }
  return enc;
}

JointDist random_joint(const SourceSpec& spec, std::uint64_t seed) {
  JointDist joint;
  joint.spec = spec;
  joint.probs.resize(spec.joint_size());
  SplitMix64 rng(seed);
  double sum = 0.0;
  for (double& p : joint.probs) sum += (p = rng.next_unit());
  for (double& p : joint.probs) p /= sum;
  return joint;
}

}  // namespace

TEST_CASE("random_encoder: simplex rows, determinism, |Z|=1") {
  const SourceSpec spec{2, {3, 4}, 5};
  const Encoder a = random_encoder(spec, 7);
  a.validate();
  const Encoder b = random_encoder(spec, 7);
  CHECK(a.rows == b.rows);
  CHECK(random_encoder(spec, 8).rows != a.rows);

  const Encoder trivial = random_encoder(SourceSpec{2, {2, 2}, 1}, 3);
  for (double v : trivial.rows) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("dca_step: exact invertible encoder is a fixed point") {
  const JointDist joint = build_joint(kInvertible, 8);
  const Encoder exact = exact_invertible_encoder(joint);
  BipartiteConfig cfg;
  cfg.kappas = {0.7};
  const Encoder next = dca_step(joint, exact, cfg);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < next.rows.size(); ++i)
    max_diff = std::max(max_diff, std::abs(next.rows[i] - exact.rows[i]));
  CHECK(max_diff < 1e-9);
}

TEST_CASE("dca_step: uniform encoder stays uniform on a product joint") {
  JointDist prod{SourceSpec{2, {2, 2}, 2}, {}};
  for (double a : {0.2, 0.8})
    for (double b : {0.3, 0.7}) prod.probs.push_back(a * b);
  Encoder uniform{prod.spec, std::vector<double>(8, 0.5)};
  BipartiteConfig cfg;
  cfg.kappas = {0.6};
  const Encoder next = dca_step(prod, uniform, cfg);
  for (double v : next.rows) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dca_step: objective never increases on random instances") {
  SplitMix64 meta(11);
  for (int trial = 0; trial < 20; ++trial) {
    const SourceSpec spec{2, {3, 4}, 3};
    const JointDist joint = random_joint(spec, meta.next_u64());
    Encoder enc = random_encoder(spec, meta.next_u64());
    BipartiteConfig cfg;
    cfg.kappas = {0.1 + 0.8 * (trial / 20.0)};
    double prev = objective(joint, enc, cfg);
    for (int k = 0; k < 25; ++k) {
      enc = dca_step(joint, enc, cfg);
      const double cur = objective(joint, enc, cfg);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
      // feasibility preserved
      for (std::size_t x = 0; x < spec.joint_size(); ++x) {
        double s = 0.0;
        for (std::size_t z = 0; z < 3; ++z) s += enc(x, z);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("objective: degenerate and exact values") {
  const JointDist joint = build_joint(kInvertible, 8);
  BipartiteConfig half;
  half.kappas = {0.5};

  Encoder constant{joint.spec, std::vector<double>(joint.probs.size() * 8, 0.0)};
  for (std::size_t x = 0; x < joint.probs.size(); ++x) constant(x, 0) = 1.0;
  CHECK(objective(joint, constant, half) == doctest::Approx(0.0).epsilon(1e-9));

  // exact encoder: 3 - (1/2)(3 + 3) = 0
  const Encoder exact = exact_invertible_encoder(joint);
  CHECK(objective(joint, exact, half) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("objective agrees with the info_report assembly") {
  SplitMix64 meta(31);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t v = 2 + trial % 2;
    std::vector<std::size_t> cards(v, 3 + trial % 2);
    const SourceSpec spec{v, cards, 4};
    const JointDist joint = random_joint(spec, meta.next_u64());
    const Encoder enc = random_encoder(spec, meta.next_u64());
    BipartiteConfig cfg;
    cfg.kappas = {};  // default 1/|Pi_V|
    const auto bips = enumerate_bipartitions(v);
    const auto kappas = cfg.resolve_kappas(bips.size());
    const InfoReport rep = info_report(joint, enc);
    double assembled = rep.mi_z_xv;
    for (std::size_t b = 0; b < rep.parts.size(); ++b)
      assembled -= kappas[b] * (rep.parts[b].mi_s + rep.parts[b].mi_sc);
    CHECK(objective(joint, enc, cfg) == doctest::Approx(assembled).epsilon(1e-9));
  }
}

TEST_CASE("solve: invertible case reaches the 3-bit solution") {
  const JointDist joint = build_joint(kInvertible, 8);
  BipartiteConfig cfg;
  cfg.kappas = {2.0 / 3.0};
  cfg.restarts = 8;
  cfg.seed = 5;
  const BipartiteResult res = bipartite_solve(joint, cfg);
  const InfoReport rep = info_report(joint, res.best().encoder);
  CHECK(std::abs(rep.mi_z_xv - 3.0) < 0.05);
  CHECK(rep.cond_mi_sum < 0.01);
  CHECK(res.restarts.size() == 8);
}

TEST_CASE("solve: |Z|=1 converges immediately to the trivial encoder") {
  SynthSpec spec = kInvertible;
  const JointDist joint = build_joint(spec, 1);
  BipartiteConfig cfg;
  cfg.restarts = 2;
  const BipartiteResult res = bipartite_solve(joint, cfg);
  CHECK(res.best().trace.iterations == 1);
  CHECK(res.best().trace.terminated_by == Termination::tolerance);
  CHECK(res.best().final_loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solve traces are non-increasing within 1e-12 slack") {
  const JointDist joint = build_joint(SynthSpec{8, {0.5, 0.5}, {0.05, 0.05}, 2}, 8);
  for (double kappa : {0.3, 0.667, 0.909}) {
    BipartiteConfig cfg;
    cfg.kappas = {kappa};
    cfg.restarts = 5;
    cfg.seed = 17;
    const BipartiteResult res = bipartite_solve(joint, cfg);
    for (const auto& r : res.restarts)
      for (std::size_t k = 1; k < r.trace.losses.size(); ++k)
        CHECK(r.trace.losses[k] <= r.trace.losses[k - 1] + 1e-12);
  }
}

TEST_CASE("solve: near-stationary at tolerance termination (support rows)") {
  const JointDist joint = build_joint(kInvertible, 8);
  for (double kappa : {0.4, 0.667, 0.909}) {
    BipartiteConfig cfg;
    cfg.kappas = {kappa};
    cfg.restarts = 4;
    cfg.seed = 5;
    cfg.loss_tol = 1e-10;
    const BipartiteResult res = bipartite_solve(joint, cfg);
    for (const auto& r : res.restarts) {
      if (r.trace.terminated_by != Termination::tolerance) continue;
      const Encoder next = dca_step(joint, r.encoder, cfg);
      double worst = 0.0;
      // zero-mass realizations never influence the objective; their rows are
      // reset by the uniform fallback and are excluded from the residual
      for (std::size_t x = 0; x < joint.probs.size(); ++x) {
        if (joint.probs[x] <= 0.0) continue;
        for (std::size_t z = 0; z < 8; ++z)
          worst = std::max(worst, std::abs(next(x, z) - r.encoder(x, z)));
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("solve: deterministic restart selection") {
  const JointDist joint = build_joint(kInvertible, 8);
  BipartiteConfig cfg;
  cfg.kappas = {0.7};
  cfg.restarts = 6;
  cfg.seed = 123;
  const BipartiteResult a = bipartite_solve(joint, cfg);
  const BipartiteResult b = bipartite_solve(joint, cfg);
  CHECK(a.best_index == b.best_index);
  CHECK(a.best().final_loss == b.best().final_loss);
  CHECK(a.best().encoder.rows == b.best().encoder.rows);
}

TEST_CASE("config validation") {
  BipartiteConfig cfg;
  cfg.kappas = {0.0};
  CHECK_THROWS_AS(cfg.resolve_kappas(1), std::invalid_argument);
  cfg.kappas = {-0.5};
  CHECK_THROWS_AS(cfg.resolve_kappas(1), std::invalid_argument);
  cfg.kappas = {0.2, 0.3};
  CHECK_THROWS_AS(cfg.resolve_kappas(3), std::invalid_argument);
  cfg.kappas = {};
  const auto def3 = cfg.resolve_kappas(3);
  for (double k : def3) CHECK(k == doctest::Approx(1.0 / 3.0));
  // V=2 has a single bipartition, so the shared default is 1
  CHECK(cfg.resolve_kappas(1).front() == doctest::Approx(1.0));
}
