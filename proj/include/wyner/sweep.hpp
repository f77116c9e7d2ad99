#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "wyner/bipartite.hpp"
#include "wyner/eval.hpp"
#include "wyner/metrics.hpp"
#include "wyner/synth.hpp"
#include "wyner/vi.hpp"

namespace wyner {

enum class SolverKind { bipartite, vi };

inline const char* to_string(SolverKind s) {
  return s == SolverKind::bipartite ? "bipartite" : "vi";
}

inline std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 1)
    throw std::invalid_argument("geometric_grid: need 0 < lo < hi and points >= 1");
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = std::exp(std::log(lo) + step * static_cast<double>(i));
  return grid;
}

struct SweepConfig {
  std::vector<double> grid = geometric_grid(0.1, 10.0, 20);
  std::size_t restarts = 25;
  SolverKind solver = SolverKind::bipartite;
  SynthSpec synth;
  std::size_t z_cardinality = 8;
  std::uint64_t base_seed = 0;
  std::size_t max_iters = 10000;
  double loss_tol = 1e-6;
  std::size_t threads = 1;
  std::size_t accuracy_samples = 10000;

  void validate() const {
    synth.validate();
    if (grid.empty()) throw std::invalid_argument("SweepConfig: empty grid");
    double prev = 0.0;
    for (double g : grid) {
      if (!(g > prev)) throw std::invalid_argument("SweepConfig: grid must be positive increasing");
      prev = g;
    }
    if (restarts < 1) throw std::invalid_argument("SweepConfig: restarts must be >= 1");
    if (z_cardinality < 1) throw std::invalid_argument("SweepConfig: z_cardinality must be >= 1");
  }
};

struct SweepRecord {
  SolverKind solver = SolverKind::bipartite;
  double grid_value = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  Termination terminated_by = Termination::max_iters;
  double wall_ms = 0.0;
  double mi_z_xv = 0.0;
  double cond_mi_sum = 0.0;
  std::optional<double> accuracy;        // per-grid best-loss record only
  std::optional<std::size_t> param_count;  // vi only
};

// The grid value is the multiplier beta of the swept solver knob: beta
// itself for VI, kappa = beta / (1 + |Pi_V| beta) for the bipartite solver.
inline double grid_to_kappa(double beta, std::size_t num_bipartitions) {
  return beta / (1.0 + static_cast<double>(num_bipartitions) * beta);
}

// One record per (grid value, restart); restart seeds are stable hashes of
// the (grid index, restart index) pair, so any thread count yields the same
// record set. Each grid value is one solver invocation over its restart
// budget (the VI stall-restart bookkeeping lives inside that budget).
// Traces can be captured for descent audits.
inline std::vector<SweepRecord> run_sweep(
    const SweepConfig& cfg, std::vector<SolveTrace>* traces = nullptr) {
  cfg.validate();
  const JointDist joint = build_joint(cfg.synth, cfg.z_cardinality);
  const std::size_t num_bips = enumerate_bipartitions(cfg.synth.num_sources).size();
  const std::size_t cells = cfg.grid.size() * cfg.restarts;

  std::vector<SweepRecord> records(cells);
  std::vector<SolveTrace> cell_traces(traces ? cells : 0);
  std::vector<Encoder> encoders(cells);

  const auto run_grid_value = [&](std::size_t gi) {
    const double g = cfg.grid[gi];
    std::vector<std::uint64_t> seeds(cfg.restarts);
    for (std::size_t ri = 0; ri < cfg.restarts; ++ri)
      seeds[ri] = derive_seed(cfg.base_seed, gi, ri);

    for (std::size_t ri = 0; ri < cfg.restarts; ++ri) {
      SweepRecord& rec = records[gi * cfg.restarts + ri];
      rec.solver = cfg.solver;
      rec.grid_value = g;
      rec.seed = seeds[ri];
    }
    if (cfg.solver == SolverKind::bipartite) {
      BipartiteConfig scfg;
      scfg.kappas = {grid_to_kappa(g, num_bips)};
      scfg.max_iters = cfg.max_iters;
      scfg.loss_tol = cfg.loss_tol;
      scfg.restart_seeds = seeds;
      const BipartiteResult res = bipartite_solve(joint, scfg);
      for (std::size_t ri = 0; ri < cfg.restarts; ++ri) {
        const std::size_t cell = gi * cfg.restarts + ri;
        const RestartResult& r = res.restarts[ri];
        SweepRecord& rec = records[cell];
        rec.final_loss = r.final_loss;
        rec.iterations = r.trace.iterations;
        rec.terminated_by = r.trace.terminated_by;
        rec.wall_ms = r.wall_ms;
        if (traces) cell_traces[cell] = r.trace;
        encoders[cell] = r.encoder;
      }
    } else {
      VIConfig scfg;
      scfg.beta = g;
      scfg.max_iters = cfg.max_iters;
      scfg.loss_tol = cfg.loss_tol;
      scfg.restart_seeds = seeds;
      const VIResult res = vi_solve(joint, scfg);
      for (std::size_t ri = 0; ri < cfg.restarts; ++ri) {
        const std::size_t cell = gi * cfg.restarts + ri;
        const VIRestartResult& r = res.restarts[ri];
        SweepRecord& rec = records[cell];
        rec.final_loss = r.final_loss;
        rec.iterations = r.trace.iterations;
        rec.terminated_by = r.trace.terminated_by;
        rec.wall_ms = r.wall_ms;
        rec.param_count = r.params.param_count();
        if (traces) cell_traces[cell] = r.trace;
        encoders[cell] = project_encoder(r.params);
      }
    }
    for (std::size_t ri = 0; ri < cfg.restarts; ++ri) {
      const std::size_t cell = gi * cfg.restarts + ri;
      const InfoReport rep = info_report(joint, encoders[cell]);
      records[cell].mi_z_xv = rep.mi_z_xv;
      records[cell].cond_mi_sum = rep.cond_mi_sum;
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, cfg.threads);
  if (workers == 1) {
    for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) run_grid_value(gi);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t gi = next.fetch_add(1); gi < cfg.grid.size(); gi = next.fetch_add(1))
          run_grid_value(gi);
      });
    for (auto& t : pool) t.join();
  }

  // Accuracy for the per-grid-value best-loss record, one fresh labeled set
  // shared by the whole sweep.
  if (cfg.accuracy_samples > 0) {
    const LabeledDataset eval_set = sample_dataset(
        cfg.synth, cfg.accuracy_samples, derive_seed(cfg.base_seed, 0xACCu, 0xE7A1u),
        cfg.z_cardinality);
    for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
      std::size_t best = gi * cfg.restarts;
      for (std::size_t ri = 1; ri < cfg.restarts; ++ri) {
        const std::size_t c = gi * cfg.restarts + ri;
        const SweepRecord& a = records[c];
        const SweepRecord& b = records[best];
        if (a.final_loss < b.final_loss ||
            (a.final_loss == b.final_loss &&
             (a.iterations < b.iterations ||
              (a.iterations == b.iterations && a.seed < b.seed))))
          best = c;
      }
      records[best].accuracy =
          clustering_accuracy(encoders[best], eval_set, derive_seed(cfg.base_seed, 0xDECu, gi))
              .accuracy;
    }
  }

  if (traces) *traces = std::move(cell_traces);
  return records;
}

// Non-dominated staircase in (cond_mi_sum, mi_z_xv), both minimized: keep
// records no other record beats on both axes (one strictly), sorted by
// cond_mi_sum.
inline std::vector<SweepRecord> pareto_frontier(const std::vector<SweepRecord>& records) {
  if (records.empty()) throw std::invalid_argument("pareto_frontier: empty input");
  std::vector<const SweepRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const SweepRecord* a, const SweepRecord* b) {
    if (a->cond_mi_sum != b->cond_mi_sum) return a->cond_mi_sum < b->cond_mi_sum;
    return a->mi_z_xv < b->mi_z_xv;
  });

  std::vector<SweepRecord> out;
  double best_mi_before = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j]->cond_mi_sum == sorted[i]->cond_mi_sum) ++j;
    const double group_min_mi = sorted[i]->mi_z_xv;
    if (group_min_mi < best_mi_before) {
      for (std::size_t k = i; k < j && sorted[k]->mi_z_xv == group_min_mi; ++k)
        out.push_back(*sorted[k]);
      best_mi_before = group_min_mi;
    }
    i = j;
  }
  return out;
}

struct RuntimePoint {
  std::size_t z_cardinality = 0;
  double total_wall_ms = 0.0;
};

// Full-sweep solve time per |Z|, single-threaded: the sum of per-record
// solve wall times, excluding synthesis and reporting.
inline std::vector<RuntimePoint> runtime_profile(const SweepConfig& base,
                                                 const std::vector<std::size_t>& z_values) {
  std::vector<RuntimePoint> out;
  for (std::size_t z : z_values) {
    SweepConfig cfg = base;
    cfg.z_cardinality = z;
    cfg.threads = 1;
    cfg.accuracy_samples = 0;
    double total = 0.0;
    for (const SweepRecord& r : run_sweep(cfg)) total += r.wall_ms;
    out.push_back({z, total});
  }
  return out;
}

}  // namespace wyner
