#include <doctest.h>

#include <cmath>

#include "wyner/sweep.hpp"

using namespace wyner;

namespace {

const SynthSpec kInvertible{8, {0.5, 0.5}, {0.0, 0.0}, 2};

SweepConfig small_config(SolverKind solver, std::uint64_t seed) {
  SweepConfig cfg;
  cfg.solver = solver;
  cfg.synth = kInvertible;
  cfg.grid = geometric_grid(0.5, 5.0, 3);
  cfg.restarts = 2;
  cfg.base_seed = seed;
  cfg.accuracy_samples = 500;
  return cfg;
}

}  // namespace

TEST_CASE("geometric_grid: defaults and endpoints") {
  const auto grid = geometric_grid(0.1, 10.0, 20);
  REQUIRE(grid.size() == 20);
  CHECK(grid.front() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(10.0).epsilon(1e-12));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] > grid[i - 1]);
    // constant ratio
    CHECK(grid[i] / grid[i - 1] ==
          doctest::Approx(std::pow(100.0, 1.0 / 19.0)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(geometric_grid(0.0, 1.0, 5), std::invalid_argument);
}

TEST_CASE("grid_to_kappa mapping") {
  CHECK(grid_to_kappa(1.0, 1) == doctest::Approx(0.5));
  CHECK(grid_to_kappa(10.0, 1) == doctest::Approx(10.0 / 11.0));
  CHECK(grid_to_kappa(1.0, 3) == doctest::Approx(0.25));
}

TEST_CASE("run_sweep: record count, seeds, determinism") {
  SweepConfig cfg = small_config(SolverKind::bipartite, 77);
  const auto records = run_sweep(cfg);
  REQUIRE(records.size() == 6);  // 3 grid values x 2 restarts

  // single-cell config
  SweepConfig one = cfg;
  one.grid = {1.0};
  one.restarts = 1;
  CHECK(run_sweep(one).size() == 1);

  // per-record seeds follow the (grid index, restart index) hash
  for (std::size_t gi = 0; gi < 3; ++gi)
    for (std::size_t ri = 0; ri < 2; ++ri)
      CHECK(records[gi * 2 + ri].seed == derive_seed(77, gi, ri));

  // bit-identical reruns
  const auto again = run_sweep(cfg);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].final_loss == again[i].final_loss);
    CHECK(records[i].iterations == again[i].iterations);
    CHECK(records[i].mi_z_xv == again[i].mi_z_xv);
    CHECK(records[i].cond_mi_sum == again[i].cond_mi_sum);
    CHECK(records[i].accuracy.has_value() == again[i].accuracy.has_value());
    if (records[i].accuracy) CHECK(*records[i].accuracy == *again[i].accuracy);
  }
}

TEST_CASE("run_sweep: thread count does not change the record set") {
  SweepConfig cfg = small_config(SolverKind::bipartite, 13);
  const auto solo = run_sweep(cfg);
  cfg.threads = 2;
  const auto par = run_sweep(cfg);
  REQUIRE(solo.size() == par.size());
  for (std::size_t i = 0; i < solo.size(); ++i) {
    CHECK(solo[i].seed == par[i].seed);
    CHECK(solo[i].final_loss == par[i].final_loss);
    CHECK(solo[i].mi_z_xv == par[i].mi_z_xv);
  }
}

TEST_CASE("run_sweep: vi records carry the parameter count") {
  SweepConfig cfg = small_config(SolverKind::vi, 5);
  cfg.accuracy_samples = 0;
  const auto records = run_sweep(cfg);
  for (const auto& r : records) {
    REQUIRE(r.param_count.has_value());
    CHECK(*r.param_count == 256);  // |Z| * (16 + 16)
    CHECK(r.iterations <= cfg.max_iters);
    CHECK(r.wall_ms >= 0.0);
  }
}

TEST_CASE("run_sweep: accuracy is attached to per-grid best-loss records only") {
  SweepConfig cfg = small_config(SolverKind::bipartite, 3);
  const auto records = run_sweep(cfg);
  for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    std::size_t with_acc = 0, best = gi * 2;
    for (std::size_t ri = 0; ri < 2; ++ri) {
      const std::size_t c = gi * 2 + ri;
      if (records[c].accuracy) ++with_acc;
      if (records[c].final_loss < records[best].final_loss) best = c;
    }
    CHECK(with_acc == 1);
    CHECK(records[best].accuracy.has_value());
  }
}

TEST_CASE("run_sweep: bipartite traces are non-increasing") {
  SweepConfig cfg = small_config(SolverKind::bipartite, 29);
  cfg.accuracy_samples = 0;
  std::vector<SolveTrace> traces;
  run_sweep(cfg, &traces);
  REQUIRE(traces.size() == 6);
  for (const auto& t : traces) {
    REQUIRE(!t.losses.empty());
    for (std::size_t k = 1; k < t.losses.size(); ++k)
      CHECK(t.losses[k] <= t.losses[k - 1] + 1e-12);
  }
}

TEST_CASE("pareto_frontier: degenerate and domination cases") {
  SweepRecord a;
  a.cond_mi_sum = 0.0;
  a.mi_z_xv = 3.0;
  SweepRecord b = a;
  b.mi_z_xv = 3.2;

  const auto single = pareto_frontier({a});
  REQUIRE(single.size() == 1);

  const auto two = pareto_frontier({b, a});
  REQUIRE(two.size() == 1);
  CHECK(two[0].mi_z_xv == 3.0);

  // exact duplicates: neither dominates, both kept
  const auto dup = pareto_frontier({a, a});
  CHECK(dup.size() == 2);

  CHECK_THROWS_AS(pareto_frontier({}), std::invalid_argument);
}

TEST_CASE("pareto_frontier: matches the quadratic domination oracle") {
  SplitMix64 rng(404);
  std::vector<SweepRecord> records(50);
  for (auto& r : records) {
    r.cond_mi_sum = std::round(rng.next_unit() * 20.0) / 10.0;  // ties likely
    r.mi_z_xv = std::round(rng.next_unit() * 30.0) / 10.0;
  }
  const auto frontier = pareto_frontier(records);

  // oracle: r survives iff no other record dominates it
  std::vector<SweepRecord> oracle;
  for (const auto& r : records) {
    bool dominated = false;
    for (const auto& o : records) {
      const bool leq = o.cond_mi_sum <= r.cond_mi_sum && o.mi_z_xv <= r.mi_z_xv;
      const bool strict = o.cond_mi_sum < r.cond_mi_sum || o.mi_z_xv < r.mi_z_xv;
      if (leq && strict) {
        dominated = true;
        break;
      }
    }
    if (!dominated) oracle.push_back(r);
  }
  REQUIRE(frontier.size() == oracle.size());
  // same multiset of points, and frontier sorted by cond_mi_sum
  auto key = [](const SweepRecord& r) { return std::pair(r.cond_mi_sum, r.mi_z_xv); };
  std::vector<std::pair<double, double>> fk, ok;
  for (const auto& r : frontier) fk.push_back(key(r));
  for (const auto& r : oracle) ok.push_back(key(r));
  std::sort(ok.begin(), ok.end());
  CHECK(std::is_sorted(fk.begin(), fk.end(),
                       [](auto& x, auto& y) { return x.first < y.first; }));
  std::sort(fk.begin(), fk.end());
  CHECK(fk == ok);

  // definitional check: no frontier record dominated by any input record
  for (const auto& f : frontier)
    for (const auto& o : records) {
      const bool leq = o.cond_mi_sum <= f.cond_mi_sum && o.mi_z_xv <= f.mi_z_xv;
      const bool strict = o.cond_mi_sum < f.cond_mi_sum || o.mi_z_xv < f.mi_z_xv;
      CHECK(!(leq && strict));
    }
}

TEST_CASE("runtime_profile: reports one point per requested cardinality") {
  SweepConfig cfg = small_config(SolverKind::bipartite, 8);
  cfg.grid = {1.0, 4.0};
  cfg.restarts = 2;
  const auto profile = runtime_profile(cfg, {1, 2});
  REQUIRE(profile.size() == 2);
  CHECK(profile[0].z_cardinality == 1);
  CHECK(profile[1].z_cardinality == 2);
  for (const auto& p : profile) CHECK(p.total_wall_ms >= 0.0);
}
