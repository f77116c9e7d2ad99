// Command-line front door: synthesize joints, run single solves, run grid
// sweeps, evaluate clustering, and apply fusion rules. Every subcommand is
// deterministic given its flags and --seed (single-threaded, timing off);
// all sub-seeds derive from the one seed.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wyner/bipartite.hpp"
#include "wyner/eval.hpp"
#include "wyner/fusion.hpp"
#include "wyner/io.hpp"
#include "wyner/metrics.hpp"
#include "wyner/prob.hpp"
#include "wyner/sweep.hpp"
#include "wyner/synth.hpp"
#include "wyner/vi.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitConsistency = 4;

struct GenOpts {
  std::string spec_path, out_path, samples_out;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t z = 8;
};

int cmd_gen(const GenOpts& o) {
  const wyner::SynthSpec spec = wyner::synth_from_json(wyner::load_json_file(o.spec_path));
  const wyner::JointDist joint = wyner::build_joint(spec, o.z);
  wyner::write_text_file(o.out_path, wyner::to_json(joint).dump(2) + "\n");

  if (o.samples > 0) {
    const std::string path = o.samples_out.empty() ? o.out_path + ".samples.csv" : o.samples_out;
    wyner::write_text_file(
        path, wyner::dataset_to_csv(wyner::sample_dataset(spec, o.samples, o.seed, o.z)));
  }

  const double h_y = std::log2(static_cast<double>(spec.y_cardinality));
  const auto pair = wyner::marginalize(joint, {0}).size();  // |X_1|
  const std::vector<double> joint12 = wyner::marginalize(joint, {0, 1});
  const double mi12 = wyner::mutual_information(joint12, pair, joint.spec.cardinalities[1]);
  std::printf("gen: V=%zu |X_i|=%zu |Y|=%zu H(Y)=%.6f bits I(X1;X2)=%.6f bits\n",
              spec.num_sources, spec.x_cardinality(), spec.y_cardinality, h_y, mi12);

  wyner::json side{{"subcommand", "gen"},     {"spec", wyner::to_json(spec)},
                   {"out", o.out_path},       {"samples", o.samples},
                   {"samples_out", o.samples_out}, {"seed", o.seed},
                   {"z_cardinality", o.z}};
  wyner::write_text_file(o.out_path + ".config.json", side.dump(2) + "\n");
  return kExitOk;
}

struct SolveOpts {
  std::string joint_path, out_prefix = "solve";
  std::string solver = "bipartite";
  double kappa = -1.0;  // default 1/|Pi_V|
  double beta = 1.0;
  std::size_t z = 0;  // 0: keep the joint file's z_cardinality
  std::size_t max_iters = 10000;
  double tol = 1e-6;
  std::size_t restarts = 25;
  std::uint64_t seed = 0;
  std::string timing = "wall";
};

int cmd_solve(const SolveOpts& o) {
  wyner::JointDist joint = wyner::joint_from_json(wyner::load_json_file(o.joint_path));
  if (o.z > 0) joint.spec.z_cardinality = o.z;
  const auto bips = wyner::enumerate_bipartitions(joint.spec.num_sources);

  std::vector<wyner::TraceCsvRow> rows;
  wyner::Encoder best_encoder;
  double knob = 0.0;
  bool is_vi = false;

  if (o.solver == "bipartite") {
    wyner::BipartiteConfig cfg;
    if (o.kappa > 0.0) cfg.kappas = {o.kappa};
    cfg.max_iters = o.max_iters;
    cfg.loss_tol = o.tol;
    cfg.restarts = o.restarts;
    cfg.seed = o.seed;
    knob = cfg.resolve_kappas(bips.size()).front();
    const wyner::BipartiteResult res = wyner::bipartite_solve(joint, cfg);
    for (const auto& r : res.restarts) {
      const wyner::InfoReport rep = wyner::info_report(joint, r.encoder);
      rows.push_back({r.seed, knob, r.final_loss, r.trace.iterations, r.trace.terminated_by,
                      rep.mi_z_xv, rep.cond_mi_sum, o.timing == "wall" ? r.wall_ms : 0.0, {}});
    }
    best_encoder = res.best().encoder;
  } else if (o.solver == "vi") {
    wyner::VIConfig cfg;
    cfg.beta = o.beta;
    cfg.max_iters = o.max_iters;
    cfg.loss_tol = o.tol;
    cfg.restarts = o.restarts;
    cfg.seed = o.seed;
    knob = o.beta;
    is_vi = true;
    const wyner::VIResult res = wyner::vi_solve(joint, cfg);
    for (const auto& r : res.restarts) {
      const wyner::InfoReport rep = wyner::info_report(joint, wyner::project_encoder(r.params));
      rows.push_back({r.seed, knob, r.final_loss, r.trace.iterations, r.trace.terminated_by,
                      rep.mi_z_xv, rep.cond_mi_sum, o.timing == "wall" ? r.wall_ms : 0.0,
                      r.params.param_count()});
    }
    best_encoder = res.encoder;
    wyner::write_text_file(o.out_prefix + ".viparams.json",
                           wyner::to_json(res.best().params).dump(2) + "\n");
  } else {
    throw std::invalid_argument("solve: unknown solver '" + o.solver + "'");
  }

  wyner::write_text_file(o.out_prefix + ".encoder.json",
                         wyner::to_json(best_encoder).dump(2) + "\n");
  wyner::write_text_file(o.out_prefix + ".trace.csv", wyner::trace_rows_to_csv(rows, is_vi));
  const wyner::InfoReport best_rep = wyner::info_report(joint, best_encoder);
  wyner::write_text_file(o.out_prefix + ".report.json", wyner::to_json(best_rep).dump(2) + "\n");

  wyner::json side{{"subcommand", "solve"}, {"joint", o.joint_path},
                   {"solver", o.solver},    {"kappa", knob},
                   {"beta", o.beta},        {"z_cardinality", joint.spec.z_cardinality},
                   {"max_iters", o.max_iters}, {"tol", o.tol},
                   {"restarts", o.restarts},   {"seed", o.seed},
                   {"timing", o.timing},       {"out_prefix", o.out_prefix}};
  wyner::write_text_file(o.out_prefix + ".config.json", side.dump(2) + "\n");

  std::printf("solve: %s best mi_z_xv=%.6f cond_mi_sum=%.6f\n", o.solver.c_str(),
              best_rep.mi_z_xv, best_rep.cond_mi_sum);
  return kExitOk;
}

wyner::SweepConfig sweep_config_from_json(const wyner::json& j) {
  wyner::SweepConfig cfg;
  const std::string solver = wyner::detail::require_field<std::string>(j, "solver");
  if (solver == "bipartite")
    cfg.solver = wyner::SolverKind::bipartite;
  else if (solver == "vi")
    cfg.solver = wyner::SolverKind::vi;
  else
    throw std::invalid_argument("sweep config: unknown solver '" + solver + "'");
  cfg.synth = wyner::synth_from_json(j.at("synth"));
  if (j.contains("grid")) {
    if (j.at("grid").is_array())
      cfg.grid = j.at("grid").get<std::vector<double>>();
    else
      cfg.grid = wyner::geometric_grid(j.at("grid").value("min", 0.1),
                                       j.at("grid").value("max", 10.0),
                                       j.at("grid").value("points", std::size_t{20}));
  }
  cfg.restarts = j.value("restarts", std::size_t{25});
  cfg.z_cardinality = j.value("z_cardinality", std::size_t{8});
  cfg.base_seed = j.value("base_seed", std::uint64_t{0});
  cfg.max_iters = j.value("max_iters", std::size_t{10000});
  cfg.loss_tol = j.value("loss_tol", 1e-6);
  cfg.threads = j.value("threads", std::size_t{1});
  cfg.accuracy_samples = j.value("accuracy_samples", std::size_t{10000});
  cfg.validate();
  return cfg;
}

wyner::json sweep_config_to_json(const wyner::SweepConfig& cfg, const std::string& timing) {
  return wyner::json{{"solver", wyner::to_string(cfg.solver)},
                     {"synth", wyner::to_json(cfg.synth)},
                     {"grid", cfg.grid},
                     {"restarts", cfg.restarts},
                     {"z_cardinality", cfg.z_cardinality},
                     {"base_seed", cfg.base_seed},
                     {"max_iters", cfg.max_iters},
                     {"loss_tol", cfg.loss_tol},
                     {"threads", cfg.threads},
                     {"accuracy_samples", cfg.accuracy_samples},
                     {"timing_mode", timing}};
}

struct SweepOpts {
  std::string config_path, out_path = "sweep.csv";
  std::string solver, timing;
  long long z = -1, restarts = -1, threads = -1;
  long long seed = -1;
};

int cmd_sweep(const SweepOpts& o) {
  wyner::json j = wyner::load_json_file(o.config_path);
  if (!o.solver.empty()) j["solver"] = o.solver;
  if (o.z >= 0) j["z_cardinality"] = o.z;
  if (o.restarts >= 0) j["restarts"] = o.restarts;
  if (o.threads >= 0) j["threads"] = o.threads;
  if (o.seed >= 0) j["base_seed"] = o.seed;
  if (!o.timing.empty()) j["timing_mode"] = o.timing;
  const std::string timing = j.value("timing_mode", "wall");

  const wyner::SweepConfig cfg = sweep_config_from_json(j);
  std::vector<wyner::SweepRecord> records = wyner::run_sweep(cfg);
  if (timing == "none")
    for (auto& r : records) r.wall_ms = 0.0;
  wyner::write_text_file(o.out_path, wyner::sweep_to_csv(records));
  wyner::write_text_file(o.out_path + ".config.json",
                         sweep_config_to_json(cfg, timing).dump(2) + "\n");
  std::printf("sweep: %zu records -> %s\n", records.size(), o.out_path.c_str());
  return kExitOk;
}

struct ClusterOpts {
  std::string encoder_path, data_path, out_path = "cluster.json";
  std::uint64_t seed = 0;
  std::string decode = "sample";
};

int cmd_cluster_eval(const ClusterOpts& o) {
  const wyner::Encoder enc = wyner::encoder_from_json(wyner::load_json_file(o.encoder_path));
  std::ifstream in(o.data_path);
  if (!in) throw wyner::IoError("cannot open " + o.data_path);
  std::stringstream buf;
  buf << in.rdbuf();
  wyner::LabeledDataset data = wyner::dataset_from_csv(buf.str(), enc.spec.z_cardinality);
  if (data.spec.cardinalities.size() != enc.spec.cardinalities.size())
    throw std::invalid_argument("cluster-eval: dataset arity does not match encoder");
  data.spec.cardinalities = enc.spec.cardinalities;  // dataset may not hit every symbol

  const wyner::DecodeMode mode =
      o.decode == "argmax" ? wyner::DecodeMode::argmax : wyner::DecodeMode::sample;
  const wyner::ClusterResult result = wyner::clustering_accuracy(enc, data, o.seed, mode);
  wyner::write_text_file(o.out_path, wyner::to_json(result).dump(2) + "\n");

  wyner::json side{{"subcommand", "cluster-eval"}, {"encoder", o.encoder_path},
                   {"data", o.data_path},          {"seed", o.seed},
                   {"decode", o.decode},           {"out", o.out_path}};
  wyner::write_text_file(o.out_path + ".config.json", side.dump(2) + "\n");
  std::printf("cluster-eval: accuracy=%.6f\n", result.accuracy);
  return kExitOk;
}

struct FuseOpts {
  std::string request_path, out_path = "fused.json";
};

int cmd_fuse(const FuseOpts& o) {
  const wyner::json req = wyner::load_json_file(o.request_path);
  const std::string family = wyner::detail::require_field<std::string>(req, "family");
  const auto kappas = wyner::detail::require_field<std::vector<double>>(req, "kappas");
  if (!req.contains("experts") || !req.at("experts").is_array())
    throw std::invalid_argument("missing field: experts");

  wyner::json out;
  if (family == "gaussian") {
    std::vector<wyner::ExpertPair<wyner::GaussianExpert>> experts;
    for (const auto& pair : req.at("experts"))
      experts.push_back({wyner::gaussian_expert_from_json(pair.at("s")),
                         wyner::gaussian_expert_from_json(pair.at("sc"))});
    out = wyner::to_json(wyner::gaussian_fuse(experts, kappas));
  } else if (family == "categorical") {
    std::vector<wyner::ExpertPair<wyner::CategoricalExpert>> experts;
    for (const auto& pair : req.at("experts"))
      experts.push_back({wyner::categorical_expert_from_json(pair.at("s")),
                         wyner::categorical_expert_from_json(pair.at("sc"))});
    out = wyner::to_json(wyner::categorical_fuse(experts, kappas));
  } else {
    throw std::invalid_argument("fuse: unknown family '" + family + "'");
  }
  wyner::write_text_file(o.out_path, out.dump(2) + "\n");

  wyner::json side{{"subcommand", "fuse"}, {"request", o.request_path}, {"out", o.out_path}};
  wyner::write_text_file(o.out_path + ".config.json", side.dump(2) + "\n");
  std::printf("fuse: %s -> %s\n", family.c_str(), o.out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wyner common information solvers and evaluation harness"};
  app.require_subcommand(1);

  GenOpts gen;
  CLI::App* sub_gen = app.add_subcommand("gen", "synthesize a joint distribution");
  sub_gen->add_option("--spec", gen.spec_path, "SynthSpec JSON")->required();
  sub_gen->add_option("--out", gen.out_path, "output JointDist JSON")->required();
  sub_gen->add_option("--samples", gen.samples, "also draw a labeled sample CSV");
  sub_gen->add_option("--samples-out", gen.samples_out, "sample CSV path");
  sub_gen->add_option("--seed", gen.seed, "sampling seed");
  sub_gen->add_option("--z", gen.z, "z cardinality stored with the joint");

  SolveOpts solve;
  CLI::App* sub_solve = app.add_subcommand("solve", "run one solver on a joint");
  sub_solve->add_option("--joint", solve.joint_path, "JointDist JSON")->required();
  sub_solve->add_option("--solver", solve.solver, "bipartite|vi");
  sub_solve->add_option("--kappa", solve.kappa, "bipartite kappa (default 1/|Pi_V|)");
  sub_solve->add_option("--beta", solve.beta, "vi multiplier");
  sub_solve->add_option("--z", solve.z, "override z cardinality");
  sub_solve->add_option("--max-iters", solve.max_iters, "iteration cap");
  sub_solve->add_option("--tol", solve.tol, "loss-decrease tolerance");
  sub_solve->add_option("--restarts", solve.restarts, "random restarts");
  sub_solve->add_option("--seed", solve.seed, "seed");
  sub_solve->add_option("--out-prefix", solve.out_prefix, "output file prefix");
  sub_solve->add_option("--timing-mode", solve.timing, "wall|none");

  SweepOpts sweep;
  CLI::App* sub_sweep = app.add_subcommand("sweep", "hyperparameter grid sweep");
  sub_sweep->add_option("--config", sweep.config_path, "SweepConfig JSON")->required();
  sub_sweep->add_option("--out", sweep.out_path, "output CSV");
  sub_sweep->add_option("--solver", sweep.solver, "override solver");
  sub_sweep->add_option("--z", sweep.z, "override z cardinality");
  sub_sweep->add_option("--restarts", sweep.restarts, "override restarts");
  sub_sweep->add_option("--threads", sweep.threads, "sweep parallelism (default 1)");
  sub_sweep->add_option("--seed", sweep.seed, "override base seed");
  sub_sweep->add_option("--timing-mode", sweep.timing, "wall|none");

  ClusterOpts cluster;
  CLI::App* sub_cluster = app.add_subcommand("cluster-eval", "clustering accuracy of an encoder");
  sub_cluster->add_option("--encoder", cluster.encoder_path, "Encoder JSON")->required();
  sub_cluster->add_option("--data", cluster.data_path, "labeled dataset CSV")->required();
  sub_cluster->add_option("--seed", cluster.seed, "decode seed");
  sub_cluster->add_option("--decode", cluster.decode, "sample|argmax");
  sub_cluster->add_option("--out", cluster.out_path, "output JSON");

  FuseOpts fuse;
  CLI::App* sub_fuse = app.add_subcommand("fuse", "exponential-family fusion");
  sub_fuse->add_option("--request", fuse.request_path, "fusion request JSON")->required();
  sub_fuse->add_option("--out", fuse.out_path, "output JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (sub_gen->parsed()) return cmd_gen(gen);
    if (sub_solve->parsed()) return cmd_solve(solve);
    if (sub_sweep->parsed()) return cmd_sweep(sweep);
    if (sub_cluster->parsed()) return cmd_cluster_eval(cluster);
    if (sub_fuse->parsed()) return cmd_fuse(fuse);
  } catch (const wyner::ConsistencyError& e) {
    std::fprintf(stderr, "consistency error: %s\n", e.what());
    return kExitConsistency;
  } catch (const wyner::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
