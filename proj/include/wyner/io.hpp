#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wyner/fusion.hpp"
#include "wyner/metrics.hpp"
#include "wyner/prob.hpp"
#include "wyner/sweep.hpp"
#include "wyner/synth.hpp"
#include "wyner/vi.hpp"

namespace wyner {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

// Shortest round-trip decimal form; identical output for identical bits, so
// repeated runs produce byte-identical CSV.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

namespace detail {
template <typename T>
T require_field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw std::invalid_argument("missing field: " + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("field has wrong type: " + key);
  }
}
}  // namespace detail

// ---- JointDist / Encoder -------------------------------------------------

inline json to_json(const JointDist& joint) {
  return json{{"cardinalities", joint.spec.cardinalities},
              {"z_cardinality", joint.spec.z_cardinality},
              {"probs", joint.probs}};
}

inline JointDist joint_from_json(const json& j) {
  JointDist joint;
  joint.spec.cardinalities = detail::require_field<std::vector<std::size_t>>(j, "cardinalities");
  joint.spec.num_sources = joint.spec.cardinalities.size();
  joint.spec.z_cardinality = detail::require_field<std::size_t>(j, "z_cardinality");
  joint.probs = detail::require_field<std::vector<double>>(j, "probs");
  joint.validate();
  return joint;
}

inline json to_json(const Encoder& enc) {
  return json{{"cardinalities", enc.spec.cardinalities},
              {"z_cardinality", enc.spec.z_cardinality},
              {"rows", enc.rows}};
}

inline Encoder encoder_from_json(const json& j) {
  Encoder enc;
  enc.spec.cardinalities = detail::require_field<std::vector<std::size_t>>(j, "cardinalities");
  enc.spec.num_sources = enc.spec.cardinalities.size();
  enc.spec.z_cardinality = detail::require_field<std::size_t>(j, "z_cardinality");
  enc.rows = detail::require_field<std::vector<double>>(j, "rows");
  enc.validate();
  return enc;
}

// ---- SynthSpec -----------------------------------------------------------

inline json to_json(const SynthSpec& spec) {
  return json{{"y_cardinality", spec.y_cardinality},
              {"block", spec.block},
              {"shift", spec.shift},
              {"num_sources", spec.num_sources}};
}

inline SynthSpec synth_from_json(const json& j) {
  SynthSpec spec;
  spec.y_cardinality = detail::require_field<std::size_t>(j, "y_cardinality");
  spec.block = detail::require_field<std::vector<double>>(j, "block");
  spec.shift = detail::require_field<std::vector<double>>(j, "shift");
  spec.num_sources = detail::require_field<std::size_t>(j, "num_sources");
  spec.validate();
  return spec;
}

// ---- VIParams ------------------------------------------------------------

inline json to_json(const VIParams& p) {
  return json{{"z_prior", p.z_prior},
              {"x_cardinalities", p.x_cardinalities},
              {"source_conds", p.source_conds}};
}

inline VIParams vi_params_from_json(const json& j) {
  VIParams p;
  p.z_prior = detail::require_field<std::vector<double>>(j, "z_prior");
  p.x_cardinalities = detail::require_field<std::vector<std::size_t>>(j, "x_cardinalities");
  p.source_conds = detail::require_field<std::vector<std::vector<double>>>(j, "source_conds");
  p.validate();
  return p;
}

// ---- InfoReport / ClusterResult -------------------------------------------

inline json to_json(const InfoReport& rep) {
  json parts = json::array();
  for (const auto& p : rep.parts)
    parts.push_back(json{{"s", p.bipartition.s},
                         {"s_complement", p.bipartition.s_complement},
                         {"mi_s", p.mi_s},
                         {"mi_sc", p.mi_sc},
                         {"cond_mi", p.cond_mi},
                         {"mi_pair", p.mi_pair}});
  return json{{"mi_z_xv", rep.mi_z_xv}, {"cond_mi_sum", rep.cond_mi_sum}, {"parts", parts}};
}

inline json to_json(const ClusterResult& r) {
  std::vector<long long> perm;
  for (std::size_t p : r.permutation)
    perm.push_back(p == static_cast<std::size_t>(-1) ? -1 : static_cast<long long>(p));
  return json{{"accuracy", r.accuracy}, {"permutation", perm}, {"confusion", r.confusion}};
}

// ---- Experts ---------------------------------------------------------------

inline json to_json(const GaussianExpert& e) {
  std::vector<std::vector<double>> cov(e.dim(), std::vector<double>(e.dim()));
  for (std::size_t i = 0; i < e.dim(); ++i)
    for (std::size_t j = 0; j < e.dim(); ++j) cov[i][j] = e.covariance(i, j);
  return json{{"mean", e.mean}, {"cov", cov}};
}

inline GaussianExpert gaussian_expert_from_json(const json& j) {
  GaussianExpert e;
  e.mean = detail::require_field<std::vector<double>>(j, "mean");
  const auto cov = detail::require_field<std::vector<std::vector<double>>>(j, "cov");
  e.covariance = Mat(e.mean.size());
  if (cov.size() != e.mean.size()) throw std::invalid_argument("cov shape mismatch");
  for (std::size_t i = 0; i < cov.size(); ++i) {
    if (cov[i].size() != e.mean.size()) throw std::invalid_argument("cov shape mismatch");
    for (std::size_t jj = 0; jj < cov[i].size(); ++jj) e.covariance(i, jj) = cov[i][jj];
  }
  e.validate();
  return e;
}

inline json to_json(const CategoricalExpert& e) { return json{{"log_probs", e.log_probs}}; }

inline CategoricalExpert categorical_expert_from_json(const json& j) {
  CategoricalExpert e;
  e.log_probs = detail::require_field<std::vector<double>>(j, "log_probs");
  e.validate();
  return e;
}

// ---- LabeledDataset CSV ----------------------------------------------------

inline std::string dataset_to_csv(const LabeledDataset& data) {
  std::string out;
  for (std::size_t i = 0; i < data.spec.num_sources; ++i)
    out += "x" + std::to_string(i + 1) + ",";
  out += "y\n";
  for (const auto& s : data.samples) {
    for (std::size_t x : s.x) out += std::to_string(x) + ",";
    out += std::to_string(s.y) + "\n";
  }
  return out;
}

inline LabeledDataset dataset_from_csv(const std::string& text, std::size_t z_cardinality = 1) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset CSV: empty file");
  std::size_t num_sources = 0;
  for (char c : line)
    if (c == ',') ++num_sources;
  if (num_sources < 2) throw std::invalid_argument("dataset CSV: need at least 2 sources");

  LabeledDataset data;
  std::vector<std::size_t> max_sym(num_sources, 1);
  std::size_t max_y = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    LabeledSample s;
    for (std::size_t i = 0; i < num_sources; ++i) {
      if (!std::getline(row, cell, ',')) throw std::invalid_argument("dataset CSV: short row");
      s.x.push_back(std::stoull(cell));
      max_sym[i] = std::max(max_sym[i], s.x.back() + 1);
    }
    if (!std::getline(row, cell, ',')) throw std::invalid_argument("dataset CSV: missing label");
    s.y = std::stoull(cell);
    max_y = std::max(max_y, s.y + 1);
    data.samples.push_back(std::move(s));
  }
  data.spec = SourceSpec{num_sources,
                         std::vector<std::size_t>(max_sym.begin(), max_sym.end()),
                         std::max<std::size_t>(z_cardinality, 1)};
  return data;
}

// ---- Sweep / trace CSV -----------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "solver,grid_value,seed,final_loss,iterations,terminated_by,wall_ms,mi_z_xv,cond_mi_sum,"
    "accuracy,param_count";

inline std::string sweep_to_csv(const std::vector<SweepRecord>& records) {
  std::string out = kSweepCsvHeader;
  out += "\n";
  for (const SweepRecord& r : records) {
    out += to_string(r.solver);
    out += ",";
    out += format_double(r.grid_value) + "," + std::to_string(r.seed) + ",";
    out += format_double(r.final_loss) + "," + std::to_string(r.iterations) + ",";
    out += to_string(r.terminated_by);
    out += "," + format_double(r.wall_ms) + "," + format_double(r.mi_z_xv) + "," +
           format_double(r.cond_mi_sum) + ",";
    if (r.accuracy) out += format_double(*r.accuracy);
    out += ",";
    if (r.param_count) out += std::to_string(*r.param_count);
    out += "\n";
  }
  return out;
}

// Per-restart rows for a single solve: seed, knob value, loss, termination
// bookkeeping, metrics, timing. VI rows append param_count.
struct TraceCsvRow {
  std::uint64_t seed = 0;
  double knob = 0.0;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  Termination terminated_by = Termination::max_iters;
  double mi_z_xv = 0.0;
  double cond_mi_sum = 0.0;
  double wall_ms = 0.0;
  std::optional<std::size_t> param_count;
};

inline std::string trace_rows_to_csv(const std::vector<TraceCsvRow>& rows, bool with_params) {
  std::string out = "seed,kappa,final_loss,iterations,terminated_by,mi_z_xv,cond_mi_sum,wall_ms";
  if (with_params) out += ",param_count";
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + "," + format_double(r.knob) + "," +
           format_double(r.final_loss) + "," + std::to_string(r.iterations) + ",";
    out += to_string(r.terminated_by);
    out += "," + format_double(r.mi_z_xv) + "," + format_double(r.cond_mi_sum) + "," +
           format_double(r.wall_ms);
    if (with_params) out += "," + (r.param_count ? std::to_string(*r.param_count) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace wyner
