#include "lysim/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lysim/errors.hpp"

namespace lysim {
namespace {

class Collector {
 public:
  explicit Collector(std::vector<ConfigIssue>& issues) : issues_(issues) {}

  void add(const std::string& path, const std::string& message, const YAML::Node& at = {}) {
    ConfigIssue issue{path, message, std::nullopt, std::nullopt};
    if (at.IsDefined()) {
      const auto mark = at.Mark();
      if (!mark.is_null()) {
        issue.line = mark.line + 1;
        issue.column = mark.column + 1;
      }
    }
    issues_.push_back(std::move(issue));
  }

  std::size_t count() const { return issues_.size(); }

 private:
  std::vector<ConfigIssue>& issues_;
};

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string indexed(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

void check_keys(const YAML::Node& node, const std::string& path,
                std::initializer_list<const char*> allowed, Collector& c) {
  if (!node.IsMap()) return;
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) c.add(join(path, key), "unknown key", kv.first);
  }
}

bool expect_map(const YAML::Node& node, const std::string& path, Collector& c) {
  if (!node.IsDefined() || node.IsNull()) return false;
  if (!node.IsMap()) {
    c.add(path, "expected a mapping", node);
    return false;
  }
  return true;
}

template <class T>
std::optional<T> read_scalar(const YAML::Node& node, const std::string& path, const char* what,
                             Collector& c) {
  if (!node.IsScalar()) {
    c.add(path, std::string("expected ") + what, node);
    return std::nullopt;
  }
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    c.add(path, std::string("expected ") + what + ", got '" + node.Scalar() + "'", node);
    return std::nullopt;
  }
}

std::optional<double> read_real(const YAML::Node& node, const std::string& path, Collector& c) {
  auto v = read_scalar<double>(node, path, "a number", c);
  if (v && !std::isfinite(*v)) {
    c.add(path, "must be finite", node);
    return std::nullopt;
  }
  return v;
}

std::optional<std::uint64_t> read_count(const YAML::Node& node, const std::string& path,
                                        Collector& c) {
  if (node.IsScalar() && !node.Scalar().empty() && node.Scalar().front() == '-') {
    c.add(path, "must be a non-negative integer", node);
    return std::nullopt;
  }
  return read_scalar<std::uint64_t>(node, path, "a non-negative integer", c);
}

std::optional<OffspringLaw> read_law(const YAML::Node& node, const std::string& path,
                                     Collector& c) {
  std::vector<double> probs;
  bool ok = true;
  if (node.IsSequence()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      const auto v = read_real(node[i], indexed(path, i), c);
      if (v) {
        probs.push_back(*v);
      } else {
        ok = false;
      }
    }
  } else if (node.IsMap()) {
    std::map<std::uint64_t, double> entries;
    for (const auto& kv : node) {
      const auto k = read_count(kv.first, path + " key", c);
      const auto v = k ? read_real(kv.second, path + "[" + std::to_string(*k) + "]", c)
                       : std::nullopt;
      if (!k || !v) {
        ok = false;
        continue;
      }
      if (*k > 100'000) {
        c.add(path, "offspring index too large", kv.first);
        ok = false;
        continue;
      }
      entries[*k] += *v;
    }
    if (!entries.empty()) {
      probs.assign(entries.rbegin()->first + 1, 0.0);
      for (const auto& [k, v] : entries) probs[k] = v;
    }
  } else {
    c.add(path, "expected an offspring law (list of probabilities or index: probability map)",
          node);
    return std::nullopt;
  }
  if (!ok) return std::nullopt;
  try {
    return OffspringLaw(std::move(probs));
  } catch (const InvalidLaw& e) {
    c.add(path, std::string("invalid offspring law: ") + e.what(), node);
    return std::nullopt;
  }
}

std::optional<std::vector<double>> read_real_grid(const YAML::Node& node, const std::string& path,
                                                  Collector& c) {
  std::vector<double> out;
  if (node.IsSequence()) {
    bool ok = true;
    for (std::size_t i = 0; i < node.size(); ++i) {
      const auto v = read_real(node[i], indexed(path, i), c);
      if (v) {
        out.push_back(*v);
      } else {
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
  } else if (node.IsMap()) {
    check_keys(node, path, {"from", "to", "step"}, c);
    const auto from = read_real(node["from"], join(path, "from"), c);
    const auto to = read_real(node["to"], join(path, "to"), c);
    const auto step = read_real(node["step"], join(path, "step"), c);
    if (!from || !to || !step) return std::nullopt;
    if (!(*step > 0.0) || *to < *from) {
      c.add(path, "range needs step > 0 and to >= from", node);
      return std::nullopt;
    }
    // Tolerate the rounding in (to - from) / step so the endpoint is kept.
    const double span = (*to - *from) / *step;
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    if (count > 100'000) {
      c.add(path, "range has too many points", node);
      return std::nullopt;
    }
    for (std::size_t i = 0; i < count; ++i) out.push_back(*from + static_cast<double>(i) * *step);
  } else {
    c.add(path, "expected a list or a from/to/step range", node);
    return std::nullopt;
  }
  if (out.empty()) {
    c.add(path, "sweep grid is empty", node);
    return std::nullopt;
  }
  return out;
}

std::optional<EstimatorKind> estimator_from_name(const std::string& name) {
  if (name == "zeta") return EstimatorKind::Zeta;
  if (name == "eta") return EstimatorKind::Eta;
  if (name == "t_union") return EstimatorKind::TUnion;
  return std::nullopt;
}

void parse_model(const YAML::Node& root, ExperimentConfig& cfg, Collector& c) {
  const auto model = root["model"];
  const auto sweep = root["sweep"];
  const bool has_model = expect_map(model, "model", c);
  const bool has_sweep = expect_map(sweep, "sweep", c);
  if (has_model) check_keys(model, "model", {"p", "gamma", "lambda"}, c);
  if (has_sweep) check_keys(sweep, "sweep", {"p", "gamma", "lambda"}, c);

  auto law_axis = [&](const char* key, std::vector<OffspringLaw>& axis) {
    if (has_sweep && sweep[key].IsDefined()) {
      const auto node = sweep[key];
      const std::string path = join("sweep", key);
      if (!node.IsSequence() || node.size() == 0) {
        c.add(path, "expected a non-empty list of offspring laws", node);
        return;
      }
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (auto law = read_law(node[i], indexed(path, i), c)) axis.push_back(std::move(*law));
      }
      if (has_model && model[key].IsDefined()) c.add(join("model", key), "also swept", model[key]);
      return;
    }
    if (has_model && model[key].IsDefined()) {
      if (auto law = read_law(model[key], join("model", key), c)) axis.push_back(std::move(*law));
      return;
    }
    c.add(join("model", key), "required");
  };
  law_axis("p", cfg.p_grid);
  law_axis("gamma", cfg.gamma_grid);

  YAML::Node lambda_node;
  bool lambda_swept = false;
  if (has_sweep && sweep["lambda"].IsDefined()) {
    if (auto grid = read_real_grid(sweep["lambda"], "sweep.lambda", c)) cfg.lambda_grid = *grid;
    lambda_node.reset(sweep["lambda"]);
    lambda_swept = true;
    if (has_model && model["lambda"].IsDefined()) {
      c.add("model.lambda", "also swept", model["lambda"]);
    }
  } else if (has_model && model["lambda"].IsDefined()) {
    if (auto v = read_real(model["lambda"], "model.lambda", c)) cfg.lambda_grid = {*v};
    lambda_node.reset(model["lambda"]);
  } else {
    c.add("model.lambda", "required");
  }
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
    if (cfg.lambda_grid[i] < 0.0) {
      c.add(lambda_swept ? indexed("sweep.lambda", i) : "model.lambda",
            "lambda must be >= 0", lambda_node);
    }
  }
}

void parse_rest(const YAML::Node& root, ExperimentConfig& cfg, Collector& c) {
  if (const auto n = root["initial"]; expect_map(n, "initial", c)) {
    check_keys(n, "initial", {"x", "y"}, c);
    if (n["x"].IsDefined()) {
      if (auto v = read_count(n["x"], "initial.x", c)) cfg.initial.x = *v;
    }
    if (n["y"].IsDefined()) {
      if (auto v = read_count(n["y"], "initial.y", c)) cfg.initial.y = *v;
    }
  }
  if (const auto n = root["stop"]; expect_map(n, "stop", c)) {
    check_keys(n, "stop", {"horizon", "pop_cap"}, c);
    if (n["horizon"].IsDefined()) {
      if (auto v = read_real(n["horizon"], "stop.horizon", c)) {
        if (*v > 0.0) {
          cfg.knobs.horizon = *v;
        } else {
          c.add("stop.horizon", "must be > 0", n["horizon"]);
        }
      }
    }
    if (n["pop_cap"].IsDefined()) {
      if (auto v = read_count(n["pop_cap"], "stop.pop_cap", c)) cfg.knobs.pop_cap = *v;
    }
  }
  if (cfg.knobs.pop_cap < cfg.initial.x + cfg.initial.y) {
    c.add("stop.pop_cap", "must be at least initial.x + initial.y");
  }

  if (const auto n = root["estimators"]; n.IsDefined()) {
    if (!n.IsSequence() || n.size() == 0) {
      c.add("estimators", "expected a non-empty list from {zeta, eta, t_union}", n);
    } else {
      cfg.estimators.clear();
      for (std::size_t i = 0; i < n.size(); ++i) {
        const auto name = read_scalar<std::string>(n[i], indexed("estimators", i), "a name", c);
        if (!name) continue;
        const auto kind = estimator_from_name(*name);
        if (!kind) {
          c.add(indexed("estimators", i), "unknown estimator '" + *name + "'", n[i]);
        } else if (std::find(cfg.estimators.begin(), cfg.estimators.end(), *kind) ==
                   cfg.estimators.end()) {
          cfg.estimators.push_back(*kind);
        }
      }
    }
  }

  if (const auto n = root["knobs"]; expect_map(n, "knobs", c)) {
    check_keys(n, "knobs", {"threshold", "n", "seed", "cell_seed", "sensitivity_subsample"}, c);
    if (n["threshold"].IsDefined()) {
      if (auto v = read_count(n["threshold"], "knobs.threshold", c)) {
        if (*v == 0) c.add("knobs.threshold", "must be >= 1", n["threshold"]);
        cfg.knobs.threshold = *v;
      }
    }
    if (n["n"].IsDefined()) {
      if (auto v = read_count(n["n"], "knobs.n", c)) {
        if (*v < 100) c.add("knobs.n", "must be >= 100", n["n"]);
        cfg.knobs.n = *v;
      }
    }
    if (n["seed"].IsDefined()) {
      if (auto v = read_count(n["seed"], "knobs.seed", c)) cfg.knobs.seed = *v;
    }
    if (n["cell_seed"].IsDefined()) {
      if (auto v = read_count(n["cell_seed"], "knobs.cell_seed", c)) cfg.cell_seed = *v;
    }
    if (n["sensitivity_subsample"].IsDefined()) {
      if (auto v = read_count(n["sensitivity_subsample"], "knobs.sensitivity_subsample", c)) {
        cfg.knobs.sensitivity_subsample = *v;
      }
    }
  }

  if (const auto n = root["tail"]; expect_map(n, "tail", c)) {
    check_keys(n, "tail", {"t_min", "t_max", "min_at_risk", "points"}, c);
    if (n["t_min"].IsDefined()) {
      if (auto v = read_real(n["t_min"], "tail.t_min", c)) cfg.tail.t_min = *v;
    }
    if (n["t_max"].IsDefined()) {
      if (auto v = read_real(n["t_max"], "tail.t_max", c)) cfg.tail.t_max = *v;
    }
    if (n["min_at_risk"].IsDefined()) {
      if (auto v = read_count(n["min_at_risk"], "tail.min_at_risk", c)) cfg.tail.min_at_risk = *v;
    }
    if (n["points"].IsDefined()) {
      if (auto v = read_count(n["points"], "tail.points", c)) {
        if (*v < 2) c.add("tail.points", "must be >= 2", n["points"]);
        cfg.tail.points = *v;
      }
    }
    if (cfg.tail.t_max && !(*cfg.tail.t_max > cfg.tail.t_min)) {
      c.add("tail.t_max", "must exceed tail.t_min", n["t_max"]);
    }
  }

  if (const auto n = root["output"]; expect_map(n, "output", c)) {
    check_keys(n, "output", {"dir", "trajectories"}, c);
    if (n["dir"].IsDefined()) {
      if (auto v = read_scalar<std::string>(n["dir"], "output.dir", "a path", c)) {
        cfg.output_dir = *v;
      }
    }
    if (n["trajectories"].IsDefined()) {
      if (auto v = read_count(n["trajectories"], "output.trajectories", c)) {
        cfg.trajectory_dumps = *v;
      }
    }
  }

  if (const auto n = root["parallel"]; expect_map(n, "parallel", c)) {
    check_keys(n, "parallel", {"workers", "deterministic", "batch_size"}, c);
    if (n["workers"].IsDefined()) {
      if (auto v = read_count(n["workers"], "parallel.workers", c)) {
        cfg.knobs.parallel.workers = static_cast<unsigned>(*v);
      }
    }
    if (n["deterministic"].IsDefined()) {
      if (auto v = read_scalar<bool>(n["deterministic"], "parallel.deterministic", "true or false",
                                     c)) {
        cfg.knobs.parallel.deterministic = *v;
      }
    }
    if (n["batch_size"].IsDefined()) {
      if (auto v = read_count(n["batch_size"], "parallel.batch_size", c)) {
        if (*v == 0) c.add("parallel.batch_size", "must be >= 1", n["batch_size"]);
        cfg.knobs.parallel.batch_size = *v;
      }
    }
  }
}

void check_grid(const ExperimentConfig& cfg, Collector& c) {
  for (std::size_t i = 0; i < cfg.p_grid.size(); ++i) {
    if (cfg.p_grid[i][1] == 1.0) {
      c.add(cfg.p_grid.size() > 1 ? indexed("sweep.p", i) : "model.p",
            "p1 = 1 gives a frozen healthy population");
    }
  }
}

void emit_law(YAML::Emitter& out, const OffspringLaw& law) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const double v : law.probs()) out << format_double(v);
  out << YAML::EndSeq;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Zeta: return "zeta";
    case EstimatorKind::Eta: return "eta";
    case EstimatorKind::TUnion: return "t_union";
  }
  return "?";
}

std::vector<GridPoint> ExperimentConfig::grid() const {
  std::vector<GridPoint> out;
  out.reserve(grid_size());
  for (const auto& p : p_grid) {
    for (const auto& g : gamma_grid) {
      for (const double l : lambda_grid) out.push_back({out.size(), ModelParams(p, g, l)});
    }
  }
  return out;
}

std::string ConfigIssue::describe() const {
  std::string s;
  if (line) s += "line " + std::to_string(*line) + ", column " + std::to_string(*column) + ": ";
  if (!path.empty()) s += path + ": ";
  return s + message;
}

ConfigResult parse_config_text(const std::string& text) {
  ConfigResult result;
  Collector c(result.issues);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    result.issues.push_back({"", e.msg, e.mark.line + 1, e.mark.column + 1});
    return result;
  }
  if (!root.IsMap()) {
    c.add("", "top level must be a mapping", root);
    return result;
  }
  check_keys(root, "",
             {"schema_version", "model", "sweep", "initial", "stop", "estimators", "knobs", "tail",
              "output", "parallel"},
             c);

  ExperimentConfig cfg;
  if (const auto n = root["schema_version"]; n.IsDefined()) {
    if (auto v = read_scalar<int>(n, "schema_version", "an integer", c)) {
      if (*v != kSchemaVersion) {
        c.add("schema_version", "unsupported version " + std::to_string(*v) + " (expected " +
                                    std::to_string(kSchemaVersion) + ")",
              n);
      }
    }
  } else {
    c.add("schema_version", "required");
  }
  try {
    parse_model(root, cfg, c);
    parse_rest(root, cfg, c);
    check_grid(cfg, c);
  } catch (const YAML::Exception& e) {
    result.issues.push_back({"", e.msg, e.mark.line + 1, e.mark.column + 1});
  }
  if (result.issues.empty()) result.config = std::move(cfg);
  return result;
}

ConfigResult parse_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    ConfigResult result;
    result.issues.push_back({"", "cannot open " + file.string(), std::nullopt, std::nullopt});
    return result;
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << cfg.schema_version;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  if (cfg.p_grid.size() == 1) {
    out << YAML::Key << "p" << YAML::Value;
    emit_law(out, cfg.p_grid.front());
  }
  if (cfg.gamma_grid.size() == 1) {
    out << YAML::Key << "gamma" << YAML::Value;
    emit_law(out, cfg.gamma_grid.front());
  }
  if (cfg.lambda_grid.size() == 1) {
    out << YAML::Key << "lambda" << YAML::Value << format_double(cfg.lambda_grid.front());
  }
  out << YAML::EndMap;

  if (cfg.p_grid.size() > 1 || cfg.gamma_grid.size() > 1 || cfg.lambda_grid.size() > 1) {
    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    if (cfg.p_grid.size() > 1) {
      out << YAML::Key << "p" << YAML::Value << YAML::BeginSeq;
      for (const auto& law : cfg.p_grid) emit_law(out, law);
      out << YAML::EndSeq;
    }
    if (cfg.gamma_grid.size() > 1) {
      out << YAML::Key << "gamma" << YAML::Value << YAML::BeginSeq;
      for (const auto& law : cfg.gamma_grid) emit_law(out, law);
      out << YAML::EndSeq;
    }
    if (cfg.lambda_grid.size() > 1) {
      out << YAML::Key << "lambda" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (const double v : cfg.lambda_grid) out << format_double(v);
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }

  out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "x" << YAML::Value << cfg.initial.x;
  out << YAML::Key << "y" << YAML::Value << cfg.initial.y;
  out << YAML::EndMap;

  out << YAML::Key << "stop" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "horizon" << YAML::Value << format_double(cfg.knobs.horizon);
  out << YAML::Key << "pop_cap" << YAML::Value << cfg.knobs.pop_cap;
  out << YAML::EndMap;

  out << YAML::Key << "estimators" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto e : cfg.estimators) out << std::string(to_string(e));
  out << YAML::EndSeq;

  out << YAML::Key << "knobs" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "threshold" << YAML::Value << cfg.knobs.threshold;
  out << YAML::Key << "n" << YAML::Value << cfg.knobs.n;
  out << YAML::Key << "seed" << YAML::Value << cfg.knobs.seed;
  if (cfg.cell_seed) out << YAML::Key << "cell_seed" << YAML::Value << *cfg.cell_seed;
  out << YAML::Key << "sensitivity_subsample" << YAML::Value << cfg.knobs.sensitivity_subsample;
  out << YAML::EndMap;

  out << YAML::Key << "tail" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t_min" << YAML::Value << format_double(cfg.tail.t_min);
  if (cfg.tail.t_max) {
    out << YAML::Key << "t_max" << YAML::Value << format_double(*cfg.tail.t_max);
  }
  out << YAML::Key << "min_at_risk" << YAML::Value << cfg.tail.min_at_risk;
  out << YAML::Key << "points" << YAML::Value << cfg.tail.points;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << cfg.output_dir;
  out << YAML::Key << "trajectories" << YAML::Value << cfg.trajectory_dumps;
  out << YAML::EndMap;

  out << YAML::Key << "parallel" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "workers" << YAML::Value << cfg.knobs.parallel.workers;
  out << YAML::Key << "deterministic" << YAML::Value << cfg.knobs.parallel.deterministic;
  out << YAML::Key << "batch_size" << YAML::Value << cfg.knobs.parallel.batch_size;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

std::string config_hash(const ExperimentConfig& config) {
  // Where results go and how many threads produce them do not change them.
  ExperimentConfig identity = config;
  identity.output_dir.clear();
  identity.knobs.parallel.workers = 0;
  return hex16(fnv1a64(dump_config(identity)));
}

std::string param_hash(const ModelParams& params) {
  std::string key = "p";
  for (const double v : params.p().probs()) key += ":" + format_double(v);
  key += "|g";
  for (const double v : params.gamma().probs()) key += ":" + format_double(v);
  key += "|l:" + format_double(params.lambda());
  return hex16(fnv1a64(key));
}

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::filesystem::path resolve_output_dir(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("LYSIM_OUTPUT_DIR"); env && *env) return env;
  return "lysim_out";
}

}  // namespace lysim
