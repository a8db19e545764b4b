#include "cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace mpcrl::cli {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) const {
    std::ostringstream out;
    out << source_;
    if (node.IsDefined() && node.Mark().line >= 0) out << ':' << node.Mark().line + 1 << ':' << node.Mark().column + 1;
    out << ": field '" << field << "': " << msg;
    throw ConfigError(out.str());
  }

  void check_keys(const YAML::Node& map, const std::string& path, const std::set<std::string>& allowed) const {
    if (!map.IsMap()) fail(map, path, "expected a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (allowed.count(key) == 0) fail(kv.first, join(path, key), "unknown field");
    }
  }

  template <class T>
  std::optional<T> scalar(const YAML::Node& map, const std::string& path, const std::string& key) const {
    const YAML::Node n = map[key];
    if (!n) return std::nullopt;
    if (!n.IsScalar()) fail(n, join(path, key), "expected a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, join(path, key), std::string("cannot parse '") + n.Scalar() + "'");
    }
  }

  std::optional<Vector> vector(const YAML::Node& map, const std::string& path, const std::string& key) const {
    const YAML::Node n = map[key];
    if (!n) return std::nullopt;
    return as_vector(n, join(path, key));
  }

  std::optional<Matrix> matrix(const YAML::Node& map, const std::string& path, const std::string& key) const {
    const YAML::Node n = map[key];
    if (!n) return std::nullopt;
    const std::string field = join(path, key);
    if (n.IsScalar()) {
      // A scalar m denotes the 1x1 matrix [m].
      return Matrix::Constant(1, 1, as_double(n, field));
    }
    if (!n.IsSequence() || n.size() == 0) fail(n, field, "expected a non-empty list of rows");
    const auto rows = static_cast<Index>(n.size());
    Index cols = -1;
    Matrix m;
    for (Index i = 0; i < rows; ++i) {
      const Vector row = as_vector(n[static_cast<std::size_t>(i)], field);
      if (cols < 0) {
        cols = row.size();
        m.resize(rows, cols);
      } else if (row.size() != cols) {
        fail(n[static_cast<std::size_t>(i)], field, "rows have different lengths");
      }
      m.row(i) = row.transpose();
    }
    return m;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  double as_double(const YAML::Node& n, const std::string& field) const {
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, field, std::string("expected a number, got '") + n.Scalar() + "'");
    }
  }

  Vector as_vector(const YAML::Node& n, const std::string& field) const {
    if (n.IsScalar()) return Vector::Constant(1, as_double(n, field));
    if (!n.IsSequence()) fail(n, field, "expected a list of numbers");
    Vector v(static_cast<Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) v(static_cast<Index>(i)) = as_double(n[i], field);
    return v;
  }

  std::string source_;
};

template <class T>
void assign(T& target, const std::optional<T>& value) {
  if (value) target = *value;
}

void require_square(const Reader& rd, const YAML::Node& node, const std::string& field, const Matrix& m, Index n) {
  if (m.rows() != n || m.cols() != n) {
    rd.fail(node, field, "expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  }
}

void parse_env(const Reader& rd, const YAML::Node& node, EnvSection& env) {
  const std::string p = "env";
  rd.check_keys(node, p,
                {"type", "gamma", "A", "B", "T", "S", "R", "noise_sigma", "u_lo", "u_hi", "initial_state", "noise",
                 "nominal", "sigma", "x_lo", "x_hi", "dt", "cost_scale", "violation_quadratic", "violation_linear"});
  assign(env.type, rd.scalar<std::string>(node, p, "type"));
  assign(env.gamma, rd.scalar<double>(node, p, "gamma"));
  if (!(env.gamma > 0.0 && env.gamma <= 1.0)) rd.fail(node["gamma"], "env.gamma", "must lie in (0, 1]");
  env.initial_state = rd.vector(node, p, "initial_state");
  if (env.type == "lti") {
    for (const char* key : {"A", "B", "T", "R"}) {
      if (!node[key]) rd.fail(node, Reader::join(p, key), "required for env.type lti");
    }
    env.A = *rd.matrix(node, p, "A");
    env.B = *rd.matrix(node, p, "B");
    env.T = *rd.matrix(node, p, "T");
    env.R = *rd.matrix(node, p, "R");
    const Index ns = env.A.rows();
    const Index na = env.B.cols();
    require_square(rd, node["A"], "env.A", env.A, ns);
    if (env.B.rows() != ns) rd.fail(node["B"], "env.B", "row count must match env.A");
    require_square(rd, node["T"], "env.T", env.T, ns);
    require_square(rd, node["R"], "env.R", env.R, na);
    env.S = rd.matrix(node, p, "S").value_or(Matrix::Zero(ns, na));
    if (env.S.rows() != ns || env.S.cols() != na) rd.fail(node["S"], "env.S", "expected an n_s x n_a matrix");
    assign(env.noise_sigma, rd.scalar<double>(node, p, "noise_sigma"));
    if (!(env.noise_sigma >= 0.0)) rd.fail(node["noise_sigma"], "env.noise_sigma", "must be nonnegative");
    env.u_lo = rd.vector(node, p, "u_lo");
    env.u_hi = rd.vector(node, p, "u_hi");
    for (const auto& [key, v] : {std::pair{"u_lo", env.u_lo}, std::pair{"u_hi", env.u_hi}}) {
      if (v && v->size() != na) rd.fail(node[key], Reader::join(p, key), "expected n_a entries");
    }
    if (env.initial_state && env.initial_state->size() != ns) {
      rd.fail(node["initial_state"], "env.initial_state", "expected n_s entries");
    }
  } else if (env.type == "evaporation") {
    auto& e = env.evaporation;
    e.gamma = env.gamma;
    assign(e.noise, rd.scalar<bool>(node, p, "noise"));
    assign(e.dt, rd.scalar<double>(node, p, "dt"));
    assign(e.cost_scale, rd.scalar<double>(node, p, "cost_scale"));
    assign(e.violation_quadratic, rd.scalar<double>(node, p, "violation_quadratic"));
    assign(e.violation_linear, rd.scalar<double>(node, p, "violation_linear"));
    auto fixed = [&](const char* key, auto& target) {
      const auto v = rd.vector(node, p, key);
      if (!v) return;
      if (v->size() != target.size()) {
        rd.fail(node[key], Reader::join(p, key), "expected " + std::to_string(target.size()) + " entries");
      }
      target = *v;
    };
    fixed("nominal", e.nominal);
    fixed("sigma", e.sigma);
    fixed("x_lo", e.x_lo);
    fixed("x_hi", e.x_hi);
    fixed("u_lo", e.u_lo);
    fixed("u_hi", e.u_hi);
    fixed("initial_state", e.initial_state);
    try {
      e.validate();
    } catch (const ConfigError& err) {
      rd.fail(node, p, err.what());
    }
  } else {
    rd.fail(node["type"], "env.type", "unknown environment type '" + env.type + "' (expected lti or evaporation)");
  }
}

void parse_mpc(const Reader& rd, const YAML::Node& node, MpcSection& mpc) {
  const std::string p = "mpc";
  rd.check_keys(node, p,
                {"N", "parametrization", "W_s", "w_s", "state_constraints", "A_hat", "B_hat", "initial",
                 "cost_center", "solver_max_iter"});
  if (const auto N = rd.scalar<long>(node, p, "N")) {
    if (*N < 1) rd.fail(node["N"], "mpc.N", "must be at least 1");
    mpc.N = *N;
  }
  assign(mpc.parametrization, rd.scalar<std::string>(node, p, "parametrization"));
  if (mpc.parametrization != "non-condensed" && mpc.parametrization != "condensed") {
    rd.fail(node["parametrization"], "mpc.parametrization", "expected non-condensed or condensed");
  }
  mpc.W_s = rd.matrix(node, p, "W_s");
  mpc.w_s = rd.vector(node, p, "w_s");
  if (const auto sc = rd.scalar<std::string>(node, p, "state_constraints")) {
    if (*sc == "soft") {
      mpc.state_constraints = ocp::StateConstraints::soft;
    } else if (*sc == "hard") {
      mpc.state_constraints = ocp::StateConstraints::hard;
    } else if (*sc == "none") {
      mpc.state_constraints = ocp::StateConstraints::none;
    } else {
      rd.fail(node["state_constraints"], "mpc.state_constraints", "expected soft, hard or none");
    }
  }
  mpc.A_hat = rd.matrix(node, p, "A_hat");
  mpc.B_hat = rd.matrix(node, p, "B_hat");
  assign(mpc.initial, rd.scalar<std::string>(node, p, "initial"));
  if (mpc.initial != "naive" && mpc.initial != "identity") {
    rd.fail(node["initial"], "mpc.initial", "expected naive or identity");
  }
  assign(mpc.cost_center, rd.scalar<std::string>(node, p, "cost_center"));
  if (mpc.cost_center != "origin" && mpc.cost_center != "nominal") {
    rd.fail(node["cost_center"], "mpc.cost_center", "expected origin or nominal");
  }
  assign(mpc.solver_max_iter, rd.scalar<int>(node, p, "solver_max_iter"));
}

void parse_learner(const Reader& rd, const YAML::Node& node, learn::LearnerConfig& cfg) {
  const std::string p = "learner";
  rd.check_keys(node, p,
                {"alpha", "n_upd", "epsilon", "explore_sigma", "explore_center", "pd_eps", "gn_tol", "gn_max_iter",
                 "max_failure_fraction", "frozen"});
  assign(cfg.alpha, rd.scalar<double>(node, p, "alpha"));
  assign(cfg.n_upd, rd.scalar<long>(node, p, "n_upd"));
  assign(cfg.epsilon, rd.scalar<double>(node, p, "epsilon"));
  assign(cfg.explore_sigma, rd.scalar<double>(node, p, "explore_sigma"));
  if (const auto c = rd.scalar<std::string>(node, p, "explore_center")) {
    if (*c == "zero") {
      cfg.explore_center = learn::ExploreCenter::zero;
    } else if (*c == "greedy") {
      cfg.explore_center = learn::ExploreCenter::greedy;
    } else {
      rd.fail(node["explore_center"], "learner.explore_center", "expected zero or greedy");
    }
  }
  assign(cfg.pd_eps, rd.scalar<double>(node, p, "pd_eps"));
  assign(cfg.gn_tol, rd.scalar<double>(node, p, "gn_tol"));
  assign(cfg.gn_max_iter, rd.scalar<int>(node, p, "gn_max_iter"));
  assign(cfg.max_failure_fraction, rd.scalar<double>(node, p, "max_failure_fraction"));
  if (const YAML::Node f = node["frozen"]) {
    if (!f.IsSequence()) rd.fail(f, "learner.frozen", "expected a list of block names");
    cfg.frozen.clear();
    for (const auto& item : f) cfg.frozen.push_back(item.as<std::string>());
  }
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    rd.fail(node, p, err.what());
  }
}

void parse_run(const Reader& rd, const YAML::Node& node, RunSection& run) {
  const std::string p = "run";
  rd.check_keys(node, p, {"steps", "output", "eval_episodes", "eval_steps", "reset_every"});
  assign(run.steps, rd.scalar<long>(node, p, "steps"));
  assign(run.output, rd.scalar<std::string>(node, p, "output"));
  assign(run.eval_episodes, rd.scalar<int>(node, p, "eval_episodes"));
  assign(run.eval_steps, rd.scalar<long>(node, p, "eval_steps"));
  assign(run.reset_every, rd.scalar<long>(node, p, "reset_every"));
  if (run.steps < 0) rd.fail(node["steps"], "run.steps", "must be nonnegative");
  if (run.eval_episodes < 0) rd.fail(node["eval_episodes"], "run.eval_episodes", "must be nonnegative");
  if (run.eval_steps < 0) rd.fail(node["eval_steps"], "run.eval_steps", "must be nonnegative");
  if (run.reset_every < 0) rd.fail(node["reset_every"], "run.reset_every", "must be nonnegative");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  const Reader rd(source);
  if (!root.IsMap()) rd.fail(root, "<root>", "expected a mapping of sections");
  rd.check_keys(root, "", {"experiment", "seed", "env", "mpc", "learner", "run"});

  ExperimentConfig cfg;
  const auto name = rd.scalar<std::string>(root, "", "experiment");
  if (!name) rd.fail(root, "experiment", "missing required field");
  cfg.experiment = *name;
  if (cfg.experiment != "lqr-validation" && cfg.experiment != "lqr-learning" && cfg.experiment != "wrong-model" &&
      cfg.experiment != "evaporation") {
    rd.fail(root["experiment"], "experiment",
            "unknown experiment '" + cfg.experiment +
                "' (expected lqr-validation, lqr-learning, wrong-model or evaporation)");
  }
  const auto seed = rd.scalar<std::uint64_t>(root, "", "seed");
  if (!seed) rd.fail(root, "seed", "missing required field (runs must be reproducible)");
  cfg.seed = *seed;

  if (!root["env"]) rd.fail(root, "env", "missing required section");
  parse_env(rd, root["env"], cfg.env);
  if (root["mpc"]) parse_mpc(rd, root["mpc"], cfg.mpc);
  if (root["learner"]) parse_learner(rd, root["learner"], cfg.learner);
  if (root["run"]) parse_run(rd, root["run"], cfg.run);

  if (cfg.env.type == "evaporation" && cfg.mpc.parametrization != "non-condensed") {
    rd.fail(root["mpc"], "mpc.parametrization", "the evaporation benchmark uses the non-condensed scheme");
  }
  if (cfg.env.type == "lti" && cfg.mpc.cost_center != "origin") {
    rd.fail(root["mpc"]["cost_center"], "mpc.cost_center", "only the evaporation benchmark has a nominal point");
  }
  if (cfg.env.type == "lti") {
    const Index ns = cfg.env.A.rows();
    const Index na = cfg.env.B.cols();
    if (cfg.mpc.A_hat && (cfg.mpc.A_hat->rows() != ns || cfg.mpc.A_hat->cols() != ns)) {
      rd.fail(root["mpc"]["A_hat"], "mpc.A_hat", "shape must match env.A");
    }
    if (cfg.mpc.B_hat && (cfg.mpc.B_hat->rows() != ns || cfg.mpc.B_hat->cols() != na)) {
      rd.fail(root["mpc"]["B_hat"], "mpc.B_hat", "shape must match env.B");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

}  // namespace mpcrl::cli
