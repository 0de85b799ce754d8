#include "aldsgd/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace aldsgd {

using nlohmann::json;

namespace {

const json* walk(const json& root, const std::string& path) {
  const json* node = &root;
  std::size_t begin = 0;
  while (begin <= path.size()) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(
        begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  return node;
}

template <typename T>
T require_field(const json& root, const std::string& path) {
  const json* node = walk(root, path);
  if (!node) throw ConfigError(path, "missing required field");
  try {
    return node->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

template <typename T>
T field_or(const json& root, const std::string& path, T fallback) {
  const json* node = walk(root, path);
  if (!node || node->is_null()) return fallback;
  try {
    return node->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

TopologyDesc::Kind topology_kind(const std::string& name) {
  if (name == "ring") return TopologyDesc::Kind::ring;
  if (name == "complete") return TopologyDesc::Kind::complete;
  if (name == "star") return TopologyDesc::Kind::star;
  if (name == "pendant_ring") return TopologyDesc::Kind::pendant_ring;
  if (name == "explicit") return TopologyDesc::Kind::explicit_edges;
  throw ConfigError("topology.kind", "unknown kind '" + name + "'");
}

std::string topology_kind_name(TopologyDesc::Kind kind) {
  switch (kind) {
    case TopologyDesc::Kind::ring: return "ring";
    case TopologyDesc::Kind::complete: return "complete";
    case TopologyDesc::Kind::star: return "star";
    case TopologyDesc::Kind::pendant_ring: return "pendant_ring";
    case TopologyDesc::Kind::explicit_edges: return "explicit";
  }
  return "ring";
}

ProblemKind problem_kind(const std::string& name) {
  if (name == "quadratic") return ProblemKind::quadratic;
  if (name == "logistic") return ProblemKind::logistic;
  if (name == "mlp") return ProblemKind::mlp;
  throw ConfigError("problem.kind", "unknown kind '" + name + "'");
}

std::string problem_kind_name(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::logistic: return "logistic";
    case ProblemKind::mlp: return "mlp";
  }
  return "quadratic";
}

}  // namespace

std::string preset_name(Preset preset) {
  switch (preset) {
    case Preset::dpsgd: return "dpsgd";
    case Preset::matcha: return "matcha";
    case Preset::aldsgd: return "aldsgd";
    case Preset::theorem2: return "theorem2";
    case Preset::custom: return "custom";
  }
  return "custom";
}

Preset preset_from_name(const std::string& name) {
  if (name == "dpsgd") return Preset::dpsgd;
  if (name == "matcha") return Preset::matcha;
  if (name == "aldsgd") return Preset::aldsgd;
  if (name == "theorem2") return Preset::theorem2;
  if (name == "custom") return Preset::custom;
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

std::size_t SweepSpec::cells() const {
  auto axis = [](std::size_t n) { return n == 0 ? std::size_t{1} : n; };
  return axis(target_degree.size()) * axis(budgets.size()) *
         axis(presets.size()) * axis(seeds.size()) * axis(rounds.size());
}

FullConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("(document)", e.what());
  }
  if (field_or<int>(root, "schema", 1) != 1)
    throw ConfigError("schema", "unsupported schema version");

  FullConfig config;
  auto& exp = config.experiment;

  exp.preset = preset_from_name(field_or<std::string>(root, "preset", "custom"));
  exp.seed = field_or<std::uint64_t>(root, "seed", 0);
  exp.rounds = field_or<long>(root, "rounds", 0);
  exp.stride = field_or<int>(root, "stride", 10);
  exp.jobs = field_or<int>(root, "jobs", 1);
  if (exp.rounds < 0) throw ConfigError("rounds", "must be >= 0");
  if (exp.stride < 1) throw ConfigError("stride", "must be >= 1");

  auto& topo = exp.topology;
  topo.kind = topology_kind(require_field<std::string>(root, "topology.kind"));
  topo.m = require_field<int>(root, "topology.m");
  if (topo.m < 2) throw ConfigError("topology.m", "must be >= 2");
  if (topo.kind == TopologyDesc::Kind::explicit_edges) {
    const auto pairs = require_field<std::vector<std::vector<int>>>(
        root, "topology.edges");
    for (const auto& pair : pairs) {
      if (pair.size() != 2)
        throw ConfigError("topology.edges", "each edge is a [u, v] pair");
      topo.edges.push_back({pair[0], pair[1]});
    }
  }
  topo.dynamic_n = field_or<int>(root, "topology.dynamic_n", 1);
  if (topo.dynamic_n < 1) throw ConfigError("topology.dynamic_n", "must be >= 1");
  topo.shifts = field_or<std::vector<int>>(root, "topology.shifts", {});
  if (const json* node = walk(root, "topology.target_D");
      node && !node->is_null())
    topo.target_degree = require_field<int>(root, "topology.target_D");

  auto& prob = exp.problem;
  prob.kind =
      problem_kind(field_or<std::string>(root, "problem.kind", "quadratic"));
  prob.dim = field_or<int>(root, "problem.d", prob.dim);
  prob.n_samples = field_or<int>(root, "problem.n_samples", prob.n_samples);
  prob.heldout = field_or<int>(root, "problem.heldout", prob.heldout);
  prob.batch_size = field_or<int>(root, "problem.batch_size", prob.batch_size);
  prob.cluster_scale =
      field_or<double>(root, "problem.cluster_scale", prob.cluster_scale);
  prob.sample_spread =
      field_or<double>(root, "problem.sample_spread", prob.sample_spread);
  prob.q_min_eig = field_or<double>(root, "problem.q_min_eig", prob.q_min_eig);
  prob.q_max_eig = field_or<double>(root, "problem.q_max_eig", prob.q_max_eig);
  prob.ridge = field_or<double>(root, "problem.ridge", prob.ridge);
  prob.hidden = field_or<int>(root, "problem.hidden", prob.hidden);
  prob.noise = field_or<double>(root, "problem.noise", prob.noise);
  if (const json* node = walk(root, "problem.seed"); node && !node->is_null())
    prob.seed = require_field<std::uint64_t>(root, "problem.seed");
  if (const json* node = walk(root, "problem.partition");
      node && !node->is_null()) {
    if (node->is_string() && node->get<std::string>() == "iid") {
      prob.partition.mode = PartitionSpec::Mode::iid;
    } else if (node->is_object() && node->contains("label_skew")) {
      prob.partition.mode = PartitionSpec::Mode::label_skew;
      prob.partition.skew =
          require_field<double>(root, "problem.partition.label_skew");
      if (prob.partition.skew < 0.0 || prob.partition.skew > 1.0)
        throw ConfigError("problem.partition.label_skew", "must be in [0, 1]");
    } else {
      throw ConfigError("problem.partition",
                        "expected \"iid\" or {\"label_skew\": s}");
    }
  }

  auto& hp = exp.hyper;
  const bool leader_defaults =
      exp.preset == Preset::aldsgd || exp.preset == Preset::theorem2;
  hp.gamma = field_or<double>(root, "hyper.gamma", 0.05);
  hp.lambda_n =
      field_or<double>(root, "hyper.lambda_n", leader_defaults ? 0.1 : 0.0);
  hp.lambda_tau =
      field_or<double>(root, "hyper.lambda_tau", leader_defaults ? 0.1 : 0.0);
  hp.omega_n =
      field_or<double>(root, "hyper.omega_n", leader_defaults ? 0.1 : 0.0);
  hp.omega_tau =
      field_or<double>(root, "hyper.omega_tau", leader_defaults ? 0.1 : 0.0);
  hp.alpha = field_or<double>(root, "hyper.alpha", 0.25);
  hp.budget = field_or<double>(root, "hyper.c_b", 1.0);
  hp.start_phase = field_or<int>(root, "hyper.start_phase", 0);
  hp.n_graphs = topo.dynamic_n;
  if (const json* node = walk(root, "hyper.lr_schedule");
      node && !node->is_null()) {
    if (!node->is_array())
      throw ConfigError("hyper.lr_schedule", "expected [[round, mult], ...]");
    for (const auto& entry : *node) {
      if (!entry.is_array() || entry.size() != 2)
        throw ConfigError("hyper.lr_schedule", "expected [[round, mult], ...]");
      hp.lr_schedule.push_back(
          {entry[0].get<long>(), entry[1].get<double>()});
    }
  }

  if (const json* node = walk(root, "init"); node && !node->is_null()) {
    const std::string kind = field_or<std::string>(root, "init.kind",
                                                   "distinct_gaussian");
    if (kind == "distinct_gaussian") {
      exp.init.kind = InitMode::Kind::distinct_gaussian;
      exp.init.sigma = field_or<double>(root, "init.sigma", 1.0);
    } else if (kind == "identical") {
      exp.init.kind = InitMode::Kind::identical;
      const json* value = walk(root, "init.value");
      if (value && value->is_number()) {
        exp.init.value.resize(1);
        exp.init.value(0) = value->get<double>();
      } else if (value && value->is_array()) {
        const auto vec = value->get<std::vector<double>>();
        exp.init.value =
            Eigen::Map<const Eigen::VectorXd>(vec.data(), vec.size());
      }
    } else {
      throw ConfigError("init.kind", "unknown kind '" + kind + "'");
    }
  }

  auto& sp = config.spectral;
  sp.samples = field_or<int>(root, "spectral.samples", sp.samples);
  sp.n_products = field_or<int>(root, "spectral.n_products", sp.n_products);
  sp.trials = field_or<int>(root, "spectral.trials", sp.trials);
  if (const json* node = walk(root, "spectral.k_free"); node && !node->is_null())
    sp.k_free = require_field<double>(root, "spectral.k_free");
  if (const json* node = walk(root, "spectral.alpha"); node && !node->is_null())
    sp.alpha = require_field<double>(root, "spectral.alpha");
  if (const json* node = walk(root, "spectral.omega"); node && !node->is_null())
    sp.omega = require_field<double>(root, "spectral.omega");
  const std::string policy = field_or<std::string>(
      root, "spectral.policy", "uniform_neighborhood");
  if (policy == "uniform_neighborhood") {
    sp.policy = LeaderPolicy::uniform_neighborhood;
  } else if (policy == "self_only") {
    sp.policy = LeaderPolicy::self_only;
  } else {
    throw ConfigError("spectral.policy", "unknown policy '" + policy + "'");
  }

  auto& sweep = config.sweep;
  sweep.target_degree =
      field_or<std::vector<int>>(root, "sweep.axes.target_D", {});
  sweep.budgets = field_or<std::vector<double>>(root, "sweep.axes.c_b", {});
  sweep.seeds =
      field_or<std::vector<std::uint64_t>>(root, "sweep.axes.seed", {});
  sweep.rounds = field_or<std::vector<long>>(root, "sweep.axes.K", {});
  for (const auto& name :
       field_or<std::vector<std::string>>(root, "sweep.axes.preset", {}))
    sweep.presets.push_back(preset_from_name(name));

  return config;
}

FullConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const FullConfig& config) {
  const auto& exp = config.experiment;
  json root;
  root["schema"] = 1;
  root["preset"] = preset_name(exp.preset);
  root["seed"] = exp.seed;
  root["rounds"] = exp.rounds;
  root["stride"] = exp.stride;
  root["jobs"] = exp.jobs;

  json topo;
  topo["kind"] = topology_kind_name(exp.topology.kind);
  topo["m"] = exp.topology.m;
  if (exp.topology.kind == TopologyDesc::Kind::explicit_edges) {
    json edges = json::array();
    for (const auto& [u, v] : exp.topology.edges) edges.push_back({u, v});
    topo["edges"] = edges;
  }
  topo["dynamic_n"] = exp.topology.dynamic_n;
  if (!exp.topology.shifts.empty()) topo["shifts"] = exp.topology.shifts;
  if (exp.topology.target_degree)
    topo["target_D"] = *exp.topology.target_degree;
  root["topology"] = topo;

  json prob;
  prob["kind"] = problem_kind_name(exp.problem.kind);
  prob["d"] = exp.problem.dim;
  prob["n_samples"] = exp.problem.n_samples;
  prob["heldout"] = exp.problem.heldout;
  if (exp.problem.partition.mode == PartitionSpec::Mode::iid)
    prob["partition"] = "iid";
  else
    prob["partition"] = {{"label_skew", exp.problem.partition.skew}};
  prob["batch_size"] = exp.problem.batch_size;
  prob["cluster_scale"] = exp.problem.cluster_scale;
  prob["sample_spread"] = exp.problem.sample_spread;
  prob["q_min_eig"] = exp.problem.q_min_eig;
  prob["q_max_eig"] = exp.problem.q_max_eig;
  prob["ridge"] = exp.problem.ridge;
  prob["hidden"] = exp.problem.hidden;
  prob["noise"] = exp.problem.noise;
  if (exp.problem.seed) prob["seed"] = *exp.problem.seed;
  root["problem"] = prob;

  json hyper;
  hyper["gamma"] = exp.hyper.gamma;
  if (!exp.hyper.lr_schedule.empty()) {
    json schedule = json::array();
    for (const auto& [at, mult] : exp.hyper.lr_schedule)
      schedule.push_back({at, mult});
    hyper["lr_schedule"] = schedule;
  }
  hyper["lambda_n"] = exp.hyper.lambda_n;
  hyper["lambda_tau"] = exp.hyper.lambda_tau;
  hyper["omega_n"] = exp.hyper.omega_n;
  hyper["omega_tau"] = exp.hyper.omega_tau;
  hyper["alpha"] = exp.hyper.alpha;
  hyper["c_b"] = exp.hyper.budget;
  hyper["start_phase"] = exp.hyper.start_phase;
  root["hyper"] = hyper;

  json init;
  if (exp.init.kind == InitMode::Kind::distinct_gaussian) {
    init["kind"] = "distinct_gaussian";
    init["sigma"] = exp.init.sigma;
  } else {
    init["kind"] = "identical";
    if (exp.init.value.size() == 1) {
      init["value"] = exp.init.value(0);
    } else if (exp.init.value.size() > 1) {
      init["value"] = std::vector<double>(
          exp.init.value.data(), exp.init.value.data() + exp.init.value.size());
    }
  }
  root["init"] = init;

  json spectral;
  spectral["samples"] = config.spectral.samples;
  spectral["n_products"] = config.spectral.n_products;
  spectral["trials"] = config.spectral.trials;
  if (config.spectral.k_free) spectral["k_free"] = *config.spectral.k_free;
  if (config.spectral.alpha) spectral["alpha"] = *config.spectral.alpha;
  if (config.spectral.omega) spectral["omega"] = *config.spectral.omega;
  spectral["policy"] =
      config.spectral.policy == LeaderPolicy::uniform_neighborhood
          ? "uniform_neighborhood"
          : "self_only";
  root["spectral"] = spectral;

  if (!config.sweep.empty()) {
    json axes;
    if (!config.sweep.target_degree.empty())
      axes["target_D"] = config.sweep.target_degree;
    if (!config.sweep.budgets.empty()) axes["c_b"] = config.sweep.budgets;
    if (!config.sweep.presets.empty()) {
      std::vector<std::string> names;
      for (Preset preset : config.sweep.presets)
        names.push_back(preset_name(preset));
      axes["preset"] = names;
    }
    if (!config.sweep.seeds.empty()) axes["seed"] = config.sweep.seeds;
    if (!config.sweep.rounds.empty()) axes["K"] = config.sweep.rounds;
    root["sweep"] = {{"axes", axes}};
  }

  return root.dump(2) + "\n";
}

}  // namespace aldsgd
