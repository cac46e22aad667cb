#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "hlda/lda.hpp"
#include "hlda/sampler.hpp"

namespace hlda {

namespace detail {

inline nlohmann::json to_json(const SamplerConfig& cfg) {
  return {{"depth", cfg.depth},
          {"infinite_depth", cfg.infinite_depth},
          {"gamma", cfg.gamma},
          {"eta", cfg.eta},
          {"gem_m", cfg.gem_m},
          {"gem_pi", cfg.gem_pi},
          {"level_prior", cfg.level_prior == LevelPrior::gem ? "gem" : "dirichlet"},
          {"level_alpha", cfg.level_alpha},
          {"max_level", cfg.max_level}};
}

inline SamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  SamplerConfig cfg;
  cfg.depth = j.at("depth").get<int>();
  cfg.infinite_depth = j.at("infinite_depth").get<bool>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.eta = j.at("eta").get<std::vector<double>>();
  cfg.gem_m = j.at("gem_m").get<double>();
  cfg.gem_pi = j.at("gem_pi").get<double>();
  std::string lp = j.at("level_prior").get<std::string>();
  if (lp == "gem")
    cfg.level_prior = LevelPrior::gem;
  else if (lp == "dirichlet")
    cfg.level_prior = LevelPrior::dirichlet;
  else
    throw std::runtime_error("checkpoint: unknown level prior '" + lp + "'");
  cfg.level_alpha = j.at("level_alpha").get<double>();
  cfg.max_level = j.at("max_level").get<int>();
  return cfg;
}

inline nlohmann::json to_json(const Snapshot& s) {
  return {{"iteration", s.iteration}, {"loglik", s.loglik},
          {"paths", s.paths},         {"levels", s.levels},
          {"gamma", s.gamma},         {"gem_m", s.gem_m},
          {"gem_pi", s.gem_pi},       {"eta", s.eta}};
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
  Snapshot s;
  s.iteration = j.at("iteration").get<long>();
  s.loglik = j.at("loglik").get<double>();
  s.paths = j.at("paths").get<std::vector<std::vector<NodeId>>>();
  s.levels = j.at("levels").get<std::vector<std::vector<int>>>();
  s.gamma = j.at("gamma").get<double>();
  s.gem_m = j.at("gem_m").get<double>();
  s.gem_pi = j.at("gem_pi").get<double>();
  s.eta = j.at("eta").get<std::vector<double>>();
  return s;
}

inline nlohmann::json to_json(const RunConfig& rcfg) {
  return {{"iters", rcfg.iters},
          {"burn_in", rcfg.burn_in},
          {"thin", rcfg.thin},
          {"seed", rcfg.seed},
          {"record_snapshots", rcfg.record_snapshots},
          {"sample_hypers", rcfg.sample_hypers},
          {"random_scan", rcfg.random_scan},
          {"warm_start", rcfg.warm_start},
          {"reattach", rcfg.reattach},
          {"priors",
           {{"a1", rcfg.priors.a1},
            {"a2", rcfg.priors.a2},
            {"a3", rcfg.priors.a3},
            {"a4", rcfg.priors.a4},
            {"a5", rcfg.priors.a5},
            {"a6", rcfg.priors.a6}}},
          {"mh",
           {{"step_m", rcfg.mh.step_m},
            {"step_pi", rcfg.mh.step_pi},
            {"step_gamma", rcfg.mh.step_gamma},
            {"step_eta", rcfg.mh.step_eta},
            {"updates_per_sweep", rcfg.mh.updates_per_sweep}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig r;
  r.iters = j.at("iters").get<long>();
  r.burn_in = j.at("burn_in").get<long>();
  r.thin = j.at("thin").get<long>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.record_snapshots = j.at("record_snapshots").get<bool>();
  r.sample_hypers = j.at("sample_hypers").get<bool>();
  r.random_scan = j.at("random_scan").get<bool>();
  r.warm_start = j.value("warm_start", false);
  r.reattach = j.value("reattach", false);
  const auto& p = j.at("priors");
  r.priors.a1 = p.at("a1").get<double>();
  r.priors.a2 = p.at("a2").get<double>();
  r.priors.a3 = p.at("a3").get<double>();
  r.priors.a4 = p.at("a4").get<double>();
  r.priors.a5 = p.at("a5").get<double>();
  r.priors.a6 = p.at("a6").get<double>();
  const auto& m = j.at("mh");
  r.mh.step_m = m.at("step_m").get<double>();
  r.mh.step_pi = m.at("step_pi").get<double>();
  r.mh.step_gamma = m.at("step_gamma").get<double>();
  r.mh.step_eta = m.at("step_eta").get<double>();
  r.mh.updates_per_sweep = m.at("updates_per_sweep").get<int>();
  return r;
}

inline nlohmann::json to_json(const ChainResult& res) {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : res.snapshots) snaps.push_back(to_json(s));
  // wall time is deliberately left out: checkpoints are byte-reproducible
  return {{"loglik_trace", res.loglik_trace},
          {"snapshots", std::move(snaps)},
          {"mode", to_json(res.mode)},
          {"mode_loglik", res.mode_loglik},
          {"chain_index", res.chain_index}};
}

inline ChainResult chain_result_from_json(const nlohmann::json& j) {
  ChainResult res;
  res.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
  for (const auto& s : j.at("snapshots")) res.snapshots.push_back(snapshot_from_json(s));
  res.mode = snapshot_from_json(j.at("mode"));
  res.mode_loglik = j.at("mode_loglik").get<double>();
  res.chain_index = j.at("chain_index").get<int>();
  return res;
}

}  // namespace detail

// Everything needed to resume a chain bit-exactly: the latent assignments,
// current hyperparameter values, RNG state, and accumulated results.
struct Checkpoint {
  SamplerConfig config;     // with current (possibly sampled) hyper values
  RunConfig run;
  long iteration = 0;
  std::string rng_state;
  std::vector<std::vector<NodeId>> paths;
  std::vector<std::vector<int>> levels;
  // child visit order per internal node, plus the id counter; both shape the
  // sampler's future draws and must be restored exactly
  std::vector<std::pair<NodeId, std::vector<NodeId>>> child_order;
  NodeId next_node_id = 1;
  ChainResult result;
};

inline Checkpoint make_checkpoint(const SamplerState& state, const RunConfig& rcfg,
                                  const ChainResult& result) {
  Checkpoint cp;
  cp.config = state.config();
  cp.run = rcfg;
  cp.iteration = state.iteration();
  cp.rng_state = state.rng().serialize();
  cp.paths = state.paths();
  cp.levels = state.levels();
  for (const auto& [id, n] : state.tree().nodes())
    if (!n.children.empty()) cp.child_order.emplace_back(id, n.children);
  cp.next_node_id = state.tree().next_id();
  cp.result = result;
  return cp;
}

inline void save_checkpoint(const Checkpoint& cp, std::ostream& out) {
  nlohmann::json j{{"format", "hlda-checkpoint"},
                   {"version", 1},
                   {"config", detail::to_json(cp.config)},
                   {"run", detail::to_json(cp.run)},
                   {"iteration", cp.iteration},
                   {"rng", cp.rng_state},
                   {"paths", cp.paths},
                   {"levels", cp.levels},
                   {"child_order", cp.child_order},
                   {"next_node_id", cp.next_node_id},
                   {"result", detail::to_json(cp.result)}};
  out << j.dump(2) << '\n';
}

inline void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file: " + path);
  save_checkpoint(cp, out);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "hlda-checkpoint")
    throw std::runtime_error("not a checkpoint file");
  Checkpoint cp;
  cp.config = detail::sampler_config_from_json(j.at("config"));
  cp.run = detail::run_config_from_json(j.at("run"));
  cp.iteration = j.at("iteration").get<long>();
  cp.rng_state = j.at("rng").get<std::string>();
  cp.paths = j.at("paths").get<std::vector<std::vector<NodeId>>>();
  cp.levels = j.at("levels").get<std::vector<std::vector<int>>>();
  cp.child_order =
      j.at("child_order").get<std::vector<std::pair<NodeId, std::vector<NodeId>>>>();
  cp.next_node_id = j.at("next_node_id").get<NodeId>();
  cp.result = detail::chain_result_from_json(j.at("result"));
  return cp;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  return load_checkpoint(in);
}

// Rebuild a sampler state from a checkpoint, restoring the exact RNG stream.
inline SamplerState restore_state(const Corpus& corpus, const Checkpoint& cp) {
  Snapshot snap;
  snap.iteration = cp.iteration;
  snap.paths = cp.paths;
  snap.levels = cp.levels;
  snap.gamma = cp.config.gamma;
  snap.gem_m = cp.config.gem_m;
  snap.gem_pi = cp.config.gem_pi;
  snap.eta = cp.config.eta;
  SamplerState state(corpus, cp.config, snap, 0);
  for (const auto& [id, order] : cp.child_order)
    state.tree().set_child_order(id, order);
  state.tree().set_next_id(cp.next_node_id);
  state.rng().deserialize(cp.rng_state);
  return state;
}

// Resume and run to completion per the stored run configuration.
inline ChainResult resume_chain(const Corpus& corpus, const Checkpoint& cp) {
  SamplerState state = restore_state(corpus, cp);
  ChainResult result = cp.result;
  continue_chain(state, cp.run, result);
  return result;
}

}  // namespace hlda
