#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <string>
#include <vector>

#include "hlda/corpus.hpp"
#include "hlda/sampler.hpp"

namespace hlda {

struct SimConfig {
  int num_documents = 100;
  int doc_length = 250;
  int vocab_size = 100;
  SamplerConfig model;  // depth, gamma, eta, level prior
  std::uint64_t seed = 0;
};

struct GroundTruth {
  NcrpTree tree;  // doc counts only; word counts are not populated
  std::vector<std::vector<NodeId>> paths;
  std::vector<std::vector<int>> levels;
  std::map<NodeId, std::vector<double>> topics;  // node -> distribution over V
};

namespace detail {

inline std::vector<double> draw_dirichlet_symmetric(int dim, double alpha, Rng& rng) {
  std::vector<double> x(static_cast<std::size_t>(dim));
  double sum = 0.0;
  for (auto& v : x) {
    v = rng.gamma(alpha);
    sum += v;
  }
  for (auto& v : x) v /= sum;
  return x;
}

inline int draw_categorical(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

// Forward sampling from the generative process: paths by sequential nCRP,
// levels from the level prior, topics lazily per node, words from the
// selected node's topic.
inline std::pair<Corpus, GroundTruth> generate_corpus(const SimConfig& sim) {
  sim.model.validate();
  if (sim.num_documents < 1 || sim.doc_length < 1 || sim.vocab_size < 1)
    throw std::invalid_argument("generate_corpus: bad sizes");
  Corpus corpus;
  for (int w = 0; w < sim.vocab_size; ++w)
    corpus.vocabulary.add("w" + std::to_string(w));
  // placeholder documents so the sampler machinery could be reused if wanted
  GroundTruth truth;
  Rng rng(sim.seed);
  const SamplerConfig& cfg = sim.model;

  auto topic_of = [&](NodeId id, int level) -> const std::vector<double>& {
    auto it = truth.topics.find(id);
    if (it == truth.topics.end())
      it = truth.topics
               .emplace(id, detail::draw_dirichlet_symmetric(
                                sim.vocab_size, cfg.eta_at(level), rng))
               .first;
    return it->second;
  };

  for (int d = 0; d < sim.num_documents; ++d) {
    // levels first (they set the path depth in the infinite model)
    std::vector<int> lv(static_cast<std::size_t>(sim.doc_length));
    std::vector<int> lc;
    if (!cfg.infinite_depth) lc.assign(static_cast<std::size_t>(cfg.depth), 0);
    int target = cfg.infinite_depth ? 0 : cfg.depth - 1;
    for (int n = 0; n < sim.doc_length; ++n) {
      int z;
      if (!cfg.infinite_depth) {
        std::vector<double> w(static_cast<std::size_t>(cfg.depth));
        for (int l = 0; l < cfg.depth; ++l)
          w[static_cast<std::size_t>(l)] =
              cfg.level_prior == LevelPrior::dirichlet
                  ? lc[static_cast<std::size_t>(l)] + cfg.level_alpha
                  : gem_level_conditional_truncated(lc, cfg.gem_m, cfg.gem_pi,
                                                    l + 1, cfg.depth);
        z = static_cast<int>(sample_discrete_linear(w, rng));
      } else {
        int maxl = -1;
        for (int l = 0; l < static_cast<int>(lc.size()); ++l)
          if (lc[static_cast<std::size_t>(l)] > 0) maxl = l;
        std::vector<double> w(static_cast<std::size_t>(maxl) + 2);
        for (int l = 0; l <= maxl; ++l)
          w[static_cast<std::size_t>(l)] =
              gem_level_conditional(lc, cfg.gem_m, cfg.gem_pi, l + 1);
        w[static_cast<std::size_t>(maxl) + 1] =
            gem_tail_mass(lc, cfg.gem_m, cfg.gem_pi, maxl + 1);
        z = static_cast<int>(sample_discrete_linear(w, rng));
        if (z == maxl + 1)
          while (z < cfg.max_level && rng.uniform() >= 1.0 - cfg.gem_m) ++z;
      }
      if (z >= static_cast<int>(lc.size())) lc.resize(static_cast<std::size_t>(z) + 1, 0);
      ++lc[static_cast<std::size_t>(z)];
      lv[static_cast<std::size_t>(n)] = z;
      target = std::max(target, z);
    }

    // path by sequential nCRP seating
    NodeId cur = truth.tree.root();
    while (truth.tree.node(cur).level < target) {
      const Node& node = truth.tree.node(cur);
      if (node.children.empty()) break;
      std::vector<int> sizes;
      for (NodeId ch : node.children) sizes.push_back(truth.tree.node(ch).doc_count);
      auto probs = crp_next_table_probs(sizes, cfg.gamma);
      int pick = detail::draw_categorical(probs, rng);
      if (pick == static_cast<int>(sizes.size())) break;  // new table
      cur = node.children[static_cast<std::size_t>(pick)];
    }
    PathCandidate cand{cur, target - truth.tree.node(cur).level};
    auto path = truth.tree.add_document_to_path(cand, target);

    Document doc;
    doc.id = d;
    doc.words.resize(static_cast<std::size_t>(sim.doc_length));
    for (int n = 0; n < sim.doc_length; ++n) {
      int z = lv[static_cast<std::size_t>(n)];
      const auto& beta = topic_of(path[static_cast<std::size_t>(z)], z);
      doc.words[static_cast<std::size_t>(n)] = detail::draw_categorical(beta, rng);
    }
    corpus.documents.push_back(std::move(doc));
    truth.paths.push_back(std::move(path));
    truth.levels.push_back(std::move(lv));
  }
  return {std::move(corpus), std::move(truth)};
}

struct TreeComparison {
  bool topology_match = false;
  int misallocated_paths = 0;
};

namespace detail {

// document set of each node: the docs whose path passes through it
inline std::map<NodeId, std::set<int>> doc_sets(
    const std::vector<std::vector<NodeId>>& paths) {
  std::map<NodeId, std::set<int>> out;
  for (std::size_t d = 0; d < paths.size(); ++d)
    for (NodeId id : paths[d]) out[id].insert(static_cast<int>(d));
  return out;
}

// canonical serialization: children ordered by their document sets
inline std::string canonical_form(NodeId id,
                                  const std::map<NodeId, std::vector<NodeId>>& children,
                                  const std::map<NodeId, std::set<int>>& sets) {
  std::vector<std::string> parts;
  auto it = children.find(id);
  if (it != children.end())
    for (NodeId ch : it->second)
      parts.push_back(canonical_form(ch, children, sets));
  std::sort(parts.begin(), parts.end());
  std::string s = "(";
  auto sit = sets.find(id);
  if (sit != sets.end())
    for (int d : sit->second) s += std::to_string(d) + ",";
  s += ":";
  for (const auto& p : parts) s += p;
  s += ")";
  return s;
}

inline std::map<NodeId, std::vector<NodeId>> child_map(
    const std::vector<std::vector<NodeId>>& paths) {
  std::map<NodeId, std::vector<NodeId>> out;
  for (const auto& path : paths)
    for (std::size_t i = 1; i < path.size(); ++i) {
      auto& v = out[path[i - 1]];
      if (std::find(v.begin(), v.end(), path[i]) == v.end()) v.push_back(path[i]);
    }
  return out;
}

}  // namespace detail

// Sibling-order-invariant comparison of two path ensembles over the same
// corpus.  Nodes correspond when their document sets match; misallocated
// paths are counted under a per-level best-overlap matching.
inline TreeComparison compare_trees(const std::vector<std::vector<NodeId>>& inferred,
                                    const std::vector<std::vector<NodeId>>& truth) {
  if (inferred.size() != truth.size())
    throw std::invalid_argument("compare_trees: different corpus sizes");
  TreeComparison out;
  auto sets_a = detail::doc_sets(inferred);
  auto sets_b = detail::doc_sets(truth);
  auto kids_a = detail::child_map(inferred);
  auto kids_b = detail::child_map(truth);
  NodeId root_a = inferred.empty() ? 0 : inferred[0][0];
  NodeId root_b = truth.empty() ? 0 : truth[0][0];
  out.topology_match = detail::canonical_form(root_a, kids_a, sets_a) ==
                       detail::canonical_form(root_b, kids_b, sets_b);
  if (out.topology_match) return out;

  // per-level greedy matching by document-set overlap
  std::map<std::pair<int, NodeId>, NodeId> match;  // (level, inferred) -> truth
  int max_level = 0;
  for (const auto& p : inferred) max_level = std::max(max_level, static_cast<int>(p.size()) - 1);
  for (int l = 1; l <= max_level; ++l) {
    std::set<NodeId> al, bl;
    for (const auto& p : inferred)
      if (static_cast<int>(p.size()) > l) al.insert(p[static_cast<std::size_t>(l)]);
    for (const auto& p : truth)
      if (static_cast<int>(p.size()) > l) bl.insert(p[static_cast<std::size_t>(l)]);
    std::vector<std::tuple<int, NodeId, NodeId>> pairs;
    for (NodeId a : al)
      for (NodeId b : bl) {
        const auto& sa = sets_a[a];
        const auto& sb = sets_b[b];
        std::vector<int> inter;
        std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                              std::back_inserter(inter));
        if (!inter.empty())
          pairs.emplace_back(static_cast<int>(inter.size()), a, b);
      }
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
      return std::get<0>(x) > std::get<0>(y);
    });
    std::set<NodeId> used_a, used_b;
    for (const auto& [ov, a, b] : pairs) {
      if (used_a.count(a) || used_b.count(b)) continue;
      used_a.insert(a);
      used_b.insert(b);
      match[{l, a}] = b;
    }
  }
  for (std::size_t d = 0; d < inferred.size(); ++d) {
    const auto& pa = inferred[d];
    const auto& pb = truth[d];
    bool ok = pa.size() == pb.size();
    if (ok)
      for (std::size_t l = 1; l < pa.size(); ++l) {
        auto it = match.find({static_cast<int>(l), pa[l]});
        if (it == match.end() || it->second != pb[l]) {
          ok = false;
          break;
        }
      }
    if (!ok) ++out.misallocated_paths;
  }
  return out;
}

// Geweke support: redraw all words from p(w | c, z) by sequential Polya-urn
// draws within each node, and rewrite the corpus and tree counts in place.
// The corpus must be the one the state was built on.
inline void resample_words(SamplerState& state, Corpus& corpus, Rng& rng) {
  if (&corpus != &state.corpus())
    throw std::invalid_argument("resample_words: corpus does not back this state");
  int V = corpus.vocabulary.size();
  // strip current word counts
  std::vector<NodeId> ids;
  for (const auto& [id, n] : state.tree().nodes()) ids.push_back(id);
  for (NodeId id : ids) {
    Node& n = state.tree().node(id);
    n.word_counts.clear();
    n.total_count = 0;
  }
  for (int d = 0; d < corpus.num_documents(); ++d) {
    auto& words = corpus.documents[static_cast<std::size_t>(d)].words;
    const auto& lv = state.levels()[static_cast<std::size_t>(d)];
    const auto& path = state.paths()[static_cast<std::size_t>(d)];
    for (std::size_t n = 0; n < words.size(); ++n) {
      const Node& node = state.tree().node(path[static_cast<std::size_t>(lv[n])]);
      double eta = state.config().eta_at(node.level);
      double denom = node.total_count + V * eta;
      double u = rng.uniform() * denom;
      int w = V - 1;
      double cum = 0.0;
      for (int t = 0; t < V; ++t) {
        cum += node.word_count(t) + eta;
        if (u < cum) {
          w = t;
          break;
        }
      }
      words[n] = w;
      state.tree().increment_word(node.id, w);
    }
  }
}

}  // namespace hlda
