#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hlda/corpus.hpp"
#include "hlda/distributions.hpp"
#include "hlda/hyper.hpp"
#include "hlda/tree.hpp"

namespace hlda {

enum class LevelPrior { gem, dirichlet };

struct SamplerConfig {
  int depth = 3;               // levels including the root (truncated mode)
  bool infinite_depth = false;
  double gamma = 1.0;
  std::vector<double> eta{1.0};  // per level; last entry reused below
  double gem_m = 0.5;
  double gem_pi = 1.0;
  LevelPrior level_prior = LevelPrior::gem;
  double level_alpha = 1.0;    // symmetric Dirichlet over levels (truncated)
  int max_level = 64;          // hard cap for the staged infinite sampler

  double eta_at(int level) const {
    return level < static_cast<int>(eta.size()) ? eta[level] : eta.back();
  }

  void validate() const {
    if (!infinite_depth && depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (gamma <= 0.0) throw std::invalid_argument("gamma must be > 0");
    if (eta.empty()) throw std::invalid_argument("eta must be non-empty");
    for (double e : eta)
      if (e <= 0.0) throw std::invalid_argument("eta entries must be > 0");
    if (!(gem_m > 0.0 && gem_m < 1.0)) throw std::invalid_argument("gem m must be in (0,1)");
    if (gem_pi <= 0.0) throw std::invalid_argument("gem pi must be > 0");
    if (level_alpha <= 0.0) throw std::invalid_argument("level alpha must be > 0");
    if (level_prior == LevelPrior::dirichlet && infinite_depth)
      throw std::invalid_argument("dirichlet level prior requires truncated depth");
  }
};

// Compact latent-state record: enough to rebuild the tree from counts.
struct Snapshot {
  long iteration = 0;
  double loglik = 0.0;
  std::vector<std::vector<NodeId>> paths;
  std::vector<std::vector<int>> levels;
  double gamma = 1.0, gem_m = 0.5, gem_pi = 1.0;
  std::vector<double> eta;
};

// Collapsed Gibbs sampler state over (c_{1:D}, z_{1:D}); beta and theta are
// marginalized out and represented only through tree counts.
class SamplerState {
public:
  SamplerState(const Corpus& corpus, SamplerConfig cfg, std::uint64_t seed)
      : SamplerState(corpus, std::move(cfg), NcrpTree{}, seed) {}

  // Start from an existing tree (held-out inference on a frozen train model).
  SamplerState(const Corpus& corpus, SamplerConfig cfg, NcrpTree tree,
               std::uint64_t seed)
      : corpus_(&corpus), cfg_(std::move(cfg)), tree_(std::move(tree)), rng_(seed) {
    cfg_.validate();
    rebuild_caches();
    init_documents();
  }

  // Rebuild from a snapshot; node ids are preserved.
  SamplerState(const Corpus& corpus, const SamplerConfig& base_cfg,
               const Snapshot& snap, std::uint64_t seed)
      : corpus_(&corpus), cfg_(base_cfg), rng_(seed) {
    cfg_.gamma = snap.gamma;
    cfg_.gem_m = snap.gem_m;
    cfg_.gem_pi = snap.gem_pi;
    if (!snap.eta.empty()) cfg_.eta = snap.eta;
    cfg_.validate();
    rebuild_caches();
    load_assignments(snap.paths, snap.levels);
    iteration_ = snap.iteration;
  }

  const Corpus& corpus() const { return *corpus_; }
  const SamplerConfig& config() const { return cfg_; }
  const NcrpTree& tree() const { return tree_; }
  NcrpTree& tree() { return tree_; }
  const std::vector<std::vector<NodeId>>& paths() const { return paths_; }
  const std::vector<std::vector<int>>& levels() const { return levels_; }
  const std::vector<std::vector<int>>& level_counts() const { return level_counts_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  long iteration() const { return iteration_; }
  void set_iteration(long it) { iteration_ = it; }

  void set_gamma(double g) { cfg_.gamma = g; }
  void set_gem(double m, double pi) { cfg_.gem_m = m; cfg_.gem_pi = pi; }
  void set_eta_scalar(double eta) {
    cfg_.eta.assign(cfg_.eta.size(), eta);
    rebuild_caches();
  }

  // Resample z_{d,n} given everything else.
  int sample_level(int d, int n) {
    auto& lv = levels_[static_cast<std::size_t>(d)];
    auto& lc = level_counts_[static_cast<std::size_t>(d)];
    auto& path = paths_[static_cast<std::size_t>(d)];
    int w = corpus_->documents[static_cast<std::size_t>(d)].words[static_cast<std::size_t>(n)];
    int old = lv[static_cast<std::size_t>(n)];
    tree_.decrement_word(path[static_cast<std::size_t>(old)], w);
    --lc[static_cast<std::size_t>(old)];

    int newl;
    if (!cfg_.infinite_depth) {
      newl = sample_level_truncated(lc, path, w);
    } else {
      newl = sample_level_infinite(d, lc, w);
    }
    if (newl >= static_cast<int>(lc.size())) lc.resize(static_cast<std::size_t>(newl) + 1, 0);
    ++lc[static_cast<std::size_t>(newl)];
    lv[static_cast<std::size_t>(n)] = newl;
    tree_.increment_word(paths_[static_cast<std::size_t>(d)][static_cast<std::size_t>(newl)], w);
    return newl;
  }

  // Resample c_d as a block given everything else.
  void sample_path(int d) {
    auto& lv = levels_[static_cast<std::size_t>(d)];
    auto& path = paths_[static_cast<std::size_t>(d)];
    const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
    // truncated trees keep full-depth paths; infinite paths reach max(z_d)
    int target = 0;
    if (cfg_.infinite_depth) {
      for (int z : lv) target = std::max(target, z);
    } else {
      target = cfg_.depth - 1;
    }

    for (std::size_t n = 0; n < words.size(); ++n)
      tree_.decrement_word(path[static_cast<std::size_t>(lv[n])], words[n]);
    tree_.remove_document_from_path(path);

    // per-level word counts of this document
    std::vector<std::vector<std::pair<int, int>>> docw(static_cast<std::size_t>(target) + 1);
    std::vector<int> doc_tot(static_cast<std::size_t>(target) + 1, 0);
    {
      std::vector<std::unordered_map<int, int>> acc(static_cast<std::size_t>(target) + 1);
      for (std::size_t n = 0; n < words.size(); ++n) {
        ++acc[static_cast<std::size_t>(lv[n])][words[n]];
        ++doc_tot[static_cast<std::size_t>(lv[n])];
      }
      for (std::size_t l = 0; l < acc.size(); ++l)
        docw[l].assign(acc[l].begin(), acc[l].end());
    }

    // likelihood of placing the document's level-l words in an empty node
    std::vector<double> fresh(static_cast<std::size_t>(target) + 1, 0.0);
    for (int l = 0; l <= target; ++l) fresh[static_cast<std::size_t>(l)] = fresh_level_factor(l, docw[static_cast<std::size_t>(l)], doc_tot[static_cast<std::size_t>(l)]);
    std::vector<double> fresh_suffix(static_cast<std::size_t>(target) + 2, 0.0);
    for (int l = target; l >= 0; --l)
      fresh_suffix[static_cast<std::size_t>(l)] = fresh_suffix[static_cast<std::size_t>(l) + 1] + fresh[static_cast<std::size_t>(l)];

    std::vector<PathCandidate> cands;
    std::vector<double> scores;
    score_subtree(tree_.node(tree_.root()), target, 0.0, 0.0, docw, doc_tot,
                  fresh_suffix, cands, scores);

    std::size_t pick = sample_discrete(scores, rng_);
    auto new_path = tree_.add_document_to_path(cands[pick], target);
    for (std::size_t n = 0; n < words.size(); ++n)
      tree_.increment_word(new_path[static_cast<std::size_t>(lv[n])], words[n]);
    path = std::move(new_path);
    if (cfg_.infinite_depth)
      level_counts_[static_cast<std::size_t>(d)].resize(static_cast<std::size_t>(target) + 1);
  }

  // One full sweep: for each document, resample its path then its levels.
  void gibbs_sweep() {
    int d_count = corpus_->num_documents();
    for (int i = 0; i < d_count; ++i) {
      int d = i;
      if (random_scan_) d = rng_.uniform_int(d_count);
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      if (words.empty()) continue;
      sample_path(d);
      for (std::size_t n = 0; n < words.size(); ++n)
        sample_level(d, static_cast<int>(n));
    }
    if (reattach_moves_ && !cfg_.infinite_depth && cfg_.depth >= 3) {
      int proposals = 0;
      for (const auto& [id, n] : tree_.nodes())
        if (n.level == 2) ++proposals;
      for (int r = 0; r < proposals; ++r) propose_reattach();
    }
    ++iteration_;
  }

  void set_random_scan(bool on) { random_scan_ = on; }
  void set_reattach_moves(bool on) { reattach_moves_ = on; }

  // Metropolis move regrouping whole branches: detach a level-2 node, with
  // its subtree and documents, re-seat it under another level-1 parent
  // (existing or fresh), and re-draw the moved documents' level allocations
  // sequentially from their conditionals.  Per-document path resampling can
  // split nodes but can never merge two established siblings, and a bare
  // reattachment is almost always rejected because each branch settles on
  // its own arbitrary split of content between the levels; re-drawing the
  // levels inside the proposal bridges that valley.  The reverse-move
  // probability is the same sequential scheme replaying the old levels.
  void propose_reattach() {
    std::vector<NodeId> xs;
    for (const auto& [id, n] : tree_.nodes())
      if (n.level == 2) xs.push_back(id);
    if (xs.empty()) return;
    NodeId x = xs[static_cast<std::size_t>(rng_.uniform_int(static_cast<int>(xs.size())))];
    const NodeId p = tree_.node(x).parent;
    const int m = static_cast<int>(tree_.node(tree_.root()).children.size());

    // target: one of the other level-1 nodes, or (last index) a fresh one
    std::size_t pick = static_cast<std::size_t>(rng_.uniform_int(m));
    NodeId q = kNoNode;
    {
      std::size_t i = 0;
      for (NodeId mid : tree_.node(tree_.root()).children) {
        if (mid == p) continue;
        if (i == pick) {
          q = mid;
          break;
        }
        ++i;
      }
    }
    const bool p_dies = tree_.node(p).children.size() == 1;
    if (p_dies && q == kNoNode) return;  // relabels the same state
    const int m_after = m - (p_dies ? 1 : 0) + (q == kNoNode ? 1 : 0);

    std::vector<int> members;
    for (std::size_t d = 0; d < paths_.size(); ++d)
      if (paths_[d].size() > 2 && paths_[d][2] == x)
        members.push_back(static_cast<int>(d));
    if (members.empty()) return;

    const double ll_x = complete_log_likelihood();
    std::vector<std::vector<int>> old_z;
    old_z.reserve(members.size());
    for (int d : members) old_z.push_back(levels_[static_cast<std::size_t>(d)]);

    reattach_with_words(x, q, members);
    const double log_qf = redraw_member_levels(members, nullptr);
    const double ll_y = complete_log_likelihood();
    std::vector<std::vector<int>> new_z;
    new_z.reserve(members.size());
    for (int d : members) new_z.push_back(levels_[static_cast<std::size_t>(d)]);

    // reverse replay: reattach back and force the old levels, accumulating
    // the reverse proposal probability; this also restores the old state
    const NodeId p_back = tree_.has_node(p) ? p : kNoNode;
    reattach_with_words(x, p_back, members);
    const double log_qr = redraw_member_levels(members, &old_z);

    double log_r = (ll_y - ll_x) + std::log(static_cast<double>(m)) -
                   std::log(static_cast<double>(m_after)) + log_qr - log_qf;
    if (log_r < 0.0 && rng_.uniform() >= std::exp(log_r)) return;

    const NodeId q_redo = (q != kNoNode && tree_.has_node(q)) ? q : kNoNode;
    reattach_with_words(x, q_redo, members);
    force_member_levels(members, new_z);
  }

  // Data-guided re-initialization: rebuild the tree by adding documents one
  // at a time, each placed by its path posterior given the documents already
  // present and locally resampled for a few passes.  Growth then mirrors the
  // sequential CRP but lets the data steer documents onto existing branches,
  // which a cold prior draw scatters irrecoverably (single-document moves can
  // split nodes later but never merge them).
  void incremental_warm_start(int sweeps_per_doc = 2) {
    tree_ = NcrpTree{};
    int D = corpus_->num_documents();
    paths_.assign(static_cast<std::size_t>(D), {});
    levels_.assign(static_cast<std::size_t>(D), {});
    level_counts_.assign(static_cast<std::size_t>(D), {});
    for (int d = 0; d < D; ++d) {
      place_document_prior(d);
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      if (words.empty()) continue;
      for (int r = 0; r < sweeps_per_doc; ++r) {
        sample_path(d);
        for (std::size_t n = 0; n < words.size(); ++n)
          sample_level(d, static_cast<int>(n));
      }
    }
  }

  // log p(c | gamma): product over restaurants of exchangeable CRP partition
  // probabilities of their children's occupancies.
  double log_p_paths(double gamma) const {
    double lp = 0.0;
    std::vector<int> sizes;
    for (const auto& [id, n] : tree_.nodes()) {
      if (n.children.empty()) continue;
      sizes.clear();
      for (NodeId ch : n.children) sizes.push_back(tree_.node(ch).doc_count);
      lp += crp_partition_log_prob(sizes, gamma);
    }
    return lp;
  }

  // log p(z | m, pi) under the GEM prior, in closed form per document:
  //   prod_k Beta(a + c_k, b + g_k) / Beta(a, b),  a = (1-m)pi, b = m pi,
  // with c_k = #{z = k} and g_k = #{z > k}; truncated mode stops at L-1.
  double log_p_levels_gem(double m, double pi) const {
    double a = (1.0 - m) * pi;
    double b = m * pi;
    double log_beta_ab = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double lp = 0.0;
    for (const auto& lc : level_counts_) {
      int kmax = static_cast<int>(lc.size());
      if (!cfg_.infinite_depth) kmax = std::min(kmax, cfg_.depth - 1);
      double gt = 0.0;  // #{z > k}
      for (std::size_t i = static_cast<std::size_t>(kmax); i < lc.size(); ++i) gt += lc[i];
      for (int k = kmax; k >= 1; --k) {
        double ck = lc[static_cast<std::size_t>(k - 1)];
        lp += std::lgamma(a + ck) + std::lgamma(b + gt) - std::lgamma(a + ck + b + gt) -
              log_beta_ab;
        gt += ck;
      }
    }
    return lp;
  }

  double log_p_levels_dirichlet(double alpha) const {
    int L = cfg_.depth;
    double lp = 0.0;
    for (const auto& lc : level_counts_) {
      long nd = 0;
      for (int c : lc) nd += c;
      lp += std::lgamma(L * alpha) - std::lgamma(L * alpha + static_cast<double>(nd));
      for (int l = 0; l < L; ++l) {
        int c = l < static_cast<int>(lc.size()) ? lc[static_cast<std::size_t>(l)] : 0;
        if (c > 0) lp += std::lgamma(alpha + c) - std::lgamma(alpha);
      }
    }
    return lp;
  }

  double log_p_levels() const {
    return cfg_.level_prior == LevelPrior::gem
               ? log_p_levels_gem(cfg_.gem_m, cfg_.gem_pi)
               : log_p_levels_dirichlet(cfg_.level_alpha);
  }

  // log p(w | c, z, eta): product over nodes of Dirichlet-multinomial
  // marginals with that node's level smoothing.
  // summed in term order per node, so resumed chains match bit for bit
  double log_p_words() const {
    double lp = 0.0;
    std::vector<std::pair<int, int>> sorted;
    for (const auto& [id, n] : tree_.nodes()) {
      if (n.total_count == 0) continue;
      auto& lgE = lg_eta_[cache_index(n.level)];
      auto& lgV = lg_veta_[cache_index(n.level)];
      double f = lgV(0) - lgV(n.total_count);
      double lg_eta0 = lgE(0);
      sorted.assign(n.word_counts.begin(), n.word_counts.end());
      std::sort(sorted.begin(), sorted.end());
      for (const auto& [w, c] : sorted) f += lgE(c) - lg_eta0;
      lp += f;
    }
    return lp;
  }

  double log_p_words_scalar(double eta) const {
    int V = corpus_->vocabulary.size();
    double lp = 0.0;
    for (const auto& [id, n] : tree_.nodes()) {
      if (n.total_count == 0) continue;
      lp += log_dirichlet_multinomial(n.word_counts, eta, V);
    }
    return lp;
  }

  double complete_log_likelihood() const {
    return log_p_paths(cfg_.gamma) + log_p_levels() + log_p_words();
  }

  Snapshot take_snapshot() const {
    Snapshot s;
    s.iteration = iteration_;
    s.loglik = complete_log_likelihood();
    s.paths = paths_;
    s.levels = levels_;
    s.gamma = cfg_.gamma;
    s.gem_m = cfg_.gem_m;
    s.gem_pi = cfg_.gem_pi;
    s.eta = cfg_.eta;
    return s;
  }

  // Throws if counts are inconsistent with the assignments.
  void validate() const {
    tree_.check_invariants(corpus_->total_tokens());
    std::unordered_map<NodeId, std::unordered_map<int, int>> shadow;
    for (int d = 0; d < corpus_->num_documents(); ++d) {
      const auto& path = paths_[static_cast<std::size_t>(d)];
      const auto& lv = levels_[static_cast<std::size_t>(d)];
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      if (lv.size() != words.size()) throw std::logic_error("levels/words length mismatch");
      for (std::size_t i = 1; i < path.size(); ++i)
        if (tree_.node(path[i]).parent != path[i - 1])
          throw std::logic_error("path is not a root chain");
      for (std::size_t n = 0; n < lv.size(); ++n) {
        if (lv[n] < 0 || lv[n] >= static_cast<int>(path.size()))
          throw std::logic_error("level outside path");
        if (!cfg_.infinite_depth && lv[n] >= cfg_.depth)
          throw std::logic_error("level beyond truncation");
        ++shadow[path[static_cast<std::size_t>(lv[n])]][words[n]];
      }
    }
    for (const auto& [id, n] : tree_.nodes()) {
      auto it = shadow.find(id);
      long expect = 0;
      if (it != shadow.end())
        for (const auto& [w, c] : it->second) expect += c;
      if (n.total_count != expect)
        throw std::logic_error("node word totals disagree with assignments");
      if (it != shadow.end())
        for (const auto& [w, c] : it->second)
          if (n.word_count(w) != c)
            throw std::logic_error("node word counts disagree with assignments");
    }
  }

  // Predictive word probability at a node: (n_w + eta) / (n + V eta).
  double predictive(const Node& n, int w, int level) const {
    double eta = cfg_.eta_at(level);
    return (n.word_count(w) + eta) /
           (static_cast<double>(n.total_count) + v_ * eta);
  }

private:
  std::size_t cache_index(int level) const {
    return static_cast<std::size_t>(
        std::min<int>(level, static_cast<int>(cfg_.eta.size()) - 1));
  }

  void rebuild_caches() {
    v_ = corpus_->vocabulary.size();
    lg_eta_.clear();
    lg_veta_.clear();
    for (double e : cfg_.eta) {
      lg_eta_.emplace_back(e);
      lg_veta_.emplace_back(v_ * e);
    }
  }

  // Fills wbuf_ with the unnormalized truncated level conditionals.
  void level_weights_truncated(const std::vector<int>& lc,
                               const std::vector<NodeId>& path, int w) {
    int L = cfg_.depth;
    wbuf_.resize(static_cast<std::size_t>(L));
    if (cfg_.level_prior == LevelPrior::dirichlet) {
      for (int l = 0; l < L; ++l)
        wbuf_[static_cast<std::size_t>(l)] =
            (lc[static_cast<std::size_t>(l)] + cfg_.level_alpha) *
            predictive(tree_.node(path[static_cast<std::size_t>(l)]), w, l);
    } else {
      for (int l = 0; l < L; ++l)
        wbuf_[static_cast<std::size_t>(l)] =
            gem_level_conditional_truncated(lc, cfg_.gem_m, cfg_.gem_pi, l + 1, L) *
            predictive(tree_.node(path[static_cast<std::size_t>(l)]), w, l);
    }
  }

  int sample_level_truncated(const std::vector<int>& lc,
                             const std::vector<NodeId>& path, int w) {
    level_weights_truncated(lc, path, w);
    return static_cast<int>(sample_discrete_linear(wbuf_, rng_));
  }

  // Move x (a level-2 node) together with its member documents' level-1
  // words under `target` (kNoNode = fresh child of the root).
  void reattach_with_words(NodeId x, NodeId target, const std::vector<int>& members) {
    const NodeId p = tree_.node(x).parent;
    if (target == kNoNode) target = tree_.add_child(tree_.root());
    for (int d : members) {
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      const auto& lv = levels_[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < words.size(); ++n)
        if (lv[n] == 1) {
          tree_.decrement_word(p, words[n]);
          tree_.increment_word(target, words[n]);
        }
    }
    tree_.reattach_subtree(x, target);
    for (int d : members) paths_[static_cast<std::size_t>(d)][1] = target;
  }

  // Sequentially re-draw (or, with `forced`, replay) the member documents'
  // level allocations: all member tokens are first removed, then re-added in
  // document/token order, each drawn from its conditional given only the
  // tokens added so far.  Building the allocation from scratch lets a moved
  // group adopt the target branch's word-to-level split instead of being
  // pinned to its own transferred counts.  Returns the log proposal
  // probability of the resulting assignment.
  double redraw_member_levels(const std::vector<int>& members,
                              const std::vector<std::vector<int>>* forced) {
    for (int d : members) {
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      const auto& lv = levels_[static_cast<std::size_t>(d)];
      auto& lc = level_counts_[static_cast<std::size_t>(d)];
      const auto& path = paths_[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < words.size(); ++n)
        tree_.decrement_word(path[static_cast<std::size_t>(lv[n])], words[n]);
      lc.assign(lc.size(), 0);
    }
    double logq = 0.0;
    for (std::size_t mi = 0; mi < members.size(); ++mi) {
      int d = members[mi];
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      auto& lv = levels_[static_cast<std::size_t>(d)];
      auto& lc = level_counts_[static_cast<std::size_t>(d)];
      const auto& path = paths_[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < words.size(); ++n) {
        int w = words[n];
        level_weights_truncated(lc, path, w);
        double tot = 0.0;
        for (double v : wbuf_) tot += v;
        int z = forced ? (*forced)[mi][n]
                       : static_cast<int>(sample_discrete_linear(wbuf_, rng_));
        logq += std::log(wbuf_[static_cast<std::size_t>(z)] / tot);
        ++lc[static_cast<std::size_t>(z)];
        lv[n] = z;
        tree_.increment_word(path[static_cast<std::size_t>(z)], w);
      }
    }
    return logq;
  }

  void force_member_levels(const std::vector<int>& members,
                           const std::vector<std::vector<int>>& z) {
    for (std::size_t mi = 0; mi < members.size(); ++mi) {
      int d = members[mi];
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      auto& lv = levels_[static_cast<std::size_t>(d)];
      auto& lc = level_counts_[static_cast<std::size_t>(d)];
      const auto& path = paths_[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < words.size(); ++n) {
        int zn = z[mi][n];
        if (zn == lv[n]) continue;
        tree_.decrement_word(path[static_cast<std::size_t>(lv[n])], words[n]);
        --lc[static_cast<std::size_t>(lv[n])];
        ++lc[static_cast<std::size_t>(zn)];
        lv[n] = zn;
        tree_.increment_word(path[static_cast<std::size_t>(zn)], words[n]);
      }
    }
  }

  int sample_level_infinite(int d, const std::vector<int>& lc, int w) {
    const auto& path = paths_[static_cast<std::size_t>(d)];
    int maxl = -1;
    for (int l = 0; l < static_cast<int>(lc.size()); ++l)
      if (lc[static_cast<std::size_t>(l)] > 0) maxl = l;
    double m = cfg_.gem_m, pi = cfg_.gem_pi;
    wbuf_.resize(static_cast<std::size_t>(maxl) + 2);
    for (int l = 0; l <= maxl; ++l)
      wbuf_[static_cast<std::size_t>(l)] =
          gem_level_conditional(lc, m, pi, l + 1) *
          predictive(tree_.node(path[static_cast<std::size_t>(l)]), w, l);
    // all deeper levels, scored with the fresh-node word probability 1/V
    wbuf_[static_cast<std::size_t>(maxl) + 1] =
        gem_tail_mass(lc, m, pi, maxl + 1) / v_;
    int pick = static_cast<int>(sample_discrete_linear(wbuf_, rng_));
    if (pick <= maxl) return pick;

    // staged Bernoulli descent beyond the represented levels
    int l = maxl + 1;
    while (l < cfg_.max_level) {
      double p_hat = l < static_cast<int>(path.size())
                         ? predictive(tree_.node(path[static_cast<std::size_t>(l)]), w, l)
                         : 1.0 / v_;
      double stop = (1.0 - m) * p_hat / ((1.0 - m) * p_hat + m / v_);
      if (rng_.uniform() < stop) break;
      ++l;
    }
    extend_path(d, l);
    return l;
  }

  // Extend the document's path to `to_level`, choosing children by the CRP at
  // each new restaurant.
  void extend_path(int d, int to_level) {
    auto& path = paths_[static_cast<std::size_t>(d)];
    while (static_cast<int>(path.size()) <= to_level) {
      const Node& end = tree_.node(path.back());
      std::vector<int> sizes;
      for (NodeId ch : end.children) sizes.push_back(tree_.node(ch).doc_count);
      NodeId chosen = kNoNode;
      if (!sizes.empty()) {
        auto probs = crp_next_table_probs(sizes, cfg_.gamma);
        double u = rng_.uniform();
        double cum = 0.0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
          cum += probs[i];
          if (u < cum) {
            chosen = end.children[i];
            break;
          }
        }
      }
      path.push_back(tree_.extend_path_node(end.id, chosen));
    }
    auto& lc = level_counts_[static_cast<std::size_t>(d)];
    if (lc.size() < path.size()) lc.resize(path.size(), 0);
  }

  double fresh_level_factor(int l, const std::vector<std::pair<int, int>>& docw_l,
                            int tot_l) const {
    if (tot_l == 0) return 0.0;
    auto& lgE = lg_eta_[cache_index(l)];
    auto& lgV = lg_veta_[cache_index(l)];
    double f = lgV(0) - lgV(tot_l);
    double lg0 = lgE(0);
    for (const auto& [w, c] : docw_l) f += lgE(c) - lg0;
    return f;
  }

  // Dirichlet normalizing-constant ratio for dropping the document's level-l
  // words into an existing node.
  double node_level_factor(const Node& nd,
                           const std::vector<std::pair<int, int>>& docw_l,
                           int tot_l) const {
    if (tot_l == 0) return 0.0;
    auto& lgE = lg_eta_[cache_index(nd.level)];
    auto& lgV = lg_veta_[cache_index(nd.level)];
    double f = lgV(nd.total_count) - lgV(nd.total_count + tot_l);
    for (const auto& [w, c] : docw_l) {
      int base = nd.word_count(w);
      f += lgE(base + c) - lgE(base);
    }
    return f;
  }

  void score_subtree(const Node& nd, int target, double prior_lp, double like_lp,
                     const std::vector<std::vector<std::pair<int, int>>>& docw,
                     const std::vector<int>& doc_tot,
                     const std::vector<double>& fresh_suffix,
                     std::vector<PathCandidate>& cands,
                     std::vector<double>& scores) {
    like_lp += node_level_factor(nd, docw[static_cast<std::size_t>(nd.level)],
                                 doc_tot[static_cast<std::size_t>(nd.level)]);
    if (nd.level == target) {
      cands.push_back({nd.id, 0});
      scores.push_back(prior_lp + like_lp);
      return;
    }
    double cust = tree_.customers(nd);
    double denom = std::log(cfg_.gamma + cust);
    cands.push_back({nd.id, target - nd.level});
    scores.push_back(prior_lp + std::log(cfg_.gamma) - denom + like_lp +
                     fresh_suffix[static_cast<std::size_t>(nd.level) + 1]);
    for (NodeId ch : nd.children) {
      const Node& child = tree_.node(ch);
      score_subtree(child, target,
                    prior_lp + std::log(static_cast<double>(child.doc_count)) - denom,
                    like_lp, docw, doc_tot, fresh_suffix, cands, scores);
    }
  }

  // Forward draws from the prior: levels from the level prior, paths by
  // sequential nCRP seating given the documents placed so far.
  void init_documents() {
    int D = corpus_->num_documents();
    paths_.assign(static_cast<std::size_t>(D), {});
    levels_.assign(static_cast<std::size_t>(D), {});
    level_counts_.assign(static_cast<std::size_t>(D), {});
    for (int d = 0; d < D; ++d) place_document_prior(d);
  }

  void place_document_prior(int d) {
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      auto& lv = levels_[static_cast<std::size_t>(d)];
      auto& lc = level_counts_[static_cast<std::size_t>(d)];
      lv.resize(words.size());
      if (!cfg_.infinite_depth)
        lc.assign(static_cast<std::size_t>(cfg_.depth), 0);
      int target = 0;
      for (std::size_t n = 0; n < words.size(); ++n) {
        int z = draw_prior_level(lc);
        if (z >= static_cast<int>(lc.size())) lc.resize(static_cast<std::size_t>(z) + 1, 0);
        ++lc[static_cast<std::size_t>(z)];
        lv[n] = z;
        target = std::max(target, z);
      }
      if (!cfg_.infinite_depth) target = cfg_.depth - 1;
      PathCandidate cand = draw_prior_path(target);
      auto path = tree_.add_document_to_path(cand, target);
      for (std::size_t n = 0; n < words.size(); ++n)
        tree_.increment_word(path[static_cast<std::size_t>(lv[n])], words[n]);
      paths_[static_cast<std::size_t>(d)] = std::move(path);
      if (lc.size() < static_cast<std::size_t>(target) + 1)
        lc.resize(static_cast<std::size_t>(target) + 1, 0);
  }

  int draw_prior_level(const std::vector<int>& lc) {
    if (!cfg_.infinite_depth) {
      int L = cfg_.depth;
      wbuf_.resize(static_cast<std::size_t>(L));
      for (int l = 0; l < L; ++l)
        wbuf_[static_cast<std::size_t>(l)] =
            cfg_.level_prior == LevelPrior::dirichlet
                ? lc[static_cast<std::size_t>(l)] + cfg_.level_alpha
                : gem_level_conditional_truncated(lc, cfg_.gem_m, cfg_.gem_pi, l + 1, L);
      return static_cast<int>(sample_discrete_linear(wbuf_, rng_));
    }
    int maxl = -1;
    for (int l = 0; l < static_cast<int>(lc.size()); ++l)
      if (lc[static_cast<std::size_t>(l)] > 0) maxl = l;
    wbuf_.resize(static_cast<std::size_t>(maxl) + 2);
    for (int l = 0; l <= maxl; ++l)
      wbuf_[static_cast<std::size_t>(l)] =
          gem_level_conditional(lc, cfg_.gem_m, cfg_.gem_pi, l + 1);
    wbuf_[static_cast<std::size_t>(maxl) + 1] =
        gem_tail_mass(lc, cfg_.gem_m, cfg_.gem_pi, maxl + 1);
    int pick = static_cast<int>(sample_discrete_linear(wbuf_, rng_));
    if (pick <= maxl) return pick;
    int l = maxl + 1;
    while (l < cfg_.max_level && rng_.uniform() >= 1.0 - cfg_.gem_m) ++l;
    return l;
  }

  PathCandidate draw_prior_path(int target) {
    NodeId cur = tree_.root();
    while (tree_.node(cur).level < target) {
      const Node& n = tree_.node(cur);
      if (n.children.empty()) return {cur, target - n.level};
      std::vector<int> sizes;
      for (NodeId ch : n.children) sizes.push_back(tree_.node(ch).doc_count);
      auto probs = crp_next_table_probs(sizes, cfg_.gamma);
      double u = rng_.uniform();
      double cum = 0.0;
      NodeId chosen = kNoNode;
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        cum += probs[i];
        if (u < cum) {
          chosen = n.children[i];
          break;
        }
      }
      if (chosen == kNoNode) return {cur, target - n.level};
      cur = chosen;
    }
    return {cur, 0};
  }

  void load_assignments(const std::vector<std::vector<NodeId>>& paths,
                        const std::vector<std::vector<int>>& levels) {
    int D = corpus_->num_documents();
    if (static_cast<int>(paths.size()) != D || static_cast<int>(levels.size()) != D)
      throw std::runtime_error("snapshot does not match corpus size");
    paths_ = paths;
    levels_ = levels;
    level_counts_.assign(static_cast<std::size_t>(D), {});
    for (int d = 0; d < D; ++d) {
      const auto& path = paths_[static_cast<std::size_t>(d)];
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      const auto& lv = levels_[static_cast<std::size_t>(d)];
      if (lv.size() != words.size())
        throw std::runtime_error("snapshot levels do not match document lengths");
      for (std::size_t i = 0; i < path.size(); ++i) {
        NodeId parent = i == 0 ? kNoNode : path[i - 1];
        if (i == 0 && path[0] != tree_.root())
          throw std::runtime_error("snapshot path does not start at the root");
        tree_.ensure_node(path[i], parent, static_cast<int>(i));
        ++tree_.node(path[i]).doc_count;
      }
      auto& lc = level_counts_[static_cast<std::size_t>(d)];
      lc.assign(std::max(path.size(),
                         static_cast<std::size_t>(cfg_.infinite_depth ? 1 : cfg_.depth)),
                0);
      for (std::size_t n = 0; n < words.size(); ++n) {
        int z = lv[n];
        if (z < 0 || z >= static_cast<int>(path.size()))
          throw std::runtime_error("snapshot level outside its path");
        ++lc[static_cast<std::size_t>(z)];
        tree_.increment_word(path[static_cast<std::size_t>(z)], words[n]);
      }
    }
  }

  const Corpus* corpus_;
  SamplerConfig cfg_;
  NcrpTree tree_;
  std::vector<std::vector<NodeId>> paths_;
  std::vector<std::vector<int>> levels_;
  std::vector<std::vector<int>> level_counts_;
  Rng rng_;
  long iteration_ = 0;
  bool random_scan_ = false;
  bool reattach_moves_ = false;
  int v_ = 0;
  mutable std::vector<LgammaCache> lg_eta_, lg_veta_;
  std::vector<double> wbuf_;
};

// Standard biased autocorrelation estimator.
inline std::vector<double> autocorrelation(std::span<const double> series,
                                           int max_lag) {
  if (static_cast<int>(series.size()) <= max_lag)
    throw std::invalid_argument("autocorrelation: series shorter than max_lag");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(series.size());
  double denom = 0.0;
  for (double x : series) denom += (x - mean) * (x - mean);
  if (denom == 0.0)
    throw std::invalid_argument("autocorrelation: constant series");
  std::vector<double> acf(static_cast<std::size_t>(max_lag) + 1);
  for (int k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(k) < series.size(); ++t)
      s += (series[t] - mean) * (series[t + static_cast<std::size_t>(k)] - mean);
    acf[static_cast<std::size_t>(k)] = s / denom;
  }
  return acf;
}

struct RunConfig {
  long iters = 10000;
  long burn_in = 2000;
  long thin = 100;
  std::uint64_t seed = 1;
  bool record_snapshots = true;
  bool sample_hypers = false;
  bool random_scan = false;
  bool warm_start = false;  // data-guided incremental initialization
  bool reattach = false;    // branch-regrouping Metropolis moves
  HyperPriors priors;
  MhConfig mh;
};

struct ChainResult {
  std::vector<double> loglik_trace;
  std::vector<Snapshot> snapshots;
  Snapshot mode;
  double mode_loglik = kNegInf;
  int chain_index = 0;
  double seconds = 0.0;
};

// Continue a chain until rcfg.iters total iterations; used both for fresh
// runs and checkpoint resume.
inline void continue_chain(SamplerState& state, const RunConfig& rcfg,
                           ChainResult& result) {
  if (rcfg.sample_hypers) {
    if (state.config().level_prior != LevelPrior::gem)
      throw std::invalid_argument("hyperparameter sampling requires the GEM level prior");
    for (double e : state.config().eta)
      if (e != state.config().eta.front())
        throw std::invalid_argument("hyperparameter sampling requires a scalar eta");
  }
  state.set_random_scan(rcfg.random_scan);
  state.set_reattach_moves(rcfg.reattach);
  auto t0 = std::chrono::steady_clock::now();
  while (state.iteration() < rcfg.iters) {
    state.gibbs_sweep();
    if (rcfg.sample_hypers)
      mh_update_hyperparameters(state, rcfg.priors, rcfg.mh, state.rng());
    double ll = state.complete_log_likelihood();
    result.loglik_trace.push_back(ll);
    long t = state.iteration();
    if (ll > result.mode_loglik) {
      result.mode_loglik = ll;
      result.mode = state.take_snapshot();
    }
    if (rcfg.record_snapshots && t > rcfg.burn_in &&
        (t - rcfg.burn_in) % rcfg.thin == 0)
      result.snapshots.push_back(state.take_snapshot());
  }
  result.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline ChainResult run_chain(const Corpus& corpus, const SamplerConfig& cfg,
                             const RunConfig& rcfg) {
  if (rcfg.iters <= rcfg.burn_in || rcfg.burn_in < 0)
    throw std::invalid_argument("run_chain: need iters > burn_in >= 0");
  SamplerState state(corpus, cfg, rcfg.seed);
  if (rcfg.warm_start) state.incremental_warm_start();
  ChainResult result;
  continue_chain(state, rcfg, result);
  return result;
}

// Snapshot with the highest recorded log likelihood across chains; ties break
// toward the earlier chain.
inline const Snapshot& posterior_mode(std::span<const ChainResult> chains) {
  if (chains.empty()) throw std::invalid_argument("posterior_mode: no chains");
  const ChainResult* best = &chains[0];
  for (const auto& c : chains)
    if (c.mode_loglik > best->mode_loglik) best = &c;
  return best->mode;
}

}  // namespace hlda
