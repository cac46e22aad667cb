#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hlda/corpus.hpp"
#include "hlda/lda.hpp"
#include "hlda/sampler.hpp"

namespace hlda {

// Mean posterior word probabilities of a topic: (n_w + eta) / (n + V eta).
inline std::vector<double> topic_word_probs(const Node& node, double eta, int V) {
  std::vector<double> probs(static_cast<std::size_t>(V));
  double denom = static_cast<double>(node.total_count) + V * eta;
  for (int w = 0; w < V; ++w)
    probs[static_cast<std::size_t>(w)] = (node.word_count(w) + eta) / denom;
  return probs;
}

inline std::vector<double> topic_word_probs(const SamplerState& state, NodeId id) {
  const Node& n = state.tree().node(id);
  return topic_word_probs(n, state.config().eta_at(n.level),
                          state.corpus().vocabulary.size());
}

// k most probable terms, ties broken by term id.
inline std::vector<std::pair<std::string, double>> top_words(
    const Node& node, double eta, const Vocabulary& vocab, int k) {
  int V = vocab.size();
  if (k < 1 || k > V) throw std::invalid_argument("top_words: need 1 <= k <= V");
  auto probs = topic_word_probs(node, eta, V);
  std::vector<int> order(static_cast<std::size_t>(V));
  for (int w = 0; w < V; ++w) order[static_cast<std::size_t>(w)] = w;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  std::vector<std::pair<std::string, double>> out;
  for (int i = 0; i < k; ++i)
    out.emplace_back(vocab.term(order[static_cast<std::size_t>(i)]),
                     probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return out;
}

struct HeldoutConfig {
  int max_outer = 100;     // outer samples used (paper: 100, lag 100)
  int inner_samples = 800; // harmonic-mean samples per outer sample
  int inner_burnin = 100;
  std::uint64_t seed = 1;
};

struct HeldoutResult {
  double log_lik = 0.0;
  std::vector<double> per_outer;       // per-outer-sample log estimates
  double mean_inner_variance = 0.0;    // variance of inner log likelihoods
};

namespace detail {

struct BaseCounts {
  std::unordered_map<NodeId, std::unordered_map<int, int>> words;
  std::unordered_map<NodeId, long> totals;
  int count(NodeId id, int w) const {
    auto it = words.find(id);
    if (it == words.end()) return 0;
    auto jt = it->second.find(w);
    return jt == it->second.end() ? 0 : jt->second;
  }
  long total(NodeId id) const {
    auto it = totals.find(id);
    return it == totals.end() ? 0 : it->second;
  }
};

// log p(held-out words | c, z, train counts): Dirichlet-multinomial ratios
// against the frozen base counts, node by node.
inline double heldout_words_loglik(const SamplerState& ho, const BaseCounts& base) {
  std::unordered_map<NodeId, std::unordered_map<int, int>> ho_counts;
  const Corpus& corpus = ho.corpus();
  for (int d = 0; d < corpus.num_documents(); ++d) {
    const auto& words = corpus.documents[static_cast<std::size_t>(d)].words;
    const auto& lv = ho.levels()[static_cast<std::size_t>(d)];
    const auto& path = ho.paths()[static_cast<std::size_t>(d)];
    for (std::size_t n = 0; n < words.size(); ++n)
      ++ho_counts[path[static_cast<std::size_t>(lv[n])]][words[n]];
  }
  int V = corpus.vocabulary.size();
  double lp = 0.0;
  for (const auto& [id, wc] : ho_counts) {
    int level = ho.tree().node(id).level;
    double eta = ho.config().eta_at(level);
    long base_n = base.total(id);
    long add_n = 0;
    for (const auto& [w, c] : wc) {
      int b = base.count(id, w);
      lp += std::lgamma(eta + b + c) - std::lgamma(eta + b);
      add_n += c;
    }
    lp += std::lgamma(V * eta + static_cast<double>(base_n)) -
          std::lgamma(V * eta + static_cast<double>(base_n + add_n));
  }
  return lp;
}

inline double harmonic_mean_log(const std::vector<double>& logliks) {
  std::vector<double> neg(logliks.size());
  for (std::size_t i = 0; i < logliks.size(); ++i) neg[i] = -logliks[i];
  return -(log_sum_exp(neg) - std::log(static_cast<double>(neg.size())));
}

inline double variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - mean) * (x - mean);
  return v / static_cast<double>(xs.size() - 1);
}

}  // namespace detail

// Eq.-style conditional probability of the held-out documents given the
// training documents: for each outer (training) sample, run an inner Gibbs
// chain over the held-out latent variables with the training counts frozen,
// estimate the conditional by the harmonic mean of the held-out word
// likelihoods, then average the outer estimates.
inline HeldoutResult heldout_log_likelihood(const Corpus& train,
                                            const std::vector<Snapshot>& outers,
                                            const SamplerConfig& cfg,
                                            const Corpus& heldout,
                                            const HeldoutConfig& hcfg) {
  if (outers.empty())
    throw std::invalid_argument("heldout_log_likelihood: no outer samples");
  if (heldout.documents.empty())
    throw std::invalid_argument("heldout_log_likelihood: empty held-out set");
  if (heldout.total_tokens() == 0) return {0.0, {}, 0.0};
  HeldoutResult result;
  int n_outer = std::min<int>(hcfg.max_outer, static_cast<int>(outers.size()));
  double var_acc = 0.0;
  for (int o = 0; o < n_outer; ++o) {
    SamplerState train_state(train, cfg, outers[static_cast<std::size_t>(o)], 0);
    detail::BaseCounts base;
    for (const auto& [id, n] : train_state.tree().nodes()) {
      if (n.total_count == 0) continue;
      base.words[id] = n.word_counts;
      base.totals[id] = n.total_count;
    }
    SamplerState ho(heldout, train_state.config(), train_state.tree(),
                    hcfg.seed + static_cast<std::uint64_t>(o) * 7919);
    std::vector<double> inner;
    inner.reserve(static_cast<std::size_t>(hcfg.inner_samples));
    for (int t = 0; t < hcfg.inner_burnin; ++t) ho.gibbs_sweep();
    for (int t = 0; t < hcfg.inner_samples; ++t) {
      ho.gibbs_sweep();
      inner.push_back(detail::heldout_words_loglik(ho, base));
    }
    result.per_outer.push_back(detail::harmonic_mean_log(inner));
    var_acc += detail::variance(inner);
  }
  result.mean_inner_variance = var_acc / n_outer;
  result.log_lik = log_sum_exp(result.per_outer) -
                   std::log(static_cast<double>(result.per_outer.size()));
  return result;
}

// Same estimator for flat LDA: the inner chain resamples the held-out topic
// indicators against frozen training topic-word counts.
inline HeldoutResult lda_heldout_log_likelihood(const Corpus& train,
                                                const std::vector<LdaSnapshot>& outers,
                                                const LdaConfig& cfg,
                                                const Corpus& heldout,
                                                const HeldoutConfig& hcfg) {
  if (outers.empty())
    throw std::invalid_argument("lda_heldout_log_likelihood: no outer samples");
  if (heldout.documents.empty())
    throw std::invalid_argument("lda_heldout_log_likelihood: empty held-out set");
  if (heldout.total_tokens() == 0) return {0.0, {}, 0.0};
  cfg.validate();
  int K = cfg.num_topics;
  int V = heldout.vocabulary.size();
  HeldoutResult result;
  int n_outer = std::min<int>(hcfg.max_outer, static_cast<int>(outers.size()));
  double var_acc = 0.0;
  for (int o = 0; o < n_outer; ++o) {
    LdaState train_state(train, cfg, outers[static_cast<std::size_t>(o)], 0);
    const auto& base_tw = train_state.topic_word_counts();
    const auto& base_tot = train_state.topic_totals();
    Rng rng(hcfg.seed + static_cast<std::uint64_t>(o) * 7919);

    int D = heldout.num_documents();
    std::vector<std::vector<int>> z(static_cast<std::size_t>(D));
    std::vector<std::vector<int>> doc_topic(
        static_cast<std::size_t>(D), std::vector<int>(static_cast<std::size_t>(K), 0));
    std::vector<std::vector<int>> ho_tw(static_cast<std::size_t>(K),
                                        std::vector<int>(static_cast<std::size_t>(V), 0));
    std::vector<long> ho_tot(static_cast<std::size_t>(K), 0);
    std::vector<double> wts(static_cast<std::size_t>(K));

    auto conditional_assign = [&](int d, int w, bool from_prior_only) {
      for (int k = 0; k < K; ++k) {
        double word_term =
            from_prior_only
                ? 1.0
                : (base_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] +
                   ho_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] + cfg.eta) /
                      (base_tot[static_cast<std::size_t>(k)] +
                       ho_tot[static_cast<std::size_t>(k)] + V * cfg.eta);
        wts[static_cast<std::size_t>(k)] =
            (doc_topic[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)] + cfg.alpha) *
            word_term;
      }
      return static_cast<int>(sample_discrete_linear(wts, rng));
    };

    for (int d = 0; d < D; ++d) {
      const auto& words = heldout.documents[static_cast<std::size_t>(d)].words;
      z[static_cast<std::size_t>(d)].resize(words.size());
      for (std::size_t n = 0; n < words.size(); ++n) {
        int k = conditional_assign(d, words[n], true);
        z[static_cast<std::size_t>(d)][n] = k;
        ++doc_topic[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
        ++ho_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(words[n])];
        ++ho_tot[static_cast<std::size_t>(k)];
      }
    }

    auto sweep = [&]() {
      for (int d = 0; d < D; ++d) {
        const auto& words = heldout.documents[static_cast<std::size_t>(d)].words;
        for (std::size_t n = 0; n < words.size(); ++n) {
          int w = words[n];
          int k = z[static_cast<std::size_t>(d)][n];
          --doc_topic[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
          --ho_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
          --ho_tot[static_cast<std::size_t>(k)];
          k = conditional_assign(d, w, false);
          z[static_cast<std::size_t>(d)][n] = k;
          ++doc_topic[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
          ++ho_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
          ++ho_tot[static_cast<std::size_t>(k)];
        }
      }
    };

    auto words_loglik = [&]() {
      double lp = 0.0;
      for (int k = 0; k < K; ++k) {
        if (ho_tot[static_cast<std::size_t>(k)] == 0) continue;
        for (int w = 0; w < V; ++w) {
          int c = ho_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
          if (c == 0) continue;
          int b = base_tw[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
          lp += std::lgamma(cfg.eta + b + c) - std::lgamma(cfg.eta + b);
        }
        lp += std::lgamma(V * cfg.eta + static_cast<double>(base_tot[static_cast<std::size_t>(k)])) -
              std::lgamma(V * cfg.eta +
                          static_cast<double>(base_tot[static_cast<std::size_t>(k)] +
                                              ho_tot[static_cast<std::size_t>(k)]));
      }
      return lp;
    };

    std::vector<double> inner;
    inner.reserve(static_cast<std::size_t>(hcfg.inner_samples));
    for (int t = 0; t < hcfg.inner_burnin; ++t) sweep();
    for (int t = 0; t < hcfg.inner_samples; ++t) {
      sweep();
      inner.push_back(words_loglik());
    }
    result.per_outer.push_back(detail::harmonic_mean_log(inner));
    var_acc += detail::variance(inner);
  }
  result.mean_inner_variance = var_acc / n_outer;
  result.log_lik = log_sum_exp(result.per_outer) -
                   std::log(static_cast<double>(result.per_outer.size()));
  return result;
}

struct FrequencyDiagnostic {
  double root_top_mean_freq = 0.0;
  double leaf_top_mean_freq = 0.0;
  bool root_above_leaves() const { return root_top_mean_freq > leaf_top_mean_freq; }
};

// Function-words tendency: mean corpus frequency of the root topic's top-k
// terms versus the mean over leaf topics' top-k terms.
inline FrequencyDiagnostic root_leaf_frequency_diagnostic(const SamplerState& state,
                                                          int topk = 10) {
  const Corpus& corpus = state.corpus();
  int V = corpus.vocabulary.size();
  topk = std::min(topk, V);
  std::vector<double> freq(static_cast<std::size_t>(V), 0.0);
  for (const auto& d : corpus.documents)
    for (int w : d.words) freq[static_cast<std::size_t>(w)] += 1.0;
  double total = static_cast<double>(corpus.total_tokens());
  for (auto& f : freq) f /= total;

  auto mean_top_freq = [&](const Node& n) {
    auto tw = top_words(n, state.config().eta_at(n.level), corpus.vocabulary, topk);
    double s = 0.0;
    for (const auto& [term, p] : tw) s += freq[static_cast<std::size_t>(corpus.vocabulary.find(term))];
    return s / static_cast<double>(tw.size());
  };

  FrequencyDiagnostic out;
  out.root_top_mean_freq = mean_top_freq(state.tree().node(state.tree().root()));
  double leaf_sum = 0.0;
  int leaves = 0;
  for (const auto& [id, n] : state.tree().nodes()) {
    if (!n.children.empty() || id == state.tree().root()) continue;
    leaf_sum += mean_top_freq(n);
    ++leaves;
  }
  out.leaf_top_mean_freq = leaves > 0 ? leaf_sum / leaves : 0.0;
  return out;
}

}  // namespace hlda
