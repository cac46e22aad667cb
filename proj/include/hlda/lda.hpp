#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hlda/corpus.hpp"
#include "hlda/distributions.hpp"

namespace hlda {

struct LdaConfig {
  int num_topics = 50;
  double alpha = 1.0;  // symmetric document-topic prior
  double eta = 0.1;    // symmetric topic-word prior

  void validate() const {
    if (num_topics < 1) throw std::invalid_argument("lda: K must be >= 1");
    if (alpha <= 0.0 || eta <= 0.0)
      throw std::invalid_argument("lda: alpha and eta must be > 0");
  }
};

struct LdaSnapshot {
  long iteration = 0;
  double loglik = 0.0;
  std::vector<std::vector<int>> topics;  // z per document per token
};

// Collapsed Gibbs sampler for flat LDA over topic indicators z, with theta
// and beta marginalized out.
class LdaState {
public:
  LdaState(const Corpus& corpus, LdaConfig cfg, std::uint64_t seed)
      : corpus_(&corpus), cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
    v_ = corpus.vocabulary.size();
    int K = cfg_.num_topics;
    int D = corpus.num_documents();
    doc_topic_.assign(static_cast<std::size_t>(D),
                      std::vector<int>(static_cast<std::size_t>(K), 0));
    topic_word_.assign(static_cast<std::size_t>(K),
                       std::vector<int>(static_cast<std::size_t>(v_), 0));
    topic_total_.assign(static_cast<std::size_t>(K), 0);
    z_.resize(static_cast<std::size_t>(D));
    // forward draws from the prior: per-document Polya urn over topics
    for (int d = 0; d < D; ++d) {
      const auto& words = corpus.documents[static_cast<std::size_t>(d)].words;
      auto& zd = z_[static_cast<std::size_t>(d)];
      zd.resize(words.size());
      for (std::size_t n = 0; n < words.size(); ++n) {
        wbuf_.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k)
          wbuf_[static_cast<std::size_t>(k)] =
              doc_topic_[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)] + cfg_.alpha;
        int k = static_cast<int>(sample_discrete_linear(wbuf_, rng_));
        assign(d, static_cast<int>(n), k);
      }
    }
  }

  // Rebuild from a snapshot.
  LdaState(const Corpus& corpus, LdaConfig cfg, const LdaSnapshot& snap,
           std::uint64_t seed)
      : LdaState(corpus, std::move(cfg), seed) {
    if (snap.topics.size() != z_.size())
      throw std::runtime_error("lda snapshot does not match corpus");
    for (std::size_t d = 0; d < z_.size(); ++d)
      for (std::size_t n = 0; n < z_[d].size(); ++n) {
        unassign(static_cast<int>(d), static_cast<int>(n));
        assign(static_cast<int>(d), static_cast<int>(n), snap.topics[d][n]);
      }
    iteration_ = snap.iteration;
  }

  const Corpus& corpus() const { return *corpus_; }
  const LdaConfig& config() const { return cfg_; }
  const std::vector<std::vector<int>>& topic_assignments() const { return z_; }
  const std::vector<std::vector<int>>& topic_word_counts() const { return topic_word_; }
  const std::vector<long>& topic_totals() const { return topic_total_; }
  Rng& rng() { return rng_; }
  long iteration() const { return iteration_; }

  int sample_topic(int d, int n) {
    int w = corpus_->documents[static_cast<std::size_t>(d)].words[static_cast<std::size_t>(n)];
    unassign(d, n);
    int K = cfg_.num_topics;
    wbuf_.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      wbuf_[static_cast<std::size_t>(k)] =
          (doc_topic_[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)] + cfg_.alpha) *
          (topic_word_[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] + cfg_.eta) /
          (topic_total_[static_cast<std::size_t>(k)] + v_ * cfg_.eta);
    int k = static_cast<int>(sample_discrete_linear(wbuf_, rng_));
    assign(d, n, k);
    return k;
  }

  void gibbs_sweep() {
    for (int d = 0; d < corpus_->num_documents(); ++d)
      for (std::size_t n = 0; n < z_[static_cast<std::size_t>(d)].size(); ++n)
        sample_topic(d, static_cast<int>(n));
    ++iteration_;
  }

  double complete_log_likelihood() const {
    double lp = 0.0;
    for (const auto& dt : doc_topic_)
      lp += log_dirichlet_multinomial(dt, cfg_.alpha, cfg_.num_topics);
    for (const auto& tw : topic_word_)
      lp += log_dirichlet_multinomial(tw, cfg_.eta, v_);
    return lp;
  }

  LdaSnapshot take_snapshot() const {
    LdaSnapshot s;
    s.iteration = iteration_;
    s.loglik = complete_log_likelihood();
    s.topics = z_;
    return s;
  }

  // Recompute topic-word counts from the backing corpus (used after the
  // corpus words were rewritten in place).
  void refresh_word_counts() {
    for (auto& tw : topic_word_) std::fill(tw.begin(), tw.end(), 0);
    std::fill(topic_total_.begin(), topic_total_.end(), 0);
    for (int d = 0; d < corpus_->num_documents(); ++d) {
      const auto& words = corpus_->documents[static_cast<std::size_t>(d)].words;
      const auto& zd = z_[static_cast<std::size_t>(d)];
      for (std::size_t n = 0; n < words.size(); ++n) {
        ++topic_word_[static_cast<std::size_t>(zd[n])][static_cast<std::size_t>(words[n])];
        ++topic_total_[static_cast<std::size_t>(zd[n])];
      }
    }
  }

  void validate() const {
    long total = 0;
    for (long t : topic_total_) total += t;
    if (total != corpus_->total_tokens())
      throw std::logic_error("lda: topic counts out of sync with corpus");
  }

private:
  void assign(int d, int n, int k) {
    int w = corpus_->documents[static_cast<std::size_t>(d)].words[static_cast<std::size_t>(n)];
    z_[static_cast<std::size_t>(d)][static_cast<std::size_t>(n)] = k;
    ++doc_topic_[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
    ++topic_word_[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
    ++topic_total_[static_cast<std::size_t>(k)];
  }
  void unassign(int d, int n) {
    int w = corpus_->documents[static_cast<std::size_t>(d)].words[static_cast<std::size_t>(n)];
    int k = z_[static_cast<std::size_t>(d)][static_cast<std::size_t>(n)];
    --doc_topic_[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
    --topic_word_[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
    --topic_total_[static_cast<std::size_t>(k)];
  }

  const Corpus* corpus_;
  LdaConfig cfg_;
  std::vector<std::vector<int>> z_;
  std::vector<std::vector<int>> doc_topic_;
  std::vector<std::vector<int>> topic_word_;
  std::vector<long> topic_total_;
  Rng rng_;
  long iteration_ = 0;
  int v_ = 0;
  std::vector<double> wbuf_;
};

struct LdaChainResult {
  std::vector<double> loglik_trace;
  std::vector<LdaSnapshot> snapshots;
  LdaSnapshot mode;
  double mode_loglik = kNegInf;
};

struct LdaRunConfig {
  long iters = 10000;
  long burn_in = 2000;
  long thin = 100;
  std::uint64_t seed = 1;
  bool record_snapshots = true;
};

inline LdaChainResult lda_train(const Corpus& corpus, const LdaConfig& cfg,
                                const LdaRunConfig& rcfg) {
  if (rcfg.iters <= rcfg.burn_in || rcfg.burn_in < 0)
    throw std::invalid_argument("lda_train: need iters > burn_in >= 0");
  LdaState state(corpus, cfg, rcfg.seed);
  LdaChainResult result;
  while (state.iteration() < rcfg.iters) {
    state.gibbs_sweep();
    double ll = state.complete_log_likelihood();
    result.loglik_trace.push_back(ll);
    if (ll > result.mode_loglik) {
      result.mode_loglik = ll;
      result.mode = state.take_snapshot();
    }
    long t = state.iteration();
    if (rcfg.record_snapshots && t > rcfg.burn_in &&
        (t - rcfg.burn_in) % rcfg.thin == 0)
      result.snapshots.push_back(state.take_snapshot());
  }
  return result;
}

// Geweke support for the LDA sampler: redraw words from p(w | z).
inline void lda_resample_words(LdaState& state, Corpus& corpus, Rng& rng) {
  if (&corpus != &state.corpus())
    throw std::invalid_argument("lda_resample_words: corpus does not back this state");
  int V = corpus.vocabulary.size();
  int K = state.config().num_topics;
  double eta = state.config().eta;
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(K),
                                       std::vector<int>(static_cast<std::size_t>(V), 0));
  std::vector<long> totals(static_cast<std::size_t>(K), 0);
  for (int d = 0; d < corpus.num_documents(); ++d) {
    auto& words = corpus.documents[static_cast<std::size_t>(d)].words;
    const auto& zd = state.topic_assignments()[static_cast<std::size_t>(d)];
    for (std::size_t n = 0; n < words.size(); ++n) {
      int k = zd[n];
      auto& cw = counts[static_cast<std::size_t>(k)];
      double denom = totals[static_cast<std::size_t>(k)] + V * eta;
      double u = rng.uniform() * denom;
      double cum = 0.0;
      int w = V - 1;
      for (int t = 0; t < V; ++t) {
        cum += cw[static_cast<std::size_t>(t)] + eta;
        if (u < cum) {
          w = t;
          break;
        }
      }
      words[n] = w;
      ++cw[static_cast<std::size_t>(w)];
      ++totals[static_cast<std::size_t>(k)];
    }
  }
  state.refresh_word_counts();
}

}  // namespace hlda
