#include <catch2/catch_amalgamated.hpp>

#include "hlda/lda.hpp"

#include <cmath>
#include <vector>

using namespace hlda;

namespace {

Corpus make_corpus(const std::vector<std::vector<int>>& docs, int V) {
  Corpus c;
  for (int w = 0; w < V; ++w) c.vocabulary.add("w" + std::to_string(w));
  for (std::size_t d = 0; d < docs.size(); ++d)
    c.documents.push_back({static_cast<int>(d), docs[d]});
  return c;
}

}  // namespace

TEST_CASE("topic counts conserve tokens across sweeps") {
  Corpus c = make_corpus({{0, 1, 2, 0}, {1, 1}, {2, 0, 2}}, 3);
  LdaConfig cfg;
  cfg.num_topics = 4;
  LdaState state(c, cfg, 3);
  state.validate();
  for (int s = 0; s < 20; ++s) {
    state.gibbs_sweep();
    state.validate();
    long total = 0;
    for (long t : state.topic_totals()) total += t;
    REQUIRE(total == c.total_tokens());
  }
}

TEST_CASE("complete log likelihood matches a hand computation for K=1") {
  // K=1: document-topic factors are Beta ratios with a point mass, word factor
  // is a single Dirichlet-multinomial over all tokens
  Corpus c = make_corpus({{0, 1}, {1}}, 2);
  LdaConfig cfg;
  cfg.num_topics = 1;
  cfg.alpha = 1.0;
  cfg.eta = 1.0;
  LdaState state(c, cfg, 1);
  // doc factors: DirMult([N_d]; alpha=1, K=1) = Gamma(1)/Gamma(1+N) * Gamma(1+N)/Gamma(1) = 1
  // word factor: counts {0:1, 1:2}, eta=1, V=2 -> 1/12 (Polya urn)
  REQUIRE_THAT(state.complete_log_likelihood(),
               Catch::Matchers::WithinAbs(std::log(1.0 / 12.0), 1e-12));
}

TEST_CASE("training is deterministic and tracks the mode") {
  Corpus c = make_corpus({{0, 1, 2}, {1, 1, 0}, {2, 2}}, 3);
  LdaConfig cfg;
  cfg.num_topics = 2;
  LdaRunConfig rcfg;
  rcfg.iters = 50;
  rcfg.burn_in = 10;
  rcfg.thin = 10;
  rcfg.seed = 9;
  auto a = lda_train(c, cfg, rcfg);
  auto b = lda_train(c, cfg, rcfg);
  REQUIRE(a.loglik_trace == b.loglik_trace);
  REQUIRE(a.snapshots.size() == 4);
  REQUIRE(a.mode_loglik ==
          *std::max_element(a.loglik_trace.begin(), a.loglik_trace.end()));

  LdaRunConfig bad = rcfg;
  bad.burn_in = 50;
  REQUIRE_THROWS_AS(lda_train(c, cfg, bad), std::invalid_argument);
}

TEST_CASE("snapshot rebuild reproduces the counts") {
  Corpus c = make_corpus({{0, 1, 2, 1}, {2, 0}}, 3);
  LdaConfig cfg;
  cfg.num_topics = 3;
  LdaState state(c, cfg, 21);
  for (int s = 0; s < 5; ++s) state.gibbs_sweep();
  LdaSnapshot snap = state.take_snapshot();
  LdaState rebuilt(c, cfg, snap, 0);
  REQUIRE(rebuilt.topic_assignments() == state.topic_assignments());
  REQUIRE(rebuilt.topic_word_counts() == state.topic_word_counts());
  REQUIRE(rebuilt.complete_log_likelihood() == snap.loglik);
}

TEST_CASE("word resampling rewrites the corpus consistently") {
  Corpus c = make_corpus({{0, 1, 2, 1}, {2, 0, 0}}, 3);
  LdaConfig cfg;
  cfg.num_topics = 2;
  LdaState state(c, cfg, 4);
  Rng rng(6);
  lda_resample_words(state, c, rng);
  state.validate();
  REQUIRE(c.total_tokens() == 7);
  for (const auto& d : c.documents)
    for (int w : d.words) {
      REQUIRE(w >= 0);
      REQUIRE(w < 3);
    }

  Corpus other = c;
  REQUIRE_THROWS_AS(lda_resample_words(state, other, rng), std::invalid_argument);
}

TEST_CASE("flat model config validation") {
  LdaConfig cfg;
  cfg.num_topics = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.alpha = -1.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
