// hlda: hierarchical topic model trainer and toolkit.
//
// Subcommands:
//   train        fit the model by collapsed Gibbs sampling, write checkpoints
//   simulate     draw a synthetic corpus (with ground truth) from the model
//   eval         held-out predictive likelihood (hierarchical and/or flat LDA)
//   export       render a checkpointed tree as JSON or DOT
//   diagnostics  log-likelihood trace, autocorrelations, topic frequency check

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "hlda/checkpoint.hpp"
#include "hlda/corpus.hpp"
#include "hlda/eval.hpp"
#include "hlda/export.hpp"
#include "hlda/lda.hpp"
#include "hlda/sampler.hpp"
#include "hlda/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct ModelFlags {
  hlda::SamplerConfig cfg;
  std::string eta_list;      // comma-separated
  std::string level_prior = "gem";

  void add_to(CLI::App* app) {
    app->add_option("--depth", cfg.depth, "tree depth including the root (truncated mode)");
    app->add_flag("--infinite-depth", cfg.infinite_depth, "unbounded depth (GEM level prior only)");
    app->add_option("--gamma", cfg.gamma, "nCRP concentration");
    app->add_option("--eta", eta_list, "topic smoothing, scalar or comma list per level");
    app->add_option("--gem-m", cfg.gem_m, "GEM mean parameter, in (0,1)");
    app->add_option("--gem-pi", cfg.gem_pi, "GEM concentration");
    app->add_option("--level-prior", level_prior, "level prior: gem or dirichlet")
        ->check(CLI::IsMember({"gem", "dirichlet"}));
    app->add_option("--level-alpha", cfg.level_alpha, "symmetric Dirichlet over levels");
  }

  hlda::SamplerConfig resolve() {
    if (!eta_list.empty()) {
      cfg.eta.clear();
      std::stringstream ss(eta_list);
      std::string tok;
      while (std::getline(ss, tok, ','))
        cfg.eta.push_back(std::stod(tok));
    }
    cfg.level_prior = level_prior == "dirichlet" ? hlda::LevelPrior::dirichlet
                                                 : hlda::LevelPrior::gem;
    cfg.validate();
    return cfg;
  }
};

void apply_paper_abstracts_preset(hlda::SamplerConfig& cfg) {
  cfg.depth = 3;
  cfg.infinite_depth = false;
  cfg.eta = {2.0, 1.0, 0.5};
  cfg.gamma = 1.0;
  cfg.gem_m = 0.5;
  cfg.gem_pi = 100.0;
  cfg.level_prior = hlda::LevelPrior::gem;
}

json config_manifest(const hlda::SamplerConfig& cfg, const hlda::RunConfig& rcfg) {
  return {{"version", kVersion},
          {"config", hlda::detail::to_json(cfg)},
          {"run", hlda::detail::to_json(rcfg)}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::ostream& open_out(const std::string& out_path, std::ofstream& file) {
  if (out_path.empty() || out_path == "-") return std::cout;
  file.open(out_path);
  if (!file) throw std::runtime_error("cannot write " + out_path);
  return file;
}

// ---------------------------------------------------------------- train

int cmd_train(const std::string& corpus_path, const std::string& vocab_path,
              ModelFlags& model, bool preset_paper, hlda::RunConfig rcfg,
              int chains, const std::string& out_dir,
              const std::string& resume_path, long resume_iters) {
  fs::create_directories(out_dir);

  if (!resume_path.empty()) {
    hlda::Corpus corpus = hlda::load_corpus_bow(corpus_path, vocab_path);
    hlda::Checkpoint cp = hlda::load_checkpoint(resume_path);
    if (resume_iters > 0) cp.run.iters = resume_iters;
    hlda::SamplerState state = hlda::restore_state(corpus, cp);
    hlda::ChainResult result = cp.result;
    hlda::continue_chain(state, cp.run, result);
    hlda::save_checkpoint(hlda::make_checkpoint(state, cp.run, result),
                          (fs::path(out_dir) / "chain0.checkpoint.json").string());
    std::ostringstream trace;
    for (std::size_t t = 0; t < result.loglik_trace.size(); ++t)
      trace << (t + 1) << ' ' << result.loglik_trace[t] << '\n';
    write_text(fs::path(out_dir) / "chain0.trace.txt", trace.str());
    write_text(fs::path(out_dir) / "manifest.json",
               config_manifest(state.config(), cp.run).dump(2) + "\n");
    std::cout << "resumed to iteration " << state.iteration() << ", mode loglik "
              << result.mode_loglik << "\n";
    return 0;
  }

  hlda::SamplerConfig cfg = model.resolve();
  if (preset_paper) {
    apply_paper_abstracts_preset(cfg);
    cfg.validate();
  }
  if (rcfg.sample_hypers && cfg.eta.size() > 1)
    throw CLI::ValidationError("--sample-hypers requires a scalar --eta");

  hlda::Corpus corpus = hlda::load_corpus_bow(corpus_path, vocab_path);

  std::vector<hlda::ChainResult> results(static_cast<std::size_t>(chains));
  std::vector<hlda::Checkpoint> cps(static_cast<std::size_t>(chains));
  std::vector<std::thread> workers;
  std::vector<std::string> errors(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    workers.emplace_back([&, c]() {
      try {
        hlda::RunConfig r = rcfg;
        r.seed = rcfg.seed + static_cast<std::uint64_t>(c);
        hlda::SamplerState state(corpus, cfg, r.seed);
        if (r.warm_start) state.incremental_warm_start();
        hlda::ChainResult& result = results[static_cast<std::size_t>(c)];
        result.chain_index = c;
        hlda::continue_chain(state, r, result);
        cps[static_cast<std::size_t>(c)] = hlda::make_checkpoint(state, r, result);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(c)] = e.what();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("chain failed: " + e);

  for (int c = 0; c < chains; ++c) {
    hlda::save_checkpoint(
        cps[static_cast<std::size_t>(c)],
        (fs::path(out_dir) / ("chain" + std::to_string(c) + ".checkpoint.json")).string());
    std::ostringstream trace;
    const auto& tr = results[static_cast<std::size_t>(c)].loglik_trace;
    for (std::size_t t = 0; t < tr.size(); ++t) trace << (t + 1) << ' ' << tr[t] << '\n';
    write_text(fs::path(out_dir) / ("chain" + std::to_string(c) + ".trace.txt"),
               trace.str());
  }

  const hlda::Snapshot& mode = hlda::posterior_mode(results);
  json mode_json = hlda::detail::to_json(mode);
  write_text(fs::path(out_dir) / "mode.json", mode_json.dump(2) + "\n");
  write_text(fs::path(out_dir) / "manifest.json",
             config_manifest(cfg, rcfg).dump(2) + "\n");

  std::cout << "trained " << chains << " chain(s), " << rcfg.iters
            << " iterations; mode loglik " << mode.loglik << " at iteration "
            << mode.iteration << "\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(ModelFlags& model, int docs, int doc_length, int vocab_size,
                 std::uint64_t seed, const std::string& out_dir) {
  hlda::SimConfig sim;
  sim.model = model.resolve();
  sim.num_documents = docs;
  sim.doc_length = doc_length;
  sim.vocab_size = vocab_size;
  sim.seed = seed;

  auto [corpus, truth] = hlda::generate_corpus(sim);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "corpus.dat");
    hlda::save_corpus_bow(corpus, out);
  }
  {
    std::ofstream out(fs::path(out_dir) / "vocab.txt");
    hlda::save_vocabulary(corpus.vocabulary, out);
  }
  json truth_json{{"paths", truth.paths}, {"levels", truth.levels}};
  json topics = json::object();
  for (const auto& [id, beta] : truth.topics) topics[std::to_string(id)] = beta;
  truth_json["topics"] = std::move(topics);
  write_text(fs::path(out_dir) / "truth.json", truth_json.dump(2) + "\n");

  hlda::RunConfig dummy;
  dummy.seed = seed;
  write_text(fs::path(out_dir) / "manifest.json",
             config_manifest(sim.model, dummy).dump(2) + "\n");
  std::cout << "wrote " << docs << " documents, " << truth.tree.num_nodes()
            << " topic nodes to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& corpus_path, const std::string& vocab_path,
             const std::string& heldout_path, const std::string& checkpoint_path,
             int lda_topics, double lda_alpha, double lda_eta,
             hlda::RunConfig rcfg, hlda::HeldoutConfig hcfg,
             const std::string& out_path) {
  hlda::Corpus train = hlda::load_corpus_bow(corpus_path, vocab_path);
  hlda::Corpus heldout = hlda::load_corpus_bow(heldout_path, vocab_path);
  if (vocab_path.empty()) {
    // without a shared vocabulary file the two id spaces must be merged
    int v = std::max(train.vocabulary.size(), heldout.vocabulary.size());
    for (int w = train.vocabulary.size(); w < v; ++w)
      train.vocabulary.add("w" + std::to_string(w));
    for (int w = heldout.vocabulary.size(); w < v; ++w)
      heldout.vocabulary.add("w" + std::to_string(w));
  }

  json out{{"version", kVersion},
           {"seed", hcfg.seed},
           {"outer", hcfg.max_outer},
           {"inner", hcfg.inner_samples},
           {"inner_burnin", hcfg.inner_burnin}};

  if (!checkpoint_path.empty()) {
    hlda::Checkpoint cp = hlda::load_checkpoint(checkpoint_path);
    std::vector<hlda::Snapshot> outers = cp.result.snapshots;
    if (outers.empty())
      throw std::runtime_error("checkpoint has no recorded samples to evaluate");
    hlda::HeldoutResult res =
        hlda::heldout_log_likelihood(train, outers, cp.config, heldout, hcfg);
    out["hlda"] = {{"log_lik", res.log_lik},
                   {"per_outer", res.per_outer},
                   {"mean_inner_variance", res.mean_inner_variance},
                   {"config", hlda::detail::to_json(cp.config)}};
  }

  if (lda_topics > 0) {
    hlda::LdaConfig lcfg;
    lcfg.num_topics = lda_topics;
    lcfg.alpha = lda_alpha;
    lcfg.eta = lda_eta;
    hlda::LdaRunConfig lrun;
    lrun.iters = rcfg.iters;
    lrun.burn_in = rcfg.burn_in;
    lrun.thin = rcfg.thin;
    lrun.seed = rcfg.seed;
    hlda::LdaChainResult trained = hlda::lda_train(train, lcfg, lrun);
    if (trained.snapshots.empty())
      throw std::runtime_error("LDA run recorded no samples; check --iters/--burnin/--thin");
    hlda::HeldoutResult res = hlda::lda_heldout_log_likelihood(
        train, trained.snapshots, lcfg, heldout, hcfg);
    out["lda"] = {{"log_lik", res.log_lik},
                  {"per_outer", res.per_outer},
                  {"mean_inner_variance", res.mean_inner_variance},
                  {"num_topics", lda_topics},
                  {"alpha", lda_alpha},
                  {"eta", lda_eta}};
  }

  if (!out.contains("hlda") && !out.contains("lda"))
    throw CLI::ValidationError("eval needs --checkpoint and/or --lda-topics");

  std::ofstream file;
  open_out(out_path, file) << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------- export

int cmd_export(const std::string& corpus_path, const std::string& vocab_path,
               const std::string& checkpoint_path, const std::string& format,
               int topk, bool use_mode, const std::string& out_path) {
  hlda::Corpus corpus = hlda::load_corpus_bow(corpus_path, vocab_path);
  hlda::Checkpoint cp = hlda::load_checkpoint(checkpoint_path);

  std::optional<hlda::SamplerState> state;
  if (use_mode) {
    state.emplace(corpus, cp.config, cp.result.mode, 0);
  } else {
    state.emplace(hlda::restore_state(corpus, cp));
  }

  std::ofstream file;
  std::ostream& out = open_out(out_path, file);
  if (format == "json")
    hlda::export_json(*state, topk, out);
  else
    hlda::export_dot(*state, topk, out);
  return 0;
}

// ---------------------------------------------------------------- diagnostics

int cmd_diagnostics(const std::string& corpus_path, const std::string& vocab_path,
                    const std::string& checkpoint_path, int max_lag, int topk,
                    const std::string& out_path) {
  hlda::Checkpoint cp = hlda::load_checkpoint(checkpoint_path);
  std::ofstream file;
  std::ostream& out = open_out(out_path, file);

  const auto& trace = cp.result.loglik_trace;
  out << "iterations: " << trace.size() << "\n";
  if (!trace.empty()) {
    out << "final loglik: " << trace.back() << "\n";
    out << "mode loglik: " << cp.result.mode_loglik << " at iteration "
        << cp.result.mode.iteration << "\n";
  }
  if (static_cast<int>(trace.size()) > max_lag && max_lag > 0) {
    try {
      auto acf = hlda::autocorrelation(trace, max_lag);
      out << "autocorrelation of the loglik trace:\n";
      for (int k = 0; k <= max_lag; ++k)
        out << "  lag " << k << ": " << acf[static_cast<std::size_t>(k)] << "\n";
    } catch (const std::invalid_argument& e) {
      out << "autocorrelation unavailable: " << e.what() << "\n";
    }
  } else {
    out << "autocorrelation unavailable: trace shorter than --max-lag\n";
  }

  if (!corpus_path.empty()) {
    hlda::Corpus corpus = hlda::load_corpus_bow(corpus_path, vocab_path);
    hlda::SamplerState state = hlda::restore_state(corpus, cp);
    auto diag = hlda::root_leaf_frequency_diagnostic(state, topk);
    out << "root top-" << topk << " mean corpus frequency: "
        << diag.root_top_mean_freq << "\n";
    out << "leaf top-" << topk << " mean corpus frequency: "
        << diag.leaf_top_mean_freq << "\n";
    out << "root terms more frequent than leaf terms: "
        << (diag.root_above_leaves() ? "yes" : "no") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical topic model toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "",
                 "key=value config file with one [subcommand] section; "
                 "flags take precedence");

  // train ----------------------------------------------------------------
  auto* train = app.add_subcommand("train", "fit the model by Gibbs sampling");
  std::string t_corpus, t_vocab, t_out = "run", t_resume;
  ModelFlags t_model;
  hlda::RunConfig t_run;
  int t_chains = 1;
  long t_resume_iters = 0;
  bool t_preset = false;
  std::string t_preset_name;
  train->add_option("--corpus", t_corpus, "bag-of-words corpus file")->required();
  train->add_option("--vocab", t_vocab, "vocabulary file, one term per line");
  t_model.add_to(train);
  train->add_option("--preset", t_preset_name, "named preset: paper-abstracts")
      ->check(CLI::IsMember({"paper-abstracts"}));
  train->add_option("--iters", t_run.iters, "total Gibbs iterations");
  train->add_option("--burnin", t_run.burn_in, "iterations discarded before recording");
  train->add_option("--thin", t_run.thin, "record every thin-th iteration");
  train->add_option("--seed", t_run.seed, "RNG seed (chain c uses seed + c)");
  train->add_option("--chains", t_chains, "independent restarts, run concurrently")
      ->check(CLI::PositiveNumber);
  train->add_flag("--sample-hypers", t_run.sample_hypers,
                  "interleave Metropolis-Hastings updates of m, pi, gamma, eta");
  train->add_flag("--random-scan", t_run.random_scan, "randomize document visit order");
  train->add_flag("--warm-start", t_run.warm_start,
                  "data-guided incremental initialization instead of prior draws");
  train->add_flag("--reattach", t_run.reattach,
                  "interleave branch-regrouping Metropolis moves (truncated depth >= 3)");
  train->add_option("--out", t_out, "output directory");
  train->add_option("--resume", t_resume, "checkpoint to continue from");
  train->add_option("--resume-iters", t_resume_iters, "new total iteration target when resuming");

  // simulate -------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "draw a synthetic corpus from the model");
  ModelFlags s_model;
  int s_docs = 100, s_len = 250, s_vocab = 100;
  std::uint64_t s_seed = 1;
  std::string s_out = "sim";
  s_model.add_to(simulate);
  simulate->add_option("--docs", s_docs, "number of documents")->check(CLI::PositiveNumber);
  simulate->add_option("--doc-length", s_len, "tokens per document")->check(CLI::PositiveNumber);
  simulate->add_option("--vocab-size", s_vocab, "vocabulary size")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", s_seed, "RNG seed");
  simulate->add_option("--out", s_out, "output directory");

  // eval -----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "held-out predictive likelihood");
  std::string e_corpus, e_vocab, e_heldout, e_checkpoint, e_out;
  int e_lda_topics = 0;
  double e_lda_alpha = 1.0, e_lda_eta = 0.1;
  hlda::RunConfig e_run;
  hlda::HeldoutConfig e_hcfg;
  eval->add_option("--corpus", e_corpus, "training corpus")->required();
  eval->add_option("--vocab", e_vocab, "shared vocabulary file");
  eval->add_option("--heldout", e_heldout, "held-out corpus")->required();
  eval->add_option("--checkpoint", e_checkpoint, "trained checkpoint to evaluate");
  eval->add_option("--lda-topics", e_lda_topics, "also fit and score a flat LDA baseline with K topics");
  eval->add_option("--lda-alpha", e_lda_alpha, "LDA document-topic smoothing");
  eval->add_option("--lda-eta", e_lda_eta, "LDA topic-word smoothing");
  eval->add_option("--iters", e_run.iters, "LDA training iterations");
  eval->add_option("--burnin", e_run.burn_in, "LDA burn-in");
  eval->add_option("--thin", e_run.thin, "LDA thinning");
  eval->add_option("--seed", e_hcfg.seed, "RNG seed");
  eval->add_option("--outer", e_hcfg.max_outer, "posterior samples used");
  eval->add_option("--inner", e_hcfg.inner_samples, "harmonic-mean samples per posterior sample");
  eval->add_option("--inner-burnin", e_hcfg.inner_burnin, "inner-chain burn-in");
  eval->add_option("--out", e_out, "output file (default stdout)");

  // export ---------------------------------------------------------------
  auto* exp = app.add_subcommand("export", "render a checkpointed tree");
  std::string x_corpus, x_vocab, x_checkpoint, x_format = "json", x_out;
  int x_topk = 5;
  bool x_mode = false;
  exp->add_option("--corpus", x_corpus, "corpus the checkpoint was trained on")->required();
  exp->add_option("--vocab", x_vocab, "vocabulary file");
  exp->add_option("--checkpoint", x_checkpoint, "checkpoint file")->required();
  exp->add_option("--format", x_format, "output format")->check(CLI::IsMember({"json", "dot"}));
  exp->add_option("--topk", x_topk, "terms shown per topic")->check(CLI::PositiveNumber);
  exp->add_flag("--use-mode", x_mode, "export the best recorded state instead of the last");
  exp->add_option("--out", x_out, "output file (default stdout)");

  // diagnostics ----------------------------------------------------------
  auto* diag = app.add_subcommand("diagnostics", "trace and convergence summaries");
  std::string d_corpus, d_vocab, d_checkpoint, d_out;
  int d_max_lag = 50, d_topk = 10;
  diag->add_option("--checkpoint", d_checkpoint, "checkpoint file")->required();
  diag->add_option("--corpus", d_corpus, "corpus (enables topic frequency diagnostics)");
  diag->add_option("--vocab", d_vocab, "vocabulary file");
  diag->add_option("--max-lag", d_max_lag, "largest autocorrelation lag reported");
  diag->add_option("--topk", d_topk, "terms per topic in the frequency diagnostic");
  diag->add_option("--out", d_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      t_preset = !t_preset_name.empty();
      return cmd_train(t_corpus, t_vocab, t_model, t_preset, t_run, t_chains,
                       t_out, t_resume, t_resume_iters);
    }
    if (simulate->parsed())
      return cmd_simulate(s_model, s_docs, s_len, s_vocab, s_seed, s_out);
    if (eval->parsed())
      return cmd_eval(e_corpus, e_vocab, e_heldout, e_checkpoint, e_lda_topics,
                      e_lda_alpha, e_lda_eta, e_run, e_hcfg, e_out);
    if (exp->parsed())
      return cmd_export(x_corpus, x_vocab, x_checkpoint, x_format, x_topk,
                        x_mode, x_out);
    if (diag->parsed())
      return cmd_diagnostics(d_corpus, d_vocab, d_checkpoint, d_max_lag, d_topk,
                             d_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
