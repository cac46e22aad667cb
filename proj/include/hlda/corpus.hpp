#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hlda/rng.hpp"

namespace hlda {

class Vocabulary {
public:
  int size() const { return static_cast<int>(terms_.size()); }

  const std::string& term(int id) const { return terms_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& terms() const { return terms_; }

  // id of term, or -1 if absent
  int find(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? -1 : it->second;
  }

  // id of term, inserting it in first-occurrence order
  int add(const std::string& t) {
    auto it = index_.find(t);
    if (it != index_.end()) return it->second;
    int id = size();
    index_.emplace(t, id);
    terms_.push_back(t);
    return id;
  }

  bool operator==(const Vocabulary& o) const { return terms_ == o.terms_; }

private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, int> index_;
};

struct Document {
  int id = -1;
  std::vector<int> words;  // term ids, length N_d
};

struct Corpus {
  std::vector<Document> documents;
  Vocabulary vocabulary;

  int num_documents() const { return static_cast<int>(documents.size()); }
  long total_tokens() const {
    long n = 0;
    for (const auto& d : documents) n += static_cast<long>(d.words.size());
    return n;
  }
};

// lowercase + split on non-alphanumeric runs
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline Vocabulary load_vocabulary(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.add(line);
  }
  return vocab;
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  return load_vocabulary(in);
}

// LDA-C convention: one document per line, "M id:count id:count ..." where M
// is the number of distinct terms on the line.
inline Corpus load_corpus_bow(std::istream& in, Vocabulary vocab = {}) {
  Corpus corpus;
  corpus.vocabulary = std::move(vocab);
  int declared_v = corpus.vocabulary.size();
  int max_id = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    int m = 0;
    if (!(ls >> m) || m < 0)
      throw std::runtime_error("malformed bag-of-words line " + std::to_string(lineno));
    Document doc;
    doc.id = corpus.num_documents();
    for (int i = 0; i < m; ++i) {
      std::string pair;
      if (!(ls >> pair))
        throw std::runtime_error("malformed bag-of-words line " + std::to_string(lineno) +
                                 ": expected " + std::to_string(m) + " id:count pairs");
      auto colon = pair.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("malformed bag-of-words line " + std::to_string(lineno) +
                                 ": bad pair '" + pair + "'");
      int id, count;
      try {
        id = std::stoi(pair.substr(0, colon));
        count = std::stoi(pair.substr(colon + 1));
      } catch (const std::exception&) {
        throw std::runtime_error("malformed bag-of-words line " + std::to_string(lineno) +
                                 ": bad pair '" + pair + "'");
      }
      if (id < 0 || count <= 0)
        throw std::runtime_error("malformed bag-of-words line " + std::to_string(lineno) +
                                 ": bad pair '" + pair + "'");
      if (declared_v > 0 && id >= declared_v)
        throw std::runtime_error("line " + std::to_string(lineno) + ": term id " +
                                 std::to_string(id) + " >= vocabulary size " +
                                 std::to_string(declared_v));
      max_id = std::max(max_id, id);
      for (int c = 0; c < count; ++c) doc.words.push_back(id);
    }
    std::string extra;
    if (ls >> extra)
      throw std::runtime_error("malformed bag-of-words line " + std::to_string(lineno) +
                               ": trailing token '" + extra + "'");
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw std::runtime_error("empty corpus");
  if (declared_v == 0) {
    // no vocabulary file given; synthesize term names from ids
    for (int id = 0; id <= max_id; ++id) corpus.vocabulary.add("w" + std::to_string(id));
  }
  return corpus;
}

inline Corpus load_corpus_bow(const std::string& path, const std::string& vocab_path = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Vocabulary vocab;
  if (!vocab_path.empty()) vocab = load_vocabulary(vocab_path);
  return load_corpus_bow(in, std::move(vocab));
}

inline void save_corpus_bow(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents) {
    std::map<int, int> counts;
    for (int w : doc.words) ++counts[w];
    out << counts.size();
    for (const auto& [id, c] : counts) out << ' ' << id << ':' << c;
    out << '\n';
  }
}

inline void save_vocabulary(const Vocabulary& vocab, std::ostream& out) {
  for (const auto& t : vocab.terms()) out << t << '\n';
}

struct PruneReport {
  std::vector<std::string> pruned_terms;
  std::vector<int> dropped_documents;  // indices into raw_docs
};

// Keep exactly the terms whose document frequency exceeds min_doc_freq; drop
// pruned tokens, then drop documents that became empty.
inline std::pair<Corpus, PruneReport> build_vocabulary(
    const std::vector<std::vector<std::string>>& raw_docs, int min_doc_freq) {
  if (min_doc_freq < 0) throw std::invalid_argument("min_doc_freq must be >= 0");
  std::unordered_map<std::string, int> doc_freq;
  std::vector<std::string> first_occurrence;
  for (const auto& doc : raw_docs) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& t : doc) {
      if (!seen[t]) {
        seen[t] = true;
        auto [it, inserted] = doc_freq.emplace(t, 0);
        if (inserted) first_occurrence.push_back(t);
        ++it->second;
      }
    }
  }
  Corpus corpus;
  PruneReport report;
  for (const auto& t : first_occurrence)
    if (doc_freq[t] <= min_doc_freq) report.pruned_terms.push_back(t);
  for (std::size_t i = 0; i < raw_docs.size(); ++i) {
    Document doc;
    for (const auto& t : raw_docs[i])
      if (doc_freq[t] > min_doc_freq) doc.words.push_back(corpus.vocabulary.add(t));
    if (doc.words.empty()) {
      report.dropped_documents.push_back(static_cast<int>(i));
      continue;
    }
    doc.id = corpus.num_documents();
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw std::runtime_error("empty corpus: all terms pruned");
  return {std::move(corpus), std::move(report)};
}

// Raw-text mode: one document per line (or the whole stream as one document).
inline Corpus load_corpus_text(std::istream& in, int min_doc_freq = 0,
                               bool doc_per_line = true) {
  std::vector<std::vector<std::string>> raw;
  if (doc_per_line) {
    std::string line;
    while (std::getline(in, line)) {
      auto toks = tokenize(line);
      if (!toks.empty()) raw.push_back(std::move(toks));
    }
  } else {
    std::stringstream ss;
    ss << in.rdbuf();
    auto toks = tokenize(ss.str());
    if (!toks.empty()) raw.push_back(std::move(toks));
  }
  if (raw.empty()) throw std::runtime_error("empty corpus");
  return build_vocabulary(raw, min_doc_freq).first;
}

struct Fold {
  Corpus train;
  Corpus heldout;
  std::vector<int> heldout_original_ids;
};

// Deterministic unstratified K-fold split; fold sizes differ by at most one.
inline std::vector<Fold> split_corpus(const Corpus& corpus, int folds,
                                      std::uint64_t seed) {
  int d = corpus.num_documents();
  if (folds < 2) throw std::invalid_argument("split_corpus: folds must be >= 2");
  if (folds > d) throw std::invalid_argument("split_corpus: folds > number of documents");
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = d - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  std::vector<int> fold_of(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % folds;
  std::vector<Fold> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    Fold& fold = out[static_cast<std::size_t>(f)];
    fold.train.vocabulary = corpus.vocabulary;
    fold.heldout.vocabulary = corpus.vocabulary;
    for (int i = 0; i < d; ++i) {
      const auto& src = corpus.documents[static_cast<std::size_t>(i)];
      if (fold_of[static_cast<std::size_t>(i)] == f) {
        Document doc{fold.heldout.num_documents(), src.words};
        fold.heldout.documents.push_back(std::move(doc));
        fold.heldout_original_ids.push_back(i);
      } else {
        Document doc{fold.train.num_documents(), src.words};
        fold.train.documents.push_back(std::move(doc));
      }
    }
  }
  return out;
}

}  // namespace hlda
