#pragma once

#include <ostream>
#include <string>

#include "json.hpp"

#include "hlda/checkpoint.hpp"
#include "hlda/eval.hpp"
#include "hlda/sampler.hpp"

namespace hlda {

// Tree export schema:
//   {nodes:[{id,parent,level,doc_count,total_tokens,top_words:[{term,p}]}],
//    documents:[{id,path:[ids]}], config:{...}}
inline nlohmann::json export_tree_json(const SamplerState& state, int topk) {
  nlohmann::json nodes = nlohmann::json::array();
  const Vocabulary& vocab = state.corpus().vocabulary;
  for (const auto& [id, n] : state.tree().nodes()) {
    nlohmann::json tw = nlohmann::json::array();
    for (const auto& [term, p] :
         top_words(n, state.config().eta_at(n.level), vocab,
                   std::min(topk, vocab.size())))
      tw.push_back({{"term", term}, {"p", p}});
    nodes.push_back({{"id", id},
                     {"parent", n.parent},
                     {"level", n.level},
                     {"doc_count", n.doc_count},
                     {"total_tokens", n.total_count},
                     {"top_words", std::move(tw)}});
  }
  nlohmann::json docs = nlohmann::json::array();
  for (int d = 0; d < state.corpus().num_documents(); ++d)
    docs.push_back({{"id", state.corpus().documents[static_cast<std::size_t>(d)].id},
                    {"path", state.paths()[static_cast<std::size_t>(d)]}});
  return {{"nodes", std::move(nodes)},
          {"documents", std::move(docs)},
          {"config", detail::to_json(state.config())}};
}

inline void export_json(const SamplerState& state, int topk, std::ostream& out) {
  out << export_tree_json(state, topk).dump(2) << '\n';
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

// Fig.-1-style digraph: one box per topic labeled with its top-k terms.
inline void export_dot(const SamplerState& state, int topk, std::ostream& out) {
  const Vocabulary& vocab = state.corpus().vocabulary;
  out << "digraph topics {\n  node [shape=box];\n";
  for (const auto& [id, n] : state.tree().nodes()) {
    std::string label;
    for (const auto& [term, p] :
         top_words(n, state.config().eta_at(n.level), vocab,
                   std::min(topk, vocab.size()))) {
      if (!label.empty()) label += "\\n";
      label += detail::dot_escape(term);
    }
    out << "  n" << id << " [label=\"" << label << "\" tooltip=\"docs="
        << n.doc_count << " tokens=" << n.total_count << "\"];\n";
  }
  for (const auto& [id, n] : state.tree().nodes())
    if (n.parent != kNoNode) out << "  n" << n.parent << " -> n" << id << ";\n";
  out << "}\n";
}

}  // namespace hlda
