#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "hlda/distributions.hpp"

namespace hlda {

using NodeId = int;
inline constexpr NodeId kNoNode = -1;

struct Node {
  NodeId id = kNoNode;
  int level = 0;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;
  int doc_count = 0;  // documents whose path passes through this node
  std::unordered_map<int, int> word_counts;
  long total_count = 0;

  int word_count(int term) const {
    auto it = word_counts.find(term);
    return it == word_counts.end() ? 0 : it->second;
  }
};

// A place to attach a document's path: the deepest existing node reused.
// fresh_levels == 0 means an existing path endpoint; fresh_levels > 0 means a
// novel branch below `node` reaching the target depth.
struct PathCandidate {
  NodeId node = kNoNode;
  int fresh_levels = 0;
  bool is_existing() const { return fresh_levels == 0; }
};

// The nCRP tree with collapsed sufficient statistics.  Nodes whose doc_count
// drops to zero are pruned eagerly; node ids are never recycled within a run.
class NcrpTree {
public:
  NcrpTree() {
    Node root;
    root.id = 0;
    nodes_.emplace(0, std::move(root));
    next_id_ = 1;
  }

  NodeId root() const { return 0; }

  const Node& node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::out_of_range("NcrpTree: unknown node id");
    return it->second;
  }
  Node& node(NodeId id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::out_of_range("NcrpTree: unknown node id");
    return it->second;
  }
  bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const std::map<NodeId, Node>& nodes() const { return nodes_; }

  // Customers seated in this restaurant, i.e. documents that chose a child.
  int customers(const Node& n) const {
    int c = 0;
    for (NodeId ch : n.children) c += node(ch).doc_count;
    return c;
  }

  // Materialize the candidate to the given target depth (deepest level index,
  // 0 = root), incrementing doc_count along the way.
  std::vector<NodeId> add_document_to_path(const PathCandidate& cand, int target_depth) {
    if (!has_node(cand.node)) throw std::invalid_argument("stale path candidate");
    const Node& base = node(cand.node);
    if (base.level + cand.fresh_levels != target_depth)
      throw std::invalid_argument("path candidate does not reach target depth");
    std::vector<NodeId> path(static_cast<std::size_t>(target_depth) + 1, kNoNode);
    NodeId cur = cand.node;
    for (int lv = base.level; lv >= 0; --lv) {
      path[static_cast<std::size_t>(lv)] = cur;
      cur = node(cur).parent;
    }
    for (int lv = base.level + 1; lv <= target_depth; ++lv)
      path[static_cast<std::size_t>(lv)] = create_node(path[static_cast<std::size_t>(lv - 1)], lv);
    for (NodeId id : path) ++node(id).doc_count;
    return path;
  }

  // Grow an existing path one level deeper; the caller picks the child.
  NodeId extend_path_node(NodeId parent_id, NodeId child_id_or_new) {
    NodeId child = child_id_or_new == kNoNode
                       ? create_node(parent_id, node(parent_id).level + 1)
                       : child_id_or_new;
    ++node(child).doc_count;
    return child;
  }

  void remove_document_from_path(const std::vector<NodeId>& path) {
    for (NodeId id : path) {
      Node& n = node(id);
      if (n.doc_count <= 0) throw std::logic_error("remove_document_from_path: doc_count underflow");
      --n.doc_count;
    }
    // prune from the leaf end; a pruned node must have no children left
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      Node& n = node(*it);
      if (n.doc_count > 0 || n.parent == kNoNode) break;
      if (!n.children.empty()) throw std::logic_error("pruning a node that still has children");
      if (n.total_count != 0) throw std::logic_error("pruning a node that still holds words");
      Node& par = node(n.parent);
      par.children.erase(std::find(par.children.begin(), par.children.end(), n.id));
      nodes_.erase(n.id);
    }
  }

  // Create a fresh child under `parent` (proposal moves).
  NodeId add_child(NodeId parent) { return create_node(parent, node(parent).level + 1); }

  // Detach the subtree rooted at `x` and re-seat it under `new_parent`, which
  // must sit one level above `x`.  Ancestor doc_counts are adjusted and an
  // emptied old parent chain is pruned.  Word counts do not move; the caller
  // transfers them beforehand.
  void reattach_subtree(NodeId x, NodeId new_parent) {
    Node& nx = node(x);
    NodeId old_parent = nx.parent;
    if (old_parent == kNoNode)
      throw std::invalid_argument("reattach_subtree: cannot move the root");
    if (new_parent == old_parent) return;
    Node& np = node(new_parent);
    if (np.level + 1 != nx.level)
      throw std::invalid_argument("reattach_subtree: level mismatch");
    const int n = nx.doc_count;
    {
      Node& op = node(old_parent);
      op.children.erase(std::find(op.children.begin(), op.children.end(), x));
    }
    nx.parent = new_parent;
    np.children.push_back(x);
    for (NodeId a = old_parent; a != kNoNode; a = node(a).parent) node(a).doc_count -= n;
    for (NodeId a = new_parent; a != kNoNode; a = node(a).parent) node(a).doc_count += n;
    for (NodeId a = old_parent; a != kNoNode;) {
      Node& na = node(a);
      if (na.doc_count > 0 || na.parent == kNoNode) break;
      if (!na.children.empty()) throw std::logic_error("pruning a node that still has children");
      if (na.total_count != 0) throw std::logic_error("pruning a node that still holds words");
      NodeId up = na.parent;
      Node& par = node(up);
      par.children.erase(std::find(par.children.begin(), par.children.end(), a));
      nodes_.erase(a);
      a = up;
    }
  }

  void increment_word(NodeId id, int term) {
    Node& n = node(id);
    ++n.word_counts[term];
    ++n.total_count;
  }

  void decrement_word(NodeId id, int term) {
    Node& n = node(id);
    auto it = n.word_counts.find(term);
    if (it == n.word_counts.end() || it->second <= 0)
      throw std::logic_error("decrement_word: count underflow");
    if (--it->second == 0) n.word_counts.erase(it);
    --n.total_count;
  }

  // One candidate per node at the target depth (existing path) plus one
  // branch candidate per node above it, including the root.
  std::vector<PathCandidate> enumerate_path_candidates(int target_depth) const {
    if (target_depth < 0) throw std::invalid_argument("enumerate_path_candidates: bad depth");
    std::vector<PathCandidate> out;
    for (const auto& [id, n] : nodes_) {
      if (n.level == target_depth)
        out.push_back({id, 0});
      else if (n.level < target_depth)
        out.push_back({id, target_depth - n.level});
    }
    return out;
  }

  // nCRP prior of the candidate: a product of CRP seating terms level by
  // level; restaurants created fresh contribute probability one.
  double path_prior_log_prob(const PathCandidate& cand, double gamma) const {
    if (!has_node(cand.node)) throw std::invalid_argument("stale path candidate");
    double lp = 0.0;
    NodeId cur = cand.node;
    if (cand.fresh_levels > 0 && node(cur).level >= 0) {
      // the branch step: a new table in restaurant `cur`
      lp += std::log(gamma) - std::log(gamma + customers(node(cur)));
    }
    while (node(cur).parent != kNoNode) {
      const Node& n = node(cur);
      const Node& par = node(n.parent);
      lp += std::log(static_cast<double>(n.doc_count)) -
            std::log(gamma + customers(par));
      cur = n.parent;
    }
    return lp;
  }

  // structural + count consistency; throws on violation
  void check_invariants(long expected_total_tokens = -1) const {
    long tokens = 0;
    for (const auto& [id, n] : nodes_) {
      if (n.id != id) throw std::logic_error("node id mismatch");
      long wc = 0;
      for (const auto& [w, c] : n.word_counts) {
        if (c <= 0) throw std::logic_error("non-positive word count entry");
        wc += c;
      }
      if (wc != n.total_count) throw std::logic_error("total_count out of sync");
      tokens += wc;
      if (n.parent == kNoNode) {
        if (n.level != 0 || id != 0) throw std::logic_error("bad root");
      } else {
        const Node& par = node(n.parent);
        if (par.level + 1 != n.level) throw std::logic_error("level mismatch");
        if (std::find(par.children.begin(), par.children.end(), id) == par.children.end())
          throw std::logic_error("missing child link");
        if (n.doc_count < 1) throw std::logic_error("retained node with doc_count 0");
      }
      for (NodeId ch : n.children)
        if (node(ch).parent != id) throw std::logic_error("bad parent link");
      if (customers(n) > n.doc_count)
        throw std::logic_error("children doc_counts exceed parent");
    }
    if (expected_total_tokens >= 0 && tokens != expected_total_tokens)
      throw std::logic_error("token conservation violated");
  }

  // Insert a node with a specific id (snapshot reconstruction).
  Node& ensure_node(NodeId id, NodeId parent, int level) {
    auto it = nodes_.find(id);
    if (it != nodes_.end()) {
      if (it->second.parent != parent || it->second.level != level)
        throw std::runtime_error("ensure_node: conflicting structure");
      return it->second;
    }
    Node n;
    n.id = id;
    n.parent = parent;
    n.level = level;
    nodes_.emplace(id, std::move(n));
    if (parent != kNoNode) node(parent).children.push_back(id);
    next_id_ = std::max(next_id_, id + 1);
    return nodes_.at(id);
  }

  // Checkpoint support: the sampler's draws depend on child visit order and on
  // the id counter, so both must survive a save/load round trip.
  NodeId next_id() const { return next_id_; }
  void set_next_id(NodeId id) { next_id_ = std::max(next_id_, id); }

  void set_child_order(NodeId id, const std::vector<NodeId>& order) {
    Node& n = node(id);
    if (n.children.size() != order.size())
      throw std::runtime_error("set_child_order: wrong number of children");
    std::vector<NodeId> a = n.children, b = order;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw std::runtime_error("set_child_order: child sets differ");
    n.children = order;
  }

private:
  NodeId create_node(NodeId parent, int level) {
    NodeId id = next_id_++;
    Node n;
    n.id = id;
    n.parent = parent;
    n.level = level;
    nodes_.emplace(id, std::move(n));
    node(parent).children.push_back(id);
    return id;
  }

  std::map<NodeId, Node> nodes_;  // ordered: deterministic iteration
  NodeId next_id_ = 1;
};

}  // namespace hlda
