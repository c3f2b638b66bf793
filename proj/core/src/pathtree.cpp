#include "nmsmc/pathtree.hpp"

#include <algorithm>
#include <limits>

#include <json.hpp>

#include "nmsmc/errors.hpp"

namespace nmsmc {

TrajectoryTree::TrajectoryTree(std::size_t state_dim, std::span<const double> states)
    : n_(state_dim) {
  if (n_ == 0) throw ConfigError("state dimension must be positive");
  if (states.empty() || states.size() % n_ != 0) {
    throw ConfigError("initial states must be a non-empty multiple of the state dimension");
  }
  const std::size_t count = states.size() / n_;
  nodes_.reserve(2 * count);
  states_.reserve(2 * count * n_);
  leaves_.resize(count);
  // Link in reverse so the root list reads in particle order.
  for (std::size_t i = count; i-- > 0;) {
    leaves_[i] = allocate(states.subspan(i * n_, n_), kNone, 0);
  }
}

TrajectoryTree::NodeId TrajectoryTree::allocate(std::span<const double> state, NodeId parent,
                                                std::uint32_t depth) {
  NodeId id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
  } else {
    if (nodes_.size() >= static_cast<std::size_t>(kNone)) {
      throw std::length_error("trajectory tree exhausted its node id space");
    }
    id = static_cast<NodeId>(nodes_.size());
    nodes_.emplace_back();
    states_.resize(states_.size() + n_);
  }
  Node& node = nodes_[id];
  node = Node{};
  node.depth = depth;
  node.refcount = 1;
  if (by_depth_.size() <= depth) by_depth_.resize(depth + 1);
  node.slot = static_cast<std::uint32_t>(by_depth_[depth].size());
  by_depth_[depth].push_back(id);
  std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(id * n_));
  link_child(parent, id);
  ++live_;
  return id;
}

void TrajectoryTree::link_child(NodeId parent, NodeId child) {
  Node& c = nodes_[child];
  c.parent = parent;
  c.prev_sibling = kNone;
  NodeId& head = parent == kNone ? first_root_ : nodes_[parent].first_child;
  c.next_sibling = head;
  if (head != kNone) nodes_[head].prev_sibling = child;
  head = child;
}

void TrajectoryTree::unlink(NodeId id) {
  Node& node = nodes_[id];
  if (node.prev_sibling != kNone) {
    nodes_[node.prev_sibling].next_sibling = node.next_sibling;
  } else if (node.parent != kNone) {
    nodes_[node.parent].first_child = node.next_sibling;
  } else {
    first_root_ = node.next_sibling;
  }
  if (node.next_sibling != kNone) nodes_[node.next_sibling].prev_sibling = node.prev_sibling;
}

void TrajectoryTree::release(NodeId id) {
  while (id != kNone) {
    Node& node = nodes_[id];
    if (--node.refcount > 0) return;
    const NodeId parent = node.parent;
    unlink(id);
    auto& bucket = by_depth_[node.depth];
    const NodeId moved = bucket.back();
    bucket[node.slot] = moved;
    nodes_[moved].slot = node.slot;
    bucket.pop_back();
    node.parent = kNone;
    free_.push_back(id);
    --live_;
    id = parent;
  }
}

void TrajectoryTree::insert_generation(std::span<const std::size_t> ancestors,
                                       std::span<const double> states) {
  const std::size_t count = leaves_.size();
  if (ancestors.size() != count) throw ConfigError("ancestor vector must have one entry per particle");
  if (states.size() != count * n_) throw ConfigError("state block must hold N state vectors");
  for (std::size_t a : ancestors) {
    if (a >= count) throw ConfigError("ancestor index out of range");
  }
  if (depth_ + 1 > std::numeric_limits<std::uint32_t>::max()) {
    throw std::length_error("trajectory tree depth overflow");
  }
  const auto depth = static_cast<std::uint32_t>(depth_ + 1);

  std::vector<NodeId> next(count);
  for (std::size_t i = count; i-- > 0;) {
    const NodeId parent = leaves_[ancestors[i]];
    ++nodes_[parent].refcount;
    next[i] = allocate(states.subspan(i * n_, n_), parent, depth);
  }
  // Drop the leaf reference held by the previous generation.
  for (NodeId old : leaves_) release(old);
  leaves_ = std::move(next);
  depth_ = depth;
}

template <std::size_t Dim>
void TrajectoryTree::accumulate(const double* coeff) const {
  // Dim == 0 means the runtime dimension n_.
  const std::size_t n = Dim == 0 ? n_ : Dim;
  double* partial = partial_.data();
  const double* states = states_.data();
  // partial[id] = sum over the path root..id.
  for (std::size_t d = 0; d <= depth_; ++d) {
    const double* lag = coeff + (depth_ - d) * n;
    for (const NodeId id : by_depth_[d]) {
      const NodeId parent = nodes_[id].parent;
      const double* x = states + static_cast<std::size_t>(id) * n;
      double* acc = partial + static_cast<std::size_t>(id) * n;
      if (parent == kNone) {
        for (std::size_t i = 0; i < n; ++i) acc[i] = lag[i] * x[i];
      } else {
        const double* up = partial + static_cast<std::size_t>(parent) * n;
        for (std::size_t i = 0; i < n; ++i) acc[i] = up[i] + lag[i] * x[i];
      }
    }
  }
}

void TrajectoryTree::weighted_sums(std::span<const double> coeff, std::span<const double> offset,
                                   std::span<double> out) const {
  const std::size_t count = leaves_.size();
  if (coeff.size() < (depth_ + 1) * n_) {
    throw ConfigError("coefficient sequence shorter than k + 1 lags");
  }
  if (offset.size() != n_) throw ConfigError("offset must have the state dimension");
  if (out.size() != count * n_) throw ConfigError("output must hold N state vectors");

  if (partial_.size() < nodes_.size() * n_) partial_.resize(nodes_.size() * n_ * 2);
  switch (n_) {
    case 1: accumulate<1>(coeff.data()); break;
    case 2: accumulate<2>(coeff.data()); break;
    default: accumulate<0>(coeff.data()); break;
  }

  for (std::size_t p = 0; p < count; ++p) {
    const double* acc = partial_.data() + static_cast<std::size_t>(leaves_[p]) * n_;
    for (std::size_t i = 0; i < n_; ++i) out[p * n_ + i] = acc[i] + offset[i];
  }
}

std::vector<double> TrajectoryTree::weighted_sums(std::span<const double> coeff,
                                                  std::span<const double> offset) const {
  std::vector<double> out(leaves_.size() * n_);
  weighted_sums(coeff, offset, out);
  return out;
}

std::vector<double> TrajectoryTree::extract_path(std::size_t leaf) const {
  if (leaf >= leaves_.size()) throw ConfigError("leaf index out of range");
  std::vector<double> path((depth_ + 1) * n_);
  NodeId id = leaves_[leaf];
  for (std::size_t t = depth_ + 1; t-- > 0;) {
    std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(id * n_), n_,
                path.begin() + static_cast<std::ptrdiff_t>(t * n_));
    id = nodes_[id].parent;
  }
  return path;
}

std::span<const double> TrajectoryTree::leaf_state(std::size_t leaf) const {
  if (leaf >= leaves_.size()) throw ConfigError("leaf index out of range");
  return std::span<const double>(states_).subspan(static_cast<std::size_t>(leaves_[leaf]) * n_, n_);
}

std::string TrajectoryTree::debug_dump() const {
  std::vector<bool> is_free(nodes_.size(), false);
  for (NodeId f : free_) is_free[f] = true;
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (is_free[id]) continue;
    const Node& node = nodes_[id];
    nlohmann::json entry{{"id", id}, {"depth", node.depth}, {"refcount", node.refcount}};
    entry["parent"] = node.parent == kNone ? nlohmann::json(nullptr) : nlohmann::json(node.parent);
    arr.push_back(std::move(entry));
  }
  return arr.dump();
}

std::string TrajectoryTree::check_invariants() const {
  const std::size_t cap = nodes_.size();
  std::vector<bool> is_free(cap, false);
  for (NodeId f : free_) {
    if (f >= cap || is_free[f]) return "free list corrupt";
    is_free[f] = true;
  }
  std::vector<std::uint32_t> expected(cap, 0);
  std::vector<bool> is_leaf(cap, false);
  for (NodeId l : leaves_) {
    if (is_free[l]) return "leaf points at a free slot";
    if (nodes_[l].depth != depth_) return "leaf depth differs from current step";
    if (is_leaf[l]) return "duplicate leaf";
    is_leaf[l] = true;
    ++expected[l];
  }
  std::size_t live = 0;
  for (std::size_t id = 0; id < cap; ++id) {
    if (is_free[id]) continue;
    ++live;
    const Node& node = nodes_[id];
    if (node.parent != kNone) {
      if (is_free[node.parent]) return "live node has a freed parent";
      if (nodes_[node.parent].depth + 1 != node.depth) return "parent depth mismatch";
      ++expected[node.parent];
    } else if (node.depth != 0) {
      return "root with non-zero depth";
    }
  }
  if (live != live_) return "live counter mismatch";
  for (std::size_t id = 0; id < cap; ++id) {
    if (is_free[id]) continue;
    if (nodes_[id].refcount != expected[id]) return "refcount mismatch at node " + std::to_string(id);
    if (expected[id] == 0) return "unreachable live node " + std::to_string(id);
  }
  // Every live node must be reachable from some leaf; the child lists must
  // enumerate exactly the live non-root nodes.
  std::vector<bool> reached(cap, false);
  for (NodeId l : leaves_) {
    for (NodeId id = l; id != kNone && !reached[id]; id = nodes_[id].parent) reached[id] = true;
  }
  std::size_t listed = 0;
  std::vector<NodeId> stack;
  for (NodeId r = first_root_; r != kNone; r = nodes_[r].next_sibling) stack.push_back(r);
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    ++listed;
    for (NodeId c = nodes_[id].first_child; c != kNone; c = nodes_[c].next_sibling) {
      if (nodes_[c].parent != id) return "child list disagrees with parent link";
      stack.push_back(c);
    }
  }
  for (std::size_t id = 0; id < cap; ++id) {
    if (!is_free[id] && !reached[id]) return "live node not reachable from any leaf";
  }
  if (listed != live_) return "child lists do not cover the live tree";
  std::size_t bucketed = 0;
  for (std::size_t d = 0; d < by_depth_.size(); ++d) {
    for (std::size_t k = 0; k < by_depth_[d].size(); ++k) {
      const NodeId id = by_depth_[d][k];
      if (id >= cap || is_free[id]) return "depth bucket holds a free slot";
      if (nodes_[id].depth != d || nodes_[id].slot != k) return "depth bucket index mismatch";
      ++bucketed;
    }
  }
  if (bucketed != live) return "depth buckets miss live nodes";
  return {};
}

}  // namespace nmsmc
