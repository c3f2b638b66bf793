#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nmsmc {

/// Particle genealogy stored as a reference-counted forest.
///
/// Each node holds one state vector, its parent link and its time index
/// (depth). The current generation of N particles are the leaves. A node's
/// refcount is its number of children plus one while it is a leaf; when a
/// lineage loses all descendants its nodes are released up to the first
/// ancestor that still has other children, and the slots are recycled. The
/// live node count then stays of order k + C N log N instead of N (k + 1).
///
/// Leaf positions (particle indices) and ancestor indices are zero-based.
class TrajectoryTree {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kNone = static_cast<NodeId>(-1);

  /// One root per particle; `states` holds N consecutive vectors of `state_dim`.
  TrajectoryTree(std::size_t state_dim, std::span<const double> states);

  /// Appends a generation: new leaf i is a child of old leaf ancestors[i].
  /// Old leaves that received no child are pruned transitively.
  void insert_generation(std::span<const std::size_t> ancestors, std::span<const double> states);

  /// For each leaf, sum over its root-to-leaf path of
  /// coeff[lag * n + dim] * state[dim] with lag = k - depth(node), plus
  /// `offset`. One pass over the live nodes, shallowest generation first.
  ///
  /// `coeff` is lag-major and must cover lags 0..k. Writes N * n values.
  void weighted_sums(std::span<const double> coeff, std::span<const double> offset,
                     std::span<double> out) const;
  std::vector<double> weighted_sums(std::span<const double> coeff,
                                    std::span<const double> offset) const;

  /// States x_{0:k} of the leaf's lineage in time order, flattened.
  std::vector<double> extract_path(std::size_t leaf) const;

  std::span<const double> leaf_state(std::size_t leaf) const;

  std::size_t node_count() const noexcept { return live_; }
  std::size_t num_particles() const noexcept { return leaves_.size(); }
  std::size_t state_dim() const noexcept { return n_; }
  /// Time index k of the current leaves.
  std::size_t depth() const noexcept { return depth_; }
  /// Allocated slots, live or free.
  std::size_t capacity() const noexcept { return nodes_.size(); }

  /// JSON array of {id, parent, depth, refcount} for live nodes; parent is
  /// null for roots.
  std::string debug_dump() const;

  /// Full recount of every structural invariant; returns an empty string when
  /// consistent, otherwise a description of the first violation. O(capacity).
  std::string check_invariants() const;

 private:
  struct Node {
    NodeId parent = kNone;
    NodeId first_child = kNone;
    NodeId next_sibling = kNone;
    NodeId prev_sibling = kNone;
    std::uint32_t refcount = 0;
    std::uint32_t depth = 0;
    std::uint32_t slot = 0;  // position in by_depth_[depth]
  };

  NodeId allocate(std::span<const double> state, NodeId parent, std::uint32_t depth);
  void link_child(NodeId parent, NodeId child);
  void unlink(NodeId id);
  void release(NodeId id);

  std::size_t n_;
  std::size_t depth_ = 0;
  std::size_t live_ = 0;
  std::vector<Node> nodes_;
  std::vector<double> states_;
  std::vector<NodeId> free_;
  std::vector<NodeId> leaves_;
  NodeId first_root_ = kNone;
  // Live nodes grouped by depth; a generation-by-generation sweep visits
  // parents before children without chasing child links.
  std::vector<std::vector<NodeId>> by_depth_;
  // Scratch for weighted_sums; makes concurrent const calls on one tree unsafe.
  mutable std::vector<double> partial_;

  template <std::size_t Dim>
  void accumulate(const double* coeff) const;
};

}  // namespace nmsmc
