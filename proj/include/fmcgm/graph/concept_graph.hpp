// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fmcgm {

/// A causal variable C_i together with its observed valuation c_i.
struct Concept {
  std::string id;
  std::string name;
  std::string current_value;
  std::string description;

  bool operator==(const Concept&) const = default;
};

struct CausalEdge {
  std::string id;
  std::string cause_id;
  std::string effect_id;
  std::string description;

  bool operator==(const CausalEdge&) const = default;
};

using IdSet = std::set<std::string>;
using ValueMap = std::map<std::string, std::string>;

/// The semantic SCM: concepts and a DAG over them, no mechanisms.
///
/// Instances are only produced by `validate_graph`, so every live graph
/// satisfies: non-empty unique concept ids, unique edge ids, known edge
/// endpoints, no self-loops, no directed cycles.
class ConceptGraph {
 public:
  [[nodiscard]] const std::vector<Concept>& concepts() const noexcept { return concepts_; }
  [[nodiscard]] const std::vector<CausalEdge>& edges() const noexcept { return edges_; }
  [[nodiscard]] const std::string& scene_summary() const noexcept { return scene_summary_; }

  [[nodiscard]] std::size_t size() const noexcept { return concepts_.size(); }
  [[nodiscard]] bool contains(const std::string& id) const { return index_.contains(id); }
  [[nodiscard]] std::optional<std::size_t> index_of(const std::string& id) const;
  /// Throws UnknownConcept.
  [[nodiscard]] const Concept& concept_at(const std::string& id) const;

  /// Child indices per concept index, in edge-list order.
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& children() const noexcept {
    return children_;
  }
  [[nodiscard]] IdSet parents(const std::string& id) const;

  /// Map from id to current_value for every concept.
  [[nodiscard]] ValueMap current_values() const;

  /// Short content hash identifying this graph (stable across runs).
  [[nodiscard]] std::string fingerprint() const;

  bool operator==(const ConceptGraph& other) const {
    return concepts_ == other.concepts_ && edges_ == other.edges_ &&
           scene_summary_ == other.scene_summary_;
  }

 private:
  friend ConceptGraph validate_graph(std::vector<Concept>, std::vector<CausalEdge>, std::string);
  ConceptGraph() = default;

  std::vector<Concept> concepts_;
  std::vector<CausalEdge> edges_;
  std::string scene_summary_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> children_;
};

/// Builds a graph from raw model output.
/// Errors: EmptyConceptSet, EmptyValue, DuplicateId, UnknownEndpoint,
/// CycleDetected (message and detail name one cycle, e.g. "c1 -> c2 -> c1").
ConceptGraph validate_graph(std::vector<Concept> raw_concepts, std::vector<CausalEdge> raw_edges,
                            std::string summary);

/// Ids reachable from `id` along >= 1 directed edge. Throws UnknownConcept.
IdSet descendants(const ConceptGraph& g, const std::string& id);

/// All ids except `id` and its descendants. Throws UnknownConcept.
IdSet non_descendants(const ConceptGraph& g, const std::string& id);

/// Kahn order; among ready concepts the earliest in input order goes first.
std::vector<std::string> topological_order(const ConceptGraph& g);

/// Depth-first search from each concept in input order, following out-edges
/// in edge-list order; every edge closing a cycle (pointing at a concept on
/// the current DFS stack) is removed. Endpoints must already be known.
/// Returns the surviving edges; `removed` receives the pruned ones.
std::vector<CausalEdge> prune_back_edges(const std::vector<Concept>& concepts,
                                         const std::vector<CausalEdge>& edges,
                                         std::vector<CausalEdge>* removed = nullptr);

/// C' after do(target = new_value), i.e. the counterfactual assignment.
struct CounterfactualState {
  ValueMap assignments;
  std::string target_id;
  std::string graph_ref;

  bool operator==(const CounterfactualState&) const = default;
};

struct AppliedIntervention {
  CounterfactualState state;
  /// Ids of propagated overrides that were dropped because they are not descendants.
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;
};

/// Overrides `base_values` with the target's new value and every propagated
/// value whose id is a descendant of the target. Non-descendant overrides
/// are dropped and reported; they never fail the call.
/// Errors: UnknownConcept, EmptyNewValue, InvalidArgument (base_values incomplete).
AppliedIntervention apply_intervention(
    const ConceptGraph& g, const ValueMap& base_values, const std::string& target_id,
    const std::string& new_value,
    const std::vector<std::pair<std::string, std::string>>& propagated);

}  // namespace fmcgm
