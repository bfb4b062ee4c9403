// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/graph/concept_graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "fmcgm/error.hpp"
#include "fmcgm/util/codec.hpp"
#include "fmcgm/util/text.hpp"

namespace fmcgm {

std::optional<std::size_t> ConceptGraph::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Concept& ConceptGraph::concept_at(const std::string& id) const {
  auto idx = index_of(id);
  if (!idx) throw Error(ErrorCode::UnknownConcept, "no concept with id '" + id + "'", id);
  return concepts_[*idx];
}

IdSet ConceptGraph::parents(const std::string& id) const {
  (void)concept_at(id);
  IdSet out;
  for (const auto& e : edges_) {
    if (e.effect_id == id) out.insert(e.cause_id);
  }
  return out;
}

ValueMap ConceptGraph::current_values() const {
  ValueMap out;
  for (const auto& c : concepts_) out.emplace(c.id, c.current_value);
  return out;
}

std::string ConceptGraph::fingerprint() const {
  std::string canon;
  auto field = [&](const std::string& s) {
    canon += std::to_string(s.size());
    canon += ':';
    canon += s;
  };
  for (const auto& c : concepts_) {
    field(c.id), field(c.name), field(c.current_value), field(c.description);
  }
  canon += '|';
  for (const auto& e : edges_) {
    field(e.id), field(e.cause_id), field(e.effect_id), field(e.description);
  }
  canon += '|';
  field(scene_summary_);
  return util::sha256_hex(canon).substr(0, 16);
}

namespace {

// Returns one directed cycle as a list of indices (first == last), or empty.
std::vector<std::size_t> find_cycle(const std::vector<std::vector<std::size_t>>& children) {
  const std::size_t n = children.size();
  enum : char { kWhite, kGray, kBlack };
  std::vector<char> color(n, kWhite);
  std::vector<std::size_t> parent(n, n);
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != kWhite) continue;
    // Iterative DFS: (node, next child position).
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = kGray;
    while (!stack.empty()) {
      auto& [node, pos] = stack.back();
      if (pos < children[node].size()) {
        std::size_t child = children[node][pos++];
        if (color[child] == kGray) {
          std::vector<std::size_t> cycle{child};
          for (std::size_t v = node; v != child; v = parent[v]) cycle.push_back(v);
          cycle.push_back(child);
          std::reverse(cycle.begin(), cycle.end());
          return cycle;
        }
        if (color[child] == kWhite) {
          color[child] = kGray;
          parent[child] = node;
          stack.emplace_back(child, 0);
        }
      } else {
        color[node] = kBlack;
        stack.pop_back();
      }
    }
  }
  return {};
}

}  // namespace

ConceptGraph validate_graph(std::vector<Concept> raw_concepts, std::vector<CausalEdge> raw_edges,
                            std::string summary) {
  if (raw_concepts.empty()) throw Error(ErrorCode::EmptyConceptSet, "graph has no concepts");

  ConceptGraph g;
  for (std::size_t i = 0; i < raw_concepts.size(); ++i) {
    auto& c = raw_concepts[i];
    c.id = util::trim(c.id);
    c.name = util::trim(c.name);
    c.current_value = util::trim(c.current_value);
    c.description = util::trim(c.description);
    const std::string where = "concepts[" + std::to_string(i) + "]";
    if (c.id.empty()) throw Error(ErrorCode::EmptyValue, where + ".id is empty", where + ".id");
    if (c.name.empty()) throw Error(ErrorCode::EmptyValue, where + ".name is empty", where + ".name");
    if (c.current_value.empty()) {
      throw Error(ErrorCode::EmptyValue, where + ".current_value is empty", where + ".current_value");
    }
    if (!g.index_.emplace(c.id, i).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate concept id '" + c.id + "'", c.id);
    }
  }

  IdSet edge_ids;
  g.children_.assign(raw_concepts.size(), {});
  for (auto& e : raw_edges) {
    e.id = util::trim(e.id);
    e.cause_id = util::trim(e.cause_id);
    e.effect_id = util::trim(e.effect_id);
    e.description = util::trim(e.description);
    if (!edge_ids.insert(e.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate edge id '" + e.id + "'", e.id);
    }
    auto cause = g.index_.find(e.cause_id);
    auto effect = g.index_.find(e.effect_id);
    if (cause == g.index_.end() || effect == g.index_.end()) {
      const auto& missing = cause == g.index_.end() ? e.cause_id : e.effect_id;
      throw Error(ErrorCode::UnknownEndpoint,
                  "edge '" + e.id + "' references unknown concept '" + missing + "'", missing);
    }
    if (cause->second == effect->second) {
      throw Error(ErrorCode::CycleDetected, "self-loop on '" + e.cause_id + "'",
                  e.cause_id + " -> " + e.cause_id);
    }
    g.children_[cause->second].push_back(effect->second);
  }

  if (auto cycle = find_cycle(g.children_); !cycle.empty()) {
    std::string text;
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      if (k) text += " -> ";
      text += raw_concepts[cycle[k]].id;
    }
    throw Error(ErrorCode::CycleDetected, "causal graph has a cycle: " + text, text);
  }

  g.concepts_ = std::move(raw_concepts);
  g.edges_ = std::move(raw_edges);
  g.scene_summary_ = util::trim(summary);
  return g;
}

IdSet descendants(const ConceptGraph& g, const std::string& id) {
  auto start = g.index_of(id);
  if (!start) throw Error(ErrorCode::UnknownConcept, "no concept with id '" + id + "'", id);
  std::vector<char> seen(g.size(), 0);
  std::vector<std::size_t> stack(g.children()[*start].begin(), g.children()[*start].end());
  IdSet out;
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = 1;
    out.insert(g.concepts()[v].id);
    for (std::size_t c : g.children()[v]) {
      if (!seen[c]) stack.push_back(c);
    }
  }
  return out;
}

IdSet non_descendants(const ConceptGraph& g, const std::string& id) {
  IdSet de = descendants(g, id);
  IdSet out;
  for (const auto& c : g.concepts()) {
    if (c.id != id && !de.contains(c.id)) out.insert(c.id);
  }
  return out;
}

std::vector<std::string> topological_order(const ConceptGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& kids : g.children()) {
    for (std::size_t c : kids) ++indegree[c];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::string> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t v = ready.top();
    ready.pop();
    order.push_back(g.concepts()[v].id);
    for (std::size_t c : g.children()[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  return order;
}

std::vector<CausalEdge> prune_back_edges(const std::vector<Concept>& concepts,
                                         const std::vector<CausalEdge>& edges,
                                         std::vector<CausalEdge>* removed) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < concepts.size(); ++i) index.emplace(concepts[i].id, i);

  // Out-edges per concept as positions into `edges`, preserving list order.
  std::vector<std::vector<std::size_t>> out(concepts.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto it = index.find(edges[k].cause_id);
    if (it == index.end() || !index.contains(edges[k].effect_id)) {
      throw Error(ErrorCode::UnknownEndpoint, "edge '" + edges[k].id + "' has an unknown endpoint");
    }
    out[it->second].push_back(k);
  }

  enum : char { kWhite, kGray, kBlack };
  std::vector<char> color(concepts.size(), kWhite);
  std::vector<char> drop(edges.size(), 0);
  for (std::size_t root = 0; root < concepts.size(); ++root) {
    if (color[root] != kWhite) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = kGray;
    while (!stack.empty()) {
      auto& [node, pos] = stack.back();
      if (pos < out[node].size()) {
        std::size_t k = out[node][pos++];
        std::size_t child = index.at(edges[k].effect_id);
        if (color[child] == kGray) {
          drop[k] = 1;
        } else if (color[child] == kWhite) {
          color[child] = kGray;
          stack.emplace_back(child, 0);
        }
      } else {
        color[node] = kBlack;
        stack.pop_back();
      }
    }
  }

  std::vector<CausalEdge> kept;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (drop[k]) {
      if (removed) removed->push_back(edges[k]);
    } else {
      kept.push_back(edges[k]);
    }
  }
  return kept;
}

AppliedIntervention apply_intervention(
    const ConceptGraph& g, const ValueMap& base_values, const std::string& target_id,
    const std::string& new_value,
    const std::vector<std::pair<std::string, std::string>>& propagated) {
  if (!g.contains(target_id)) {
    throw Error(ErrorCode::UnknownConcept, "intervention target '" + target_id + "' is unknown",
                target_id);
  }
  if (util::trim(new_value).empty()) {
    throw Error(ErrorCode::EmptyNewValue, "do(" + target_id + ") has an empty value", target_id);
  }
  for (const auto& c : g.concepts()) {
    if (!base_values.contains(c.id)) {
      throw Error(ErrorCode::InvalidArgument, "base values do not cover concept '" + c.id + "'",
                  c.id);
    }
  }
  for (const auto& [id, value] : base_values) {
    if (!g.contains(id)) {
      throw Error(ErrorCode::UnknownConcept, "base value for unknown concept '" + id + "'", id);
    }
  }

  AppliedIntervention result;
  result.state.target_id = target_id;
  result.state.graph_ref = g.fingerprint();
  result.state.assignments = base_values;
  result.state.assignments[target_id] = util::trim(new_value);

  const IdSet de = descendants(g, target_id);
  for (const auto& [id, value] : propagated) {
    if (!de.contains(id)) {
      result.dropped.push_back(id);
      result.warnings.push_back("dropped propagated change to non-descendant '" + id +
                                "' of '" + target_id + "'");
      continue;
    }
    result.state.assignments[id] = util::trim(value);
  }
  return result;
}

}  // namespace fmcgm
