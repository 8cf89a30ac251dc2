#pragma once

#include <ppf/feasibility.hpp>

#include <map>

namespace ppf::detail {

/// Re-evaluates the witness's family at its operator against `anns`; nodes missing from `anns` read as opaque.
std::optional<Witness> recheck(const Plan &plan, const std::map<NodeId, AnnotationVector> &anns, const Witness &w);

/// Nodes of `members` reachable from `sink` through child edges that stay inside `members`.
std::set<NodeId> reachable_within(const Plan &plan, NodeId sink, const std::set<NodeId> &members);

}
