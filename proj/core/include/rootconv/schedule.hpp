#pragma once

#include <string>
#include <vector>

#include "rootconv/net.hpp"

namespace rootconv {

/// How grouping degree changes with depth: decreasing (root), constant
/// (column), or increasing (tree) after the first spatial layer, which is
/// always ungrouped.
enum class Topology { kRoot, kColumn, kTree };

std::string topology_name(Topology t);
Topology topology_from_name(const std::string& s);

struct GroupingSchedule {
  Topology topology = Topology::kRoot;
  i64 degree = 1;
  std::vector<i64> counts;  // one per spatial-conv position, network order
};

/// Canonical schedules: root -> [1, d, d/2, ...] clamped at 1,
/// column -> [1, d, d, ...], tree -> [1, d, 2d, ...].
GroupingSchedule make_schedule(Topology topology, i64 degree, i64 positions);

/// Enforces the per-topology shape rules and the ungrouped first position.
void validate_schedule(const GroupingSchedule& s);

/// Names of spatial (non-1x1) conv layers in network order.
std::vector<std::string> spatial_conv_layers(const NetSpec& net);

/// Returns a copy of `net` with the schedule's group counts applied to its
/// spatial convs. Only the groups fields change; every scheduled spatial
/// conv must be followed (directly or via relu/batchnorm) by a 1x1 conv
/// that serves as the ungrouped mixing layer.
NetSpec apply_root_transform(const NetSpec& net, const GroupingSchedule& schedule);
NetSpec apply_root_transform(const NetSpec& net, const std::vector<i64>& counts);

}  // namespace rootconv
