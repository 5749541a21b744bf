#include "rootconv/schedule.hpp"

#include <algorithm>

namespace rootconv {

std::string topology_name(Topology t) {
  switch (t) {
    case Topology::kRoot: return "root";
    case Topology::kColumn: return "column";
    case Topology::kTree: return "tree";
  }
  return "?";
}

Topology topology_from_name(const std::string& s) {
  if (s == "root") return Topology::kRoot;
  if (s == "column") return Topology::kColumn;
  if (s == "tree") return Topology::kTree;
  throw ConfigError("unknown topology: " + s);
}

namespace {

bool is_power_of_two(i64 v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

GroupingSchedule make_schedule(Topology topology, i64 degree, i64 positions) {
  if (!is_power_of_two(degree) || degree < 2) {
    throw ConfigError("schedule degree must be a power of two >= 2, got " +
                      std::to_string(degree));
  }
  if (positions < 2) {
    throw ConfigError("schedule needs at least 2 positions");
  }
  GroupingSchedule s;
  s.topology = topology;
  s.degree = degree;
  s.counts.assign(positions, 1);
  i64 d = degree;
  for (i64 i = 1; i < positions; ++i) {
    s.counts[i] = std::max<i64>(d, 1);
    switch (topology) {
      case Topology::kRoot: d /= 2; break;
      case Topology::kColumn: break;
      case Topology::kTree: d *= 2; break;
    }
  }
  return s;
}

void validate_schedule(const GroupingSchedule& s) {
  if (s.counts.empty() || s.counts.front() != 1) {
    throw ConfigError("schedule: first (image-space) position must be ungrouped");
  }
  for (i64 c : s.counts) {
    if (c < 1) throw ConfigError("schedule: group counts must be >= 1");
  }
  for (size_t i = 2; i < s.counts.size(); ++i) {
    const i64 prev = s.counts[i - 1];
    const i64 cur = s.counts[i];
    switch (s.topology) {
      case Topology::kRoot:
        if (cur > prev || prev % cur != 0) {
          throw ConfigError("schedule: root counts must be non-increasing with each dividing the "
                            "previous");
        }
        break;
      case Topology::kColumn:
        if (cur != prev) throw ConfigError("schedule: column counts must be constant after first");
        break;
      case Topology::kTree:
        if (cur < prev || cur % prev != 0) {
          throw ConfigError("schedule: tree counts must be non-decreasing multiples");
        }
        break;
    }
  }
}

std::vector<std::string> spatial_conv_layers(const NetSpec& net) {
  std::vector<std::string> names;
  for (const auto& l : net.layers) {
    if (l.is_spatial_conv()) names.push_back(l.name);
  }
  return names;
}

namespace {

// A grouped spatial conv needs an ungrouped 1x1 conv downstream, reachable
// through relu/batchnorm only, to mix the group outputs.
bool has_mixing_layer(const NetSpec& net, const std::string& start) {
  std::vector<std::string> frontier{start};
  while (!frontier.empty()) {
    std::vector<std::string> next;
    for (const auto& l : net.layers) {
      for (const auto& src : l.inputs) {
        if (std::find(frontier.begin(), frontier.end(), src) == frontier.end()) continue;
        if (l.kind == LayerKind::kConv && l.kh == 1 && l.kw == 1) return true;
        if (l.kind == LayerKind::kRelu || l.kind == LayerKind::kBatchNorm) {
          next.push_back(l.name);
        }
      }
    }
    frontier = std::move(next);
  }
  return false;
}

}  // namespace

NetSpec apply_root_transform(const NetSpec& net, const std::vector<i64>& counts) {
  auto shapes = validate_net(net);
  auto spatial = spatial_conv_layers(net);
  if (counts.size() != spatial.size()) {
    throw ConfigError("transform: schedule has " + std::to_string(counts.size()) +
                      " positions but net has " + std::to_string(spatial.size()) +
                      " spatial conv layers");
  }
  NetSpec out = net;
  for (size_t i = 0; i < spatial.size(); ++i) {
    if (counts[i] == 1) continue;
    LayerSpec& l = out.layer(spatial[i]);
    const i64 in_c = shapes.at(l.inputs.front()).c();
    if (in_c % counts[i] != 0 || l.out_channels % counts[i] != 0) {
      throw ConfigError("transform: layer " + l.name + " channels (" + std::to_string(in_c) +
                        "->" + std::to_string(l.out_channels) + ") not divisible by groups " +
                        std::to_string(counts[i]));
    }
    if (!has_mixing_layer(net, l.name)) {
      throw ConfigError("transform: spatial conv " + l.name +
                        " has no following 1x1 conv; cannot form a root module");
    }
    l.groups = counts[i];
  }
  validate_net(out);
  return out;
}

NetSpec apply_root_transform(const NetSpec& net, const GroupingSchedule& schedule) {
  validate_schedule(schedule);
  return apply_root_transform(net, schedule.counts);
}

}  // namespace rootconv
