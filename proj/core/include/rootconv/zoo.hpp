#pragma once

#include <string>

#include "rootconv/net.hpp"
#include "rootconv/schedule.hpp"

namespace rootconv {

/// Which grouping variant of a built-in architecture to generate.
/// degree == 1 means the ungrouped baseline.
struct ArchVariant {
  Topology topology = Topology::kRoot;
  i64 degree = 1;

  bool baseline() const { return degree == 1; }
  static ArchVariant parse(const std::string& s);  // "baseline", "root-8", "tree-4", ...
  std::string str() const;
};

/// Network-in-Network for 32x32 inputs, three blocks of one spatial conv
/// (5x5, 5x5, 3x3) followed by two 1x1 layers each; 3x3/2 max pooling after
/// blocks 1-2 and global average pooling into the classifier.
NetSpec make_nin(const ArchVariant& v, i64 width_div = 1, i64 classes = 10);

/// Bottleneck residual nets for 224x224 inputs. ResNet-50 uses
/// post-activation blocks with the stride on the first 1x1; ResNet-200 uses
/// pre-activation ordering with the stride on the 3x3.
NetSpec make_resnet50(const ArchVariant& v, i64 width_div = 1, i64 classes = 1000);
NetSpec make_resnet200(const ArchVariant& v, i64 width_div = 1, i64 classes = 1000);

/// GoogLeNet (inception v1) for 224x224 inputs; batchnorm without scale and
/// bias. Groups apply only to the spatial (3x3, 5x5) convs, one count per
/// inception tier. `with_aux` adds the two auxiliary classifier towers.
NetSpec make_googlenet(const ArchVariant& v, bool with_aux = false, i64 width_div = 1,
                       i64 classes = 1000);

/// Builds one of the architectures above by name: "nin", "nin-quarter",
/// "resnet50", "resnet200", "googlenet".
NetSpec make_arch(const std::string& arch, const ArchVariant& v);

/// The layer whose output feeds the final softmax (the logits).
std::string logits_layer(const NetSpec& net);

}  // namespace rootconv
