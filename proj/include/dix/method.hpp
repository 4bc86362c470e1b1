#pragma once

#include "dix/attribution.hpp"
#include "dix/models.hpp"

#include <string>
#include <vector>

namespace dix {

// A named method configuration, resolvable against any model. layer_span
// counts hookable sites from the output end; 0 means the input site (plain
// path integration over the image), -1 the integration-free attention
// rollout.
struct MethodSpec {
    std::string name;
    PhiKind phi = PhiKind::activation_times_gradient;
    PathSpec path;
    AggregationKind aggregation = AggregationKind::mean;
    int layer_span = 1;
};

std::vector<std::string> preset_names();
MethodSpec resolve_preset(const std::string& name);

// The last `layer_span` non-input sites in ascending order.
LayerSelection select_layers(const MethodSpec& method, const Model& model);

// Full per-image pipeline: per-layer maps, aggregation. Raw signed values;
// normalize_map is the caller's recorded step.
ExplanationMap compute_map(const Model& model, const Tensor& image, int class_index,
                           const MethodSpec& method);

} // namespace dix
