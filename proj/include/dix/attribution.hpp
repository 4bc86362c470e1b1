#pragma once

#include "dix/models.hpp"
#include "dix/rollout.hpp"
#include "dix/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dix {

enum class CurveKind { linear };

struct PathSpec {
    int step_count = 10; // N
    CurveKind curve = CurveKind::linear;
};

enum class BaselineKind { channel_min, zero, custom };

struct BaselineSpec {
    BaselineKind kind = BaselineKind::channel_min;
    std::optional<Tensor> custom_values;

    static BaselineSpec channel_min_spec() { return {BaselineKind::channel_min, std::nullopt}; }
    static BaselineSpec zero_spec() { return {BaselineKind::zero, std::nullopt}; }
    static BaselineSpec custom_spec(Tensor values) { return {BaselineKind::custom, std::move(values)}; }
    std::string name() const;
};

enum class PhiKind { activation_times_gradient, gradient_only, gradient_rollout };

struct IntegrandSpec {
    PhiKind phi = PhiKind::activation_times_gradient;
    std::optional<RolloutConfig> rollout_config;
    std::string name() const;
};

enum class AggregationKind { mean, elementwise_product };

struct LayerSelection {
    std::vector<LayerId> layers; // nonempty, ascending
    AggregationKind aggregation = AggregationKind::mean;
    std::string name() const;
};

// Everything that went into one map, canonicalized into a digestable string.
struct MapProvenance {
    std::string model_id;
    PathSpec path;
    std::string baseline;
    std::string integrand;
    std::string layers;
    bool normalized = false;
    std::string digest_override; // set when deserialized from disk

    std::string canonical() const;
    std::string digest() const;
};

// Signed 2-D attribution grid at input resolution. Raw values keep their
// signs; normalization is a separate recorded step.
struct ExplanationMap {
    Tensor values; // (H, W)
    int class_index = 0;
    MapProvenance provenance;
};

// channel_min broadcasts each channel's minimum; zero matches the shape.
Tensor make_baseline(const Tensor& representation, SiteKind site, const BaselineSpec& spec);

// r(n/N) = z + (n/N)(x - z); endpoints return the operands bitwise.
Tensor interpolate(const Tensor& x, const Tensor& z, int n, int big_n);

// Pre-reduction accumulation of the path integral at one layer:
// ((x^l - z^l)/N) o sum_{n=1..N} phi(r(n/N), g(n/N)), right-endpoint sampled.
// Exposed separately so the completeness identity can be audited before the
// channel-mean collapses it.
Tensor dix_layer_integral_cnn(const Model& model, const Tensor& input, int class_index,
                              const LayerId& layer, const PathSpec& path,
                              const BaselineSpec& baseline, const IntegrandSpec& integrand);

ExplanationMap dix_layer_map_cnn(const Model& model, const Tensor& input, int class_index,
                                 const LayerId& layer, const PathSpec& path,
                                 const BaselineSpec& baseline, const IntegrandSpec& integrand);

// Per-step patch grids behind the transformer layer map: attention at the
// block scaled to t = n/N, one backward pass per step, gradient rollout over
// all blocks.
std::vector<Tensor> dix_vit_step_grids(const Model& model, const Tensor& input, int class_index,
                                       const LayerId& block, const PathSpec& path,
                                       const IntegrandSpec& integrand);

ExplanationMap dix_layer_map_vit(const Model& model, const Tensor& input, int class_index,
                                 const LayerId& block, const PathSpec& path,
                                 const IntegrandSpec& integrand);

ExplanationMap integrated_gradients(const Model& model, const Tensor& input, int class_index,
                                    const PathSpec& path, const BaselineSpec& baseline);

ExplanationMap aggregate(const std::vector<ExplanationMap>& maps, const LayerSelection& selection);

// Min-max to [0,1]; constant maps normalize to all-zero.
ExplanationMap normalize_map(const ExplanationMap& map);

} // namespace dix
