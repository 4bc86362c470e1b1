#include "dix/attribution.hpp"

#include "dix/digest.hpp"
#include "dix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dix {

namespace {

std::string layer_list_string(const std::vector<LayerId>& layers) {
    std::ostringstream oss;
    oss << "{";
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) oss << ",";
        oss << layers[i].index;
    }
    oss << "}";
    return oss.str();
}

std::pair<std::size_t, std::size_t> input_spatial_dims(const Tensor& input) {
    if (input.rank() == 3) return {input.dim(1), input.dim(2)};
    if (input.rank() == 2) return {input.dim(0), input.dim(1)};
    throw addressing_error("input must be (C,H,W) or (H,W), got " + input.shape_string());
}

Tensor capture_at(const Model& model, const Tensor& input, const LayerId& layer) {
    auto result = model.forward_capture(input, {layer});
    return std::move(result.captures.front().second);
}

void validate_phi_for_activation(const IntegrandSpec& integrand) {
    if (integrand.phi == PhiKind::gradient_rollout)
        throw configuration_error("gradient_rollout applies to attention sites only");
    if (integrand.rollout_config)
        throw configuration_error("rollout_config is only meaningful with phi=gradient_rollout");
}

MapProvenance make_provenance(const Model& model, const PathSpec& path, const std::string& baseline,
                              const std::string& integrand, const std::string& layers) {
    MapProvenance p;
    p.model_id = model.model_id();
    p.path = path;
    p.baseline = baseline;
    p.integrand = integrand;
    p.layers = layers;
    return p;
}

} // namespace

std::string BaselineSpec::name() const {
    switch (kind) {
    case BaselineKind::channel_min: return "channel_min";
    case BaselineKind::zero: return "zero";
    case BaselineKind::custom: {
        std::string payload;
        if (custom_values)
            payload = fnv1a64_hex(std::string(
                reinterpret_cast<const char*>(custom_values->data()),
                custom_values->size() * sizeof(double)));
        return "custom#" + payload;
    }
    }
    return "?";
}

std::string IntegrandSpec::name() const {
    switch (phi) {
    case PhiKind::activation_times_gradient: return "activation_times_gradient";
    case PhiKind::gradient_only: return "gradient_only";
    case PhiKind::gradient_rollout: {
        std::string s = "gradient_rollout";
        if (rollout_config) {
            s += rollout_config->combine == CombineKind::matrix_product ? "(product" : "(sum";
            s += rollout_config->add_identity ? ",identity" : ",no-identity";
            s += ")";
        }
        return s;
    }
    }
    return "?";
}

std::string LayerSelection::name() const {
    return "S=" + layer_list_string(layers) +
           (aggregation == AggregationKind::mean ? ";agg=mean" : ";agg=product");
}

std::string MapProvenance::canonical() const {
    std::ostringstream oss;
    oss << "model=" << model_id << ";curve=linear;N=" << path.step_count << ";baseline=" << baseline
        << ";integrand=" << integrand << ";layers=" << layers
        << ";normalized=" << (normalized ? 1 : 0);
    return oss.str();
}

std::string MapProvenance::digest() const {
    if (!digest_override.empty()) return digest_override;
    return fnv1a64_hex(canonical());
}

Tensor make_baseline(const Tensor& representation, SiteKind site, const BaselineSpec& spec) {
    switch (spec.kind) {
    case BaselineKind::channel_min: {
        if (site == SiteKind::attention)
            throw configuration_error("channel_min baseline is undefined on attention sites");
        if (representation.rank() != 3)
            throw addressing_error("channel_min expects a (C,H,W) activation, got " +
                                   representation.shape_string());
        const std::size_t c = representation.dim(0);
        const std::size_t hw = representation.dim(1) * representation.dim(2);
        Tensor out(representation.shape());
        for (std::size_t ch = 0; ch < c; ++ch) {
            double mn = representation[ch * hw];
            for (std::size_t i = 1; i < hw; ++i) mn = std::min(mn, representation[ch * hw + i]);
            for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] = mn;
        }
        return out;
    }
    case BaselineKind::zero: return Tensor::zeros(representation.shape());
    case BaselineKind::custom:
        if (!spec.custom_values)
            throw configuration_error("custom baseline requires custom_values");
        if (!spec.custom_values->same_shape(representation))
            throw configuration_error("custom baseline shape " +
                                      spec.custom_values->shape_string() +
                                      " does not match representation " +
                                      representation.shape_string());
        return *spec.custom_values;
    }
    throw configuration_error("unknown baseline kind");
}

Tensor interpolate(const Tensor& x, const Tensor& z, int n, int big_n) {
    if (!x.same_shape(z))
        throw addressing_error("interpolate: shape mismatch " + x.shape_string() + " vs " +
                               z.shape_string());
    if (big_n < 1 || n < 0 || n > big_n)
        throw configuration_error("interpolate: step " + std::to_string(n) + " outside [0," +
                                  std::to_string(big_n) + "]");
    if (n == 0) return z;
    if (n == big_n) return x;
    const double t = static_cast<double>(n) / static_cast<double>(big_n);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i] + t * (x[i] - z[i]);
    return out;
}

Tensor dix_layer_integral_cnn(const Model& model, const Tensor& input, int class_index,
                              const LayerId& layer, const PathSpec& path,
                              const BaselineSpec& baseline, const IntegrandSpec& integrand) {
    if (layer.kind == SiteKind::attention)
        throw configuration_error("attention sites go through dix_layer_map_vit");
    validate_phi_for_activation(integrand);
    if (path.step_count < 1) throw configuration_error("path step count must be >= 1");

    const Tensor x_l = capture_at(model, input, layer);
    const Tensor z_l = make_baseline(x_l, layer.kind, baseline);

    Tensor acc = Tensor::zeros(x_l.shape());
    const int big_n = path.step_count;
    for (int n = 1; n <= big_n; ++n) {
        const Tensor r = interpolate(x_l, z_l, n, big_n);
        const Tensor g = model.grad_at(layer, r, class_index, nullptr);
        if (integrand.phi == PhiKind::activation_times_gradient) {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += r[i] * g[i];
        } else {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(big_n);
    Tensor pre(x_l.shape());
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = (x_l[i] - z_l[i]) * inv_n * acc[i];
    return pre;
}

ExplanationMap dix_layer_map_cnn(const Model& model, const Tensor& input, int class_index,
                                 const LayerId& layer, const PathSpec& path,
                                 const BaselineSpec& baseline, const IntegrandSpec& integrand) {
    Tensor pre = dix_layer_integral_cnn(model, input, class_index, layer, path, baseline,
                                        integrand);
    const auto [h, w] = input_spatial_dims(input);
    Tensor grid = channel_mean(pre.rank() == 3 ? pre : pre.reshaped({1, pre.dim(0), pre.dim(1)}));
    ExplanationMap map;
    map.values = resize_bilinear(grid, h, w);
    map.class_index = class_index;
    map.provenance = make_provenance(model, path, baseline.name(), integrand.name(),
                                     "S=" + layer_list_string({layer}) + ";agg=mean");
    if (!map.values.all_finite())
        throw numerical_error("non-finite explanation map at " + layer.to_string());
    return map;
}

std::vector<Tensor> dix_vit_step_grids(const Model& model, const Tensor& input, int class_index,
                                       const LayerId& block, const PathSpec& path,
                                       const IntegrandSpec& integrand) {
    if (block.kind != SiteKind::attention)
        throw configuration_error("dix_layer_map_vit requires an attention site, got " +
                                  block.to_string());
    if (integrand.phi == PhiKind::activation_times_gradient)
        throw configuration_error("transformer integrand is gradient_rollout (or gradient_only "
                                  "for the ablation)");
    if (integrand.phi == PhiKind::gradient_rollout && !integrand.rollout_config)
        throw configuration_error("phi=gradient_rollout requires rollout_config");
    if (path.step_count < 1) throw configuration_error("path step count must be >= 1");

    const RolloutConfig config = integrand.rollout_config.value_or(RolloutConfig{});

    // z is the zero stack, so r(n/N) is just the captured attention scaled.
    auto clean = model.attention_pass(input, std::nullopt, class_index);
    const std::size_t block_pos = static_cast<std::size_t>(block.index) - 1;
    if (block_pos >= clean.attentions.size())
        throw addressing_error("block " + block.to_string() + " outside the attention stack");
    const Tensor& a_block = clean.attentions[block_pos];

    std::vector<Tensor> grids;
    const int big_n = path.step_count;
    grids.reserve(static_cast<std::size_t>(big_n));
    for (int n = 1; n <= big_n; ++n) {
        const double t = static_cast<double>(n) / static_cast<double>(big_n);
        Tensor substituted = n == big_n ? a_block : dix::scale(a_block, t);
        auto pass = model.attention_pass(input, std::make_pair(block, substituted), class_index);
        PatchGrid grid;
        if (integrand.phi == PhiKind::gradient_rollout) {
            grid = gradient_rollout(pass.attentions, pass.attention_grads, config);
        } else {
            // plain-gradient ablation: unit stacks drop the attention factor
            std::vector<Tensor> ones;
            ones.reserve(pass.attentions.size());
            for (const Tensor& a : pass.attentions) ones.push_back(Tensor::full(a.shape(), 1.0));
            grid = gradient_rollout(ones, pass.attention_grads, config);
        }
        grids.push_back(std::move(grid.values));
    }
    return grids;
}

ExplanationMap dix_layer_map_vit(const Model& model, const Tensor& input, int class_index,
                                 const LayerId& block, const PathSpec& path,
                                 const IntegrandSpec& integrand) {
    const auto grids = dix_vit_step_grids(model, input, class_index, block, path, integrand);
    Tensor mean = Tensor::zeros(grids.front().shape());
    for (const Tensor& g : grids)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g[i];
    const double inv = 1.0 / static_cast<double>(grids.size());
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] *= inv;

    const auto [h, w] = input_spatial_dims(input);
    ExplanationMap map;
    map.values = resize_bilinear(mean, h, w);
    map.class_index = class_index;
    map.provenance = make_provenance(model, path, BaselineSpec::zero_spec().name(),
                                     integrand.name(),
                                     "S=" + layer_list_string({block}) + ";agg=mean");
    if (!map.values.all_finite())
        throw numerical_error("non-finite explanation map at " + block.to_string());
    return map;
}

ExplanationMap integrated_gradients(const Model& model, const Tensor& input, int class_index,
                                    const PathSpec& path, const BaselineSpec& baseline) {
    const LayerId input_site = model.layer_ids().front();
    const Tensor z = make_baseline(input, input_site.kind, baseline);
    if (!z.same_shape(input))
        throw addressing_error("baseline shape " + z.shape_string() + " must equal input " +
                               input.shape_string());
    if (path.step_count < 1) throw configuration_error("path step count must be >= 1");

    Tensor acc = Tensor::zeros(input.shape());
    const int big_n = path.step_count;
    for (int n = 1; n <= big_n; ++n) {
        const Tensor r = interpolate(input, z, n, big_n);
        const Tensor g = model.grad_at(input_site, r, class_index, nullptr);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
    Tensor pre(input.shape());
    const double inv_n = 1.0 / static_cast<double>(big_n);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = (input[i] - z[i]) * inv_n * acc[i];

    ExplanationMap map;
    map.values = channel_mean(pre.rank() == 3 ? pre : pre.reshaped({1, pre.dim(0), pre.dim(1)}));
    map.class_index = class_index;
    map.provenance = make_provenance(model, path, baseline.name(), "gradient_only",
                                     "S={0};agg=mean");
    if (!map.values.all_finite()) throw numerical_error("non-finite integrated-gradients map");
    return map;
}

ExplanationMap aggregate(const std::vector<ExplanationMap>& maps, const LayerSelection& selection) {
    if (maps.empty()) throw configuration_error("aggregate over an empty map list");
    if (maps.size() != selection.layers.size())
        throw configuration_error("aggregate got " + std::to_string(maps.size()) + " maps for " +
                                  std::to_string(selection.layers.size()) + " selected layers");
    const ExplanationMap& first = maps.front();
    for (const auto& m : maps) {
        if (!m.values.same_shape(first.values))
            throw addressing_error("aggregate: map dimensions differ: " +
                                   first.values.shape_string() + " vs " +
                                   m.values.shape_string());
        if (m.class_index != first.class_index)
            throw addressing_error("aggregate: maps explain different classes");
    }

    ExplanationMap out = first;
    if (maps.size() > 1) {
        if (selection.aggregation == AggregationKind::mean) {
            for (std::size_t i = 1; i < maps.size(); ++i)
                for (std::size_t j = 0; j < out.values.size(); ++j)
                    out.values[j] += maps[i].values[j];
            const double inv = 1.0 / static_cast<double>(maps.size());
            for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] *= inv;
        } else {
            for (std::size_t i = 1; i < maps.size(); ++i)
                for (std::size_t j = 0; j < out.values.size(); ++j)
                    out.values[j] *= maps[i].values[j];
        }
    }
    out.provenance.layers = selection.name();
    return out;
}

ExplanationMap normalize_map(const ExplanationMap& map) {
    ExplanationMap out = map;
    const double mn = map.values.min_value();
    const double mx = map.values.max_value();
    const double range = mx - mn;
    if (range <= 0.0) {
        out.values = Tensor::zeros(map.values.shape());
    } else {
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = (out.values[i] - mn) / range;
    }
    out.provenance.normalized = true;
    return out;
}

} // namespace dix
