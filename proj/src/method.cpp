#include "dix/method.hpp"

#include "dix/errors.hpp"
#include "dix/rollout.hpp"

#include <algorithm>

namespace dix {

std::vector<std::string> preset_names() {
    return {"dix1", "dix2", "dix3", "dix2_mul", "dix3_grads", "ig", "rollout"};
}

MethodSpec resolve_preset(const std::string& name) {
    MethodSpec m;
    m.name = name;
    if (name == "dix1") {
        m.layer_span = 1;
    } else if (name == "dix2") {
        m.layer_span = 2;
    } else if (name == "dix3") {
        m.layer_span = 3;
    } else if (name == "dix2_mul") {
        m.layer_span = 2;
        m.aggregation = AggregationKind::elementwise_product;
    } else if (name == "dix3_grads") {
        m.layer_span = 3;
        m.phi = PhiKind::gradient_only;
    } else if (name == "ig") {
        m.layer_span = 0;
        m.phi = PhiKind::gradient_only;
    } else if (name == "rollout") {
        m.layer_span = -1;
    } else {
        std::string msg = "unknown method preset '" + name + "'; valid presets:";
        for (const auto& p : preset_names()) msg += " " + p;
        throw configuration_error(msg);
    }
    return m;
}

LayerSelection select_layers(const MethodSpec& method, const Model& model) {
    LayerSelection selection;
    selection.aggregation = method.aggregation;
    if (method.layer_span == 0) {
        selection.layers = {model.layer_ids().front()};
        return selection;
    }
    std::vector<LayerId> sites;
    for (const auto& l : model.layer_ids())
        if (l.kind != SiteKind::input) sites.push_back(l);
    if (method.layer_span < 0 || sites.empty()) {
        selection.layers = sites;
        return selection;
    }
    const auto span = static_cast<std::size_t>(method.layer_span);
    if (span > sites.size())
        throw configuration_error("preset '" + method.name + "' needs " +
                                  std::to_string(span) + " hookable layers but model '" +
                                  model.model_id() + "' has " + std::to_string(sites.size()));
    selection.layers.assign(sites.end() - static_cast<std::ptrdiff_t>(span), sites.end());
    return selection;
}

ExplanationMap compute_map(const Model& model, const Tensor& image, int class_index,
                           const MethodSpec& method) {
    if (method.name == "rollout") {
        if (model.architecture() != ArchitectureKind::transformer)
            throw configuration_error("preset 'rollout' needs a transformer model");
        auto pass = model.attention_pass(image, std::nullopt, class_index);
        PatchGrid grid = attention_rollout(pass.attentions);
        ExplanationMap map;
        map.values = resize_bilinear(grid.values, image.dim(1), image.dim(2));
        map.class_index = class_index;
        map.provenance.model_id = model.model_id();
        map.provenance.baseline = "none";
        map.provenance.integrand = "attention_rollout";
        map.provenance.layers = "S=all;agg=rollout";
        return map;
    }

    if (method.layer_span == 0)
        return integrated_gradients(model, image, class_index, method.path,
                                    BaselineSpec::zero_spec());

    const LayerSelection selection = select_layers(method, model);
    const bool transformer = model.architecture() == ArchitectureKind::transformer;
    std::vector<ExplanationMap> maps;
    maps.reserve(selection.layers.size());
    for (const auto& layer : selection.layers) {
        if (transformer) {
            IntegrandSpec integrand;
            integrand.phi = method.phi == PhiKind::activation_times_gradient
                                ? PhiKind::gradient_rollout
                                : method.phi;
            if (integrand.phi == PhiKind::gradient_rollout)
                integrand.rollout_config = RolloutConfig{};
            maps.push_back(
                dix_layer_map_vit(model, image, class_index, layer, method.path, integrand));
        } else {
            IntegrandSpec integrand{method.phi, std::nullopt};
            maps.push_back(dix_layer_map_cnn(model, image, class_index, layer, method.path,
                                             BaselineSpec::channel_min_spec(), integrand));
        }
    }
    ExplanationMap out = aggregate(maps, selection);
    out.provenance.integrand += ";preset=" + method.name;
    return out;
}

} // namespace dix
