#include "graph_model.hpp"

#include "dix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dix {

namespace {

bool g_deterministic = true;

std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

void set_deterministic(bool on) { g_deterministic = on; }
bool deterministic() { return g_deterministic; }

std::string LayerId::to_string() const {
    const char* k = kind == SiteKind::input ? "input"
                    : kind == SiteKind::activation ? "activation"
                                                   : "attention";
    return std::string(k) + "[" + std::to_string(index) + "]";
}

int PredictionVector::argmax() const {
    if (scores.empty()) throw addressing_error("argmax of empty prediction");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<int>(best);
}

PredictionVector Model::forward(const Tensor& input) const {
    return forward_from(layer_ids().front(), input, nullptr);
}

AttentionPassResult Model::attention_pass(const Tensor&,
                                          const std::optional<std::pair<LayerId, Tensor>>&,
                                          int) const {
    throw capability_error("model '" + model_id() + "' has no attention sites");
}

std::vector<std::pair<std::string, const Tensor*>> Model::parameters() const { return {}; }

std::vector<std::string> Model::randomizable_layers() const { return {}; }

void Model::randomize_layer(std::size_t, std::uint64_t) {
    throw capability_error("model '" + model_id() + "' has no randomizable layers");
}

std::vector<Tensor*> Model::parameter_storage() { return {}; }

std::pair<double, std::vector<Tensor>> Model::loss_param_grads(const Tensor&, int) const {
    throw capability_error("model '" + model_id() + "' is not trainable");
}

std::string Model::weight_state() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, tensor] : parameters()) {
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(tensor->data(), tensor->size() * sizeof(double), h);
    }
    std::ostringstream oss;
    oss << std::hex << h;
    return oss.str();
}

// --- GraphModel ---

void GraphModel::add_param(std::string name, std::vector<std::size_t> shape, Init init,
                           std::size_t fan_in, std::string group) {
    ParamDef def;
    def.name = std::move(name);
    def.value = Tensor::zeros(std::move(shape));
    def.init = init;
    def.fan_in = fan_in;
    def.group = std::move(group);
    params_.push_back(std::move(def));
}

void GraphModel::init_param(ParamDef& def, Rng& rng) {
    switch (def.init) {
    case Init::kaiming_uniform: {
        const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(def.fan_in, 1)));
        for (std::size_t i = 0; i < def.value.size(); ++i)
            def.value[i] = rng.uniform(-bound, bound);
        break;
    }
    case Init::normal_002:
        for (std::size_t i = 0; i < def.value.size(); ++i) def.value[i] = rng.normal(0.0, 0.02);
        break;
    case Init::zeros:
        std::fill(def.value.storage().begin(), def.value.storage().end(), 0.0);
        break;
    case Init::ones:
        std::fill(def.value.storage().begin(), def.value.storage().end(), 1.0);
        break;
    }
}

void GraphModel::init_all_params(Rng& rng) {
    for (auto& def : params_) init_param(def, rng);
}

std::size_t GraphModel::param_index(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw addressing_error("unknown parameter '" + name + "'");
}

graph::NodeRef GraphModel::pnode(BuildContext& ctx, const std::string& name) const {
    return ctx.param_nodes[param_index(name)];
}

GraphModel::BuildContext GraphModel::make_context(graph::Tape& tape, bool params_need_grad) const {
    BuildContext ctx{tape, {}, nullptr, nullptr};
    ctx.param_nodes.reserve(params_.size());
    for (const auto& def : params_) ctx.param_nodes.push_back(tape.leaf(def.value, params_need_grad));
    return ctx;
}

const LayerId& GraphModel::validate_layer(const LayerId& layer) const {
    for (const auto& known : layer_ids())
        if (known == layer) return layer;
    throw addressing_error("unknown layer " + layer.to_string() + " on model '" + model_id() + "'");
}

void GraphModel::validate_site_shape(const LayerId& layer, const Tensor& representation) const {
    const auto want = site_shape(layer);
    if (representation.shape() != want)
        throw addressing_error("representation shape " + representation.shape_string() +
                               " does not match " + layer.to_string() + " which expects " +
                               Tensor::zeros(want).shape_string());
}

void GraphModel::validate_class_index(int class_index) const {
    if (class_index < 0 || class_index >= class_count())
        throw addressing_error("class index " + std::to_string(class_index) + " outside [0," +
                               std::to_string(class_count()) + ")");
}

namespace {

PredictionVector to_prediction(const graph::NodeRef& scores) {
    PredictionVector p;
    p.scores.assign(scores->value.data(), scores->value.data() + scores->value.size());
    for (double v : p.scores)
        if (!std::isfinite(v)) throw numerical_error("non-finite prediction score");
    return p;
}

} // namespace

CaptureResult GraphModel::forward_capture(const Tensor& input,
                                          const std::vector<LayerId>& layers) const {
    const LayerId input_site = layer_ids().front();
    validate_site_shape(input_site, input);
    for (const auto& l : layers) validate_layer(l);

    graph::Tape tape;
    auto ctx = make_context(tape, false);
    std::vector<std::pair<LayerId, Tensor>> seen;
    ctx.on_site = [&](const LayerId& site, const graph::NodeRef& node) {
        seen.emplace_back(site, node->value);
    };
    auto scores = build_from(ctx, input_site, tape.leaf(input, false));

    CaptureResult result;
    result.prediction = to_prediction(scores);
    for (const auto& requested : layers) {
        bool found = false;
        for (const auto& [site, value] : seen) {
            if (site == requested) {
                if (!value.all_finite())
                    throw numerical_error("non-finite values captured at " + site.to_string());
                result.captures.emplace_back(site, value);
                found = true;
                break;
            }
        }
        if (!found)
            throw addressing_error("layer " + requested.to_string() + " produced no capture");
    }
    return result;
}

PredictionVector GraphModel::forward_from(const LayerId& layer, const Tensor& representation,
                                          const Tensor* input_context) const {
    validate_layer(layer);
    validate_site_shape(layer, representation);
    graph::Tape tape;
    auto ctx = make_context(tape, false);
    ctx.on_site = [](const LayerId&, const graph::NodeRef&) {};

    if (layer.kind == SiteKind::attention) {
        if (!input_context)
            throw addressing_error("attention-site re-entry requires the original input context");
        std::pair<LayerId, Tensor> sub{layer, representation};
        ctx.substitution = &sub;
        auto scores = build_from(ctx, layer_ids().front(), tape.leaf(*input_context, false));
        return to_prediction(scores);
    }
    auto scores = build_from(ctx, layer, tape.leaf(representation, false));
    return to_prediction(scores);
}

Tensor GraphModel::grad_at(const LayerId& layer, const Tensor& representation, int class_index,
                           const Tensor* input_context) const {
    validate_layer(layer);
    validate_site_shape(layer, representation);
    validate_class_index(class_index);

    if (layer.kind == SiteKind::attention) {
        if (!input_context)
            throw addressing_error("attention-site gradient requires the original input context");
        auto pass = attention_pass(*input_context, std::make_pair(layer, representation),
                                   class_index);
        return pass.attention_grads.at(static_cast<std::size_t>(layer.index) - 1);
    }

    graph::Tape tape;
    auto ctx = make_context(tape, false);
    ctx.on_site = [](const LayerId&, const graph::NodeRef&) {};
    auto leaf = tape.leaf(representation, true);
    auto scores = build_from(ctx, layer, leaf);
    tape.backward(scores, static_cast<std::size_t>(class_index));
    Tensor grad = leaf->ensure_grad();
    if (!grad.all_finite()) throw numerical_error("non-finite gradient at " + layer.to_string());
    return grad;
}

AttentionPassResult
GraphModel::attention_pass(const Tensor& input,
                           const std::optional<std::pair<LayerId, Tensor>>& substitution,
                           int class_index) const {
    if (architecture() != ArchitectureKind::transformer)
        throw capability_error("model '" + model_id() + "' has no attention sites");
    validate_site_shape(layer_ids().front(), input);
    validate_class_index(class_index);
    if (substitution) {
        validate_layer(substitution->first);
        if (substitution->first.kind != SiteKind::attention)
            throw addressing_error("substitution target " + substitution->first.to_string() +
                                   " is not an attention site");
        validate_site_shape(substitution->first, substitution->second);
    }

    graph::Tape tape;
    auto ctx = make_context(tape, false);
    std::vector<std::pair<LayerId, graph::NodeRef>> attention_nodes;
    ctx.on_site = [&](const LayerId& site, const graph::NodeRef& node) {
        if (site.kind == SiteKind::attention) attention_nodes.emplace_back(site, node);
    };
    std::pair<LayerId, Tensor> sub;
    if (substitution) {
        sub = *substitution;
        ctx.substitution = &sub;
    }
    // Marking the input keeps gradients flowing through every block so all
    // attention nodes accumulate theirs in the single sweep.
    auto scores = build_from(ctx, layer_ids().front(), tape.leaf(input, true));
    tape.backward(scores, static_cast<std::size_t>(class_index));

    AttentionPassResult result;
    result.prediction = to_prediction(scores);
    std::sort(attention_nodes.begin(), attention_nodes.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [site, node] : attention_nodes) {
        result.attentions.push_back(node->value);
        result.attention_grads.push_back(node->ensure_grad());
    }
    return result;
}

std::vector<std::pair<std::string, const Tensor*>> GraphModel::parameters() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(params_.size());
    for (const auto& def : params_) out.emplace_back(def.name, &def.value);
    return out;
}

std::vector<std::string> GraphModel::randomizable_layers() const { return groups_top_first_; }

void GraphModel::randomize_layer(std::size_t top_index, std::uint64_t seed) {
    if (top_index >= groups_top_first_.size())
        throw addressing_error("randomizable layer index " + std::to_string(top_index) +
                               " out of range");
    const std::string& group = groups_top_first_[top_index];
    Rng rng = Rng::from(seed, top_index);
    for (auto& def : params_)
        if (def.group == group) init_param(def, rng);
}

std::vector<Tensor*> GraphModel::parameter_storage() {
    std::vector<Tensor*> out;
    out.reserve(params_.size());
    for (auto& def : params_) out.push_back(&def.value);
    return out;
}

std::pair<double, std::vector<Tensor>> GraphModel::loss_param_grads(const Tensor& input,
                                                                    int label) const {
    if (!trainable()) throw capability_error("model '" + model_id() + "' is not trainable");
    if (label < 0 || label >= class_count())
        throw addressing_error("label " + std::to_string(label) + " outside class range");
    graph::Tape tape;
    auto ctx = make_context(tape, true);
    ctx.on_site = [](const LayerId&, const graph::NodeRef&) {};
    auto scores = build_from(ctx, layer_ids().front(), tape.leaf(input, false));
    auto loss = graph::cross_entropy(tape, scores, static_cast<std::size_t>(label));
    tape.backward(loss, 0);
    std::vector<Tensor> grads;
    grads.reserve(params_.size());
    for (const auto& node : ctx.param_nodes) grads.push_back(node->ensure_grad());
    return {loss->value[0], std::move(grads)};
}

} // namespace dix
