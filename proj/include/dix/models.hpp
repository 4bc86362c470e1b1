#pragma once

#include "dix/tensor.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dix {

enum class ArchitectureKind { convolutional, transformer, analytic };
enum class SiteKind { input, activation, attention };

// Address of a hookable representation site. Index 0 is always the input
// site; higher indices walk the model from input to output.
struct LayerId {
    int index = 0;
    SiteKind kind = SiteKind::input;

    bool operator==(const LayerId& other) const {
        return index == other.index && kind == other.kind;
    }
    bool operator<(const LayerId& other) const {
        return index != other.index ? index < other.index
                                    : static_cast<int>(kind) < static_cast<int>(other.kind);
    }
    std::string to_string() const;
};

struct PredictionVector {
    std::vector<double> scores;
    std::optional<int> target_index;

    // ties break toward the lowest index
    int argmax() const;
};

struct CaptureResult {
    PredictionVector prediction;
    std::vector<std::pair<LayerId, Tensor>> captures; // follows request order
};

// One substituted-attention forward/backward pass: all blocks' post-softmax
// attention stacks plus their gradients w.r.t. the chosen class score,
// collected from a single backward sweep.
struct AttentionPassResult {
    PredictionVector prediction;
    std::vector<Tensor> attentions;      // per block, (heads, tokens, tokens)
    std::vector<Tensor> attention_grads; // same shapes
};

// Uniform introspection surface over a differentiable vision model: capture
// intermediate representations, re-enter the network from a substituted
// representation, and differentiate a class score w.r.t. that representation.
class Model {
public:
    virtual ~Model() = default;

    virtual ArchitectureKind architecture() const = 0;
    virtual const std::vector<LayerId>& layer_ids() const = 0;
    virtual int class_count() const = 0;
    virtual std::string model_id() const = 0;
    virtual std::vector<std::size_t> site_shape(const LayerId& layer) const = 0;

    // Opaque snapshot identifier over the current parameter values.
    virtual std::string weight_state() const;

    PredictionVector forward(const Tensor& input) const;

    virtual CaptureResult forward_capture(const Tensor& input,
                                          const std::vector<LayerId>& layers) const = 0;

    // Runs the sub-network from `layer` on `representation`. Attention sites
    // need the original input alongside the substituted stack (the stream
    // feeding V and the residual path still comes from the input); pass it
    // via `input_context`.
    virtual PredictionVector forward_from(const LayerId& layer, const Tensor& representation,
                                          const Tensor* input_context = nullptr) const = 0;

    // Gradient of the class score produced by forward_from w.r.t. the
    // representation itself.
    virtual Tensor grad_at(const LayerId& layer, const Tensor& representation, int class_index,
                           const Tensor* input_context = nullptr) const = 0;

    // Transformer models only; analytic/convolutional models refuse.
    virtual AttentionPassResult
    attention_pass(const Tensor& input,
                   const std::optional<std::pair<LayerId, Tensor>>& substitution,
                   int class_index) const;

    virtual std::shared_ptr<Model> clone() const = 0;

    // --- parameters, randomization, training ---
    virtual std::vector<std::pair<std::string, const Tensor*>> parameters() const;
    // Weight groups orderered from the output end toward the input.
    virtual std::vector<std::string> randomizable_layers() const;
    // Redraws the group's parameters from their initialization distribution,
    // seeded by (seed, group index).
    virtual void randomize_layer(std::size_t top_index, std::uint64_t seed);

    virtual bool trainable() const { return false; }
    virtual std::vector<Tensor*> parameter_storage();
    // Cross-entropy loss and parameter gradients aligned with parameters().
    virtual std::pair<double, std::vector<Tensor>> loss_param_grads(const Tensor& input,
                                                                    int label) const;
};

using ModelHandle = std::shared_ptr<Model>;

enum class ReferenceKind { linear, tiny_cnn, tiny_vit, tiny_classifier_10class };

std::string reference_kind_name(ReferenceKind kind);
ReferenceKind reference_kind_from_name(const std::string& name);

// Deterministic toy models: identical (kind, seed) pairs produce bitwise
// identical parameter snapshots.
ModelHandle make_reference_model(ReferenceKind kind, std::uint64_t seed);

// Analytic linear model with explicit weights (class_count x prod(shape)).
ModelHandle make_linear_model(const Tensor& weight, std::vector<std::size_t> input_shape);

// --- external model plugins ---
using PluginConfig = std::map<std::string, std::string>;
using PluginLoader = std::function<ModelHandle(const std::string& checkpoint_path,
                                               const PluginConfig& config)>;

void register_plugin(const std::string& name, PluginLoader loader);
std::vector<std::string> registered_plugins();
ModelHandle load_external_model(const std::string& plugin_name, const std::string& checkpoint_path,
                                const PluginConfig& config);

// Writes a reference model's weights to disk in the format understood by the
// built-in "reference_checkpoint" plugin.
void save_reference_checkpoint(const Model& model, ReferenceKind kind, std::uint64_t seed,
                               const std::string& path);

// Global switch recorded by the harness; core math is single-threaded with
// fixed-order reductions either way, so deterministic mode is the default
// behavior rather than a slower variant.
void set_deterministic(bool on);
bool deterministic();

} // namespace dix
