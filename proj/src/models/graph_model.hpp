#pragma once

#include "dix/graph.hpp"
#include "dix/models.hpp"
#include "dix/rng.hpp"

#include <string>
#include <vector>

namespace dix {

// Shared machinery for the built-in reference models: parameters live here as
// named tensors with their init recipe, and the generic capture / re-entry /
// gradient operations are implemented once on top of a per-model graph
// builder.
class GraphModel : public Model {
public:
    enum class Init { kaiming_uniform, normal_002, zeros, ones };

    struct ParamDef {
        std::string name;
        Tensor value;
        Init init = Init::zeros;
        std::size_t fan_in = 0; // kaiming only
        std::string group;
    };

    struct BuildContext {
        graph::Tape& tape;
        std::vector<graph::NodeRef> param_nodes; // aligned with params_
        std::function<void(const LayerId&, const graph::NodeRef&)> on_site;
        const std::pair<LayerId, Tensor>* substitution = nullptr;
    };

    // Model interface implemented generically.
    CaptureResult forward_capture(const Tensor& input,
                                  const std::vector<LayerId>& layers) const override;
    PredictionVector forward_from(const LayerId& layer, const Tensor& representation,
                                  const Tensor* input_context) const override;
    Tensor grad_at(const LayerId& layer, const Tensor& representation, int class_index,
                   const Tensor* input_context) const override;
    AttentionPassResult
    attention_pass(const Tensor& input,
                   const std::optional<std::pair<LayerId, Tensor>>& substitution,
                   int class_index) const override;

    std::vector<std::pair<std::string, const Tensor*>> parameters() const override;
    std::vector<std::string> randomizable_layers() const override;
    void randomize_layer(std::size_t top_index, std::uint64_t seed) override;
    std::vector<Tensor*> parameter_storage() override;
    std::pair<double, std::vector<Tensor>> loss_param_grads(const Tensor& input,
                                                            int label) const override;

protected:
    // Runs the network from site `from` (inclusive; on_site sees it) to the
    // score vector node.
    virtual graph::NodeRef build_from(BuildContext& ctx, const LayerId& from,
                                      graph::NodeRef input) const = 0;

    void add_param(std::string name, std::vector<std::size_t> shape, Init init, std::size_t fan_in,
                   std::string group);
    void init_all_params(Rng& rng);
    std::size_t param_index(const std::string& name) const;
    graph::NodeRef pnode(BuildContext& ctx, const std::string& name) const;

    const LayerId& validate_layer(const LayerId& layer) const;
    void validate_site_shape(const LayerId& layer, const Tensor& representation) const;
    void validate_class_index(int class_index) const;

    std::vector<ParamDef> params_;
    std::vector<std::string> groups_top_first_;

private:
    BuildContext make_context(graph::Tape& tape, bool params_need_grad) const;
    static void init_param(ParamDef& def, Rng& rng);
};

} // namespace dix
