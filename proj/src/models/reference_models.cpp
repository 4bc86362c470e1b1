#include "graph_model.hpp"

#include "dix/errors.hpp"

#include <cmath>

namespace dix {

namespace {

using graph::NodeRef;

// Patch extraction for the toy ViT: (C,H,W) -> (patches, C*ph*pw), patches in
// row-major order over the patch grid, features in (c,y,x) order.
NodeRef extract_patches(graph::Tape& tape, const NodeRef& x, std::size_t patch) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3 || xv.dim(1) % patch != 0 || xv.dim(2) % patch != 0)
        throw addressing_error("extract_patches: input " + xv.shape_string() +
                               " not divisible into " + std::to_string(patch) + "-pixel patches");
    const std::size_t c = xv.dim(0), gh = xv.dim(1) / patch, gw = xv.dim(2) / patch;
    const std::size_t n = gh * gw, d = c * patch * patch;
    Tensor out({n, d});
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px) {
            const std::size_t row = py * gw + px;
            std::size_t f = 0;
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t z = 0; z < patch; ++z)
                        out.at(row, f++) = xv.at(ci, py * patch + y, px * patch + z);
        }
    return tape.make(std::move(out), {x}, [x, c, gh, gw, patch](graph::Node& nd) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t py = 0; py < gh; ++py)
            for (std::size_t px = 0; px < gw; ++px) {
                const std::size_t row = py * gw + px;
                std::size_t f = 0;
                for (std::size_t ci = 0; ci < c; ++ci)
                    for (std::size_t y = 0; y < patch; ++y)
                        for (std::size_t z = 0; z < patch; ++z)
                            gx.at(ci, py * patch + y, px * patch + z) += nd.grad.at(row, f++);
            }
    });
}

// ---------------------------------------------------------------------------
// Analytic linear model: f(v) = W v over the flattened input.
// ---------------------------------------------------------------------------
class LinearModel final : public GraphModel {
public:
    LinearModel(Tensor weight, std::vector<std::size_t> input_shape, std::string id)
        : input_shape_(std::move(input_shape)), id_(std::move(id)) {
        if (weight.rank() != 2 || weight.dim(1) != shape_product(input_shape_))
            throw configuration_error("linear weights " + weight.shape_string() +
                                      " incompatible with input " +
                                      Tensor::zeros(input_shape_).shape_string());
        k_ = static_cast<int>(weight.dim(0));
        add_param("w", weight.shape(), Init::zeros, 0, "w");
        params_[0].value = std::move(weight);
        layers_ = {LayerId{0, SiteKind::input}};
        groups_top_first_ = {"w"};
    }

    static std::shared_ptr<LinearModel> seeded(std::uint64_t seed) {
        const std::vector<std::size_t> shape{2, 3, 3};
        Rng rng = Rng::from(0x11, seed);
        Tensor w({3, shape_product(shape)});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
        return std::make_shared<LinearModel>(std::move(w), shape,
                                             "linear#" + std::to_string(seed));
    }

    ArchitectureKind architecture() const override { return ArchitectureKind::analytic; }
    const std::vector<LayerId>& layer_ids() const override { return layers_; }
    int class_count() const override { return k_; }
    std::string model_id() const override { return id_; }

    std::vector<std::size_t> site_shape(const LayerId& layer) const override {
        validate_layer(layer);
        return input_shape_;
    }

    std::shared_ptr<Model> clone() const override { return std::make_shared<LinearModel>(*this); }

protected:
    NodeRef build_from(BuildContext& ctx, const LayerId& from, NodeRef input) const override {
        ctx.on_site(from, input);
        auto flat = graph::reshape(ctx.tape, input, {input->value.size()});
        auto zero_bias = ctx.tape.leaf(Tensor::zeros({static_cast<std::size_t>(k_)}), false);
        return graph::affine_vec(ctx.tape, flat, pnode(ctx, "w"), zero_bias);
    }

private:
    std::vector<std::size_t> input_shape_;
    std::string id_;
    std::vector<LayerId> layers_;
    int k_ = 0;
};

// ---------------------------------------------------------------------------
// Tiny residual CNN: three residual blocks over an 8x8 RGB input, GELU
// activations, global-average-pool head. Hookable sites are the block
// outputs.
// ---------------------------------------------------------------------------
class TinyCnn final : public GraphModel {
public:
    explicit TinyCnn(std::uint64_t seed) : seed_(seed) {
        add_block_params("block1", 3, 8);
        add_block_params("block2", 8, 12);
        add_block_params("block3", 12, 16);
        add_param("fc.w", {5, 16}, Init::kaiming_uniform, 16, "fc");
        add_param("fc.b", {5}, Init::kaiming_uniform, 16, "fc");
        groups_top_first_ = {"fc", "block3", "block2", "block1"};
        Rng rng = Rng::from(0x22, seed);
        init_all_params(rng);
        layers_ = {LayerId{0, SiteKind::input}, LayerId{1, SiteKind::activation},
                   LayerId{2, SiteKind::activation}, LayerId{3, SiteKind::activation}};
    }

    ArchitectureKind architecture() const override { return ArchitectureKind::convolutional; }
    const std::vector<LayerId>& layer_ids() const override { return layers_; }
    int class_count() const override { return 5; }
    std::string model_id() const override { return "tiny_cnn#" + std::to_string(seed_); }

    std::vector<std::size_t> site_shape(const LayerId& layer) const override {
        validate_layer(layer);
        switch (layer.index) {
        case 0: return {3, 8, 8};
        case 1: return {8, 8, 8};
        case 2: return {12, 4, 4};
        default: return {16, 2, 2};
        }
    }

    std::shared_ptr<Model> clone() const override { return std::make_shared<TinyCnn>(*this); }

protected:
    NodeRef build_from(BuildContext& ctx, const LayerId& from, NodeRef input) const override {
        ctx.on_site(from, input);
        NodeRef x = input;
        if (from.index < 1) {
            x = residual_block(ctx, "block1", x, 1);
            ctx.on_site(LayerId{1, SiteKind::activation}, x);
        }
        if (from.index < 2) {
            x = residual_block(ctx, "block2", x, 2);
            ctx.on_site(LayerId{2, SiteKind::activation}, x);
        }
        if (from.index < 3) {
            x = residual_block(ctx, "block3", x, 3);
            ctx.on_site(LayerId{3, SiteKind::activation}, x);
        }
        auto pooled = graph::global_avg_pool(ctx.tape, x);
        return graph::affine_vec(ctx.tape, pooled, pnode(ctx, "fc.w"), pnode(ctx, "fc.b"));
    }

private:
    void add_block_params(const std::string& g, std::size_t c_in, std::size_t c_out) {
        add_param(g + ".conv1.w", {c_out, c_in, 3, 3}, Init::kaiming_uniform, c_in * 9, g);
        add_param(g + ".conv1.b", {c_out}, Init::zeros, 0, g);
        add_param(g + ".conv2.w", {c_out, c_out, 3, 3}, Init::kaiming_uniform, c_out * 9, g);
        add_param(g + ".conv2.b", {c_out}, Init::zeros, 0, g);
        add_param(g + ".short.w", {c_out, c_in, 1, 1}, Init::kaiming_uniform, c_in, g);
        add_param(g + ".short.b", {c_out}, Init::zeros, 0, g);
    }

    // stride 1 keeps 8x8; blocks 2 and 3 halve the grid
    NodeRef residual_block(BuildContext& ctx, const std::string& g, const NodeRef& x,
                           int block_no) const {
        const std::size_t stride = block_no == 1 ? 1 : 2;
        auto main = graph::conv2d(ctx.tape, x, pnode(ctx, g + ".conv1.w"),
                                  pnode(ctx, g + ".conv1.b"), stride, 1);
        main = graph::gelu(ctx.tape, main);
        main = graph::conv2d(ctx.tape, main, pnode(ctx, g + ".conv2.w"),
                             pnode(ctx, g + ".conv2.b"), 1, 1);
        auto shortcut = graph::conv2d(ctx.tape, x, pnode(ctx, g + ".short.w"),
                                      pnode(ctx, g + ".short.b"), stride, 0);
        return graph::gelu(ctx.tape, graph::add(ctx.tape, main, shortcut));
    }

    std::uint64_t seed_;
    std::vector<LayerId> layers_;
};

// ---------------------------------------------------------------------------
// Tiny ViT: 4x4 patches over an 8x8 RGB input (4 patch tokens + CLS), two
// pre-norm encoder blocks with two heads each. Hookable sites are the
// post-softmax attention stacks.
// ---------------------------------------------------------------------------
class TinyVit final : public GraphModel {
public:
    static constexpr std::size_t kPatch = 4;
    static constexpr std::size_t kTokens = 5; // CLS + 4 patches
    static constexpr std::size_t kDim = 8;
    static constexpr std::size_t kHeads = 2;
    static constexpr std::size_t kBlocks = 2;
    static constexpr std::size_t kMlpHidden = 16;

    explicit TinyVit(std::uint64_t seed) : seed_(seed) {
        add_param("embed.cls", {1, kDim}, Init::normal_002, 0, "embed");
        add_param("embed.pos", {kTokens, kDim}, Init::normal_002, 0, "embed");
        add_param("embed.w", {kDim, 3 * kPatch * kPatch}, Init::normal_002, 0, "embed");
        add_param("embed.b", {kDim}, Init::zeros, 0, "embed");
        for (std::size_t b = 1; b <= kBlocks; ++b) add_block_params("block" + std::to_string(b));
        add_param("head.ln.g", {kDim}, Init::ones, 0, "head");
        add_param("head.ln.b", {kDim}, Init::zeros, 0, "head");
        add_param("head.fc.w", {3, kDim}, Init::normal_002, 0, "head");
        add_param("head.fc.b", {3}, Init::zeros, 0, "head");
        groups_top_first_ = {"head", "block2", "block1", "embed"};
        Rng rng = Rng::from(0x33, seed);
        init_all_params(rng);
        layers_ = {LayerId{0, SiteKind::input}, LayerId{1, SiteKind::attention},
                   LayerId{2, SiteKind::attention}};
    }

    ArchitectureKind architecture() const override { return ArchitectureKind::transformer; }
    const std::vector<LayerId>& layer_ids() const override { return layers_; }
    int class_count() const override { return 3; }
    std::string model_id() const override { return "tiny_vit#" + std::to_string(seed_); }

    std::vector<std::size_t> site_shape(const LayerId& layer) const override {
        validate_layer(layer);
        if (layer.kind == SiteKind::input) return {3, 8, 8};
        return {kHeads, kTokens, kTokens};
    }

    std::shared_ptr<Model> clone() const override { return std::make_shared<TinyVit>(*this); }

protected:
    NodeRef build_from(BuildContext& ctx, const LayerId& from, NodeRef input) const override {
        if (from.kind != SiteKind::input)
            throw addressing_error("transformer re-entry happens via attention substitution");
        ctx.on_site(from, input);
        auto patches = extract_patches(ctx.tape, input, kPatch);
        auto embedded = graph::affine(ctx.tape, patches, pnode(ctx, "embed.w"),
                                      pnode(ctx, "embed.b"));
        auto tokens = graph::concat_rows(ctx.tape, pnode(ctx, "embed.cls"), embedded);
        tokens = graph::add(ctx.tape, tokens, pnode(ctx, "embed.pos"));
        for (std::size_t b = 1; b <= kBlocks; ++b)
            tokens = encoder_block(ctx, "block" + std::to_string(b), static_cast<int>(b), tokens);
        auto normed = graph::layer_norm(ctx.tape, tokens, pnode(ctx, "head.ln.g"),
                                        pnode(ctx, "head.ln.b"));
        auto cls = graph::slice_row(ctx.tape, normed, 0);
        return graph::affine_vec(ctx.tape, cls, pnode(ctx, "head.fc.w"), pnode(ctx, "head.fc.b"));
    }

private:
    void add_block_params(const std::string& g) {
        add_param(g + ".ln1.g", {kDim}, Init::ones, 0, g);
        add_param(g + ".ln1.b", {kDim}, Init::zeros, 0, g);
        for (const char* m : {"q", "k", "v", "o"}) {
            add_param(g + ".w" + m, {kDim, kDim}, Init::normal_002, 0, g);
            add_param(g + ".b" + m, {kDim}, Init::zeros, 0, g);
        }
        add_param(g + ".ln2.g", {kDim}, Init::ones, 0, g);
        add_param(g + ".ln2.b", {kDim}, Init::zeros, 0, g);
        add_param(g + ".mlp1.w", {kMlpHidden, kDim}, Init::normal_002, 0, g);
        add_param(g + ".mlp1.b", {kMlpHidden}, Init::zeros, 0, g);
        add_param(g + ".mlp2.w", {kDim, kMlpHidden}, Init::normal_002, 0, g);
        add_param(g + ".mlp2.b", {kDim}, Init::zeros, 0, g);
    }

    NodeRef encoder_block(BuildContext& ctx, const std::string& g, int block_no,
                          const NodeRef& x) const {
        auto normed = graph::layer_norm(ctx.tape, x, pnode(ctx, g + ".ln1.g"),
                                        pnode(ctx, g + ".ln1.b"));
        auto q = graph::split_heads(
            ctx.tape, graph::affine(ctx.tape, normed, pnode(ctx, g + ".wq"), pnode(ctx, g + ".bq")),
            kHeads);
        auto k = graph::split_heads(
            ctx.tape, graph::affine(ctx.tape, normed, pnode(ctx, g + ".wk"), pnode(ctx, g + ".bk")),
            kHeads);
        auto v = graph::split_heads(
            ctx.tape, graph::affine(ctx.tape, normed, pnode(ctx, g + ".wv"), pnode(ctx, g + ".bv")),
            kHeads);

        const LayerId site{block_no, SiteKind::attention};
        NodeRef attention;
        if (ctx.substitution && ctx.substitution->first == site) {
            // A replaced stack is a leaf: gradients stop here instead of
            // flowing back through the softmax into Q and K.
            attention = ctx.tape.leaf(ctx.substitution->second, true);
        } else {
            attention = graph::softmax_lastdim(ctx.tape, graph::scaled_qk(ctx.tape, q, k));
        }
        ctx.on_site(site, attention);

        auto mixed = graph::merge_heads(ctx.tape, graph::attn_apply(ctx.tape, attention, v));
        auto attn_out = graph::affine(ctx.tape, mixed, pnode(ctx, g + ".wo"),
                                      pnode(ctx, g + ".bo"));
        auto res1 = graph::add(ctx.tape, x, attn_out);

        auto normed2 = graph::layer_norm(ctx.tape, res1, pnode(ctx, g + ".ln2.g"),
                                         pnode(ctx, g + ".ln2.b"));
        auto hidden = graph::gelu(
            ctx.tape,
            graph::affine(ctx.tape, normed2, pnode(ctx, g + ".mlp1.w"), pnode(ctx, g + ".mlp1.b")));
        auto mlp_out = graph::affine(ctx.tape, hidden, pnode(ctx, g + ".mlp2.w"),
                                     pnode(ctx, g + ".mlp2.b"));
        return graph::add(ctx.tape, res1, mlp_out);
    }

    std::uint64_t seed_;
    std::vector<LayerId> layers_;
};

// ---------------------------------------------------------------------------
// Trainable 10-class classifier over 8x8 grayscale images; big enough to
// memorize a permuted-label training split.
// ---------------------------------------------------------------------------
class TinyClassifier final : public GraphModel {
public:
    explicit TinyClassifier(std::uint64_t seed) : seed_(seed) {
        add_param("conv1.w", {8, 1, 3, 3}, Init::kaiming_uniform, 9, "conv1");
        add_param("conv1.b", {8}, Init::zeros, 0, "conv1");
        add_param("conv2.w", {12, 8, 3, 3}, Init::kaiming_uniform, 72, "conv2");
        add_param("conv2.b", {12}, Init::zeros, 0, "conv2");
        add_param("fc1.w", {64, 192}, Init::kaiming_uniform, 192, "fc1");
        add_param("fc1.b", {64}, Init::zeros, 0, "fc1");
        add_param("fc2.w", {10, 64}, Init::kaiming_uniform, 64, "fc2");
        add_param("fc2.b", {10}, Init::zeros, 0, "fc2");
        groups_top_first_ = {"fc2", "fc1", "conv2", "conv1"};
        Rng rng = Rng::from(0x44, seed);
        init_all_params(rng);
        layers_ = {LayerId{0, SiteKind::input}, LayerId{1, SiteKind::activation},
                   LayerId{2, SiteKind::activation}};
    }

    ArchitectureKind architecture() const override { return ArchitectureKind::convolutional; }
    const std::vector<LayerId>& layer_ids() const override { return layers_; }
    int class_count() const override { return 10; }
    std::string model_id() const override {
        return "tiny_classifier_10class#" + std::to_string(seed_);
    }
    bool trainable() const override { return true; }

    std::vector<std::size_t> site_shape(const LayerId& layer) const override {
        validate_layer(layer);
        switch (layer.index) {
        case 0: return {1, 8, 8};
        case 1: return {8, 8, 8};
        default: return {12, 4, 4};
        }
    }

    std::shared_ptr<Model> clone() const override {
        return std::make_shared<TinyClassifier>(*this);
    }

protected:
    NodeRef build_from(BuildContext& ctx, const LayerId& from, NodeRef input) const override {
        ctx.on_site(from, input);
        NodeRef x = input;
        if (from.index < 1) {
            x = graph::gelu(ctx.tape, graph::conv2d(ctx.tape, x, pnode(ctx, "conv1.w"),
                                                    pnode(ctx, "conv1.b"), 1, 1));
            ctx.on_site(LayerId{1, SiteKind::activation}, x);
        }
        if (from.index < 2) {
            x = graph::gelu(ctx.tape, graph::conv2d(ctx.tape, x, pnode(ctx, "conv2.w"),
                                                    pnode(ctx, "conv2.b"), 2, 1));
            ctx.on_site(LayerId{2, SiteKind::activation}, x);
        }
        auto flat = graph::reshape(ctx.tape, x, {x->value.size()});
        auto h = graph::gelu(ctx.tape, graph::affine_vec(ctx.tape, flat, pnode(ctx, "fc1.w"),
                                                         pnode(ctx, "fc1.b")));
        return graph::affine_vec(ctx.tape, h, pnode(ctx, "fc2.w"), pnode(ctx, "fc2.b"));
    }

private:
    std::uint64_t seed_;
    std::vector<LayerId> layers_;
};

} // namespace

std::string reference_kind_name(ReferenceKind kind) {
    switch (kind) {
    case ReferenceKind::linear: return "linear";
    case ReferenceKind::tiny_cnn: return "tiny_cnn";
    case ReferenceKind::tiny_vit: return "tiny_vit";
    case ReferenceKind::tiny_classifier_10class: return "tiny_classifier_10class";
    }
    throw configuration_error("unknown reference kind");
}

ReferenceKind reference_kind_from_name(const std::string& name) {
    if (name == "linear") return ReferenceKind::linear;
    if (name == "tiny_cnn") return ReferenceKind::tiny_cnn;
    if (name == "tiny_vit") return ReferenceKind::tiny_vit;
    if (name == "tiny_classifier_10class") return ReferenceKind::tiny_classifier_10class;
    throw configuration_error(
        "unknown reference model kind '" + name +
        "'; known kinds: linear, tiny_cnn, tiny_vit, tiny_classifier_10class");
}

ModelHandle make_reference_model(ReferenceKind kind, std::uint64_t seed) {
    switch (kind) {
    case ReferenceKind::linear: return LinearModel::seeded(seed);
    case ReferenceKind::tiny_cnn: return std::make_shared<TinyCnn>(seed);
    case ReferenceKind::tiny_vit: return std::make_shared<TinyVit>(seed);
    case ReferenceKind::tiny_classifier_10class: return std::make_shared<TinyClassifier>(seed);
    }
    throw configuration_error("unknown reference kind");
}

ModelHandle make_linear_model(const Tensor& weight, std::vector<std::size_t> input_shape) {
    return std::make_shared<LinearModel>(weight, std::move(input_shape), "linear#custom");
}

} // namespace dix
