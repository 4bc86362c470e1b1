#include "dix/rollout.hpp"

#include "dix/errors.hpp"

#include <cmath>

namespace dix {

namespace {

void validate_blocks(const std::vector<Tensor>& blocks) {
    if (blocks.empty()) throw configuration_error("rollout needs at least one block");
    const Tensor& first = blocks.front();
    if (first.rank() != 3 || first.dim(1) != first.dim(2))
        throw addressing_error("attention stack must be (heads, tokens, tokens), got " +
                               first.shape_string());
    for (const Tensor& b : blocks)
        if (b.rank() != 3 || b.dim(1) != blocks.front().dim(1) || b.dim(2) != b.dim(1))
            throw addressing_error("attention stacks disagree on token count: " +
                                   blocks.front().shape_string() + " vs " + b.shape_string());
}

Tensor head_mean(const Tensor& stack) {
    const std::size_t heads = stack.dim(0), tok = stack.dim(1);
    Tensor out({tok, tok});
    const double inv = 1.0 / static_cast<double>(heads);
    for (std::size_t r = 0; r < tok; ++r)
        for (std::size_t c = 0; c < tok; ++c) {
            double s = 0.0;
            for (std::size_t h = 0; h < heads; ++h) s += stack.at(h, r, c);
            out.at(r, c) = s * inv;
        }
    return out;
}

Tensor identity_matrix(std::size_t n) {
    Tensor eye({n, n});
    for (std::size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0;
    return eye;
}

void apply_identity_and_norm(Tensor& m, bool add_identity, bool normalize_rows) {
    const std::size_t tok = m.dim(0);
    if (add_identity) {
        for (std::size_t r = 0; r < tok; ++r)
            for (std::size_t c = 0; c < tok; ++c)
                m.at(r, c) = 0.5 * (m.at(r, c) + (r == c ? 1.0 : 0.0));
    }
    if (normalize_rows) {
        for (std::size_t r = 0; r < tok; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < tok; ++c) s += m.at(r, c);
            if (std::abs(s) < 1e-12) continue; // leave degenerate rows untouched
            for (std::size_t c = 0; c < tok; ++c) m.at(r, c) /= s;
        }
    }
}

Tensor matmul2(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.dim(0);
    Tensor out({n, n});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += a.at(r, k) * b.at(k, c);
            out.at(r, c) = s;
        }
    return out;
}

// Per-block matrices arrive in forward (input-to-output) order; the product
// stacks each deeper block on the left, matching the original rollout
// recursion. The summation variant is I + sum of the per-block matrices.
Tensor combine(std::vector<Tensor> per_block, CombineKind kind) {
    if (kind == CombineKind::matrix_product) {
        Tensor total = per_block.front();
        for (std::size_t b = 1; b < per_block.size(); ++b) total = matmul2(per_block[b], total);
        return total;
    }
    Tensor total = identity_matrix(per_block.front().dim(0));
    for (const Tensor& m : per_block)
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += m[i];
    return total;
}

Tensor rollout_impl(const std::vector<Tensor>& blocks, const std::vector<Tensor>* gradients,
                    const RolloutConfig& config, bool default_normalize) {
    validate_blocks(blocks);
    if (gradients) {
        if (gradients->size() != blocks.size())
            throw addressing_error("gradient list has " + std::to_string(gradients->size()) +
                                   " entries for " + std::to_string(blocks.size()) + " blocks");
        for (std::size_t b = 0; b < blocks.size(); ++b)
            if (!(*gradients)[b].same_shape(blocks[b]))
                throw addressing_error("gradient shape " + (*gradients)[b].shape_string() +
                                       " does not pair with block " + blocks[b].shape_string());
    }
    const bool normalize = config.normalize_rows.value_or(default_normalize);
    std::vector<Tensor> per_block;
    per_block.reserve(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        Tensor weighted = gradients ? hadamard(blocks[b], (*gradients)[b]) : blocks[b];
        Tensor m = head_mean(weighted);
        apply_identity_and_norm(m, config.add_identity, normalize);
        per_block.push_back(std::move(m));
    }
    return combine(std::move(per_block), config.combine);
}

} // namespace

Tensor attention_rollout_matrix(const std::vector<Tensor>& blocks, const RolloutConfig& config) {
    return rollout_impl(blocks, nullptr, config, /*default_normalize=*/true);
}

Tensor gradient_rollout_matrix(const std::vector<Tensor>& blocks,
                               const std::vector<Tensor>& gradients,
                               const RolloutConfig& config) {
    return rollout_impl(blocks, &gradients, config, /*default_normalize=*/false);
}

PatchGrid cls_row_to_grid(const Tensor& combined) {
    if (combined.rank() != 2 || combined.dim(0) != combined.dim(1))
        throw addressing_error("combined rollout matrix must be square, got " +
                               combined.shape_string());
    const std::size_t patches = combined.dim(0) - 1;
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(patches))));
    if (side * side != patches)
        throw configuration_error("patch count " + std::to_string(patches) +
                                  " is not a perfect square; grid reshape undefined");
    Tensor grid({side, side});
    for (std::size_t i = 0; i < patches; ++i) grid[i] = combined.at(0, i + 1);
    return PatchGrid{std::move(grid)};
}

PatchGrid attention_rollout(const std::vector<Tensor>& blocks, const RolloutConfig& config) {
    return cls_row_to_grid(attention_rollout_matrix(blocks, config));
}

PatchGrid gradient_rollout(const std::vector<Tensor>& blocks, const std::vector<Tensor>& gradients,
                           const RolloutConfig& config) {
    return cls_row_to_grid(gradient_rollout_matrix(blocks, gradients, config));
}

} // namespace dix
