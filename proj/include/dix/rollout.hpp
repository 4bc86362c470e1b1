#pragma once

#include "dix/tensor.hpp"

#include <optional>
#include <vector>

namespace dix {

enum class CombineKind { matrix_product, summation };
enum class HeadReduce { mean };

struct RolloutConfig {
    CombineKind combine = CombineKind::matrix_product;
    HeadReduce head_reduce = HeadReduce::mean;
    bool add_identity = true;
    // Attention rollout re-normalizes rows; the gradient variant must not,
    // since hadamard-weighted rows are signed and may sum near zero. Leaving
    // this unset picks the entry point's default.
    std::optional<bool> normalize_rows;
};

// Row-major s x s reshape of a CLS attention row over the patch tokens.
struct PatchGrid {
    Tensor values; // (s, s)
};

// Combined token-to-token matrix before CLS extraction; exposed so tests can
// check row stochasticity directly.
Tensor attention_rollout_matrix(const std::vector<Tensor>& blocks, const RolloutConfig& config = {});
Tensor gradient_rollout_matrix(const std::vector<Tensor>& blocks,
                               const std::vector<Tensor>& gradients,
                               const RolloutConfig& config = {});

// CLS row with its CLS entry dropped, reshaped row-major to s x s.
PatchGrid cls_row_to_grid(const Tensor& combined);

PatchGrid attention_rollout(const std::vector<Tensor>& blocks, const RolloutConfig& config = {});
PatchGrid gradient_rollout(const std::vector<Tensor>& blocks, const std::vector<Tensor>& gradients,
                           const RolloutConfig& config = {});

} // namespace dix
