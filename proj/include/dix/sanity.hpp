#pragma once

#include "dix/attribution.hpp"
#include "dix/dataset.hpp"
#include "dix/method.hpp"
#include "dix/models.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dix {

struct SpearmanResult {
    double rho = 0.0;
    bool degenerate = false; // a constant-map input makes the rank correlation undefined
};

// Rank correlation over flattened raw values, average ranks for ties.
SpearmanResult spearman(const Tensor& a, const Tensor& b);
SpearmanResult spearman(const ExplanationMap& a, const ExplanationMap& b);

enum class RandomizationMode { cascading, independent };

struct RandomizationSweep {
    RandomizationMode mode = RandomizationMode::cascading;
    std::vector<std::string> layer_names; // top-first, aligned with depths 1..L'
    std::vector<double> correlations;     // length L'+1, [0] = 1.0 exactly
    std::uint64_t seed = 0;
    std::size_t fixture_count = 0;
    std::vector<std::string> skipped;
};

// Depth d randomizes the top d layers (cascading) or only the d-th from the
// top (independent); each correlation is the fixture-mean Spearman between
// original-model and randomized-model maps under the same method.
RandomizationSweep randomization_sweep(const Model& model, const MethodSpec& method,
                                       const std::vector<Tensor>& fixtures,
                                       RandomizationMode mode, std::uint64_t seed);

struct CorrelationSummary {
    std::vector<double> per_item;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

CorrelationSummary summarize_correlations(std::vector<double> values);

struct TrainBudget {
    int max_epochs = 600;
    int batch_size = 20;
    double learning_rate = 3e-3;
    double target_accuracy = 0.95; // strict: training stops once accuracy exceeds this
};

struct TrainOutcome {
    double accuracy = 0.0;
    int epochs = 0;
};

// Adam on the model's parameters until train accuracy exceeds the target;
// protocol_failure when the budget runs out first.
TrainOutcome train_classifier(Model& model, const std::vector<LabeledImage>& data,
                              const TrainBudget& budget, std::uint64_t seed,
                              const std::string& tag);

double evaluate_accuracy(const Model& model, const std::vector<LabeledImage>& data);

struct DataRandomizationReport {
    CorrelationSummary true_vs_permuted;
    CorrelationSummary true_vs_true_reseeded;
    double true_train_accuracy = 0.0;
    double permuted_train_accuracy = 0.0;
    double reseeded_train_accuracy = 0.0;
    double permuted_test_accuracy = 0.0;
    int true_epochs = 0, permuted_epochs = 0, reseeded_epochs = 0;
    TrainBudget budget;
};

// A permuted-label model may not beat random guessing; its test accuracy must
// stay within this margin of 1/K.
inline constexpr double kChanceMargin = 0.05;

// Trains on true labels, on a seeded global label permutation, and on true
// labels from a reseeded init; compares paired explanation maps on the test
// split.
DataRandomizationReport data_randomization(ReferenceKind kind, const SyntheticDataset& dataset,
                                           const MethodSpec& method, std::uint64_t seed,
                                           const TrainBudget& budget = {});

} // namespace dix
