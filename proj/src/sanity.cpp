#include "dix/sanity.hpp"

#include "dix/errors.hpp"
#include "dix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dix {

namespace {

std::vector<double> average_ranks(const Tensor& t) {
    const std::size_t n = t.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return t[a] < t[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && t[idx[j + 1]] == t[idx[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0; // 1-based average
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

} // namespace

SpearmanResult spearman(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw addressing_error("spearman: dimension mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const std::size_t n = ra.size();
    const double mean = 0.5 * static_cast<double>(n + 1);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = ra[i] - mean;
        const double db = rb[i] - mean;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return {0.0, true};
    return {cov / std::sqrt(var_a * var_b), false};
}

SpearmanResult spearman(const ExplanationMap& a, const ExplanationMap& b) {
    return spearman(a.values, b.values);
}

RandomizationSweep randomization_sweep(const Model& model, const MethodSpec& method,
                                       const std::vector<Tensor>& fixtures,
                                       RandomizationMode mode, std::uint64_t seed) {
    if (fixtures.empty()) throw configuration_error("randomization sweep needs fixtures");
    const auto layers = model.randomizable_layers();
    if (layers.size() < 2)
        throw configuration_error("randomization sweep needs at least two randomizable layers");

    // originals: class fixed to the unmodified model's prediction and reused
    // for the randomized maps so the pairing stays aligned
    std::vector<int> classes;
    std::vector<ExplanationMap> originals;
    for (const auto& image : fixtures) {
        const int cls = model.forward(image).argmax();
        classes.push_back(cls);
        originals.push_back(compute_map(model, image, cls, method));
    }

    RandomizationSweep sweep;
    sweep.mode = mode;
    sweep.layer_names = layers;
    sweep.seed = seed;
    sweep.fixture_count = fixtures.size();
    sweep.correlations.push_back(1.0); // depth 0: unmodified model by construction

    for (std::size_t depth = 1; depth <= layers.size(); ++depth) {
        auto randomized = model.clone();
        if (mode == RandomizationMode::cascading) {
            for (std::size_t j = 0; j < depth; ++j) randomized->randomize_layer(j, seed);
        } else {
            randomized->randomize_layer(depth - 1, seed);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < fixtures.size(); ++i) {
            const auto map = compute_map(*randomized, fixtures[i], classes[i], method);
            const auto r = spearman(originals[i], map);
            if (r.degenerate)
                sweep.skipped.push_back("depth " + std::to_string(depth) + " fixture " +
                                        std::to_string(i) + ": degenerate map");
            sum += r.rho;
        }
        sweep.correlations.push_back(sum / static_cast<double>(fixtures.size()));
    }
    return sweep;
}

CorrelationSummary summarize_correlations(std::vector<double> values) {
    if (values.empty()) throw configuration_error("empty correlation list");
    CorrelationSummary s;
    s.per_item = values;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return lo + 1 < n ? values[lo] + frac * (values[lo + 1] - values[lo]) : values[lo];
    };
    s.min = values.front();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.max = values.back();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    return s;
}

double evaluate_accuracy(const Model& model, const std::vector<LabeledImage>& data) {
    if (data.empty()) throw configuration_error("accuracy over an empty split");
    std::size_t hits = 0;
    for (const auto& sample : data)
        if (model.forward(sample.image).argmax() == sample.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainOutcome train_classifier(Model& model, const std::vector<LabeledImage>& data,
                              const TrainBudget& budget, std::uint64_t seed,
                              const std::string& tag) {
    if (!model.trainable()) throw capability_error("model '" + model.model_id() + "' cannot train");
    if (data.empty()) throw configuration_error("training set is empty");

    auto params = model.parameter_storage();
    std::vector<Tensor> m_state, v_state;
    for (Tensor* p : params) {
        m_state.push_back(Tensor::zeros(p->shape()));
        v_state.push_back(Tensor::zeros(p->shape()));
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    Rng rng = Rng::from(0x88, seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= budget.max_epochs; ++epoch) {
        // Fisher-Yates with the deterministic rng
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = rng.next_below(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(budget.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(budget.batch_size));
            std::vector<Tensor> batch_grads;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const auto& sample = data[order[bi]];
                auto [loss, grads] = model.loss_param_grads(sample.image, sample.label);
                (void)loss;
                if (batch_grads.empty()) {
                    batch_grads = std::move(grads);
                } else {
                    for (std::size_t p = 0; p < grads.size(); ++p)
                        for (std::size_t k = 0; k < grads[p].size(); ++k)
                            batch_grads[p][k] += grads[p][k];
                }
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t p = 0; p < params.size(); ++p) {
                for (std::size_t k = 0; k < params[p]->size(); ++k) {
                    const double g = batch_grads[p][k] * inv;
                    m_state[p][k] = beta1 * m_state[p][k] + (1.0 - beta1) * g;
                    v_state[p][k] = beta2 * v_state[p][k] + (1.0 - beta2) * g * g;
                    (*params[p])[k] -= budget.learning_rate * (m_state[p][k] / bc1) /
                                       (std::sqrt(v_state[p][k] / bc2) + eps);
                }
            }
        }
        const double accuracy = evaluate_accuracy(model, data);
        if (accuracy > budget.target_accuracy) return {accuracy, epoch};
    }
    throw protocol_failure("training '" + tag + "' did not exceed " +
                           std::to_string(budget.target_accuracy * 100.0) +
                           "% train accuracy within " + std::to_string(budget.max_epochs) +
                           " epochs");
}

DataRandomizationReport data_randomization(ReferenceKind kind, const SyntheticDataset& dataset,
                                           const MethodSpec& method, std::uint64_t seed,
                                           const TrainBudget& budget) {
    if (dataset.train.empty() || dataset.test.empty())
        throw configuration_error("data randomization needs train and test splits");

    DataRandomizationReport report;
    report.budget = budget;

    auto model_true = make_reference_model(kind, seed);
    auto model_perm = make_reference_model(kind, seed);
    auto model_reseed = make_reference_model(kind, seed + 1);

    // seeded global permutation of the training labels
    std::vector<LabeledImage> permuted = dataset.train;
    {
        Rng rng = Rng::from(0x99, seed);
        std::vector<int> labels;
        labels.reserve(permuted.size());
        for (const auto& s : permuted) labels.push_back(s.label);
        for (std::size_t i = labels.size(); i > 1; --i)
            std::swap(labels[i - 1], labels[rng.next_below(i)]);
        for (std::size_t i = 0; i < permuted.size(); ++i) permuted[i].label = labels[i];
    }

    auto outcome_true = train_classifier(*model_true, dataset.train, budget, seed, "true-labels");
    auto outcome_perm =
        train_classifier(*model_perm, permuted, budget, seed + 17, "permuted-labels");
    auto outcome_reseed =
        train_classifier(*model_reseed, dataset.train, budget, seed + 31, "true-labels-reseeded");
    report.true_train_accuracy = outcome_true.accuracy;
    report.permuted_train_accuracy = outcome_perm.accuracy;
    report.reseeded_train_accuracy = outcome_reseed.accuracy;
    report.true_epochs = outcome_true.epochs;
    report.permuted_epochs = outcome_perm.epochs;
    report.reseeded_epochs = outcome_reseed.epochs;
    report.permuted_test_accuracy = evaluate_accuracy(*model_perm, dataset.test);

    const double chance = 1.0 / static_cast<double>(dataset.class_count);
    if (std::abs(report.permuted_test_accuracy - chance) > kChanceMargin)
        throw protocol_failure("permuted-label model tests at " +
                               std::to_string(report.permuted_test_accuracy) +
                               " which is outside chance " + std::to_string(chance) + " +/- " +
                               std::to_string(kChanceMargin));

    std::vector<double> vs_permuted, vs_reseeded;
    for (const auto& sample : dataset.test) {
        const int cls = model_true->forward(sample.image).argmax();
        const auto map_true = compute_map(*model_true, sample.image, cls, method);
        const auto map_perm = compute_map(*model_perm, sample.image, cls, method);
        const auto map_reseed = compute_map(*model_reseed, sample.image, cls, method);
        vs_permuted.push_back(spearman(map_true, map_perm).rho);
        vs_reseeded.push_back(spearman(map_true, map_reseed).rho);
    }
    report.true_vs_permuted = summarize_correlations(std::move(vs_permuted));
    report.true_vs_true_reseeded = summarize_correlations(std::move(vs_reseeded));
    return report;
}

} // namespace dix
