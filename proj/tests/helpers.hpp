#pragma once

#include "dix/attribution.hpp"
#include "dix/digest.hpp"
#include "dix/models.hpp"
#include "dix/rng.hpp"

#include <cmath>
#include <memory>

namespace dix_test {

// Minimal analytic model base for metric fixtures: only forward matters.
class ForwardOnlyModel : public dix::Model {
public:
    explicit ForwardOnlyModel(std::vector<std::size_t> input_shape, int classes)
        : shape_(std::move(input_shape)), classes_(classes) {
        layers_ = {dix::LayerId{0, dix::SiteKind::input}};
    }
    dix::ArchitectureKind architecture() const override {
        return dix::ArchitectureKind::analytic;
    }
    const std::vector<dix::LayerId>& layer_ids() const override { return layers_; }
    int class_count() const override { return classes_; }
    std::vector<std::size_t> site_shape(const dix::LayerId&) const override { return shape_; }
    dix::CaptureResult forward_capture(const dix::Tensor& input,
                                       const std::vector<dix::LayerId>& layers) const override {
        dix::CaptureResult r;
        r.prediction = forward_from(layers_[0], input, nullptr);
        for (const auto& l : layers) r.captures.emplace_back(l, input);
        return r;
    }
    dix::Tensor grad_at(const dix::LayerId&, const dix::Tensor& representation, int,
                        const dix::Tensor*) const override {
        return dix::Tensor::zeros(representation.shape());
    }

protected:
    std::vector<std::size_t> shape_;
    int classes_;
    std::vector<dix::LayerId> layers_;
};

// Score 0 is the mean of the top-left quadrant; score 1 a fixed threshold.
// The quadrant is the planted "feature" an oracle map should point at.
class PlantedQuadrantModel final : public ForwardOnlyModel {
public:
    PlantedQuadrantModel(std::size_t height, std::size_t width, double threshold = 0.3)
        : ForwardOnlyModel({1, height, width}, 2), threshold_(threshold) {}

    dix::PredictionVector forward_from(const dix::LayerId&, const dix::Tensor& r,
                                       const dix::Tensor*) const override {
        const std::size_t h = r.dim(1), w = r.dim(2);
        double sum = 0.0;
        for (std::size_t y = 0; y < h / 2; ++y)
            for (std::size_t x = 0; x < w / 2; ++x) sum += r.at(0, y, x);
        const double mean = sum / static_cast<double>((h / 2) * (w / 2));
        return dix::PredictionVector{{mean, threshold_}, std::nullopt};
    }
    std::shared_ptr<dix::Model> clone() const override {
        return std::make_shared<PlantedQuadrantModel>(*this);
    }
    std::string model_id() const override { return "planted_quadrant"; }

    dix::ExplanationMap oracle_map() const {
        dix::ExplanationMap m;
        m.values = dix::Tensor({shape_[1], shape_[2]});
        for (std::size_t y = 0; y < shape_[1] / 2; ++y)
            for (std::size_t x = 0; x < shape_[2] / 2; ++x) m.values.at(y, x) = 1.0;
        m.provenance.normalized = true;
        return m;
    }
    dix::ExplanationMap inverted_map() const {
        dix::ExplanationMap m = oracle_map();
        for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = 1.0 - m.values[i];
        return m;
    }

private:
    double threshold_;
};

// Pseudorandom head: logits are a hash of the input bytes, so two distinct
// inputs agree on the argmax with probability ~1/K.
class UniformRandomHead final : public ForwardOnlyModel {
public:
    UniformRandomHead(std::vector<std::size_t> input_shape, int classes)
        : ForwardOnlyModel(std::move(input_shape), classes) {}

    dix::PredictionVector forward_from(const dix::LayerId&, const dix::Tensor& r,
                                       const dix::Tensor*) const override {
        const std::uint64_t h = dix::fnv1a64(r.data(), r.size() * sizeof(double));
        dix::Rng rng(h);
        std::vector<double> scores(static_cast<std::size_t>(classes_));
        for (auto& s : scores) s = rng.uniform(0.0, 1.0);
        return dix::PredictionVector{std::move(scores), std::nullopt};
    }
    std::shared_ptr<dix::Model> clone() const override {
        return std::make_shared<UniformRandomHead>(*this);
    }
    std::string model_id() const override { return "uniform_random_head"; }
};

// Scores never move no matter the input.
class ConstantModel final : public ForwardOnlyModel {
public:
    ConstantModel(std::vector<std::size_t> input_shape, std::vector<double> scores)
        : ForwardOnlyModel(std::move(input_shape), static_cast<int>(scores.size())),
          scores_(std::move(scores)) {}

    dix::PredictionVector forward_from(const dix::LayerId&, const dix::Tensor&,
                                       const dix::Tensor*) const override {
        return dix::PredictionVector{scores_, std::nullopt};
    }
    std::shared_ptr<dix::Model> clone() const override {
        return std::make_shared<ConstantModel>(*this);
    }
    std::string model_id() const override { return "constant"; }

private:
    std::vector<double> scores_;
};

// Binary head with pinned probabilities: p0 on the stored reference image,
// p1 on anything else.
class TwoProbModel final : public ForwardOnlyModel {
public:
    TwoProbModel(dix::Tensor reference, double p_reference, double p_other)
        : ForwardOnlyModel(reference.shape(), 2), reference_(std::move(reference)),
          p_reference_(p_reference), p_other_(p_other) {}

    dix::PredictionVector forward_from(const dix::LayerId&, const dix::Tensor& r,
                                       const dix::Tensor*) const override {
        const double p = dix::bitwise_equal(r, reference_) ? p_reference_ : p_other_;
        return dix::PredictionVector{{std::log(p), std::log(1.0 - p)}, std::nullopt};
    }
    std::shared_ptr<dix::Model> clone() const override {
        return std::make_shared<TwoProbModel>(*this);
    }
    std::string model_id() const override { return "two_prob"; }

private:
    dix::Tensor reference_;
    double p_reference_;
    double p_other_;
};

} // namespace dix_test
