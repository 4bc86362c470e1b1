#include "dix/dataset.hpp"
#include "dix/errors.hpp"
#include "dix/image.hpp"
#include "dix/metrics.hpp"
#include "dix/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace dix;
using namespace dix_test;

namespace {

ExplanationMap normalized_map(std::vector<std::size_t> shape, std::vector<double> vals) {
    ExplanationMap m;
    m.values = Tensor(std::move(shape), std::move(vals));
    m.provenance.normalized = true;
    return m;
}

Tensor planted_image(std::size_t h, std::size_t w, Rng& rng) {
    Tensor img({1, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            img.at(0, y, x) = (y < h / 2 && x < w / 2) ? rng.uniform(0.6, 1.0)
                                                       : rng.uniform(0.0, 1.0);
    return img;
}

} // namespace

TEST_CASE("constant model keeps class_match at 1 with AUC 1") {
    ConstantModel model({1, 4, 4}, {0.2, 0.9, 0.1});
    Rng rng(3);
    Tensor image({1, 4, 4});
    for (auto& v : image.storage()) v = rng.uniform(0.0, 1.0);
    auto map = normalized_map({4, 4}, std::vector<double>(16, 0.5));
    auto curve = perturbation_curve(model, image, map, PixelOrder::ascending,
                                    CurveTrack::class_match);
    for (double v : curve.values) CHECK(v == 1.0);
    CHECK(curve.auc == 1.0);
}

TEST_CASE("rectangle-rule AUC is the mean of the tracked values") {
    // the estimator is a plain mean over the grid
    std::vector<double> listed{1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    const double mean = std::accumulate(listed.begin(), listed.end(), 0.0) / listed.size();
    CHECK(mean == doctest::Approx(0.55).epsilon(1e-12));

    PlantedQuadrantModel model(8, 8);
    Rng rng(5);
    Tensor image = planted_image(8, 8, rng);
    auto curve = perturbation_curve(model, image, model.oracle_map(), PixelOrder::descending,
                                    CurveTrack::top_probability);
    const double recomputed =
        std::accumulate(curve.values.begin(), curve.values.end(), 0.0) / curve.values.size();
    CHECK(curve.auc == doctest::Approx(recomputed).epsilon(1e-15));
    CHECK(curve.auc >= 0.0);
    CHECK(curve.auc <= 1.0);
}

TEST_CASE("constant map makes ascending and descending curves identical") {
    PlantedQuadrantModel model(8, 8);
    Rng rng(7);
    Tensor image = planted_image(8, 8, rng);
    auto map = normalized_map({8, 8}, std::vector<double>(64, 0.25));
    auto up = perturbation_curve(model, image, map, PixelOrder::ascending,
                                 CurveTrack::class_match);
    auto down = perturbation_curve(model, image, map, PixelOrder::descending,
                                   CurveTrack::class_match);
    CHECK(up.values == down.values);
    CHECK(up.auc == down.auc);
}

TEST_CASE("order reversal removes complementary pixel sets") {
    Rng rng(11);
    Tensor grid({8, 8});
    std::vector<double> values(64);
    std::iota(values.begin(), values.end(), 0.0);
    for (std::size_t i = values.size(); i > 1; --i)
        std::swap(values[i - 1], values[rng.next_below(i)]);
    for (std::size_t i = 0; i < 64; ++i) grid[i] = values[i] / 63.0; // strict total order

    const auto asc = ordered_pixel_indices(grid, PixelOrder::ascending);
    const auto desc = ordered_pixel_indices(grid, PixelOrder::descending);
    for (std::size_t k : {std::size_t{6}, std::size_t{19}, std::size_t{32}, std::size_t{57}}) {
        std::set<std::size_t> removed_asc(asc.begin(), asc.begin() + static_cast<long>(k));
        std::set<std::size_t> removed_desc(desc.begin(),
                                           desc.begin() + static_cast<long>(64 - k));
        std::set<std::size_t> all;
        for (std::size_t i = 0; i < 64; ++i) all.insert(i);
        std::set<std::size_t> join = removed_asc;
        join.insert(removed_desc.begin(), removed_desc.end());
        CHECK(join == all);
        CHECK(removed_asc.size() + removed_desc.size() == 64);
    }
}

TEST_CASE("oracle map dominates the inverted map on the planted model") {
    PlantedQuadrantModel model(8, 8);
    const auto oracle = model.oracle_map();
    const auto inverted = model.inverted_map();
    int wins = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(static_cast<std::uint64_t>(100 + s));
        Tensor image = planted_image(8, 8, rng);
        REQUIRE(model.forward(image).argmax() == 0);
        const double neg_o = perturbation_curve(model, image, oracle, PixelOrder::ascending,
                                                CurveTrack::class_match)
                                 .auc;
        const double neg_i = perturbation_curve(model, image, inverted, PixelOrder::ascending,
                                                CurveTrack::class_match)
                                 .auc;
        const double pos_o = perturbation_curve(model, image, oracle, PixelOrder::descending,
                                                CurveTrack::class_match)
                                 .auc;
        const double pos_i = perturbation_curve(model, image, inverted, PixelOrder::descending,
                                                CurveTrack::class_match)
                                 .auc;
        const double ins_o = perturbation_curve(model, image, oracle, PixelOrder::ascending,
                                                CurveTrack::top_probability)
                                 .auc;
        const double ins_i = perturbation_curve(model, image, inverted, PixelOrder::ascending,
                                                CurveTrack::top_probability)
                                 .auc;
        const double del_o = perturbation_curve(model, image, oracle, PixelOrder::descending,
                                                CurveTrack::top_probability)
                                 .auc;
        const double del_i = perturbation_curve(model, image, inverted, PixelOrder::descending,
                                                CurveTrack::top_probability)
                                 .auc;
        if (neg_o >= neg_i && ins_o >= ins_i && pos_o <= pos_i && del_o <= del_i) ++wins;
    }
    CHECK(wins == seeds);
}

TEST_CASE("adp and pic contracts") {
    Rng rng(13);
    Tensor image({1, 4, 4});
    for (auto& v : image.storage()) v = rng.uniform(0.2, 1.0);

    SUBCASE("all-ones mask leaves the image untouched: ADP 0, PIC 0") {
        ConstantModel model({1, 4, 4}, {0.5, 0.1});
        auto ones = normalized_map({4, 4}, std::vector<double>(16, 1.0));
        CHECK(adp(model, {image}, {ones}).value == 0.0);
        CHECK(pic(model, {image}, {ones}).value == 0.0);
    }
    SUBCASE("pinned probability drop of 0.8 -> 0.4 scores 50") {
        TwoProbModel model(image, 0.8, 0.4);
        auto half = normalized_map({4, 4}, std::vector<double>(16, 0.5));
        auto report = adp(model, {image}, {half});
        CHECK(report.value == doctest::Approx(50.0).epsilon(1e-9));
        CHECK(pic(model, {image}, {half}).value == 0.0);
    }
    SUBCASE("confidence increase counts strictly") {
        TwoProbModel model(image, 0.55, 0.9); // masking raises the predicted-class confidence
        auto half = normalized_map({4, 4}, std::vector<double>(16, 0.5));
        CHECK(pic(model, {image}, {half}).value == 100.0);
        CHECK(adp(model, {image}, {half}).value == 0.0); // clamped at zero drop
    }
    SUBCASE("two of four images increased counts 50") {
        // logits (s, -s) with s = 2*mean - 1: masking dims the image, which
        // raises the predicted-class confidence exactly when class 1 leads
        class BrightnessModel final : public ForwardOnlyModel {
        public:
            BrightnessModel() : ForwardOnlyModel({1, 2, 2}, 2) {}
            PredictionVector forward_from(const LayerId&, const Tensor& r,
                                          const Tensor*) const override {
                const double s = 2.0 * r.sum() / static_cast<double>(r.size()) - 1.0;
                return PredictionVector{{s, -s}, std::nullopt};
            }
            std::shared_ptr<Model> clone() const override {
                return std::make_shared<BrightnessModel>(*this);
            }
            std::string model_id() const override { return "brightness"; }
        };
        BrightnessModel model;
        std::vector<Tensor> images{Tensor::full({1, 2, 2}, 0.9), Tensor::full({1, 2, 2}, 0.8),
                                   Tensor::full({1, 2, 2}, 0.2), Tensor::full({1, 2, 2}, 0.1)};
        std::vector<ExplanationMap> maps(4, normalized_map({2, 2}, std::vector<double>(4, 0.5)));
        CHECK(pic(model, images, maps).value == doctest::Approx(50.0).epsilon(1e-12));
    }
    SUBCASE("empty set is a configuration error") {
        ConstantModel model({1, 4, 4}, {0.5, 0.1});
        CHECK_THROWS_AS(pic(model, {}, {}), configuration_error);
        CHECK_THROWS_AS(adp(model, {}, {}), configuration_error);
    }
}

TEST_CASE("information level basics") {
    auto images = make_synthetic_rgb_images(7, 1, 32, 32);
    const Tensor& img = images[0];
    CHECK(information_level(img, img) == 1.0);
    CHECK(information_level(gaussian_blur(img, kBlurSigma), img) < 1.0);
    CHECK_THROWS_AS(information_level(img, Tensor({3, 8, 8})), addressing_error);
}

TEST_CASE("blur series: endpoints and monotone information") {
    auto images = make_synthetic_rgb_images(7, 1, 32, 32);
    const Tensor& img = images[0];
    Rng rng(3);
    Tensor mv({32, 32});
    for (auto& v : mv.storage()) v = rng.uniform(0.0, 1.0);
    ExplanationMap map;
    map.values = mv;
    map.provenance.normalized = true;

    auto series = make_blur_series(img, map, default_reveal_grid());
    REQUIRE(series.images.size() == 11);
    CHECK(bitwise_equal(series.images.back(), img)); // reveal 1.0 reproduces the original
    CHECK(series.information_levels.back() == 1.0);
    for (std::size_t i = 1; i < series.information_levels.size(); ++i)
        CHECK(series.information_levels[i] >= series.information_levels[i - 1]);
}

TEST_CASE("aic/sic: self-comparison at full reveal and the uniform-head chance level") {
    SUBCASE("reveal grid must contain 0 and 1") {
        ConstantModel model({1, 8, 8}, {0.5, 0.1});
        Tensor image({1, 8, 8});
        auto map = normalized_map({8, 8}, std::vector<double>(64, 0.5));
        CHECK_THROWS_AS(aic_sic(model, {image}, {map}, {0.0, 0.5}, 10), configuration_error);
        CHECK_THROWS_AS(aic_sic(model, {image}, {map}, {0.5, 1.0}, 10), configuration_error);
    }
    SUBCASE("uniform random head lands near chance") {
        const int k = 10;
        UniformRandomHead model({1, 16, 16}, k);
        Rng rng(29);
        std::vector<Tensor> images;
        std::vector<ExplanationMap> maps;
        for (int i = 0; i < 60; ++i) {
            Tensor img({1, 16, 16});
            for (auto& v : img.storage()) v = rng.uniform(0.0, 1.0);
            images.push_back(std::move(img));
            Tensor mv({16, 16});
            for (auto& v : mv.storage()) v = rng.uniform(0.0, 1.0);
            ExplanationMap m;
            m.values = mv;
            m.provenance.normalized = true;
            maps.push_back(std::move(m));
        }
        auto [aic_report, sic_report] = aic_sic(model, images, maps);
        CHECK(aic_report.value >= 0.05);
        CHECK(aic_report.value <= 0.20);
        CHECK(sic_report.value >= 0.0);
        CHECK(sic_report.value <= 1.0);
    }
}

TEST_CASE("segmentation scores: exact cases") {
    SUBCASE("perfect map") {
        Tensor gt({2, 2}, {1.0, 0.0, 1.0, 0.0});
        auto map = normalized_map({2, 2}, {1.0, 0.0, 1.0, 0.0});
        auto s = segmentation_scores(map, gt);
        CHECK(s.pixel_accuracy == 1.0);
        CHECK(s.mean_iou == 1.0);
        CHECK(s.mean_f1 == 1.0);
        CHECK(s.mean_average_precision == 1.0);
    }
    SUBCASE("complement prediction") {
        Tensor gt({2, 2}, {1.0, 0.0, 1.0, 0.0});
        auto map = normalized_map({2, 2}, {0.0, 1.0, 0.0, 1.0});
        auto s = segmentation_scores(map, gt);
        CHECK(s.pixel_accuracy == 0.0);
        CHECK(s.mean_iou == 0.0);
        CHECK(s.mean_f1 == 0.0);
    }
    SUBCASE("2x2 enumerated case: GT left column, predicted top row") {
        Tensor gt({2, 2}, {1.0, 0.0, 1.0, 0.0});
        auto map = normalized_map({2, 2}, {0.8, 0.8, 0.1, 0.1});
        auto s = segmentation_scores(map, gt);
        CHECK(s.pixel_accuracy == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(s.mean_iou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(s.mean_f1 == doctest::Approx(0.5).epsilon(1e-12));
        // ranked: (0,0)+, (0,1)-, (1,0)+, (1,1)- -> AP = (1 + 2/3)/2
        CHECK(s.mean_average_precision == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    }
    SUBCASE("IoU symmetric under prediction/ground-truth swap") {
        Tensor a({2, 2}, {1.0, 1.0, 0.0, 0.0});
        Tensor b({2, 2}, {1.0, 0.0, 1.0, 0.0});
        auto map_a = normalized_map({2, 2}, a.storage());
        auto map_b = normalized_map({2, 2}, b.storage());
        CHECK(segmentation_scores(map_a, b).mean_iou ==
              doctest::Approx(segmentation_scores(map_b, a).mean_iou).epsilon(1e-12));
    }
    SUBCASE("single-class ground truth flags the absent class") {
        Tensor gt = Tensor::full({2, 2}, 1.0);
        auto map = normalized_map({2, 2}, {0.9, 0.9, 0.1, 0.1});
        auto s = segmentation_scores(map, gt);
        CHECK(s.background_absent);
        CHECK(!s.foreground_absent);
        CHECK(s.mean_iou == doctest::Approx(0.5).epsilon(1e-12)); // only the fg class counted
    }
    SUBCASE("bounds on random fixtures") {
        Rng rng(31);
        for (int t = 0; t < 20; ++t) {
            Tensor gt({4, 4});
            for (auto& v : gt.storage()) v = rng.uniform(0.0, 1.0) < 0.5 ? 0.0 : 1.0;
            Tensor mv({4, 4});
            for (auto& v : mv.storage()) v = rng.uniform(0.0, 1.0);
            auto s = segmentation_scores(normalized_map({4, 4}, mv.storage()), gt);
            for (double v : {s.pixel_accuracy, s.mean_average_precision, s.mean_iou, s.mean_f1}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
    SUBCASE("dimension mismatch") {
        Tensor gt({2, 2});
        auto map = normalized_map({2, 3}, std::vector<double>(6, 0.0));
        CHECK_THROWS_AS(segmentation_scores(map, gt), addressing_error);
    }
}

TEST_CASE("metrics demand normalized maps") {
    ConstantModel model({1, 2, 2}, {0.5, 0.1});
    Tensor image({1, 2, 2});
    ExplanationMap raw;
    raw.values = Tensor({2, 2}, {-1.0, 0.5, 0.2, 2.0});
    CHECK_THROWS_AS(perturbation_curve(model, image, raw, PixelOrder::ascending,
                                       CurveTrack::class_match),
                    configuration_error);
}
