#include "dix/metrics.hpp"

#include "dix/digest.hpp"
#include "dix/errors.hpp"
#include "dix/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dix {

namespace {

void check_normalized_map(const ExplanationMap& map) {
    for (std::size_t i = 0; i < map.values.size(); ++i)
        if (map.values[i] < 0.0 || map.values[i] > 1.0)
            throw configuration_error("metric input map must be normalized to [0,1]; call "
                                      "normalize_map first");
}

void check_map_matches_image(const ExplanationMap& map, const Tensor& image) {
    if (image.rank() != 3 || map.values.rank() != 2 || map.values.dim(0) != image.dim(1) ||
        map.values.dim(1) != image.dim(2))
        throw addressing_error("map " + map.values.shape_string() + " does not cover image " +
                               image.shape_string());
}

std::size_t removal_count(double fraction, std::size_t pixels) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pixels)));
}

Tensor blackout_prefix(const Tensor& image, const std::vector<std::size_t>& order,
                       std::size_t count) {
    Tensor out = image;
    const std::size_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) out[ch * hw + order[i]] = 0.0;
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// protocol fragment -> digest pinning this metric's parameters
std::string protocol_digest(const std::string& fragment) { return fnv1a64_hex(fragment); }

} // namespace

std::vector<double> softmax(const std::vector<double>& scores) {
    double mx = scores.front();
    for (double s : scores) mx = std::max(mx, s);
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> default_removal_fractions() {
    std::vector<double> f(10);
    for (int i = 0; i < 10; ++i) f[static_cast<std::size_t>(i)] = i / 10.0;
    return f;
}

std::vector<std::size_t> ordered_pixel_indices(const Tensor& grid, PixelOrder order) {
    std::vector<std::size_t> idx(grid.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return order == PixelOrder::ascending ? grid[a] < grid[b] : grid[a] > grid[b];
    });
    return idx;
}

PerturbationCurve perturbation_curve(const Model& model, const Tensor& image,
                                     const ExplanationMap& map, PixelOrder order,
                                     CurveTrack track, const std::vector<double>& fractions) {
    check_map_matches_image(map, image);
    check_normalized_map(map);
    if (fractions.empty() || fractions.front() != 0.0)
        throw configuration_error("fraction grid must start at 0");
    for (std::size_t i = 1; i < fractions.size(); ++i)
        if (fractions[i] <= fractions[i - 1])
            throw configuration_error("fraction grid must be strictly increasing");

    if (fractions.back() > 1.0)
        throw configuration_error("removal fractions cannot exceed 1");
    const auto order_idx = ordered_pixel_indices(map.values, order);
    const auto base = model.forward(image);
    const int base_top = base.argmax();

    PerturbationCurve curve;
    curve.fractions = fractions;
    curve.values.reserve(fractions.size());
    for (double f : fractions) {
        const Tensor perturbed = blackout_prefix(image, order_idx,
                                                 removal_count(f, map.values.size()));
        const auto pred = model.forward(perturbed);
        if (track == CurveTrack::class_match) {
            curve.values.push_back(pred.argmax() == base_top ? 1.0 : 0.0);
        } else {
            curve.values.push_back(softmax(pred.scores)[static_cast<std::size_t>(base_top)]);
        }
    }
    curve.auc = mean_of(curve.values);
    return curve;
}

std::pair<PixelOrder, CurveTrack> perturbation_protocol(const std::string& name) {
    if (name == "NEG") return {PixelOrder::ascending, CurveTrack::class_match};
    if (name == "POS") return {PixelOrder::descending, CurveTrack::class_match};
    if (name == "INS") return {PixelOrder::ascending, CurveTrack::top_probability};
    if (name == "DEL") return {PixelOrder::descending, CurveTrack::top_probability};
    throw configuration_error("unknown perturbation metric '" + name +
                              "'; expected NEG, POS, INS or DEL");
}

MetricReport perturbation_metric(const Model& model, const std::string& name,
                                 const std::vector<Tensor>& images,
                                 const std::vector<ExplanationMap>& maps) {
    if (images.size() != maps.size())
        throw addressing_error("image/map count mismatch in " + name);
    if (images.empty()) throw configuration_error(name + " over an empty image set");
    const auto [order, track] = perturbation_protocol(name);
    MetricReport report;
    report.metric = name;
    report.config_digest =
        protocol_digest(name + ";grid=0:0.1:0.9;blackout=zero;tie=row-major;auc=rect");
    for (std::size_t i = 0; i < images.size(); ++i)
        report.per_item.push_back(
            perturbation_curve(model, images[i], maps[i], order, track).auc);
    report.value = mean_of(report.per_item);
    return report;
}

namespace {

Tensor mask_image(const Tensor& image, const ExplanationMap& map) {
    Tensor out = image;
    const std::size_t c = image.dim(0), hw = image.dim(1) * image.dim(2);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] *= map.values[i];
    return out;
}

} // namespace

MetricReport adp(const Model& model, const std::vector<Tensor>& images,
                 const std::vector<ExplanationMap>& maps) {
    if (images.size() != maps.size()) throw addressing_error("image/map count mismatch in ADP");
    if (images.empty()) throw configuration_error("ADP over an empty image set");
    MetricReport report;
    report.metric = "ADP";
    report.config_digest = protocol_digest("ADP;mask=map-product;drop=clamped-percent");
    for (std::size_t i = 0; i < images.size(); ++i) {
        check_map_matches_image(maps[i], images[i]);
        check_normalized_map(maps[i]);
        const auto base = model.forward(images[i]);
        const auto top = static_cast<std::size_t>(base.argmax());
        const double p_orig = softmax(base.scores)[top];
        if (p_orig == 0.0) {
            report.notes.push_back("item " + std::to_string(i) + " skipped: p_orig = 0");
            continue;
        }
        const double p_masked =
            softmax(model.forward(mask_image(images[i], maps[i])).scores)[top];
        report.per_item.push_back(100.0 * std::max(0.0, (p_orig - p_masked) / p_orig));
    }
    report.value = mean_of(report.per_item);
    return report;
}

MetricReport pic(const Model& model, const std::vector<Tensor>& images,
                 const std::vector<ExplanationMap>& maps) {
    if (images.size() != maps.size()) throw addressing_error("image/map count mismatch in PIC");
    if (images.empty()) throw configuration_error("PIC over an empty image set");
    MetricReport report;
    report.metric = "PIC";
    report.config_digest = protocol_digest("PIC;mask=map-product;increase=strict");
    for (std::size_t i = 0; i < images.size(); ++i) {
        check_map_matches_image(maps[i], images[i]);
        check_normalized_map(maps[i]);
        const auto base = model.forward(images[i]);
        const auto top = static_cast<std::size_t>(base.argmax());
        const double p_orig = softmax(base.scores)[top];
        const double p_masked =
            softmax(model.forward(mask_image(images[i], maps[i])).scores)[top];
        report.per_item.push_back(p_masked > p_orig ? 1.0 : 0.0);
    }
    report.value = 100.0 * mean_of(report.per_item);
    return report;
}

double information_level(const Tensor& current, const Tensor& original) {
    if (!current.same_shape(original))
        throw addressing_error("information_level: dimension mismatch " +
                               current.shape_string() + " vs " + original.shape_string());
    const double cur = static_cast<double>(compressed_byte_size(quantize_bytes(current)));
    const double orig = static_cast<double>(compressed_byte_size(quantize_bytes(original)));
    return std::min(1.0, std::max(0.0, cur / orig));
}

BlurSeries make_blur_series(const Tensor& image, const ExplanationMap& map,
                            const std::vector<double>& reveal_grid, double sigma) {
    check_map_matches_image(map, image);
    const Tensor blurred = gaussian_blur(image, sigma);
    const auto order = ordered_pixel_indices(map.values, PixelOrder::descending);
    const std::size_t c = image.dim(0), hw = image.dim(1) * image.dim(2);

    BlurSeries series;
    series.reveal_fractions = reveal_grid;
    for (double f : reveal_grid) {
        if (f >= 1.0) {
            series.images.push_back(image); // exact, not reassembled
        } else {
            Tensor revealed = blurred;
            const std::size_t count = removal_count(f, hw);
            for (std::size_t i = 0; i < count; ++i)
                for (std::size_t ch = 0; ch < c; ++ch)
                    revealed[ch * hw + order[i]] = image[ch * hw + order[i]];
            series.images.push_back(std::move(revealed));
        }
        series.information_levels.push_back(information_level(series.images.back(), image));
    }
    return series;
}

std::vector<double> default_reveal_grid() {
    std::vector<double> f(11);
    for (int i = 0; i <= 10; ++i) f[static_cast<std::size_t>(i)] = i / 10.0;
    return f;
}

std::pair<MetricReport, MetricReport> aic_sic(const Model& model,
                                              const std::vector<Tensor>& images,
                                              const std::vector<ExplanationMap>& maps,
                                              const std::vector<double>& reveal_grid,
                                              int info_bins) {
    if (images.size() != maps.size()) throw addressing_error("image/map count mismatch in AIC");
    if (images.empty()) throw configuration_error("AIC/SIC over an empty image set");
    const bool has0 = std::find(reveal_grid.begin(), reveal_grid.end(), 0.0) != reveal_grid.end();
    const bool has1 = std::find(reveal_grid.begin(), reveal_grid.end(), 1.0) != reveal_grid.end();
    if (!has0 || !has1)
        throw configuration_error("reveal grid must include 0 and 1");
    for (double f : reveal_grid)
        if (f < 0.0 || f > 1.0)
            throw configuration_error("reveal grid entries must lie in [0,1]");
    if (info_bins < 1) throw configuration_error("info_bins must be positive");
    if (model.class_count() < 2)
        throw configuration_error("softmax information needs at least two classes");

    const double log_k = std::log(static_cast<double>(model.class_count()));
    struct Observation {
        double info, correct, sic;
    };
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < images.size(); ++i) {
        check_normalized_map(maps[i]);
        const int base_top = model.forward(images[i]).argmax();
        const BlurSeries series = make_blur_series(images[i], maps[i], reveal_grid);
        for (std::size_t s = 0; s < series.images.size(); ++s) {
            const auto pred = model.forward(series.images[s]);
            const double p = softmax(pred.scores)[static_cast<std::size_t>(base_top)];
            // normalized softmax information: 0 at chance, 1 at certainty
            const double sic_value =
                std::min(1.0, std::max(0.0, std::log(std::max(p, 1e-300) *
                                                     model.class_count()) /
                                                log_k));
            obs.push_back({series.information_levels[s],
                           pred.argmax() == base_top ? 1.0 : 0.0, sic_value});
        }
    }

    const auto bins = static_cast<std::size_t>(info_bins);
    std::vector<std::vector<double>> correct_bins(bins), sic_bins(bins);
    for (const auto& o : obs) {
        auto b = static_cast<std::size_t>(o.info * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        correct_bins[b].push_back(o.correct);
        sic_bins[b].push_back(o.sic);
    }

    std::vector<double> centers, acc_means, sic_means;
    std::vector<std::string> dropped;
    for (std::size_t b = 0; b < bins; ++b) {
        if (correct_bins[b].empty()) {
            dropped.push_back("bin " + std::to_string(b) + " empty, dropped");
            continue;
        }
        centers.push_back((static_cast<double>(b) + 0.5) / static_cast<double>(bins));
        acc_means.push_back(mean_of(correct_bins[b]));
        sic_means.push_back(mean_of(sic_bins[b]));
    }

    auto trapezoid_auc = [&](const std::vector<double>& values) {
        if (values.size() == 1) return values.front();
        double area = 0.0;
        for (std::size_t i = 1; i < values.size(); ++i)
            area += (centers[i] - centers[i - 1]) * 0.5 * (values[i] + values[i - 1]);
        return area / (centers.back() - centers.front());
    };

    const std::string blur_fragment =
        ";reveal=0..1;bins=" + std::to_string(info_bins) + ";blur=gauss(sigma=" +
        std::to_string(kBlurSigma) + ",edge=clamp);compressor=" + compressor_id() +
        ";auc=trapezoid-bin-centers";
    MetricReport aic_report;
    aic_report.metric = "AIC";
    aic_report.config_digest = protocol_digest("AIC" + blur_fragment);
    aic_report.per_item = acc_means;
    aic_report.notes = dropped;
    aic_report.value = trapezoid_auc(acc_means);

    MetricReport sic_report;
    sic_report.metric = "SIC";
    sic_report.config_digest = protocol_digest("SIC;norm=logK" + blur_fragment);
    sic_report.per_item = sic_means;
    sic_report.notes = dropped;
    sic_report.value = trapezoid_auc(sic_means);
    return {aic_report, sic_report};
}

SegmentationScores segmentation_scores(const ExplanationMap& map, const Tensor& ground_truth) {
    if (!map.values.same_shape(ground_truth))
        throw addressing_error("segmentation: map " + map.values.shape_string() +
                               " vs mask " + ground_truth.shape_string());
    check_normalized_map(map);
    const std::size_t n = ground_truth.size();
    for (std::size_t i = 0; i < n; ++i)
        if (ground_truth[i] != 0.0 && ground_truth[i] != 1.0)
            throw configuration_error("ground-truth mask must be binary");

    const double threshold = map.values.sum() / static_cast<double>(n);
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pred_fg = map.values[i] > threshold;
        const bool gt_fg = ground_truth[i] == 1.0;
        if (pred_fg && gt_fg) ++tp;
        else if (pred_fg) ++fp;
        else if (gt_fg) ++fn;
        else ++tn;
    }

    SegmentationScores out;
    out.pixel_accuracy = static_cast<double>(tp + tn) / static_cast<double>(n);
    out.foreground_absent = (tp + fn) == 0;
    out.background_absent = (fp + tn) == 0;

    // class means skip a class absent from the ground truth
    double iou_sum = 0.0, f1_sum = 0.0;
    int classes = 0;
    if (!out.foreground_absent) {
        iou_sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        ++classes;
    }
    if (!out.background_absent) {
        iou_sum += static_cast<double>(tn) / static_cast<double>(tn + fn + fp);
        f1_sum += 2.0 * static_cast<double>(tn) / static_cast<double>(2 * tn + fn + fp);
        ++classes;
    }
    out.mean_iou = classes ? iou_sum / classes : 0.0;
    out.mean_f1 = classes ? f1_sum / classes : 0.0;

    if (!out.foreground_absent) {
        const auto ranked = ordered_pixel_indices(map.values, PixelOrder::descending);
        std::size_t hits = 0;
        double ap = 0.0;
        for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
            if (ground_truth[ranked[rank]] == 1.0) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
            }
        }
        out.mean_average_precision = ap / static_cast<double>(tp + fn);
    }
    return out;
}

std::array<MetricReport, 4> segmentation_reports(const std::vector<ExplanationMap>& maps,
                                                 const std::vector<Tensor>& masks) {
    if (maps.size() != masks.size()) throw addressing_error("map/mask count mismatch");
    if (maps.empty()) throw configuration_error("segmentation over an empty set");
    std::array<MetricReport, 4> reports;
    reports[0].metric = "PA";
    reports[1].metric = "mAP";
    reports[2].metric = "mIoU";
    reports[3].metric = "mF1";
    for (auto& r : reports)
        r.config_digest = protocol_digest(
            r.metric + ";threshold=per-image-mean;ap=noninterpolated;tie=row-major");
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const auto s = segmentation_scores(maps[i], masks[i]);
        reports[0].per_item.push_back(s.pixel_accuracy);
        reports[2].per_item.push_back(s.mean_iou);
        reports[3].per_item.push_back(s.mean_f1);
        if (s.foreground_absent) {
            reports[1].notes.push_back("item " + std::to_string(i) +
                                       ": empty ground truth, mAP skipped");
        } else {
            reports[1].per_item.push_back(s.mean_average_precision);
        }
        if (s.foreground_absent || s.background_absent)
            reports[2].notes.push_back("item " + std::to_string(i) +
                                       ": single-class ground truth, absent class skipped");
    }
    for (auto& r : reports) r.value = mean_of(r.per_item);
    return reports;
}

} // namespace dix
