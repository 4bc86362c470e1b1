#pragma once

#include "dix/attribution.hpp"
#include "dix/models.hpp"
#include "dix/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace dix {

enum class PixelOrder { ascending, descending };
enum class CurveTrack { class_match, top_probability };

struct PerturbationCurve {
    std::vector<double> fractions;
    std::vector<double> values;
    double auc = 0.0;
};

struct MetricReport {
    std::string metric;
    double value = 0.0;
    std::vector<double> per_item;
    std::vector<std::string> notes; // skipped items, dropped bins, degeneracy flags
    std::string config_digest;
};

std::vector<double> softmax(const std::vector<double>& scores);

// The ten-step removal grid 0, 0.1, ..., 0.9.
std::vector<double> default_removal_fractions();

// Pixel indices sorted by map value (ascending or descending); ties always
// break toward the lower row-major index.
std::vector<std::size_t> ordered_pixel_indices(const Tensor& grid, PixelOrder order);

// One blackout schedule: at each fraction the leading pixels of the order are
// zeroed across channels and the model re-evaluated.
//   NEG = (ascending, class_match)     POS = (descending, class_match)
//   INS = (ascending, top_probability) DEL = (descending, top_probability)
PerturbationCurve perturbation_curve(const Model& model, const Tensor& image,
                                     const ExplanationMap& map, PixelOrder order,
                                     CurveTrack track,
                                     const std::vector<double>& fractions =
                                         default_removal_fractions());

// name in {NEG, POS, INS, DEL}
std::pair<PixelOrder, CurveTrack> perturbation_protocol(const std::string& name);
MetricReport perturbation_metric(const Model& model, const std::string& name,
                                 const std::vector<Tensor>& images,
                                 const std::vector<ExplanationMap>& maps);

// Mean percentage drop of the predicted-class probability after masking the
// image with its normalized map.
MetricReport adp(const Model& model, const std::vector<Tensor>& images,
                 const std::vector<ExplanationMap>& maps);
// Percentage of images whose confidence strictly increased after masking.
MetricReport pic(const Model& model, const std::vector<Tensor>& images,
                 const std::vector<ExplanationMap>& maps);

// Compressed-size ratio of current vs original, clipped to [0,1].
double information_level(const Tensor& current, const Tensor& original);

struct BlurSeries {
    std::vector<double> reveal_fractions;
    std::vector<Tensor> images;
    std::vector<double> information_levels;
};

inline constexpr double kBlurSigma = 3.0;

// Blur-and-reveal sequence: top-f pixels by map value restored onto the
// blurred base; f = 1 reproduces the original image bitwise.
BlurSeries make_blur_series(const Tensor& image, const ExplanationMap& map,
                            const std::vector<double>& reveal_grid, double sigma = kBlurSigma);

std::vector<double> default_reveal_grid(); // 0, 0.1, ..., 1.0

// Accuracy / softmax information curves vs information level, binned and
// integrated by trapezoid over bin centers.
std::pair<MetricReport, MetricReport> aic_sic(const Model& model,
                                              const std::vector<Tensor>& images,
                                              const std::vector<ExplanationMap>& maps,
                                              const std::vector<double>& reveal_grid =
                                                  default_reveal_grid(),
                                              int info_bins = 10);

struct SegmentationScores {
    double pixel_accuracy = 0.0;
    double mean_average_precision = 0.0;
    double mean_iou = 0.0;
    double mean_f1 = 0.0;
    bool foreground_absent = false;
    bool background_absent = false;
};

// Foreground = map value strictly above the per-image mean; ground truth is a
// binary (H,W) mask.
SegmentationScores segmentation_scores(const ExplanationMap& map, const Tensor& ground_truth);

// Dataset-level aggregation into PA / mAP / mIoU / mF1 reports.
std::array<MetricReport, 4> segmentation_reports(const std::vector<ExplanationMap>& maps,
                                                 const std::vector<Tensor>& masks);

} // namespace dix
