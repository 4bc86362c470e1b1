#pragma once

#include "dix/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dix {

struct LabeledImage {
    Tensor image;
    int label = 0;
};

struct SyntheticDataset {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> test;
    int class_count = 0;
};

// 10-class 8x8 grayscale set: one bright blob per class at a class-specific
// position over a noisy background. Learnable quickly with true labels, small
// enough to memorize with permuted ones.
SyntheticDataset make_synthetic_10class(std::uint64_t seed, int train_per_class,
                                        int test_per_class);

// Smooth random RGB fixtures for the CNN/ViT evaluation paths.
std::vector<Tensor> make_synthetic_rgb_images(std::uint64_t seed, int count, std::size_t height,
                                              std::size_t width);

struct SegmentationSample {
    Tensor image; // (C,H,W)
    Tensor mask;  // binary (H,W)
};

// Bright rectangular object on a textured background plus its exact mask.
std::vector<SegmentationSample> make_synthetic_segmentation(std::uint64_t seed, int count,
                                                            std::size_t height,
                                                            std::size_t width,
                                                            std::size_t channels);

// --- on-disk layout: images/ + manifest.json (+ masks/ keyed by stem) ---
struct ManifestEntry {
    std::string image; // path relative to the dataset root
    int label = 0;
    std::string split = "test";
    std::optional<std::string> mask;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int class_count = 0;
};

DatasetManifest load_manifest(const std::string& dataset_dir);
void save_manifest(const std::string& dataset_dir, const DatasetManifest& manifest);

// Materializes a synthetic segmentation set as PNGs plus manifest under dir.
void write_segmentation_dataset(const std::string& dataset_dir,
                                const std::vector<SegmentationSample>& samples);

} // namespace dix
