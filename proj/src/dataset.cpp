#include "dix/dataset.hpp"

#include "dix/errors.hpp"
#include "dix/image.hpp"
#include "dix/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace dix {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kBlobClasses = 10;
// one blob center per class on the 8x8 grid
constexpr int kBlobCenters[kBlobClasses][2] = {{1, 1}, {1, 4}, {1, 6}, {4, 1}, {4, 4},
                                               {4, 6}, {6, 1}, {6, 4}, {6, 6}, {3, 3}};

LabeledImage make_blob_image(int label, Rng& rng) {
    Tensor img({1, 8, 8});
    const double background = rng.uniform(0.0, 0.15);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = std::clamp(background + rng.normal(0.0, 0.05), 0.0, 1.0);
    const double cy = kBlobCenters[label][0];
    const double cx = kBlobCenters[label][1];
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            img.at(0, y, x) = std::clamp(img.at(0, y, x) + 0.8 * std::exp(-0.5 * d2), 0.0, 1.0);
        }
    return {std::move(img), label};
}

} // namespace

SyntheticDataset make_synthetic_10class(std::uint64_t seed, int train_per_class,
                                        int test_per_class) {
    if (train_per_class < 1 || test_per_class < 1)
        throw configuration_error("synthetic dataset needs at least one sample per class");
    SyntheticDataset ds;
    ds.class_count = kBlobClasses;
    Rng rng = Rng::from(0x55, seed);
    for (int n = 0; n < train_per_class; ++n)
        for (int c = 0; c < kBlobClasses; ++c) ds.train.push_back(make_blob_image(c, rng));
    for (int n = 0; n < test_per_class; ++n)
        for (int c = 0; c < kBlobClasses; ++c) ds.test.push_back(make_blob_image(c, rng));
    return ds;
}

std::vector<Tensor> make_synthetic_rgb_images(std::uint64_t seed, int count, std::size_t height,
                                              std::size_t width) {
    Rng rng = Rng::from(0x66, seed);
    std::vector<Tensor> images;
    images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Tensor img({3, height, width});
        // a few smooth bumps per channel plus pixel noise
        for (std::size_t c = 0; c < 3; ++c) {
            const double base = rng.uniform(0.1, 0.4);
            const int bumps = 2 + static_cast<int>(rng.next_below(3));
            std::vector<std::array<double, 3>> params;
            for (int b = 0; b < bumps; ++b)
                params.push_back({rng.uniform(0.0, static_cast<double>(height - 1)),
                                  rng.uniform(0.0, static_cast<double>(width - 1)),
                                  rng.uniform(0.3, 0.6)});
            for (std::size_t y = 0; y < height; ++y)
                for (std::size_t x = 0; x < width; ++x) {
                    double v = base + rng.normal(0.0, 0.03);
                    for (const auto& p : params) {
                        const double d2 = (y - p[0]) * (y - p[0]) + (x - p[1]) * (x - p[1]);
                        v += p[2] * std::exp(-d2 / (0.1 * height * width / 8.0 + 2.0));
                    }
                    img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
                }
        }
        images.push_back(std::move(img));
    }
    return images;
}

std::vector<SegmentationSample> make_synthetic_segmentation(std::uint64_t seed, int count,
                                                            std::size_t height,
                                                            std::size_t width,
                                                            std::size_t channels) {
    Rng rng = Rng::from(0x77, seed);
    std::vector<SegmentationSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        SegmentationSample sample;
        sample.image = Tensor({channels, height, width});
        sample.mask = Tensor({height, width});
        for (std::size_t j = 0; j < sample.image.size(); ++j)
            sample.image[j] = std::clamp(rng.uniform(0.05, 0.3) + rng.normal(0.0, 0.03), 0.0, 1.0);
        const std::size_t oh = 2 + rng.next_below(height / 2);
        const std::size_t ow = 2 + rng.next_below(width / 2);
        const std::size_t oy = rng.next_below(height - oh);
        const std::size_t ox = rng.next_below(width - ow);
        const double brightness = rng.uniform(0.7, 1.0);
        for (std::size_t y = oy; y < oy + oh; ++y)
            for (std::size_t x = ox; x < ox + ow; ++x) {
                sample.mask.at(y, x) = 1.0;
                for (std::size_t c = 0; c < channels; ++c)
                    sample.image.at(c, y, x) =
                        std::clamp(brightness + rng.normal(0.0, 0.05), 0.0, 1.0);
            }
        out.push_back(std::move(sample));
    }
    return out;
}

DatasetManifest load_manifest(const std::string& dataset_dir) {
    const fs::path root(dataset_dir);
    const fs::path manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw load_error("cannot open manifest '" + manifest_path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw load_error("manifest is not valid JSON: " + std::string(e.what()));
    }
    DatasetManifest manifest;
    manifest.class_count = doc.value("class_count", 0);
    for (const auto& entry : doc.at("entries")) {
        ManifestEntry e;
        e.image = entry.at("image").get<std::string>();
        e.label = entry.value("label", 0);
        e.split = entry.value("split", "test");
        if (entry.contains("mask")) e.mask = entry["mask"].get<std::string>();
        if (!fs::exists(root / e.image))
            throw load_error("manifest names missing image '" + e.image + "'");
        if (e.mask && !fs::exists(root / *e.mask))
            throw load_error("mask '" + *e.mask + "' for image '" + e.image + "' is missing");
        if (manifest.class_count > 0 && (e.label < 0 || e.label >= manifest.class_count))
            throw load_error("label " + std::to_string(e.label) + " outside [0," +
                             std::to_string(manifest.class_count) + ") for '" + e.image + "'");
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

void save_manifest(const std::string& dataset_dir, const DatasetManifest& manifest) {
    json doc;
    doc["class_count"] = manifest.class_count;
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        json j;
        j["image"] = e.image;
        j["label"] = e.label;
        j["split"] = e.split;
        if (e.mask) j["mask"] = *e.mask;
        entries.push_back(std::move(j));
    }
    doc["entries"] = std::move(entries);
    std::ofstream out(fs::path(dataset_dir) / "manifest.json");
    if (!out) throw load_error("cannot write manifest under '" + dataset_dir + "'");
    out << doc.dump(1) << "\n";
}

void write_segmentation_dataset(const std::string& dataset_dir,
                                const std::vector<SegmentationSample>& samples) {
    const fs::path root(dataset_dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    DatasetManifest manifest;
    manifest.class_count = 0;
    char name[32];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "img%03zu", i);
        const std::string image_rel = std::string("images/") + name + ".png";
        const std::string mask_rel = std::string("masks/") + name + ".png";
        write_png((root / image_rel).string(), samples[i].image);
        write_png((root / mask_rel).string(),
                  samples[i].mask.reshaped({1, samples[i].mask.dim(0), samples[i].mask.dim(1)}));
        ManifestEntry e;
        e.image = image_rel;
        e.mask = mask_rel;
        manifest.entries.push_back(std::move(e));
    }
    save_manifest(dataset_dir, manifest);
}

} // namespace dix
