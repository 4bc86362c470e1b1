#include "dix/dataset.hpp"
#include "dix/errors.hpp"
#include "dix/harness.hpp"
#include "dix/image.hpp"
#include "dix/mapfile.hpp"
#include "dix/overlay.hpp"
#include "dix/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace dix;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "dix_harness_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("map file round trip is bitwise") {
    ExplanationMap map;
    map.values = Tensor({2, 3}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
    map.class_index = 2;
    map.provenance.model_id = "tiny_cnn#42";
    map.provenance.baseline = "channel_min";
    map.provenance.integrand = "activation_times_gradient";
    map.provenance.layers = "S={3};agg=mean";

    const auto dir = fresh_dir("mapfile");
    const auto path = (dir / "m.dixm").string();
    write_map(path, map);
    auto loaded = read_map(path);
    CHECK(bitwise_equal(loaded.values, map.values));
    CHECK(loaded.provenance.digest() == map.provenance.digest());

    // writing the loaded map reproduces the file byte for byte
    const auto path2 = (dir / "m2.dixm").string();
    write_map(path2, loaded);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("map file error contracts") {
    ExplanationMap map;
    map.values = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
    auto bytes = encode_map(map);

    SUBCASE("bad magic names the offset") {
        auto bad = bytes;
        bad[0] = 'X';
        try {
            decode_map(bad);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
        }
    }
    SUBCASE("version 0 is unsupported") {
        auto bad = bytes;
        bad[4] = 0;
        bad[5] = 0;
        CHECK_THROWS_AS(decode_map(bad), format_error);
    }
    SUBCASE("future version is unsupported") {
        auto bad = bytes;
        bad[4] = 9;
        CHECK_THROWS_AS(decode_map(bad), format_error);
    }
    SUBCASE("truncated payload reports expected vs actual") {
        std::vector<unsigned char> bad(bytes.begin(), bytes.begin() + 20);
        try {
            decode_map(bad);
            FAIL("expected format_error");
        } catch (const format_error& e) {
            CHECK(std::string(e.what()).find("expected 16 bytes") != std::string::npos);
        }
    }
}

TEST_CASE("map decoder rejects arbitrary byte noise cleanly") {
    Rng rng(59);
    int decoded = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<unsigned char> noise(rng.next_below(64) + 1);
        for (auto& b : noise) b = static_cast<unsigned char>(rng.next_below(256));
        if (trial % 3 == 0 && noise.size() >= 4) { // sometimes fake the magic
            noise[0] = 'D';
            noise[1] = 'I';
            noise[2] = 'X';
            noise[3] = 'M';
        }
        try {
            decode_map(noise);
            ++decoded;
        } catch (const format_error&) {
            // expected almost always
        }
    }
    CHECK(decoded == 0);
}

TEST_CASE("png reader rejects non-png payloads") {
    const auto dir = fresh_dir("png_errors");
    {
        std::ofstream out(dir / "not.png", std::ios::binary);
        out << "plain text";
    }
    CHECK_THROWS_AS(read_png((dir / "not.png").string()), format_error);
    CHECK_THROWS_AS(read_png((dir / "missing.png").string()), format_error);
}

TEST_CASE("overlay: zero map reproduces the image, determinism, no implicit resize") {
    auto images = make_synthetic_rgb_images(3, 1, 8, 8);
    const Tensor& image = images[0];

    ExplanationMap zero;
    zero.values = Tensor({8, 8});
    zero.provenance.normalized = true;
    const auto overlay_bytes = render_overlay(image, zero);
    const auto dir = fresh_dir("overlay");
    {
        std::ofstream out(dir / "zero.png", std::ios::binary);
        out.write(reinterpret_cast<const char*>(overlay_bytes.data()),
                  static_cast<std::streamsize>(overlay_bytes.size()));
    }
    Tensor decoded = read_png((dir / "zero.png").string());
    // zero alpha leaves pixels at the quantized input values
    double max_diff = 0.0;
    for (std::size_t i = 0; i < decoded.size(); ++i)
        max_diff = std::max(max_diff, std::abs(decoded[i] - image[i]));
    CHECK(max_diff <= 1.0 / 255.0 + 1e-12);

    CHECK(render_overlay(image, zero) == overlay_bytes); // byte-identical rerun

    ExplanationMap small;
    small.values = Tensor({4, 4});
    small.provenance.normalized = true;
    CHECK_THROWS_AS(render_overlay(image, small), addressing_error);
}

TEST_CASE("run config parsing: presets, unknown keys, command mismatch") {
    const std::string good = R"({"model": {"kind": "tiny_cnn", "seed": 42}, "method": "dix2"})";
    auto config = parse_run_config(good, Command::evaluate);
    CHECK(config.method == "dix2");
    CHECK(config.model.kind == "tiny_cnn");

    CHECK_THROWS_AS(parse_run_config(R"({"model": {"kind": "tiny_cnn"}, "methodd": "x"})",
                                     Command::evaluate),
                    configuration_error);
    CHECK_THROWS_AS(parse_run_config(R"({"model": {"kind": "tiny_cnn", "sed": 1}})",
                                     Command::evaluate),
                    configuration_error);
    CHECK_THROWS_AS(parse_run_config(R"({"model": {"kind": "tiny_cnn"}, "method": "dix9"})",
                                     Command::evaluate),
                    configuration_error);
    CHECK_THROWS_AS(
        parse_run_config(R"({"model": {"kind": "tiny_cnn"}, "command": "explain"})",
                         Command::evaluate),
        configuration_error);
    CHECK_THROWS_AS(parse_run_config("not json", Command::evaluate), configuration_error);
}

TEST_CASE("preset fidelity: resolved selections match their definitions") {
    auto model = make_reference_model(ReferenceKind::tiny_cnn, 42); // sites 1,2,3
    auto sel = [&](const std::string& preset) {
        return select_layers(resolve_preset(preset), *model);
    };
    auto indices = [](const LayerSelection& s) {
        std::vector<int> out;
        for (const auto& l : s.layers) out.push_back(l.index);
        return out;
    };

    CHECK(indices(sel("dix1")) == std::vector<int>{3});
    CHECK(indices(sel("dix2")) == std::vector<int>{2, 3});
    CHECK(indices(sel("dix3")) == std::vector<int>{1, 2, 3});
    CHECK(sel("dix2").aggregation == AggregationKind::mean);
    CHECK(sel("dix2_mul").aggregation == AggregationKind::elementwise_product);
    CHECK(indices(sel("dix2_mul")) == std::vector<int>{2, 3});
    CHECK(resolve_preset("dix3_grads").phi == PhiKind::gradient_only);
    CHECK(indices(sel("dix3_grads")) == std::vector<int>{1, 2, 3});
    CHECK(resolve_preset("ig").layer_span == 0);
    CHECK(indices(sel("ig")) == std::vector<int>{0});
    CHECK(resolve_preset("dix1").path.step_count == 10);

    // tiny classifier has two sites: dix3 cannot resolve
    auto classifier = make_reference_model(ReferenceKind::tiny_classifier_10class, 3);
    CHECK_THROWS_AS(select_layers(resolve_preset("dix3"), *classifier), configuration_error);
}

TEST_CASE("explain writes exactly two artifacts per image") {
    const auto dir = fresh_dir("explain");
    RunConfig config;
    config.command = Command::explain;
    config.model.kind = "tiny_cnn";
    config.model.seed = 42;
    config.method = "dix3";
    config.dataset.kind = "synthetic_rgb";
    config.dataset.count = 2;
    config.dataset.seed = 5;
    config.output_dir = dir.string();
    CHECK(run(config) == 0);

    CHECK(fs::exists(dir / "img000.dixm"));
    CHECK(fs::exists(dir / "img000_overlay.png"));
    CHECK(fs::exists(dir / "img001.dixm"));
    CHECK(fs::exists(dir / "img001_overlay.png"));
    auto map = read_map((dir / "img000.dixm").string());
    CHECK(map.values.shape() == std::vector<std::size_t>{8, 8});
}

TEST_CASE("evaluate is byte-identical across deterministic reruns") {
    RunConfig config;
    config.command = Command::evaluate;
    config.model.kind = "tiny_cnn";
    config.model.seed = 42;
    config.method = "dix2";
    config.dataset.kind = "synthetic_rgb";
    config.dataset.count = 3;
    config.dataset.seed = 5;
    config.metrics = {"NEG", "DEL", "ADP"};
    config.deterministic = true;

    const auto dir1 = fresh_dir("eval1");
    const auto dir2 = fresh_dir("eval2");
    config.output_dir = dir1.string();
    CHECK(run(config) == 0);
    config.output_dir = dir2.string();
    CHECK(run(config) == 0);

    CHECK(slurp(dir1 / "metrics.csv") == slurp(dir2 / "metrics.csv"));
    CHECK(slurp(dir1 / "metrics.json") == slurp(dir2 / "metrics.json"));
    for (const auto& stem : {"img000", "img001", "img002"})
        CHECK(slurp(dir1 / "maps" / (std::string(stem) + ".dixm")) ==
              slurp(dir2 / "maps" / (std::string(stem) + ".dixm")));

    // golden column schema
    const std::string csv = slurp(dir1 / "metrics.csv");
    CHECK(csv.rfind("model,method,metric,value,n_items,config_digest,seed\n", 0) == 0);
}

TEST_CASE("evaluate runs the classifier on the 10-class synthetic set") {
    const auto dir = fresh_dir("eval_classifier");
    RunConfig config;
    config.command = Command::evaluate;
    config.model.kind = "tiny_classifier_10class";
    config.model.seed = 3;
    config.method = "dix2";
    config.dataset.kind = "synthetic_10class";
    config.dataset.count = 4;
    config.dataset.seed = 3;
    config.metrics = {"POS", "INS"};
    config.output_dir = dir.string();
    CHECK(run(config) == 0);
    const std::string csv = slurp(dir / "metrics.csv");
    CHECK(csv.find("tiny_classifier_10class#3,dix2,POS,") != std::string::npos);
    CHECK(csv.find("tiny_classifier_10class#3,dix2,INS,") != std::string::npos);
}

TEST_CASE("sanity sweep artifacts are byte-identical across deterministic reruns") {
    RunConfig config;
    config.command = Command::sanity;
    config.model.kind = "tiny_cnn";
    config.model.seed = 42;
    config.method = "dix2";
    config.deterministic = true;
    config.seed = 7;
    config.sanity.protocols = {"cascading", "independent"};
    config.sanity.fixtures = 4;

    const auto dir1 = fresh_dir("san1");
    const auto dir2 = fresh_dir("san2");
    config.output_dir = dir1.string();
    CHECK(run(config) == 0);
    config.output_dir = dir2.string();
    CHECK(run(config) == 0);
    for (const auto* name : {"sweeps.csv", "sweep_cascading.png", "sweep_independent.png"})
        CHECK(slurp(dir1 / name) == slurp(dir2 / name));
}

TEST_CASE("segment on the synthetic segmentation set produces four in-range rows") {
    const auto dir = fresh_dir("segment");
    RunConfig config;
    config.command = Command::segment;
    config.model.kind = "tiny_cnn";
    config.model.seed = 42;
    config.method = "dix2";
    config.dataset.kind = "synthetic_segmentation";
    config.dataset.count = 4;
    config.dataset.seed = 3;
    config.output_dir = dir.string();
    CHECK(run(config) == 0);
    const std::string csv = slurp(dir / "segmentation.csv");
    CHECK(csv.find(",PA,") != std::string::npos);
    CHECK(csv.find(",mAP,") != std::string::npos);
    CHECK(csv.find(",mIoU,") != std::string::npos);
    CHECK(csv.find(",mF1,") != std::string::npos);
}

TEST_CASE("directory datasets load through the manifest with mask pairing") {
    const auto dir = fresh_dir("dataset_dir");
    auto samples = make_synthetic_segmentation(11, 3, 8, 8, 3);
    write_segmentation_dataset(dir.string(), samples);
    auto manifest = load_manifest(dir.string());
    CHECK(manifest.entries.size() == 3);
    CHECK(manifest.entries[0].mask.has_value());

    RunConfig config;
    config.command = Command::segment;
    config.model.kind = "tiny_cnn";
    config.model.seed = 42;
    config.method = "dix1";
    config.dataset.kind = "directory";
    config.dataset.path = dir.string();
    config.output_dir = (dir / "out").string();
    CHECK(run(config) == 0);

    // a manifest naming a missing mask is a load error
    fs::remove(dir / "masks" / "img001.png");
    CHECK_THROWS_AS(load_manifest(dir.string()), load_error);
}

TEST_CASE("per-item load failures are logged rows, not aborts") {
    const auto dir = fresh_dir("dataset_partial");
    auto samples = make_synthetic_segmentation(13, 3, 8, 8, 3);
    write_segmentation_dataset(dir.string(), samples);
    // corrupt one image in place
    {
        std::ofstream out(dir / "images" / "img001.png", std::ios::binary | std::ios::trunc);
        out << "this is not a png";
    }

    RunConfig config;
    config.command = Command::evaluate;
    config.model.kind = "tiny_cnn";
    config.model.seed = 42;
    config.method = "dix1";
    config.dataset.kind = "directory";
    config.dataset.path = dir.string();
    config.metrics = {"DEL"};
    config.output_dir = (dir / "out").string();
    CHECK(run(config) == 0); // the bad item is skipped, the run completes

    const std::string csv = slurp(dir / "out" / "metrics.csv");
    CHECK(csv.find(",DEL,") != std::string::npos);
    CHECK(csv.find(",2,") != std::string::npos); // two usable items scored
    const std::string failures = slurp(dir / "out" / "failures.csv");
    CHECK(failures.find("img001") != std::string::npos);
    CHECK(failures.find("load") != std::string::npos);
}
