#include "dix/harness.hpp"

#include "dix/dataset.hpp"
#include "dix/digest.hpp"
#include "dix/errors.hpp"
#include "dix/image.hpp"
#include "dix/mapfile.hpp"
#include "dix/metrics.hpp"
#include "dix/overlay.hpp"
#include "dix/sanity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace dix {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kAllMetrics[] = {"NEG", "POS", "INS", "DEL", "ADP", "PIC", "AIC", "SIC"};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void check_keys(const ordered_json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) {
            std::string msg = "unknown key '" + key + "' in " + where + "; accepted keys:";
            for (const auto& k : allowed) msg += " " + k;
            throw configuration_error(msg);
        }
}

// --- config parsing ---

ModelConfig parse_model(const ordered_json& j) {
    check_keys(j, "model", {"kind", "seed", "plugin", "checkpoint", "config"});
    ModelConfig m;
    if (j.contains("kind")) m.kind = j["kind"].get<std::string>();
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("plugin")) m.plugin = j["plugin"].get<std::string>();
    if (j.contains("checkpoint")) m.checkpoint = j["checkpoint"].get<std::string>();
    if (j.contains("config"))
        for (const auto& [k, v] : j["config"].items()) m.plugin_config[k] = v.get<std::string>();
    if (m.kind && m.plugin)
        throw configuration_error("model: give either 'kind' (reference) or 'plugin', not both");
    if (!m.kind && !m.plugin)
        throw configuration_error("model: needs 'kind' (reference model) or 'plugin'");
    if (m.plugin && m.checkpoint.empty())
        throw configuration_error("model: 'plugin' requires 'checkpoint'");
    return m;
}

DatasetConfig parse_dataset(const ordered_json& j) {
    check_keys(j, "dataset",
               {"kind", "count", "seed", "height", "width", "train_per_class", "test_per_class",
                "path"});
    DatasetConfig d;
    if (j.contains("kind")) d.kind = j["kind"].get<std::string>();
    const std::set<std::string> kinds{"synthetic_rgb", "synthetic_segmentation",
                                      "synthetic_10class", "directory"};
    if (!kinds.count(d.kind)) {
        std::string msg = "dataset.kind '" + d.kind + "' unknown; accepted:";
        for (const auto& k : kinds) msg += " " + k;
        throw configuration_error(msg);
    }
    if (j.contains("count")) d.count = j["count"].get<int>();
    if (j.contains("seed")) d.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("height")) d.height = j["height"].get<std::size_t>();
    if (j.contains("width")) d.width = j["width"].get<std::size_t>();
    if (j.contains("train_per_class")) d.train_per_class = j["train_per_class"].get<int>();
    if (j.contains("test_per_class")) d.test_per_class = j["test_per_class"].get<int>();
    if (j.contains("path")) d.path = j["path"].get<std::string>();
    if (d.kind == "directory" && d.path.empty())
        throw configuration_error("dataset: kind 'directory' requires 'path'");
    if (d.count < 1) throw configuration_error("dataset.count must be positive");
    return d;
}

SanityConfig parse_sanity(const ordered_json& j) {
    check_keys(j, "sanity",
               {"protocols", "fixtures", "train_per_class", "test_per_class", "max_epochs"});
    SanityConfig s;
    if (j.contains("protocols")) {
        s.protocols.clear();
        for (const auto& p : j["protocols"]) {
            const auto name = p.get<std::string>();
            if (name != "cascading" && name != "independent" && name != "data")
                throw configuration_error("sanity.protocols entry '" + name +
                                          "' unknown; accepted: cascading independent data");
            s.protocols.push_back(name);
        }
    }
    if (j.contains("fixtures")) s.fixtures = j["fixtures"].get<int>();
    if (j.contains("train_per_class")) s.train_per_class = j["train_per_class"].get<int>();
    if (j.contains("test_per_class")) s.test_per_class = j["test_per_class"].get<int>();
    if (j.contains("max_epochs")) s.max_epochs = j["max_epochs"].get<int>();
    if (s.fixtures < 1) throw configuration_error("sanity.fixtures must be positive");
    return s;
}

} // namespace

Command command_from_name(const std::string& name) {
    if (name == "explain") return Command::explain;
    if (name == "evaluate") return Command::evaluate;
    if (name == "segment") return Command::segment;
    if (name == "sanity") return Command::sanity;
    if (name == "ablate") return Command::ablate;
    throw configuration_error("unknown command '" + name +
                              "'; accepted: explain evaluate segment sanity ablate");
}

std::string command_name(Command c) {
    switch (c) {
    case Command::explain: return "explain";
    case Command::evaluate: return "evaluate";
    case Command::segment: return "segment";
    case Command::sanity: return "sanity";
    case Command::ablate: return "ablate";
    }
    return "?";
}

RunConfig parse_run_config(const std::string& json_text, Command command) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const ordered_json::exception& e) {
        throw configuration_error(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc, "config root",
               {"command", "model", "method", "dataset", "metrics", "output_dir", "deterministic",
                "seed", "sanity"});
    RunConfig config;
    config.command = command;
    if (doc.contains("command")) {
        const auto declared = command_from_name(doc["command"].get<std::string>());
        if (declared != command)
            throw configuration_error("config declares command '" +
                                      command_name(declared) + "' but '" +
                                      command_name(command) + "' was invoked");
    }
    if (!doc.contains("model")) throw configuration_error("config: missing 'model'");
    config.model = parse_model(doc["model"]);
    if (doc.contains("method")) config.method = doc["method"].get<std::string>();
    resolve_preset(config.method); // validates the preset name early
    if (doc.contains("dataset")) config.dataset = parse_dataset(doc["dataset"]);
    if (doc.contains("metrics")) {
        for (const auto& m : doc["metrics"]) {
            const auto name = m.get<std::string>();
            if (std::find(std::begin(kAllMetrics), std::end(kAllMetrics), name) ==
                std::end(kAllMetrics))
                throw configuration_error("metrics entry '" + name +
                                          "' unknown; accepted: NEG POS INS DEL ADP PIC AIC SIC");
            config.metrics.push_back(name);
        }
    }
    if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("deterministic")) config.deterministic = doc["deterministic"].get<bool>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("sanity")) config.sanity = parse_sanity(doc["sanity"]);
    return config;
}

RunConfig load_run_config(const std::string& path, Command command) {
    std::ifstream in(path);
    if (!in) throw configuration_error("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), command);
}

ModelHandle build_model(const ModelConfig& config) {
    if (config.kind)
        return make_reference_model(reference_kind_from_name(*config.kind), config.seed);
    return load_external_model(*config.plugin, config.checkpoint, config.plugin_config);
}

namespace {

// --- dataset materialization ---

struct WorkItem {
    std::string stem;
    Tensor image;
    std::optional<Tensor> mask;
};

struct FailureLog {
    std::vector<std::array<std::string, 3>> rows; // item, stage, message

    void add(const std::string& item, const std::string& stage, const std::string& message) {
        rows.push_back({item, stage, message});
        std::cerr << "[item-failure] " << item << " (" << stage << "): " << message << "\n";
    }
    void write(const fs::path& dir) const {
        if (rows.empty()) return;
        std::ofstream out(dir / "failures.csv");
        out << "item,stage,message\n";
        for (const auto& r : rows) {
            std::string msg = r[2];
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << r[0] << "," << r[1] << "," << msg << "\n";
        }
    }
};

std::vector<WorkItem> load_items(const RunConfig& config, const Model& model,
                                 FailureLog& failures) {
    std::vector<WorkItem> items;
    const auto& d = config.dataset;
    const auto input_shape = model.site_shape(model.layer_ids().front());
    auto stem_of = [](std::size_t i) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "img%03zu", i);
        return std::string(buf);
    };
    if (d.kind == "synthetic_rgb") {
        auto images = make_synthetic_rgb_images(d.seed, d.count, input_shape[1], input_shape[2]);
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (input_shape[0] == 1) {
                Tensor gray({1, input_shape[1], input_shape[2]});
                for (std::size_t p = 0; p < gray.size(); ++p)
                    gray[p] = (images[i][p] + images[i][gray.size() + p] +
                               images[i][2 * gray.size() + p]) /
                              3.0;
                items.push_back({stem_of(i), std::move(gray), std::nullopt});
            } else {
                items.push_back({stem_of(i), std::move(images[i]), std::nullopt});
            }
        }
    } else if (d.kind == "synthetic_segmentation") {
        auto samples = make_synthetic_segmentation(d.seed, d.count, input_shape[1],
                                                   input_shape[2], input_shape[0]);
        for (std::size_t i = 0; i < samples.size(); ++i)
            items.push_back({stem_of(i), std::move(samples[i].image),
                             std::move(samples[i].mask)});
    } else if (d.kind == "synthetic_10class") {
        auto ds = make_synthetic_10class(d.seed, d.train_per_class, d.test_per_class);
        const auto count = std::min<std::size_t>(ds.test.size(),
                                                 static_cast<std::size_t>(d.count));
        for (std::size_t i = 0; i < count; ++i)
            items.push_back({stem_of(i), std::move(ds.test[i].image), std::nullopt});
    } else { // directory: unreadable or mismatched entries become logged rows
        const auto manifest = load_manifest(d.path);
        for (const auto& entry : manifest.entries) {
            const std::string stem = fs::path(entry.image).stem().string();
            try {
                WorkItem item;
                item.stem = stem;
                item.image = read_png((fs::path(d.path) / entry.image).string());
                if (entry.mask) {
                    Tensor m = read_png((fs::path(d.path) / *entry.mask).string());
                    Tensor binary({m.dim(1), m.dim(2)});
                    for (std::size_t p = 0; p < binary.size(); ++p)
                        binary[p] = m[p] > 0.5 ? 1.0 : 0.0;
                    item.mask = std::move(binary);
                }
                if (item.image.shape() != input_shape)
                    throw addressing_error("image shape " + item.image.shape_string() +
                                           " does not match model input " +
                                           Tensor::zeros(input_shape).shape_string());
                items.push_back(std::move(item));
            } catch (const error& e) {
                failures.add(stem, "load", e.what());
            }
        }
    }
    if (items.empty()) throw configuration_error("dataset produced no usable items");
    for (const auto& item : items)
        if (item.image.shape() != input_shape)
            throw addressing_error("dataset image '" + item.stem + "' has shape " +
                                   item.image.shape_string() + " but model '" +
                                   model.model_id() + "' expects " +
                                   Tensor::zeros(input_shape).shape_string());
    return items;
}

struct ComputedMaps {
    std::vector<std::size_t> ok; // indices into items
    std::vector<ExplanationMap> raw;
    std::vector<ExplanationMap> normalized;
};

ComputedMaps compute_all_maps(const Model& model, const std::vector<WorkItem>& items,
                              const MethodSpec& method, FailureLog& failures) {
    ComputedMaps out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        try {
            const int cls = model.forward(items[i].image).argmax();
            ExplanationMap raw = compute_map(model, items[i].image, cls, method);
            if (!raw.values.all_finite()) throw numerical_error("non-finite map values");
            out.normalized.push_back(normalize_map(raw));
            out.raw.push_back(std::move(raw));
            out.ok.push_back(i);
        } catch (const error& e) {
            failures.add(items[i].stem, "map", e.what());
        }
    }
    if (out.ok.empty()) throw protocol_failure("every item failed map computation");
    return out;
}

std::string protocol_string(const RunConfig& config, const Model& model,
                            const std::string& metric) {
    std::ostringstream oss;
    oss << "model=" << model.model_id() << ";method=" << config.method
        << ";N=" << resolve_preset(config.method).path.step_count << ";metric=" << metric
        << ";deterministic=" << (config.deterministic ? 1 : 0) << ";seed=" << config.seed;
    if (metric == "NEG" || metric == "POS" || metric == "INS" || metric == "DEL")
        oss << ";grid=0:0.1:0.9;blackout=zero;tie=row-major;auc=rect";
    if (metric == "ADP" || metric == "PIC") oss << ";mask=map-product";
    if (metric == "AIC" || metric == "SIC")
        oss << ";reveal=0:0.1:1;bins=10;blur=gauss(sigma=" << kBlurSigma
            << ",radius=" << static_cast<int>(std::ceil(3.0 * kBlurSigma))
            << ",edge=clamp);compressor=" << compressor_id()
            << ";sic_norm=logK;auc=trapezoid-bin-centers";
    if (metric == "PA" || metric == "mAP" || metric == "mIoU" || metric == "mF1")
        oss << ";threshold=per-image-mean;ap=noninterpolated;tie=row-major";
    return oss.str();
}

void write_metric_rows(std::ofstream& csv, ordered_json& json_rows, const RunConfig& config,
                       const Model& model, const MetricReport& report) {
    const std::string proto = protocol_string(config, model, report.metric);
    const std::string digest = fnv1a64_hex(proto);
    csv << model.model_id() << "," << config.method << "," << report.metric << ","
        << format_double(report.value) << "," << report.per_item.size() << "," << digest << ","
        << config.seed << "\n";
    ordered_json row;
    row["model"] = model.model_id();
    row["method"] = config.method;
    row["metric"] = report.metric;
    row["value"] = report.value;
    row["n_items"] = report.per_item.size();
    row["config_digest"] = digest;
    row["seed"] = config.seed;
    row["protocol"] = proto;
    row["per_item"] = report.per_item;
    row["notes"] = report.notes;
    json_rows.push_back(std::move(row));
}

std::vector<MetricReport> run_metrics(const Model& model, const std::vector<std::string>& wanted,
                                      const std::vector<Tensor>& images,
                                      const std::vector<ExplanationMap>& maps) {
    std::vector<MetricReport> reports;
    bool aic_done = false;
    for (const auto& name : wanted) {
        if (name == "NEG" || name == "POS" || name == "INS" || name == "DEL") {
            reports.push_back(perturbation_metric(model, name, images, maps));
        } else if (name == "ADP") {
            reports.push_back(adp(model, images, maps));
        } else if (name == "PIC") {
            reports.push_back(pic(model, images, maps));
        } else if ((name == "AIC" || name == "SIC") && !aic_done) {
            auto [aic_report, sic_report] = aic_sic(model, images, maps);
            const bool want_aic =
                std::find(wanted.begin(), wanted.end(), "AIC") != wanted.end();
            const bool want_sic =
                std::find(wanted.begin(), wanted.end(), "SIC") != wanted.end();
            if (want_aic) reports.push_back(std::move(aic_report));
            if (want_sic) reports.push_back(std::move(sic_report));
            aic_done = true;
        }
    }
    return reports;
}

// --- sweep plot rendering ---

void draw_line(Tensor& canvas, double x0, double y0, double x1, double y1, const double rgb[3]) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) * 2 + 1;
    const std::size_t h = canvas.dim(1), w = canvas.dim(2);
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const auto x = static_cast<long>(std::lround(x0 + t * (x1 - x0)));
        const auto y = static_cast<long>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || y < 0 || x >= static_cast<long>(w) || y >= static_cast<long>(h)) continue;
        for (std::size_t c = 0; c < 3; ++c)
            canvas.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = rgb[c];
    }
}

void write_sweep_plot(const fs::path& path, const RandomizationSweep& sweep) {
    const std::size_t width = 480, height = 320;
    Tensor canvas = Tensor::full({3, height, width}, 1.0);
    const double axis[3] = {0.25, 0.25, 0.25};
    const double grid[3] = {0.85, 0.85, 0.85};
    const double line[3] = {0.15, 0.35, 0.75};
    const double left = 48, right = width - 16, top = 16, bottom = height - 32;
    auto map_x = [&](std::size_t depth) {
        return left + (right - left) * static_cast<double>(depth) /
                          static_cast<double>(sweep.correlations.size() - 1);
    };
    auto map_y = [&](double corr) { return top + (bottom - top) * (1.0 - (corr + 1.0) / 2.0); };
    for (double gy : {-1.0, -0.5, 0.0, 0.5, 1.0})
        draw_line(canvas, left, map_y(gy), right, map_y(gy), gy == 0.0 ? axis : grid);
    draw_line(canvas, left, top, left, bottom, axis);
    draw_line(canvas, left, bottom, right, bottom, axis);
    for (std::size_t d = 1; d < sweep.correlations.size(); ++d)
        draw_line(canvas, map_x(d - 1), map_y(sweep.correlations[d - 1]), map_x(d),
                  map_y(sweep.correlations[d]), line);
    for (std::size_t d = 0; d < sweep.correlations.size(); ++d) {
        const double cx = map_x(d), cy = map_y(sweep.correlations[d]);
        draw_line(canvas, cx - 2, cy, cx + 2, cy, line);
        draw_line(canvas, cx, cy - 2, cx, cy + 2, line);
    }
    write_png(path.string(),
              canvas, {{"dix:plot", sweep.mode == RandomizationMode::cascading
                                        ? "cascading-sweep"
                                        : "independent-sweep"}});
}

// --- commands ---

int run_explain(const RunConfig& config, const Model& model, const std::vector<WorkItem>& items,
                const fs::path& out_dir, FailureLog& failures) {
    const MethodSpec method = resolve_preset(config.method);
    auto maps = compute_all_maps(model, items, method, failures);
    for (std::size_t k = 0; k < maps.ok.size(); ++k) {
        const auto& item = items[maps.ok[k]];
        write_map((out_dir / (item.stem + ".dixm")).string(), maps.raw[k]);
        write_overlay((out_dir / (item.stem + "_overlay.png")).string(), item.image,
                      maps.normalized[k]);
    }
    failures.write(out_dir);
    std::cout << "explain: wrote " << maps.ok.size() << " map+overlay pairs to " << out_dir
              << "\n";
    return failures.rows.empty() ? 0 : 0; // per-item failures do not abort the run
}

int run_evaluate(const RunConfig& config, const Model& model, const std::vector<WorkItem>& items,
                 const fs::path& out_dir, FailureLog& failures) {
    const MethodSpec method = resolve_preset(config.method);
    auto maps = compute_all_maps(model, items, method, failures);

    fs::create_directories(out_dir / "maps");
    std::vector<Tensor> images;
    for (std::size_t k = 0; k < maps.ok.size(); ++k) {
        images.push_back(items[maps.ok[k]].image);
        write_map((out_dir / "maps" / (items[maps.ok[k]].stem + ".dixm")).string(), maps.raw[k]);
    }

    std::vector<std::string> wanted = config.metrics;
    if (wanted.empty()) wanted.assign(std::begin(kAllMetrics), std::end(kAllMetrics));

    std::ofstream csv(out_dir / "metrics.csv");
    csv << metrics_csv_header() << "\n";
    ordered_json json_rows = ordered_json::array();
    for (const auto& report : run_metrics(model, wanted, images, maps.normalized))
        write_metric_rows(csv, json_rows, config, model, report);
    std::ofstream json_out(out_dir / "metrics.json");
    json_out << json_rows.dump(1) << "\n";
    failures.write(out_dir);
    std::cout << "evaluate: " << json_rows.size() << " metric rows over " << images.size()
              << " items -> " << (out_dir / "metrics.csv") << "\n";
    return 0;
}

int run_segment(const RunConfig& config, const Model& model, const std::vector<WorkItem>& items,
                const fs::path& out_dir, FailureLog& failures) {
    const MethodSpec method = resolve_preset(config.method);
    std::vector<WorkItem> masked_items;
    for (const auto& item : items)
        if (item.mask) masked_items.push_back(item);
    if (masked_items.empty())
        throw configuration_error("segment needs a dataset with masks "
                                  "(synthetic_segmentation or a directory with masks/)");
    auto maps = compute_all_maps(model, masked_items, method, failures);
    std::vector<Tensor> masks;
    for (std::size_t k = 0; k < maps.ok.size(); ++k)
        masks.push_back(*masked_items[maps.ok[k]].mask);

    const auto reports = segmentation_reports(maps.normalized, masks);
    std::ofstream csv(out_dir / "segmentation.csv");
    csv << metrics_csv_header() << "\n";
    ordered_json json_rows = ordered_json::array();
    for (const auto& report : reports) write_metric_rows(csv, json_rows, config, model, report);
    std::ofstream json_out(out_dir / "segmentation.json");
    json_out << json_rows.dump(1) << "\n";
    failures.write(out_dir);
    std::cout << "segment: PA=" << format_double(reports[0].value)
              << " mAP=" << format_double(reports[1].value)
              << " mIoU=" << format_double(reports[2].value)
              << " mF1=" << format_double(reports[3].value) << " over " << masks.size()
              << " items\n";
    return 0;
}

int run_sanity(const RunConfig& config, const Model& model, const fs::path& out_dir) {
    const MethodSpec method = resolve_preset(config.method);
    const auto& sc = config.sanity;

    bool want_sweep = false, want_data = false;
    std::vector<RandomizationMode> modes;
    for (const auto& p : sc.protocols) {
        if (p == "cascading") {
            modes.push_back(RandomizationMode::cascading);
            want_sweep = true;
        } else if (p == "independent") {
            modes.push_back(RandomizationMode::independent);
            want_sweep = true;
        } else {
            want_data = true;
        }
    }

    if (want_sweep) {
        const auto input_shape = model.site_shape(model.layer_ids().front());
        std::vector<Tensor> fixtures;
        if (input_shape[0] == 1) {
            auto ds = make_synthetic_10class(config.seed + 1000, 1,
                                             std::max(1, sc.fixtures / 10 + 1));
            for (int i = 0; i < sc.fixtures && i < static_cast<int>(ds.test.size()); ++i)
                fixtures.push_back(ds.test[static_cast<std::size_t>(i)].image);
        } else {
            fixtures = make_synthetic_rgb_images(config.seed + 1000, sc.fixtures, input_shape[1],
                                                 input_shape[2]);
        }
        std::ofstream csv(out_dir / "sweeps.csv");
        csv << "mode,depth,mean_corr,n_fixtures,seed\n";
        for (const auto mode : modes) {
            const auto sweep = randomization_sweep(model, method, fixtures, mode, config.seed);
            const std::string mode_name =
                mode == RandomizationMode::cascading ? "cascading" : "independent";
            for (std::size_t d = 0; d < sweep.correlations.size(); ++d)
                csv << mode_name << "," << d << "," << format_double(sweep.correlations[d]) << ","
                    << sweep.fixture_count << "," << sweep.seed << "\n";
            write_sweep_plot(out_dir / ("sweep_" + mode_name + ".png"), sweep);
            std::cout << "sanity " << mode_name << ": depth-0 corr "
                      << format_double(sweep.correlations.front()) << ", final-depth corr "
                      << format_double(sweep.correlations.back()) << "\n";
        }
    }

    if (want_data) {
        if (!model.trainable())
            throw configuration_error("the data protocol needs a trainable model "
                                      "(tiny_classifier_10class)");
        auto ds = make_synthetic_10class(config.seed, sc.train_per_class, sc.test_per_class);
        TrainBudget budget;
        budget.max_epochs = sc.max_epochs;
        ReferenceKind kind = ReferenceKind::tiny_classifier_10class;
        const auto report = data_randomization(kind, ds, method, config.seed, budget);
        std::ofstream csv(out_dir / "data_summary.csv");
        csv << "mode,comparison,min,q1,median,q3,max,mean,n_items,seed\n";
        auto row = [&](const char* comparison, const CorrelationSummary& s) {
            csv << "data," << comparison << "," << format_double(s.min) << ","
                << format_double(s.q1) << "," << format_double(s.median) << ","
                << format_double(s.q3) << "," << format_double(s.max) << ","
                << format_double(s.mean) << "," << s.per_item.size() << "," << config.seed
                << "\n";
        };
        row("true_vs_permuted", report.true_vs_permuted);
        row("true_vs_true_reseeded", report.true_vs_true_reseeded);
        std::ofstream txt(out_dir / "data_randomization.txt");
        txt << "true train accuracy: " << report.true_train_accuracy << " ("
            << report.true_epochs << " epochs)\n"
            << "permuted train accuracy: " << report.permuted_train_accuracy << " ("
            << report.permuted_epochs << " epochs)\n"
            << "reseeded train accuracy: " << report.reseeded_train_accuracy << " ("
            << report.reseeded_epochs << " epochs)\n"
            << "permuted test accuracy: " << report.permuted_test_accuracy << "\n"
            << "mean spearman true-vs-permuted: " << report.true_vs_permuted.mean << "\n"
            << "mean spearman true-vs-true-reseeded: " << report.true_vs_true_reseeded.mean
            << "\n";
        std::cout << "sanity data: permuted test acc "
                  << format_double(report.permuted_test_accuracy) << ", true-vs-permuted mean "
                  << format_double(report.true_vs_permuted.mean)
                  << ", true-vs-true mean "
                  << format_double(report.true_vs_true_reseeded.mean) << "\n";
    }
    return 0;
}

int run_ablate(const RunConfig& config, const Model& model, const std::vector<WorkItem>& items,
               const fs::path& out_dir, FailureLog& failures) {
    const std::vector<std::string> presets{"dix1", "ig", "dix2", "dix2_mul", "dix3_grads",
                                           "dix3"};
    std::vector<std::string> wanted = config.metrics;
    if (wanted.empty()) wanted.assign(std::begin(kAllMetrics), std::end(kAllMetrics));

    std::ofstream csv(out_dir / "ablation.csv");
    csv << metrics_csv_header() << "\n";
    ordered_json json_rows = ordered_json::array();
    std::vector<std::vector<std::string>> table;

    for (const auto& preset : presets) {
        RunConfig preset_config = config;
        preset_config.method = preset;
        const MethodSpec method = resolve_preset(preset);
        std::vector<std::string> table_row{preset};
        try {
            auto maps = compute_all_maps(model, items, method, failures);
            std::vector<Tensor> images;
            for (std::size_t k = 0; k < maps.ok.size(); ++k)
                images.push_back(items[maps.ok[k]].image);
            for (const auto& report : run_metrics(model, wanted, images, maps.normalized)) {
                write_metric_rows(csv, json_rows, preset_config, model, report);
                table_row.push_back(format_double(report.value));
            }
        } catch (const error& e) {
            std::cerr << "[preset-failure] " << preset << ": " << e.what() << "\n";
            table_row.push_back(std::string("failed: ") + e.what());
        }
        table.push_back(std::move(table_row));
    }
    std::ofstream json_out(out_dir / "ablation.json");
    json_out << json_rows.dump(1) << "\n";
    failures.write(out_dir);

    std::cout << "method";
    for (const auto& m : wanted) std::cout << "\t" << m;
    std::cout << "\n";
    for (const auto& row : table) {
        for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "\t" : "") << row[i];
        std::cout << "\n";
    }
    return 0;
}

} // namespace

std::string metrics_csv_header() { return "model,method,metric,value,n_items,config_digest,seed"; }

int run(const RunConfig& config) {
    set_deterministic(config.deterministic);
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    ModelHandle model = build_model(config.model);

    FailureLog failures;
    switch (config.command) {
    case Command::explain:
        return run_explain(config, *model, load_items(config, *model, failures), out_dir,
                           failures);
    case Command::evaluate:
        return run_evaluate(config, *model, load_items(config, *model, failures), out_dir,
                            failures);
    case Command::segment:
        return run_segment(config, *model, load_items(config, *model, failures), out_dir,
                           failures);
    case Command::sanity: return run_sanity(config, *model, out_dir);
    case Command::ablate:
        return run_ablate(config, *model, load_items(config, *model, failures), out_dir,
                          failures);
    }
    throw configuration_error("unhandled command");
}

} // namespace dix
