#include "dix/errors.hpp"
#include "dix/models.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace dix {

namespace {

using nlohmann::json;

std::map<std::string, PluginLoader>& registry() {
    static std::map<std::string, PluginLoader> plugins;
    return plugins;
}

std::string double_to_hex(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    std::ostringstream oss;
    oss << std::hex << bits;
    return oss.str();
}

double hex_to_double(const std::string& s) {
    std::uint64_t bits = 0;
    std::istringstream iss(s);
    iss >> std::hex >> bits;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

constexpr const char* kCheckpointFormat = "dix-ref-checkpoint-v1";

// Rebuilds the architecture named in the checkpoint, then overwrites every
// parameter tensor from the stored bit patterns.
ModelHandle load_reference_checkpoint(const std::string& path, const PluginConfig& config) {
    for (const auto& [key, value] : config) {
        if (key != "expect_kind")
            throw configuration_error("unknown plugin config key '" + key +
                                      "'; accepted keys: expect_kind");
    }

    std::ifstream in(path);
    if (!in) throw load_error("cannot open checkpoint '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw load_error("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.contains("format") || doc["format"] != kCheckpointFormat)
        throw load_error("checkpoint '" + path + "' has unrecognized format tag");

    const std::string kind_name = doc.at("kind").get<std::string>();
    if (auto it = config.find("expect_kind"); it != config.end() && it->second != kind_name)
        throw load_error("checkpoint kind '" + kind_name + "' does not match expected '" +
                         it->second + "'");

    const auto seed = doc.at("seed").get<std::uint64_t>();
    ModelHandle model = make_reference_model(reference_kind_from_name(kind_name), seed);

    const json& stored = doc.at("params");
    auto storage = model->parameter_storage();
    auto named = model->parameters();
    std::vector<std::string> diff;
    for (std::size_t i = 0; i < named.size(); ++i) {
        const std::string& name = named[i].first;
        if (!stored.contains(name)) {
            diff.push_back("missing: " + name);
            continue;
        }
        const json& entry = stored.at(name);
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != storage[i]->shape()) {
            diff.push_back("shape mismatch: " + name);
            continue;
        }
        const auto& hex = entry.at("data").get<std::vector<std::string>>();
        if (hex.size() != storage[i]->size()) {
            diff.push_back("size mismatch: " + name);
            continue;
        }
        for (std::size_t j = 0; j < hex.size(); ++j) (*storage[i])[j] = hex_to_double(hex[j]);
    }
    for (const auto& [name, entry] : stored.items()) {
        bool known = false;
        for (const auto& [pname, _] : named)
            if (pname == name) known = true;
        if (!known) diff.push_back("unexpected: " + name);
    }
    if (!diff.empty()) {
        std::string msg = "checkpoint '" + path + "' does not match architecture '" + kind_name +
                          "':";
        for (const auto& d : diff) msg += "\n  " + d;
        throw load_error(msg);
    }
    return model;
}

struct BuiltinRegistration {
    BuiltinRegistration() { registry()["reference_checkpoint"] = load_reference_checkpoint; }
} builtin_registration;

} // namespace

void register_plugin(const std::string& name, PluginLoader loader) {
    registry()[name] = std::move(loader);
}

std::vector<std::string> registered_plugins() {
    std::vector<std::string> names;
    for (const auto& [name, _] : registry()) names.push_back(name);
    return names;
}

ModelHandle load_external_model(const std::string& plugin_name, const std::string& checkpoint_path,
                                const PluginConfig& config) {
    auto it = registry().find(plugin_name);
    if (it == registry().end()) {
        std::string msg = "no plugin named '" + plugin_name + "'; available plugins:";
        for (const auto& name : registered_plugins()) msg += " " + name;
        throw capability_error(msg);
    }
    ModelHandle model = it->second(checkpoint_path, config);
    if (!model || model->layer_ids().empty())
        throw load_error("plugin '" + plugin_name + "' returned an invalid model");
    return model;
}

void save_reference_checkpoint(const Model& model, ReferenceKind kind, std::uint64_t seed,
                               const std::string& path) {
    json doc;
    doc["format"] = kCheckpointFormat;
    doc["kind"] = reference_kind_name(kind);
    doc["seed"] = seed;
    json params = json::object();
    for (const auto& [name, tensor] : model.parameters()) {
        json entry;
        entry["shape"] = tensor->shape();
        std::vector<std::string> hex;
        hex.reserve(tensor->size());
        for (std::size_t i = 0; i < tensor->size(); ++i) hex.push_back(double_to_hex((*tensor)[i]));
        entry["data"] = std::move(hex);
        params[name] = std::move(entry);
    }
    doc["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw load_error("cannot write checkpoint '" + path + "'");
    out << doc.dump(1) << "\n";
}

} // namespace dix
