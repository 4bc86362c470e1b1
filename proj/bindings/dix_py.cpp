#include "dix/attribution.hpp"
#include "dix/errors.hpp"
#include "dix/mapfile.hpp"
#include "dix/method.hpp"
#include "dix/metrics.hpp"
#include "dix/models.hpp"
#include "dix/rollout.hpp"
#include "dix/sanity.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace {

using namespace dix;

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i)
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.rank());
    for (std::size_t i = 0; i < t.rank(); ++i) shape[i] = static_cast<py::ssize_t>(t.dim(i));
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

PhiKind phi_from_name(const std::string& name) {
    if (name == "activation_times_gradient") return PhiKind::activation_times_gradient;
    if (name == "gradient_only") return PhiKind::gradient_only;
    if (name == "gradient_rollout") return PhiKind::gradient_rollout;
    throw configuration_error("unknown phi '" + name +
                              "'; accepted: activation_times_gradient gradient_only "
                              "gradient_rollout");
}

LayerId layer_for_index(const Model& model, int index) {
    for (const auto& l : model.layer_ids())
        if (l.index == index) return l;
    throw addressing_error("model '" + model.model_id() + "' has no layer " +
                           std::to_string(index));
}

std::vector<Tensor> tensors_from_list(const py::iterable& arrays) {
    std::vector<Tensor> out;
    for (const auto& item : arrays)
        out.push_back(tensor_from_array(
            py::cast<py::array_t<double, py::array::c_style | py::array::forcecast>>(item)));
    return out;
}

} // namespace

PYBIND11_MODULE(_dix, m) {
    m.doc() = "Path-integrated explanation maps over intermediate representations, their "
              "evaluation metrics, and sanity protocols.";

    py::register_exception<addressing_error>(m, "AddressingError", PyExc_ValueError);
    py::register_exception<configuration_error>(m, "ConfigurationError", PyExc_ValueError);
    py::register_exception<capability_error>(m, "CapabilityError", PyExc_RuntimeError);
    py::register_exception<numerical_error>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);
    py::register_exception<load_error>(m, "LoadError", PyExc_IOError);
    py::register_exception<protocol_failure>(m, "ProtocolFailure", PyExc_RuntimeError);

    py::class_<ExplanationMap>(m, "ExplanationMap")
        .def_property_readonly("values",
                               [](const ExplanationMap& map) { return array_from_tensor(map.values); })
        .def_readonly("class_index", &ExplanationMap::class_index)
        .def_property_readonly("digest",
                               [](const ExplanationMap& map) { return map.provenance.digest(); })
        .def_property_readonly("normalized",
                               [](const ExplanationMap& map) { return map.provenance.normalized; })
        .def("__repr__", [](const ExplanationMap& map) {
            return "<ExplanationMap " + map.values.shape_string() + " class=" +
                   std::to_string(map.class_index) + ">";
        });

    py::class_<Model, ModelHandle>(m, "Model")
        .def_property_readonly("model_id", &Model::model_id)
        .def_property_readonly("class_count", &Model::class_count)
        .def_property_readonly("weight_state", &Model::weight_state)
        .def_property_readonly("layer_indices",
                               [](const Model& model) {
                                   std::vector<int> out;
                                   for (const auto& l : model.layer_ids()) out.push_back(l.index);
                                   return out;
                               })
        .def_property_readonly("attention_layer_indices",
                               [](const Model& model) {
                                   std::vector<int> out;
                                   for (const auto& l : model.layer_ids())
                                       if (l.kind == SiteKind::attention) out.push_back(l.index);
                                   return out;
                               })
        .def("site_shape",
             [](const Model& model, int index) {
                 return model.site_shape(layer_for_index(model, index));
             },
             py::arg("layer_index"))
        .def("forward",
             [](const Model& model, const py::array_t<double, py::array::c_style |
                                                                   py::array::forcecast>& image) {
                 return model.forward(tensor_from_array(image)).scores;
             },
             py::arg("image"))
        .def("capture",
             [](const Model& model,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
                int layer_index) {
                 auto result = model.forward_capture(tensor_from_array(image),
                                                     {layer_for_index(model, layer_index)});
                 return py::make_tuple(result.prediction.scores,
                                       array_from_tensor(result.captures[0].second));
             },
             py::arg("image"), py::arg("layer_index"))
        .def("forward_from",
             [](const Model& model, int layer_index,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& repr,
                const py::object& image) {
                 std::optional<Tensor> ctx;
                 if (!image.is_none())
                     ctx = tensor_from_array(
                         py::cast<py::array_t<double,
                                              py::array::c_style | py::array::forcecast>>(image));
                 return model
                     .forward_from(layer_for_index(model, layer_index), tensor_from_array(repr),
                                   ctx ? &*ctx : nullptr)
                     .scores;
             },
             py::arg("layer_index"), py::arg("representation"), py::arg("image") = py::none())
        .def("grad_at",
             [](const Model& model, int layer_index,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& repr,
                int class_index, const py::object& image) {
                 std::optional<Tensor> ctx;
                 if (!image.is_none())
                     ctx = tensor_from_array(
                         py::cast<py::array_t<double,
                                              py::array::c_style | py::array::forcecast>>(image));
                 return array_from_tensor(model.grad_at(layer_for_index(model, layer_index),
                                                        tensor_from_array(repr), class_index,
                                                        ctx ? &*ctx : nullptr));
             },
             py::arg("layer_index"), py::arg("representation"), py::arg("class_index"),
             py::arg("image") = py::none());

    m.def("make_reference_model",
          [](const std::string& kind, std::uint64_t seed) {
              return make_reference_model(reference_kind_from_name(kind), seed);
          },
          py::arg("kind"), py::arg("seed") = 0);
    m.def("make_linear_model",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& weight,
             const std::vector<std::size_t>& input_shape) {
              return make_linear_model(tensor_from_array(weight), input_shape);
          },
          py::arg("weight"), py::arg("input_shape"));

    m.def("integrated_gradients",
          [](const ModelHandle& model,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             int class_index, int steps) {
              return integrated_gradients(*model, tensor_from_array(image), class_index,
                                          PathSpec{steps, CurveKind::linear},
                                          BaselineSpec::zero_spec());
          },
          py::arg("model"), py::arg("image"), py::arg("class_index"), py::arg("steps") = 10);

    m.def("layer_map",
          [](const ModelHandle& model,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             int class_index, int layer_index, int steps, const std::string& phi) {
              const Tensor input = tensor_from_array(image);
              const LayerId layer = layer_for_index(*model, layer_index);
              const PathSpec path{steps, CurveKind::linear};
              if (layer.kind == SiteKind::attention) {
                  IntegrandSpec integrand;
                  integrand.phi = phi_from_name(phi);
                  if (integrand.phi == PhiKind::gradient_rollout)
                      integrand.rollout_config = RolloutConfig{};
                  return dix_layer_map_vit(*model, input, class_index, layer, path, integrand);
              }
              return dix_layer_map_cnn(*model, input, class_index, layer, path,
                                       BaselineSpec::channel_min_spec(),
                                       IntegrandSpec{phi_from_name(phi), std::nullopt});
          },
          py::arg("model"), py::arg("image"), py::arg("class_index"), py::arg("layer_index"),
          py::arg("steps") = 10, py::arg("phi") = "activation_times_gradient");

    m.def("preset_map",
          [](const ModelHandle& model,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             int class_index, const std::string& preset) {
              return compute_map(*model, tensor_from_array(image), class_index,
                                 resolve_preset(preset));
          },
          py::arg("model"), py::arg("image"), py::arg("class_index"), py::arg("preset") = "dix3");

    m.def("normalize_map", [](const ExplanationMap& map) { return normalize_map(map); },
          py::arg("map"));
    m.def("preset_names", &preset_names);

    auto rollout_config = [](bool add_identity, const py::object& normalize_rows,
                             const std::string& combine) {
        RolloutConfig cfg;
        cfg.add_identity = add_identity;
        if (!normalize_rows.is_none()) cfg.normalize_rows = py::cast<bool>(normalize_rows);
        if (combine == "summation") cfg.combine = CombineKind::summation;
        else if (combine != "product")
            throw configuration_error("combine must be 'product' or 'summation'");
        return cfg;
    };
    m.def("attention_rollout",
          [rollout_config](const py::iterable& blocks, bool add_identity,
                           const py::object& normalize_rows, const std::string& combine) {
              return array_from_tensor(
                  attention_rollout(tensors_from_list(blocks),
                                    rollout_config(add_identity, normalize_rows, combine))
                      .values);
          },
          py::arg("blocks"), py::arg("add_identity") = true,
          py::arg("normalize_rows") = py::none(), py::arg("combine") = "product");
    m.def("gradient_rollout",
          [rollout_config](const py::iterable& blocks, const py::iterable& gradients,
                           bool add_identity, const py::object& normalize_rows,
                           const std::string& combine) {
              return array_from_tensor(
                  gradient_rollout(tensors_from_list(blocks), tensors_from_list(gradients),
                                   rollout_config(add_identity, normalize_rows, combine))
                      .values);
          },
          py::arg("blocks"), py::arg("gradients"), py::arg("add_identity") = true,
          py::arg("normalize_rows") = py::none(), py::arg("combine") = "product");

    m.def("spearman",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
              const auto r = spearman(tensor_from_array(a), tensor_from_array(b));
              return py::make_tuple(r.rho, r.degenerate);
          },
          py::arg("a"), py::arg("b"));

    m.def("perturbation_auc",
          [](const ModelHandle& model,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             const ExplanationMap& map, const std::string& metric) {
              const auto [order, track] = perturbation_protocol(metric);
              return perturbation_curve(*model, tensor_from_array(image), map, order, track).auc;
          },
          py::arg("model"), py::arg("image"), py::arg("map"), py::arg("metric"));

    m.def("segmentation_scores",
          [](const ExplanationMap& map,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& mask) {
              const auto s = segmentation_scores(map, tensor_from_array(mask));
              py::dict out;
              out["pixel_accuracy"] = s.pixel_accuracy;
              out["mean_average_precision"] = s.mean_average_precision;
              out["mean_iou"] = s.mean_iou;
              out["mean_f1"] = s.mean_f1;
              return out;
          },
          py::arg("map"), py::arg("mask"));

    m.def("write_map", [](const std::string& path, const ExplanationMap& map) {
        write_map(path, map);
    });
    m.def("read_map", [](const std::string& path) { return read_map(path); });
}
