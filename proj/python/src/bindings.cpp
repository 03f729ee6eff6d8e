#include "softshadow/ao.hpp"
#include "softshadow/elm.hpp"
#include "softshadow/errors.hpp"
#include "softshadow/mesh.hpp"
#include "softshadow/metrics.hpp"
#include "softshadow/oracle.hpp"
#include "softshadow/scene.hpp"
#include "softshadow/shadow_bases.hpp"
#include "softshadow/transform.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <variant>

namespace py = pybind11;
namespace ss = softshadow;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Array to_numpy(const ss::ImageBuffer& img)
{
    Array out({img.height(), img.width()});
    std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
    return out;
}

ss::ImageBuffer from_numpy(const Array& a)
{
    if (a.ndim() != 2) {
        throw ss::InvalidParameterError("expected a 2-D float array");
    }
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    return ss::ImageBuffer(w, h, std::vector<float>(a.data(), a.data() + a.size()));
}

ss::ShadowDomain domain_of(const std::string& name)
{
    return ss::parse_domain(name);
}

/// Light maps cross the boundary either as ELM JSON text or as a panorama raster.
using LightInput = std::variant<std::string, Array>;

ss::ImageBuffer raster_of(const LightInput& light)
{
    if (const auto* text = std::get_if<std::string>(&light)) {
        return ss::rasterize_elm(ss::parse_elm(*text));
    }
    return from_numpy(std::get<Array>(light));
}

ss::CameraPose pose_from(double yaw, double pitch, int size)
{
    ss::CameraPose pose;
    pose.yaw = yaw;
    pose.pitch = pitch;
    pose.width = size;
    pose.height = size;
    return pose;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "softshadow core bindings";

    py::register_exception<ss::Error>(m, "SoftShadowError", PyExc_ValueError);

    py::class_<ss::Mesh>(m, "Mesh")
        .def_property_readonly("triangle_count", &ss::Mesh::triangle_count)
        .def_property_readonly("vertex_count", [](const ss::Mesh& mesh) { return mesh.vertices().size(); })
        .def("normalized", [](const ss::Mesh& mesh) { return ss::normalize(mesh); })
        .def("to_obj", &ss::to_obj);

    m.def("load_mesh", [](const std::string& path) { return ss::normalize(ss::load_mesh(path)); },
          py::arg("path"), "Loads an OBJ file and normalizes it.");
    m.def("parse_obj", [](const std::string& text) { return ss::normalize(ss::parse_obj(std::string_view(text))); },
          py::arg("text"), "Parses OBJ text and normalizes it.");

    py::class_<ss::CameraPose>(m, "CameraPose")
        .def(py::init(&pose_from), py::arg("yaw") = 0.0, py::arg("pitch") = 0.0, py::arg("size") = 256)
        .def_readwrite("yaw", &ss::CameraPose::yaw)
        .def_readwrite("pitch", &ss::CameraPose::pitch)
        .def_readwrite("fov_y", &ss::CameraPose::fov_y)
        .def_readwrite("width", &ss::CameraPose::width)
        .def_readwrite("height", &ss::CameraPose::height);

    py::class_<ss::ShadowBasisSet, std::shared_ptr<ss::ShadowBasisSet>>(m, "ShadowBases")
        .def_property_readonly("width", &ss::ShadowBasisSet::width)
        .def_property_readonly("height", &ss::ShadowBasisSet::height)
        .def_property_readonly("rows", [](const ss::ShadowBasisSet& b) { return b.geometry().rows; })
        .def_property_readonly("cols", [](const ss::ShadowBasisSet& b) { return b.geometry().cols; })
        .def_property_readonly("patch", [](const ss::ShadowBasisSet& b) { return b.geometry().patch; })
        .def("basis", [](const ss::ShadowBasisSet& b, int row, int col) { return to_numpy(b.basis_image(row, col)); },
             py::arg("row"), py::arg("col"))
        .def("to_bytes", [](const ss::ShadowBasisSet& b) { return py::bytes(ss::encode_ssbb(b)); })
        .def_static("from_bytes", [](const py::bytes& data) {
            return std::make_shared<ss::ShadowBasisSet>(ss::decode_ssbb(std::string(data)));
        });

    m.def("read_ssbb", [](const std::string& path) { return std::make_shared<ss::ShadowBasisSet>(ss::read_ssbb(path)); },
          py::arg("path"));

    m.def(
        "build_bases",
        [](const ss::Mesh& mesh, const ss::CameraPose& pose) {
            py::gil_scoped_release release;
            return std::make_shared<ss::ShadowBasisSet>(ss::build_bases(mesh, pose, ss::resting_ground(mesh)));
        },
        py::arg("mesh"), py::arg("pose"), "Builds the shadow basis set for a mesh resting on the ground.");

    m.def(
        "compose",
        [](const ss::ShadowBasisSet& bases, const LightInput& light, const std::string& domain) {
            const ss::ImageBuffer raster = raster_of(light);
            ss::ShadowMap s = ss::compose(bases, raster);
            if (domain_of(domain) == ss::ShadowDomain::Radiance) {
                s = ss::to_radiance(s, raster, bases.geometry());
            }
            return to_numpy(s.pixels);
        },
        py::arg("bases"), py::arg("light"), py::arg("domain") = "inverse",
        "Composes a shadow from ELM JSON text or a 512x256 panorama.");

    m.def(
        "to_radiance",
        [](const Array& inverse, const LightInput& light) {
            return to_numpy(ss::to_radiance({from_numpy(inverse), ss::ShadowDomain::Inverse}, raster_of(light)).pixels);
        },
        py::arg("inverse"), py::arg("light"));

    m.def(
        "render_oracle",
        [](const ss::Mesh& mesh, const ss::CameraPose& pose, const std::string& elm_json) {
            const ss::EnvLightMap elm = ss::parse_elm(elm_json);
            ss::ShadowMap s;
            {
                py::gil_scoped_release release;
                s = ss::render_oracle(mesh, pose, ss::resting_ground(mesh), elm);
            }
            return to_numpy(s.pixels);
        },
        py::arg("mesh"), py::arg("pose"), py::arg("elm"));

    m.def(
        "sample_elm",
        [](std::uint64_t seed, double min_sigma2) {
            ss::ElmSampling ranges;
            ranges.min_sigma2 = min_sigma2;
            return ss::dump_elm(ss::sample_elm(seed, ranges));
        },
        py::arg("seed"), py::arg("min_sigma2") = ss::ElmSampling{}.min_sigma2, "Returns ELM JSON text.");
    m.def("rasterize_elm", [](const std::string& elm_json) { return to_numpy(ss::rasterize_elm(ss::parse_elm(elm_json))); },
          py::arg("elm"));

    m.def(
        "render_mask",
        [](const ss::Mesh& mesh, const ss::CameraPose& pose) { return to_numpy(ss::render_mask(mesh, pose)); },
        py::arg("mesh"), py::arg("pose"));
    m.def(
        "compute_ao",
        [](const ss::Mesh& mesh, const ss::CameraPose& pose, int spp, std::uint64_t seed) {
            ss::AOMap ao;
            {
                py::gil_scoped_release release;
                ao = ss::compute_ao(mesh, pose, ss::resting_ground(mesh), spp, seed);
            }
            return to_numpy(ao.pixels);
        },
        py::arg("mesh"), py::arg("pose"), py::arg("spp") = ss::kDefaultSpp, py::arg("seed") = 0);
    m.def(
        "perturb_ao",
        [](const Array& ao, std::uint64_t seed) { return to_numpy(ss::perturb_ao({from_numpy(ao), 0}, seed).pixels); },
        py::arg("ao"), py::arg("seed"));
    m.def("boost_ao", &ss::boost_ao, py::arg("visibility"));

    m.def(
        "invert_shadow",
        [](const Array& s, std::optional<float> reference) {
            const ss::ImageBuffer img = from_numpy(s);
            return to_numpy(reference ? ss::invert_shadow(img, *reference) : ss::invert_shadow(img));
        },
        py::arg("s"), py::arg("reference") = py::none());

    m.def("rmse", [](const Array& a, const Array& b) { return ss::rmse(from_numpy(a), from_numpy(b)); });
    m.def("rmse_s", [](const Array& pred, const Array& gt) { return ss::rmse_s(from_numpy(pred), from_numpy(gt)); });
    m.def("zncc", [](const Array& a, const Array& b) { return ss::zncc(from_numpy(a), from_numpy(b)); });
    m.def("dssim", [](const Array& a, const Array& b) { return ss::dssim(from_numpy(a), from_numpy(b)); });
}
