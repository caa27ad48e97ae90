#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hdrsplat/commands.hpp"
#include "hdrsplat/datagen.hpp"
#include "hdrsplat/errors.hpp"
#include "hdrsplat/metrics.hpp"
#include "hdrsplat/photometric.hpp"
#include "hdrsplat/rasterizer.hpp"
#include "hdrsplat/scene.hpp"
#include "hdrsplat/ssim.hpp"

namespace py = pybind11;
using namespace hdrsplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class Tag>
Array to_numpy(const Image<Tag>& img) {
  Array out({img.height(), img.width(), 3});
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

template <class Tag>
Image<Tag> from_numpy(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("expected an (H, W, 3) array");
  Image<Tag> img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.values().begin());
  return img;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "hdrsplat");
  std::vector<char*> argv;
  for (auto& s : args) argv.push_back(s.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HDR Gaussian splatting core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  const auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<ParseError>(m, "ParseError", data_error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def_readonly("width", &CameraIntrinsics::width)
      .def_readonly("height", &CameraIntrinsics::height)
      .def_readonly("fx", &CameraIntrinsics::fx)
      .def_readonly("fy", &CameraIntrinsics::fy)
      .def_readonly("cx", &CameraIntrinsics::cx)
      .def_readonly("cy", &CameraIntrinsics::cy);

  py::class_<CameraView>(m, "CameraView")
      .def_readonly("id", &CameraView::id)
      .def_readonly("intrinsics", &CameraView::intrinsics)
      .def_readonly("exposure", &CameraView::exposure)
      .def_readonly("gamma", &CameraView::gamma)
      .def_property_readonly("observation", [](const CameraView& v) -> py::object {
        if (v.observation.empty()) return py::none();
        return to_numpy(v.observation);
      });

  py::class_<Scene>(m, "Scene")
      .def_readonly("sh_degree", &Scene::sh_degree)
      .def_property_readonly("gaussian_count", [](const Scene& s) { return s.gaussians.size(); })
      .def_readonly("views", &Scene::views)
      .def("save", [](const Scene& s, const std::filesystem::path& p) { save_scene(s, p); });

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def(
      "load_dataset",
      [](const std::filesystem::path& manifest, bool ground_truth) {
        return load_dataset(manifest,
                            ground_truth ? DatasetSplit::kGroundTruth : DatasetSplit::kObserved);
      },
      py::arg("manifest"), py::arg("ground_truth") = false);

  m.def(
      "render_hdr",
      [](const Scene& s, int view_id) { return to_numpy(render_hdr(s, s.view_by_id(view_id))); },
      py::arg("scene"), py::arg("view_id"), "linear radiance as an (H, W, 3) array");
  m.def(
      "form_ldr",
      [](const Array& hdr, double exposure, double gamma) {
        return to_numpy(form_ldr(from_numpy<LinearRadianceTag>(hdr), {exposure, gamma}));
      },
      py::arg("hdr"), py::arg("exposure") = 1.0, py::arg("gamma") = kSrgbGammaPrior);

  m.def(
      "psnr",
      [](const Array& a, const Array& b) {
        return psnr(from_numpy<ToneMappedTag>(a), from_numpy<ToneMappedTag>(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "ssim",
      [](const Array& a, const Array& b) {
        return ssim(from_numpy<ToneMappedTag>(a), from_numpy<ToneMappedTag>(b));
      },
      py::arg("a"), py::arg("b"));
  m.def("delta_psnr", &delta_psnr, py::arg("psnr_hard"), py::arg("psnr_easy"));
  m.def("intrinsics_from_fov", &intrinsics_from_fov, py::arg("width"), py::arg("height"),
        py::arg("hfov_deg"));
  m.def(
      "sample_iso",
      [](bool variable, double mean, double std, int floor, std::uint64_t seed, int frame,
         int camera) {
        ExposurePolicy p;
        p.mode = variable ? ExposureMode::kVar : ExposureMode::kConst;
        p.iso_mean = mean;
        p.iso_std = std;
        p.iso_floor = floor;
        p.seed = seed;
        return sample_iso(p, frame, camera);
      },
      py::arg("variable"), py::arg("mean"), py::arg("std"), py::arg("floor"), py::arg("seed"),
      py::arg("frame"), py::arg("camera"));

  m.def("run_cli", &run, py::arg("args"), "runs the command line, returns the exit code");
}
