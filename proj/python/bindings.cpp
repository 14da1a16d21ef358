#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qdmr/codec.hpp"
#include "qdmr/coding.hpp"
#include "qdmr/gradients.hpp"
#include "qdmr/nifti.hpp"
#include "qdmr/qspace.hpp"

namespace py = pybind11;

namespace {

using qdmr::CodecOptions;
using qdmr::DwiDataset;

CodecOptions make_options(const std::string& qspace, const std::string& order,
                          const std::string& motion, double lambda,
                          int threads, double b0_threshold, bool spatial_only) {
  CodecOptions options;
  if (qspace == "lh") {
    options.qspace = qdmr::Predictor::LaplaceBeltrami;
  } else if (qspace == "bh") {
    options.qspace = qdmr::Predictor::Biharmonic;
  } else if (qspace == "dti") {
    options.qspace = qdmr::Predictor::Dti;
  } else {
    throw qdmr::Error("qspace must be 'lh', 'bh', or 'dti'");
  }
  if (order == "furthest") {
    options.order = qdmr::OrderingStrategy::Furthest;
  } else if (order == "closest") {
    options.order = qdmr::OrderingStrategy::Closest;
  } else if (order == "original") {
    options.order = qdmr::OrderingStrategy::Original;
  } else {
    throw qdmr::Error("order must be 'furthest', 'closest', or 'original'");
  }
  if (motion == "off") {
    options.motion = qdmr::MotionMode::Off;
  } else if (motion == "builtin") {
    options.motion = qdmr::MotionMode::Builtin;
  } else {
    throw qdmr::Error("motion must be 'off' or 'builtin'");
  }
  options.eed.lambda = static_cast<float>(lambda);
  options.threads = threads;
  options.b0_threshold = b0_threshold;
  options.spatial_only = spatial_only;
  return options;
}

// Volumes travel as (nvol, nz, ny, nx) uint16 arrays; C order matches the
// codec's x-fastest layout per volume.
DwiDataset dataset_from_arrays(
    py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast> volumes,
    py::array_t<double, py::array::c_style | py::array::forcecast> bvals,
    py::array_t<double, py::array::c_style | py::array::forcecast> bvecs) {
  if (volumes.ndim() != 4) throw qdmr::Error("volumes must be 4D (v, z, y, x)");
  int nvol = static_cast<int>(volumes.shape(0));
  qdmr::Dims3 dims{static_cast<int>(volumes.shape(3)),
                   static_cast<int>(volumes.shape(2)),
                   static_cast<int>(volumes.shape(1))};
  if (bvals.ndim() != 1 || bvals.shape(0) != nvol) {
    throw qdmr::Error("bvals must be 1D with one entry per volume");
  }
  if (bvecs.ndim() != 2 || bvecs.shape(0) != nvol || bvecs.shape(1) != 3) {
    throw qdmr::Error("bvecs must have shape (nvol, 3)");
  }

  DwiDataset dataset;
  dataset.header = qdmr::make_nifti_header(dims, nvol);
  std::size_t nvox = dims.voxel_count();
  const std::uint16_t* data = volumes.data();
  for (int v = 0; v < nvol; ++v) {
    qdmr::Volume vol(dims);
    std::copy(data + static_cast<std::size_t>(v) * nvox,
              data + static_cast<std::size_t>(v + 1) * nvox,
              vol.samples.begin());
    dataset.volumes.push_back(std::move(vol));
  }
  std::vector<double> bv(bvals.data(), bvals.data() + nvol);
  std::vector<std::array<double, 3>> gv(static_cast<std::size_t>(nvol));
  for (int i = 0; i < nvol; ++i) {
    for (int c = 0; c < 3; ++c) {
      gv[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
          bvecs.data()[i * 3 + c];
    }
  }
  dataset.bval_text = qdmr::render_bvals(bv);
  dataset.bvec_text = qdmr::render_bvecs(gv);
  return dataset;
}

py::tuple dataset_to_arrays(const DwiDataset& dataset) {
  qdmr::Dims3 dims = dataset.header.dims;
  std::size_t nvox = dims.voxel_count();
  std::size_t nvol = dataset.volumes.size();
  py::array_t<std::uint16_t> volumes(
      {nvol, static_cast<std::size_t>(dims.nz),
       static_cast<std::size_t>(dims.ny), static_cast<std::size_t>(dims.nx)});
  auto out = volumes.mutable_data();
  for (std::size_t v = 0; v < nvol; ++v) {
    std::copy(dataset.volumes[v].samples.begin(),
              dataset.volumes[v].samples.end(), out + v * nvox);
  }
  std::vector<double> bvals = qdmr::parse_bvals(dataset.bval_text);
  auto bvecs = qdmr::parse_bvecs(dataset.bvec_text);
  py::array_t<double> bvals_arr(static_cast<py::ssize_t>(bvals.size()));
  std::copy(bvals.begin(), bvals.end(), bvals_arr.mutable_data());
  py::array_t<double> bvecs_arr({bvecs.size(), std::size_t{3}});
  for (std::size_t i = 0; i < bvecs.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      bvecs_arr.mutable_data()[i * 3 + c] = bvecs[i][c];
    }
  }
  return py::make_tuple(volumes, bvals_arr, bvecs_arr);
}

py::bytes compress_arrays(py::array volumes, py::array bvals, py::array bvecs,
                          const std::string& qspace, const std::string& order,
                          const std::string& motion, double lambda,
                          int threads, double b0_threshold,
                          bool spatial_only) {
  DwiDataset dataset = dataset_from_arrays(volumes, bvals, bvecs);
  qdmr::Container container =
      qdmr::compress(dataset, make_options(qspace, order, motion, lambda,
                                           threads, b0_threshold,
                                           spatial_only));
  auto bytes = qdmr::serialize_container(container);
  return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

py::tuple decompress_bytes(py::bytes blob) {
  std::string_view view = blob;
  qdmr::Container container = qdmr::parse_container(std::span(
      reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
  return dataset_to_arrays(qdmr::decompress(container));
}

py::dict stats_bytes(py::bytes blob) {
  std::string_view view = blob;
  qdmr::Container container = qdmr::parse_container(std::span(
      reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
  qdmr::StatsReport report = qdmr::stats(container);
  py::dict out;
  out["file_size"] = report.file_size;
  out["overhead_bytes"] = report.overhead_bytes;
  out["qspace_records"] = report.qspace_records;
  out["spatial_records"] = report.spatial_records;
  out["spatial_dwi_records"] = report.spatial_dwi_records;
  out["b0diff_records"] = report.b0diff_records;
  py::list records;
  for (const auto& r : report.records) {
    py::dict rec;
    rec["position"] = r.coding_position;
    rec["volume"] = r.original_index;
    rec["kind"] = r.kind == qdmr::RecordKind::Spatial   ? "spatial"
                  : r.kind == qdmr::RecordKind::Qspace ? "qspace"
                                                       : "b0diff";
    rec["shell"] = r.shell;
    rec["bytes"] = r.bytes;
    records.append(rec);
  }
  out["records"] = records;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lossless diffusion-MRI compression (image-space and q-space "
            "PDE prediction with entropy-coded residuals)";

  m.def("compress", &compress_arrays, py::arg("volumes"), py::arg("bvals"),
        py::arg("bvecs"), py::kw_only(), py::arg("qspace") = "lh",
        py::arg("order") = "furthest", py::arg("motion") = "off",
        py::arg("lam") = 8.0, py::arg("threads") = 0,
        py::arg("b0_threshold") = 50.0, py::arg("spatial_only") = false,
        "Compress a (nvol, nz, ny, nx) uint16 stack; returns the container "
        "bytes.");
  m.def("decompress", &decompress_bytes, py::arg("data"),
        "Decompress container bytes; returns (volumes, bvals, bvecs).");
  m.def("stats", &stats_bytes, py::arg("data"),
        "Per-record sizes and the coding split of a container.");

  m.def(
      "order_volumes",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> dirs,
         const std::string& strategy, int start) {
        if (dirs.ndim() != 2 || dirs.shape(1) != 3) {
          throw qdmr::Error("directions must have shape (n, 3)");
        }
        std::vector<std::array<double, 3>> gv(
            static_cast<std::size_t>(dirs.shape(0)));
        for (py::ssize_t i = 0; i < dirs.shape(0); ++i) {
          for (py::ssize_t c = 0; c < 3; ++c) {
            gv[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
                dirs.data()[i * 3 + c];
          }
        }
        qdmr::OrderingStrategy s =
            strategy == "furthest" ? qdmr::OrderingStrategy::Furthest
            : strategy == "closest" ? qdmr::OrderingStrategy::Closest
                                    : qdmr::OrderingStrategy::Original;
        return qdmr::order_volumes(gv, s, start);
      },
      py::arg("directions"), py::arg("strategy") = "furthest",
      py::arg("start") = 0, "Greedy DWI coding order over directions.");

  py::register_exception<qdmr::Error>(m, "QdmrError");
}
