#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "qdmr/codec.hpp"
#include "qdmr/coding.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitVerify = 3;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw qdmr::Error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::string& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qdmr::Error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw qdmr::Error("short write to " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()),
                       text.size()));
}

struct CodecFlags {
  std::string qspace = "lh";
  std::string order = "furthest";
  std::string motion = "off";
  double lambda = 8.0;
  int threads = 0;
  double b0_threshold = 50.0;
  int dti_split = 0;
  bool spatial_only = false;
};

void add_codec_flags(CLI::App* cmd, CodecFlags& flags) {
  cmd->add_option("--qspace", flags.qspace, "q-space predictor")
      ->check(CLI::IsMember({"lh", "bh", "dti"}))
      ->capture_default_str();
  cmd->add_option("--order", flags.order, "DWI coding order strategy")
      ->check(CLI::IsMember({"furthest", "closest", "original"}))
      ->capture_default_str();
  cmd->add_option("--motion", flags.motion,
                  "motion compensation: off, builtin, or import:<dir>")
      ->capture_default_str();
  cmd->add_option("--lambda", flags.lambda, "EED contrast parameter")
      ->capture_default_str();
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)")
      ->capture_default_str();
  cmd->add_option("--b0-threshold", flags.b0_threshold,
                  "b-values at or below this are treated as b=0")
      ->capture_default_str();
  cmd->add_option("--dti-split", flags.dti_split,
                  "spatially coded DWIs before DTI takes over (>= 7)");
  cmd->add_flag("--spatial-only", flags.spatial_only,
                "baseline mode: code every volume with the spatial codec");
}

qdmr::CodecOptions to_options(const CodecFlags& flags, std::size_t nvol) {
  qdmr::CodecOptions options;
  if (flags.qspace == "lh") {
    options.qspace = qdmr::Predictor::LaplaceBeltrami;
  } else if (flags.qspace == "bh") {
    options.qspace = qdmr::Predictor::Biharmonic;
  } else {
    options.qspace = qdmr::Predictor::Dti;
  }
  if (flags.order == "furthest") {
    options.order = qdmr::OrderingStrategy::Furthest;
  } else if (flags.order == "closest") {
    options.order = qdmr::OrderingStrategy::Closest;
  } else {
    options.order = qdmr::OrderingStrategy::Original;
  }
  if (flags.motion == "off") {
    options.motion = qdmr::MotionMode::Off;
  } else if (flags.motion == "builtin") {
    options.motion = qdmr::MotionMode::Builtin;
  } else if (flags.motion.rfind("import:", 0) == 0) {
    options.motion = qdmr::MotionMode::Import;
    std::string dir = flags.motion.substr(7);
    for (std::size_t i = 0; i < nvol; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "vol%04zu.mat", i);
      options.imported_transforms.push_back(qdmr::read_affine_ascii(
          read_text_file((std::filesystem::path(dir) / name).string())));
    }
  } else {
    throw CLI::ValidationError("--motion must be off, builtin, or import:<dir>");
  }
  options.eed.lambda = static_cast<float>(flags.lambda);
  options.threads = flags.threads;
  options.b0_threshold = flags.b0_threshold;
  if (flags.dti_split > 0) options.dti_split = flags.dti_split;
  options.spatial_only = flags.spatial_only;
  return options;
}

const char* kind_name(qdmr::RecordKind kind) {
  switch (kind) {
    case qdmr::RecordKind::Spatial: return "spatial";
    case qdmr::RecordKind::Qspace: return "qspace";
    case qdmr::RecordKind::B0Diff: return "b0diff";
  }
  return "?";
}

const char* predictor_name(const qdmr::RecordStat& r) {
  if (r.kind == qdmr::RecordKind::Spatial) return "eed";
  switch (r.predictor) {
    case qdmr::Predictor::LaplaceBeltrami: return "lh";
    case qdmr::Predictor::Biharmonic: return "bh";
    case qdmr::Predictor::Dti: return "dti";
    case qdmr::Predictor::B0Reference: return "b0ref";
  }
  return "?";
}

void print_stats(const qdmr::StatsReport& report, bool as_json) {
  if (as_json) {
    json j;
    j["file_size"] = report.file_size;
    j["overhead_bytes"] = report.overhead_bytes;
    j["split"] = {{"qspace", report.qspace_records},
                  {"spatial_dwi", report.spatial_dwi_records},
                  {"spatial_total", report.spatial_records},
                  {"b0diff", report.b0diff_records}};
    j["records"] = json::array();
    for (const auto& r : report.records) {
      j["records"].push_back({{"position", r.coding_position},
                              {"volume", r.original_index},
                              {"kind", kind_name(r.kind)},
                              {"predictor", predictor_name(r)},
                              {"shell", r.shell},
                              {"bytes", r.bytes}});
    }
    if (report.raw_size) {
      j["raw_size"] = *report.raw_size;
      j["raw_deflate_size"] = *report.raw_deflate_size;
      j["ratio_vs_deflate"] = static_cast<double>(report.file_size) /
                              static_cast<double>(*report.raw_deflate_size);
    }
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::cout << "file_size=" << report.file_size << "\n"
            << "overhead_bytes=" << report.overhead_bytes << "\n"
            << "split_qspace=" << report.qspace_records << "\n"
            << "split_spatial_dwi=" << report.spatial_dwi_records << "\n"
            << "split_spatial_total=" << report.spatial_records << "\n"
            << "split_b0diff=" << report.b0diff_records << "\n";
  for (const auto& r : report.records) {
    std::cout << "record_" << r.coding_position << "=volume:"
              << r.original_index << " kind:" << kind_name(r.kind)
              << " predictor:" << predictor_name(r) << " shell:" << r.shell
              << " bytes:" << r.bytes << "\n";
  }
  if (report.raw_size) {
    double ratio = static_cast<double>(report.file_size) /
                   static_cast<double>(*report.raw_deflate_size);
    std::cout << "raw_size=" << *report.raw_size << "\n"
              << "raw_deflate_size=" << *report.raw_deflate_size << "\n"
              << "ratio_vs_deflate=" << ratio << "\n"
              << "savings_vs_deflate_percent=" << (1.0 - ratio) * 100.0
              << "\n";
  }
}

qdmr::DwiDataset load_dataset(const std::string& image,
                              const std::string& bval,
                              const std::string& bvec,
                              std::vector<std::uint8_t>* raw_out = nullptr) {
  auto bytes = read_file(image);
  qdmr::NiftiFile nifti = qdmr::read_nifti(bytes);
  qdmr::DwiDataset dataset;
  dataset.header = nifti.header;
  dataset.volumes = std::move(nifti.volumes);
  dataset.bval_text = read_text_file(bval);
  dataset.bvec_text = read_text_file(bvec);
  if (raw_out != nullptr) {
    // Stats compare against the uncompressed NIfTI byte stream.
    *raw_out = qdmr::coding::looks_gzipped(bytes)
                   ? qdmr::coding::gunzip_bytes(bytes)
                   : std::move(bytes);
  }
  return dataset;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdmr: lossless diffusion-MRI compression"};
  app.require_subcommand(1);

  std::string image, bval, bvec, output, container_path, prefix;
  bool as_json = false;
  CodecFlags flags;

  CLI::App* compress = app.add_subcommand("compress", "compress a dMRI dataset");
  compress->add_option("image", image, "NIfTI image (.nii or .nii.gz)")->required();
  compress->add_option("--bval", bval, "b-value file")->required();
  compress->add_option("--bvec", bvec, "gradient direction file")->required();
  compress->add_option("-o,--output", output, "output container")->required();
  compress->add_flag("--json", as_json, "machine-readable stats");
  add_codec_flags(compress, flags);

  CLI::App* decompress = app.add_subcommand("decompress", "restore a dataset");
  decompress->add_option("container", container_path, "compressed container")->required();
  decompress->add_option("-o,--output", prefix, "output prefix")->required();

  CLI::App* inspect = app.add_subcommand("inspect", "print container records");
  inspect->add_option("container", container_path, "compressed container")->required();
  inspect->add_flag("--json", as_json, "machine-readable output");

  CLI::App* verify = app.add_subcommand(
      "verify", "compress, decompress in memory, and compare byte-exactly");
  verify->add_option("image", image, "NIfTI image")->required();
  verify->add_option("--bval", bval, "b-value file")->required();
  verify->add_option("--bvec", bvec, "gradient direction file")->required();
  add_codec_flags(verify, flags);

  CLI::App* bench = app.add_subcommand(
      "bench", "compress and compare against DEFLATE of the raw file");
  bench->add_option("image", image, "NIfTI image")->required();
  bench->add_option("--bval", bval, "b-value file")->required();
  bench->add_option("--bvec", bvec, "gradient direction file")->required();
  bench->add_flag("--json", as_json, "machine-readable output");
  add_codec_flags(bench, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (compress->parsed()) {
      std::vector<std::uint8_t> raw;
      qdmr::DwiDataset dataset = load_dataset(image, bval, bvec, &raw);
      qdmr::Container container =
          qdmr::compress(dataset, to_options(flags, dataset.volumes.size()));
      auto bytes = qdmr::serialize_container(container);
      write_file(output, bytes);
      print_stats(qdmr::stats(container, &raw), as_json);
    } else if (decompress->parsed()) {
      qdmr::Container container = qdmr::parse_container(read_file(container_path));
      qdmr::DwiDataset dataset = qdmr::decompress(container);
      write_file(prefix + ".nii",
                 qdmr::write_nifti(dataset.header, dataset.volumes));
      write_text_file(prefix + ".bval", dataset.bval_text);
      write_text_file(prefix + ".bvec", dataset.bvec_text);
    } else if (inspect->parsed()) {
      qdmr::Container container = qdmr::parse_container(read_file(container_path));
      print_stats(qdmr::stats(container), as_json);
    } else if (verify->parsed()) {
      std::vector<std::uint8_t> raw;
      qdmr::DwiDataset dataset = load_dataset(image, bval, bvec, &raw);
      qdmr::Container container =
          qdmr::compress(dataset, to_options(flags, dataset.volumes.size()));
      qdmr::Container parsed =
          qdmr::parse_container(qdmr::serialize_container(container));
      qdmr::DwiDataset restored = qdmr::decompress(parsed);
      bool ok = qdmr::write_nifti(restored.header, restored.volumes) == raw &&
                restored.bval_text == dataset.bval_text &&
                restored.bvec_text == dataset.bvec_text;
      std::cout << (ok ? "PASS" : "FAIL") << "\n";
      if (!ok) return kExitVerify;
    } else if (bench->parsed()) {
      std::vector<std::uint8_t> raw;
      qdmr::DwiDataset dataset = load_dataset(image, bval, bvec, &raw);
      qdmr::Container container =
          qdmr::compress(dataset, to_options(flags, dataset.volumes.size()));
      print_stats(qdmr::stats(container, &raw), as_json);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
