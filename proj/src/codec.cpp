#include "qdmr/codec.hpp"

#include <algorithm>
#include <cmath>

#include "qdmr/coding.hpp"
#include "qdmr/dti.hpp"
#include "qdmr/motion.hpp"
#include "qdmr/spatial_codec.hpp"

namespace qdmr {

namespace {

// Everything both codec directions need to derive predictions. The encoder
// passes original volumes, the decoder passes decoded ones; losslessness
// makes them equal, and sharing one code path is what guarantees
// bit-identical replay.
struct PredictionContext {
  Dims3 dims;
  const std::vector<std::array<double, 3>>* bvecs = nullptr;
  const std::vector<AffineTransform>* transforms = nullptr;  // null if off
  int b0_reference = -1;
  int threads = 1;

  bool motion() const { return transforms != nullptr; }

  // Pull-back for resampling `source` onto `target`'s grid: the inverse of
  // the source-to-target map inv(T_target) * T_source.
  AffineTransform pullback_into(int target, int source) const {
    return multiply(invert((*transforms)[static_cast<std::size_t>(source)]),
                    (*transforms)[static_cast<std::size_t>(target)]);
  }

  Volume resampled_into(const Volume& source_vol, int target, int source) const {
    std::vector<double> real =
        resample(source_vol, pullback_into(target, source), threads);
    Volume out(dims);
    for (std::size_t i = 0; i < real.size(); ++i) {
      out.samples[i] = quantize_prediction(real[i], 0, 0xFFFF);
    }
    return out;
  }

  std::array<double, 3> reoriented_direction(int known, int target) const {
    return reorient_gradient(
        (*bvecs)[static_cast<std::size_t>(known)],
        compose_to_target((*transforms)[static_cast<std::size_t>(known)],
                          (*transforms)[static_cast<std::size_t>(target)]));
  }
};

Volume predict_b0diff(const PredictionContext& ctx, const Volume& b0_decoded,
                      int target, std::uint16_t lo, std::uint16_t hi) {
  Volume pred(ctx.dims);
  if (ctx.motion()) {
    std::vector<double> real = resample(
        b0_decoded, ctx.pullback_into(target, ctx.b0_reference), ctx.threads);
    for (std::size_t i = 0; i < real.size(); ++i) {
      pred.samples[i] = quantize_prediction(real[i], lo, hi);
    }
  } else {
    for (std::size_t i = 0; i < pred.samples.size(); ++i) {
      pred.samples[i] = quantize_prediction(
          static_cast<double>(b0_decoded.samples[i]), lo, hi);
    }
  }
  return pred;
}

// q-space PDE prediction of `target` from the previously coded DWIs of its
// shell (`known_indices` in coding order, volumes decoded).
Volume predict_qspace_pde(const PredictionContext& ctx,
                          const std::vector<const Volume*>& known_volumes,
                          const std::vector<int>& known_indices, int target,
                          QspacePde pde, const std::vector<int>& shell_members,
                          std::uint16_t lo, std::uint16_t hi) {
  std::size_t n = known_indices.size();

  if (ctx.motion()) {
    // Per-target mesh over the reoriented known directions plus the target;
    // known volumes are resampled into the target's space first.
    std::vector<Volume> resampled;
    resampled.reserve(n);
    std::vector<const Volume*> vols(n);
    std::vector<std::array<double, 3>> dirs;
    dirs.reserve(n + 1);
    for (std::size_t j = 0; j < n; ++j) {
      resampled.push_back(
          ctx.resampled_into(*known_volumes[j], target, known_indices[j]));
      dirs.push_back(ctx.reoriented_direction(known_indices[j], target));
    }
    for (std::size_t j = 0; j < n; ++j) vols[j] = &resampled[j];
    dirs.push_back((*ctx.bvecs)[static_cast<std::size_t>(target)]);
    std::vector<int> known_channels(n);
    for (std::size_t j = 0; j < n; ++j) known_channels[j] = static_cast<int>(j);
    WeightMatrix w =
        compute_weights(dirs, known_channels, {static_cast<int>(n)}, pde);
    return predict_volume(vols, w.fixed_rows[0], lo, hi, ctx.threads);
  }

  // Static mesh over every direction of the shell; channels are positions in
  // the shell's acquisition-order member list.
  std::vector<std::array<double, 3>> dirs;
  dirs.reserve(shell_members.size());
  for (int member : shell_members) {
    dirs.push_back((*ctx.bvecs)[static_cast<std::size_t>(member)]);
  }
  auto channel_of = [&](int volume_index) {
    auto it =
        std::find(shell_members.begin(), shell_members.end(), volume_index);
    return static_cast<int>(it - shell_members.begin());
  };
  std::vector<int> known_channels(n);
  for (std::size_t j = 0; j < n; ++j) {
    known_channels[j] = channel_of(known_indices[j]);
  }
  WeightMatrix w =
      compute_weights(dirs, known_channels, {channel_of(target)}, pde);
  return predict_volume(known_volumes, w.fixed_rows[0], lo, hi, ctx.threads);
}

// DTI prediction: per-voxel least-squares fit over the known DWIs, with the
// decoded first b=0 volume as s0.
Volume predict_dti_volume(const PredictionContext& ctx,
                          const Volume& b0_decoded,
                          const std::vector<const Volume*>& known_volumes,
                          const std::vector<int>& known_indices, int target,
                          double shell_b, std::uint16_t lo, std::uint16_t hi) {
  std::size_t n = known_indices.size();

  Volume s0_resampled;
  std::vector<Volume> resampled;
  std::vector<const Volume*> vols(n);
  std::vector<std::array<double, 3>> dirs(n);
  if (ctx.motion()) {
    s0_resampled = ctx.resampled_into(b0_decoded, target, ctx.b0_reference);
    resampled.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      resampled.push_back(
          ctx.resampled_into(*known_volumes[j], target, known_indices[j]));
      dirs[j] = ctx.reoriented_direction(known_indices[j], target);
    }
    for (std::size_t j = 0; j < n; ++j) vols[j] = &resampled[j];
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      vols[j] = known_volumes[j];
      dirs[j] = (*ctx.bvecs)[static_cast<std::size_t>(known_indices[j])];
    }
  }
  const Volume& s0_src = ctx.motion() ? s0_resampled : b0_decoded;
  const std::array<double, 3>& target_dir =
      (*ctx.bvecs)[static_cast<std::size_t>(target)];

  DtiFitter fitter(dirs, shell_b);
  Volume pred(ctx.dims);
  parallel_for(ctx.dims.voxel_count(), ctx.threads,
               [&](std::size_t begin, std::size_t end) {
    std::vector<double> signals(n);
    for (std::size_t i = begin; i < end; ++i) {
      double s0 = std::max<double>(1.0, s0_src.samples[i]);
      for (std::size_t j = 0; j < n; ++j) {
        signals[j] = static_cast<double>(vols[j]->samples[i]);
      }
      DiffusionTensor tensor = fitter.fit(s0, signals);
      double value = predict_dti(tensor, s0, target_dir, shell_b);
      pred.samples[i] = quantize_prediction(value, lo, hi);
    }
  });
  return pred;
}

std::vector<std::uint8_t> build_qspace_record(
    const Volume& original, const Volume& prediction, Predictor predictor,
    int original_index) {
  auto [lo, hi] = value_range(original.samples);
  std::vector<std::uint16_t> residuals =
      coding::residuals_encode(original, prediction);
  coding::EncodedStream stream = coding::choose_stream(residuals);

  QspaceRecordHeader header;
  header.min_value = lo;
  header.max_value = hi;
  header.predictor = predictor;
  header.residual_coder = stream.coder;
  header.original_index = static_cast<std::uint16_t>(original_index);

  std::vector<std::uint8_t> payload;
  write_qspace_header(header, payload);
  payload.insert(payload.end(), stream.bytes.begin(), stream.bytes.end());
  return payload;
}

Volume decode_qspace_record(std::span<const std::uint8_t> payload,
                            const Volume& prediction) {
  QspaceRecordHeader header = read_qspace_header(payload);
  std::vector<std::uint16_t> residuals = coding::decode_stream(
      header.residual_coder, payload.subspan(kQspaceHeaderBytes),
      prediction.samples.size());
  return coding::residuals_apply(prediction, residuals);
}

std::vector<AffineTransform> pin_transforms_via_ascii(
    const std::vector<AffineTransform>& transforms,
    std::vector<std::string>& ascii_out) {
  // Encoder-side predictions must use the exact values the decoder will
  // parse back, so every transform takes a trip through its ASCII form.
  std::vector<AffineTransform> pinned;
  pinned.reserve(transforms.size());
  ascii_out.clear();
  for (const AffineTransform& t : transforms) {
    std::string text = write_affine_ascii(t);
    pinned.push_back(read_affine_ascii(text));
    ascii_out.push_back(std::move(text));
  }
  return pinned;
}

void check_shell_directions(const GradientTable& gradients) {
  double min_sep = kMinDirectionSeparationDeg * 3.14159265358979323846 / 180.0;
  for (const auto& shell : gradients.shells) {
    for (std::size_t i = 0; i < shell.size(); ++i) {
      for (std::size_t j = i + 1; j < shell.size(); ++j) {
        double angle = antipodal_angle(
            gradients.bvecs[static_cast<std::size_t>(shell[i])],
            gradients.bvecs[static_cast<std::size_t>(shell[j])]);
        if (angle <= min_sep) {
          throw Error("compress: duplicate gradient directions (volumes " +
                      std::to_string(shell[i]) + " and " +
                      std::to_string(shell[j]) + ")");
        }
      }
    }
  }
}

}  // namespace

Container compress(const DwiDataset& dataset, const CodecOptions& options) {
  int threads = resolve_thread_count(options.threads);
  std::size_t nvol = dataset.volumes.size();
  if (nvol == 0) throw Error("compress: no volumes");
  if (nvol > 0xFFFF) throw Error("compress: too many volumes");
  if (!options.eed.replayable_defaults()) {
    throw Error("compress: non-default EED parameters are not representable");
  }
  Dims3 dims = dataset.header.dims;
  for (const Volume& v : dataset.volumes) {
    if (v.dims != dims) throw Error("compress: volume dims mismatch");
  }

  GradientTable gradients = read_gradients(dataset.bval_text,
                                           dataset.bvec_text,
                                           options.b0_threshold);
  if (gradients.bvals.size() != nvol) {
    throw Error("compress: gradient count does not match volume count");
  }
  check_shell_directions(gradients);

  int b0_reference =
      gradients.b0_group.empty() ? -1 : gradients.b0_group.front();
  if (options.motion != MotionMode::Off && b0_reference < 0) {
    throw Error("compress: motion correction requires a b=0 volume");
  }
  if (options.qspace == Predictor::Dti && b0_reference < 0 &&
      !options.spatial_only) {
    throw Error("compress: DTI prediction requires a b=0 volume");
  }
  if (options.qspace == Predictor::B0Reference) {
    throw Error("compress: b0diff is not a selectable q-space predictor");
  }
  int dti_split = options.dti_split.value_or(7);
  if (options.qspace == Predictor::Dti && dti_split < 7) {
    throw Error("compress: DTI split must be at least 7");
  }

  Container container;
  container.nifti_header = dataset.header.raw;
  container.bval_text = dataset.bval_text;
  container.bvec_text = dataset.bvec_text;
  container.records.resize(nvol);

  std::vector<AffineTransform> transforms;
  if (options.motion == MotionMode::Builtin) {
    std::vector<AffineTransform> raw(nvol);
    for (std::size_t i = 0; i < nvol; ++i) {
      raw[i] = static_cast<int>(i) == b0_reference
                   ? AffineTransform::identity()
                   : register_affine(dataset.volumes[i],
                                     dataset.volumes[static_cast<std::size_t>(
                                         b0_reference)]);
    }
    transforms = pin_transforms_via_ascii(raw, container.affines);
    container.motion = true;
  } else if (options.motion == MotionMode::Import) {
    if (options.imported_transforms.size() != nvol) {
      throw Error("compress: need one imported transform per volume");
    }
    transforms =
        pin_transforms_via_ascii(options.imported_transforms, container.affines);
    container.motion = true;
  }

  PredictionContext ctx;
  ctx.dims = dims;
  ctx.bvecs = &gradients.bvecs;
  ctx.transforms = container.motion ? &transforms : nullptr;
  ctx.b0_reference = b0_reference;
  ctx.threads = threads;

  auto spatial_record = [&](int index) {
    return encode_volume_spatial(dataset.volumes[static_cast<std::size_t>(index)],
                                 options.eed, threads);
  };

  std::uint16_t position = 0;
  auto emit = [&](int index, RecordKind kind, std::vector<std::uint8_t> payload) {
    VolumeRecord& rec = container.records[static_cast<std::size_t>(index)];
    rec.kind = kind;
    rec.coding_position = position++;
    rec.payload = std::move(payload);
  };

  if (options.spatial_only) {
    container.has_b0_reference = false;
    for (std::size_t i = 0; i < nvol; ++i) {
      emit(static_cast<int>(i), RecordKind::Spatial,
           spatial_record(static_cast<int>(i)));
    }
    return container;
  }

  container.has_b0_reference = b0_reference >= 0;

  // (1) First b=0 volume through the spatial codec, (2) remaining b=0
  // volumes as modular differences against it.
  if (b0_reference >= 0) {
    emit(b0_reference, RecordKind::Spatial, spatial_record(b0_reference));
    const Volume& b0 = dataset.volumes[static_cast<std::size_t>(b0_reference)];
    for (int index : gradients.b0_group) {
      if (index == b0_reference) continue;
      const Volume& original = dataset.volumes[static_cast<std::size_t>(index)];
      auto [lo, hi] = value_range(original.samples);
      Volume pred = predict_b0diff(ctx, b0, index, lo, hi);
      std::vector<std::uint16_t> residuals =
          coding::residuals_encode(original, pred);
      coding::EncodedStream stream = coding::choose_stream(residuals);
      QspaceRecordHeader header;
      header.min_value = lo;
      header.max_value = hi;
      header.predictor = Predictor::B0Reference;
      header.residual_coder = stream.coder;
      header.original_index = static_cast<std::uint16_t>(index);
      std::vector<std::uint8_t> payload;
      write_qspace_header(header, payload);
      payload.insert(payload.end(), stream.bytes.begin(), stream.bytes.end());
      emit(index, RecordKind::B0Diff, std::move(payload));
    }
  }

  // (3) Each shell independently: order, seed spatially, then try q-space
  // until it wins once, after which the spatial codec is no longer tried.
  for (std::size_t s = 0; s < gradients.shells.size(); ++s) {
    const std::vector<int>& members = gradients.shells[s];
    std::vector<std::array<double, 3>> dirs;
    dirs.reserve(members.size());
    for (int index : members) {
      dirs.push_back(gradients.bvecs[static_cast<std::size_t>(index)]);
    }
    std::vector<int> perm = order_volumes(dirs, options.order, 0);

    std::vector<int> known_indices;
    std::vector<const Volume*> known_volumes;
    bool trial_spatial = true;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      int index = members[static_cast<std::size_t>(perm[k])];
      const Volume& original = dataset.volumes[static_cast<std::size_t>(index)];
      auto [lo, hi] = value_range(original.samples);

      std::vector<std::uint8_t> payload;
      RecordKind kind = RecordKind::Spatial;
      if (options.qspace == Predictor::Dti) {
        if (static_cast<int>(k) >= dti_split) {
          Volume pred = predict_dti_volume(
              ctx, dataset.volumes[static_cast<std::size_t>(b0_reference)],
              known_volumes, known_indices, index, gradients.shell_bvals[s],
              lo, hi);
          payload = build_qspace_record(original, pred, Predictor::Dti, index);
          kind = RecordKind::Qspace;
        } else {
          payload = spatial_record(index);
        }
      } else if (k == 0 ||
                 (ctx.motion() ? known_indices.size() + 1 < 3
                               : members.size() < 3)) {
        // Per-shell seed, or too few directions to mesh the sphere yet.
        payload = spatial_record(index);
      } else {
        QspacePde pde = options.qspace == Predictor::Biharmonic
                            ? QspacePde::Biharmonic
                            : QspacePde::LaplaceBeltrami;
        if (trial_spatial) {
          // Per-volume size trial; the spatial codec is dropped after the
          // first volume where q-space is smaller. A degenerate mesh
          // (coplanar directions) just loses the trial.
          std::vector<std::uint8_t> qspace_payload;
          try {
            Volume pred = predict_qspace_pde(ctx, known_volumes, known_indices,
                                             index, pde, members, lo, hi);
            qspace_payload =
                build_qspace_record(original, pred, options.qspace, index);
          } catch (const MeshError&) {
          }
          std::vector<std::uint8_t> spatial_payload = spatial_record(index);
          if (!qspace_payload.empty() &&
              qspace_payload.size() < spatial_payload.size()) {
            payload = std::move(qspace_payload);
            kind = RecordKind::Qspace;
            trial_spatial = false;
          } else {
            payload = std::move(spatial_payload);
          }
        } else {
          Volume pred = predict_qspace_pde(ctx, known_volumes, known_indices,
                                           index, pde, members, lo, hi);
          payload = build_qspace_record(original, pred, options.qspace, index);
          kind = RecordKind::Qspace;
        }
      }
      emit(index, kind, std::move(payload));
      known_indices.push_back(index);
      known_volumes.push_back(&original);
    }
  }

  return container;
}

DwiDataset decompress(const Container& container) {
  int threads = resolve_thread_count(0);
  NiftiHeaderBlob header = parse_nifti_header(
      std::span<const std::uint8_t, kNiftiHeaderSize>(
          container.nifti_header.data(), kNiftiHeaderSize));
  std::size_t nvol = container.records.size();
  if (static_cast<std::size_t>(header.nvol) != nvol) {
    throw Error("decompress: record count does not match NIfTI header");
  }
  Dims3 dims = header.dims;

  // Gradient parsing; the b=0 / DWI split comes from the record kinds, not
  // from a threshold, so the decoder needs no codec options.
  std::vector<double> bvals = parse_bvals(container.bval_text);
  std::vector<std::array<double, 3>> bvecs = parse_bvecs(container.bvec_text);
  if (bvals.size() != nvol || bvecs.size() != nvol) {
    throw Error("decompress: gradient count does not match volume count");
  }
  for (auto& g : bvecs) {
    double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    if (n > 0.0) {
      for (double& c : g) c /= n;
    }
  }

  std::vector<std::size_t> by_position(nvol);
  for (std::size_t i = 0; i < nvol; ++i) {
    by_position[container.records[i].coding_position] = i;
  }

  std::vector<char> is_b0(nvol, 0);
  int b0_reference = -1;
  if (container.has_b0_reference) {
    b0_reference = static_cast<int>(by_position[0]);
    is_b0[static_cast<std::size_t>(b0_reference)] = 1;
  }
  for (std::size_t i = 0; i < nvol; ++i) {
    if (container.records[i].kind == RecordKind::B0Diff) {
      if (b0_reference < 0) {
        throw Error("decompress: b0diff record without a b=0 reference");
      }
      is_b0[i] = 1;
    }
  }
  std::vector<int> dwis;
  for (std::size_t i = 0; i < nvol; ++i) {
    if (!is_b0[i]) dwis.push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> shells =
      cluster_shells(bvals, dwis, kShellRelativeTolerance);
  std::vector<int> shell_of(nvol, -1);
  std::vector<double> shell_bvals(shells.size(), 0.0);
  for (std::size_t s = 0; s < shells.size(); ++s) {
    double sum = 0.0;
    for (int idx : shells[s]) {
      shell_of[static_cast<std::size_t>(idx)] = static_cast<int>(s);
      sum += bvals[static_cast<std::size_t>(idx)];
    }
    shell_bvals[s] = sum / static_cast<double>(shells[s].size());
  }

  std::vector<AffineTransform> transforms;
  if (container.motion) {
    transforms.reserve(nvol);
    for (const std::string& text : container.affines) {
      transforms.push_back(read_affine_ascii(text));
    }
  }

  PredictionContext ctx;
  ctx.dims = dims;
  ctx.bvecs = &bvecs;
  ctx.transforms = container.motion ? &transforms : nullptr;
  ctx.b0_reference = b0_reference;
  ctx.threads = threads;

  std::vector<Volume> volumes(nvol);
  std::vector<char> done(nvol, 0);
  std::vector<std::vector<int>> shell_known(shells.size());

  for (std::size_t pos = 0; pos < nvol; ++pos) {
    std::size_t index = by_position[pos];
    const VolumeRecord& rec = container.records[index];
    switch (rec.kind) {
      case RecordKind::Spatial: {
        volumes[index] = decode_volume_spatial(rec.payload, dims, threads);
        break;
      }
      case RecordKind::B0Diff: {
        if (b0_reference < 0 || !done[static_cast<std::size_t>(b0_reference)]) {
          throw Error("decompress: b0diff before its reference");
        }
        QspaceRecordHeader rh = read_qspace_header(rec.payload);
        if (rh.predictor != Predictor::B0Reference) {
          throw Error("decompress: b0diff record with wrong predictor");
        }
        if (rh.original_index != index) {
          throw Error("decompress: record index mismatch");
        }
        Volume pred = predict_b0diff(
            ctx, volumes[static_cast<std::size_t>(b0_reference)],
            static_cast<int>(index), rh.min_value, rh.max_value);
        volumes[index] = decode_qspace_record(rec.payload, pred);
        break;
      }
      case RecordKind::Qspace: {
        QspaceRecordHeader rh = read_qspace_header(rec.payload);
        if (rh.original_index != index) {
          throw Error("decompress: record index mismatch");
        }
        int shell = shell_of[index];
        if (shell < 0) {
          throw Error("decompress: q-space record for a b=0 volume");
        }
        const std::vector<int>& known =
            shell_known[static_cast<std::size_t>(shell)];
        if (known.empty()) {
          throw Error("decompress: q-space record without known volumes");
        }
        std::vector<const Volume*> known_volumes;
        std::vector<int> known_indices;
        for (int k : known) {
          known_volumes.push_back(&volumes[static_cast<std::size_t>(k)]);
          known_indices.push_back(k);
        }
        Volume pred;
        if (rh.predictor == Predictor::Dti) {
          if (b0_reference < 0 ||
              !done[static_cast<std::size_t>(b0_reference)]) {
            throw Error("decompress: DTI record without a b=0 reference");
          }
          pred = predict_dti_volume(
              ctx, volumes[static_cast<std::size_t>(b0_reference)],
              known_volumes, known_indices, static_cast<int>(index),
              shell_bvals[static_cast<std::size_t>(shell)], rh.min_value,
              rh.max_value);
        } else if (rh.predictor == Predictor::B0Reference) {
          throw Error("decompress: q-space record with b0diff predictor");
        } else {
          QspacePde pde = rh.predictor == Predictor::Biharmonic
                              ? QspacePde::Biharmonic
                              : QspacePde::LaplaceBeltrami;
          pred = predict_qspace_pde(ctx, known_volumes, known_indices,
                                    static_cast<int>(index), pde,
                                    shells[static_cast<std::size_t>(shell)],
                                    rh.min_value, rh.max_value);
        }
        volumes[index] = decode_qspace_record(rec.payload, pred);
        break;
      }
    }
    done[index] = 1;
    if (shell_of[index] >= 0) {
      shell_known[static_cast<std::size_t>(shell_of[index])].push_back(
          static_cast<int>(index));
    }
  }

  DwiDataset out;
  out.header = header;
  out.volumes = std::move(volumes);
  out.bval_text = container.bval_text;
  out.bvec_text = container.bvec_text;
  return out;
}

StatsReport stats(const Container& container,
                  const std::vector<std::uint8_t>* raw_bytes) {
  StatsReport report;
  ContainerAccounting acc = account_container(container);
  report.file_size = acc.file_size;
  report.overhead_bytes =
      acc.fixed_and_directory + acc.blob_bytes + acc.footer_bytes;

  std::vector<double> bvals = parse_bvals(container.bval_text);
  std::vector<std::size_t> by_position(container.records.size());
  for (std::size_t i = 0; i < container.records.size(); ++i) {
    by_position[container.records[i].coding_position] = i;
  }
  std::vector<char> is_b0(container.records.size(), 0);
  if (container.has_b0_reference && !by_position.empty()) {
    is_b0[by_position[0]] = 1;
  }
  for (std::size_t i = 0; i < container.records.size(); ++i) {
    if (container.records[i].kind == RecordKind::B0Diff) is_b0[i] = 1;
  }
  std::vector<int> dwis;
  for (std::size_t i = 0; i < container.records.size(); ++i) {
    if (!is_b0[i]) dwis.push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> shells =
      cluster_shells(bvals, dwis, kShellRelativeTolerance);
  std::vector<int> shell_of(container.records.size(), -1);
  for (std::size_t s = 0; s < shells.size(); ++s) {
    for (int idx : shells[s]) {
      shell_of[static_cast<std::size_t>(idx)] = static_cast<int>(s);
    }
  }

  for (std::size_t pos = 0; pos < by_position.size(); ++pos) {
    std::size_t i = by_position[pos];
    const VolumeRecord& rec = container.records[i];
    RecordStat stat;
    stat.original_index = static_cast<int>(i);
    stat.coding_position = static_cast<int>(pos);
    stat.kind = rec.kind;
    stat.shell = shell_of[i];
    stat.bytes = rec.payload.size();
    switch (rec.kind) {
      case RecordKind::Spatial:
        ++report.spatial_records;
        if (!is_b0[i]) ++report.spatial_dwi_records;
        break;
      case RecordKind::Qspace:
        stat.predictor = read_qspace_header(rec.payload).predictor;
        ++report.qspace_records;
        break;
      case RecordKind::B0Diff:
        stat.predictor = Predictor::B0Reference;
        ++report.b0diff_records;
        break;
    }
    report.records.push_back(stat);
  }

  if (raw_bytes != nullptr) {
    report.raw_size = raw_bytes->size();
    report.raw_deflate_size = coding::deflate_bytes(*raw_bytes).size();
  }
  return report;
}

}  // namespace qdmr
