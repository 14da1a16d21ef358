#include "qdmr/spatial_codec.hpp"

#include <algorithm>

#include "qdmr/coding.hpp"
#include "qdmr/container.hpp"

namespace qdmr {

namespace {

// Voxels not yet coded that touch a coded voxel across a face, in
// lexicographic (x-fastest) order. This partition depends on dims alone, so
// the decoder rebuilds it without side information.
std::vector<std::size_t> frontier(const std::vector<std::uint8_t>& coded,
                                  Dims3 dims) {
  std::vector<std::size_t> out;
  for (int z = 0; z < dims.nz; ++z) {
    for (int y = 0; y < dims.ny; ++y) {
      for (int x = 0; x < dims.nx; ++x) {
        std::size_t i = voxel_index(dims, x, y, z);
        if (coded[i]) continue;
        bool touches =
            (x > 0 && coded[i - 1]) ||
            (x + 1 < dims.nx && coded[i + 1]) ||
            (y > 0 && coded[i - static_cast<std::size_t>(dims.nx)]) ||
            (y + 1 < dims.ny && coded[i + static_cast<std::size_t>(dims.nx)]) ||
            (z > 0 && coded[i - static_cast<std::size_t>(dims.nx) *
                                    static_cast<std::size_t>(dims.ny)]) ||
            (z + 1 < dims.nz && coded[i + static_cast<std::size_t>(dims.nx) *
                                              static_cast<std::size_t>(dims.ny)]);
        if (touches) out.push_back(i);
      }
    }
  }
  return out;
}

std::vector<std::size_t> mask_indices(const std::vector<std::uint8_t>& member,
                                      Dims3 dims) {
  std::vector<std::size_t> out;
  out.reserve(initial_mask_count(dims));
  for (std::size_t i = 0; i < member.size(); ++i) {
    if (member[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

std::vector<bool> unpack_bits(std::span<const std::uint8_t> bytes,
                              std::size_t count) {
  if (bytes.size() != (count + 7) / 8) {
    throw Error("spatial: zero-mask bitmap length mismatch");
  }
  std::vector<bool> bits(count);
  for (std::size_t i = 0; i < count; ++i) {
    bits[i] = bytes[i / 8] & (0x80u >> (i % 8));
  }
  return bits;
}

}  // namespace

std::vector<std::uint8_t> encode_volume_spatial(const Volume& volume,
                                                const EedParams& params,
                                                int threads) {
  Dims3 dims = volume.dims;
  if (volume.samples.size() != dims.voxel_count()) {
    throw Error("spatial: sample count mismatch");
  }
  if (!params.replayable_defaults()) {
    // Only lambda travels in the record header; the decoder replays the
    // remaining parameters as protocol constants.
    throw Error("spatial: non-default EED parameters are not representable");
  }
  auto [vmin, vmax] = value_range(volume.samples);

  std::vector<std::uint8_t> coded = initial_mask(dims);
  std::vector<std::size_t> seeds = mask_indices(coded, dims);

  // Zero bitmap over seed voxels; the intensity stream holds nonzero values.
  std::vector<bool> zero_bits(seeds.size());
  std::vector<std::uint16_t> mask_values;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    std::uint16_t v = volume.samples[seeds[k]];
    zero_bits[k] = (v == 0);
    if (v != 0) mask_values.push_back(v);
  }
  std::vector<std::uint8_t> zero_stream = coding::deflate_bytes(pack_bits(zero_bits));

  coding::EncodedStream mask_stream;
  if (!mask_values.empty()) mask_stream = coding::choose_stream(mask_values);

  EedInpainter solver(dims, params, vmin, vmax, threads);
  for (std::size_t i : seeds) solver.set_known(i, volume.samples[i]);
  solver.init_free_from_known_mean();

  std::size_t coded_count = seeds.size();
  std::vector<std::uint16_t> residuals;
  residuals.reserve(dims.voxel_count() - coded_count);
  while (coded_count < dims.voxel_count()) {
    solver.solve();
    std::vector<std::size_t> ring = frontier(coded, dims);
    if (ring.empty()) throw Error("spatial: disconnected frontier");
    const std::vector<double>& u = solver.values();
    for (std::size_t i : ring) {
      std::uint16_t pred = quantize_prediction(u[i], vmin, vmax);
      residuals.push_back(
          static_cast<std::uint16_t>(volume.samples[i] - pred));
      solver.set_known(i, volume.samples[i]);
      coded[i] = 1;
    }
    coded_count += ring.size();
  }

  coding::EncodedStream residual_stream;
  if (!residuals.empty()) residual_stream = coding::choose_stream(residuals);

  SpatialRecordHeader header;
  header.min_value = vmin;
  header.max_value = vmax;
  header.zero_mask_bytes = static_cast<std::uint32_t>(zero_stream.size());
  header.mask_values_bytes = static_cast<std::uint32_t>(mask_stream.bytes.size());
  header.lambda = params.lambda;
  header.mask_coder = mask_stream.coder;
  header.residual_coder = residual_stream.coder;

  std::vector<std::uint8_t> payload;
  write_spatial_header(header, payload);
  payload.insert(payload.end(), zero_stream.begin(), zero_stream.end());
  payload.insert(payload.end(), mask_stream.bytes.begin(),
                 mask_stream.bytes.end());
  payload.insert(payload.end(), residual_stream.bytes.begin(),
                 residual_stream.bytes.end());
  return payload;
}

Volume decode_volume_spatial(std::span<const std::uint8_t> payload, Dims3 dims,
                             int threads) {
  if (payload.size() < kSpatialHeaderBytes) throw Error("spatial: truncated record");
  SpatialRecordHeader header = read_spatial_header(payload);

  std::size_t zpos = kSpatialHeaderBytes;
  std::size_t mpos = zpos + header.zero_mask_bytes;
  std::size_t rpos = mpos + header.mask_values_bytes;
  if (rpos > payload.size()) throw Error("spatial: truncated record");

  std::vector<std::uint8_t> coded = initial_mask(dims);
  std::vector<std::size_t> seeds = mask_indices(coded, dims);

  std::vector<std::uint8_t> bitmap = coding::inflate_bytes(
      payload.subspan(zpos, header.zero_mask_bytes), (seeds.size() + 7) / 8);
  std::vector<bool> zero_bits = unpack_bits(bitmap, seeds.size());
  std::size_t nonzero =
      seeds.size() - static_cast<std::size_t>(
                         std::count(zero_bits.begin(), zero_bits.end(), true));
  std::vector<std::uint16_t> mask_values = coding::decode_stream(
      header.mask_coder, payload.subspan(mpos, header.mask_values_bytes),
      nonzero);

  std::size_t residual_count = dims.voxel_count() - seeds.size();
  std::vector<std::uint16_t> residuals = coding::decode_stream(
      header.residual_coder, payload.subspan(rpos), residual_count);

  Volume volume(dims);
  EedInpainter solver(dims, { .lambda = header.lambda }, header.min_value,
                      header.max_value, threads);
  std::size_t value_at = 0;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    std::uint16_t v = zero_bits[k] ? 0 : mask_values[value_at++];
    volume.samples[seeds[k]] = v;
    solver.set_known(seeds[k], v);
  }
  solver.init_free_from_known_mean();

  std::size_t coded_count = seeds.size();
  std::size_t residual_at = 0;
  while (coded_count < dims.voxel_count()) {
    solver.solve();
    std::vector<std::size_t> ring = frontier(coded, dims);
    if (ring.empty()) throw Error("spatial: disconnected frontier");
    const std::vector<double>& u = solver.values();
    for (std::size_t i : ring) {
      std::uint16_t pred =
          quantize_prediction(u[i], header.min_value, header.max_value);
      std::uint16_t v =
          static_cast<std::uint16_t>(pred + residuals[residual_at++]);
      volume.samples[i] = v;
      solver.set_known(i, v);
      coded[i] = 1;
    }
    coded_count += ring.size();
  }
  return volume;
}

}  // namespace qdmr
