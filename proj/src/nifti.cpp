#include "qdmr/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "qdmr/coding.hpp"

namespace qdmr {

namespace {

// NIfTI-1 datatype codes.
constexpr int kDtUint8 = 2;
constexpr int kDtInt16 = 4;
constexpr int kDtFloat32 = 16;
constexpr int kDtFloat64 = 64;
constexpr int kDtInt8 = 256;
constexpr int kDtUint16 = 512;

constexpr std::size_t kPayloadOffset = 352;  // header + zero extender

template <typename T>
T load_swapped(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> buf;
  std::memcpy(buf.data(), p, sizeof(T));
  if (swap) std::reverse(buf.begin(), buf.end());
  T v;
  std::memcpy(&v, buf.data(), sizeof(T));
  return v;
}

template <typename T>
void store_swapped(std::uint8_t* p, T v, bool swap) {
  std::array<std::uint8_t, sizeof(T)> buf;
  std::memcpy(buf.data(), &v, sizeof(T));
  if (swap) std::reverse(buf.begin(), buf.end());
  std::memcpy(p, buf.data(), sizeof(T));
}

bool host_big_endian() { return std::endian::native == std::endian::big; }

int bytes_per_sample(int datatype) {
  switch (datatype) {
    case kDtUint8:
    case kDtInt8:
      return 1;
    case kDtInt16:
    case kDtUint16:
      return 2;
    case kDtFloat32:
      return 4;
    case kDtFloat64:
      return 8;
    default:
      return 0;
  }
}

// Serializes one volume's samples in the source datatype and byte order.
// Returns false when a sample cannot be represented losslessly.
bool encode_payload(const NiftiHeaderBlob& h, const Volume& vol,
                    std::uint8_t* out) {
  bool swap = h.big_endian != host_big_endian();
  double slope = h.scl_slope == 0.0f ? 1.0 : static_cast<double>(h.scl_slope);
  double inter = h.scl_slope == 0.0f ? 0.0 : static_cast<double>(h.scl_inter);
  std::size_t n = vol.samples.size();
  switch (h.datatype) {
    case kDtUint8:
      for (std::size_t i = 0; i < n; ++i) {
        if (vol.samples[i] > 0xFF) return false;
        out[i] = static_cast<std::uint8_t>(vol.samples[i]);
      }
      return true;
    case kDtInt8:
      for (std::size_t i = 0; i < n; ++i) {
        if (vol.samples[i] > 0x7F) return false;
        out[i] = static_cast<std::uint8_t>(vol.samples[i]);
      }
      return true;
    case kDtInt16:
      for (std::size_t i = 0; i < n; ++i) {
        if (vol.samples[i] > 0x7FFF) return false;
        store_swapped<std::int16_t>(out + 2 * i,
                                    static_cast<std::int16_t>(vol.samples[i]),
                                    swap);
      }
      return true;
    case kDtUint16:
      for (std::size_t i = 0; i < n; ++i) {
        store_swapped<std::uint16_t>(out + 2 * i, vol.samples[i], swap);
      }
      return true;
    case kDtFloat32:
      for (std::size_t i = 0; i < n; ++i) {
        double stored = (static_cast<double>(vol.samples[i]) - inter) / slope;
        store_swapped<float>(out + 4 * i, static_cast<float>(stored), swap);
      }
      return true;
    case kDtFloat64:
      for (std::size_t i = 0; i < n; ++i) {
        double stored = (static_cast<double>(vol.samples[i]) - inter) / slope;
        store_swapped<double>(out + 8 * i, stored, swap);
      }
      return true;
    default:
      return false;
  }
}

}  // namespace

NiftiHeaderBlob parse_nifti_header(
    std::span<const std::uint8_t, kNiftiHeaderSize> raw) {
  NiftiHeaderBlob h;
  std::copy(raw.begin(), raw.end(), h.raw.begin());

  // Byte order is auto-detected from dim[0], which must be 1..7.
  std::int16_t dim0 = load_swapped<std::int16_t>(raw.data() + 40, false);
  bool swap = !(dim0 >= 1 && dim0 <= 7);
  if (swap) {
    dim0 = load_swapped<std::int16_t>(raw.data() + 40, true);
    if (!(dim0 >= 1 && dim0 <= 7)) throw Error("nifti: bad dim[0]");
  }
  h.big_endian = host_big_endian() != swap;

  std::int32_t sizeof_hdr = load_swapped<std::int32_t>(raw.data() + 0, swap);
  if (sizeof_hdr != 348) throw Error("nifti: bad sizeof_hdr");
  if (!(raw[344] == 'n' && raw[345] == '+' && raw[346] == '1' &&
        raw[347] == 0)) {
    if (raw[344] == 'n' && raw[345] == 'i' && raw[346] == '1') {
      throw Error("nifti: two-file (.hdr/.img) images are not supported");
    }
    throw Error("nifti: bad magic");
  }

  std::array<std::int16_t, 8> dim;
  for (int i = 0; i < 8; ++i) {
    dim[static_cast<std::size_t>(i)] =
        load_swapped<std::int16_t>(raw.data() + 40 + 2 * i, swap);
  }
  if (dim0 != 3 && dim0 != 4) throw Error("nifti: only 3D/4D images supported");
  if (dim[1] < 1 || dim[2] < 1 || dim[3] < 1) throw Error("nifti: bad dims");
  h.dims = {dim[1], dim[2], dim[3]};
  h.nvol = dim0 == 4 ? dim[4] : 1;
  if (h.nvol < 1) throw Error("nifti: bad volume count");
  for (int i = 5; i <= 7; ++i) {
    if (dim[static_cast<std::size_t>(i)] > 1) {
      throw Error("nifti: images with more than 4 dimensions not supported");
    }
  }

  h.datatype = load_swapped<std::int16_t>(raw.data() + 70, swap);
  h.bitpix = load_swapped<std::int16_t>(raw.data() + 72, swap);
  int expect_bytes = bytes_per_sample(h.datatype);
  if (expect_bytes == 0) throw Error("nifti: unsupported datatype");
  if (h.bitpix != expect_bytes * 8) throw Error("nifti: bitpix mismatch");

  for (int i = 0; i < 3; ++i) {
    h.voxel_size[static_cast<std::size_t>(i)] =
        load_swapped<float>(raw.data() + 76 + 4 * (i + 1), swap);
  }
  float vox_offset = load_swapped<float>(raw.data() + 108, swap);
  if (vox_offset != static_cast<float>(kPayloadOffset)) {
    throw Error("nifti: header extensions are not supported");
  }
  h.scl_slope = load_swapped<float>(raw.data() + 112, swap);
  h.scl_inter = load_swapped<float>(raw.data() + 116, swap);
  return h;
}

NiftiFile read_nifti(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> unzipped;
  if (coding::looks_gzipped(bytes)) {
    unzipped = coding::gunzip_bytes(bytes);
    bytes = unzipped;
  }
  if (bytes.size() < kPayloadOffset) throw Error("nifti: truncated header");

  NiftiFile file;
  file.header = parse_nifti_header(
      std::span<const std::uint8_t, kNiftiHeaderSize>(bytes.data(),
                                                      kNiftiHeaderSize));
  const NiftiHeaderBlob& h = file.header;
  for (std::size_t i = kNiftiHeaderSize; i < kPayloadOffset; ++i) {
    if (bytes[i] != 0) throw Error("nifti: header extensions are not supported");
  }

  std::size_t nvox = h.dims.voxel_count();
  std::size_t sample_bytes = static_cast<std::size_t>(bytes_per_sample(h.datatype));
  std::size_t payload = nvox * static_cast<std::size_t>(h.nvol) * sample_bytes;
  if (bytes.size() != kPayloadOffset + payload) {
    throw Error(bytes.size() < kPayloadOffset + payload
                    ? "nifti: truncated payload"
                    : "nifti: trailing bytes after payload");
  }

  bool swap = h.big_endian != host_big_endian();
  double slope = h.scl_slope == 0.0f ? 1.0 : static_cast<double>(h.scl_slope);
  double inter = h.scl_slope == 0.0f ? 0.0 : static_cast<double>(h.scl_inter);
  const std::uint8_t* p = bytes.data() + kPayloadOffset;

  file.volumes.reserve(static_cast<std::size_t>(h.nvol));
  for (int v = 0; v < h.nvol; ++v) {
    Volume vol(h.dims);
    for (std::size_t i = 0; i < nvox; ++i) {
      const std::uint8_t* sp = p + (static_cast<std::size_t>(v) * nvox + i) *
                                       sample_bytes;
      switch (h.datatype) {
        case kDtUint8:
          vol.samples[i] = *sp;
          break;
        case kDtInt8: {
          std::int8_t s = static_cast<std::int8_t>(*sp);
          if (s < 0) throw Error("nifti: negative intensities");
          vol.samples[i] = static_cast<std::uint16_t>(s);
          break;
        }
        case kDtInt16: {
          std::int16_t s = load_swapped<std::int16_t>(sp, swap);
          if (s < 0) throw Error("nifti: negative intensities");
          vol.samples[i] = static_cast<std::uint16_t>(s);
          break;
        }
        case kDtUint16:
          vol.samples[i] = load_swapped<std::uint16_t>(sp, swap);
          break;
        case kDtFloat32:
        case kDtFloat64: {
          double stored = h.datatype == kDtFloat32
                              ? static_cast<double>(load_swapped<float>(sp, swap))
                              : load_swapped<double>(sp, swap);
          double scaled = stored * slope + inter;
          if (!std::isfinite(scaled) || scaled < 0.0 || scaled > 65535.0 ||
              scaled != std::floor(scaled)) {
            throw Error(scaled < 0.0
                            ? "nifti: negative intensities"
                            : "nifti: float values are not losslessly "
                              "representable as 16-bit integers");
          }
          vol.samples[i] = static_cast<std::uint16_t>(scaled);
          break;
        }
        default:
          throw Error("nifti: unsupported datatype");
      }
    }
    file.volumes.push_back(std::move(vol));
  }

  // Float payloads must survive the inverse mapping bit-exactly, otherwise
  // the codec cannot promise a lossless round trip.
  if (h.datatype == kDtFloat32 || h.datatype == kDtFloat64) {
    std::vector<std::uint8_t> check(payload);
    for (int v = 0; v < h.nvol; ++v) {
      encode_payload(h, file.volumes[static_cast<std::size_t>(v)],
                     check.data() + static_cast<std::size_t>(v) * nvox *
                                        sample_bytes);
    }
    if (std::memcmp(check.data(), p, payload) != 0) {
      throw Error("nifti: float payload is not losslessly representable");
    }
  }
  return file;
}

std::vector<std::uint8_t> write_nifti(const NiftiHeaderBlob& header,
                                      const std::vector<Volume>& volumes) {
  if (volumes.empty()) throw Error("write_nifti: no volumes");
  if (static_cast<int>(volumes.size()) != header.nvol) {
    throw Error("write_nifti: volume count does not match header");
  }
  for (const Volume& v : volumes) {
    if (v.dims != header.dims || v.samples.size() != header.dims.voxel_count()) {
      throw Error("write_nifti: volume dims do not match header");
    }
  }
  std::size_t nvox = header.dims.voxel_count();
  std::size_t sample_bytes =
      static_cast<std::size_t>(bytes_per_sample(header.datatype));
  std::vector<std::uint8_t> out(kPayloadOffset +
                                nvox * volumes.size() * sample_bytes);
  std::copy(header.raw.begin(), header.raw.end(), out.begin());
  // bytes 348..351: zero extender
  for (std::size_t v = 0; v < volumes.size(); ++v) {
    if (!encode_payload(header, volumes[v],
                        out.data() + kPayloadOffset + v * nvox * sample_bytes)) {
      throw Error("write_nifti: sample out of range for source datatype");
    }
  }
  return out;
}

NiftiHeaderBlob make_nifti_header(Dims3 dims, int nvol) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1 || nvol < 1) {
    throw Error("make_nifti_header: bad dims");
  }
  std::array<std::uint8_t, kNiftiHeaderSize> raw{};
  store_swapped<std::int32_t>(raw.data(), 348, host_big_endian());
  std::array<std::int16_t, 8> dim{static_cast<std::int16_t>(nvol > 1 ? 4 : 3),
                                  static_cast<std::int16_t>(dims.nx),
                                  static_cast<std::int16_t>(dims.ny),
                                  static_cast<std::int16_t>(dims.nz),
                                  static_cast<std::int16_t>(nvol),
                                  1, 1, 1};
  for (int i = 0; i < 8; ++i) {
    store_swapped<std::int16_t>(raw.data() + 40 + 2 * i,
                                dim[static_cast<std::size_t>(i)],
                                host_big_endian());
  }
  store_swapped<std::int16_t>(raw.data() + 70, kDtUint16, host_big_endian());
  store_swapped<std::int16_t>(raw.data() + 72, 16, host_big_endian());
  for (int i = 0; i <= 4; ++i) {
    store_swapped<float>(raw.data() + 76 + 4 * i, i == 0 ? 1.0f : 2.0f,
                         host_big_endian());
  }
  store_swapped<float>(raw.data() + 108, 352.0f, host_big_endian());
  raw[344] = 'n';
  raw[345] = '+';
  raw[346] = '1';
  raw[347] = 0;
  return parse_nifti_header(
      std::span<const std::uint8_t, kNiftiHeaderSize>(raw.data(),
                                                      kNiftiHeaderSize));
}

}  // namespace qdmr
