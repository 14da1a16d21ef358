#include "qdmr/container.hpp"

#include <algorithm>
#include <cstring>
#include <tuple>

#include <zlib.h>

namespace qdmr {

namespace {

constexpr char kMagic[4] = {'Q', 'D', 'M', 'R'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > data.size()) throw Error("container: truncated");
    return data[pos++];
  }
  std::uint16_t u16() {
    if (pos + 2 > data.size()) throw Error("container: truncated");
    std::uint16_t v = static_cast<std::uint16_t>(data[pos] |
                                                 (std::uint16_t{data[pos + 1]} << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    if (pos + 4 > data.size()) throw Error("container: truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | data[pos + static_cast<std::size_t>(i)];
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    if (pos + 8 > data.size()) throw Error("container: truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | data[pos + static_cast<std::size_t>(i)];
    pos += 8;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos + n > data.size()) throw Error("container: truncated");
    auto s = data.subspan(pos, n);
    pos += n;
    return s;
  }
};

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

void write_spatial_header(const SpatialRecordHeader& h,
                          std::vector<std::uint8_t>& out) {
  if (h.min_value > h.max_value) throw Error("record: min > max");
  put_u16(out, h.min_value);
  put_u16(out, h.max_value);
  put_u32(out, h.zero_mask_bytes);
  put_u32(out, h.mask_values_bytes);
  std::uint32_t lam;
  static_assert(sizeof(float) == 4);
  std::memcpy(&lam, &h.lambda, 4);
  put_u32(out, lam);
  std::uint8_t flags = static_cast<std::uint8_t>(h.pde_type & 0x3);
  flags |= static_cast<std::uint8_t>(h.dilation_mode ? 0x4 : 0);
  flags |= static_cast<std::uint8_t>(h.mask_coder == coding::Coder::Deflate ? 0x8 : 0);
  flags |= static_cast<std::uint8_t>(h.residual_coder == coding::Coder::Deflate ? 0x10 : 0);
  out.push_back(flags);
}

SpatialRecordHeader read_spatial_header(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  SpatialRecordHeader h;
  h.min_value = r.u16();
  h.max_value = r.u16();
  if (h.min_value > h.max_value) throw Error("record: min > max");
  h.zero_mask_bytes = r.u32();
  h.mask_values_bytes = r.u32();
  std::uint32_t lam = r.u32();
  std::memcpy(&h.lambda, &lam, 4);
  std::uint8_t flags = r.u8();
  h.pde_type = flags & 0x3;
  if (h.pde_type != 0) throw Error("record: unsupported PDE type");
  h.dilation_mode = flags & 0x4;
  if (h.dilation_mode) throw Error("record: reserved dilation mode set");
  h.mask_coder = (flags & 0x8) ? coding::Coder::Deflate : coding::Coder::Huffman;
  h.residual_coder =
      (flags & 0x10) ? coding::Coder::Deflate : coding::Coder::Huffman;
  if (flags & 0xE0) throw Error("record: reserved bits set");
  return h;
}

void write_qspace_header(const QspaceRecordHeader& h,
                         std::vector<std::uint8_t>& out) {
  if (h.min_value > h.max_value) throw Error("record: min > max");
  put_u16(out, h.min_value);
  put_u16(out, h.max_value);
  std::uint8_t flags = static_cast<std::uint8_t>(h.predictor) & 0x3;
  flags |= static_cast<std::uint8_t>(
      h.residual_coder == coding::Coder::Deflate ? 0x4 : 0);
  out.push_back(flags);
  put_u16(out, h.original_index);
}

QspaceRecordHeader read_qspace_header(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  QspaceRecordHeader h;
  h.min_value = r.u16();
  h.max_value = r.u16();
  if (h.min_value > h.max_value) throw Error("record: min > max");
  std::uint8_t flags = r.u8();
  h.predictor = static_cast<Predictor>(flags & 0x3);
  h.residual_coder =
      (flags & 0x4) ? coding::Coder::Deflate : coding::Coder::Huffman;
  if (flags & 0xF8) throw Error("record: reserved bits set");
  h.original_index = r.u16();
  return h;
}

std::vector<std::uint8_t> serialize_container(const Container& c) {
  std::size_t nvol = c.records.size();
  if (nvol == 0) throw Error("container: no records");
  if (nvol > 0xFFFF) throw Error("container: too many volumes");
  if (c.motion && c.affines.size() != nvol) {
    throw Error("container: motion flag requires one affine per volume");
  }
  if (!c.motion && !c.affines.empty()) {
    throw Error("container: affines present without motion flag");
  }
  // Coding positions must form a permutation of 0..nvol-1.
  std::vector<bool> seen(nvol, false);
  for (const auto& rec : c.records) {
    if (rec.coding_position >= nvol || seen[rec.coding_position]) {
      throw Error("container: coding positions must be a permutation");
    }
    seen[rec.coding_position] = true;
  }

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kContainerVersion);
  std::uint8_t flags = static_cast<std::uint8_t>(c.motion ? 0x1 : 0);
  flags |= static_cast<std::uint8_t>(c.has_b0_reference ? 0x2 : 0);
  out.push_back(flags);
  put_u16(out, static_cast<std::uint16_t>(nvol));

  // Directory placeholder; offsets are patched once blob sizes are known.
  std::size_t dir_pos = out.size();
  for (std::size_t i = 0; i < nvol; ++i) {
    out.push_back(static_cast<std::uint8_t>(c.records[i].kind));
    put_u16(out, c.records[i].coding_position);
    put_u64(out, 0);
    put_u64(out, c.records[i].payload.size());
  }

  put_u32(out, static_cast<std::uint32_t>(kNiftiHeaderSize));
  out.insert(out.end(), c.nifti_header.begin(), c.nifti_header.end());
  put_u32(out, static_cast<std::uint32_t>(c.bval_text.size()));
  out.insert(out.end(), c.bval_text.begin(), c.bval_text.end());
  put_u32(out, static_cast<std::uint32_t>(c.bvec_text.size()));
  out.insert(out.end(), c.bvec_text.begin(), c.bvec_text.end());
  if (c.motion) {
    for (const std::string& a : c.affines) {
      put_u32(out, static_cast<std::uint32_t>(a.size()));
      out.insert(out.end(), a.begin(), a.end());
    }
  }

  // Record payloads in coding order.
  std::vector<std::size_t> by_position(nvol);
  for (std::size_t i = 0; i < nvol; ++i) {
    by_position[c.records[i].coding_position] = i;
  }
  for (std::size_t pos = 0; pos < nvol; ++pos) {
    std::size_t i = by_position[pos];
    std::uint64_t offset = out.size();
    std::size_t entry = dir_pos + i * 19 + 3;
    for (int b = 0; b < 8; ++b) {
      out[entry + static_cast<std::size_t>(b)] =
          static_cast<std::uint8_t>(offset >> (8 * b));
    }
    out.insert(out.end(), c.records[i].payload.begin(),
               c.records[i].payload.end());
  }

  put_u32(out, checksum(std::span<const std::uint8_t>(out.data(), out.size())));
  return out;
}

Container parse_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw Error("container: truncated");
  std::uint32_t stored_crc = 0;
  for (int i = 3; i >= 0; --i) {
    stored_crc = (stored_crc << 8) |
                 bytes[bytes.size() - 4 + static_cast<std::size_t>(i)];
  }
  if (checksum(bytes.subspan(0, bytes.size() - 4)) != stored_crc) {
    throw Error("container: checksum mismatch");
  }

  Reader r{bytes.subspan(0, bytes.size() - 4)};
  if (std::memcmp(r.take(4).data(), kMagic, 4) != 0) {
    throw Error("container: bad magic");
  }
  if (r.u8() != kContainerVersion) throw Error("container: version mismatch");
  std::uint8_t flags = r.u8();
  if (flags & ~0x3) throw Error("container: reserved flag bits set");
  Container c;
  c.motion = flags & 0x1;
  c.has_b0_reference = flags & 0x2;
  std::size_t nvol = r.u16();
  if (nvol == 0) throw Error("container: no records");

  struct DirEntry {
    RecordKind kind;
    std::uint16_t position;
    std::uint64_t offset;
    std::uint64_t length;
  };
  std::vector<DirEntry> dir(nvol);
  std::vector<bool> seen(nvol, false);
  for (std::size_t i = 0; i < nvol; ++i) {
    std::uint8_t kind = r.u8();
    if (kind > 2) throw Error("container: bad record kind");
    dir[i].kind = static_cast<RecordKind>(kind);
    dir[i].position = r.u16();
    dir[i].offset = r.u64();
    dir[i].length = r.u64();
    if (dir[i].position >= nvol || seen[dir[i].position]) {
      throw Error("container: coding positions must be a permutation");
    }
    seen[dir[i].position] = true;
  }

  std::uint32_t hdr_len = r.u32();
  if (hdr_len != kNiftiHeaderSize) {
    throw Error("container: NIfTI header blob must be 348 bytes");
  }
  auto hdr = r.take(kNiftiHeaderSize);
  std::copy(hdr.begin(), hdr.end(), c.nifti_header.begin());
  std::uint32_t bval_len = r.u32();
  auto bval = r.take(bval_len);
  c.bval_text.assign(bval.begin(), bval.end());
  std::uint32_t bvec_len = r.u32();
  auto bvec = r.take(bvec_len);
  c.bvec_text.assign(bvec.begin(), bvec.end());
  if (c.motion) {
    c.affines.resize(nvol);
    for (std::size_t i = 0; i < nvol; ++i) {
      std::uint32_t len = r.u32();
      auto a = r.take(len);
      c.affines[i].assign(a.begin(), a.end());
    }
  }

  // Records must exactly tile the span between the blobs and the footer.
  std::size_t records_begin = r.pos;
  std::size_t records_end = bytes.size() - 4;
  std::vector<std::size_t> order(nvol);
  for (std::size_t i = 0; i < nvol; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    // Zero-length records may share an offset with their successor.
    return std::tie(dir[a].offset, dir[a].length) <
           std::tie(dir[b].offset, dir[b].length);
  });
  std::size_t cursor = records_begin;
  for (std::size_t i : order) {
    if (dir[i].offset != cursor) {
      throw Error("container: record offsets overlap or leave gaps");
    }
    cursor += dir[i].length;
    if (cursor > records_end) throw Error("container: record out of range");
  }
  if (cursor != records_end) throw Error("container: record out of range");

  c.records.resize(nvol);
  for (std::size_t i = 0; i < nvol; ++i) {
    c.records[i].kind = dir[i].kind;
    c.records[i].coding_position = dir[i].position;
    auto payload = bytes.subspan(dir[i].offset, dir[i].length);
    c.records[i].payload.assign(payload.begin(), payload.end());
  }
  return c;
}

ContainerAccounting account_container(const Container& c) {
  ContainerAccounting acc;
  acc.fixed_and_directory = 8 + c.records.size() * 19;
  acc.blob_bytes = 4 + kNiftiHeaderSize + 4 + c.bval_text.size() + 4 +
                   c.bvec_text.size();
  if (c.motion) {
    for (const std::string& a : c.affines) acc.blob_bytes += 4 + a.size();
  }
  acc.record_bytes.reserve(c.records.size());
  std::size_t total_records = 0;
  for (const auto& rec : c.records) {
    acc.record_bytes.push_back(rec.payload.size());
    total_records += rec.payload.size();
  }
  acc.file_size = acc.fixed_and_directory + acc.blob_bytes + total_records +
                  acc.footer_bytes;
  return acc;
}

}  // namespace qdmr
