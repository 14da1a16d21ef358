#include "qdmr/coding.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <numeric>

#include <zlib.h>

namespace qdmr::coding {

std::vector<std::uint16_t> residuals_encode(const Volume& original,
                                            const Volume& predicted) {
  if (original.dims != predicted.dims) {
    throw Error("residuals_encode: dimension mismatch");
  }
  std::vector<std::uint16_t> out(original.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint16_t>(original.samples[i] -
                                        predicted.samples[i]);
  }
  return out;
}

Volume residuals_apply(const Volume& predicted,
                       std::span<const std::uint16_t> residuals) {
  if (predicted.samples.size() != residuals.size()) {
    throw Error("residuals_apply: dimension mismatch");
  }
  Volume out(predicted.dims);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    out.samples[i] =
        static_cast<std::uint16_t>(predicted.samples[i] + residuals[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical Huffman
// ---------------------------------------------------------------------------

namespace {

constexpr int kLengthCap = 15;
constexpr int kMaxLength = 16;  // forced when distinct > 2^15

struct BitWriter {
  std::vector<std::uint8_t>& out;
  std::uint32_t acc = 0;
  int nbits = 0;

  void put(std::uint32_t code, int len) {
    for (int i = len - 1; i >= 0; --i) {
      acc = (acc << 1) | ((code >> i) & 1u);
      if (++nbits == 8) {
        out.push_back(static_cast<std::uint8_t>(acc));
        acc = 0;
        nbits = 0;
      }
    }
  }
  void flush() {
    if (nbits > 0) {
      out.push_back(static_cast<std::uint8_t>(acc << (8 - nbits)));
      acc = 0;
      nbits = 0;
    }
  }
};

struct BitReader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
  int bit = 0;

  int next() {
    if (pos >= data.size()) return -1;
    int b = (data[pos] >> (7 - bit)) & 1;
    if (++bit == 8) {
      bit = 0;
      ++pos;
    }
    return b;
  }
};

// Unrestricted Huffman code lengths via the sorted two-queue construction.
// Symbols enter sorted by (frequency, symbol); ties always resolve the same
// way so encoder and decoder builds agree byte for byte.
std::vector<int> huffman_lengths(const std::vector<std::uint64_t>& freqs) {
  std::size_t n = freqs.size();
  if (n == 1) return {1};

  struct Node {
    std::uint64_t weight;
    int left = -1, right = -1;  // children into the node array
    int depth_slot = -1;        // leaf index, or -1 for internal
  };
  std::vector<Node> nodes;
  nodes.reserve(2 * n);
  std::vector<int> leaf_order(n);
  std::iota(leaf_order.begin(), leaf_order.end(), 0);
  // freqs arrive in ascending symbol order; stable sort keeps symbol ties
  // deterministic.
  std::stable_sort(leaf_order.begin(), leaf_order.end(),
                   [&](int a, int b) { return freqs[a] < freqs[b]; });
  for (int idx : leaf_order) {
    nodes.push_back({freqs[idx], -1, -1, idx});
  }

  std::size_t leaf_head = 0;
  std::vector<int> merged;
  std::size_t merged_head = 0;
  auto take = [&]() -> int {
    bool has_leaf = leaf_head < n;
    bool has_merged = merged_head < merged.size();
    if (has_leaf &&
        (!has_merged ||
         nodes[leaf_head].weight <= nodes[merged[merged_head]].weight)) {
      return static_cast<int>(leaf_head++);
    }
    return merged[merged_head++];
  };
  while ((n - leaf_head) + (merged.size() - merged_head) > 1) {
    int a = take();
    int b = take();
    nodes.push_back({nodes[a].weight + nodes[b].weight, a, b, -1});
    merged.push_back(static_cast<int>(nodes.size()) - 1);
  }

  std::vector<int> lengths(n, 0);
  // Iterative DFS from the root assigning depths.
  std::vector<std::pair<int, int>> stack{{merged.back(), 0}};
  while (!stack.empty()) {
    auto [id, depth] = stack.back();
    stack.pop_back();
    const Node& nd = nodes[id];
    if (nd.depth_slot >= 0) {
      lengths[nd.depth_slot] = std::max(1, depth);
    } else {
      stack.push_back({nd.left, depth + 1});
      stack.push_back({nd.right, depth + 1});
    }
  }
  return lengths;
}

// Rebalance code lengths to the cap while keeping the Kraft sum at exactly 1.
// Works on per-length counts, then deals lengths back longest-first to the
// rarest symbols.
std::vector<int> limit_lengths(const std::vector<std::uint64_t>& freqs,
                               std::vector<int> lengths, int cap) {
  int maxlen = *std::max_element(lengths.begin(), lengths.end());
  std::vector<std::size_t> count(static_cast<std::size_t>(
                                     std::max(maxlen, cap)) + 1,
                                 0);
  for (int l : lengths) count[static_cast<std::size_t>(l)]++;
  if (maxlen > cap) {
    for (int l = cap + 1; l <= maxlen; ++l) {
      count[static_cast<std::size_t>(cap)] += count[static_cast<std::size_t>(l)];
      count[static_cast<std::size_t>(l)] = 0;
    }
    // Kraft excess is an integer multiple of 2^-cap; each move of one code
    // from length l to two at l+1 (absorbing one at cap) removes exactly one
    // such unit.
    auto kraft_units = [&]() -> std::int64_t {
      std::int64_t units = 0;
      for (int l = 1; l <= cap; ++l) {
        units += static_cast<std::int64_t>(count[static_cast<std::size_t>(l)])
                 << (cap - l);
      }
      return units - (std::int64_t{1} << cap);
    };
    std::int64_t excess = kraft_units();
    while (excess > 0) {
      int l = cap - 1;
      while (l >= 1 && count[static_cast<std::size_t>(l)] == 0) --l;
      if (l < 1) throw Error("huffman: length limiting failed");
      count[static_cast<std::size_t>(l)]--;
      count[static_cast<std::size_t>(l + 1)] += 2;
      count[static_cast<std::size_t>(cap)]--;
      --excess;
    }
  }

  // Longest codes go to the least frequent symbols.
  std::vector<int> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return freqs[a] < freqs[b]; });
  std::vector<int> out(lengths.size(), 0);
  std::size_t at = 0;
  for (int l = cap; l >= 1 && at < order.size(); --l) {
    for (std::size_t k = 0; k < count[static_cast<std::size_t>(l)]; ++k) {
      out[order[at++]] = l;
    }
  }
  if (at != order.size()) throw Error("huffman: length assignment failed");
  return out;
}

struct CanonicalCode {
  std::vector<std::uint16_t> symbols;  // present symbols, ascending
  std::vector<int> lengths;            // matching code lengths
  std::vector<std::uint32_t> codes;    // canonical codes

  void assign_codes() {
    std::vector<int> order(symbols.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (lengths[a] != lengths[b]) return lengths[a] < lengths[b];
      return symbols[a] < symbols[b];
    });
    codes.assign(symbols.size(), 0);
    std::uint32_t code = 0;
    int prev_len = 0;
    for (int idx : order) {
      code <<= (lengths[idx] - prev_len);
      codes[idx] = code;
      ++code;
      prev_len = lengths[idx];
    }
  }

  bool kraft_complete() const {
    if (symbols.size() == 1) return lengths[0] == 1;
    std::uint64_t sum = 0;
    for (int l : lengths) {
      if (l < 1 || l > kMaxLength) return false;
      sum += std::uint64_t{1} << (kMaxLength - l);
    }
    return sum == (std::uint64_t{1} << kMaxLength);
  }
};

void serialize_table(const CanonicalCode& code,
                     std::vector<std::uint8_t>& out) {
  std::size_t distinct = code.symbols.size();
  std::uint16_t stored =
      static_cast<std::uint16_t>(distinct & 0xFFFF);  // 0 encodes 65536
  out.push_back(static_cast<std::uint8_t>(stored & 0xFF));
  out.push_back(static_cast<std::uint8_t>(stored >> 8));
  for (std::size_t i = 0; i < distinct; ++i) {
    out.push_back(static_cast<std::uint8_t>(code.symbols[i] & 0xFF));
    out.push_back(static_cast<std::uint8_t>(code.symbols[i] >> 8));
    out.push_back(static_cast<std::uint8_t>(code.lengths[i]));
  }
}

CanonicalCode parse_table(std::span<const std::uint8_t> bytes,
                          std::size_t& offset) {
  if (bytes.size() < 2) throw Error("huffman: truncated table");
  std::size_t distinct = bytes[0] | (std::size_t{bytes[1]} << 8);
  if (distinct == 0) distinct = 65536;
  offset = 2 + distinct * 3;
  if (bytes.size() < offset) throw Error("huffman: truncated table");
  CanonicalCode code;
  code.symbols.resize(distinct);
  code.lengths.resize(distinct);
  std::uint32_t prev_symbol = 0;
  for (std::size_t i = 0; i < distinct; ++i) {
    std::size_t p = 2 + i * 3;
    std::uint16_t sym = static_cast<std::uint16_t>(
        bytes[p] | (std::uint16_t{bytes[p + 1]} << 8));
    int len = bytes[p + 2];
    if (i > 0 && sym <= prev_symbol) {
      throw Error("huffman: table symbols not strictly ascending");
    }
    prev_symbol = sym;
    code.symbols[i] = sym;
    code.lengths[i] = len;
  }
  if (!code.kraft_complete()) {
    throw Error("huffman: table violates Kraft equality");
  }
  return code;
}

}  // namespace

EncodedStream huffman_encode(std::span<const std::uint16_t> symbols) {
  if (symbols.empty()) throw Error("huffman_encode: empty symbol list");

  std::vector<std::uint64_t> hist(65536, 0);
  for (std::uint16_t s : symbols) hist[s]++;

  CanonicalCode code;
  std::vector<std::uint64_t> freqs;
  for (std::uint32_t s = 0; s < 65536; ++s) {
    if (hist[s]) {
      code.symbols.push_back(static_cast<std::uint16_t>(s));
      freqs.push_back(hist[s]);
    }
  }

  std::vector<int> lengths = huffman_lengths(freqs);
  int cap = code.symbols.size() > (1u << kLengthCap) ? kMaxLength : kLengthCap;
  code.lengths = limit_lengths(freqs, std::move(lengths), cap);
  code.assign_codes();

  EncodedStream stream;
  stream.coder = Coder::Huffman;
  stream.symbol_count = static_cast<std::uint32_t>(symbols.size());
  serialize_table(code, stream.bytes);

  std::vector<std::uint32_t> code_of(65536, 0);
  std::vector<std::uint8_t> len_of(65536, 0);
  for (std::size_t i = 0; i < code.symbols.size(); ++i) {
    code_of[code.symbols[i]] = code.codes[i];
    len_of[code.symbols[i]] = static_cast<std::uint8_t>(code.lengths[i]);
  }
  BitWriter writer{stream.bytes};
  for (std::uint16_t s : symbols) {
    writer.put(code_of[s], len_of[s]);
  }
  writer.flush();
  return stream;
}

std::vector<std::uint16_t> huffman_decode(std::span<const std::uint8_t> bytes,
                                          std::size_t symbol_count) {
  std::size_t offset = 0;
  CanonicalCode code = parse_table(bytes, offset);

  // Canonical decoding tables per length.
  std::array<std::uint32_t, kMaxLength + 1> first_code{};
  std::array<std::uint32_t, kMaxLength + 1> first_index{};
  std::array<std::uint32_t, kMaxLength + 1> count{};
  std::vector<int> order(code.symbols.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (code.lengths[a] != code.lengths[b])
      return code.lengths[a] < code.lengths[b];
    return code.symbols[a] < code.symbols[b];
  });
  for (int idx : order) count[static_cast<std::size_t>(code.lengths[idx])]++;
  std::uint32_t c = 0, index = 0;
  for (int l = 1; l <= kMaxLength; ++l) {
    c <<= 1;
    first_code[static_cast<std::size_t>(l)] = c;
    first_index[static_cast<std::size_t>(l)] = index;
    c += count[static_cast<std::size_t>(l)];
    index += count[static_cast<std::size_t>(l)];
  }
  std::vector<std::uint16_t> sym_in_code_order(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sym_in_code_order[i] = code.symbols[static_cast<std::size_t>(order[i])];
  }

  BitReader reader{bytes.subspan(offset)};
  std::vector<std::uint16_t> out;
  out.reserve(symbol_count);
  for (std::size_t i = 0; i < symbol_count; ++i) {
    std::uint32_t acc = 0;
    for (int len = 1;; ++len) {
      if (len > kMaxLength) throw Error("huffman: bad bitstream");
      int b = reader.next();
      if (b < 0) throw Error("huffman: truncated bitstream");
      acc = (acc << 1) | static_cast<std::uint32_t>(b);
      std::size_t sl = static_cast<std::size_t>(len);
      if (count[sl] && acc - first_code[sl] < count[sl]) {
        out.push_back(sym_in_code_order[first_index[sl] + acc - first_code[sl]]);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// DEFLATE (zlib, raw RFC 1951 streams)
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> data) {
  z_stream zs{};
  if (deflateInit2(&zs, 9, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("deflate: init failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, data.size()));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  if (rc != Z_STREAM_END) {
    deflateEnd(&zs);
    throw Error("deflate: compression failed");
  }
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> data,
                                        std::size_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error("inflate: init failed");
  std::vector<std::uint8_t> out(expected_size + 1);  // slack detects overruns
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  bool ok = (rc == Z_STREAM_END) && zs.total_out == expected_size;
  // All input must be consumed; trailing garbage means a corrupt stream.
  ok = ok && zs.avail_in == 0;
  inflateEnd(&zs);
  if (!ok) throw Error("inflate: corrupt stream");
  out.resize(expected_size);
  return out;
}

EncodedStream deflate_encode(std::span<const std::uint16_t> symbols) {
  std::vector<std::uint8_t> raw(symbols.size() * 2);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    raw[2 * i] = static_cast<std::uint8_t>(symbols[i] & 0xFF);
    raw[2 * i + 1] = static_cast<std::uint8_t>(symbols[i] >> 8);
  }
  EncodedStream stream;
  stream.coder = Coder::Deflate;
  stream.symbol_count = static_cast<std::uint32_t>(symbols.size());
  stream.bytes = deflate_bytes(raw);
  return stream;
}

std::vector<std::uint16_t> deflate_decode(std::span<const std::uint8_t> bytes,
                                          std::size_t symbol_count) {
  std::vector<std::uint8_t> raw = inflate_bytes(bytes, symbol_count * 2);
  std::vector<std::uint16_t> out(symbol_count);
  for (std::size_t i = 0; i < symbol_count; ++i) {
    out[i] = static_cast<std::uint16_t>(raw[2 * i] |
                                        (std::uint16_t{raw[2 * i + 1]} << 8));
  }
  return out;
}

EncodedStream choose_stream(std::span<const std::uint16_t> symbols) {
  if (symbols.empty()) throw Error("choose_stream: empty symbol list");
  EncodedStream huff = huffman_encode(symbols);
  EncodedStream defl = deflate_encode(symbols);
  return huff.bytes.size() <= defl.bytes.size() ? std::move(huff)
                                                : std::move(defl);
}

std::vector<std::uint16_t> decode_stream(Coder coder,
                                         std::span<const std::uint8_t> bytes,
                                         std::size_t symbol_count) {
  if (symbol_count == 0) {
    if (!bytes.empty()) throw Error("decode_stream: unexpected payload");
    return {};
  }
  return coder == Coder::Huffman ? huffman_decode(bytes, symbol_count)
                                 : deflate_decode(bytes, symbol_count);
}

bool looks_gzipped(std::span<const std::uint8_t> data) {
  return data.size() >= 2 && data[0] == 0x1F && data[1] == 0x8B;
}

std::vector<std::uint8_t> gunzip_bytes(std::span<const std::uint8_t> data) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error("gunzip: init failed");
  std::vector<std::uint8_t> out;
  out.resize(std::max<std::size_t>(data.size() * 4, 1 << 16));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  std::size_t written = 0;
  int rc = Z_OK;
  while (true) {
    zs.next_out = out.data() + written;
    zs.avail_out = static_cast<uInt>(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    written = zs.total_out;
    if (rc == Z_STREAM_END) break;
    if (rc != Z_OK && rc != Z_BUF_ERROR) {
      inflateEnd(&zs);
      throw Error("gunzip: corrupt stream");
    }
    if (written == out.size()) {
      out.resize(out.size() * 2);
    } else if (rc == Z_BUF_ERROR) {
      inflateEnd(&zs);
      throw Error("gunzip: truncated stream");
    }
  }
  inflateEnd(&zs);
  out.resize(written);
  return out;
}

}  // namespace qdmr::coding
