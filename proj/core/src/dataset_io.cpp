// SPDX-License-Identifier: Apache-2.0
#include "amr/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "amr/errors.hpp"

namespace amr {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'A', 'M', 'R', 'D'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(std::uint8_t(buf[off + i])) << (8 * i);
  return v;
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

std::uint16_t get_u16(const std::string& buf, std::size_t off) {
  return std::uint16_t(std::uint8_t(buf[off])) |
         (std::uint16_t(std::uint8_t(buf[off + 1])) << 8);
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(const std::string& buf, std::size_t off) {
  const std::uint32_t bits = get_u32(buf, off);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schemes"] = m.schemes;
  j["frame_len"] = m.frame_len;
  j["snrs_db"] = m.snrs_db;
  j["frames_per_cell"] = m.frames_per_cell;
  j["seed"] = m.seed;
  j["omega_max"] = m.omega_max;
  j["samples_per_symbol"] = m.samples_per_symbol;
  j["pulse"] = m.pulse;
  return j.dump();
}

DatasetManifest manifest_from_json(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.schemes = j.at("schemes").get<std::vector<std::string>>();
  m.frame_len = j.at("frame_len").get<std::size_t>();
  m.snrs_db = j.at("snrs_db").get<std::vector<int>>();
  m.frames_per_cell = j.at("frames_per_cell").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.omega_max = j.at("omega_max").get<double>();
  m.samples_per_symbol = j.at("samples_per_symbol").get<unsigned>();
  m.pulse = j.at("pulse").get<std::string>();
  return m;
}

std::uint64_t manifest_hash(const DatasetManifest& m) {
  const std::string text = manifest_to_json(m);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_dataset(const Dataset& d, const std::string& path) {
  if (d.frames.empty()) throw InputError("refusing to write empty dataset");
  if (d.frames.size() != d.manifest.total_frames())
    throw InputError("frame count does not match manifest totals");

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kDatasetFormatVersion);
  const std::string manifest = manifest_to_json(d.manifest);
  put_u32(out, std::uint32_t(manifest.size()));
  out += manifest;

  const std::size_t L = d.manifest.frame_len;
  for (const auto& f : d.frames) {
    if (f.iq.shape != std::vector<std::size_t>{2, L})
      throw InputError("frame shape does not match manifest frame_len");
    put_u16(out, std::uint16_t(f.class_id));
    put_u16(out, std::uint16_t(std::int16_t(f.snr_db)));
    for (float v : f.iq.data) put_f32(out, v);
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open for writing: " + path);
  os.write(out.data(), std::streamsize(out.size()));
  if (!os) throw InputError("short write: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open dataset file " + path, 0);
  std::string buf((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 12) throw FormatError("file too short for header", buf.size());
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("bad magic, expected AMRD", 0);
  const std::uint32_t version = get_u32(buf, 4);
  if (version != kDatasetFormatVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version),
                      4);
  const std::uint32_t mlen = get_u32(buf, 8);
  if (12 + std::size_t(mlen) > buf.size())
    throw FormatError("manifest extends past end of file", 8);

  Dataset d;
  try {
    d.manifest = manifest_from_json(buf.substr(12, mlen));
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad manifest JSON: ") + e.what(), 12);
  }

  const std::size_t L = d.manifest.frame_len;
  const std::size_t frame_bytes = 4 + 2 * L * 4;
  const std::size_t total = d.manifest.total_frames();
  std::size_t off = 12 + mlen;
  if (buf.size() - off != total * frame_bytes)
    throw FormatError("frame payload truncated or oversized", off);

  d.frames.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Frame f;
    f.class_id = int(get_u16(buf, off));
    f.snr_db = int(std::int16_t(get_u16(buf, off + 2)));
    f.iq = Tensor({2, L});
    for (std::size_t j = 0; j < 2 * L; ++j)
      f.iq.data[j] = get_f32(buf, off + 4 + 4 * j);
    f.channel.snr_db = double(f.snr_db);
    d.frames.push_back(std::move(f));
    off += frame_bytes;
  }
  return d;
}

}  // namespace amr
