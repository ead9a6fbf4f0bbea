// SPDX-License-Identifier: Apache-2.0
#include "amr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "amr/errors.hpp"

namespace amr {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'C', 'G', 'D'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(std::uint8_t(buf[off + i])) << (8 * i);
  return v;
}

struct BlobWriter {
  json tensors = json::array();
  std::string blob;

  void add(const std::string& name, const std::vector<std::size_t>& shape,
           bool prunable, const float* data, std::size_t n) {
    json t;
    t["name"] = name;
    t["shape"] = shape;
    t["offset"] = blob.size();
    t["prunable"] = prunable;
    tensors.push_back(t);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, data + i, 4);
      put_u32(blob, bits);
    }
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState* optimizer, const MaskSet* masks) {
  BlobWriter w;
  for (const auto& e : model.params)
    w.add(e.name, e.value.shape, e.prunable, e.value.ptr(), e.value.numel());

  json manifest;
  manifest["model"] = {{"L", model.spec.frame_len},
                       {"C", model.spec.num_classes},
                       {"variant", variant_name(model.spec.variant)}};

  if (optimizer && !optimizer->m.empty()) {
    manifest["optimizer"] = {{"type", "adam"},
                             {"step", optimizer->step},
                             {"lr", optimizer->lr},
                             {"beta1", optimizer->beta1},
                             {"beta2", optimizer->beta2},
                             {"epsilon", optimizer->epsilon}};
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      const auto& e = model.params.entry(i);
      w.add("adam/m/" + e.name, e.value.shape, false, optimizer->m[i].ptr(),
            optimizer->m[i].numel());
      w.add("adam/v/" + e.name, e.value.shape, false, optimizer->v[i].ptr(),
            optimizer->v[i].numel());
    }
  }

  if (masks && !masks->empty()) {
    for (const auto& [name, mask] : masks->masks) {
      std::vector<float> asf(mask.begin(), mask.end());
      const auto& e = model.params.at(name);
      w.add("mask/" + name, e.value.shape, false, asf.data(), asf.size());
    }
  }

  manifest["tensors"] = w.tensors;
  const std::string mtext = manifest.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kCheckpointFormatVersion);
  put_u32(out, std::uint32_t(mtext.size()));
  out += mtext;
  out += w.blob;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open for writing: " + path);
  os.write(out.data(), std::streamsize(out.size()));
  if (!os) throw InputError("short write: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path, 0);
  std::string buf((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 12) throw FormatError("file too short for header", buf.size());
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("bad magic, expected PCGD", 0);
  if (get_u32(buf, 4) != kCheckpointFormatVersion)
    throw FormatError("unsupported checkpoint version", 4);
  const std::uint32_t mlen = get_u32(buf, 8);
  if (12 + std::size_t(mlen) > buf.size())
    throw FormatError("manifest extends past end of file", 8);

  json manifest;
  try {
    manifest = json::parse(buf.substr(12, mlen));
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad manifest JSON: ") + e.what(), 12);
  }

  ModelSpec spec;
  spec.frame_len = manifest.at("model").at("L").get<std::size_t>();
  spec.num_classes = manifest.at("model").at("C").get<std::size_t>();
  spec.variant =
      variant_from_name(manifest.at("model").at("variant").get<std::string>());

  LoadedCheckpoint ck{build<float>(spec, 0), std::nullopt, std::nullopt};

  const std::size_t blob_base = 12 + mlen;
  auto read_tensor = [&](const json& t) {
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    const std::size_t n = Tensor::numel_of(shape);
    const std::size_t off = blob_base + t.at("offset").get<std::size_t>();
    if (off + 4 * n > buf.size())
      throw FormatError("tensor data truncated: " +
                            t.at("name").get<std::string>(),
                        off);
    Tensor out(shape);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = get_u32(buf, off + 4 * i);
      std::memcpy(&out.data[i], &bits, 4);
    }
    return out;
  };

  AdamState opt;
  bool have_opt = false;
  if (manifest.contains("optimizer")) {
    const auto& o = manifest.at("optimizer");
    opt.step = o.at("step").get<std::int64_t>();
    opt.lr = o.at("lr").get<double>();
    opt.beta1 = o.at("beta1").get<double>();
    opt.beta2 = o.at("beta2").get<double>();
    opt.epsilon = o.at("epsilon").get<double>();
    opt.m.resize(ck.model.params.size());
    opt.v.resize(ck.model.params.size());
    have_opt = true;
  }
  MaskSet masks;

  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    if (name.rfind("adam/m/", 0) == 0 || name.rfind("adam/v/", 0) == 0) {
      if (!have_opt)
        throw FormatError("optimizer tensor without optimizer section", 12);
      const bool is_m = name[5] == 'm';
      const std::string pname = name.substr(7);
      ck.model.params.at(pname);  // existence check
      Tensor v = read_tensor(t);
      for (std::size_t i = 0; i < ck.model.params.size(); ++i) {
        if (ck.model.params.entry(i).name == pname) {
          (is_m ? opt.m : opt.v)[i] = std::move(v);
          break;
        }
      }
    } else if (name.rfind("mask/", 0) == 0) {
      Tensor v = read_tensor(t);
      auto& mask = masks.masks[name.substr(5)];
      mask.resize(v.numel());
      for (std::size_t i = 0; i < v.numel(); ++i)
        mask[i] = v.data[i] != 0.0f ? 1 : 0;
    } else {
      auto& e = ck.model.params.at(name);
      Tensor v = read_tensor(t);
      if (v.shape != e.value.shape)
        throw FormatError("tensor shape mismatch for " + name, 12);
      e.value = std::move(v);
    }
  }

  if (have_opt) ck.optimizer = std::move(opt);
  if (!masks.empty()) ck.masks = std::move(masks);
  return ck;
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const ModelSpec& expect) {
  auto ck = load_checkpoint(path);
  if (!(ck.model.spec == expect))
    throw ConfigError("checkpoint spec does not match: have L=" +
                      std::to_string(ck.model.spec.frame_len) +
                      " C=" + std::to_string(ck.model.spec.num_classes) +
                      " variant=" + variant_name(ck.model.spec.variant));
  return ck;
}

}  // namespace amr
