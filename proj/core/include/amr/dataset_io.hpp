// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_DATASET_IO_HPP
#define AMR_DATASET_IO_HPP

#include <string>

#include "amr/datagen.hpp"

namespace amr {

// .amrd container: magic "AMRD", u32 version, u32 manifest byte length,
// UTF-8 JSON manifest, then per frame: u16 class_id, i16 snr_db and
// 2*L little-endian 32-bit floats (I row then Q row).

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void write_dataset(const Dataset& d, const std::string& path);
Dataset read_dataset(const std::string& path);

/// FNV-1a of the serialized manifest; recorded in run manifests.
std::uint64_t manifest_hash(const DatasetManifest& m);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& json_text);

}  // namespace amr

#endif  // AMR_DATASET_IO_HPP
