// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat binary checkpoint of named f32 tensors, little-endian:
//   "DCKP" u32 version u32 count
//   per tensor: u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 data
// A plain-text manifest (hyperparameters) is written next to the binary as
// <path>.manifest.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dcan {

struct NamedTensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> data;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors,
                     const std::string& manifest);

std::vector<NamedTensor> load_checkpoint(const std::string& path);

std::string load_manifest(const std::string& path);

}  // namespace dcan
