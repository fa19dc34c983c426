// Copyright (c) 2026 the dcan authors
// SPDX-License-Identifier: Apache-2.0

#include "dcan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dcan/common.hpp"

namespace dcan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& is, const std::string& what) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    check_data(static_cast<bool>(is), "checkpoint truncated reading " + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors,
                     const std::string& manifest) {
    std::ofstream os(path, std::ios::binary);
    check_data(static_cast<bool>(os), "cannot write checkpoint: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        int64_t numel = 1;
        for (int64_t d : t.shape) numel *= d;
        check(numel == static_cast<int64_t>(t.data.size()),
              "checkpoint tensor " + t.name + ": shape does not match data");
        write_u32(os, static_cast<uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int64_t d : t.shape) write_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    check_data(static_cast<bool>(os), "write failed: " + path);

    std::ofstream ms(path + ".manifest");
    check_data(static_cast<bool>(ms), "cannot write manifest: " + path + ".manifest");
    ms << manifest;
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check_data(static_cast<bool>(is), "cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    check_data(static_cast<bool>(is) && std::memcmp(magic, kMagic, 4) == 0,
               "not a checkpoint file: " + path);
    const uint32_t version = read_u32(is, "version");
    check_data(version == kVersion, "unsupported checkpoint version");
    const uint32_t count = read_u32(is, "tensor count");
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const uint32_t name_len = read_u32(is, "name length");
        t.name.resize(name_len);
        is.read(t.name.data(), name_len);
        check_data(static_cast<bool>(is), "checkpoint truncated reading name");
        const uint32_t rank = read_u32(is, "rank");
        int64_t numel = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            const uint32_t d = read_u32(is, "dim");
            t.shape.push_back(d);
            numel *= d;
        }
        t.data.resize(static_cast<size_t>(numel));
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        check_data(static_cast<bool>(is), "checkpoint truncated reading " + t.name);
        out.push_back(std::move(t));
    }
    return out;
}

std::string load_manifest(const std::string& path) {
    std::ifstream is(path + ".manifest");
    check_data(static_cast<bool>(is), "cannot open manifest: " + path + ".manifest");
    std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace dcan
