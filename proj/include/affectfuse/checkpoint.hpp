#pragma once

// AFCK1 checkpoint files.
//
// Layout:
//   bytes 0..7    magic "AFCK1\0\0\0"
//   bytes 8..15   header length N, uint64 little-endian
//   bytes 16..    N bytes of JSON header
//   then          tensor payload, float64 little-endian, row-major
//
// The header records {"format","endianness","dtype","meta","tensors":[{name,shape,offset,nbytes}]}
// with offsets relative to the start of the payload.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "affectfuse/tensor.hpp"

namespace affectfuse {

using json = nlohmann::json;

inline constexpr char checkpoint_magic[8] = {'A', 'F', 'C', 'K', '1', '\0', '\0', '\0'};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct Checkpoint {
    json meta = json::object();
    std::vector<NamedTensor> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& nt : tensors)
            if (nt.name == name) return &nt.tensor;
        return nullptr;
    }
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ParseError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    json header;
    header["format"] = "AFCK1";
    header["endianness"] = "little";
    header["dtype"] = "float64";
    header["meta"] = ck.meta;
    json entries = json::array();
    std::uint64_t offset = 0;
    for (const auto& nt : ck.tensors) {
        const std::uint64_t nbytes = nt.tensor.size() * sizeof(double);
        entries.push_back({{"name", nt.name}, {"shape", nt.tensor.shape()}, {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
    }
    header["tensors"] = std::move(entries);
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot write " + path.string());
    os.write(checkpoint_magic, 8);
    detail::put_u64(os, text.size());
    os.write(text.data(), std::streamsize(text.size()));
    for (const auto& nt : ck.tensors)
        os.write(reinterpret_cast<const char*>(nt.tensor.data()), std::streamsize(nt.tensor.size() * sizeof(double)));
    if (!os) throw DataError("checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, checkpoint_magic, 8) != 0) throw ParseError("checkpoint: bad magic in " + path.string());
    const std::uint64_t hlen = detail::get_u64(is);
    std::string text(hlen, '\0');
    is.read(text.data(), std::streamsize(hlen));
    if (!is) throw ParseError("checkpoint: truncated header");
    json header = json::parse(text);
    if (header.value("format", "") != "AFCK1" || header.value("dtype", "") != "float64" ||
        header.value("endianness", "") != "little")
        throw ParseError("checkpoint: unsupported format/dtype/endianness");
    const auto payload_start = is.tellg();
    Checkpoint ck;
    ck.meta = header.value("meta", json::object());
    for (const auto& e : header.at("tensors")) {
        Shape shape = e.at("shape").get<Shape>();
        Tensor t(shape);
        const auto nbytes = e.at("nbytes").get<std::uint64_t>();
        if (nbytes != t.size() * sizeof(double)) throw ParseError("checkpoint: size mismatch for " + e.at("name").get<std::string>());
        is.seekg(payload_start + std::streamoff(e.at("offset").get<std::uint64_t>()));
        is.read(reinterpret_cast<char*>(t.data()), std::streamsize(nbytes));
        if (!is) throw ParseError("checkpoint: truncated payload");
        ck.tensors.push_back({e.at("name").get<std::string>(), std::move(t)});
    }
    return ck;
}

}  // namespace affectfuse
