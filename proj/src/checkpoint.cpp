#include "iasdet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace iasdet {
namespace {

constexpr char kMagic[8] = {'I', 'A', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
        fail("checkpoint: truncated file while reading ", what);
    }
    return v;
}

std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
        fail("checkpoint: truncated file while reading ", what);
    }
    return v;
}

std::string read_string(std::istream& is, const char* what) {
    const std::uint32_t len = read_u32(is, what);
    std::string s(len, '\0');
    if (!is.read(s.data(), len)) fail("checkpoint: truncated file while reading ", what);
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("checkpoint: cannot open ", path.string(), " for writing");

    os.write(kMagic, sizeof kMagic);
    write_u32(os, kVersion);

    write_u32(os, static_cast<std::uint32_t>(ckpt.metadata.size()));
    for (const auto& [key, value] : ckpt.metadata) {
        write_string(os, key);
        write_string(os, value);
    }

    write_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        write_string(os, name);
        write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d = 0; d < tensor.rank(); ++d) write_u64(os, tensor.dim(d));
        os.write(reinterpret_cast<const char*>(tensor.data().data()),
                 static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
    }
    if (!os) fail("checkpoint: write to ", path.string(), " failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("checkpoint: cannot open ", path.string());

    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        fail("checkpoint: ", path.string(), " is not a checkpoint file");
    }
    const std::uint32_t version = read_u32(is, "version");
    if (version != kVersion) {
        fail("checkpoint: ", path.string(), " has unsupported format version ", version);
    }

    Checkpoint ckpt;
    const std::uint32_t n_meta = read_u32(is, "metadata count");
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string key = read_string(is, "metadata key");
        ckpt.metadata[key] = read_string(is, "metadata value");
    }

    const std::uint32_t n_tensors = read_u32(is, "tensor count");
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = read_string(is, "tensor name");
        const std::uint32_t rank = read_u32(is, "tensor rank");
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<std::size_t>(read_u64(is, "tensor dim"));
        }
        std::vector<double> data(shape_numel(shape));
        if (!is.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(data.size() * sizeof(double)))) {
            fail("checkpoint: truncated tensor data for '", name, "'");
        }
        ckpt.tensors.emplace(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
    }
    return ckpt;
}

}  // namespace iasdet
