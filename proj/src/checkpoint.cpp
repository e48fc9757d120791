#include "aecnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "binary_io.hpp"

namespace aecnn {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void write_checkpoint(std::ostream& out, std::span<const NamedArray> arrays) {
    BinaryWriter w(out);
    w.bytes(kCheckpointMagic, 6);
    w.u64(arrays.size());
    for (const auto& a : arrays) {
        std::uint64_t expected = 1;
        for (auto d : a.dims) expected *= d;
        if (expected != a.values.size()) throw std::invalid_argument("checkpoint: shape/value mismatch for " + a.name);
        w.str32(a.name);
        w.u32(static_cast<std::uint32_t>(a.dims.size()));
        for (auto d : a.dims) w.u64(d);
        w.f64s(a.values);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::vector<NamedArray> read_checkpoint(std::istream& in) {
    BinaryReader r(in);
    char magic[6];
    r.bytes(magic, 6, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 6) != 0) throw FormatError("checkpoint: bad magic", 0);
    const std::uint64_t count = r.u64("parameter count");
    std::vector<NamedArray> arrays;
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = r.str32("parameter name");
        const std::uint32_t rank = r.u32("rank");
        if (rank > 8) throw FormatError("checkpoint: implausible rank " + std::to_string(rank), r.position());
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            a.dims.push_back(r.u64("dimension"));
            n *= a.dims.back();
        }
        a.values = r.f64s(n, "values");
        arrays.push_back(std::move(a));
    }
    r.expect_end();
    return arrays;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_checkpoint(out, arrays);
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

std::vector<NamedArray> snapshot(const ParameterList& params) {
    std::vector<NamedArray> out;
    out.reserve(params.size());
    for (const auto& p : params) {
        NamedArray a;
        a.name = p.name;
        for (auto d : p.tensor.shape()) a.dims.push_back(d);
        a.values.assign(p.tensor.values().begin(), p.tensor.values().end());
        out.push_back(std::move(a));
    }
    return out;
}

void restore(ParameterList& params, std::span<const NamedArray> arrays) {
    std::map<std::string, const NamedArray*> by_name;
    for (const auto& a : arrays) by_name[a.name] = &a;
    for (auto& p : params) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw std::invalid_argument("checkpoint is missing parameter " + p.name);
        const NamedArray& a = *it->second;
        const auto& shape = p.tensor.shape();
        if (a.dims.size() != shape.size() || !std::equal(shape.begin(), shape.end(), a.dims.begin())) {
            throw std::invalid_argument("checkpoint shape mismatch for " + p.name);
        }
        auto dst = p.tensor.mutable_values();
        std::copy(a.values.begin(), a.values.end(), dst.begin());
    }
}

}  // namespace aecnn
