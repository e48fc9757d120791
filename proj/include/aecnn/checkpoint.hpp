#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aecnn/nn.hpp"

namespace aecnn {

/// Thrown by every binary/text reader; carries the byte offset (or line) where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t position)
        : std::runtime_error(what + " (at " + std::to_string(position) + ")"), position_(position) {}
    std::uint64_t position() const { return position_; }

private:
    std::uint64_t position_;
};

struct NamedArray {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> values;
};

/// Weight checkpoint layout (all integers little-endian):
///   "AECNN1" | u64 count | count x { u32 name_len | name | u32 rank | rank x u64 dim | f64 values }
inline constexpr char kCheckpointMagic[] = "AECNN1";

void write_checkpoint(std::ostream& out, std::span<const NamedArray> arrays);
std::vector<NamedArray> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

std::vector<NamedArray> snapshot(const ParameterList& params);
/// Copies values into `params` by name; every parameter must be present with a matching shape.
void restore(ParameterList& params, std::span<const NamedArray> arrays);

}  // namespace aecnn
