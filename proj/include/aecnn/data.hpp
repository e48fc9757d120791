#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "aecnn/geometry.hpp"

namespace aecnn {

struct Dataset {
    std::vector<PointCloud> samples;
    std::vector<std::string> class_names;
    std::vector<std::string> part_names;
    std::string split_tag;

    std::size_t size() const { return samples.size(); }
    /// Throws std::invalid_argument when a class or part label falls outside the declared names.
    void validate() const;
};

// ---- .xyz text ---------------------------------------------------------------------------
// One "x y z [part_label]" per line. '#' starts a comment; a "# class N" line sets the class label.
// Either every point carries a part label or none does.

PointCloud read_xyz(std::istream& in);
void write_xyz(std::ostream& out, const PointCloud& cloud);
PointCloud load_xyz(const std::filesystem::path& path);
void save_xyz(const std::filesystem::path& path, const PointCloud& cloud);

// ---- AEDS1 binary ------------------------------------------------------------------------
// "AEDS1" | str32 split_tag | u32 n_classes | n x str32 | u32 n_parts | n x str32 | u64 count |
// count x { u32 class (0xFFFFFFFF: none) | u64 n | 3n x f64 | u8 has_labels | [n x u8 label] }
// str32 is a u32 byte length followed by the bytes; integers and floats are little-endian.

inline constexpr char kDatasetMagic[] = "AEDS1";

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset_bin(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset_bin(const std::filesystem::path& path);

// ---- synthetic shapes --------------------------------------------------------------------

/// Area-uniform surface samplers, before jitter and normalization.
namespace shapes {
std::vector<Point3> sphere(std::size_t n, Rng& rng, double radius = 1.0);
std::vector<Point3> cube(std::size_t n, Rng& rng, double half_side = 1.0);
/// Axis along +y, lateral surface plus both caps.
std::vector<Point3> cylinder(std::size_t n, Rng& rng, double radius = 0.5, double half_height = 1.0);
/// Ring in the xz plane.
std::vector<Point3> torus(std::size_t n, Rng& rng, double major = 1.0, double minor = 0.35);
}  // namespace shapes

inline constexpr double kSynthJitter = 0.01;

/// Sphere, cube, cylinder, torus; n_per_class samples each in class order, jittered and normalized.
Dataset synth_classification(std::size_t n_per_class, std::size_t n_points, Rng& rng);

/// Fraction of a segmentation sample's points drawn for part 0.
struct PartBounds {
    double min_part0 = 0.4;
    double max_part0 = 0.6;
};

/// "barbell" (end spheres = part 0, bar = part 1) and "mushroom" (cap = part 0, stem = part 1).
Dataset synth_segmentation(std::size_t n_per_class, std::size_t n_points, Rng& rng, PartBounds bounds = {});

}  // namespace aecnn
