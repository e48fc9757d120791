#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aecnn/lrf.hpp"

namespace aecnn {

enum class Task { Classification, Segmentation };
enum class SearchMode { Knn, Ball };
/// What the first block encodes: coordinates in each reference's LRF, or raw offsets in the
/// global frame (a rotation-sensitive baseline).
enum class InputMode { Rir, Absolute };
enum class AlignVariant { PlainEdgeConv, AEConv1, AEConv2, AEConv3 };
/// Train/test rotation protocol.
enum class Setting { YY, YAR, ARAR };

std::string_view to_string(Task v);
std::string_view to_string(SearchMode v);
std::string_view to_string(InputMode v);
std::string_view to_string(AlignVariant v);
std::string_view to_string(Setting v);
std::string_view to_string(AnchorStrategy v);

/// Parsers accept the to_string spellings (case-insensitive); throw std::invalid_argument.
Task parse_task(std::string_view s);
SearchMode parse_search(std::string_view s);
InputMode parse_input(std::string_view s);
AlignVariant parse_variant(std::string_view s);
Setting parse_setting(std::string_view s);
AnchorStrategy parse_anchor(std::string_view s);

struct SaFirstConfig {
    std::size_t n_ref = 128;
    std::size_t k = 48;
    AnchorStrategy anchor = AnchorStrategy::Mean;
    SearchMode search = SearchMode::Knn;
    double radius = 0.2;
    /// Output widths of the shared point MLP (input width 3 is implied).
    std::vector<std::size_t> widths{64, 128};
};

struct SaNextConfig {
    std::size_t k = 16;
    /// Output widths of the fusion MLP (input width 2F+3, or 2F for plain edge conv).
    std::vector<std::size_t> widths;
    /// Hidden widths of the alignment MLP.
    std::vector<std::size_t> align_hidden;
};

struct NetworkConfig {
    Task task = Task::Classification;
    std::size_t n_points = 256;
    std::size_t n_classes = 4;
    std::size_t n_parts = 2;
    InputMode input = InputMode::Rir;
    AlignVariant variant = AlignVariant::AEConv3;
    bool normalization = false;
    SaFirstConfig sa_first;
    std::vector<SaNextConfig> sa_next{{16, {128, 256}, {128}}, {16, {256, 512}, {256}}};
    std::vector<std::size_t> head_hidden{256};
    // Segmentation only.
    std::size_t interpolation_k = 3;
    /// One entry per propagation stage, coarsest first; output widths of the unit MLP.
    std::vector<std::vector<std::size_t>> fp_widths{{256, 256}, {128, 128}};
    std::vector<std::size_t> seg_head_hidden{128};
    /// Weight of the feature-transform orthogonality penalty (AEConv1 only).
    double orthogonality_weight = 1e-3;

    /// 256 points, 128/32/8 references, k = 48 then 16.
    static NetworkConfig desk_default();
    /// 1024 points with 512 first-level references.
    static NetworkConfig paper_scale();
    /// Part segmentation: every input point is a first-level reference.
    static NetworkConfig segmentation_default();

    /// Reference count entering each block: [n_ref, n_ref/4, ...].
    std::vector<std::size_t> level_sizes() const;
    /// Feature width leaving each block.
    std::vector<std::size_t> level_widths() const;

    /// Every problem found; empty when the configuration is usable.
    std::vector<std::string> validate() const;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Throws ConfigError listing every problem.
void check(const NetworkConfig& config);

struct TrainConfig {
    int epochs = 60;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double lr_factor = 0.2;
    /// 0 selects the schedule compressed to `epochs`.
    int lr_step = 0;
    Setting setting = Setting::ARAR;
    std::uint64_t seed = 1;
};

struct DataConfig {
    /// "synthetic" or "file".
    std::string source = "synthetic";
    std::string train_path;
    std::string test_path;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
};

struct ExperimentConfig {
    NetworkConfig network;
    TrainConfig train;
    DataConfig data;
};

/// Flat text: `[section]` headers, `key = value` lines, `#` comments. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

}  // namespace aecnn
