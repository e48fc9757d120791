#include "aecnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace aecnn {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<std::string_view, E> (&table)[N], const char* what) {
    const std::string key = lower(trim(s));
    for (const auto& [name, value] : table) {
        if (key == lower(name)) return value;
    }
    throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::pair<std::string_view, Task> kTasks[] = {{"classification", Task::Classification},
                                                        {"segmentation", Task::Segmentation}};
constexpr std::pair<std::string_view, SearchMode> kSearch[] = {{"knn", SearchMode::Knn}, {"ball", SearchMode::Ball}};
constexpr std::pair<std::string_view, InputMode> kInputs[] = {{"rir", InputMode::Rir}, {"absolute", InputMode::Absolute}};
constexpr std::pair<std::string_view, AlignVariant> kVariants[] = {{"edgeconv", AlignVariant::PlainEdgeConv},
                                                                   {"aeconv1", AlignVariant::AEConv1},
                                                                   {"aeconv2", AlignVariant::AEConv2},
                                                                   {"aeconv3", AlignVariant::AEConv3}};
constexpr std::pair<std::string_view, Setting> kSettings[] = {
    {"Y/Y", Setting::YY}, {"Y/AR", Setting::YAR}, {"AR/AR", Setting::ARAR}, {"yy", Setting::YY},
    {"yar", Setting::YAR}, {"arar", Setting::ARAR}};
constexpr std::pair<std::string_view, AnchorStrategy> kAnchors[] = {{"mean", AnchorStrategy::Mean},
                                                                    {"max_projection", AnchorStrategy::MaxProjection}};

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::pair<std::string_view, E> (&table)[N]) {
    for (const auto& [name, value] : table) {
        if (value == v) return name;
    }
    return "?";
}

std::size_t parse_size(std::string_view s, const std::string& key) {
    s = trim(s);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument(key + ": expected a count, got '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_u64(std::string_view s, const std::string& key) {
    s = trim(s);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument(key + ": expected an integer, got '" + std::string(s) + "'");
    return v;
}

int parse_int(std::string_view s, const std::string& key) {
    s = trim(s);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument(key + ": expected an integer, got '" + std::string(s) + "'");
    return v;
}

double parse_double(std::string_view s, const std::string& key) {
    const std::string str(trim(s));
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(str, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != str.size()) throw std::invalid_argument(key + ": expected a number, got '" + str + "'");
    return v;
}

bool parse_bool(std::string_view s, const std::string& key) {
    const std::string v = lower(trim(s));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_widths(std::string_view s, const std::string& key) {
    std::vector<std::size_t> out;
    s = trim(s);
    if (s.empty()) return out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        const auto part = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(parse_size(part, key));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

std::string_view to_string(Task v) { return enum_name(v, kTasks); }
std::string_view to_string(SearchMode v) { return enum_name(v, kSearch); }
std::string_view to_string(InputMode v) { return enum_name(v, kInputs); }
std::string_view to_string(AlignVariant v) { return enum_name(v, kVariants); }
std::string_view to_string(Setting v) { return enum_name(v, kSettings); }
std::string_view to_string(AnchorStrategy v) { return enum_name(v, kAnchors); }

Task parse_task(std::string_view s) { return parse_enum(s, kTasks, "task"); }
SearchMode parse_search(std::string_view s) { return parse_enum(s, kSearch, "search mode"); }
InputMode parse_input(std::string_view s) { return parse_enum(s, kInputs, "input mode"); }
AlignVariant parse_variant(std::string_view s) { return parse_enum(s, kVariants, "alignment variant"); }
Setting parse_setting(std::string_view s) { return parse_enum(s, kSettings, "rotation setting"); }
AnchorStrategy parse_anchor(std::string_view s) { return parse_enum(s, kAnchors, "anchor strategy"); }

NetworkConfig NetworkConfig::desk_default() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::paper_scale() {
    NetworkConfig c;
    c.n_points = 1024;
    c.sa_first.n_ref = 512;
    c.n_classes = 40;
    return c;
}

NetworkConfig NetworkConfig::segmentation_default() {
    NetworkConfig c;
    c.task = Task::Segmentation;
    c.n_points = 256;
    c.n_classes = 2;
    c.n_parts = 2;
    c.sa_first = {256, 32, AnchorStrategy::Mean, SearchMode::Knn, 0.2, {32, 64}};
    c.sa_next = {{16, {64, 128}, {64}}, {16, {128, 128}, {128}}};
    c.fp_widths = {{128, 128}, {64, 64}};
    c.seg_head_hidden = {64};
    return c;
}

std::vector<std::size_t> NetworkConfig::level_sizes() const {
    std::vector<std::size_t> sizes{sa_first.n_ref};
    for (std::size_t i = 0; i < sa_next.size(); ++i) sizes.push_back(sizes.back() / 4);
    return sizes;
}

std::vector<std::size_t> NetworkConfig::level_widths() const {
    std::vector<std::size_t> widths{sa_first.widths.empty() ? 0 : sa_first.widths.back()};
    for (const auto& b : sa_next) widths.push_back(b.widths.empty() ? 0 : b.widths.back());
    return widths;
}

std::vector<std::string> NetworkConfig::validate() const {
    std::vector<std::string> p;
    auto no_zero = [&](const std::vector<std::size_t>& w, const std::string& what) {
        if (std::find(w.begin(), w.end(), std::size_t{0}) != w.end()) p.push_back(what + " contains a zero width");
    };
    if (n_points < 1) p.push_back("n_points must be at least 1");
    if (sa_first.n_ref < 1 || sa_first.n_ref > n_points) {
        p.push_back("sa_first.n_ref must lie in [1, n_points]");
    }
    if (sa_first.k < 1) p.push_back("sa_first.k must be at least 1");
    if (sa_first.search == SearchMode::Ball && !(sa_first.radius > 0.0)) p.push_back("sa_first.radius must be positive");
    if (sa_first.widths.empty()) p.push_back("sa_first.widths is empty");
    no_zero(sa_first.widths, "sa_first.widths");
    if (sa_next.empty()) p.push_back("at least one sa_next block is required");
    std::size_t count = sa_first.n_ref;
    for (std::size_t i = 0; i < sa_next.size(); ++i) {
        const std::string tag = "sa_next." + std::to_string(i);
        if (count < 4) {
            p.push_back(tag + " receives " + std::to_string(count) + " references; at least 4 are required");
        }
        count /= 4;
        if (sa_next[i].k < 1) p.push_back(tag + ".k must be at least 1");
        if (sa_next[i].widths.empty()) p.push_back(tag + ".widths is empty");
        no_zero(sa_next[i].widths, tag + ".widths");
        no_zero(sa_next[i].align_hidden, tag + ".align_hidden");
    }
    if (task == Task::Classification) {
        if (n_classes < 2) p.push_back("n_classes must be at least 2");
        no_zero(head_hidden, "head.hidden");
    } else {
        if (sa_first.n_ref != n_points) p.push_back("segmentation requires sa_first.n_ref == n_points");
        if (n_classes < 1) p.push_back("n_classes must be at least 1");
        if (n_parts < 2) p.push_back("n_parts must be at least 2");
        if (interpolation_k < 1) p.push_back("interpolation_k must be at least 1");
        if (fp_widths.size() != sa_next.size()) {
            p.push_back("segmentation needs one propagation stage per sa_next block (" + std::to_string(sa_next.size()) +
                        "), got " + std::to_string(fp_widths.size()));
        }
        for (std::size_t i = 0; i < fp_widths.size(); ++i) {
            if (fp_widths[i].empty()) p.push_back("fp." + std::to_string(i) + " is empty");
            no_zero(fp_widths[i], "fp." + std::to_string(i));
        }
        no_zero(seg_head_hidden, "segmentation.head_hidden");
    }
    if (orthogonality_weight < 0.0) p.push_back("orthogonality_weight must be non-negative");
    return p;
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string msg = "invalid configuration:";
          for (const auto& s : problems) msg += "\n  - " + s;
          return msg;
      }()),
      problems_(std::move(problems)) {}

void check(const NetworkConfig& config) {
    auto problems = config.validate();
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::map<std::size_t, SaNextConfig> next_blocks;
    std::map<std::size_t, std::vector<std::size_t>> fp_blocks;
    std::vector<std::string> problems;
    std::string section;

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') {
                problems.push_back(where + ": unterminated section header");
                continue;
            }
            section = lower(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back(where + ": expected key = value");
            continue;
        }
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;
        try {
            auto& n = cfg.network;
            if (section == "network") {
                if (key == "task") n.task = parse_task(value);
                else if (key == "n_points") n.n_points = parse_size(value, full);
                else if (key == "n_classes") n.n_classes = parse_size(value, full);
                else if (key == "n_parts") n.n_parts = parse_size(value, full);
                else if (key == "input") n.input = parse_input(value);
                else if (key == "variant") n.variant = parse_variant(value);
                else if (key == "normalization") n.normalization = parse_bool(value, full);
                else if (key == "orthogonality_weight") n.orthogonality_weight = parse_double(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else if (section == "sa_first") {
                auto& s = n.sa_first;
                if (key == "n_ref") s.n_ref = parse_size(value, full);
                else if (key == "k") s.k = parse_size(value, full);
                else if (key == "anchor") s.anchor = parse_anchor(value);
                else if (key == "search") s.search = parse_search(value);
                else if (key == "radius") s.radius = parse_double(value, full);
                else if (key == "widths") s.widths = parse_widths(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else if (section.rfind("sa_next.", 0) == 0) {
                const std::size_t idx = parse_size(section.substr(8), section);
                auto& b = next_blocks[idx];
                if (key == "k") b.k = parse_size(value, full);
                else if (key == "widths") b.widths = parse_widths(value, full);
                else if (key == "align_hidden") b.align_hidden = parse_widths(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else if (section == "head") {
                if (key == "hidden") n.head_hidden = parse_widths(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else if (section == "segmentation") {
                if (key == "interpolation_k") n.interpolation_k = parse_size(value, full);
                else if (key == "head_hidden") n.seg_head_hidden = parse_widths(value, full);
                else if (key.rfind("fp.", 0) == 0) fp_blocks[parse_size(key.substr(3), full)] = parse_widths(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else if (section == "train") {
                auto& t = cfg.train;
                if (key == "epochs") t.epochs = parse_int(value, full);
                else if (key == "batch_size") t.batch_size = parse_size(value, full);
                else if (key == "lr") t.lr = parse_double(value, full);
                else if (key == "lr_factor") t.lr_factor = parse_double(value, full);
                else if (key == "lr_step") t.lr_step = parse_int(value, full);
                else if (key == "setting") t.setting = parse_setting(value);
                else if (key == "seed") t.seed = parse_u64(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else if (section == "data") {
                auto& d = cfg.data;
                if (key == "source") d.source = std::string(value);
                else if (key == "train_path") d.train_path = std::string(value);
                else if (key == "test_path") d.test_path = std::string(value);
                else if (key == "train_per_class") d.train_per_class = parse_size(value, full);
                else if (key == "test_per_class") d.test_per_class = parse_size(value, full);
                else throw std::invalid_argument("unknown key " + full);
            } else {
                throw std::invalid_argument("key outside a known section: " + full);
            }
        } catch (const std::invalid_argument& e) {
            problems.push_back(where + ": " + e.what());
        }
    }

    auto contiguous = [&](const auto& blocks, const char* what) {
        std::size_t expect = 0;
        for (const auto& [idx, _] : blocks) {
            if (idx != expect++) problems.push_back(std::string(what) + " sections must be numbered 0, 1, 2, ...");
        }
    };
    contiguous(next_blocks, "sa_next");
    contiguous(fp_blocks, "fp");
    if (!next_blocks.empty()) {
        cfg.network.sa_next.clear();
        for (auto& [_, b] : next_blocks) cfg.network.sa_next.push_back(b);
    }
    if (!fp_blocks.empty()) {
        cfg.network.fp_widths.clear();
        for (auto& [_, w] : fp_blocks) cfg.network.fp_widths.push_back(w);
    }
    if (cfg.train.epochs < 1) problems.push_back("train.epochs must be at least 1");
    if (cfg.train.batch_size < 1) problems.push_back("train.batch_size must be at least 1");
    if (cfg.data.source != "synthetic" && cfg.data.source != "file") problems.push_back("data.source must be synthetic or file");
    for (auto& s : cfg.network.validate()) problems.push_back(std::move(s));
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    const auto& n = cfg.network;
    std::ostringstream os;
    os << "[network]\n"
       << "task = " << to_string(n.task) << "\n"
       << "n_points = " << n.n_points << "\n"
       << "n_classes = " << n.n_classes << "\n"
       << "n_parts = " << n.n_parts << "\n"
       << "input = " << to_string(n.input) << "\n"
       << "variant = " << to_string(n.variant) << "\n"
       << "normalization = " << (n.normalization ? "true" : "false") << "\n"
       << "orthogonality_weight = " << fmt_double(n.orthogonality_weight) << "\n\n";
    os << "[sa_first]\n"
       << "n_ref = " << n.sa_first.n_ref << "\n"
       << "k = " << n.sa_first.k << "\n"
       << "anchor = " << to_string(n.sa_first.anchor) << "\n"
       << "search = " << to_string(n.sa_first.search) << "\n"
       << "radius = " << fmt_double(n.sa_first.radius) << "\n"
       << "widths = " << join(n.sa_first.widths) << "\n\n";
    for (std::size_t i = 0; i < n.sa_next.size(); ++i) {
        os << "[sa_next." << i << "]\n"
           << "k = " << n.sa_next[i].k << "\n"
           << "widths = " << join(n.sa_next[i].widths) << "\n"
           << "align_hidden = " << join(n.sa_next[i].align_hidden) << "\n\n";
    }
    os << "[head]\nhidden = " << join(n.head_hidden) << "\n\n";
    os << "[segmentation]\n"
       << "interpolation_k = " << n.interpolation_k << "\n";
    for (std::size_t i = 0; i < n.fp_widths.size(); ++i) os << "fp." << i << " = " << join(n.fp_widths[i]) << "\n";
    os << "head_hidden = " << join(n.seg_head_hidden) << "\n\n";
    const auto& t = cfg.train;
    os << "[train]\n"
       << "epochs = " << t.epochs << "\n"
       << "batch_size = " << t.batch_size << "\n"
       << "lr = " << fmt_double(t.lr) << "\n"
       << "lr_factor = " << fmt_double(t.lr_factor) << "\n"
       << "lr_step = " << t.lr_step << "\n"
       << "setting = " << to_string(t.setting) << "\n"
       << "seed = " << t.seed << "\n\n";
    const auto& d = cfg.data;
    os << "[data]\n"
       << "source = " << d.source << "\n"
       << "train_path = " << d.train_path << "\n"
       << "test_path = " << d.test_path << "\n"
       << "train_per_class = " << d.train_per_class << "\n"
       << "test_per_class = " << d.test_per_class << "\n";
    return os.str();
}

}  // namespace aecnn
