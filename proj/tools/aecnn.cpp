// Command-line front end: train, eval, audit, ablate, lrf-dump, make-dataset.
// Machine-readable output is one JSON object per line; every object carries "schema".

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "aecnn/audit.hpp"
#include "aecnn/checkpoint.hpp"
#include "aecnn/config.hpp"
#include "aecnn/data.hpp"
#include "aecnn/metrics.hpp"
#include "aecnn/network.hpp"
#include "aecnn/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace aecnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitAudit = 3;

constexpr const char* kRunSchema = "aecnn.run/1";
constexpr const char* kMetricsSchema = "aecnn.metrics/1";
constexpr const char* kAuditSchema = "aecnn.audit/1";
constexpr const char* kAblationSchema = "aecnn.ablation/1";
constexpr const char* kLrfSchema = "aecnn.lrf/1";

/// Thrown for bad user input that should exit with the validation code.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json metrics_json(const Metrics& m, Task task) {
    json j;
    j["setting"] = std::string(to_string(m.setting));
    j["samples"] = m.samples;
    if (task == Task::Classification) {
        j["accuracy"] = m.accuracy;
        j["per_class_accuracy"] = m.per_class_accuracy;
    } else {
        j["miou"] = m.miou;
        j["per_class_iou"] = m.per_class_iou;
    }
    return j;
}

json epoch_json(const EpochRecord& e) {
    return {{"schema", kRunSchema}, {"type", "epoch"},       {"epoch", e.epoch},
            {"lr", e.lr},           {"loss", e.loss},         {"train_accuracy", e.train_accuracy},
            {"test_metric", e.test_metric}, {"seconds", e.seconds}};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    if (name == "desk") cfg.network = NetworkConfig::desk_default();
    else if (name == "paper") cfg.network = NetworkConfig::paper_scale();
    else if (name == "segmentation") cfg.network = NetworkConfig::segmentation_default();
    else throw ValidationError("unknown preset '" + name + "' (desk, paper, segmentation)");
    return cfg;
}

ExperimentConfig load_experiment(const std::string& path, const std::string& preset_name) {
    return path.empty() ? preset(preset_name) : load_config(path);
}

struct Splits {
    Dataset train;
    Dataset test;
};

Dataset synthetic(Task task, std::size_t per_class, std::size_t n_points, Rng& rng) {
    return task == Task::Classification ? synth_classification(per_class, n_points, rng)
                                        : synth_segmentation(per_class, n_points, rng);
}

/// Synthetic splits come from one generator seeded by the run seed: train first, then test.
Splits load_splits(const ExperimentConfig& cfg) {
    Splits s;
    if (cfg.data.source == "file") {
        if (cfg.data.train_path.empty() || cfg.data.test_path.empty()) {
            throw ValidationError("data.source = file needs train_path and test_path");
        }
        s.train = load_dataset_bin(cfg.data.train_path);
        s.test = load_dataset_bin(cfg.data.test_path);
    } else {
        Rng rng(cfg.train.seed);
        s.train = synthetic(cfg.network.task, cfg.data.train_per_class, cfg.network.n_points, rng);
        s.test = synthetic(cfg.network.task, cfg.data.test_per_class, cfg.network.n_points, rng);
    }
    return s;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

/// Model rebuilt from the config.ini next to the checkpoint unless a config is given.
AecnnModel load_model(const fs::path& checkpoint, const std::string& config_path, ExperimentConfig* cfg_out) {
    if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint.string());
    const fs::path cfg_path = config_path.empty() ? checkpoint.parent_path() / "config.ini" : fs::path(config_path);
    ExperimentConfig cfg = load_config(cfg_path);
    AecnnModel model(cfg.network, cfg.train.seed);
    ParameterList params = model.parameters();
    restore(params, load_checkpoint(checkpoint));
    if (cfg_out) *cfg_out = cfg;
    return model;
}

// ---- train ---------------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string preset = "desk";
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string setting;
    std::string variant;
    std::optional<int> epochs;
    bool resume = false;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    ExperimentConfig cfg = load_experiment(a.config, a.preset);
    if (a.seed) cfg.train.seed = *a.seed;
    if (!a.setting.empty()) cfg.train.setting = parse_setting(a.setting);
    if (!a.variant.empty()) cfg.network.variant = parse_variant(a.variant);
    if (a.epochs) cfg.train.epochs = *a.epochs;
    if (cfg.train.epochs < 1) throw ValidationError("--epochs must be at least 1");
    check(cfg.network);

    const fs::path out(a.out);
    fs::create_directories(out);
    const fs::path ckpt = out / "model.ckpt";
    const fs::path opt = out / "optimizer.ckpt";
    const fs::path record = out / "run.jsonl";

    const Splits data = load_splits(cfg);
    AecnnModel model(cfg.network, cfg.train.seed);
    ParameterList params = model.parameters();
    TrainState state;
    if (a.resume) {
        if (!fs::exists(ckpt) || !fs::exists(opt)) throw std::runtime_error("--resume: no checkpoint in " + out.string());
        restore(params, load_checkpoint(ckpt));
        state = restore_state(load_checkpoint(opt), params);
    }
    write_text(out / "config.ini", serialize_config(cfg));

    auto log = open_out(record, a.resume ? std::ios::app : std::ios::trunc);
    if (!a.resume) {
        log << json{{"schema", kRunSchema}, {"type", "start"}, {"seed", cfg.train.seed},
                    {"setting", std::string(to_string(cfg.train.setting))}, {"config", serialize_config(cfg)}}
                   .dump()
            << '\n';
    }
    const auto start = std::chrono::steady_clock::now();
    TrainHooks hooks;
    hooks.test = &data.test;
    hooks.on_epoch = [&](const EpochRecord& e) {
        log << epoch_json(e).dump() << '\n';
        log.flush();
        save_checkpoint(ckpt, snapshot(params));
        save_checkpoint(opt, snapshot_state(state, params));
        if (!a.quiet) {
            std::fprintf(stderr, "epoch %d  lr %.3g  loss %.5f  train %.4f  test %.4f  (%.1fs)\n", e.epoch, e.lr, e.loss,
                         e.train_accuracy, e.test_metric, e.seconds);
        }
        return true;
    };
    const auto epochs = train(model, data.train, cfg.train, state, hooks);
    if (epochs.empty()) save_checkpoint(ckpt, snapshot(params));

    Rng eval_rng(cfg.train.seed ^ 0x9e3779b97f4a7c15ULL);
    const Metrics final_metrics = evaluate(model, data.test, cfg.train.setting, eval_rng);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json final_line = {{"schema", kRunSchema},
                             {"type", "final"},
                             {"seed", cfg.train.seed},
                             {"epochs", state.next_epoch},
                             {"final_loss", epochs.empty() ? 0.0 : epochs.back().loss},
                             {"metrics", metrics_json(final_metrics, cfg.network.task)},
                             {"parameters", parameter_count(params)},
                             {"wall_seconds", wall}};
    log << final_line.dump() << '\n';
    std::cout << final_line.dump() << '\n';
    return kExitOk;
}

// ---- eval ----------------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string config;
    std::string dataset;
    std::string setting;
    std::size_t votes = 1;
    std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& a) {
    if (a.votes < 1) throw ValidationError("--votes must be at least 1");
    ExperimentConfig cfg;
    const AecnnModel model = load_model(a.checkpoint, a.config, &cfg);
    const Setting setting = a.setting.empty() ? cfg.train.setting : parse_setting(a.setting);
    const Dataset data = a.dataset.empty() ? load_splits(cfg).test : load_dataset_bin(a.dataset);
    Rng rng(a.seed);
    const Metrics m = evaluate(model, data, setting, rng, a.votes);
    json j = {{"schema", kMetricsSchema}, {"votes", a.votes}};
    j.update(metrics_json(m, cfg.network.task));
    std::cout << j.dump() << '\n';
    return kExitOk;
}

// ---- audit ---------------------------------------------------------------------------------

struct AuditArgs {
    std::string checkpoint;
    std::string config;
    std::string preset = "desk";
    std::size_t rotations = 20;
    std::size_t clouds = 10;
    double tolerance = 1e-5;
    std::uint64_t seed = 1;
};

int cmd_audit(const AuditArgs& a) {
    if (!(a.tolerance > 0.0)) throw ValidationError("--tolerance must be positive");
    ExperimentConfig cfg;
    std::optional<AecnnModel> model;
    if (!a.checkpoint.empty()) {
        model.emplace(load_model(a.checkpoint, a.config, &cfg));
    } else {
        cfg = load_experiment(a.config, a.preset);
        model.emplace(cfg.network, a.seed);
    }
    Rng rng(a.seed);
    const Dataset clouds = synthetic(cfg.network.task, (a.clouds + 3) / 4, cfg.network.n_points, rng);
    const std::span<const PointCloud> used(clouds.samples.data(), std::min(a.clouds, clouds.size()));
    const AuditReport r = invariance_audit(*model, used, a.rotations, rng);
    const bool pass = r.vacuous() || r.passed(a.tolerance);
    if (r.vacuous()) std::fprintf(stderr, "warning: no rotations or clouds to audit; passing vacuously\n");
    std::cout << json{{"schema", kAuditSchema},
                      {"clouds", r.clouds},
                      {"rotations", r.rotations},
                      {"tolerance", a.tolerance},
                      {"max_deviation", r.max_deviation},
                      {"agreement", r.agreement},
                      {"vacuous", r.vacuous()},
                      {"pass", pass}}
                     .dump()
              << '\n';
    return pass ? kExitOk : kExitAudit;
}

// ---- ablate --------------------------------------------------------------------------------

struct AblateArgs {
    std::string config;
    std::string preset = "desk";
    std::string out;
    std::optional<int> epochs;
    std::optional<std::size_t> train_per_class;
    std::optional<std::size_t> test_per_class;
    std::string setting = "Y/AR";
    std::vector<std::string> variants{"edgeconv", "aeconv1", "aeconv3"};
    std::vector<std::size_t> ks{10, 16, 32, 48};
};

int cmd_ablate(const AblateArgs& a) {
    ExperimentConfig base = load_experiment(a.config, a.preset);
    if (base.network.task != Task::Classification) throw ValidationError("ablate runs classification configs");
    if (a.epochs) base.train.epochs = *a.epochs;
    if (a.train_per_class) base.data.train_per_class = *a.train_per_class;
    if (a.test_per_class) base.data.test_per_class = *a.test_per_class;
    base.train.setting = parse_setting(a.setting);
    std::vector<AlignVariant> variants;
    for (const auto& v : a.variants) variants.push_back(parse_variant(v));

    const fs::path out(a.out);
    fs::create_directories(out);
    auto jsonl = open_out(out / "ablation.jsonl");
    const Splits data = load_splits(base);

    std::string table = "variant   search  anchor          k   params      flops/sample  accuracy\n";
    for (AlignVariant variant : variants) {
        for (SearchMode search : {SearchMode::Knn, SearchMode::Ball}) {
            for (AnchorStrategy anchor : {AnchorStrategy::Mean, AnchorStrategy::MaxProjection}) {
                for (std::size_t k : a.ks) {
                    ExperimentConfig cfg = base;
                    cfg.network.variant = variant;
                    cfg.network.sa_first.search = search;
                    cfg.network.sa_first.anchor = anchor;
                    cfg.network.sa_first.k = k;
                    check(cfg.network);
                    AecnnModel model(cfg.network, cfg.train.seed);
                    const std::size_t params = parameter_count(model.parameters());
                    const std::uint64_t flops = forward_flops(data.test.samples.front(), model);
                    TrainState state;
                    train(model, data.train, cfg.train, state);
                    Rng rng(cfg.train.seed + 1);
                    const Metrics m = evaluate(model, data.test, cfg.train.setting, rng);
                    const json row = {{"schema", kAblationSchema},
                                      {"variant", std::string(to_string(variant))},
                                      {"search", std::string(to_string(search))},
                                      {"anchor", std::string(to_string(anchor))},
                                      {"k", k},
                                      {"parameters", params},
                                      {"flops", flops},
                                      {"setting", std::string(to_string(cfg.train.setting))},
                                      {"accuracy", m.accuracy}};
                    jsonl << row.dump() << '\n';
                    jsonl.flush();
                    char line[160];
                    std::snprintf(line, sizeof line, "%-9s %-7s %-15s %-3zu %-11zu %-13llu %.4f\n",
                                  std::string(to_string(variant)).c_str(), std::string(to_string(search)).c_str(),
                                  std::string(to_string(anchor)).c_str(), k, params,
                                  static_cast<unsigned long long>(flops), m.accuracy);
                    table += line;
                    std::fputs(line, stderr);
                }
            }
        }
    }
    write_text(out / "ablation.txt", table);
    std::cout << table;
    return kExitOk;
}

// ---- lrf-dump ------------------------------------------------------------------------------

struct LrfDumpArgs {
    std::string cloud;
    std::size_t k = 16;
    std::string anchor = "mean";
};

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

int cmd_lrf_dump(const LrfDumpArgs& a) {
    const AnchorStrategy anchor = parse_anchor(a.anchor);
    if (a.k < 1) throw ValidationError("--k must be at least 1");
    const PointCloud cloud = load_xyz(a.cloud);
    const Point3 origin = centroid(cloud);
    const SpatialIndex index(cloud.points);
    std::vector<Point3> nbr_points;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        const auto nbrs = index.knn(p, a.k);
        nbr_points.clear();
        for (std::size_t j : nbrs) nbr_points.push_back(cloud.points[j]);
        const LrfResult lrf = compute_lrf_with_fallback(p, nbr_points, origin, anchor);
        json rirs = json::array();
        for (const auto& q : nbr_points) rirs.push_back(point_json(rir(q, lrf.frame).as_point()));
        const auto& b = lrf.frame.basis.matrix();
        std::cout << json{{"schema", kLrfSchema},
                          {"index", i},
                          {"origin", point_json(origin)},
                          {"reference", point_json(p)},
                          {"basis", json::array({point_json(b.row(0)), point_json(b.row(1)), point_json(b.row(2))})},
                          {"degenerate", lrf.degenerate()},
                          {"neighbors", nbrs},
                          {"rir", rirs}}
                         .dump()
                  << '\n';
    }
    return kExitOk;
}

// ---- make-dataset --------------------------------------------------------------------------

struct MakeDatasetArgs {
    std::string task = "classification";
    std::size_t per_class = 100;
    std::size_t points = 256;
    std::uint64_t seed = 1;
    std::string split = "synthetic";
    std::string out;
};

int cmd_make_dataset(const MakeDatasetArgs& a) {
    if (a.per_class < 1) throw ValidationError("--per-class must be at least 1");
    Rng rng(a.seed);
    Dataset ds = synthetic(parse_task(a.task), a.per_class, a.points, rng);
    ds.split_tag = a.split;
    save_dataset_bin(a.out, ds);
    std::cout << json{{"schema", "aecnn.dataset/1"}, {"path", a.out}, {"samples", ds.size()}}.dump() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rotation-invariant point cloud classification and segmentation"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "Train a model and write model.ckpt, optimizer.ckpt, config.ini, run.jsonl");
    tr->add_option("--config", train_args.config, "Experiment config file (overrides --preset)");
    tr->add_option("--preset", train_args.preset, "desk, paper or segmentation")->capture_default_str();
    tr->add_option("--out", train_args.out, "Output directory")->required();
    tr->add_option("--seed", train_args.seed, "Seed for weights, data and augmentation");
    tr->add_option("--setting", train_args.setting, "Y/Y, Y/AR or AR/AR");
    tr->add_option("--variant", train_args.variant, "edgeconv, aeconv1, aeconv2 or aeconv3");
    tr->add_option("--epochs", train_args.epochs, "Number of epochs");
    tr->add_flag("--resume", train_args.resume, "Continue from the checkpoint in --out");
    tr->add_flag("--quiet", train_args.quiet, "No per-epoch progress on stderr");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("checkpoint", eval_args.checkpoint, "model.ckpt written by train")->required();
    ev->add_option("--config", eval_args.config, "Config (default: config.ini beside the checkpoint)");
    ev->add_option("--dataset", eval_args.dataset, "AEDS1 dataset (default: the config's test split)");
    ev->add_option("--setting", eval_args.setting, "Y/Y, Y/AR or AR/AR (default: the training setting)");
    ev->add_option("--votes", eval_args.votes, "Rotated copies scored per sample")->capture_default_str();
    ev->add_option("--seed", eval_args.seed, "Seed for test rotations")->capture_default_str();

    AuditArgs audit_args;
    auto* au = app.add_subcommand("audit", "Rotation-invariance audit; exits 3 when the tolerance is exceeded");
    au->add_option("checkpoint", audit_args.checkpoint, "model.ckpt (omit to audit random weights)");
    au->add_option("--config", audit_args.config, "Config file");
    au->add_option("--preset", audit_args.preset, "Preset for random weights")->capture_default_str();
    au->add_option("--rotations", audit_args.rotations, "Rotations per cloud")->capture_default_str();
    au->add_option("--clouds", audit_args.clouds, "Number of synthetic clouds")->capture_default_str();
    au->add_option("--tolerance", audit_args.tolerance, "Max allowed logit deviation")->capture_default_str();
    au->add_option("--seed", audit_args.seed, "Seed for clouds, rotations and random weights")->capture_default_str();

    AblateArgs ablate_args;
    auto* ab = app.add_subcommand("ablate", "Train and evaluate the variant x search x anchor x k grid");
    ab->add_option("--config", ablate_args.config, "Base experiment config");
    ab->add_option("--preset", ablate_args.preset, "Base preset")->capture_default_str();
    ab->add_option("--out", ablate_args.out, "Output directory")->required();
    ab->add_option("--epochs", ablate_args.epochs, "Epochs per run");
    ab->add_option("--train-per-class", ablate_args.train_per_class, "Training samples per class");
    ab->add_option("--test-per-class", ablate_args.test_per_class, "Test samples per class");
    ab->add_option("--setting", ablate_args.setting, "Rotation setting")->capture_default_str();
    ab->add_option("--variants", ablate_args.variants, "Variants to include")->capture_default_str();
    ab->add_option("--k", ablate_args.ks, "First-block neighborhood sizes")->capture_default_str();

    LrfDumpArgs lrf_args;
    auto* lr = app.add_subcommand("lrf-dump", "Per-point frames and neighbor RIRs of an .xyz cloud");
    lr->add_option("cloud", lrf_args.cloud, ".xyz file")->required();
    lr->add_option("--k", lrf_args.k, "Neighbors per point")->capture_default_str();
    lr->add_option("--anchor", lrf_args.anchor, "mean or max_projection")->capture_default_str();

    MakeDatasetArgs make_args;
    auto* mk = app.add_subcommand("make-dataset", "Write a synthetic AEDS1 dataset");
    mk->add_option("--task", make_args.task, "classification or segmentation")->capture_default_str();
    mk->add_option("--per-class", make_args.per_class, "Samples per class")->capture_default_str();
    mk->add_option("--points", make_args.points, "Points per sample")->capture_default_str();
    mk->add_option("--seed", make_args.seed, "Generator seed")->capture_default_str();
    mk->add_option("--split", make_args.split, "Split tag")->capture_default_str();
    mk->add_option("--out", make_args.out, "Output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*tr) return cmd_train(train_args);
        if (*ev) return cmd_eval(eval_args);
        if (*au) return cmd_audit(audit_args);
        if (*ab) return cmd_ablate(ablate_args);
        if (*lr) return cmd_lrf_dump(lrf_args);
        if (*mk) return cmd_make_dataset(make_args);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitInvalid;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
