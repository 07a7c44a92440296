// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "flank/augmentation.hpp"
#include "flank/dataset_pipeline.hpp"
#include "flank/evaluation.hpp"
#include "flank/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flank;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64_str(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Every run leaves a record of what produced its outputs: resolved config,
/// input paths, tool version, and a hash usable for reproduction checks.
void write_run_manifest(const fs::path& out_root, const std::string& subcommand,
                        const json& resolved_config) {
    fs::create_directories(out_root);
    json run;
    run["tool_version"] = kToolVersion;
    run["subcommand"] = subcommand;
    run["config"] = resolved_config;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64_str(resolved_config.dump())));
    run["config_hash"] = hash;
    std::ofstream out(out_root / ("run_" + subcommand + ".json"),
                      std::ios::binary);
    out << run.dump(2) << "\n";
}

DerivationConfig make_derivation_config(const std::string& strategy) {
    DerivationConfig config;
    if (strategy == "strict") {
        config.strategy = DerivationStrategy::StrictSeparation;
    } else if (strategy == "anchor") {
        config.strategy = DerivationStrategy::AnchorPriority;
    } else {
        throw ConfigError("strategy must be 'strict' or 'anchor'");
    }
    return config;
}

std::set<std::string> parse_species_list(const std::string& csv) {
    std::set<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!normalize_name(item).empty()) out.insert(normalize_name(item));
    return out;
}

std::vector<int> parse_counts(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

struct GlobalOptions {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out_root = "out";
    std::string config_file;
};

/// --config overrides flags: later stages read the merged view.
json merged_config(const GlobalOptions& global, json subcommand_config) {
    subcommand_config["seed"] = global.seed;
    subcommand_config["threads"] = global.threads;
    subcommand_config["out"] = global.out_root;
    if (!global.config_file.empty()) {
        std::ifstream in(global.config_file);
        if (!in) throw ConfigError("cannot open config: " + global.config_file);
        json file_config = json::parse(in);
        for (auto& [key, value] : file_config.items())
            subcommand_config[key] = value;
    }
    return subcommand_config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flank: derive quadruped flank labels from pose keypoints, "
                 "build crop datasets, and train/evaluate a left-right flank "
                 "classifier"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "global RNG seed");
    app.add_option("--threads", global.threads, "worker thread cap (0 = auto)");
    app.add_option("--out", global.out_root, "output root directory");
    app.add_option("--config", global.config_file,
                   "JSON config overriding command-line flags");

    // ---- derive-labels
    auto* derive = app.add_subcommand(
        "derive-labels", "derive flank labels and report the distribution");
    std::string annotations, skeleton, strategy = "strict", stats_out;
    derive->add_option("--annotations", annotations, "annotation JSON document")
        ->required();
    derive->add_option("--skeleton-map", skeleton, "skeleton map JSON document")
        ->required();
    derive->add_option("--strategy", strategy, "strict|anchor");
    derive->add_option("--stats-out", stats_out, "write the stats table here");

    // ---- build-dataset
    auto* build = app.add_subcommand(
        "build-dataset", "derive labels, crop annotations, emit a manifest");
    std::string b_annotations, b_skeleton, b_images, b_strategy = "strict";
    int b_size = 64;
    double b_margin = 0.0;
    build->add_option("--annotations", b_annotations, "annotation JSON document")
        ->required();
    build->add_option("--skeleton-map", b_skeleton, "skeleton map JSON document")
        ->required();
    build->add_option("--images", b_images, "image root directory")->required();
    build->add_option("--size", b_size, "square crop size in pixels");
    build->add_option("--margin", b_margin, "context margin around each bbox");
    build->add_option("--strategy", b_strategy, "strict|anchor");

    // ---- augment-preview
    auto* preview = app.add_subcommand(
        "augment-preview", "write augmented samples for visual inspection");
    std::string p_manifest, p_crops;
    int p_count = 8;
    preview->add_option("--manifest", p_manifest, "dataset manifest")->required();
    preview->add_option("--crops", p_crops, "crop directory")->required();
    preview->add_option("--count", p_count, "number of samples to write");

    // ---- train
    auto* train = app.add_subcommand(
        "train", "train the flank classifier with the two-phase schedule");
    std::string t_manifest, t_crops, t_val_manifest, t_phase = "both";
    std::string t_checkpoint_out = "model.flnk", t_resume;
    int t_epochs = 15, t_batch = 32, t_size = 64;
    double t_lr1 = 0.01, t_lr2 = 0.001, t_momentum = 0.9;
    train->add_option("--manifest", t_manifest, "training manifest")->required();
    train->add_option("--crops", t_crops, "crop directory")->required();
    train->add_option("--val-manifest", t_val_manifest, "validation manifest");
    train->add_option("--phase", t_phase, "1|2|both");
    train->add_option("--epochs", t_epochs, "epochs per phase");
    train->add_option("--batch", t_batch, "batch size");
    train->add_option("--size", t_size, "model input size (32|64|128)");
    train->add_option("--lr", t_lr1, "phase 1 learning rate");
    train->add_option("--lr2", t_lr2, "phase 2 learning rate");
    train->add_option("--momentum", t_momentum, "SGD momentum");
    train->add_option("--checkpoint-out", t_checkpoint_out,
                      "checkpoint file (relative to --out)");
    train->add_option("--resume", t_resume, "start from this checkpoint");

    // ---- evaluate
    auto* eval = app.add_subcommand("evaluate", "accuracy and confusion report");
    std::string e_checkpoint, e_manifest, e_crops, e_report_out = "eval";
    eval->add_option("--checkpoint", e_checkpoint, "model checkpoint")->required();
    eval->add_option("--manifest", e_manifest, "evaluation manifest")->required();
    eval->add_option("--crops", e_crops, "crop directory")->required();
    eval->add_option("--report-out", e_report_out,
                     "report basename (writes .txt and .json under --out)");

    // ---- sweep
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "train clones with different frozen-layer counts");
    std::string s_checkpoint, s_manifest, s_val_manifest, s_crops,
        s_counts = "0,1,2,3,4";
    int s_epochs = 15, s_batch = 32, s_size = 64;
    double s_lr = 0.001;
    sweep_cmd->add_option("--checkpoint", s_checkpoint, "base model checkpoint")
        ->required();
    sweep_cmd->add_option("--manifest", s_manifest, "training manifest")
        ->required();
    sweep_cmd->add_option("--val-manifest", s_val_manifest, "validation manifest")
        ->required();
    sweep_cmd->add_option("--crops", s_crops, "crop directory")->required();
    sweep_cmd->add_option("--counts", s_counts, "comma-separated frozen counts");
    sweep_cmd->add_option("--epochs", s_epochs, "epochs per run");
    sweep_cmd->add_option("--batch", s_batch, "batch size");
    sweep_cmd->add_option("--size", s_size, "model input size");
    sweep_cmd->add_option("--lr", s_lr, "learning rate");

    // ---- split
    auto* split_cmd = app.add_subcommand(
        "split", "species-exclusive train/validation split");
    std::string sp_manifest, sp_holdout, sp_out_train = "train.jsonl",
                sp_out_val = "val.jsonl";
    split_cmd->add_option("--manifest", sp_manifest, "input manifest")->required();
    split_cmd->add_option("--holdout", sp_holdout, "comma-separated species")
        ->required();
    split_cmd->add_option("--out-train", sp_out_train, "train manifest path");
    split_cmd->add_option("--out-val", sp_out_val, "validation manifest path");

    // ---- stats
    auto* stats_cmd =
        app.add_subcommand("stats", "summarize an existing manifest");
    std::string st_manifest;
    stats_cmd->add_option("--manifest", st_manifest, "dataset manifest")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
#ifdef _OPENMP
        if (global.threads > 0) omp_set_num_threads(global.threads);
#endif
        const fs::path out_root = global.out_root;

        if (derive->parsed()) {
            const json config = merged_config(
                global, {{"annotations", annotations},
                         {"skeleton_map", skeleton},
                         {"strategy", strategy}});
            const SkeletonDocument doc = load_skeleton_map(skeleton);
            const IngestResult ingested = ingest(annotations, doc.map, doc.policy);
            for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << "\n";
            const DerivationConfig dconfig = make_derivation_config(
                config.value("strategy", strategy));
            DistributionStats stats;
            for (const auto& rec : ingested.records) {
                SourceStats& s = stats.per_source[rec.source_id];
                ++s.total;
                const FlankLabel label = derive_flank(rec.keypoints, doc.map, dconfig);
                switch (label.value) {
                    case Flank::Left: ++s.left; break;
                    case Flank::Right: ++s.right; break;
                    case Flank::Undefined:
                        ++s.undefined;
                        if (label.reason == UndefinedReason::EmptyGroup)
                            ++s.undefined_empty_group;
                        if (label.reason == UndefinedReason::Overlap)
                            ++s.undefined_overlap;
                        if (label.reason == UndefinedReason::AnchorTie)
                            ++s.undefined_anchor_tie;
                        break;
                }
            }
            const std::string report = stats_report(stats);
            std::cout << report;
            for (const auto& [species, count] : ingested.excluded_species_counts)
                std::cout << "excluded species " << species << ": " << count << "\n";
            if (!stats_out.empty()) write_text(stats_out, report);
            write_run_manifest(out_root, "derive-labels", config);
        } else if (build->parsed()) {
            const json config = merged_config(
                global, {{"annotations", b_annotations},
                         {"skeleton_map", b_skeleton},
                         {"images", b_images},
                         {"size", b_size},
                         {"margin", b_margin},
                         {"strategy", b_strategy}});
            const SkeletonDocument doc = load_skeleton_map(b_skeleton);
            const IngestResult ingested =
                ingest(b_annotations, doc.map, doc.policy);
            for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << "\n";
            BuildConfig bconfig;
            bconfig.derivation =
                make_derivation_config(config.value("strategy", b_strategy));
            bconfig.images_root = b_images;
            bconfig.crops_dir = out_root / "crops";
            bconfig.target_size = config.value("size", b_size);
            bconfig.margin = config.value("margin", b_margin);
            const auto [manifest, stats] =
                build_manifest(ingested.records, doc.map, bconfig);
            write_manifest(manifest, out_root / "manifest.jsonl");
            const std::string report = stats_report(stats);
            write_text(out_root / "stats.txt", report);
            std::cout << report;
            write_run_manifest(out_root, "build-dataset", config);
        } else if (preview->parsed()) {
            const json config = merged_config(
                global,
                {{"manifest", p_manifest}, {"crops", p_crops}, {"count", p_count}});
            const DatasetManifest manifest = read_manifest(p_manifest);
            AugmentationConfig aconfig;
            aconfig.rng_seed = global.seed;
            std::vector<std::pair<Image, Flank>> entries;
            for (const auto& e : manifest) {
                if (static_cast<int>(entries.size()) >= p_count) break;
                entries.emplace_back(load_ppm(fs::path(p_crops) / e.crop_path),
                                     e.label);
            }
            const auto augmented = augment_batch(entries, aconfig);
            fs::create_directories(out_root);
            for (std::size_t i = 0; i < augmented.size(); ++i)
                save_ppm(augmented[i].first,
                         out_root / ("preview_" + std::to_string(i) + "_" +
                                     to_string(augmented[i].second) + ".ppm"));
            write_run_manifest(out_root, "augment-preview", config);
        } else if (train->parsed()) {
            const json config = merged_config(
                global, {{"manifest", t_manifest},
                         {"crops", t_crops},
                         {"val_manifest", t_val_manifest},
                         {"phase", t_phase},
                         {"epochs", t_epochs},
                         {"batch", t_batch},
                         {"size", t_size},
                         {"lr", t_lr1},
                         {"lr2", t_lr2},
                         {"momentum", t_momentum}});
            const int size = config.value("size", t_size);
            const TensorDataset train_set = load_tensor_dataset(
                read_manifest(t_manifest), t_crops, size);
            std::optional<TensorDataset> val_set;
            if (!t_val_manifest.empty())
                val_set = load_tensor_dataset(read_manifest(t_val_manifest),
                                              t_crops, size);
            LayeredModel model = t_resume.empty()
                                     ? reference_model(size, global.seed)
                                     : load_checkpoint(t_resume);
            TrainConfig tconfig;
            tconfig.epochs = config.value("epochs", t_epochs);
            tconfig.batch_size = config.value("batch", t_batch);
            tconfig.momentum = config.value("momentum", t_momentum);
            tconfig.rng_seed = global.seed;
            const std::string phase = config.value("phase", t_phase);

            json history_json = json::array();
            auto run_phase = [&](Phase p, double lr, const char* name) {
                tconfig.learning_rate = lr;
                const FreezeMask mask = build_freeze_mask(model.layer_count(), p);
                const TrainHistory history = train_phase(
                    model, train_set, val_set ? &*val_set : nullptr, mask, tconfig);
                for (std::size_t e = 0; e < history.size(); ++e) {
                    json rec{{"phase", name},
                             {"epoch", e},
                             {"train_loss", history[e].train_loss},
                             {"train_accuracy", history[e].train_accuracy}};
                    if (history[e].validation_accuracy)
                        rec["validation_accuracy"] = *history[e].validation_accuracy;
                    history_json.push_back(rec);
                    std::cout << name << " epoch " << e << ": loss "
                              << history[e].train_loss << ", train acc "
                              << history[e].train_accuracy;
                    if (history[e].validation_accuracy)
                        std::cout << ", val acc " << *history[e].validation_accuracy;
                    std::cout << "\n";
                }
            };
            if (phase == "1" || phase == "both")
                run_phase(Phase::phase1(), config.value("lr", t_lr1), "phase1");
            if (phase == "2" || phase == "both")
                run_phase(Phase::phase2(), config.value("lr2", t_lr2), "phase2");
            if (phase != "1" && phase != "2" && phase != "both")
                throw ConfigError("--phase must be 1, 2 or both");

            fs::create_directories(out_root);
            save_checkpoint(model, out_root / t_checkpoint_out);
            write_text(out_root / "history.json", history_json.dump(2) + "\n");
            write_run_manifest(out_root, "train", config);
        } else if (eval->parsed()) {
            const json config = merged_config(
                global, {{"checkpoint", e_checkpoint},
                         {"manifest", e_manifest},
                         {"crops", e_crops}});
            const LayeredModel model = load_checkpoint(e_checkpoint);
            const TensorDataset data = load_tensor_dataset(
                read_manifest(e_manifest), e_crops, model.input_size);
            const EvalReport report = evaluate(model, data);
            const std::string text = eval_report_text(report);
            std::cout << text;
            fs::create_directories(out_root);
            write_text(out_root / (e_report_out + ".txt"), text);
            write_text(out_root / (e_report_out + ".json"),
                       eval_report_json(report) + "\n");
            write_run_manifest(out_root, "evaluate", config);
        } else if (sweep_cmd->parsed()) {
            const json config = merged_config(
                global, {{"checkpoint", s_checkpoint},
                         {"manifest", s_manifest},
                         {"val_manifest", s_val_manifest},
                         {"crops", s_crops},
                         {"counts", s_counts},
                         {"epochs", s_epochs},
                         {"batch", s_batch},
                         {"lr", s_lr}});
            const LayeredModel base = load_checkpoint(s_checkpoint);
            const TensorDataset train_set = load_tensor_dataset(
                read_manifest(s_manifest), s_crops, base.input_size);
            const TensorDataset val_set = load_tensor_dataset(
                read_manifest(s_val_manifest), s_crops, base.input_size);
            TrainConfig tconfig;
            tconfig.epochs = config.value("epochs", s_epochs);
            tconfig.batch_size = config.value("batch", s_batch);
            tconfig.learning_rate = config.value("lr", s_lr);
            tconfig.rng_seed = global.seed;
            const SweepResult result = sweep_frozen(
                base, train_set, val_set,
                parse_counts(config.value("counts", s_counts)), tconfig);
            json points = json::array();
            std::cout << "frozen_count | validation accuracy\n";
            for (const auto& p : result.points) {
                std::cout << p.frozen_count << " | "
                          << format_percent(p.validation_accuracy) << "\n";
                points.push_back({{"frozen_count", p.frozen_count},
                                  {"validation_accuracy", p.validation_accuracy}});
            }
            fs::create_directories(out_root);
            write_text(out_root / "sweep.json", points.dump(2) + "\n");
            write_run_manifest(out_root, "sweep", config);
        } else if (split_cmd->parsed()) {
            const json config = merged_config(
                global, {{"manifest", sp_manifest},
                         {"holdout", sp_holdout},
                         {"out_train", sp_out_train},
                         {"out_val", sp_out_val}});
            const SplitResult result = split_by_species(
                read_manifest(sp_manifest), parse_species_list(sp_holdout));
            for (const auto& w : result.warnings)
                std::cerr << "warning: " << w << "\n";
            fs::create_directories(out_root);
            write_manifest(result.train, out_root / sp_out_train);
            write_manifest(result.validation, out_root / sp_out_val);
            std::cout << "train entries: " << result.train.size()
                      << ", validation entries: " << result.validation.size()
                      << "\n";
            write_run_manifest(out_root, "split", config);
        } else if (stats_cmd->parsed()) {
            const json config = merged_config(global, {{"manifest", st_manifest}});
            const DatasetManifest manifest = read_manifest(st_manifest);
            DistributionStats stats;
            for (const auto& e : manifest) {
                SourceStats& s = stats.per_source[e.source_id];
                ++s.total;
                if (e.label == Flank::Left) ++s.left; else ++s.right;
            }
            std::cout << stats_report(stats);
            write_run_manifest(out_root, "stats", config);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
    }
    return 1;
}
