// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flank/model.hpp"

namespace flank {

/// Per-layer freeze flags; true = parameters immutable during training.
using FreezeMask = std::vector<bool>;

/// The two-phase schedule: phase 1 trains only the head, phase 2 additionally
/// unfreezes the second half of the layers. Custom reproduces any exact
/// frozen-prefix count.
struct Phase {
    enum Kind { Phase1, Phase2, Custom };
    Kind kind = Phase1;
    int frozen_count = 0;  // Custom only
    static Phase phase1() { return {Phase1, 0}; }
    static Phase phase2() { return {Phase2, 0}; }
    static Phase custom(int k) { return {Custom, k}; }
};

/// Phase1: freeze all but the head. Phase2: freeze the first
/// floor(layer_count/2). Custom(k): freeze the first k, 0 <= k <=
/// layer_count-1; the head is never freezable.
FreezeMask build_freeze_mask(int layer_count, Phase phase);

struct TrainConfig {
    int epochs = 15;
    int batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct EpochRecord {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> validation_accuracy;
};
using TrainHistory = std::vector<EpochRecord>;

/// In-memory training set: CHW float samples in [0,1] with binary labels
/// (0 = left, 1 = right) and the originating source id for per-dataset
/// reporting.
struct LabeledSample {
    std::vector<float> pixels;
    int label = 0;
    std::string source_id;
    std::string species;
};

struct TensorDataset {
    int input_size = 0;  // square side, 3 channels
    std::vector<LabeledSample> samples;
    long unreadable = 0;  // crops that failed to load, reported not counted
};

/// Loads manifest crops from `crops_dir`; every crop must already decode to
/// input_size x input_size. Unreadable crops are tallied, not fatal.
TensorDataset load_tensor_dataset(const std::vector<struct ManifestEntry>& manifest,
                                  const std::filesystem::path& crops_dir,
                                  int input_size);

/// SGD with momentum over deterministically shuffled batches. Frozen layers
/// are never touched: their parameters are bit-identical before and after.
/// Velocity buffers start at zero for each call.
TrainHistory train_phase(LayeredModel& model, const TensorDataset& train_set,
                         const TensorDataset* validation_set,
                         const FreezeMask& mask, const TrainConfig& config);

double dataset_accuracy(const LayeredModel& model, const TensorDataset& data);

/// Checkpoint container: magic "FLNK", u16 format version, u16 layer count,
/// then per tensor rank (u32) + dims (u32 each) + payload (LE f32), and a
/// trailing u64 FNV-1a checksum over all payload bytes. Integers
/// little-endian throughout.
void save_checkpoint(const LayeredModel& model, const std::filesystem::path& path);
LayeredModel load_checkpoint(const std::filesystem::path& path);

}  // namespace flank
