// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "flank/dataset_pipeline.hpp"
#include "flank/train.hpp"

namespace flank {

/// Confusion counts for one dataset; accuracy is diagonal / count exactly.
struct ConfusionCounts {
    long true_left_pred_left = 0;
    long true_left_pred_right = 0;
    long true_right_pred_left = 0;
    long true_right_pred_right = 0;

    long count() const {
        return true_left_pred_left + true_left_pred_right + true_right_pred_left +
               true_right_pred_right;
    }
    double accuracy() const {
        return count() == 0 ? 0.0
                            : static_cast<double>(true_left_pred_left +
                                                  true_right_pred_right) /
                                  static_cast<double>(count());
    }
};

struct EvalReport {
    std::map<std::string, ConfusionCounts> per_dataset;  // keyed by source_id
    ConfusionCounts overall;
    long unreadable = 0;  // excluded from every denominator
};

struct SplitResult {
    DatasetManifest train;
    DatasetManifest validation;
    std::vector<std::string> warnings;
};

/// Species-exclusive holdout: validation gets exactly the entries whose
/// species is in `holdout_species` (case-normalized); train gets the rest.
/// Split fields are rewritten accordingly.
SplitResult split_by_species(const DatasetManifest& manifest,
                             const std::set<std::string>& holdout_species);

/// Argmax evaluation (exact 0.5/0.5 ties predict left), grouped by source_id.
EvalReport evaluate(const LayeredModel& model, const TensorDataset& data);

struct SweepPoint {
    int frozen_count = 0;
    double validation_accuracy = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;  // aligned with the requested counts
    TrainConfig config;
};

/// For each count: clone the base model, train with Custom(count) frozen
/// layers, evaluate on the validation set. Every run reuses the same seed so
/// the points are comparable.
SweepResult sweep_frozen(const LayeredModel& base_model,
                         const TensorDataset& train_set,
                         const TensorDataset& validation_set,
                         const std::vector<int>& frozen_counts,
                         const TrainConfig& config);

struct ResultRow {
    std::string model_id;
    int frozen_layers = 0;
    double train_accuracy = 0.0;           // fraction in [0, 1]
    std::vector<double> validation_accuracies;
};

/// Fixed-column table: "Model | Frozen layers | Train Accuracy | Validation
/// Accuracy"; fractions rendered as percentages with two decimals ("88.70 %").
std::string results_table(const std::vector<ResultRow>& rows);

std::string format_percent(double fraction);

/// Machine-readable report (JSON) alongside the text table.
std::string eval_report_json(const EvalReport& report);
std::string eval_report_text(const EvalReport& report);

}  // namespace flank
