// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace flank {

SplitResult split_by_species(const DatasetManifest& manifest,
                             const std::set<std::string>& holdout_species) {
    if (holdout_species.empty()) throw Error("holdout species set is empty");
    std::set<std::string> holdout;
    for (const auto& s : holdout_species) holdout.insert(normalize_name(s));

    SplitResult result;
    std::set<std::string> seen;
    for (const auto& e : manifest) {
        const std::string species = normalize_name(e.species);
        seen.insert(species);
        ManifestEntry copy = e;
        if (holdout.count(species)) {
            copy.split = "validation";
            result.validation.push_back(std::move(copy));
        } else {
            copy.split = "train";
            result.train.push_back(std::move(copy));
        }
    }
    for (const auto& s : holdout)
        if (!seen.count(s))
            result.warnings.push_back("holdout species '" + s +
                                      "' absent from manifest");
    if (result.train.empty())
        result.warnings.push_back("holdout covers every species; train side empty");
    if (result.validation.empty())
        result.warnings.push_back("validation side empty");
    return result;
}

EvalReport evaluate(const LayeredModel& model, const TensorDataset& data) {
    if (data.samples.empty()) throw Error("evaluate on an empty dataset");
    std::vector<float> batch;
    batch.reserve(data.samples.size() * data.samples[0].pixels.size());
    for (const auto& s : data.samples)
        batch.insert(batch.end(), s.pixels.begin(), s.pixels.end());
    const auto probs = forward(model, batch);

    EvalReport report;
    report.unreadable = data.unreadable;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = probs[i][1] > probs[i][0] ? 1 : 0;  // tie -> left
        const int truth = data.samples[i].label;
        auto bump = [&](ConfusionCounts& c) {
            if (truth == 0 && pred == 0) ++c.true_left_pred_left;
            else if (truth == 0 && pred == 1) ++c.true_left_pred_right;
            else if (truth == 1 && pred == 0) ++c.true_right_pred_left;
            else ++c.true_right_pred_right;
        };
        bump(report.per_dataset[data.samples[i].source_id]);
        bump(report.overall);
    }
    return report;
}

SweepResult sweep_frozen(const LayeredModel& base_model,
                         const TensorDataset& train_set,
                         const TensorDataset& validation_set,
                         const std::vector<int>& frozen_counts,
                         const TrainConfig& config) {
    for (int k : frozen_counts)
        if (k < 0 || k >= base_model.layer_count())
            throw Error("frozen count " + std::to_string(k) + " out of range");
    SweepResult result;
    result.config = config;
    for (int k : frozen_counts) {
        LayeredModel clone = base_model;
        const FreezeMask mask =
            build_freeze_mask(clone.layer_count(), Phase::custom(k));
        train_phase(clone, train_set, nullptr, mask, config);
        result.points.push_back({k, dataset_accuracy(clone, validation_set)});
    }
    return result;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f %%", fraction * 100.0);
    return buf;
}

std::string results_table(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "Model | Frozen layers | Train Accuracy | Validation Accuracy\n";
    for (const auto& r : rows) {
        out << r.model_id << " | " << r.frozen_layers << " | "
            << format_percent(r.train_accuracy);
        for (double v : r.validation_accuracies) out << " | " << format_percent(v);
        out << "\n";
    }
    return out.str();
}

std::string eval_report_text(const EvalReport& report) {
    std::ostringstream out;
    out << "Dataset | Samples | Accuracy | Confusion LL/LR/RL/RR\n";
    auto row = [&](const std::string& id, const ConfusionCounts& c) {
        out << id << " | " << c.count() << " | " << format_percent(c.accuracy())
            << " | " << c.true_left_pred_left << "/" << c.true_left_pred_right
            << "/" << c.true_right_pred_left << "/" << c.true_right_pred_right
            << "\n";
    };
    for (const auto& [id, c] : report.per_dataset) row(id, c);
    row("overall", report.overall);
    if (report.unreadable > 0)
        out << "unreadable crops excluded: " << report.unreadable << "\n";
    return out.str();
}

std::string eval_report_json(const EvalReport& report) {
    nlohmann::json j;
    auto pack = [](const ConfusionCounts& c) {
        return nlohmann::json{{"count", c.count()},
                              {"accuracy", c.accuracy()},
                              {"true_left_pred_left", c.true_left_pred_left},
                              {"true_left_pred_right", c.true_left_pred_right},
                              {"true_right_pred_left", c.true_right_pred_left},
                              {"true_right_pred_right", c.true_right_pred_right}};
    };
    for (const auto& [id, c] : report.per_dataset) j["per_dataset"][id] = pack(c);
    j["overall"] = pack(report.overall);
    j["unreadable"] = report.unreadable;
    return j.dump(2);
}

}  // namespace flank
