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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace flank {

/// Partition of the keypoint vocabulary into body-front and body-back groups.
enum class PartitionClass { Front, Back, Ignore };

std::string to_string(PartitionClass c);

/// Normalized form used for every name lookup: lower-cased, surrounding
/// whitespace trimmed. Source datasets are inconsistent about both.
std::string normalize_name(const std::string& name);

struct AnchorPair {
    std::string head;  // must map to Front
    std::string tail;  // must map to Back
};

/// One source dataset's keypoint vocabulary and its front/back partition.
class SkeletonMap {
public:
    /// Validates the invariants: non-empty unique names, at least one Front
    /// and one Back member, anchors present and on the right side.
    SkeletonMap(std::string source_id,
                std::map<std::string, PartitionClass> entries,
                std::optional<AnchorPair> priority_anchors = std::nullopt);

    const std::string& source_id() const { return source_id_; }
    const std::map<std::string, PartitionClass>& entries() const { return entries_; }
    const std::optional<AnchorPair>& priority_anchors() const { return anchors_; }

    /// Total: unmapped names resolve to Ignore and are recorded once each in
    /// unknown_names() so ingestion can report them.
    PartitionClass classify(const std::string& name) const;

    const std::set<std::string>& unknown_names() const { return unknown_; }

private:
    std::string source_id_;
    std::map<std::string, PartitionClass> entries_;  // keys normalized
    std::optional<AnchorPair> anchors_;
    mutable std::set<std::string> unknown_;  // once-per-name warning record
};

/// Which species are rejected before label derivation, and why.
struct SpeciesPolicy {
    struct Exclusion {
        std::string species;  // normalized identifier
        std::string reason;   // e.g. "non-quadruped locomotion"
    };
    std::vector<Exclusion> excluded;

    /// False iff the species matches an exclusion (case-insensitive exact
    /// match). Empty identifiers are admitted but flagged by callers.
    bool admissible(const std::string& species) const;

    /// hippopotamus / otter / monkey, the stock camera-trap exclusions.
    static SpeciesPolicy default_policy();
};

/// Parses a skeleton-map document (JSON). Schema:
///   { "source_id": str,
///     "entries": { keypoint-name: "front"|"back"|"ignore", ... },
///     "priority_anchors": { "head": str, "tail": str },   // optional
///     "excluded_species": [ { "species": str, "reason": str }, ... ] }  // optional
/// excluded_species entries extend the default policy.
struct SkeletonDocument {
    SkeletonMap map;
    SpeciesPolicy policy;
};
SkeletonDocument load_skeleton_map(const std::filesystem::path& path);
SkeletonDocument parse_skeleton_map(const std::string& json_text,
                                    const std::string& origin);

}  // namespace flank
