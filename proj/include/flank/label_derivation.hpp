// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flank/skeleton_map.hpp"

namespace flank {

/// Named anatomical landmark in image coordinates (x rightward, y downward).
/// Invisible keypoints are ignored by all derivation logic.
struct Keypoint {
    std::string name;
    double x = 0.0;
    double y = 0.0;
    bool visible = true;
};

enum class Flank { Left, Right, Undefined };

Flank swap_flank(Flank f);  // Left <-> Right, fixes Undefined
std::string to_string(Flank f);

/// Why a derivation came out Undefined; tallied separately so the
/// distribution report can be audited at finer grain than a single count.
enum class UndefinedReason {
    None,        // label is Left or Right
    EmptyGroup,  // fewer visible keypoints than min_visible_per_group in a group
    Overlap,     // front/back x-intervals overlap or touch
    AnchorTie,   // anchor (or mean) x-values exactly equal
};
std::string to_string(UndefinedReason r);

struct Interval {
    double min = 0.0;
    double max = 0.0;
};

/// Derivation outcome plus provenance: which strategy decided and the
/// x-intervals of the visible front/back groups it looked at.
struct FlankLabel {
    Flank value = Flank::Undefined;
    std::string strategy_used;  // "strict-separation", "anchor", "paw-mean"
    UndefinedReason reason = UndefinedReason::None;
    std::optional<Interval> front_interval;
    std::optional<Interval> back_interval;
};

enum class DerivationStrategy { StrictSeparation, AnchorPriority };

struct DerivationConfig {
    DerivationStrategy strategy = DerivationStrategy::StrictSeparation;
    int min_visible_per_group = 1;  // >= 1
};

/// Derives the visible-flank label from the relative horizontal order of the
/// visible front-class and back-class keypoints. Never throws: every
/// degenerate input yields Undefined with a reason, so pipelines can count it.
///
/// StrictSeparation: the two x-intervals must be strictly disjoint; the
/// direction of disjointness is the label. AnchorPriority: compare head/tail
/// anchor x first (strict), then fall back to group mean x when the anchors
/// are not both visible or tie.
FlankLabel derive_flank(const std::vector<Keypoint>& keypoints,
                        const SkeletonMap& map, const DerivationConfig& config);

/// Horizontal mirror: x -> image_width - x. Used as a test oracle for the
/// flip-corrupts-label property, not as an augmentation.
std::vector<Keypoint> mirror_keypoints(const std::vector<Keypoint>& keypoints,
                                       double image_width);

}  // namespace flank
