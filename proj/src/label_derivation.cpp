// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/label_derivation.hpp"

#include <algorithm>
#include <cmath>

#include "flank/errors.hpp"

namespace flank {

Flank swap_flank(Flank f) {
    switch (f) {
        case Flank::Left: return Flank::Right;
        case Flank::Right: return Flank::Left;
        case Flank::Undefined: return Flank::Undefined;
    }
    return Flank::Undefined;
}

std::string to_string(Flank f) {
    switch (f) {
        case Flank::Left: return "left";
        case Flank::Right: return "right";
        case Flank::Undefined: return "undefined";
    }
    return "?";
}

std::string to_string(UndefinedReason r) {
    switch (r) {
        case UndefinedReason::None: return "none";
        case UndefinedReason::EmptyGroup: return "empty-group";
        case UndefinedReason::Overlap: return "overlap";
        case UndefinedReason::AnchorTie: return "anchor-tie";
    }
    return "?";
}

namespace {

struct Groups {
    std::vector<double> front_x;
    std::vector<double> back_x;
};

Groups collect(const std::vector<Keypoint>& keypoints, const SkeletonMap& map) {
    Groups g;
    for (const auto& kp : keypoints) {
        if (!kp.visible) continue;
        switch (map.classify(kp.name)) {
            case PartitionClass::Front: g.front_x.push_back(kp.x); break;
            case PartitionClass::Back: g.back_x.push_back(kp.x); break;
            case PartitionClass::Ignore: break;
        }
    }
    return g;
}

Interval interval_of(const std::vector<double>& xs) {
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return Interval{*lo, *hi};
}

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Mean comparison with a rounding-noise dead zone. Mirroring coordinates
/// (x -> W - x) perturbs each value by up to one ulp, so an exact mean tie on
/// one side can become a ~1e-14 difference on the other; comparing exactly
/// would break the mirror-antisymmetry guarantee. Differences below the
/// tolerance are ties; genuine geometric differences sit many orders of
/// magnitude above it.
int compare_with_tolerance(double a, double b) {
    const double tol =
        1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    if (a > b + tol) return 1;
    if (b > a + tol) return -1;
    return 0;
}

FlankLabel strict_separation(const Groups& g, const DerivationConfig& config) {
    FlankLabel label;
    label.strategy_used = "strict-separation";
    const std::size_t need = static_cast<std::size_t>(config.min_visible_per_group);
    if (g.front_x.size() < need || g.back_x.size() < need) {
        label.reason = UndefinedReason::EmptyGroup;
        if (!g.front_x.empty()) label.front_interval = interval_of(g.front_x);
        if (!g.back_x.empty()) label.back_interval = interval_of(g.back_x);
        return label;
    }
    label.front_interval = interval_of(g.front_x);
    label.back_interval = interval_of(g.back_x);
    if (label.front_interval->min > label.back_interval->max) {
        label.value = Flank::Right;
    } else if (label.front_interval->max < label.back_interval->min) {
        label.value = Flank::Left;
    } else {
        // overlapping or touching: not clearly separable across the x-axis
        label.reason = UndefinedReason::Overlap;
    }
    return label;
}

std::optional<double> visible_anchor_x(const std::vector<Keypoint>& keypoints,
                                       const std::string& anchor_name) {
    for (const auto& kp : keypoints) {
        if (kp.visible && normalize_name(kp.name) == anchor_name) return kp.x;
    }
    return std::nullopt;
}

FlankLabel anchor_priority(const std::vector<Keypoint>& keypoints,
                           const SkeletonMap& map, const Groups& g,
                           const DerivationConfig& config) {
    FlankLabel label;
    if (!g.front_x.empty()) label.front_interval = interval_of(g.front_x);
    if (!g.back_x.empty()) label.back_interval = interval_of(g.back_x);

    bool anchors_tied = false;
    if (map.priority_anchors()) {
        auto head_x = visible_anchor_x(keypoints, map.priority_anchors()->head);
        auto tail_x = visible_anchor_x(keypoints, map.priority_anchors()->tail);
        if (head_x && tail_x) {
            const int order = compare_with_tolerance(*head_x, *tail_x);
            if (order > 0) {
                label.value = Flank::Right;
                label.strategy_used = "anchor";
                return label;
            }
            if (order < 0) {
                label.value = Flank::Left;
                label.strategy_used = "anchor";
                return label;
            }
            anchors_tied = true;  // equality falls through to the mean tier
        }
    }

    // head/tail not decisive: compare the mean x of the visible groups
    label.strategy_used = "paw-mean";
    const std::size_t need = static_cast<std::size_t>(config.min_visible_per_group);
    if (g.front_x.size() < need || g.back_x.size() < need) {
        label.reason = UndefinedReason::EmptyGroup;
        return label;
    }
    const int order = compare_with_tolerance(mean(g.front_x), mean(g.back_x));
    if (order > 0) {
        label.value = Flank::Right;
    } else if (order < 0) {
        label.value = Flank::Left;
    } else {
        (void)anchors_tied;
        label.reason = UndefinedReason::AnchorTie;
    }
    return label;
}

}  // namespace

FlankLabel derive_flank(const std::vector<Keypoint>& keypoints,
                        const SkeletonMap& map, const DerivationConfig& config) {
    const Groups g = collect(keypoints, map);
    switch (config.strategy) {
        case DerivationStrategy::StrictSeparation:
            return strict_separation(g, config);
        case DerivationStrategy::AnchorPriority:
            return anchor_priority(keypoints, map, g, config);
    }
    return FlankLabel{};
}

std::vector<Keypoint> mirror_keypoints(const std::vector<Keypoint>& keypoints,
                                       double image_width) {
    if (image_width <= 0.0) throw OutOfBoundsError("image_width must be positive");
    for (const auto& kp : keypoints) {
        if (kp.x < 0.0 || kp.x > image_width)
            throw OutOfBoundsError("keypoint '" + kp.name + "' x=" +
                                   std::to_string(kp.x) + " outside [0, " +
                                   std::to_string(image_width) + "]");
    }
    std::vector<Keypoint> out = keypoints;
    for (auto& kp : out) kp.x = image_width - kp.x;
    return out;
}

}  // namespace flank
