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
#include <string>
#include <vector>

#include "flank/image.hpp"
#include "flank/label_derivation.hpp"
#include "flank/skeleton_map.hpp"

namespace flank {

struct BBox {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

/// One animal instance. Several records may reference the same image; each is
/// processed individually with its own flank label.
struct AnnotationRecord {
    std::string annotation_id;
    std::string image_path;  // relative to the images root
    int image_width = 0;
    int image_height = 0;
    BBox bbox;
    std::vector<Keypoint> keypoints;
    std::string species;
    std::string source_id;
};

/// One labeled crop in the dataset manifest. Undefined never appears here.
struct ManifestEntry {
    std::string annotation_id;
    std::string crop_path;
    Flank label = Flank::Undefined;
    std::string species;
    std::string source_id;
    std::string split = "train";  // "train" | "validation"
    // derivation provenance, copied from FlankLabel
    std::string strategy;
    std::optional<Interval> front_interval;
    std::optional<Interval> back_interval;
};

using DatasetManifest = std::vector<ManifestEntry>;

/// Per-source label distribution, with Undefined broken down by sub-reason.
struct SourceStats {
    long total = 0;
    long left = 0;
    long right = 0;
    long undefined = 0;
    long undefined_empty_group = 0;
    long undefined_overlap = 0;
    long undefined_anchor_tie = 0;
    long errors = 0;  // unreadable images, distinct from Undefined
};

struct DistributionStats {
    std::map<std::string, SourceStats> per_source;  // keyed by source_id
    SourceStats totals() const;
};

struct IngestResult {
    std::vector<AnnotationRecord> records;
    std::map<std::string, long> excluded_species_counts;
    std::vector<std::string> warnings;
};

/// Parses an annotation document (JSON):
///   { "source_id": str,
///     "images": [ { "path": str, "width": int, "height": int }, ... ],
///     "annotations": [ { "annotation_id": str, "image_path": str,
///                        "species": str, "bbox": [x, y, w, h],
///                        "keypoints": [ {"name": str, "x": num, "y": num,
///                                        "visible": bool}, ... ] }, ... ] }
/// Inadmissible species are counted in the result, never silently dropped.
IngestResult ingest(const std::filesystem::path& annotation_file,
                    const SkeletonMap& map, const SpeciesPolicy& policy);
IngestResult ingest_text(const std::string& json_text, const std::string& origin,
                         const SkeletonMap& map, const SpeciesPolicy& policy);

/// Pixels of bbox intersected with the image bounds; overhanging boxes are
/// clamped, an empty intersection throws EmptyCropError.
Image crop_bbox(const Image& image, const BBox& bbox);

struct BuildConfig {
    DerivationConfig derivation;
    std::filesystem::path images_root;
    std::filesystem::path crops_dir;
    int target_size = 64;      // square, aspect ratio not preserved
    double margin = 0.0;       // context margin around the bbox, in pixels
};

/// Derives, crops, resizes and writes every admissible record; Undefined
/// records are only counted. Manifest order is deterministic (source_id,
/// then annotation_id).
std::pair<DatasetManifest, DistributionStats> build_manifest(
    const std::vector<AnnotationRecord>& records, const SkeletonMap& map,
    const BuildConfig& config);

/// Table-style text report, one row per source plus totals:
///   "<source> | <total> | <left> / <right> / <undefined>"
/// with an indented sub-reason line whenever undefined or errors are nonzero.
std::string stats_report(const DistributionStats& stats);

/// Manifest file: one JSON object per line, UTF-8, LF line endings.
void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace flank
