// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/dataset_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flank/errors.hpp"

namespace flank {

using nlohmann::json;

SourceStats DistributionStats::totals() const {
    SourceStats t;
    for (const auto& [id, s] : per_source) {
        t.total += s.total;
        t.left += s.left;
        t.right += s.right;
        t.undefined += s.undefined;
        t.undefined_empty_group += s.undefined_empty_group;
        t.undefined_overlap += s.undefined_overlap;
        t.undefined_anchor_tie += s.undefined_anchor_tie;
        t.errors += s.errors;
    }
    return t;
}

namespace {

Flank parse_flank(const std::string& s, const std::string& origin) {
    if (s == "left") return Flank::Left;
    if (s == "right") return Flank::Right;
    throw ConfigError(origin + ": manifest label must be 'left' or 'right', got '" +
                      s + "'");
}

}  // namespace

IngestResult ingest_text(const std::string& json_text, const std::string& origin,
                         const SkeletonMap& map, const SpeciesPolicy& policy) {
    (void)map;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!doc.contains("source_id") || !doc["source_id"].is_string())
        throw ConfigError(origin + ": missing 'source_id'");
    const std::string source_id = doc["source_id"].get<std::string>();

    std::map<std::string, std::pair<int, int>> image_dims;
    if (doc.contains("images")) {
        for (const auto& im : doc["images"]) {
            if (!im.contains("path") || !im.contains("width") || !im.contains("height"))
                throw ConfigError(origin + ": image entry needs path/width/height");
            image_dims[im["path"].get<std::string>()] = {im["width"].get<int>(),
                                                         im["height"].get<int>()};
        }
    }

    IngestResult result;
    if (!doc.contains("annotations") || !doc["annotations"].is_array())
        throw ConfigError(origin + ": missing 'annotations'");
    std::size_t index = 0;
    for (const auto& a : doc["annotations"]) {
        const std::string ctx = origin + ": annotation #" + std::to_string(index);
        ++index;
        for (const char* field : {"annotation_id", "image_path", "species", "bbox",
                                  "keypoints"})
            if (!a.contains(field))
                throw ConfigError(ctx + " missing required field '" + field + "'");

        AnnotationRecord rec;
        rec.annotation_id = a["annotation_id"].get<std::string>();
        rec.image_path = a["image_path"].get<std::string>();
        rec.species = normalize_name(a["species"].get<std::string>());
        rec.source_id = source_id;
        if (rec.species.empty())
            result.warnings.push_back(ctx + ": empty species, admitted");

        if (!a["bbox"].is_array() || a["bbox"].size() != 4)
            throw ConfigError(ctx + ": bbox must be [x, y, w, h]");
        rec.bbox = {a["bbox"][0].get<double>(), a["bbox"][1].get<double>(),
                    a["bbox"][2].get<double>(), a["bbox"][3].get<double>()};

        if (auto it = image_dims.find(rec.image_path); it != image_dims.end()) {
            rec.image_width = it->second.first;
            rec.image_height = it->second.second;
        }

        for (const auto& kp : a["keypoints"]) {
            if (!kp.contains("name") || !kp.contains("x") || !kp.contains("y"))
                throw ConfigError(ctx + ": malformed keypoint triple");
            Keypoint k;
            k.name = kp["name"].get<std::string>();
            k.x = kp["x"].get<double>();
            k.y = kp["y"].get<double>();
            k.visible = kp.value("visible", true);
            if (!std::isfinite(k.x) || !std::isfinite(k.y))
                throw ConfigError(ctx + ": non-finite keypoint coordinate");
            rec.keypoints.push_back(std::move(k));
        }

        if (!policy.admissible(rec.species)) {
            ++result.excluded_species_counts[rec.species];
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    if (result.records.empty())
        result.warnings.push_back(origin + ": no admissible records");
    return result;
}

IngestResult ingest(const std::filesystem::path& annotation_file,
                    const SkeletonMap& map, const SpeciesPolicy& policy) {
    std::ifstream in(annotation_file);
    if (!in)
        throw ConfigError("cannot open annotations: " + annotation_file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return ingest_text(buf.str(), annotation_file.string(), map, policy);
}

Image crop_bbox(const Image& image, const BBox& bbox) {
    if (image.empty()) throw Error("crop_bbox on empty image");
    const int x0 = std::max(0, static_cast<int>(std::floor(bbox.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(bbox.y)));
    const int x1 = std::min(image.width,
                            static_cast<int>(std::ceil(bbox.x + bbox.w)));
    const int y1 = std::min(image.height,
                            static_cast<int>(std::ceil(bbox.y + bbox.h)));
    if (x1 <= x0 || y1 <= y0)
        throw EmptyCropError("bbox does not intersect the image");
    return crop(image, x0, y0, x1 - x0, y1 - y0);
}

std::pair<DatasetManifest, DistributionStats> build_manifest(
    const std::vector<AnnotationRecord>& records, const SkeletonMap& map,
    const BuildConfig& config) {
    std::filesystem::create_directories(config.crops_dir);

    std::vector<const AnnotationRecord*> ordered;
    ordered.reserve(records.size());
    for (const auto& r : records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const AnnotationRecord* a, const AnnotationRecord* b) {
                  return std::tie(a->source_id, a->annotation_id) <
                         std::tie(b->source_id, b->annotation_id);
              });

    DatasetManifest manifest;
    DistributionStats stats;
    for (const AnnotationRecord* rec : ordered) {
        SourceStats& s = stats.per_source[rec->source_id];
        ++s.total;
        const FlankLabel label = derive_flank(rec->keypoints, map, config.derivation);
        if (label.value == Flank::Undefined) {
            ++s.undefined;
            switch (label.reason) {
                case UndefinedReason::EmptyGroup: ++s.undefined_empty_group; break;
                case UndefinedReason::Overlap: ++s.undefined_overlap; break;
                case UndefinedReason::AnchorTie: ++s.undefined_anchor_tie; break;
                case UndefinedReason::None: break;
            }
            continue;
        }

        Image img;
        try {
            img = load_ppm(config.images_root / rec->image_path);
        } catch (const Error&) {
            // unreadable image: error, not Undefined; kept out of the
            // left+right+undefined = total identity
            ++s.errors;
            --s.total;
            continue;
        }
        BBox box = rec->bbox;
        box.x -= config.margin;
        box.y -= config.margin;
        box.w += 2.0 * config.margin;
        box.h += 2.0 * config.margin;
        Image cropped;
        try {
            cropped = crop_bbox(img, box);
        } catch (const EmptyCropError&) {
            ++s.errors;
            --s.total;
            continue;
        }
        const Image resized =
            resize_bilinear(cropped, config.target_size, config.target_size);
        const std::string crop_name =
            rec->source_id + "_" + rec->annotation_id + ".ppm";
        save_ppm(resized, config.crops_dir / crop_name);

        ManifestEntry entry;
        entry.annotation_id = rec->annotation_id;
        entry.crop_path = crop_name;
        entry.label = label.value;
        entry.species = rec->species;
        entry.source_id = rec->source_id;
        entry.strategy = label.strategy_used;
        entry.front_interval = label.front_interval;
        entry.back_interval = label.back_interval;
        if (label.value == Flank::Left) ++s.left; else ++s.right;
        manifest.push_back(std::move(entry));
    }
    return {std::move(manifest), std::move(stats)};
}

namespace {

std::string stats_row(const std::string& id, const SourceStats& s) {
    std::ostringstream out;
    out << id << " | " << s.total << " | " << s.left << " / " << s.right << " / "
        << s.undefined;
    return out.str();
}

std::string subreason_row(const SourceStats& s) {
    std::ostringstream out;
    out << "  undefined: empty-group " << s.undefined_empty_group << ", overlap "
        << s.undefined_overlap << ", anchor-tie " << s.undefined_anchor_tie
        << "; errors " << s.errors;
    return out.str();
}

}  // namespace

std::string stats_report(const DistributionStats& stats) {
    std::ostringstream out;
    out << "Dataset | Labeled Annotations | Distribution Left / Right / Undefined\n";
    for (const auto& [id, s] : stats.per_source) {
        out << stats_row(id, s) << "\n";
        if (s.undefined > 0 || s.errors > 0) out << subreason_row(s) << "\n";
    }
    const SourceStats t = stats.totals();
    out << stats_row("total", t) << "\n";
    if (t.undefined > 0 || t.errors > 0) out << subreason_row(t) << "\n";
    return out.str();
}

void write_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
    if (!out) throw Error("cannot write manifest: " + path.string());
    for (const auto& e : manifest) {
        json j{{"annotation_id", e.annotation_id},
               {"crop_path", e.crop_path},
               {"label", to_string(e.label)},
               {"species", e.species},
               {"source_id", e.source_id},
               {"split", e.split},
               {"strategy", e.strategy}};
        if (e.front_interval)
            j["front_interval"] = {e.front_interval->min, e.front_interval->max};
        if (e.back_interval)
            j["back_interval"] = {e.back_interval->min, e.back_interval->max};
        out << j.dump() << "\n";
    }
    if (!out) throw Error("write failure: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path.string());
    DatasetManifest manifest;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " +
                              e.what());
        }
        ManifestEntry e;
        e.annotation_id = j.at("annotation_id").get<std::string>();
        e.crop_path = j.at("crop_path").get<std::string>();
        e.label = parse_flank(j.at("label").get<std::string>(),
                              path.string() + ":" + std::to_string(lineno));
        e.species = j.at("species").get<std::string>();
        e.source_id = j.at("source_id").get<std::string>();
        e.split = j.value("split", std::string("train"));
        e.strategy = j.value("strategy", std::string());
        if (j.contains("front_interval"))
            e.front_interval = Interval{j["front_interval"][0].get<double>(),
                                        j["front_interval"][1].get<double>()};
        if (j.contains("back_interval"))
            e.back_interval = Interval{j["back_interval"][0].get<double>(),
                                       j["back_interval"][1].get<double>()};
        manifest.push_back(std::move(e));
    }
    return manifest;
}

}  // namespace flank
