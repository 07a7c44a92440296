// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "flank/skeleton_map.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flank/errors.hpp"

namespace flank {

std::string to_string(PartitionClass c) {
    switch (c) {
        case PartitionClass::Front: return "front";
        case PartitionClass::Back: return "back";
        case PartitionClass::Ignore: return "ignore";
    }
    return "?";
}

std::string normalize_name(const std::string& name) {
    auto begin = name.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    auto end = name.find_last_not_of(" \t\r\n");
    std::string out = name.substr(begin, end - begin + 1);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

SkeletonMap::SkeletonMap(std::string source_id,
                         std::map<std::string, PartitionClass> raw_entries,
                         std::optional<AnchorPair> priority_anchors)
    : source_id_(std::move(source_id)), anchors_(std::move(priority_anchors)) {
    bool has_front = false, has_back = false;
    for (auto& [name, cls] : raw_entries) {
        std::string norm = normalize_name(name);
        if (norm.empty())
            throw ConfigError("skeleton map '" + source_id_ + "': empty keypoint name");
        if (entries_.count(norm))
            throw ConfigError("skeleton map '" + source_id_ +
                              "': duplicate keypoint name '" + norm + "'");
        entries_.emplace(norm, cls);
        has_front |= cls == PartitionClass::Front;
        has_back |= cls == PartitionClass::Back;
    }
    if (!has_front)
        throw ConfigError("skeleton map '" + source_id_ + "': NoFrontClass");
    if (!has_back)
        throw ConfigError("skeleton map '" + source_id_ + "': NoBackClass");
    if (anchors_) {
        anchors_->head = normalize_name(anchors_->head);
        anchors_->tail = normalize_name(anchors_->tail);
        auto head = entries_.find(anchors_->head);
        auto tail = entries_.find(anchors_->tail);
        if (head == entries_.end() || head->second != PartitionClass::Front)
            throw ConfigError("skeleton map '" + source_id_ + "': head anchor '" +
                              anchors_->head + "' must be a Front entry");
        if (tail == entries_.end() || tail->second != PartitionClass::Back)
            throw ConfigError("skeleton map '" + source_id_ + "': tail anchor '" +
                              anchors_->tail + "' must be a Back entry");
    }
}

PartitionClass SkeletonMap::classify(const std::string& name) const {
    const std::string norm = normalize_name(name);
    auto it = entries_.find(norm);
    if (it != entries_.end()) return it->second;
    unknown_.insert(norm);
    return PartitionClass::Ignore;
}

bool SpeciesPolicy::admissible(const std::string& species) const {
    const std::string norm = normalize_name(species);
    return std::none_of(excluded.begin(), excluded.end(),
                        [&](const Exclusion& e) { return e.species == norm; });
}

SpeciesPolicy SpeciesPolicy::default_policy() {
    return SpeciesPolicy{{
        {"hippopotamus", "aquatic: body mostly covered by water"},
        {"otter", "aquatic: body mostly covered by water"},
        {"monkey", "climbing locomotion, not purely quadrupedal"},
    }};
}

namespace {

PartitionClass parse_partition(const std::string& word, const std::string& origin) {
    const std::string w = normalize_name(word);
    if (w == "front") return PartitionClass::Front;
    if (w == "back") return PartitionClass::Back;
    if (w == "ignore") return PartitionClass::Ignore;
    throw ConfigError(origin + ": unknown partition word '" + word + "'");
}

}  // namespace

SkeletonDocument parse_skeleton_map(const std::string& json_text,
                                    const std::string& origin) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!doc.contains("source_id") || !doc["source_id"].is_string())
        throw ConfigError(origin + ": missing 'source_id'");
    if (!doc.contains("entries") || !doc["entries"].is_object())
        throw ConfigError(origin + ": missing 'entries'");

    std::map<std::string, PartitionClass> entries;
    for (auto& [name, value] : doc["entries"].items()) {
        if (!value.is_string())
            throw ConfigError(origin + ": entry '" + name + "' must be a string");
        const std::string norm = normalize_name(name);
        if (entries.count(norm))
            throw ConfigError(origin + ": duplicate keypoint name '" + norm + "'");
        entries.emplace(norm, parse_partition(value.get<std::string>(), origin));
    }

    std::optional<AnchorPair> anchors;
    if (doc.contains("priority_anchors")) {
        const auto& a = doc["priority_anchors"];
        if (!a.is_object() || !a.contains("head") || !a.contains("tail"))
            throw ConfigError(origin + ": priority_anchors needs 'head' and 'tail'");
        anchors = AnchorPair{a["head"].get<std::string>(), a["tail"].get<std::string>()};
    }

    SpeciesPolicy policy = SpeciesPolicy::default_policy();
    if (doc.contains("excluded_species")) {
        for (const auto& e : doc["excluded_species"]) {
            if (e.is_string()) {
                policy.excluded.push_back({normalize_name(e.get<std::string>()),
                                           "configured exclusion"});
            } else if (e.is_object() && e.contains("species")) {
                policy.excluded.push_back(
                    {normalize_name(e["species"].get<std::string>()),
                     e.value("reason", std::string("configured exclusion"))});
            } else {
                throw ConfigError(origin + ": malformed excluded_species entry");
            }
        }
    }

    return SkeletonDocument{
        SkeletonMap(doc["source_id"].get<std::string>(), std::move(entries),
                    std::move(anchors)),
        std::move(policy)};
}

SkeletonDocument load_skeleton_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open skeleton map: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_skeleton_map(buf.str(), path.string());
}

}  // namespace flank
