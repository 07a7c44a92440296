#include <doctest.h>

#include "flank/errors.hpp"
#include "flank/skeleton_map.hpp"

using namespace flank;

TEST_CASE("table-style entries resolve to their partition class") {
    auto doc = parse_skeleton_map(R"({
        "source_id": "demo",
        "entries": {
            "Ears": "front", "nose": "front", "head": "front",
            "whiskers": "front", "withers": "front", "front paws": "front",
            "Tailbase": "back", "tailend": "back", "back paws": "back",
            "back knees": "back", "hip": "back",
            "spine": "ignore"
        },
        "priority_anchors": {"head": "nose", "tail": "tailbase"}
    })", "inline");
    CHECK(doc.map.source_id() == "demo");
    CHECK(doc.map.classify("tailbase") == PartitionClass::Back);
    CHECK(doc.map.classify("nose") == PartitionClass::Front);
    CHECK(doc.map.classify("back paws") == PartitionClass::Back);
    CHECK(doc.map.classify("withers") == PartitionClass::Front);
    CHECK(doc.map.classify("spine") == PartitionClass::Ignore);
}

TEST_CASE("lookups are case-normalized and whitespace-trimmed") {
    auto map = SkeletonMap("s", {{"Nose", PartitionClass::Front},
                                 {"tailbase", PartitionClass::Back}});
    CHECK(map.classify("  NOSE ") == PartitionClass::Front);
    CHECK(map.classify("TailBase") == PartitionClass::Back);
}

TEST_CASE("unmapped names resolve to Ignore with a once-per-name record") {
    auto map = SkeletonMap("s", {{"nose", PartitionClass::Front},
                                 {"tailbase", PartitionClass::Back}});
    CHECK(map.classify("dorsal_fin") == PartitionClass::Ignore);
    CHECK(map.classify("dorsal_fin") == PartitionClass::Ignore);
    CHECK(map.unknown_names().size() == 1);
    CHECK(map.unknown_names().count("dorsal_fin") == 1);
}

TEST_CASE("validation rejects degenerate maps") {
    CHECK_THROWS_AS(parse_skeleton_map(R"({"source_id": "s",
        "entries": {"nose": "front", "head": "front"}})", "inline"),
                    ConfigError);  // NoBackClass
    CHECK_THROWS_AS(parse_skeleton_map(R"({"source_id": "s",
        "entries": {"tailbase": "back"}})", "inline"),
                    ConfigError);  // NoFrontClass
    CHECK_THROWS_AS(parse_skeleton_map(R"({"source_id": "s",
        "entries": {"nose": "front", "NOSE": "front", "tailbase": "back"}})",
                                       "inline"),
                    ConfigError);  // duplicate after normalization
    CHECK_THROWS_AS(parse_skeleton_map(R"({"source_id": "s",
        "entries": {"nose": "forward", "tailbase": "back"}})", "inline"),
                    ConfigError);  // unknown partition word
    CHECK_THROWS_AS(parse_skeleton_map(R"({"source_id": "s",
        "entries": {"nose": "front", "tailbase": "back"},
        "priority_anchors": {"head": "ears", "tail": "tailbase"}})", "inline"),
                    ConfigError);  // anchor not among the entries
    CHECK_THROWS_AS(parse_skeleton_map(R"({"source_id": "s",
        "entries": {"nose": "front", "tailbase": "back"},
        "priority_anchors": {"head": "tailbase", "tail": "nose"}})", "inline"),
                    ConfigError);  // anchors on the wrong sides
}

TEST_CASE("species policy: defaults plus configured extensions") {
    SpeciesPolicy policy = SpeciesPolicy::default_policy();
    CHECK_FALSE(policy.admissible("hippopotamus"));
    CHECK_FALSE(policy.admissible("Otter"));
    CHECK_FALSE(policy.admissible("monkey"));
    CHECK(policy.admissible("lynx"));
    CHECK(policy.admissible("dog"));
    // empty identifiers are admitted (flagged at ingest time)
    CHECK(policy.admissible(""));

    auto doc = parse_skeleton_map(R"({
        "source_id": "s",
        "entries": {"nose": "front", "tailbase": "back"},
        "excluded_species": [{"species": "bat", "reason": "not quadruped"}]
    })", "inline");
    CHECK_FALSE(doc.policy.admissible("bat"));
    CHECK_FALSE(doc.policy.admissible("hippopotamus"));  // defaults retained
}

TEST_CASE("admissibility agrees exactly with exclusion membership") {
    SpeciesPolicy policy = SpeciesPolicy::default_policy();
    for (const auto& sp : {"hippopotamus", "otter", "monkey", "lynx", "leopard",
                           "bobcat", ""}) {
        bool excluded = false;
        for (const auto& e : policy.excluded)
            if (e.species == normalize_name(sp)) excluded = true;
        CHECK(policy.admissible(sp) == !excluded);
    }
}
