#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mdi/corpus.hpp"

namespace mdi {

enum class SplitMode { tweet_random, user_disjoint };
enum class DisjointSetting { narrow, medium, wide };
enum class RunId { A, B, C };

std::string to_string(SplitMode m);
std::string to_string(DisjointSetting s);
std::string to_string(RunId r);

struct SplitSpec {
    SplitMode mode = SplitMode::tweet_random;
    double train_ratio = 0.8;
    double dev_ratio = 0.1;
    double test_ratio = 0.1;
    std::optional<DisjointSetting> setting;
    RunId run = RunId::A;
    std::uint64_t seed = 0;
    std::optional<int> per_class_cap;

    void validate() const;
    // Each run draws a distinct seed so the three runs get different TEST users.
    std::uint64_t run_seed() const { return seed + static_cast<std::uint64_t>(run); }
};

struct SplitPart {
    std::vector<std::string> record_ids; // sorted
    std::set<std::string> user_ids;
    std::map<std::string, long> class_counts; // city-level when labels present
};

struct SplitResult {
    SplitSpec spec;
    SplitPart train;
    SplitPart dev;
    SplitPart test;
};

struct DisjointReport {
    bool ok = true;
    std::vector<std::string> shared_record_ids;
    std::vector<std::string> shared_user_ids;
};

// Tweet-level random split. Sizes follow floor-per-ratio with the remainder
// assigned to TRAIN; deterministic in spec.seed.
SplitResult split_random(const std::vector<TweetRecord>& records, const SplitSpec& spec);

// Per-class cap by seeded uniform subsampling; classes at or below the cap
// are untouched. `level` picks the label granularity (city/state/country).
std::vector<TweetRecord> cap_per_class(const std::vector<TweetRecord>& train, int cap,
                                       const std::string& level, std::uint64_t seed);

// User-disjoint TRAIN/TEST split (no DEV). Settings: narrow keeps cities with
// >= 16 users and sends 3 to TEST; medium >= 13 users, 3 to TEST; wide >= 2
// users, 1 to TEST. Users under ineligible cities are excluded entirely.
// A user appearing under two cities is rejected in strict mode.
SplitResult split_user_disjoint(const std::vector<TweetRecord>& records, const SplitSpec& spec,
                                bool strict = true);

DisjointReport verify_disjoint(const SplitResult& result);

std::string split_manifest_json(const SplitResult& result);
SplitResult split_result_from_manifest(const std::string& json_text);

} // namespace mdi
