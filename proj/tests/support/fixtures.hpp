#pragma once

#include <string>
#include <vector>

#include "mdi/corpus.hpp"
#include "mdi/corpus_io.hpp"

namespace mdi::testsupport {

// Synthetic hierarchy: countries x states x cities grid, each city with a set
// of exclusive marker tokens over a shared token vocabulary. Shared tokens are
// emitted as consecutive runs of a cyclic chain so masked-token prediction has
// low intrinsic entropy; all city signal lives in the markers.
struct SyntheticSpec {
    int countries = 3;
    int states_per_country = 2;
    int cities_per_state = 2;
    int shared_vocab = 200;
    int markers_per_city = 5;
    int train_per_city = 200;
    int test_per_city = 50;
    int train_users_per_city = 10;
    int test_users_per_city = 3;
    int min_len = 8;
    int max_len = 14;
    std::uint64_t seed = 42;
};

struct SyntheticCorpus {
    std::vector<TweetRecord> train;
    std::vector<TweetRecord> test;
    std::vector<GazetteerEntry> entries;
    std::vector<std::string> cities;

    Gazetteer gazetteer() const { return Gazetteer(entries); }
};

SyntheticCorpus make_synthetic(const SyntheticSpec& spec);

// Fresh unique directory under the system temp root.
std::string make_temp_dir(const std::string& prefix);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
std::string gazetteer_to_tsv(const std::vector<GazetteerEntry>& entries);

} // namespace mdi::testsupport
