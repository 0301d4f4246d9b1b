#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdi/error.hpp"

namespace mdi {

struct LocationHierarchy {
    std::string city;
    std::string state;
    std::string country;

    bool operator==(const LocationHierarchy&) const = default;
};

// One (token_begin, token_end) span over whitespace tokens with a coarse
// script-based language code; the external langid tool is replaced by this.
struct LangTag {
    int token_begin = 0;
    int token_end = 0;
    std::string code;

    bool operator==(const LangTag&) const = default;
};

struct TweetRecord {
    std::string id;
    std::string user_id;
    std::string text;
    bool is_retweet = false;
    bool is_reply = false;
    std::optional<LocationHierarchy> labels;
    std::vector<LangTag> lang_tags;
    // Proxy-task extension fields; absent on plain corpora.
    std::optional<std::string> diagloss; // "MSA" | "DA"
    std::optional<std::string> codesw_lang;
};

struct GazetteerEntry {
    std::string city;
    std::string state;
    std::string country;
    double lat = 0.0;
    double lon = 0.0;
    std::vector<std::string> aliases;
};

// Validated gazetteer with name/alias lookup and the city->state->country maps.
// City names that appear with conflicting parents are kept but marked
// ambiguous; resolving or projecting through them is an error.
class Gazetteer {
  public:
    explicit Gazetteer(std::vector<GazetteerEntry> entries);

    const std::vector<GazetteerEntry>& entries() const { return entries_; }

    // Exact city-name or alias lookup, case-folded and trimmed.
    LocationHierarchy resolve(const std::string& raw_location,
                              const std::map<std::string, std::pair<std::string, std::string>>&
                                  alias_table = {}) const;

    std::string project_to_state(const std::string& city) const;
    std::string project_to_country(const std::string& city) const;
    std::pair<double, double> coordinates(const std::string& city) const;
    bool has_city(const std::string& city) const;

  private:
    const GazetteerEntry* find_unique(const std::string& key) const;

    std::vector<GazetteerEntry> entries_;
    std::map<std::string, std::vector<int>> by_name_;  // folded city name -> entry indices
    std::map<std::string, std::vector<int>> by_alias_; // folded alias -> entry indices
};

struct CorpusStats {
    std::map<std::string, long> tweets_per_city;
    std::map<std::string, long> tweets_per_state;
    std::map<std::string, long> tweets_per_country;
    std::map<std::string, long> users_per_country;
    long total_tweets = 0;
    long labeled_tweets = 0;
    long token_count = 0;
    long vocab_size = 0;
};

enum class DiaglossLabel { msa, da, none };

std::string to_string(DiaglossLabel l);

// --- text operations -------------------------------------------------------

// Squeeze character runs to length <= 2, then replace @-mentions with <USER>
// and http/https/www tokens with <URL>. Total and idempotent.
std::string normalize_text(const std::string& raw);

// Splits off punctuation as standalone tokens; <USER> and <URL> stay atomic.
std::vector<std::string> tokenize_light(const std::string& text);

// Whitespace tokens whose letters are majority-Arabic.
int count_arabic_words(const std::string& text);
bool is_arabic_word(const std::string& token);

int count_diacritics(const std::string& text);
std::string strip_diacritics(const std::string& text);

// MSA if >= 5 diacritics, DA if a reply with < 5, otherwise none.
DiaglossLabel proxy_label_diaglossia(const TweetRecord& record);

// Per-token script language code ("latin", "cyrillic", ...) for non-Arabic
// words; returns tags plus the dominant foreign code (ties lexicographic).
std::pair<std::vector<LangTag>, std::string> tag_languages(const std::string& text);

// Keeps records with >= 3 Arabic and >= 4 non-Arabic words; fills lang_tags
// and codesw_lang on the retained copies.
std::vector<TweetRecord> extract_codesw(const std::vector<TweetRecord>& records);

// Label propagation from users to tweets. In strict mode a tweet whose user
// is missing raises; otherwise it is dropped.
std::vector<TweetRecord> propagate_labels(const std::map<std::string, LocationHierarchy>& users,
                                          const std::vector<TweetRecord>& tweets, bool strict);

struct PreprocessResult {
    std::vector<TweetRecord> records;
    long dropped_retweets = 0;
    long dropped_short = 0;
};

// Pipeline order: drop retweets, normalize, drop tweets with fewer than
// min_arabic_words Arabic words. Diacritics are kept; models strip them.
PreprocessResult preprocess(const std::vector<TweetRecord>& records, int min_arabic_words = 3);

CorpusStats corpus_stats(const std::vector<TweetRecord>& records);

} // namespace mdi
