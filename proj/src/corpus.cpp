#include "mdi/corpus.hpp"

#include <algorithm>
#include <set>

#include "mdi/text.hpp"

namespace mdi {

using text::decode_utf8;
using text::encode_utf8;

namespace {

std::string fold_key(const std::string& s) {
    std::u32string cps = decode_utf8(s);
    std::u32string out;
    std::size_t a = 0, b = cps.size();
    while (a < b && text::is_space(cps[a])) ++a;
    while (b > a && text::is_space(cps[b - 1])) --b;
    for (std::size_t i = a; i < b; ++i) {
        char32_t cp = cps[i];
        if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
        out.push_back(cp);
    }
    return encode_utf8(out);
}

bool is_mention(const std::u32string& tok) {
    return tok.size() >= 2 && tok[0] == U'@' && text::is_word_char(tok[1]);
}

bool starts_with(const std::u32string& tok, std::u32string_view prefix) {
    return tok.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), tok.begin());
}

bool is_url(const std::u32string& tok) {
    return starts_with(tok, U"http://") || starts_with(tok, U"https://") ||
           starts_with(tok, U"www.");
}

} // namespace

std::string to_string(DiaglossLabel l) {
    switch (l) {
        case DiaglossLabel::msa: return "MSA";
        case DiaglossLabel::da: return "DA";
        default: return "NONE";
    }
}

std::string normalize_text(const std::string& raw) {
    std::u32string cps = decode_utf8(raw);

    // Pass 1: reduce runs of the same character to length 2.
    std::u32string squeezed;
    squeezed.reserve(cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) {
        std::size_t n = squeezed.size();
        if (n >= 2 && squeezed[n - 1] == cps[i] && squeezed[n - 2] == cps[i]) continue;
        squeezed.push_back(cps[i]);
    }

    // Pass 2: per whitespace-delimited token, replace mentions and URLs.
    std::u32string out;
    out.reserve(squeezed.size());
    std::size_t i = 0;
    while (i < squeezed.size()) {
        if (text::is_space(squeezed[i])) {
            out.push_back(squeezed[i]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < squeezed.size() && !text::is_space(squeezed[j])) ++j;
        std::u32string tok = squeezed.substr(i, j - i);
        if (is_mention(tok)) {
            out += U"<USER>";
        } else if (is_url(tok)) {
            out += U"<URL>";
        } else {
            out += tok;
        }
        i = j;
    }
    return encode_utf8(out);
}

std::vector<std::string> tokenize_light(const std::string& textstr) {
    std::vector<std::string> out;
    for (const std::string& wtok : text::whitespace_tokens(textstr)) {
        if (wtok == "<USER>" || wtok == "<URL>") {
            out.push_back(wtok);
            continue;
        }
        std::u32string cps = decode_utf8(wtok);
        std::u32string cur;
        for (char32_t cp : cps) {
            if (text::is_punct(cp)) {
                if (!cur.empty()) {
                    out.push_back(encode_utf8(cur));
                    cur.clear();
                }
                out.push_back(encode_utf8(std::u32string(1, cp)));
            } else {
                cur.push_back(cp);
            }
        }
        if (!cur.empty()) out.push_back(encode_utf8(cur));
    }
    return out;
}

bool is_arabic_word(const std::string& token) {
    int letters = 0, arabic = 0;
    for (char32_t cp : decode_utf8(token)) {
        if (!text::is_letter(cp)) continue;
        ++letters;
        if (text::is_arabic_letter(cp)) ++arabic;
    }
    return letters > 0 && 2 * arabic > letters;
}

int count_arabic_words(const std::string& textstr) {
    int n = 0;
    for (const std::string& tok : text::whitespace_tokens(textstr)) {
        if (is_arabic_word(tok)) ++n;
    }
    return n;
}

int count_diacritics(const std::string& textstr) {
    int n = 0;
    for (char32_t cp : decode_utf8(textstr)) {
        if (text::is_arabic_diacritic(cp)) ++n;
    }
    return n;
}

std::string strip_diacritics(const std::string& textstr) {
    std::u32string out;
    for (char32_t cp : decode_utf8(textstr)) {
        if (!text::is_arabic_diacritic(cp)) out.push_back(cp);
    }
    return encode_utf8(out);
}

DiaglossLabel proxy_label_diaglossia(const TweetRecord& record) {
    int d = count_diacritics(record.text);
    if (d >= 5) return DiaglossLabel::msa;
    if (record.is_reply) return DiaglossLabel::da;
    return DiaglossLabel::none;
}

std::pair<std::vector<LangTag>, std::string> tag_languages(const std::string& textstr) {
    std::vector<LangTag> tags;
    std::map<std::string, int> votes;
    std::vector<std::string> toks = text::whitespace_tokens(textstr);
    for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
        const std::string& tok = toks[i];
        if (is_arabic_word(tok)) continue;
        // Dominant script among the token's letters.
        std::map<text::Script, int> counts;
        for (char32_t cp : decode_utf8(tok)) {
            if (text::is_letter(cp)) counts[text::script_of(cp)]++;
        }
        if (counts.empty()) continue; // not a word
        text::Script best = text::Script::none;
        int best_n = 0;
        for (auto& [s, n] : counts) {
            if (n > best_n) {
                best = s;
                best_n = n;
            }
        }
        std::string code;
        switch (best) {
            case text::Script::latin: code = "latin"; break;
            case text::Script::arabic: code = "arabic"; break;
            case text::Script::cyrillic: code = "cyrillic"; break;
            case text::Script::greek: code = "greek"; break;
            case text::Script::hebrew: code = "hebrew"; break;
            case text::Script::cjk: code = "cjk"; break;
            default: code = "other"; break;
        }
        if (code == "arabic") continue;
        tags.push_back(LangTag{i, i + 1, code});
        votes[code]++;
    }
    std::string dominant;
    int best = 0;
    for (auto& [code, n] : votes) { // std::map order makes ties lexicographic
        if (n > best) {
            dominant = code;
            best = n;
        }
    }
    return {tags, dominant};
}

std::vector<TweetRecord> extract_codesw(const std::vector<TweetRecord>& records) {
    std::vector<TweetRecord> out;
    for (const TweetRecord& r : records) {
        int arabic = count_arabic_words(r.text);
        if (arabic < 3) continue;
        auto [tags, dominant] = tag_languages(r.text);
        if (static_cast<int>(tags.size()) < 4) continue;
        TweetRecord kept = r;
        kept.lang_tags = tags;
        kept.codesw_lang = dominant;
        out.push_back(std::move(kept));
    }
    return out;
}

std::vector<TweetRecord> propagate_labels(const std::map<std::string, LocationHierarchy>& users,
                                          const std::vector<TweetRecord>& tweets, bool strict) {
    std::vector<TweetRecord> out;
    out.reserve(tweets.size());
    for (const TweetRecord& t : tweets) {
        auto it = users.find(t.user_id);
        if (it == users.end()) {
            if (strict)
                throw DataError(ErrCode::missing_user, "no location for user '" + t.user_id + "'");
            continue;
        }
        TweetRecord labeled = t;
        labeled.labels = it->second;
        out.push_back(std::move(labeled));
    }
    return out;
}

PreprocessResult preprocess(const std::vector<TweetRecord>& records, int min_arabic_words) {
    PreprocessResult res;
    for (const TweetRecord& r : records) {
        if (r.is_retweet) {
            ++res.dropped_retweets;
            continue;
        }
        TweetRecord n = r;
        n.text = normalize_text(r.text);
        if (count_arabic_words(n.text) < min_arabic_words) {
            ++res.dropped_short;
            continue;
        }
        res.records.push_back(std::move(n));
    }
    std::sort(res.records.begin(), res.records.end(),
              [](const TweetRecord& a, const TweetRecord& b) { return a.id < b.id; });
    return res;
}

CorpusStats corpus_stats(const std::vector<TweetRecord>& records) {
    CorpusStats s;
    std::set<std::string> vocab;
    std::map<std::string, std::set<std::string>> country_users;
    for (const TweetRecord& r : records) {
        ++s.total_tweets;
        for (const std::string& tok : tokenize_light(r.text)) {
            ++s.token_count;
            vocab.insert(tok);
        }
        if (!r.labels) continue;
        ++s.labeled_tweets;
        s.tweets_per_city[r.labels->city]++;
        s.tweets_per_state[r.labels->state]++;
        s.tweets_per_country[r.labels->country]++;
        country_users[r.labels->country].insert(r.user_id);
    }
    for (auto& [c, us] : country_users) s.users_per_country[c] = static_cast<long>(us.size());
    s.vocab_size = static_cast<long>(vocab.size());
    return s;
}

// --- Gazetteer --------------------------------------------------------------

Gazetteer::Gazetteer(std::vector<GazetteerEntry> entries) : entries_(std::move(entries)) {
    std::set<std::pair<std::string, std::string>> seen;
    for (int i = 0; i < static_cast<int>(entries_.size()); ++i) {
        const GazetteerEntry& e = entries_[i];
        if (e.lat < -90.0 || e.lat > 90.0 || e.lon < -180.0 || e.lon > 180.0)
            throw DataError(ErrCode::out_of_range,
                            "gazetteer coordinates out of range for city '" + e.city + "'");
        if (!seen.insert({fold_key(e.city), fold_key(e.country)}).second)
            throw DataError(ErrCode::bad_file,
                            "duplicate gazetteer (city, country) pair: " + e.city + ", " + e.country);
        by_name_[fold_key(e.city)].push_back(i);
        for (const std::string& a : e.aliases) by_alias_[fold_key(a)].push_back(i);
    }
}

const GazetteerEntry* Gazetteer::find_unique(const std::string& key) const {
    auto it = by_name_.find(key);
    if (it != by_name_.end() && it->second.size() == 1) return &entries_[it->second[0]];
    if (it != by_name_.end() && it->second.size() > 1)
        throw DataError(ErrCode::unresolved_location, "ambiguous city name '" + key + "'");
    auto ai = by_alias_.find(key);
    if (ai != by_alias_.end() && ai->second.size() == 1) return &entries_[ai->second[0]];
    if (ai != by_alias_.end() && ai->second.size() > 1)
        throw DataError(ErrCode::unresolved_location, "ambiguous alias '" + key + "'");
    return nullptr;
}

LocationHierarchy Gazetteer::resolve(
    const std::string& raw_location,
    const std::map<std::string, std::pair<std::string, std::string>>& alias_table) const {
    std::string key = fold_key(raw_location);
    if (const GazetteerEntry* e = find_unique(key))
        return LocationHierarchy{e->city, e->state, e->country};
    auto it = alias_table.find(key);
    if (it != alias_table.end()) {
        std::string city_key = fold_key(it->second.first);
        std::string country_key = fold_key(it->second.second);
        auto ni = by_name_.find(city_key);
        if (ni != by_name_.end()) {
            for (int idx : ni->second) {
                if (fold_key(entries_[idx].country) == country_key)
                    return LocationHierarchy{entries_[idx].city, entries_[idx].state,
                                             entries_[idx].country};
            }
        }
    }
    throw DataError(ErrCode::unresolved_location, "unresolved location: '" + raw_location + "'");
}

std::string Gazetteer::project_to_state(const std::string& city) const {
    auto it = by_name_.find(fold_key(city));
    if (it == by_name_.end())
        throw DataError(ErrCode::unknown_city, "unknown city '" + city + "'");
    std::set<std::string> states;
    for (int idx : it->second) states.insert(entries_[idx].state);
    if (states.size() != 1)
        throw DataError(ErrCode::unknown_city, "city '" + city + "' has no unique state");
    return *states.begin();
}

std::string Gazetteer::project_to_country(const std::string& city) const {
    auto it = by_name_.find(fold_key(city));
    if (it == by_name_.end())
        throw DataError(ErrCode::unknown_city, "unknown city '" + city + "'");
    std::set<std::string> countries;
    for (int idx : it->second) countries.insert(entries_[idx].country);
    if (countries.size() != 1)
        throw DataError(ErrCode::unknown_city, "city '" + city + "' has no unique country");
    return *countries.begin();
}

std::pair<double, double> Gazetteer::coordinates(const std::string& city) const {
    auto it = by_name_.find(fold_key(city));
    if (it == by_name_.end() || it->second.size() != 1)
        throw DataError(ErrCode::missing_coordinates, "no coordinates for city '" + city + "'");
    const GazetteerEntry& e = entries_[it->second[0]];
    return {e.lat, e.lon};
}

bool Gazetteer::has_city(const std::string& city) const {
    return by_name_.count(fold_key(city)) > 0;
}

} // namespace mdi
