#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdi/corpus.hpp"

namespace mdi::io {

// Corpus files are JSON Lines, one TweetRecord per line. Field names:
// id, user_id, text, is_retweet, is_reply, city, state, country (location
// fields optional). Extension fields written when present: diagloss,
// codesw_lang, lang_tags. Unknown fields are ignored on read.
std::vector<TweetRecord> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path, const std::vector<TweetRecord>& records);

std::string record_to_json_line(const TweetRecord& r);
TweetRecord record_from_json_line(const std::string& line, const std::string& context);

// TSV with header: city<TAB>state<TAB>country<TAB>lat<TAB>lon<TAB>aliases,
// aliases semicolon-separated.
Gazetteer read_gazetteer_tsv(const std::string& path);

// TSV alias<TAB>city<TAB>country; a leading header row is skipped.
// Keys are case-folded.
std::map<std::string, std::pair<std::string, std::string>> read_alias_tsv(const std::string& path);

std::vector<std::string> read_label_lines(const std::string& path);

} // namespace mdi::io
