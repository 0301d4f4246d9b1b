#include "mdi/corpus_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mdi/text.hpp"

namespace mdi::io {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError(ErrCode::bad_file, "cannot open '" + path + "'");
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError(ErrCode::bad_file, "cannot write '" + path + "'");
    return f;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            cols.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cols.push_back(cur);
    return cols;
}

std::string fold(const std::string& s) {
    std::string out;
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return out;
    for (std::size_t i = a; i <= b; ++i) {
        char c = s[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

} // namespace

std::string record_to_json_line(const TweetRecord& r) {
    json j;
    j["id"] = r.id;
    j["user_id"] = r.user_id;
    j["text"] = r.text;
    j["is_retweet"] = r.is_retweet;
    j["is_reply"] = r.is_reply;
    if (r.labels) {
        j["city"] = r.labels->city;
        j["state"] = r.labels->state;
        j["country"] = r.labels->country;
    }
    if (r.diagloss) j["diagloss"] = *r.diagloss;
    if (r.codesw_lang) j["codesw_lang"] = *r.codesw_lang;
    if (!r.lang_tags.empty()) {
        json tags = json::array();
        for (const LangTag& t : r.lang_tags) tags.push_back({t.token_begin, t.token_end, t.code});
        j["lang_tags"] = tags;
    }
    return j.dump();
}

TweetRecord record_from_json_line(const std::string& line, const std::string& context) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(ErrCode::bad_file, context + ": bad JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError(ErrCode::bad_file, context + ": line is not an object");
    TweetRecord r;
    r.id = j.value("id", "");
    if (r.id.empty()) throw DataError(ErrCode::bad_file, context + ": missing or empty id");
    r.user_id = j.value("user_id", "");
    r.text = j.value("text", "");
    r.is_retweet = j.value("is_retweet", false);
    r.is_reply = j.value("is_reply", false);
    if (j.contains("city") || j.contains("state") || j.contains("country")) {
        LocationHierarchy h;
        h.city = j.value("city", "");
        h.state = j.value("state", "");
        h.country = j.value("country", "");
        r.labels = h;
    }
    if (j.contains("diagloss")) r.diagloss = j["diagloss"].get<std::string>();
    if (j.contains("codesw_lang")) r.codesw_lang = j["codesw_lang"].get<std::string>();
    if (j.contains("lang_tags")) {
        for (const auto& t : j["lang_tags"]) {
            r.lang_tags.push_back(
                LangTag{t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<std::string>()});
        }
    }
    return r;
}

std::vector<TweetRecord> read_corpus_jsonl(const std::string& path) {
    std::ifstream f = open_in(path);
    std::vector<TweetRecord> out;
    std::set<std::string> ids;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        TweetRecord r =
            record_from_json_line(line, path + ":" + std::to_string(lineno));
        if (!ids.insert(r.id).second)
            throw DataError(ErrCode::bad_file,
                            path + ": duplicate record id '" + r.id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

void write_corpus_jsonl(const std::string& path, const std::vector<TweetRecord>& records) {
    std::ofstream f = open_out(path);
    for (const TweetRecord& r : records) f << record_to_json_line(r) << '\n';
}

Gazetteer read_gazetteer_tsv(const std::string& path) {
    std::ifstream f = open_in(path);
    std::string line;
    if (!std::getline(f, line))
        throw DataError(ErrCode::bad_file, path + ": empty gazetteer");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_tabs(line) != std::vector<std::string>{"city", "state", "country", "lat", "lon",
                                                     "aliases"})
        throw DataError(ErrCode::bad_file, path + ": bad gazetteer header");
    std::vector<GazetteerEntry> entries;
    long lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols = split_tabs(line);
        if (cols.size() != 6)
            throw DataError(ErrCode::bad_file,
                            path + ":" + std::to_string(lineno) + ": expected 6 columns");
        GazetteerEntry e;
        e.city = cols[0];
        e.state = cols[1];
        e.country = cols[2];
        try {
            e.lat = std::stod(cols[3]);
            e.lon = std::stod(cols[4]);
        } catch (const std::exception&) {
            throw DataError(ErrCode::bad_file,
                            path + ":" + std::to_string(lineno) + ": bad coordinates");
        }
        std::stringstream as(cols[5]);
        std::string alias;
        while (std::getline(as, alias, ';')) {
            if (!alias.empty()) e.aliases.push_back(alias);
        }
        entries.push_back(std::move(e));
    }
    return Gazetteer(std::move(entries));
}

std::map<std::string, std::pair<std::string, std::string>> read_alias_tsv(
    const std::string& path) {
    std::ifstream f = open_in(path);
    std::map<std::string, std::pair<std::string, std::string>> out;
    std::string line;
    long lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols = split_tabs(line);
        if (lineno == 1 && cols == std::vector<std::string>{"alias", "city", "country"}) continue;
        if (cols.size() != 3)
            throw DataError(ErrCode::bad_file,
                            path + ":" + std::to_string(lineno) + ": expected 3 columns");
        out[fold(cols[0])] = {cols[1], cols[2]};
    }
    return out;
}

std::vector<std::string> read_label_lines(const std::string& path) {
    std::ifstream f = open_in(path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

} // namespace mdi::io
