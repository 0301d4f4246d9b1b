#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "mdi/corpus.hpp"
#include "mdi/corpus_io.hpp"
#include "mdi/rng.hpp"
#include "mdi/text.hpp"
#include "support/fixtures.hpp"

using namespace mdi;
namespace ts = mdi::testsupport;

namespace {

// Random text over a small alphabet including Arabic, mentions and URLs.
std::string random_text(RngStream& rng) {
    static const std::vector<std::string> pieces = {
        "hello", "coooool", "@bob",  "@x",    "http://t.co/abc", "www.site.com",
        "جاء",   "جاااااء", "كَتَبَ",   "a",     "bbbb",            ",",
        "!",     "<USER>",  "<URL>", "مرحبا", "123",             "très"};
    int n = 1 + static_cast<int>(rng.next_below(10));
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += pieces[rng.next_below(pieces.size())];
    }
    return out;
}

} // namespace

TEST_CASE("normalize_text squeezes runs and replaces handles/urls") {
    CHECK(normalize_text("coooool @bob http://t.co/x") == "cool <USER> <URL>");
    CHECK(normalize_text("hello") == "hello");
    CHECK(normalize_text("جاااااء") == "جااء");
    CHECK(normalize_text("https://x.y z") == "<URL> z");
    CHECK(normalize_text("@ alone") == "@ alone"); // no word char after @
}

TEST_CASE("normalize_text is idempotent and never grows token counts") {
    RngStream rng(5, "norm_prop");
    for (int i = 0; i < 500; ++i) {
        std::string raw = random_text(rng);
        std::string once = normalize_text(raw);
        CHECK(normalize_text(once) == once);
        CHECK(text::whitespace_tokens(once).size() <= text::whitespace_tokens(raw).size());
    }
}

TEST_CASE("normalize_text length never grows without mentions") {
    // Character-length monotonicity holds on the squeeze-only path.
    RngStream rng(6, "norm_len");
    for (int i = 0; i < 200; ++i) {
        std::string raw = random_text(rng);
        if (raw.find('@') != std::string::npos) continue;
        if (raw.find("www.") != std::string::npos) continue;
        std::string once = normalize_text(raw);
        CHECK(text::decode_utf8(once).size() <= text::decode_utf8(raw).size());
    }
}

TEST_CASE("tokenize_light splits punctuation, placeholders atomic") {
    CHECK(tokenize_light("hi, there") == std::vector<std::string>{"hi", ",", "there"});
    CHECK(tokenize_light("") == std::vector<std::string>{});
    CHECK(tokenize_light("<USER> ok.") == std::vector<std::string>{"<USER>", "ok", "."});
    CHECK(tokenize_light("a,b") == std::vector<std::string>{"a", ",", "b"});
}

TEST_CASE("tokenize_light reconstructs text modulo whitespace") {
    RngStream rng(9, "tok_prop");
    for (int i = 0; i < 300; ++i) {
        std::string t = normalize_text(random_text(rng));
        std::string joined;
        for (const auto& tok : tokenize_light(t)) joined += tok;
        std::string squashed;
        for (char32_t cp : text::decode_utf8(t))
            if (!text::is_space(cp)) squashed += text::encode_utf8(std::u32string(1, cp));
        CHECK(joined == squashed);
    }
}

TEST_CASE("count_arabic_words") {
    CHECK(count_arabic_words("كتاب جديد هنا") == 3);
    CHECK(count_arabic_words("hello world") == 0);
    CHECK(count_arabic_words("كتاب and قلم") == 2);
    CHECK(count_arabic_words("123 !!!") == 0);
}

TEST_CASE("diacritics count and strip") {
    std::string five_fatha = "بَ بَ بَ بَ بَ";
    CHECK(count_diacritics(five_fatha) == 5);
    CHECK(count_diacritics("") == 0);
    CHECK(strip_diacritics("كَتَبَ") == "كتب");
    std::string stripped = strip_diacritics(five_fatha);
    CHECK(count_diacritics(stripped) == 0);
    CHECK(strip_diacritics(stripped) == stripped);
}

TEST_CASE("proxy_label_diaglossia rules") {
    TweetRecord r;
    r.id = "a";
    r.text = "بَ بَ بَ بَ بَ بَ"; // six diacritics
    r.is_reply = false;
    CHECK(proxy_label_diaglossia(r) == DiaglossLabel::msa);
    r.text = "كلام عادي";
    r.is_reply = true;
    CHECK(proxy_label_diaglossia(r) == DiaglossLabel::da);
    r.is_reply = false;
    r.text = "بَ بَ نص"; // two diacritics, not a reply
    CHECK(proxy_label_diaglossia(r) == DiaglossLabel::none);
}

TEST_CASE("proxy labels partition records") {
    RngStream rng(13, "diagloss_prop");
    for (int i = 0; i < 200; ++i) {
        TweetRecord r;
        r.id = "x";
        r.text = random_text(rng);
        r.is_reply = rng.next_below(2) == 0;
        DiaglossLabel l = proxy_label_diaglossia(r);
        int matches = 0;
        if (l == DiaglossLabel::msa) ++matches;
        if (l == DiaglossLabel::da) ++matches;
        if (l == DiaglossLabel::none) ++matches;
        CHECK(matches == 1);
    }
}

TEST_CASE("extract_codesw thresholds") {
    auto mk = [](std::string id, std::string text) {
        TweetRecord r;
        r.id = std::move(id);
        r.text = std::move(text);
        return r;
    };
    std::vector<TweetRecord> records{
        mk("keep", "كتاب قلم بيت one two three four"),
        mk("drop3", "كتاب قلم بيت one two three"),
        mk("drop0", "one two three four five six seven"),
    };
    auto kept = extract_codesw(records);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].id == "keep");
    CHECK(kept[0].codesw_lang == "latin");
    CHECK(kept[0].lang_tags.size() == 4);
}

TEST_CASE("gazetteer resolve and aliases") {
    std::vector<GazetteerEntry> entries{
        {"Beirut", "Beirut Governorate", "Lebanon", 33.9, 35.5, {}},
        {"Casablanca", "Casablanca-Settat", "Morocco", 33.6, -7.6, {"Casa"}},
    };
    Gazetteer gaz(entries);
    LocationHierarchy b = gaz.resolve("Beirut");
    CHECK(b.state == "Beirut Governorate");
    CHECK(b.country == "Lebanon");
    CHECK(gaz.resolve("  beirut ").city == "Beirut");
    CHECK(gaz.resolve("Casa").city == "Casablanca");

    std::map<std::string, std::pair<std::string, std::string>> alias_table{
        {"dar el beida", {"Casablanca", "Morocco"}}};
    CHECK(gaz.resolve("Dar El Beida", alias_table).city == "Casablanca");

    CHECK_THROWS_AS(gaz.resolve("Atlantis"), DataError);
    try {
        gaz.resolve("Atlantis");
    } catch (const DataError& e) {
        CHECK(e.code() == ErrCode::unresolved_location);
    }
}

TEST_CASE("gazetteer validation") {
    CHECK_THROWS_AS(Gazetteer({{"X", "S", "C", 95.0, 0.0, {}}}), DataError);
    CHECK_THROWS_AS(Gazetteer({{"X", "S", "C", 0, 0, {}}, {"X", "S2", "C", 1, 1, {}}}), DataError);
}

TEST_CASE("resolve is deterministic") {
    std::vector<GazetteerEntry> entries{{"Tunis", "Tunis Gov", "Tunisia", 36.8, 10.2, {"tns"}}};
    Gazetteer gaz(entries);
    for (int i = 0; i < 10; ++i) {
        CHECK(gaz.resolve("TNS").city == "Tunis");
    }
}

TEST_CASE("project_label") {
    std::vector<GazetteerEntry> entries{
        {"Beirut", "Beirut Governorate", "Lebanon", 33.9, 35.5, {}}};
    Gazetteer gaz(entries);
    CHECK(gaz.project_to_state("Beirut") == "Beirut Governorate");
    CHECK(gaz.project_to_country("Beirut") == "Lebanon");
    CHECK_THROWS_AS(gaz.project_to_country("Nowhere"), DataError);
}

TEST_CASE("propagate_labels") {
    std::map<std::string, LocationHierarchy> users{{"u1", {"A", "S", "C"}}};
    TweetRecord t;
    t.id = "1";
    t.user_id = "u1";
    t.text = "x";
    std::vector<TweetRecord> tweets{t, t, t};
    tweets[1].id = "2";
    tweets[2].id = "3";
    auto labeled = propagate_labels(users, tweets, true);
    REQUIRE(labeled.size() == 3);
    for (const auto& r : labeled) CHECK(r.labels->city == "A");

    CHECK(propagate_labels(users, {}, true).empty());

    TweetRecord orphan;
    orphan.id = "9";
    orphan.user_id = "nobody";
    CHECK_THROWS_AS(propagate_labels(users, {orphan}, true), DataError);
    CHECK(propagate_labels(users, {orphan}, false).empty());
}

TEST_CASE("preprocess drops retweets first then short tweets") {
    TweetRecord rt;
    rt.id = "rt";
    rt.text = "كتاب قلم بيت";
    rt.is_retweet = true;
    TweetRecord shorty;
    shorty.id = "short";
    shorty.text = "كتاب قلم";
    TweetRecord ok;
    ok.id = "ok";
    ok.text = "كتاب قلم بيت wooooord";
    PreprocessResult res = preprocess({rt, shorty, ok});
    CHECK(res.dropped_retweets == 1);
    CHECK(res.dropped_short == 1);
    REQUIRE(res.records.size() == 1);
    CHECK(res.records[0].id == "ok");
    CHECK(res.records[0].text == "كتاب قلم بيت woord");
}

TEST_CASE("min-arabic-words filter is monotone per record") {
    RngStream rng(21, "mono");
    std::vector<TweetRecord> base;
    for (int i = 0; i < 50; ++i) {
        TweetRecord r;
        r.id = "r" + std::to_string(i);
        r.text = random_text(rng);
        base.push_back(r);
    }
    auto kept1 = preprocess(base).records;
    std::vector<TweetRecord> more = base;
    TweetRecord extra;
    extra.id = "zz_extra";
    extra.text = "كتاب قلم بيت";
    more.push_back(extra);
    auto kept2 = preprocess(more).records;
    // Every previously kept id is still kept.
    std::set<std::string> ids2;
    for (const auto& r : kept2) ids2.insert(r.id);
    for (const auto& r : kept1) CHECK(ids2.count(r.id) == 1);
}

TEST_CASE("corpus stats hierarchy counts") {
    ts::SyntheticSpec spec;
    spec.train_per_city = 12;
    spec.test_per_city = 2;
    ts::SyntheticCorpus syn = ts::make_synthetic(spec);
    CorpusStats stats = corpus_stats(syn.train);
    CHECK(stats.total_tweets == static_cast<long>(syn.train.size()));
    CHECK(stats.labeled_tweets == stats.total_tweets);
    Gazetteer gaz = syn.gazetteer();
    for (auto& [city, n] : stats.tweets_per_city) {
        CHECK(n <= stats.tweets_per_state.at(gaz.project_to_state(city)));
        CHECK(stats.tweets_per_state.at(gaz.project_to_state(city)) <=
              stats.tweets_per_country.at(gaz.project_to_country(city)));
    }
}

TEST_CASE("jsonl round trip and duplicate detection") {
    std::string dir = ts::make_temp_dir("mdi_corpus");
    TweetRecord r;
    r.id = "t1";
    r.user_id = "u1";
    r.text = "كتاب قلم بيت";
    r.is_reply = true;
    r.labels = LocationHierarchy{"Beirut", "BG", "Lebanon"};
    r.lang_tags.push_back({0, 1, "latin"});
    r.diagloss = "DA";
    io::write_corpus_jsonl(dir + "/c.jsonl", {r});
    auto back = io::read_corpus_jsonl(dir + "/c.jsonl");
    REQUIRE(back.size() == 1);
    CHECK(back[0].id == "t1");
    CHECK(back[0].is_reply);
    CHECK(back[0].labels->city == "Beirut");
    CHECK(back[0].lang_tags == r.lang_tags);
    CHECK(back[0].diagloss == "DA");

    ts::write_text_file(dir + "/dup.jsonl",
                        "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
    CHECK_THROWS_AS(io::read_corpus_jsonl(dir + "/dup.jsonl"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("gazetteer tsv parsing") {
    std::string dir = ts::make_temp_dir("mdi_gaz");
    ts::write_text_file(dir + "/gaz.tsv",
                        "city\tstate\tcountry\tlat\tlon\taliases\n"
                        "Beirut\tBG\tLebanon\t33.9\t35.5\tbeyrouth;بيروت\n");
    Gazetteer gaz = io::read_gazetteer_tsv(dir + "/gaz.tsv");
    CHECK(gaz.resolve("beyrouth").city == "Beirut");
    CHECK(gaz.resolve("بيروت").city == "Beirut");

    ts::write_text_file(dir + "/bad.tsv", "nope\n");
    CHECK_THROWS_AS(io::read_gazetteer_tsv(dir + "/bad.tsv"), DataError);

    ts::write_text_file(dir + "/alias.tsv", "alias\tcity\tcountry\nCasa\tCasablanca\tMorocco\n");
    auto table = io::read_alias_tsv(dir + "/alias.tsv");
    CHECK(table.at("casa").first == "Casablanca");
    std::filesystem::remove_all(dir);
}
