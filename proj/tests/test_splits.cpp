#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "mdi/splits.hpp"
#include "support/fixtures.hpp"

using namespace mdi;
namespace ts = mdi::testsupport;

namespace {

TweetRecord rec(const std::string& id, const std::string& user, const std::string& city = "",
                const std::string& state = "", const std::string& country = "") {
    TweetRecord r;
    r.id = id;
    r.user_id = user;
    r.text = "x";
    if (!city.empty()) r.labels = LocationHierarchy{city, state, country};
    return r;
}

std::vector<TweetRecord> user_grid(const std::map<std::string, int>& users_per_city,
                                   int tweets_per_user) {
    std::vector<TweetRecord> out;
    for (auto& [city, n_users] : users_per_city) {
        for (int u = 0; u < n_users; ++u) {
            std::string user = city + "_u" + std::to_string(u);
            for (int t = 0; t < tweets_per_user; ++t)
                out.push_back(rec(city + "_" + std::to_string(u) + "_" + std::to_string(t), user,
                                  city, city + "_st", city + "_co"));
        }
    }
    return out;
}

} // namespace

TEST_CASE("split_random sizes and determinism") {
    std::vector<TweetRecord> records;
    for (int i = 0; i < 100; ++i) records.push_back(rec("r" + std::to_string(i), "u"));
    SplitSpec spec;
    spec.seed = 7;
    SplitResult a = split_random(records, spec);
    CHECK(a.train.record_ids.size() == 80);
    CHECK(a.dev.record_ids.size() == 10);
    CHECK(a.test.record_ids.size() == 10);

    SplitResult b = split_random(records, spec);
    CHECK(a.train.record_ids == b.train.record_ids);
    CHECK(a.dev.record_ids == b.dev.record_ids);
    CHECK(a.test.record_ids == b.test.record_ids);

    spec.seed = 8;
    SplitResult c = split_random(records, spec);
    CHECK(a.train.record_ids != c.train.record_ids);
}

TEST_CASE("split_random remainder goes to train") {
    // floor(0.8*3)=2, floor(0.1*3)=0 twice, remainder 1 -> train.
    std::vector<TweetRecord> records{rec("a", "u"), rec("b", "u"), rec("c", "u")};
    SplitSpec spec;
    SplitResult r = split_random(records, spec);
    CHECK(r.train.record_ids.size() == 3);
    CHECK(r.dev.record_ids.empty());
    CHECK(r.test.record_ids.empty());
}

TEST_CASE("split_random union preserved") {
    std::vector<TweetRecord> records;
    for (int i = 0; i < 137; ++i) records.push_back(rec("r" + std::to_string(i), "u"));
    SplitSpec spec;
    spec.seed = 3;
    SplitResult r = split_random(records, spec);
    std::set<std::string> all;
    for (auto& part : {r.train, r.dev, r.test})
        for (auto& id : part.record_ids) CHECK(all.insert(id).second);
    CHECK(all.size() == records.size());
}

TEST_CASE("split_random errors") {
    SplitSpec spec;
    CHECK_THROWS_AS(split_random({}, spec), DataError);
    spec.train_ratio = 0.5; // ratios no longer sum to 1
    CHECK_THROWS_AS(split_random({rec("a", "u")}, spec), DataError);
}

TEST_CASE("cap_per_class caps only oversized classes, paper scale") {
    std::vector<TweetRecord> train;
    train.reserve(200000);
    for (int i = 0; i < 150000; ++i)
        train.push_back(rec("a" + std::to_string(i), "u", "c1", "s1", "A"));
    for (int i = 0; i < 50000; ++i)
        train.push_back(rec("b" + std::to_string(i), "u", "c2", "s2", "B"));
    auto capped = cap_per_class(train, 100000, "country", 11);
    std::map<std::string, long> counts;
    for (auto& r : capped) counts[r.labels->country]++;
    CHECK(counts["A"] == 100000);
    CHECK(counts["B"] == 50000);

    auto same = cap_per_class(train, 150000, "country", 11);
    CHECK(same.size() == train.size());

    auto one = cap_per_class(train, 1, "country", 11);
    CHECK(one.size() == 2);
}

TEST_CASE("cap_per_class deterministic subsample") {
    std::vector<TweetRecord> train;
    for (int i = 0; i < 50; ++i) train.push_back(rec("r" + std::to_string(i), "u", "c", "s", "A"));
    auto a = cap_per_class(train, 10, "country", 5);
    auto b = cap_per_class(train, 10, "country", 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
}

TEST_CASE("split_user_disjoint settings") {
    SplitSpec spec;
    spec.mode = SplitMode::user_disjoint;
    spec.seed = 1;

    SUBCASE("narrow: 16 users -> 3 test / 13 train") {
        auto records = user_grid({{"cityA", 16}}, 4);
        spec.setting = DisjointSetting::narrow;
        SplitResult r = split_user_disjoint(records, spec);
        CHECK(r.test.user_ids.size() == 3);
        CHECK(r.train.user_ids.size() == 13);
        CHECK(verify_disjoint(r).ok);
    }
    SUBCASE("narrow: 15 users -> excluded") {
        auto records = user_grid({{"cityA", 15}, {"cityB", 16}}, 2);
        spec.setting = DisjointSetting::narrow;
        SplitResult r = split_user_disjoint(records, spec);
        for (const std::string& u : r.train.user_ids) CHECK(u.find("cityA") == std::string::npos);
        for (const std::string& u : r.test.user_ids) CHECK(u.find("cityA") == std::string::npos);
    }
    SUBCASE("wide: 2 users -> 1 test / 1 train") {
        auto records = user_grid({{"cityA", 2}}, 3);
        spec.setting = DisjointSetting::wide;
        SplitResult r = split_user_disjoint(records, spec);
        CHECK(r.test.user_ids.size() == 1);
        CHECK(r.train.user_ids.size() == 1);
    }
    SUBCASE("single-user cities are excluded everywhere") {
        auto records = user_grid({{"cityA", 1}, {"cityB", 2}}, 2);
        spec.setting = DisjointSetting::wide;
        SplitResult r = split_user_disjoint(records, spec);
        for (const std::string& u : r.train.user_ids) CHECK(u.find("cityA") == std::string::npos);
        for (const std::string& u : r.test.user_ids) CHECK(u.find("cityA") == std::string::npos);
    }
    SUBCASE("no eligible cities") {
        auto records = user_grid({{"cityA", 1}}, 2);
        spec.setting = DisjointSetting::wide;
        CHECK_THROWS_AS(split_user_disjoint(records, spec), DataError);
    }
}

TEST_CASE("user appearing under two cities is rejected in strict mode") {
    auto records = user_grid({{"cityA", 2}, {"cityB", 2}}, 1);
    records.push_back(rec("conflict", "cityA_u0", "cityB", "cityB_st", "cityB_co"));
    SplitSpec spec;
    spec.mode = SplitMode::user_disjoint;
    spec.setting = DisjointSetting::wide;
    CHECK_THROWS_AS(split_user_disjoint(records, spec, true), DataError);
    CHECK_NOTHROW(split_user_disjoint(records, spec, false));
}

TEST_CASE("narrow cities form a subset of medium, which is a subset of wide") {
    std::map<std::string, int> grid{{"a", 20}, {"b", 16}, {"c", 14}, {"d", 13},
                                    {"e", 5},  {"f", 2},  {"g", 1}};
    auto records = user_grid(grid, 2);
    SplitSpec spec;
    spec.mode = SplitMode::user_disjoint;
    spec.seed = 9;
    auto cities_of = [&](DisjointSetting s) {
        spec.setting = s;
        SplitResult r = split_user_disjoint(records, spec);
        std::set<std::string> cities;
        for (auto& [c, n] : r.train.class_counts) cities.insert(c);
        for (auto& [c, n] : r.test.class_counts) cities.insert(c);
        return cities;
    };
    auto narrow = cities_of(DisjointSetting::narrow);
    auto medium = cities_of(DisjointSetting::medium);
    auto wide = cities_of(DisjointSetting::wide);
    CHECK(std::includes(medium.begin(), medium.end(), narrow.begin(), narrow.end()));
    CHECK(std::includes(wide.begin(), wide.end(), medium.begin(), medium.end()));
    CHECK(narrow == std::set<std::string>{"a", "b"});
    CHECK(medium == std::set<std::string>{"a", "b", "c", "d"});
    CHECK(wide == std::set<std::string>{"a", "b", "c", "d", "e", "f"});
}

TEST_CASE("every user's tweets land in exactly one split") {
    auto records = user_grid({{"a", 17}, {"b", 13}, {"c", 4}}, 3);
    SplitSpec spec;
    spec.mode = SplitMode::user_disjoint;
    spec.setting = DisjointSetting::wide;
    spec.seed = 23;
    SplitResult r = split_user_disjoint(records, spec);
    for (const std::string& u : r.train.user_ids) CHECK(r.test.user_ids.count(u) == 0);
    std::map<std::string, int> tweets_by_user;
    for (auto& t : records) tweets_by_user[t.user_id]++;
    std::map<std::string, int> seen;
    for (auto& part : {r.train, r.test}) {
        for (const std::string& id : part.record_ids) {
            std::string user = id.substr(0, id.rfind('_'));
            (void)user;
        }
    }
    // Count via record membership per user set.
    long train_tweets = 0, test_tweets = 0;
    for (auto& t : records) {
        if (r.train.user_ids.count(t.user_id)) ++train_tweets;
        if (r.test.user_ids.count(t.user_id)) ++test_tweets;
    }
    CHECK(train_tweets == static_cast<long>(r.train.record_ids.size()));
    CHECK(test_tweets == static_cast<long>(r.test.record_ids.size()));
}

TEST_CASE("run ids draw different test users") {
    auto records = user_grid({{"a", 16}, {"b", 16}}, 2);
    SplitSpec spec;
    spec.mode = SplitMode::user_disjoint;
    spec.setting = DisjointSetting::narrow;
    spec.seed = 4;
    spec.run = RunId::A;
    auto ra = split_user_disjoint(records, spec);
    spec.run = RunId::B;
    auto rb = split_user_disjoint(records, spec);
    spec.run = RunId::C;
    auto rc = split_user_disjoint(records, spec);
    CHECK(ra.test.user_ids != rb.test.user_ids);
    CHECK((rb.test.user_ids != rc.test.user_ids || ra.test.user_ids != rc.test.user_ids));
}

TEST_CASE("verify_disjoint reports offenders") {
    SplitResult r;
    r.spec.mode = SplitMode::user_disjoint;
    r.train.record_ids = {"a", "b"};
    r.train.user_ids = {"u1", "u2"};
    r.test.record_ids = {"c"};
    r.test.user_ids = {"u2"};
    DisjointReport rep = verify_disjoint(r);
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.shared_user_ids.size() == 1);
    CHECK(rep.shared_user_ids[0] == "u2");

    SplitResult empty;
    CHECK(verify_disjoint(empty).ok);
}

TEST_CASE("manifest json round trip") {
    auto records = user_grid({{"a", 16}, {"b", 13}}, 2);
    SplitSpec spec;
    spec.mode = SplitMode::user_disjoint;
    spec.setting = DisjointSetting::medium;
    spec.run = RunId::B;
    spec.seed = 77;
    SplitResult r = split_user_disjoint(records, spec);
    std::string json = split_manifest_json(r);
    SplitResult back = split_result_from_manifest(json);
    CHECK(back.spec.seed == 77);
    CHECK(back.spec.mode == SplitMode::user_disjoint);
    CHECK(*back.spec.setting == DisjointSetting::medium);
    CHECK(back.train.record_ids == r.train.record_ids);
    CHECK(back.test.user_ids == r.test.user_ids);
}
