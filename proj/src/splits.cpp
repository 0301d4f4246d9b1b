#include "mdi/splits.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mdi/rng.hpp"

namespace mdi {

using nlohmann::json;

std::string to_string(SplitMode m) {
    return m == SplitMode::tweet_random ? "tweet_random" : "user_disjoint";
}

std::string to_string(DisjointSetting s) {
    switch (s) {
        case DisjointSetting::narrow: return "narrow";
        case DisjointSetting::medium: return "medium";
        default: return "wide";
    }
}

std::string to_string(RunId r) {
    switch (r) {
        case RunId::A: return "A";
        case RunId::B: return "B";
        default: return "C";
    }
}

void SplitSpec::validate() const {
    double sum = train_ratio + dev_ratio + test_ratio;
    if (std::abs(sum - 1.0) > 1e-9)
        throw DataError(ErrCode::invalid_config, "split ratios must sum to 1");
    if (train_ratio < 0 || dev_ratio < 0 || test_ratio < 0)
        throw DataError(ErrCode::invalid_config, "split ratios must be non-negative");
    if (per_class_cap && *per_class_cap < 1)
        throw DataError(ErrCode::invalid_config, "per_class_cap must be >= 1");
    if (mode == SplitMode::user_disjoint && !setting)
        throw DataError(ErrCode::invalid_config, "user_disjoint split needs a setting");
}

namespace {

void fill_part(SplitPart& part, const std::vector<const TweetRecord*>& records) {
    for (const TweetRecord* r : records) {
        part.record_ids.push_back(r->id);
        part.user_ids.insert(r->user_id);
        if (r->labels) part.class_counts[r->labels->city]++;
    }
    std::sort(part.record_ids.begin(), part.record_ids.end());
}

} // namespace

SplitResult split_random(const std::vector<TweetRecord>& records, const SplitSpec& spec) {
    spec.validate();
    if (spec.mode != SplitMode::tweet_random)
        throw DataError(ErrCode::invalid_config, "split_random requires tweet_random mode");
    if (records.empty()) throw DataError(ErrCode::empty_input, "empty corpus");

    std::vector<const TweetRecord*> order;
    order.reserve(records.size());
    for (const TweetRecord& r : records) order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const TweetRecord* a, const TweetRecord* b) { return a->id < b->id; });
    RngStream rng(spec.seed, "split_random");
    rng.shuffle(order);

    std::size_t n = order.size();
    std::size_t n_train = static_cast<std::size_t>(std::floor(spec.train_ratio * n));
    std::size_t n_dev = static_cast<std::size_t>(std::floor(spec.dev_ratio * n));
    std::size_t n_test = static_cast<std::size_t>(std::floor(spec.test_ratio * n));
    n_train += n - (n_train + n_dev + n_test); // remainder goes to TRAIN

    SplitResult res;
    res.spec = spec;
    fill_part(res.train, {order.begin(), order.begin() + n_train});
    fill_part(res.dev, {order.begin() + n_train, order.begin() + n_train + n_dev});
    fill_part(res.test, {order.begin() + n_train + n_dev, order.end()});
    return res;
}

std::vector<TweetRecord> cap_per_class(const std::vector<TweetRecord>& train, int cap,
                                       const std::string& level, std::uint64_t seed) {
    if (cap < 1) throw DataError(ErrCode::invalid_config, "cap must be >= 1");
    std::map<std::string, std::vector<const TweetRecord*>> by_class;
    std::vector<const TweetRecord*> unlabeled;
    for (const TweetRecord& r : train) {
        if (!r.labels) {
            unlabeled.push_back(&r);
            continue;
        }
        std::string key = level == "city"    ? r.labels->city
                          : level == "state" ? r.labels->state
                                             : r.labels->country;
        by_class[key].push_back(&r);
    }
    std::vector<const TweetRecord*> kept = unlabeled;
    RngStream base(seed, "cap_per_class");
    for (auto& [cls, members] : by_class) {
        std::sort(members.begin(), members.end(),
                  [](const TweetRecord* a, const TweetRecord* b) { return a->id < b->id; });
        if (static_cast<int>(members.size()) > cap) {
            RngStream rng = base.split(cls);
            rng.shuffle(members);
            members.resize(cap);
        }
        kept.insert(kept.end(), members.begin(), members.end());
    }
    std::sort(kept.begin(), kept.end(),
              [](const TweetRecord* a, const TweetRecord* b) { return a->id < b->id; });
    std::vector<TweetRecord> out;
    out.reserve(kept.size());
    for (const TweetRecord* r : kept) out.push_back(*r);
    return out;
}

SplitResult split_user_disjoint(const std::vector<TweetRecord>& records, const SplitSpec& spec,
                                bool strict) {
    spec.validate();
    if (spec.mode != SplitMode::user_disjoint)
        throw DataError(ErrCode::invalid_config, "split_user_disjoint requires user_disjoint mode");
    if (records.empty()) throw DataError(ErrCode::empty_input, "empty corpus");

    int min_users = 2, test_users = 1;
    switch (*spec.setting) {
        case DisjointSetting::narrow: min_users = 16; test_users = 3; break;
        case DisjointSetting::medium: min_users = 13; test_users = 3; break;
        case DisjointSetting::wide: min_users = 2; test_users = 1; break;
    }

    // user -> city must be a function.
    std::map<std::string, std::string> user_city;
    std::map<std::string, std::set<std::string>> city_users;
    for (const TweetRecord& r : records) {
        if (!r.labels) continue;
        auto [it, inserted] = user_city.insert({r.user_id, r.labels->city});
        if (!inserted && it->second != r.labels->city) {
            if (strict)
                throw DataError(ErrCode::invalid_config,
                                "user '" + r.user_id + "' appears under two cities");
            continue;
        }
        city_users[r.labels->city].insert(r.user_id);
    }

    std::set<std::string> train_users, test_users_set;
    bool any_city = false;
    RngStream base(spec.run_seed(), "split_user_disjoint");
    for (auto& [city, users] : city_users) {
        if (static_cast<int>(users.size()) < min_users) continue;
        any_city = true;
        std::vector<std::string> pool(users.begin(), users.end());
        RngStream rng = base.split(city);
        rng.shuffle(pool);
        for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
            if (i < test_users)
                test_users_set.insert(pool[i]);
            else
                train_users.insert(pool[i]);
        }
    }
    if (!any_city)
        throw DataError(ErrCode::no_eligible_cities, "no city meets the user threshold");

    std::vector<const TweetRecord*> train, test;
    for (const TweetRecord& r : records) {
        if (test_users_set.count(r.user_id))
            test.push_back(&r);
        else if (train_users.count(r.user_id))
            train.push_back(&r);
    }
    SplitResult res;
    res.spec = spec;
    fill_part(res.train, train);
    fill_part(res.test, test);
    return res;
}

DisjointReport verify_disjoint(const SplitResult& result) {
    DisjointReport rep;
    auto check_ids = [&rep](const SplitPart& a, const SplitPart& b) {
        std::vector<std::string> shared;
        std::set_intersection(a.record_ids.begin(), a.record_ids.end(), b.record_ids.begin(),
                              b.record_ids.end(), std::back_inserter(shared));
        for (std::string& s : shared) rep.shared_record_ids.push_back(std::move(s));
    };
    check_ids(result.train, result.dev);
    check_ids(result.train, result.test);
    check_ids(result.dev, result.test);
    if (result.spec.mode == SplitMode::user_disjoint) {
        auto check_users = [&rep](const SplitPart& a, const SplitPart& b) {
            for (const std::string& u : a.user_ids) {
                if (b.user_ids.count(u)) rep.shared_user_ids.push_back(u);
            }
        };
        check_users(result.train, result.dev);
        check_users(result.train, result.test);
        check_users(result.dev, result.test);
    }
    rep.ok = rep.shared_record_ids.empty() && rep.shared_user_ids.empty();
    return rep;
}

namespace {

json part_to_json(const SplitPart& p) {
    json j;
    j["record_ids"] = p.record_ids;
    j["user_ids"] = std::vector<std::string>(p.user_ids.begin(), p.user_ids.end());
    j["class_counts"] = p.class_counts;
    return j;
}

SplitPart part_from_json(const json& j) {
    SplitPart p;
    p.record_ids = j.at("record_ids").get<std::vector<std::string>>();
    for (const auto& u : j.at("user_ids")) p.user_ids.insert(u.get<std::string>());
    if (j.contains("class_counts"))
        p.class_counts = j.at("class_counts").get<std::map<std::string, long>>();
    return p;
}

} // namespace

std::string split_manifest_json(const SplitResult& result) {
    json j;
    j["seed"] = result.spec.seed;
    j["mode"] = to_string(result.spec.mode);
    if (result.spec.setting) j["setting"] = to_string(*result.spec.setting);
    j["run"] = to_string(result.spec.run);
    j["train"] = part_to_json(result.train);
    j["dev"] = part_to_json(result.dev);
    j["test"] = part_to_json(result.test);
    return j.dump(2);
}

SplitResult split_result_from_manifest(const std::string& json_text) {
    json j = json::parse(json_text);
    SplitResult res;
    res.spec.seed = j.at("seed").get<std::uint64_t>();
    res.spec.mode =
        j.at("mode").get<std::string>() == "user_disjoint" ? SplitMode::user_disjoint
                                                           : SplitMode::tweet_random;
    if (j.contains("setting")) {
        std::string s = j["setting"].get<std::string>();
        res.spec.setting = s == "narrow"   ? DisjointSetting::narrow
                           : s == "medium" ? DisjointSetting::medium
                                           : DisjointSetting::wide;
    }
    std::string run = j.value("run", "A");
    res.spec.run = run == "B" ? RunId::B : run == "C" ? RunId::C : RunId::A;
    res.train = part_from_json(j.at("train"));
    res.dev = part_from_json(j.at("dev"));
    res.test = part_from_json(j.at("test"));
    return res;
}

} // namespace mdi
