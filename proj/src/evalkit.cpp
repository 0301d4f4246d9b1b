#include "mdi/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mdi {

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream os;
    os << "gold\\pred";
    for (const std::string& l : labels) os << ',' << l;
    os << '\n';
    for (const std::string& g : labels) {
        os << g;
        auto row = counts.find(g);
        for (const std::string& p : labels) {
            long c = 0;
            if (row != counts.end()) {
                auto it = row->second.find(p);
                if (it != row->second.end()) c = it->second;
            }
            os << ',' << c;
        }
        os << '\n';
    }
    return os.str();
}

ClassificationReport classification_metrics(const std::vector<std::string>& gold,
                                            const std::vector<std::string>& pred,
                                            const std::vector<std::string>& label_set) {
    if (gold.size() != pred.size())
        throw DataError(ErrCode::length_mismatch, "gold and pred lengths differ");
    if (gold.empty()) throw DataError(ErrCode::empty_input, "nothing to evaluate");
    std::set<std::string> known(label_set.begin(), label_set.end());
    for (const std::string& g : gold)
        if (!known.count(g)) throw DataError(ErrCode::unknown_label, "unknown gold label '" + g + "'");
    for (const std::string& p : pred)
        if (!known.count(p)) throw DataError(ErrCode::unknown_label, "unknown pred label '" + p + "'");

    ClassificationReport rep;
    rep.confusion.labels = label_set;
    std::sort(rep.confusion.labels.begin(), rep.confusion.labels.end());
    rep.confusion.total = static_cast<long>(gold.size());

    long correct = 0;
    std::map<std::string, long> tp, fp, fn;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        rep.confusion.counts[gold[i]][pred[i]]++;
        if (gold[i] == pred[i]) {
            ++correct;
            tp[gold[i]]++;
        } else {
            fp[pred[i]]++;
            fn[gold[i]]++;
        }
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());

    double f1_sum = 0.0;
    for (const std::string& c : rep.confusion.labels) {
        double tpc = static_cast<double>(tp[c]);
        double prec_den = tpc + static_cast<double>(fp[c]);
        double rec_den = tpc + static_cast<double>(fn[c]);
        double prec = prec_den > 0 ? tpc / prec_den : 0.0;
        double rec = rec_den > 0 ? tpc / rec_den : 0.0;
        double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        f1_sum += f1;
    }
    rep.macro_f1 = label_set.empty() ? 0.0 : f1_sum / static_cast<double>(label_set.size());
    return rep;
}

double cohen_kappa(const std::vector<std::string>& labels_a,
                   const std::vector<std::string>& labels_b) {
    if (labels_a.size() != labels_b.size())
        throw DataError(ErrCode::length_mismatch, "label sequences differ in length");
    if (labels_a.empty()) throw DataError(ErrCode::empty_input, "empty label sequences");

    double n = static_cast<double>(labels_a.size());
    std::map<std::string, long> ma, mb;
    long agree = 0;
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        ma[labels_a[i]]++;
        mb[labels_b[i]]++;
        if (labels_a[i] == labels_b[i]) ++agree;
    }
    double po = static_cast<double>(agree) / n;
    double pe = 0.0;
    for (auto& [l, ca] : ma) {
        auto it = mb.find(l);
        if (it != mb.end())
            pe += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
    }
    if (pe >= 1.0 - 1e-15) {
        if (po >= 1.0 - 1e-15) return 1.0;
        throw DataError(ErrCode::degenerate_chance, "chance agreement is 1 with imperfect observed");
    }
    return (po - pe) / (1.0 - pe);
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    if (lat1 < -90 || lat1 > 90 || lat2 < -90 || lat2 > 90 || lon1 < -180 || lon1 > 180 ||
        lon2 < -180 || lon2 > 180)
        throw DataError(ErrCode::out_of_range, "coordinates out of range");
    auto rad = [](double deg) { return deg * M_PI / 180.0; };
    double dlat = rad(lat2 - lat1);
    double dlon = rad(lon2 - lon1);
    double sl = std::sin(dlat / 2.0);
    double so = std::sin(dlon / 2.0);
    double a = sl * sl + so * so * std::cos(rad(lat1)) * std::cos(rad(lat2));
    a = std::clamp(a, 0.0, 1.0);
    return kEarthRadiusKm * 2.0 * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
}

GeoReport geo_metrics(const std::vector<std::string>& pred_cities,
                      const std::vector<std::string>& gold_cities, const Gazetteer& gazetteer) {
    if (pred_cities.size() != gold_cities.size())
        throw DataError(ErrCode::length_mismatch, "pred and gold lengths differ");
    if (pred_cities.empty()) throw DataError(ErrCode::empty_input, "nothing to evaluate");

    GeoReport rep;
    rep.n = static_cast<long>(pred_cities.size());
    std::vector<double> dists;
    dists.reserve(pred_cities.size());
    long exact = 0, within_161 = 0, within_80 = 0;
    for (std::size_t i = 0; i < pred_cities.size(); ++i) {
        double d;
        if (pred_cities[i] == gold_cities[i]) {
            d = 0.0;
            ++exact;
        } else {
            auto [plat, plon] = gazetteer.coordinates(pred_cities[i]);
            auto [glat, glon] = gazetteer.coordinates(gold_cities[i]);
            d = haversine_km(plat, plon, glat, glon);
        }
        if (d <= 80.5) ++within_80;
        if (d <= 161.0) ++within_161;
        dists.push_back(d);
    }
    double n = static_cast<double>(rep.n);
    rep.acc = exact / n;
    rep.acc_at_80_5 = within_80 / n;
    rep.acc_at_161 = within_161 / n;
    double sum = 0.0;
    for (double d : dists) sum += d;
    rep.mean_km = sum / n;
    std::sort(dists.begin(), dists.end());
    rep.median_km = dists[(dists.size() - 1) / 2];
    return rep;
}

namespace {

std::string majority_of(const std::vector<TweetPrediction>& votes) {
    std::map<std::string, std::pair<long, double>> tally; // label -> (count, conf sum)
    for (const TweetPrediction& t : votes) {
        tally[t.label].first++;
        tally[t.label].second += t.confidence;
    }
    std::string best;
    long best_count = -1;
    double best_conf = -1.0;
    for (auto& [label, cc] : tally) { // map order = lexicographic tie-break
        if (cc.first > best_count ||
            (cc.first == best_count && cc.second > best_conf + 1e-12)) {
            best = label;
            best_count = cc.first;
            best_conf = cc.second;
        }
    }
    return best;
}

} // namespace

std::string user_level_aggregate(const std::vector<TweetPrediction>& tweets,
                                 const AggregationSpec& spec) {
    if (tweets.empty()) throw DataError(ErrCode::empty_input, "user has no tweets");
    std::vector<TweetPrediction> confident;
    for (const TweetPrediction& t : tweets) {
        if (t.confidence >= spec.tau) confident.push_back(t);
    }
    if (confident.empty()) return majority_of(tweets);
    return majority_of(confident);
}

std::map<std::string, std::string> aggregate_users(
    const std::map<std::string, std::vector<TweetPrediction>>& by_user,
    const AggregationSpec& spec) {
    std::map<std::string, std::string> out;
    for (auto& [user, tweets] : by_user) out[user] = user_level_aggregate(tweets, spec);
    return out;
}

std::string majority_baseline(const std::vector<std::string>& train_labels) {
    if (train_labels.empty()) throw DataError(ErrCode::empty_input, "empty training labels");
    std::map<std::string, long> counts;
    for (const std::string& l : train_labels) counts[l]++;
    std::string best;
    long best_n = -1;
    for (auto& [l, c] : counts) {
        if (c > best_n) {
            best = l;
            best_n = c;
        }
    }
    return best;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["task"] = task;
    j["accuracy"] = accuracy;
    j["macro_f1"] = macro_f1;
    j["acc_at_80_5"] = acc_at_80_5 ? nlohmann::json(*acc_at_80_5) : nlohmann::json(nullptr);
    j["acc_at_161"] = acc_at_161 ? nlohmann::json(*acc_at_161) : nlohmann::json(nullptr);
    j["mean_km"] = mean_km ? nlohmann::json(*mean_km) : nlohmann::json(nullptr);
    j["median_km"] = median_km ? nlohmann::json(*median_km) : nlohmann::json(nullptr);
    j["n"] = n;
    j["seed"] = seed;
    return j.dump();
}

} // namespace mdi
