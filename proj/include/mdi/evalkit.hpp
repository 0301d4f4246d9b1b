#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdi/corpus.hpp"

namespace mdi {

struct ConfusionMatrix {
    std::vector<std::string> labels;
    // counts[gold][pred]
    std::map<std::string, std::map<std::string, long>> counts;
    long total = 0;

    std::string to_csv() const;
};

struct ClassificationReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;
};

// Accuracy and macro-F1 over the full label set; classes never predicted or
// never gold score F1 = 0 and still enter the macro mean.
ClassificationReport classification_metrics(const std::vector<std::string>& gold,
                                            const std::vector<std::string>& pred,
                                            const std::vector<std::string>& label_set);

// Chance-corrected agreement with marginal-product expected agreement.
double cohen_kappa(const std::vector<std::string>& labels_a,
                   const std::vector<std::string>& labels_b);

inline constexpr double kEarthRadiusKm = 6371.0088; // IUGG mean radius

double haversine_km(double lat1, double lon1, double lat2, double lon2);

struct GeoReport {
    double acc = 0.0;
    double acc_at_80_5 = 0.0;
    double acc_at_161 = 0.0;
    double mean_km = 0.0;
    double median_km = 0.0; // lower middle for even counts
    long n = 0;
};

GeoReport geo_metrics(const std::vector<std::string>& pred_cities,
                      const std::vector<std::string>& gold_cities, const Gazetteer& gazetteer);

struct AggregationSpec {
    double tau = 0.35;
};

struct TweetPrediction {
    std::string label;
    double confidence = 0.0;
};

// Majority over tweets with confidence >= tau; ties go to the label with the
// larger summed confidence, then the lexicographically smaller one. If no
// tweet clears tau, the unthresholded majority applies with the same ties.
std::string user_level_aggregate(const std::vector<TweetPrediction>& tweets,
                                 const AggregationSpec& spec);

std::map<std::string, std::string> aggregate_users(
    const std::map<std::string, std::vector<TweetPrediction>>& by_user,
    const AggregationSpec& spec);

// Baseline I: most frequent TRAIN label everywhere, ties lexicographic.
std::string majority_baseline(const std::vector<std::string>& train_labels);

struct MetricsReport {
    std::string task;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::optional<double> acc_at_80_5;
    std::optional<double> acc_at_161;
    std::optional<double> mean_km;
    std::optional<double> median_km;
    long n = 0;
    std::uint64_t seed = 0;

    std::string to_json() const;
};

} // namespace mdi
