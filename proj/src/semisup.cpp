#include "mdi/semisup.hpp"

#include <algorithm>

namespace mdi {

namespace {

void sort_by_confidence(std::vector<const PredictionPoolEntry*>& entries) {
    std::sort(entries.begin(), entries.end(),
              [](const PredictionPoolEntry* a, const PredictionPoolEntry* b) {
                  if (a->confidence != b->confidence) return a->confidence > b->confidence;
                  return a->id < b->id;
              });
}

} // namespace

std::vector<PredictionPoolEntry> self_train_select(const std::vector<PredictionPoolEntry>& pool,
                                                   SelectMode mode, int pct) {
    if (pool.empty()) throw DataError(ErrCode::empty_input, "empty prediction pool");
    if (pct != 5 && pct != 10 && pct != 25)
        throw DataError(ErrCode::invalid_pct, "pct must be one of {5, 10, 25}");

    std::vector<PredictionPoolEntry> out;
    if (mode == SelectMode::agnostic) {
        std::vector<const PredictionPoolEntry*> entries;
        entries.reserve(pool.size());
        for (const auto& e : pool) entries.push_back(&e);
        sort_by_confidence(entries);
        std::size_t k = pool.size() * static_cast<std::size_t>(pct) / 100;
        for (std::size_t i = 0; i < k; ++i) out.push_back(*entries[i]);
    } else {
        std::map<std::string, std::vector<const PredictionPoolEntry*>> by_class;
        for (const auto& e : pool) by_class[e.label].push_back(&e);
        for (auto& [label, entries] : by_class) {
            sort_by_confidence(entries);
            std::size_t k = entries.size() * static_cast<std::size_t>(pct) / 100;
            for (std::size_t i = 0; i < k; ++i) out.push_back(*entries[i]);
        }
    }
    return out;
}

std::vector<PredictionPoolEntry> select_by_threshold(const std::vector<PredictionPoolEntry>& pool,
                                                     double tau) {
    if (tau < 0.0 || tau > 1.0) throw DataError(ErrCode::out_of_range, "tau must be in [0,1]");
    std::vector<PredictionPoolEntry> out;
    for (const auto& e : pool)
        if (e.confidence >= tau) out.push_back(e);
    return out;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::weak: return "weak";
        case Regime::weak_plus_gold: return "weak+gold";
        default: return "weak-then-gold";
    }
}

Regime regime_from_string(const std::string& s) {
    if (s == "weak") return Regime::weak;
    if (s == "weak+gold" || s == "weak_plus_gold") return Regime::weak_plus_gold;
    if (s == "weak-then-gold" || s == "weak_then_gold") return Regime::weak_then_gold;
    throw DataError(ErrCode::invalid_config, "unknown regime '" + s + "'");
}

Dataset assemble_weak_plus_gold(const Dataset& auto_set, const Dataset& gold_set,
                                std::uint64_t seed) {
    Dataset combined;
    combined.examples = auto_set.examples;
    combined.examples.insert(combined.examples.end(), gold_set.examples.begin(),
                             gold_set.examples.end());
    RngStream rng(seed, "weak_plus_gold_shuffle");
    rng.shuffle(combined.examples);
    return combined;
}

RegimeResult run_regime(const RegimeSpec& spec, Model& model, const Dataset& auto_set,
                        const Dataset& gold_set, const Dataset& dev, const TrainOptions& opts) {
    if (auto_set.empty()) throw DataError(ErrCode::empty_input, "empty auto-tagged set");
    if (spec.regime != Regime::weak && gold_set.empty())
        throw DataError(ErrCode::empty_input, "regime requires a gold set");

    RegimeResult result;
    TrainOptions phase_opts = opts;
    switch (spec.regime) {
        case Regime::weak: {
            phase_opts.epochs = spec.epochs_phase1;
            result.phases.push_back({"auto", finetune(model, auto_set, dev, phase_opts)});
            break;
        }
        case Regime::weak_plus_gold: {
            Dataset mixed = assemble_weak_plus_gold(auto_set, gold_set, opts.seed);
            phase_opts.epochs = spec.epochs_phase1;
            result.phases.push_back({"auto+gold", finetune(model, mixed, dev, phase_opts)});
            break;
        }
        case Regime::weak_then_gold: {
            phase_opts.epochs = spec.epochs_phase1;
            result.phases.push_back({"auto", finetune(model, auto_set, dev, phase_opts)});
            // Phase 2 resumes from the phase-1 weights already in the model.
            phase_opts.epochs = spec.epochs_phase2;
            phase_opts.seed = opts.seed + 1;
            result.phases.push_back({"gold", finetune(model, gold_set, dev, phase_opts)});
            break;
        }
    }
    return result;
}

MsaFilterResult msa_filter(const std::vector<TweetRecord>& records, Model& classifier,
                           const EncodeOptions& opts) {
    if (!classifier.has_task(Task::diagloss))
        throw DataError(ErrCode::vocab_mismatch, "classifier has no diagloss head");
    const LabelSet& ls = classifier.label_set(Task::diagloss);
    if (!(ls.contains("MSA") && ls.contains("DA") && ls.size() == 2))
        throw DataError(ErrCode::vocab_mismatch, "classifier is not a binary MSA/DA model");

    std::vector<PredictionRow> preds = predict(classifier, records, opts, false);
    // predict() drops token-less records; map id -> prediction.
    std::map<std::string, int> argmax_by_id;
    for (const PredictionRow& row : preds) {
        const std::vector<double>& p = row.probs.at(Task::diagloss);
        argmax_by_id[row.id] =
            static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }
    int msa_idx = ls.index_of("MSA");
    MsaFilterResult result;
    for (const TweetRecord& r : records) {
        auto it = argmax_by_id.find(r.id);
        bool is_msa = it != argmax_by_id.end() && it->second == msa_idx;
        std::string cls = r.labels ? r.labels->city : "(unlabeled)";
        if (is_msa) {
            result.removed.push_back(r);
            result.removed_per_class[cls]++;
        } else {
            result.kept.push_back(r);
            result.kept_per_class[cls]++;
        }
    }
    return result;
}

} // namespace mdi
