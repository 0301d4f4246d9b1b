#pragma once

#include "mdi/train.hpp"

namespace mdi {

struct PredictionPoolEntry {
    std::string id;
    std::string label;
    double confidence = 0.0; // predicted-class softmax probability
    std::map<std::string, double> distribution; // optional full softmax
};

enum class SelectMode { agnostic, specific };

// Top-percentage self-training selection. pct must be one of {5, 10, 25}.
// agnostic: floor(pct*N/100) highest-confidence entries overall;
// specific: floor(pct*n_c/100) per class. Ordering is stable by
// (confidence desc, id asc).
std::vector<PredictionPoolEntry> self_train_select(const std::vector<PredictionPoolEntry>& pool,
                                                   SelectMode mode, int pct);

// Threshold variant (>= tau), offered as an option; not a paper-fidelity path.
std::vector<PredictionPoolEntry> select_by_threshold(const std::vector<PredictionPoolEntry>& pool,
                                                     double tau);

enum class Regime { weak, weak_plus_gold, weak_then_gold };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct RegimeSpec {
    Regime regime = Regime::weak;
    int epochs_phase1 = 15;
    int epochs_phase2 = 15;
};

struct RegimePhase {
    std::string name; // "auto", "gold", "auto+gold"
    TrainResult result;
};

struct RegimeResult {
    std::vector<RegimePhase> phases;
};

// Exposed so the multiset-equality contract is directly testable: seeded
// shuffle of the concatenation auto + gold.
Dataset assemble_weak_plus_gold(const Dataset& auto_set, const Dataset& gold_set,
                                std::uint64_t seed);

// weak: train on auto only. weak_plus_gold: one phase on the shuffled
// concatenation. weak_then_gold: phase 1 on auto, phase 2 resumes from the
// phase-1 weights on gold. Callers hand in preprocessed data (the >=3
// Arabic-word filter runs upstream).
RegimeResult run_regime(const RegimeSpec& spec, Model& model, const Dataset& auto_set,
                        const Dataset& gold_set, const Dataset& dev, const TrainOptions& opts);

struct MsaFilterResult {
    std::vector<TweetRecord> kept;     // predicted DA
    std::vector<TweetRecord> removed;  // predicted MSA
    std::map<std::string, long> kept_per_class;
    std::map<std::string, long> removed_per_class;
};

// Drops records the binary MSA/DA classifier predicts as MSA. The checkpoint
// must carry a diagloss head with labels {DA, MSA}.
MsaFilterResult msa_filter(const std::vector<TweetRecord>& records, Model& classifier,
                           const EncodeOptions& opts);

} // namespace mdi
