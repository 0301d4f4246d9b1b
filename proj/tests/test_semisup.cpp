#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "mdi/checkpoint.hpp"
#include "mdi/semisup.hpp"
#include "support/fixtures.hpp"

using namespace mdi;
namespace ts = mdi::testsupport;

namespace {

std::vector<PredictionPoolEntry> random_pool(RngStream& rng, int n, int classes) {
    std::vector<PredictionPoolEntry> pool;
    for (int i = 0; i < n; ++i) {
        PredictionPoolEntry e;
        e.id = "p" + std::to_string(i);
        e.label = "c" + std::to_string(rng.next_below(classes));
        e.confidence = rng.next_double();
        pool.push_back(std::move(e));
    }
    return pool;
}

// Brute-force oracle: full sort, take the exact prefix.
std::set<std::string> brute_select_ids(std::vector<PredictionPoolEntry> pool, SelectMode mode,
                                       int pct) {
    auto cmp = [](const PredictionPoolEntry& a, const PredictionPoolEntry& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.id < b.id;
    };
    std::set<std::string> ids;
    if (mode == SelectMode::agnostic) {
        std::sort(pool.begin(), pool.end(), cmp);
        std::size_t k = pool.size() * pct / 100;
        for (std::size_t i = 0; i < k; ++i) ids.insert(pool[i].id);
    } else {
        std::map<std::string, std::vector<PredictionPoolEntry>> by;
        for (auto& e : pool) by[e.label].push_back(e);
        for (auto& [label, xs] : by) {
            std::sort(xs.begin(), xs.end(), cmp);
            std::size_t k = xs.size() * pct / 100;
            for (std::size_t i = 0; i < k; ++i) ids.insert(xs[i].id);
        }
    }
    return ids;
}

} // namespace

TEST_CASE("class-specific quota arithmetic") {
    std::vector<PredictionPoolEntry> pool;
    for (int i = 0; i < 8; ++i) pool.push_back({"a" + std::to_string(i), "A", 0.1 * i, {}});
    for (int i = 0; i < 4; ++i) pool.push_back({"b" + std::to_string(i), "B", 0.2 * i, {}});
    auto sel = self_train_select(pool, SelectMode::specific, 25);
    long a = 0, b = 0;
    for (auto& e : sel) (e.label == "A" ? a : b)++;
    CHECK(a == 2);
    CHECK(b == 1);
}

TEST_CASE("agnostic selection takes the global top slice") {
    RngStream rng(3, "pool");
    auto pool = random_pool(rng, 12, 3);
    auto sel = self_train_select(pool, SelectMode::agnostic, 25);
    REQUIRE(sel.size() == 3);
    double min_sel = 1.0;
    for (auto& e : sel) min_sel = std::min(min_sel, e.confidence);
    std::set<std::string> chosen;
    for (auto& e : sel) chosen.insert(e.id);
    for (auto& e : pool) {
        if (!chosen.count(e.id)) CHECK(e.confidence <= min_sel);
    }
}

TEST_CASE("invalid pct and empty pool are rejected") {
    RngStream rng(5, "pool");
    auto pool = random_pool(rng, 10, 2);
    CHECK_THROWS_AS(self_train_select(pool, SelectMode::agnostic, 100), DataError);
    CHECK_THROWS_AS(self_train_select(pool, SelectMode::agnostic, 7), DataError);
    CHECK_THROWS_AS(self_train_select({}, SelectMode::agnostic, 5), DataError);
}

TEST_CASE("selection matches the brute-force oracle on random pools") {
    RngStream rng(7, "pool_oracle");
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.next_below(60));
        auto pool = random_pool(rng, n, 1 + static_cast<int>(rng.next_below(4)));
        for (int pct : {5, 10, 25}) {
            for (SelectMode mode : {SelectMode::agnostic, SelectMode::specific}) {
                auto sel = self_train_select(pool, mode, pct);
                std::set<std::string> got;
                for (auto& e : sel) got.insert(e.id);
                CHECK(got == brute_select_ids(pool, mode, pct));
            }
        }
    }
}

TEST_CASE("per-class minimum confidence dominates the unselected") {
    RngStream rng(11, "pool_dom");
    auto pool = random_pool(rng, 40, 3);
    auto sel = self_train_select(pool, SelectMode::specific, 25);
    std::map<std::string, double> min_sel;
    std::set<std::string> chosen;
    for (auto& e : sel) {
        chosen.insert(e.id);
        auto it = min_sel.find(e.label);
        if (it == min_sel.end() || e.confidence < it->second) min_sel[e.label] = e.confidence;
    }
    for (auto& e : pool) {
        if (chosen.count(e.id) || !min_sel.count(e.label)) continue;
        CHECK(e.confidence <= min_sel[e.label]);
    }
}

TEST_CASE("threshold variant") {
    std::vector<PredictionPoolEntry> pool{{"a", "A", 0.9, {}}, {"b", "B", 0.3, {}}};
    auto sel = select_by_threshold(pool, 0.5);
    REQUIRE(sel.size() == 1);
    CHECK(sel[0].id == "a");
    CHECK_THROWS_AS(select_by_threshold(pool, 1.5), DataError);
}

namespace {

struct RegimeSetup {
    ts::SyntheticCorpus syn;
    Vocabulary vocab;
    std::map<Task, LabelSet> labels;
    Dataset auto_set, gold_set, dev;
    std::unique_ptr<BiGruModel> fresh(std::uint64_t seed) const {
        BiGruConfig cfg;
        cfg.vocab_size = vocab.size();
        cfg.embed_dim = 8;
        cfg.layers = 3;
        cfg.units = 8;
        cfg.max_seq_len = 16;
        cfg.dropout = 0.0;
        std::map<Task, LabelSet> city_only{{Task::city, labels.at(Task::city)}};
        return build_single_task_bigru(cfg, vocab, city_only, Task::city, seed);
    }
};

RegimeSetup regime_setup() {
    RegimeSetup s;
    ts::SyntheticSpec spec;
    spec.countries = 2;
    spec.states_per_country = 1;
    spec.cities_per_state = 1; // 2 cities
    spec.shared_vocab = 30;
    spec.train_per_city = 10;
    spec.test_per_city = 4;
    spec.min_len = 5;
    spec.max_len = 8;
    s.syn = ts::make_synthetic(spec);
    EncodeOptions eopts;
    s.vocab = build_vocab_from_records(s.syn.train, 1, eopts, 50);
    s.labels = harvest_label_sets(s.syn.train, {Task::city}, eopts);
    auto model = s.fresh(1);
    Dataset all = encode_records(s.syn.train, *model, eopts);
    // First half plays "auto-tagged", second half "gold".
    for (std::size_t i = 0; i < all.size(); ++i)
        (i < all.size() / 2 ? s.auto_set : s.gold_set).examples.push_back(all.examples[i]);
    s.dev = encode_records(s.syn.test, *model, eopts);
    return s;
}

} // namespace

TEST_CASE("weak+gold training multiset equals auto plus gold") {
    RegimeSetup s = regime_setup();
    Dataset mixed = assemble_weak_plus_gold(s.auto_set, s.gold_set, 17);
    CHECK(mixed.size() == s.auto_set.size() + s.gold_set.size());
    std::multiset<std::string> want, got;
    for (auto& e : s.auto_set.examples) want.insert(e.id);
    for (auto& e : s.gold_set.examples) want.insert(e.id);
    for (auto& e : mixed.examples) got.insert(e.id);
    CHECK(want == got);
    // Order invariance up to the seeded shuffle.
    Dataset swapped = assemble_weak_plus_gold(s.gold_set, s.auto_set, 17);
    std::multiset<std::string> got2;
    for (auto& e : swapped.examples) got2.insert(e.id);
    CHECK(got2 == want);
}

TEST_CASE("weak regime trains on auto only, empty gold is fine") {
    RegimeSetup s = regime_setup();
    auto model = s.fresh(3);
    RegimeSpec spec;
    spec.regime = Regime::weak;
    spec.epochs_phase1 = 2;
    TrainOptions opts;
    opts.batch_size = 4;
    opts.seed = 3;
    RegimeResult res = run_regime(spec, *model, s.auto_set, {}, s.dev, opts);
    REQUIRE(res.phases.size() == 1);
    CHECK(res.phases[0].name == "auto");
}

TEST_CASE("weak-then-gold chains phase-2 from phase-1 weights bit-exactly") {
    RegimeSetup s = regime_setup();
    TrainOptions opts;
    opts.batch_size = 4;
    opts.seed = 7;
    opts.dropout_enabled = false;

    RegimeSpec spec;
    spec.regime = Regime::weak_then_gold;
    spec.epochs_phase1 = 2;
    spec.epochs_phase2 = 2;
    auto via_regime = s.fresh(9);
    RegimeResult res = run_regime(spec, *via_regime, s.auto_set, s.gold_set, s.dev, opts);
    REQUIRE(res.phases.size() == 2);

    // Manual chain with the same seeds.
    auto manual = s.fresh(9);
    TrainOptions p1 = opts;
    p1.epochs = 2;
    finetune(*manual, s.auto_set, s.dev, p1);
    TrainOptions p2 = opts;
    p2.epochs = 2;
    p2.seed = opts.seed + 1;
    finetune(*manual, s.gold_set, s.dev, p2);

    std::string dir = ts::make_temp_dir("mdi_regime");
    save_checkpoint(dir + "/a.ckpt", *via_regime, {});
    save_checkpoint(dir + "/b.ckpt", *manual, {});
    CHECK(ts::read_text_file(dir + "/a.ckpt") == ts::read_text_file(dir + "/b.ckpt"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("regimes needing gold reject an empty gold set") {
    RegimeSetup s = regime_setup();
    auto model = s.fresh(3);
    RegimeSpec spec;
    spec.regime = Regime::weak_plus_gold;
    TrainOptions opts;
    CHECK_THROWS_AS(run_regime(spec, *model, s.auto_set, {}, s.dev, opts), DataError);
}

namespace {

// Single-task diagloss classifier whose head bias forces one class.
std::unique_ptr<BiGruModel> forced_diagloss_model(const Vocabulary& vocab,
                                                  const std::string& winner) {
    BiGruConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = 8;
    cfg.layers = 3;
    cfg.units = 8;
    cfg.max_seq_len = 16;
    cfg.dropout = 0.0;
    std::map<Task, LabelSet> ls{{Task::diagloss, LabelSet({"DA", "MSA"})}};
    auto model = build_single_task_bigru(cfg, vocab, ls, Task::diagloss, 3);
    int win_idx = model->label_set(Task::diagloss).index_of(winner);
    for (nn::Parameter* p : model->parameters()) {
        if (p->name == "head.diagloss.W") p->value.fill(0.0);
        if (p->name == "head.diagloss.b") {
            p->value.fill(0.0);
            p->value.v[win_idx] = 10.0;
        }
    }
    return model;
}

} // namespace

TEST_CASE("msa_filter") {
    RegimeSetup s = regime_setup();
    EncodeOptions eopts;

    SUBCASE("all-DA classifier keeps everything") {
        auto model = forced_diagloss_model(s.vocab, "DA");
        MsaFilterResult res = msa_filter(s.syn.train, *model, eopts);
        CHECK(res.kept.size() == s.syn.train.size());
        CHECK(res.removed.empty());
    }
    SUBCASE("all-MSA classifier removes everything") {
        auto model = forced_diagloss_model(s.vocab, "MSA");
        MsaFilterResult res = msa_filter(s.syn.train, *model, eopts);
        CHECK(res.kept.empty());
        CHECK(res.removed.size() == s.syn.train.size());
        long removed_total = 0;
        for (auto& [cls, n] : res.removed_per_class) removed_total += n;
        CHECK(removed_total == static_cast<long>(s.syn.train.size()));
    }
    SUBCASE("mixed classifier matches the per-record argmax oracle") {
        // A lightly trained real model: arbitrary but deterministic outputs.
        auto model = forced_diagloss_model(s.vocab, "DA");
        // Re-randomize the head so predictions vary per record.
        RngStream rng(17, "head");
        for (nn::Parameter* p : model->parameters()) {
            if (p->name.rfind("head.diagloss", 0) == 0)
                for (double& v : p->value.v) v = rng.next_normal(0.0, 1.0);
        }
        MsaFilterResult res = msa_filter(s.syn.train, *model, eopts);
        auto preds = predict(*model, s.syn.train, eopts, false);
        std::map<std::string, std::string> verdict;
        int msa_idx = model->label_set(Task::diagloss).index_of("MSA");
        for (auto& row : preds) {
            const auto& p = row.probs.at(Task::diagloss);
            verdict[row.id] = static_cast<int>(std::max_element(p.begin(), p.end()) -
                                               p.begin()) == msa_idx
                                  ? "MSA"
                                  : "DA";
        }
        for (auto& r : res.kept) CHECK(verdict.at(r.id) == "DA");
        for (auto& r : res.removed) CHECK(verdict.at(r.id) == "MSA");
        CHECK(res.kept.size() + res.removed.size() == s.syn.train.size());
    }
    SUBCASE("non-diagloss checkpoints are rejected") {
        auto wrong = regime_setup().fresh(3); // city model
        CHECK_THROWS_AS(msa_filter(s.syn.train, *wrong, eopts), DataError);
    }
}
