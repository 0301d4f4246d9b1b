#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "mdi/checkpoint.hpp"
#include "mdi/encoder.hpp"
#include "mdi/models.hpp"
#include "mdi/nn/grad_check.hpp"
#include "mdi/train.hpp"
#include "support/fixtures.hpp"

using namespace mdi;
namespace ts = mdi::testsupport;

namespace {

// Hand-derived closed form: one BiGRU direction is 3(IH + H^2 + H).
long bigru_layer_params(int input_dim, int units_total) {
    long h = units_total / 2;
    return 2 * 3 * (static_cast<long>(input_dim) * h + h * h + h);
}

Vocabulary tiny_vocab(int n_regular) {
    std::vector<std::string> toks{"<UNK>", "<CLS>", "<MASK>"};
    for (int i = 0; i < n_regular; ++i) toks.push_back("t" + std::to_string(i));
    return Vocabulary(toks);
}

std::map<Task, LabelSet> geo_labels(int cities, int states, int countries) {
    std::vector<std::string> c, s, n;
    for (int i = 0; i < cities; ++i) c.push_back("city" + std::to_string(i));
    for (int i = 0; i < states; ++i) s.push_back("state" + std::to_string(i));
    for (int i = 0; i < countries; ++i) n.push_back("country" + std::to_string(i));
    return {{Task::city, LabelSet(c)}, {Task::state, LabelSet(s)}, {Task::country, LabelSet(n)}};
}

BiGruConfig tiny_config() {
    BiGruConfig cfg;
    cfg.vocab_size = 30;
    cfg.embed_dim = 8;
    cfg.layers = 3;
    cfg.units = 16;
    cfg.max_seq_len = 5;
    cfg.batch_size = 2;
    cfg.dropout = 0.5;
    return cfg;
}

std::vector<Example> tiny_batch(int batch, int len, int vocab, int classes,
                                std::uint64_t seed) {
    RngStream rng(seed, "tiny_batch");
    std::vector<Example> out;
    for (int b = 0; b < batch; ++b) {
        Example ex;
        ex.id = "ex" + std::to_string(b);
        for (int t = 0; t < len; ++t)
            ex.tokens.push_back(3 + static_cast<int>(rng.next_below(vocab - 3)));
        for (Task t : {Task::city, Task::state, Task::country, Task::diagloss, Task::codesw})
            ex.labels[t] = static_cast<int>(rng.next_below(classes));
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<const Example*> ptrs(const std::vector<Example>& xs) {
    std::vector<const Example*> out;
    for (const Example& x : xs) out.push_back(&x);
    return out;
}

} // namespace

TEST_CASE("single-task bigru structure and parameter count") {
    BiGruConfig cfg = tiny_config();
    auto model = build_single_task_bigru(cfg, tiny_vocab(27), geo_labels(4, 3, 2), Task::city, 1);
    CHECK(model->attention_site_count() == 1);

    // vocab 30, embed 8, units 16, city head 4.
    long expected = 30L * 8 + bigru_layer_params(8, 16) + 2 * bigru_layer_params(16, 16) + 16 +
                    (16L * 4 + 4) + (16L * 3 + 3) + (16L * 2 + 2);
    // This build has three heads (city/state/country label sets all supplied).
    CHECK(model->param_count() == expected);

    std::map<Task, LabelSet> only_city{{Task::city, geo_labels(4, 3, 2).at(Task::city)}};
    auto single = build_single_task_bigru(cfg, tiny_vocab(27), only_city, Task::city, 1);
    long expected_single =
        30L * 8 + bigru_layer_params(8, 16) + 2 * bigru_layer_params(16, 16) + 16 + (16L * 4 + 4);
    CHECK(single->param_count() == expected_single);
    CHECK(single->tasks() == std::vector<Task>{Task::city});
}

TEST_CASE("units split across directions") {
    BiGruConfig cfg = tiny_config();
    cfg.units = 1000;
    cfg.vocab_size = 30;
    auto model = build_single_task_bigru(cfg, tiny_vocab(27),
                                         {{Task::city, LabelSet({"a", "b"})}}, Task::city, 1);
    (void)model;
    RngStream rng(1, "x");
    nn::BiGruLayer l = nn::BiGruLayer::init("probe", 300, 1000, rng);
    CHECK(l.fw.hidden_dim == 500);
    CHECK(l.bw.hidden_dim == 500);
    BiGruConfig bad = cfg;
    bad.units = 999;
    CHECK_THROWS_AS(
        build_single_task_bigru(bad, tiny_vocab(27), {{Task::city, LabelSet({"a", "b"})}},
                                Task::city, 1),
        DataError);
}

TEST_CASE("flat MTL attention sites") {
    BiGruConfig cfg = tiny_config();
    auto common = build_mtl_flat(cfg, false, tiny_vocab(27), geo_labels(4, 3, 2), Task::city, 1);
    auto spec = build_mtl_flat(cfg, true, tiny_vocab(27), geo_labels(4, 3, 2), Task::city, 1);
    CHECK(common->attention_site_count() == 1);
    CHECK(spec->attention_site_count() == 3);
    CHECK(spec->param_count() > common->param_count());

    // Exact bookkeeping: spec trades one shared third layer for three
    // task-owned (layer + query) branches.
    long diff = 3 * (bigru_layer_params(16, 16) + 16) - (bigru_layer_params(16, 16) + 16);
    CHECK(spec->param_count() - common->param_count() == diff);
}

TEST_CASE("MTL architectures require all three geo tasks") {
    BiGruConfig cfg = tiny_config();
    std::map<Task, LabelSet> only_city{{Task::city, LabelSet({"a", "b"})}};
    CHECK_THROWS_AS(build_mtl_flat(cfg, false, tiny_vocab(27), only_city, Task::city, 1),
                    DataError);
}

TEST_CASE("hamtl head maps and parameter counts") {
    BiGruConfig cfg = tiny_config();
    cfg.layers = 4;
    cfg.dropout = 0.7;
    auto city_first =
        build_ha_mtl(cfg, HaMtlOrder::city_first, tiny_vocab(27), geo_labels(4, 3, 2), Task::city, 1);
    auto country_first = build_ha_mtl(cfg, HaMtlOrder::country_first, tiny_vocab(27),
                                      geo_labels(4, 3, 2), Task::city, 1);

    std::map<int, Task> want_city{{2, Task::city}, {3, Task::state}, {4, Task::country}};
    std::map<int, Task> want_country{{2, Task::country}, {3, Task::state}, {4, Task::city}};
    CHECK(city_first->hamtl_head_map() == want_city);
    CHECK(country_first->hamtl_head_map() == want_country);
    CHECK(city_first->param_count() == country_first->param_count());
    CHECK(city_first->attention_site_count() == 3);

    // One HA-MTL vs three single-task networks at the same dims.
    long three_single = 0;
    for (auto [task, n_cls] :
         std::vector<std::pair<Task, int>>{{Task::city, 4}, {Task::state, 3}, {Task::country, 2}}) {
        std::map<Task, LabelSet> ls{{task, geo_labels(4, 3, 2).at(task)}};
        BiGruConfig scfg = tiny_config();
        auto m = build_single_task_bigru(scfg, tiny_vocab(27), ls, task, 1);
        three_single += m->param_count();
    }
    CHECK(city_first->param_count() < three_single);

    BiGruConfig bad = cfg;
    bad.layers = 3;
    CHECK_THROWS_AS(
        build_ha_mtl(bad, HaMtlOrder::city_first, tiny_vocab(27), geo_labels(4, 3, 2), Task::city, 1),
        DataError);
}

TEST_CASE("forward logits shapes and attention capture") {
    BiGruConfig cfg = tiny_config();
    cfg.layers = 4;
    cfg.dropout = 0.7;
    auto model =
        build_ha_mtl(cfg, HaMtlOrder::city_first, tiny_vocab(27), geo_labels(4, 3, 2), Task::city, 7);
    std::vector<Example> batch = tiny_batch(3, 5, 30, 2, 11);
    nn::Graph g;
    AttnCapture capture;
    auto logits = model->forward_logits(g, ptrs(batch), nullptr, &capture);
    CHECK(g.val(logits.at(Task::city)).rows == 3);
    CHECK(g.val(logits.at(Task::city)).cols == 4);
    CHECK(g.val(logits.at(Task::country)).cols == 2);
    REQUIRE(capture.sites.size() == 3);
    CHECK(capture.sites[0].first == "layer2.city");
    CHECK(capture.sites[1].first == "layer3.state");
    CHECK(capture.sites[2].first == "layer4.country");
    for (auto& [site, wv] : capture.sites) {
        const nn::Tensor& w = g.val(wv);
        for (int r = 0; r < w.rows; ++r) {
            double sum = 0;
            for (int c = 0; c < w.cols; ++c) sum += w.at(r, c);
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("ragged batches are rejected") {
    BiGruConfig cfg = tiny_config();
    auto model = build_single_task_bigru(cfg, tiny_vocab(27),
                                         {{Task::city, LabelSet({"a", "b"})}}, Task::city, 1);
    std::vector<Example> batch = tiny_batch(2, 5, 30, 2, 3);
    batch[1].tokens.pop_back();
    nn::Graph g;
    CHECK_THROWS_AS(model->forward_logits(g, ptrs(batch), nullptr), DataError);
}

TEST_CASE("grad check: single-task and hamtl at tiny dims (sampled)") {
    std::vector<Example> batch = tiny_batch(2, 5, 30, 2, 17);
    nn::GradCheckOptions opts;
    opts.max_coords = 250;

    BiGruConfig cfg = tiny_config();
    auto single = build_single_task_bigru(cfg, tiny_vocab(27),
                                          {{Task::city, LabelSet({"a", "b"})}}, Task::city, 5);
    double err = nn::grad_check(single->parameters(), [&](nn::Graph& g) {
        auto logits = single->forward_logits(g, ptrs(batch), nullptr);
        std::vector<int> targets;
        for (const Example& ex : batch) targets.push_back(ex.labels.at(Task::city));
        return g.cross_entropy_logits(logits.at(Task::city), targets);
    }, opts);
    CHECK(err < 1e-4);

    BiGruConfig hcfg = tiny_config();
    hcfg.layers = 4;
    hcfg.dropout = 0.7;
    auto hamtl = build_ha_mtl(hcfg, HaMtlOrder::country_first, tiny_vocab(27), geo_labels(2, 2, 2),
                              Task::city, 5);
    err = nn::grad_check(hamtl->parameters(), [&](nn::Graph& g) {
        auto logits = hamtl->forward_logits(g, ptrs(batch), nullptr);
        std::vector<nn::Var> losses;
        for (Task t : {Task::city, Task::state, Task::country}) {
            std::vector<int> targets;
            for (const Example& ex : batch) targets.push_back(ex.labels.at(t));
            losses.push_back(g.cross_entropy_logits(logits.at(t), targets));
        }
        return g.add_n(losses);
    }, opts);
    CHECK(err < 1e-4);
}

TEST_CASE("encoder structure and parameter count") {
    EncoderConfig cfg;
    cfg.vocab_size = 30;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.model_dim = 8;
    cfg.ffn_dim = 16;
    cfg.max_seq_len = 5;
    auto enc = build_tiny_encoder(cfg, tiny_vocab(27), {{Task::city, LabelSet({"a", "b"})}},
                                  Task::city, 3);
    long d = 8, v = 30, f = 16;
    long per_layer = (3 * d * d + 3 * d) + (d * d + d) // mha projections + output
                     + 2 * d                           // ln1
                     + (d * f + f) + (f * d + d)       // ffn
                     + 2 * d;                          // ln2
    long expected = v * d + (5 + 1) * d // token + position table (max_seq_len + 1 rows)
                    + 2 * per_layer + (d * v + v)      // mlm head
                    + (d * 2 + 2);                     // city head
    CHECK(enc->param_count() == expected);
    CHECK(enc->has_task(Task::mlm));

    EncoderConfig bad = cfg;
    bad.model_dim = 9;
    CHECK_THROWS_AS(build_tiny_encoder(bad, tiny_vocab(27), {}, Task::mlm, 3), DataError);
}

TEST_CASE("mask plan selection") {
    EncoderConfig cfg;
    cfg.vocab_size = 30;
    cfg.max_seq_len = 128;
    Vocabulary vocab = tiny_vocab(27);

    SUBCASE("length 100 selects exactly 15") {
        RngStream rng(23, "mask100");
        std::vector<int> toks(100, 5);
        MaskPlan plan = make_mask_plan(toks, cfg, vocab, rng);
        CHECK(plan.positions.size() == 15);
        CHECK(plan.targets.size() == 15);
        // Positions are distinct and ascending.
        for (std::size_t i = 1; i < plan.positions.size(); ++i)
            CHECK(plan.positions[i] > plan.positions[i - 1]);
    }
    SUBCASE("length below 7 selects nothing") {
        RngStream rng(29, "mask6");
        std::vector<int> toks(6, 5);
        MaskPlan plan = make_mask_plan(toks, cfg, vocab, rng);
        CHECK(plan.positions.empty());
        CHECK(plan.input_ids == toks);
    }
    SUBCASE("empirical fraction over 10^4 tokens is 0.15 +- 0.01") {
        RngStream rng(31, "mask_mc");
        long selected = 0, total = 0;
        while (total < 20000) {
            int len = 20 * (1 + static_cast<int>(rng.next_below(5))); // 20..100
            std::vector<int> toks(len, 7);
            MaskPlan plan = make_mask_plan(toks, cfg, vocab, rng);
            selected += static_cast<long>(plan.positions.size());
            total += len;
        }
        double frac = static_cast<double>(selected) / total;
        CHECK(frac == doctest::Approx(0.15).epsilon(0.067)); // +-0.01 absolute
    }
    SUBCASE("corruption is roughly 80/10/10") {
        RngStream rng(37, "mask_corrupt");
        long mask = 0, changed = 0, kept = 0, total = 0;
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<int> toks(100);
            for (int i = 0; i < 100; ++i) toks[i] = 5 + static_cast<int>(rng.next_below(20));
            MaskPlan plan = make_mask_plan(toks, cfg, vocab, rng);
            for (std::size_t k = 0; k < plan.positions.size(); ++k) {
                int pos = plan.positions[k];
                ++total;
                if (plan.input_ids[pos] == Vocabulary::kMask)
                    ++mask;
                else if (plan.input_ids[pos] != plan.targets[k])
                    ++changed;
                else
                    ++kept;
            }
        }
        CHECK(static_cast<double>(mask) / total == doctest::Approx(0.8).epsilon(0.05));
        // Random replacement can coincide with the original token, so the
        // observed "changed" rate sits slightly under 10%.
        CHECK(static_cast<double>(changed) / total == doctest::Approx(0.10).epsilon(0.2));
        CHECK(static_cast<double>(kept) / total == doctest::Approx(0.10).epsilon(0.25));
    }
}

TEST_CASE("mlm loss only counts masked positions") {
    EncoderConfig cfg;
    cfg.vocab_size = 30;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.model_dim = 8;
    cfg.max_seq_len = 16;
    auto enc = build_tiny_encoder(cfg, tiny_vocab(27), {}, Task::mlm, 5);

    MaskPlan empty_plan;
    empty_plan.input_ids = {5, 6, 7};
    nn::Graph g;
    nn::Var loss = enc->mlm_loss(g, {&empty_plan});
    CHECK_FALSE(loss.valid()); // zero contribution

    MaskPlan plan;
    plan.input_ids = {5, Vocabulary::kMask, 7, 8};
    plan.positions = {1};
    plan.targets = {6};
    nn::Var loss2 = enc->mlm_loss(g, {&empty_plan, &plan});
    REQUIRE(loss2.valid());
    CHECK(std::isfinite(g.val(loss2).v[0]));
}

TEST_CASE("grad check: tiny encoder with mlm head (sampled)") {
    EncoderConfig cfg;
    cfg.vocab_size = 30;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.model_dim = 8;
    cfg.ffn_dim = 16;
    cfg.max_seq_len = 8;
    auto enc = build_tiny_encoder(cfg, tiny_vocab(27), {{Task::city, LabelSet({"a", "b"})}},
                                  Task::city, 7);

    MaskPlan plan;
    plan.input_ids = {5, Vocabulary::kMask, 9, 12, Vocabulary::kMask};
    plan.positions = {1, 4};
    plan.targets = {8, 3};
    std::vector<Example> batch = tiny_batch(2, 5, 30, 2, 41);
    nn::GradCheckOptions opts;
    opts.max_coords = 250;
    double err = nn::grad_check(enc->parameters(), [&](nn::Graph& g) {
        nn::Var mlm = enc->mlm_loss(g, {&plan});
        auto logits = enc->forward_logits(g, ptrs(batch), nullptr);
        std::vector<int> targets;
        for (const Example& ex : batch) targets.push_back(ex.labels.at(Task::city));
        return g.add(mlm, g.cross_entropy_logits(logits.at(Task::city), targets));
    }, opts);
    CHECK(err < 1e-4);
}

TEST_CASE("checkpoint round trip is bit exact") {
    std::string dir = ts::make_temp_dir("mdi_ckpt");
    BiGruConfig cfg = tiny_config();
    auto model = build_single_task_bigru(cfg, tiny_vocab(27),
                                         {{Task::city, LabelSet({"a", "b", "c"})}}, Task::city, 9);
    nlohmann::json meta;
    meta["seed"] = 9;
    meta["best_epoch"] = 3;
    save_checkpoint(dir + "/m.ckpt", *model, meta);

    auto loaded = load_model(dir + "/m.ckpt");
    CHECK(loaded->arch() == "single");
    CHECK(loaded->param_count() == model->param_count());

    std::vector<Example> batch = tiny_batch(2, 5, 30, 3, 51);
    nn::Graph g1, g2;
    auto l1 = model->forward_logits(g1, ptrs(batch), nullptr);
    auto l2 = loaded->forward_logits(g2, ptrs(batch), nullptr);
    CHECK(g1.val(l1.at(Task::city)).v == g2.val(l2.at(Task::city)).v); // bitwise

    save_checkpoint(dir + "/m2.ckpt", *model, meta);
    CHECK(ts::read_text_file(dir + "/m.ckpt") == ts::read_text_file(dir + "/m2.ckpt"));

    Checkpoint raw = read_checkpoint(dir + "/m.ckpt");
    CHECK(raw.metadata.at("best_epoch") == 3);
    CHECK(raw.config.at("arch") == "single");

    // Corrupt the version field.
    std::string bytes = ts::read_text_file(dir + "/m.ckpt");
    bytes[4] = 9;
    ts::write_text_file(dir + "/bad.ckpt", bytes);
    CHECK_THROWS_AS(read_checkpoint(dir + "/bad.ckpt"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("encoder checkpoint round trip") {
    std::string dir = ts::make_temp_dir("mdi_ckpt_enc");
    EncoderConfig cfg;
    cfg.vocab_size = 30;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.model_dim = 8;
    cfg.max_seq_len = 8;
    auto enc = build_tiny_encoder(cfg, tiny_vocab(27), {{Task::city, LabelSet({"a", "b"})}},
                                  Task::city, 13);
    save_checkpoint(dir + "/e.ckpt", *enc, {{"seed", 13}});
    auto loaded = load_model(dir + "/e.ckpt");
    CHECK(loaded->arch() == "encoder");

    std::vector<Example> batch = tiny_batch(2, 5, 30, 2, 61);
    nn::Graph g1, g2;
    auto l1 = enc->forward_logits(g1, ptrs(batch), nullptr);
    auto l2 = loaded->forward_logits(g2, ptrs(batch), nullptr);
    CHECK(g1.val(l1.at(Task::city)).v == g2.val(l2.at(Task::city)).v);
    std::filesystem::remove_all(dir);
}

TEST_CASE("predict outputs simplex probabilities, deterministic on duplicates") {
    ts::SyntheticSpec spec;
    spec.train_per_city = 4;
    spec.test_per_city = 0;
    ts::SyntheticCorpus syn = ts::make_synthetic(spec);

    EncodeOptions eopts;
    Vocabulary vocab = build_vocab_from_records(syn.train, 1, eopts, 50);
    auto labels = harvest_label_sets(syn.train, {Task::city, Task::state, Task::country}, eopts);
    BiGruConfig cfg = tiny_config();
    cfg.vocab_size = vocab.size();
    cfg.layers = 4;
    auto model = build_ha_mtl(cfg, HaMtlOrder::city_first, vocab, labels, Task::city, 21);

    std::vector<TweetRecord> records{syn.train[0], syn.train[1], syn.train[0]};
    records[2].id = "dup";
    auto rows = predict(*model, records, eopts, true);
    REQUIRE(rows.size() == 3);
    for (auto& [task, probs] : rows[0].probs) {
        double sum = 0;
        for (double p : probs) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(rows[0].probs.at(Task::city) == rows[2].probs.at(Task::city));
    CHECK(rows[0].attention.size() == 3);

    // Zeroed heads produce uniform probabilities.
    for (nn::Parameter* p : model->parameters()) {
        if (p->name.rfind("head.", 0) == 0) p->value.fill(0.0);
    }
    auto uniform_rows = predict(*model, records, eopts, false);
    for (double p : uniform_rows[0].probs.at(Task::city))
        CHECK(p == doctest::Approx(1.0 / labels.at(Task::city).size()).epsilon(1e-9));
}
