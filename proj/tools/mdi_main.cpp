// Command-line front end for the micro-dialect identification pipeline.
// Exit codes: 0 success, 1 usage error, 2 data validation failure,
// 3 numeric failure.

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdi/checkpoint.hpp"
#include "mdi/corpus_io.hpp"
#include "mdi/evalkit.hpp"
#include "mdi/manifest.hpp"
#include "mdi/semisup.hpp"
#include "mdi/splits.hpp"
#include "mdi/train.hpp"

using namespace mdi;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 12345;
    bool json_out = false;
};

// Invocation-shape problems (wrong flag combinations) map to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value files ('#' comments allowed); every key addresses an option
// of the active subcommand, and explicit flags override file values.
class FlatConfig : public CLI::Config {
  public:
    explicit FlatConfig(const std::string* scope) : scope_(scope) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::vector<CLI::ConfigItem> out;
        std::string line;
        while (std::getline(input, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                auto a = s.find_first_not_of(" \t\r");
                auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
            };
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) continue;
            CLI::ConfigItem item;
            if (!scope_->empty()) item.parents = {*scope_};
            item.name = key;
            item.inputs = {value};
            out.push_back(std::move(item));
        }
        return out;
    }

  private:
    const std::string* scope_;
};

std::string g_active_subcommand;

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--seed", c.seed, "Global seed for all stochastic behavior")
        ->capture_default_str();
    sub->add_flag("--json", c.json_out, "Machine-readable JSON on stdout, logs on stderr");
    sub->fallthrough();
    sub->preparse_callback(
        [name = sub->get_name()](std::size_t) { g_active_subcommand = name; });
}

std::chrono::steady_clock::time_point now() { return std::chrono::steady_clock::now(); }

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(now() - t0).count();
}

void emit(const CommonOpts& c, const json& payload, const std::string& human) {
    if (c.json_out)
        std::cout << payload.dump() << std::endl;
    else
        std::cout << human << std::endl;
}

void write_manifest(const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall, const json& metrics) {
    if (outputs.empty()) return;
    RunManifest m;
    m.command = command;
    m.config = config;
    for (const std::string& in : inputs) m.inputs.push_back({in, file_digest(in)});
    m.outputs = outputs;
    m.wall_seconds = wall;
    m.metrics = metrics;
    m.write(outputs.front() + ".manifest.json");
}

Task parse_task(const std::string& s) { return task_from_string(s); }

std::vector<TweetRecord> records_for_ids(const std::vector<TweetRecord>& all,
                                         const std::vector<std::string>& ids) {
    std::map<std::string, const TweetRecord*> by_id;
    for (const TweetRecord& r : all) by_id[r.id] = &r;
    std::vector<TweetRecord> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw DataError(ErrCode::bad_file, "manifest names unknown record id '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessCmd {
    CommonOpts common;
    std::string input, out, stats_path, users_path, gazetteer_path, aliases_path;
    int min_arabic_words = 3;
    bool strict_users = false;
};

void run_preprocess(const PreprocessCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> records = io::read_corpus_jsonl(cmd.input);
    std::vector<std::string> inputs{cmd.input};

    if (!cmd.users_path.empty()) {
        if (cmd.gazetteer_path.empty())
            throw UsageError("--users requires --gazetteer");
        Gazetteer gaz = io::read_gazetteer_tsv(cmd.gazetteer_path);
        inputs.push_back(cmd.gazetteer_path);
        std::map<std::string, std::pair<std::string, std::string>> aliases;
        if (!cmd.aliases_path.empty()) {
            aliases = io::read_alias_tsv(cmd.aliases_path);
            inputs.push_back(cmd.aliases_path);
        }
        // users TSV: user_id<TAB>raw_location
        std::ifstream uf(cmd.users_path);
        if (!uf) throw DataError(ErrCode::bad_file, "cannot open '" + cmd.users_path + "'");
        inputs.push_back(cmd.users_path);
        std::map<std::string, LocationHierarchy> users;
        std::string line;
        long unresolved = 0;
        while (std::getline(uf, line)) {
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw DataError(ErrCode::bad_file, "users file needs user_id<TAB>location");
            std::string user = line.substr(0, tab), loc = line.substr(tab + 1);
            try {
                users[user] = gaz.resolve(loc, aliases);
            } catch (const DataError& e) {
                if (e.code() != ErrCode::unresolved_location || cmd.strict_users) throw;
                ++unresolved; // dropped, to be queued for manual mapping
            }
        }
        std::cerr << "resolved " << users.size() << " users (" << unresolved << " unresolved)\n";
        records = propagate_labels(users, records, cmd.strict_users);
    }

    PreprocessResult res = preprocess(records, cmd.min_arabic_words);
    io::write_corpus_jsonl(cmd.out, res.records);

    json stats_json;
    CorpusStats stats = corpus_stats(res.records);
    stats_json["kept"] = static_cast<long>(res.records.size());
    stats_json["dropped_retweets"] = res.dropped_retweets;
    stats_json["dropped_short"] = res.dropped_short;
    stats_json["tweets_per_country"] = stats.tweets_per_country;
    stats_json["users_per_country"] = stats.users_per_country;
    stats_json["vocab_size"] = stats.vocab_size;
    stats_json["tokens"] = stats.token_count;
    if (!cmd.stats_path.empty()) {
        std::ofstream sf(cmd.stats_path);
        sf << stats_json.dump(2) << '\n';
    }

    json config{{"seed", cmd.common.seed},
                {"min_arabic_words", cmd.min_arabic_words},
                {"strict_users", cmd.strict_users}};
    write_manifest("preprocess", config, inputs, {cmd.out}, secs_since(t0), stats_json);
    emit(cmd.common, stats_json,
         "kept " + std::to_string(res.records.size()) + " records (dropped " +
             std::to_string(res.dropped_retweets) + " retweets, " +
             std::to_string(res.dropped_short) + " short)");
}

// --------------------------------------------------------------------- label

struct LabelCmd {
    CommonOpts common;
    std::string which; // diagloss | codesw
    std::string input, out;
    int cap = 0;
};

void run_label(const LabelCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> records = io::read_corpus_jsonl(cmd.input);
    std::vector<TweetRecord> labeled;
    if (cmd.which == "diagloss") {
        for (TweetRecord& r : records) {
            DiaglossLabel l = proxy_label_diaglossia(r);
            if (l == DiaglossLabel::none) continue;
            r.diagloss = to_string(l);
            labeled.push_back(std::move(r));
        }
        if (cmd.cap > 0) {
            // Per-class cap by seeded subsample, keyed on the proxy label.
            std::map<std::string, std::vector<TweetRecord>> by;
            for (TweetRecord& r : labeled) by[*r.diagloss].push_back(std::move(r));
            labeled.clear();
            RngStream rng(cmd.common.seed, "diagloss_cap");
            for (auto& [cls, members] : by) {
                if (static_cast<int>(members.size()) > cmd.cap) {
                    RngStream crng = rng.split(cls);
                    crng.shuffle(members);
                    members.resize(cmd.cap);
                }
                for (TweetRecord& r : members) labeled.push_back(std::move(r));
            }
            std::sort(labeled.begin(), labeled.end(),
                      [](const TweetRecord& a, const TweetRecord& b) { return a.id < b.id; });
        }
    } else {
        labeled = extract_codesw(records);
    }
    io::write_corpus_jsonl(cmd.out, labeled);
    json summary{{"input", static_cast<long>(records.size())},
                 {"labeled", static_cast<long>(labeled.size())}};
    json config{{"seed", cmd.common.seed}, {"task", cmd.which}, {"cap", cmd.cap}};
    write_manifest("label " + cmd.which, config, {cmd.input}, {cmd.out}, secs_since(t0), summary);
    emit(cmd.common, summary,
         "labeled " + std::to_string(labeled.size()) + " of " + std::to_string(records.size()) +
             " records");
}

// --------------------------------------------------------------------- split

struct SplitCmd {
    CommonOpts common;
    std::string mode; // random | disjoint
    std::string input, out, setting = "narrow", run = "A", emit_prefix, cap_level = "country";
    std::vector<double> ratios{0.8, 0.1, 0.1};
    int cap = 0;
};

void run_split(const SplitCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> records = io::read_corpus_jsonl(cmd.input);
    SplitSpec spec;
    spec.seed = cmd.common.seed;
    if (cmd.mode == "random") {
        spec.mode = SplitMode::tweet_random;
        if (cmd.ratios.size() != 3)
            throw DataError(ErrCode::invalid_config, "--ratios needs train,dev,test");
        spec.train_ratio = cmd.ratios[0];
        spec.dev_ratio = cmd.ratios[1];
        spec.test_ratio = cmd.ratios[2];
    } else {
        spec.mode = SplitMode::user_disjoint;
        spec.setting = cmd.setting == "narrow"   ? DisjointSetting::narrow
                       : cmd.setting == "medium" ? DisjointSetting::medium
                                                 : DisjointSetting::wide;
        spec.run = cmd.run == "B" ? RunId::B : cmd.run == "C" ? RunId::C : RunId::A;
    }
    if (cmd.cap > 0) spec.per_class_cap = cmd.cap;

    SplitResult result = spec.mode == SplitMode::tweet_random
                             ? split_random(records, spec)
                             : split_user_disjoint(records, spec);
    if (cmd.cap > 0) {
        std::vector<TweetRecord> train = records_for_ids(records, result.train.record_ids);
        std::vector<TweetRecord> capped =
            cap_per_class(train, cmd.cap, cmd.cap_level, spec.seed);
        SplitPart part;
        for (const TweetRecord& r : capped) {
            part.record_ids.push_back(r.id);
            part.user_ids.insert(r.user_id);
            if (r.labels) part.class_counts[r.labels->city]++;
        }
        std::sort(part.record_ids.begin(), part.record_ids.end());
        result.train = std::move(part);
    }

    DisjointReport rep = verify_disjoint(result);
    if (!rep.ok) throw DataError(ErrCode::invalid_config, "split is not disjoint");

    std::ofstream mf(cmd.out);
    if (!mf) throw DataError(ErrCode::bad_file, "cannot write '" + cmd.out + "'");
    mf << split_manifest_json(result) << '\n';
    mf.close();

    std::vector<std::string> outputs{cmd.out};
    if (!cmd.emit_prefix.empty()) {
        auto emit_part = [&](const SplitPart& part, const std::string& name) {
            if (part.record_ids.empty() && name != "train") return;
            std::string path = cmd.emit_prefix + "." + name + ".jsonl";
            io::write_corpus_jsonl(path, records_for_ids(records, part.record_ids));
            outputs.push_back(path);
        };
        emit_part(result.train, "train");
        emit_part(result.dev, "dev");
        emit_part(result.test, "test");
    }

    json summary{{"train", static_cast<long>(result.train.record_ids.size())},
                 {"dev", static_cast<long>(result.dev.record_ids.size())},
                 {"test", static_cast<long>(result.test.record_ids.size())},
                 {"disjoint", rep.ok}};
    json config{{"seed", cmd.common.seed}, {"mode", cmd.mode},     {"setting", cmd.setting},
                {"run", cmd.run},          {"ratios", cmd.ratios}, {"cap", cmd.cap}};
    write_manifest("split " + cmd.mode, config, {cmd.input}, outputs, secs_since(t0), summary);
    emit(cmd.common, summary,
         "split sizes: train " + std::to_string(result.train.record_ids.size()) + ", dev " +
             std::to_string(result.dev.record_ids.size()) + ", test " +
             std::to_string(result.test.record_ids.size()));
}

// --------------------------------------------------------------------- train

struct ModelHyper {
    int embed_dim = 300;
    int units = 1000;
    int layers = 0; // 0 = architecture default
    int max_seq_len = 50;
    int batch_size = 0; // 0 = architecture default
    double dropout = -1.0;
    double lr = 0.0;
    int epochs = 15;
    int patience = 5;
    int min_freq = 2;
    bool keep_diacritics = false;
    // encoder
    int heads = 2;
    int model_dim = 32;
    int ffn_dim = 0;
    double mask_rate = 0.15;
};

void add_hyper(CLI::App* sub, ModelHyper& h) {
    sub->add_option("--embed-dim", h.embed_dim)->capture_default_str();
    sub->add_option("--units", h.units)->capture_default_str();
    sub->add_option("--layers", h.layers, "0 = architecture default")->capture_default_str();
    sub->add_option("--max-seq-len", h.max_seq_len)->capture_default_str();
    sub->add_option("--batch-size", h.batch_size, "0 = architecture default")
        ->capture_default_str();
    sub->add_option("--dropout", h.dropout, "negative = architecture default")
        ->capture_default_str();
    sub->add_option("--lr", h.lr, "0 = architecture default")->capture_default_str();
    sub->add_option("--epochs", h.epochs)->capture_default_str();
    sub->add_option("--patience", h.patience)->capture_default_str();
    sub->add_option("--min-freq", h.min_freq, "Vocabulary minimum frequency")
        ->capture_default_str();
    sub->add_flag("--keep-diacritics", h.keep_diacritics,
                  "Skip diacritic stripping at model input");
    sub->add_option("--heads", h.heads, "Encoder attention heads")->capture_default_str();
    sub->add_option("--model-dim", h.model_dim, "Encoder model dimension")->capture_default_str();
    sub->add_option("--ffn-dim", h.ffn_dim, "0 = 4x model dim")->capture_default_str();
    sub->add_option("--mask-rate", h.mask_rate)->capture_default_str();
}

struct TrainCmd {
    CommonOpts common;
    std::string arch = "single";
    std::string train_path, dev_path, out, init_ckpt;
    std::string task = "city";
    std::string codesw_level = "country";
    std::vector<std::string> aux; // subset of {diagloss, codesw}
    std::string aux_diagloss_path, aux_codesw_path;
    ModelHyper hyper;
};

struct BuiltModel {
    std::unique_ptr<Model> model;
    EncodeOptions eopts;
};

void warm_start(const Checkpoint& ckpt, Model& to) {
    auto fresh = model_from_checkpoint(ckpt);
    std::map<std::string, nn::Parameter*> by_name;
    for (nn::Parameter* p : to.parameters()) by_name[p->name] = p;
    long copied = 0;
    for (nn::Parameter* p : fresh->parameters()) {
        auto it = by_name.find(p->name);
        if (it != by_name.end() && it->second->value.same_shape(p->value)) {
            it->second->value = p->value;
            ++copied;
        }
    }
    std::cerr << "warm start: copied " << copied << " tensors\n";
}

BuiltModel build_model_for_train(const TrainCmd& cmd,
                                 const std::vector<TweetRecord>& train_records,
                                 const std::vector<AuxDataset>*,
                                 const std::map<Task, LabelSet>& aux_labels) {
    EncodeOptions eopts;
    eopts.strip_diacritics = !cmd.hyper.keep_diacritics;
    eopts.codesw_level = cmd.codesw_level;

    Task main_task = parse_task(cmd.task);
    bool is_mtl = cmd.arch != "single" && cmd.arch != "encoder";

    std::vector<Task> geo_tasks = is_mtl
                                      ? std::vector<Task>{Task::city, Task::state, Task::country}
                                      : std::vector<Task>{main_task};
    std::map<Task, LabelSet> label_sets = harvest_label_sets(train_records, geo_tasks, eopts);
    for (auto& [t, ls] : aux_labels) label_sets[t] = ls;

    Vocabulary vocab;
    std::optional<Checkpoint> init;
    if (!cmd.init_ckpt.empty()) {
        init = read_checkpoint(cmd.init_ckpt);
        vocab = Vocabulary(init->config.at("vocab").get<std::vector<std::string>>());
    } else {
        vocab = build_vocab_from_records(train_records, cmd.hyper.min_freq, eopts,
                                         cmd.hyper.max_seq_len);
    }

    std::unique_ptr<Model> model;
    if (cmd.arch == "encoder") {
        EncoderConfig cfg;
        cfg.vocab_size = vocab.size();
        cfg.layers = cmd.hyper.layers > 0 ? cmd.hyper.layers : 2;
        cfg.heads = cmd.hyper.heads;
        cfg.model_dim = cmd.hyper.model_dim;
        cfg.ffn_dim = cmd.hyper.ffn_dim;
        cfg.max_seq_len = cmd.hyper.max_seq_len;
        cfg.mask_rate = cmd.hyper.mask_rate;
        cfg.epochs = cmd.hyper.epochs;
        cfg.patience = cmd.hyper.patience;
        if (init) {
            // Architecture follows the pretrained encoder.
            const json& c = init->config.at("config");
            cfg.layers = c.at("layers").get<int>();
            cfg.heads = c.at("heads").get<int>();
            cfg.model_dim = c.at("model_dim").get<int>();
            cfg.ffn_dim = c.at("ffn_dim").get<int>();
            cfg.max_seq_len = c.at("max_seq_len").get<int>();
        }
        model = build_tiny_encoder(cfg, vocab, label_sets, main_task, cmd.common.seed);
    } else {
        BiGruConfig cfg;
        cfg.vocab_size = vocab.size();
        cfg.embed_dim = cmd.hyper.embed_dim;
        cfg.units = cmd.hyper.units;
        cfg.max_seq_len = cmd.hyper.max_seq_len;
        cfg.epochs = cmd.hyper.epochs;
        cfg.patience = cmd.hyper.patience;
        bool hamtl = cmd.arch == "hamtl-city" || cmd.arch == "hamtl-country";
        cfg.layers = cmd.hyper.layers > 0 ? cmd.hyper.layers : (hamtl ? 4 : 3);
        cfg.dropout = cmd.hyper.dropout >= 0 ? cmd.hyper.dropout : (hamtl ? 0.7 : 0.5);
        if (cmd.hyper.batch_size > 0) cfg.batch_size = cmd.hyper.batch_size;
        if (cmd.hyper.lr > 0) cfg.lr = cmd.hyper.lr;
        if (cmd.arch == "single")
            model = build_single_task_bigru(cfg, vocab, label_sets, main_task, cmd.common.seed);
        else if (cmd.arch == "mtl-common")
            model = build_mtl_flat(cfg, false, vocab, label_sets, main_task, cmd.common.seed);
        else if (cmd.arch == "mtl-spec")
            model = build_mtl_flat(cfg, true, vocab, label_sets, main_task, cmd.common.seed);
        else if (hamtl)
            model = build_ha_mtl(cfg,
                                 cmd.arch == "hamtl-city" ? HaMtlOrder::city_first
                                                          : HaMtlOrder::country_first,
                                 vocab, label_sets, main_task, cmd.common.seed);
        else
            throw DataError(ErrCode::invalid_config, "unknown architecture '" + cmd.arch + "'");
    }
    if (init) warm_start(*init, *model);
    return {std::move(model), eopts};
}

void run_train(const TrainCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> train_records = io::read_corpus_jsonl(cmd.train_path);
    std::vector<std::string> inputs{cmd.train_path};
    std::vector<TweetRecord> dev_records;
    if (!cmd.dev_path.empty()) {
        dev_records = io::read_corpus_jsonl(cmd.dev_path);
        inputs.push_back(cmd.dev_path);
    }

    EncodeOptions probe;
    probe.codesw_level = cmd.codesw_level;
    probe.strip_diacritics = !cmd.hyper.keep_diacritics;
    std::map<Task, LabelSet> aux_labels;
    std::map<Task, std::vector<TweetRecord>> aux_records;
    for (const std::string& a : cmd.aux) {
        Task t = parse_task(a);
        std::string path = t == Task::diagloss ? cmd.aux_diagloss_path : cmd.aux_codesw_path;
        if (path.empty())
            throw DataError(ErrCode::invalid_config, "aux task " + a + " needs its data file");
        aux_records[t] = io::read_corpus_jsonl(path);
        aux_labels[t] = harvest_label_sets(aux_records[t], {t}, probe).at(t);
        inputs.push_back(path);
    }

    BuiltModel built = build_model_for_train(cmd, train_records, nullptr, aux_labels);
    Dataset train = encode_records(train_records, *built.model, built.eopts);
    Dataset dev = encode_records(dev_records, *built.model, built.eopts);

    TrainOptions opts;
    opts.epochs = cmd.hyper.epochs;
    opts.patience = cmd.hyper.patience;
    opts.batch_size =
        cmd.hyper.batch_size > 0 ? cmd.hyper.batch_size : built.model->default_batch_size();
    opts.lr = cmd.hyper.lr > 0 ? cmd.hyper.lr : built.model->default_lr();
    opts.seed = cmd.common.seed;

    TrainResult res;
    if (aux_records.empty()) {
        res = finetune(*built.model, train, dev, opts);
    } else {
        std::vector<AuxDataset> aux;
        for (auto& [t, recs] : aux_records)
            aux.push_back({to_string(t), encode_records(recs, *built.model, built.eopts), {t}});
        std::vector<Task> main_tasks;
        for (Task t : built.model->tasks()) {
            if (t == Task::mlm || aux_labels.count(t)) continue;
            main_tasks.push_back(t);
        }
        res = mtl_finetune(*built.model, train, main_tasks, aux, dev, opts);
    }

    json meta = res.to_json();
    meta["seed"] = cmd.common.seed;
    meta["command"] = "train";
    save_checkpoint(cmd.out, *built.model, meta);

    json summary{{"best_epoch", res.best_epoch},
                 {"best_dev", res.best_dev},
                 {"epochs_run", static_cast<long>(res.epochs.size())},
                 {"params", built.model->param_count()}};
    json config{{"seed", cmd.common.seed},   {"arch", cmd.arch},
                {"task", cmd.task},          {"aux", cmd.aux},
                {"epochs", cmd.hyper.epochs}, {"batch_size", opts.batch_size},
                {"lr", opts.lr}};
    write_manifest("train", config, inputs, {cmd.out}, secs_since(t0), summary);
    emit(cmd.common, summary,
         "trained " + cmd.arch + ": best epoch " + std::to_string(res.best_epoch) +
             ", dev accuracy " + std::to_string(res.best_dev));
}

// -------------------------------------------------------------- pretrain-mlm

struct PretrainCmd {
    CommonOpts common;
    std::string train_path, out;
    ModelHyper hyper;
};

void run_pretrain(const PretrainCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> records = io::read_corpus_jsonl(cmd.train_path);
    EncodeOptions eopts;
    eopts.strip_diacritics = !cmd.hyper.keep_diacritics;

    int max_len = cmd.hyper.max_seq_len > 0 ? cmd.hyper.max_seq_len : 128;
    Vocabulary vocab =
        build_vocab_from_records(records, cmd.hyper.min_freq, eopts, max_len);
    EncoderConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.layers = cmd.hyper.layers > 0 ? cmd.hyper.layers : 2;
    cfg.heads = cmd.hyper.heads;
    cfg.model_dim = cmd.hyper.model_dim;
    cfg.ffn_dim = cmd.hyper.ffn_dim;
    cfg.max_seq_len = max_len;
    cfg.mask_rate = cmd.hyper.mask_rate;
    auto enc = build_tiny_encoder(cfg, vocab, {}, Task::mlm, cmd.common.seed);

    std::vector<std::vector<int>> sequences;
    for (const TweetRecord& r : records) {
        std::vector<std::string> toks = model_tokens(r.text, eopts.strip_diacritics, max_len);
        if (toks.empty()) continue;
        std::vector<int> ids;
        for (const std::string& t : toks) ids.push_back(vocab.id_of(t));
        sequences.push_back(std::move(ids));
    }

    TrainOptions opts;
    opts.batch_size = cmd.hyper.batch_size > 0 ? cmd.hyper.batch_size : cfg.pretrain_batch;
    opts.lr = cmd.hyper.lr > 0 ? cmd.hyper.lr : cfg.pretrain_lr;
    opts.seed = cmd.common.seed;
    MlmResult res = pretrain_mlm(*enc, sequences, cmd.hyper.epochs, opts);

    json meta{{"seed", cmd.common.seed},
              {"command", "pretrain-mlm"},
              {"epoch_loss", res.epoch_loss},
              {"final_loss", res.final_loss},
              {"masked_positions", res.masked_positions},
              {"total_positions", res.total_positions}};
    save_checkpoint(cmd.out, *enc, meta);
    json summary{{"final_loss", res.final_loss},
                 {"epochs", static_cast<long>(res.epoch_loss.size())},
                 {"mask_fraction", res.total_positions > 0
                                       ? static_cast<double>(res.masked_positions) /
                                             res.total_positions
                                       : 0.0}};
    json config{{"seed", cmd.common.seed},
                {"layers", cfg.layers},
                {"heads", cfg.heads},
                {"model_dim", cfg.model_dim},
                {"mask_rate", cfg.mask_rate},
                {"epochs", cmd.hyper.epochs}};
    write_manifest("pretrain-mlm", config, {cmd.train_path}, {cmd.out}, secs_since(t0), summary);
    emit(cmd.common, summary,
         "masked-LM pretraining done, final loss " + std::to_string(res.final_loss));
}

// ------------------------------------------------------------------- distill

struct DistillCmd {
    CommonOpts common;
    std::string teacher, student = "hamtl-city", pool_path, out;
    ModelHyper hyper;
};

void run_distill(const DistillCmd& cmd) {
    auto t0 = now();
    auto teacher = load_model(cmd.teacher);
    std::vector<TweetRecord> pool = io::read_corpus_jsonl(cmd.pool_path);

    EncodeOptions eopts;
    eopts.strip_diacritics = !cmd.hyper.keep_diacritics;
    Vocabulary vocab =
        build_vocab_from_records(pool, cmd.hyper.min_freq, eopts, cmd.hyper.max_seq_len);

    std::map<Task, LabelSet> label_sets;
    for (Task t : teacher->tasks()) {
        if (t == Task::mlm) continue;
        label_sets[t] = teacher->label_set(t);
    }
    BiGruConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = cmd.hyper.embed_dim;
    cfg.units = cmd.hyper.units;
    cfg.layers = cmd.hyper.layers > 0 ? cmd.hyper.layers : 4;
    cfg.max_seq_len = cmd.hyper.max_seq_len;
    cfg.dropout = cmd.hyper.dropout >= 0 ? cmd.hyper.dropout : 0.7;
    if (cmd.student != "hamtl-city" && cmd.student != "hamtl-country")
        throw DataError(ErrCode::invalid_config, "student must be hamtl-city or hamtl-country");
    auto student = build_ha_mtl(cfg,
                                cmd.student == "hamtl-city" ? HaMtlOrder::city_first
                                                            : HaMtlOrder::country_first,
                                vocab, label_sets, teacher->main_task(), cmd.common.seed);

    TrainOptions opts;
    opts.epochs = cmd.hyper.epochs; // distillation default is 20, set at the CLI layer
    opts.batch_size = cmd.hyper.batch_size > 0 ? cmd.hyper.batch_size : cfg.batch_size;
    opts.lr = cmd.hyper.lr > 0 ? cmd.hyper.lr : cfg.lr;
    opts.seed = cmd.common.seed;
    DistillResult res = distill(*teacher, *student, pool, eopts, opts);

    json meta{{"seed", cmd.common.seed},         {"command", "distill"},
              {"initial_mse", res.initial_mse},  {"final_mse", res.final_mse},
              {"agreement", res.agreement},      {"param_ratio", res.param_ratio},
              {"throughput_ratio", res.throughput_ratio}};
    save_checkpoint(cmd.out, *student, meta);
    json summary = meta;
    summary.erase("command");
    json config{{"seed", cmd.common.seed},
                {"student", cmd.student},
                {"epochs", cmd.hyper.epochs},
                {"units", cfg.units}};
    write_manifest("distill", config, {cmd.teacher, cmd.pool_path}, {cmd.out}, secs_since(t0),
                   summary);
    emit(cmd.common, summary,
         "distilled: logit MSE " + std::to_string(res.initial_mse) + " -> " +
             std::to_string(res.final_mse) + ", agreement " + std::to_string(res.agreement) +
             ", teacher/student params " + std::to_string(res.param_ratio));
}

// ----------------------------------------------------------------- selftrain

struct SelftrainCmd {
    CommonOpts common;
    std::string pool_path, ckpt, input, out, emit_corpus;
    std::string mode = "specific";
    std::string task = "city";
    int pct = 10;
    double tau = -1.0;
};

void run_selftrain(const SelftrainCmd& cmd) {
    auto t0 = now();
    std::vector<std::string> inputs;
    std::vector<PredictionPoolEntry> pool;
    std::map<std::string, const TweetRecord*> text_by_id;
    std::vector<TweetRecord> corpus;
    Task task = parse_task(cmd.task);

    if (!cmd.pool_path.empty()) {
        std::ifstream pf(cmd.pool_path);
        if (!pf) throw DataError(ErrCode::bad_file, "cannot open '" + cmd.pool_path + "'");
        inputs.push_back(cmd.pool_path);
        std::string line;
        while (std::getline(pf, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            pool.push_back({j.at("id").get<std::string>(), j.at("label").get<std::string>(),
                            j.at("confidence").get<double>(), {}});
        }
    } else if (!cmd.ckpt.empty() && !cmd.input.empty()) {
        auto model = load_model(cmd.ckpt);
        corpus = io::read_corpus_jsonl(cmd.input);
        inputs.push_back(cmd.ckpt);
        inputs.push_back(cmd.input);
        EncodeOptions eopts;
        auto rows = predict(*model, corpus, eopts, false);
        const LabelSet& ls = model->label_set(task);
        for (auto& row : rows) {
            const std::vector<double>& p = row.probs.at(task);
            int argmax = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            PredictionPoolEntry e;
            e.id = row.id;
            e.label = ls.label_of(argmax);
            e.confidence = p[argmax];
            for (int c = 0; c < ls.size(); ++c) e.distribution[ls.label_of(c)] = p[c];
            pool.push_back(std::move(e));
        }
    } else {
        throw UsageError("need --pool or (--ckpt and --input)");
    }
    for (const TweetRecord& r : corpus) text_by_id[r.id] = &r;

    std::vector<PredictionPoolEntry> selected =
        cmd.tau >= 0 ? select_by_threshold(pool, cmd.tau)
                     : self_train_select(pool,
                                         cmd.mode == "agnostic" ? SelectMode::agnostic
                                                                : SelectMode::specific,
                                         cmd.pct);

    std::ofstream of(cmd.out);
    if (!of) throw DataError(ErrCode::bad_file, "cannot write '" + cmd.out + "'");
    for (const PredictionPoolEntry& e : selected) {
        json j;
        j["id"] = e.id;
        j["pseudo_" + cmd.task] = e.label;
        j["confidence"] = e.confidence;
        j["source"] = "self-train";
        of << j.dump() << '\n';
    }
    of.close();

    std::vector<std::string> outputs{cmd.out};
    if (!cmd.emit_corpus.empty()) {
        if (text_by_id.empty())
            throw UsageError("--emit-corpus needs --input for the text");
        std::vector<TweetRecord> merged;
        for (const PredictionPoolEntry& e : selected) {
            auto it = text_by_id.find(e.id);
            if (it == text_by_id.end()) continue;
            TweetRecord r = *it->second;
            LocationHierarchy loc = r.labels.value_or(LocationHierarchy{});
            if (task == Task::city) loc.city = e.label;
            if (task == Task::state) loc.state = e.label;
            if (task == Task::country) loc.country = e.label;
            if (task == Task::diagloss) r.diagloss = e.label;
            if (task == Task::codesw) r.codesw_lang = e.label;
            if (task == Task::city || task == Task::state || task == Task::country)
                r.labels = loc;
            merged.push_back(std::move(r));
        }
        io::write_corpus_jsonl(cmd.emit_corpus, merged);
        outputs.push_back(cmd.emit_corpus);
    }

    json summary{{"pool", static_cast<long>(pool.size())},
                 {"selected", static_cast<long>(selected.size())}};
    json config{{"seed", cmd.common.seed}, {"mode", cmd.mode},
                {"pct", cmd.pct},          {"tau", cmd.tau},
                {"task", cmd.task}};
    write_manifest("selftrain", config, inputs, outputs, secs_since(t0), summary);
    emit(cmd.common, summary,
         "selected " + std::to_string(selected.size()) + " of " + std::to_string(pool.size()) +
             " pool records");
}

// -------------------------------------------------------------------- regime

struct RegimeCmd {
    CommonOpts common;
    std::string which = "weak";
    std::string auto_path, gold_path, dev_path, out;
    std::string arch = "single";
    std::string task = "country";
    ModelHyper hyper;
    int epochs_phase2 = 15;
};

void run_regime_cmd(const RegimeCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> auto_records = io::read_corpus_jsonl(cmd.auto_path);
    std::vector<std::string> inputs{cmd.auto_path};
    std::vector<TweetRecord> gold_records, dev_records;
    if (!cmd.gold_path.empty()) {
        gold_records = io::read_corpus_jsonl(cmd.gold_path);
        inputs.push_back(cmd.gold_path);
    }
    if (!cmd.dev_path.empty()) {
        dev_records = io::read_corpus_jsonl(cmd.dev_path);
        inputs.push_back(cmd.dev_path);
    }

    // Vocabulary and labels from everything the model will ever see.
    std::vector<TweetRecord> all = auto_records;
    all.insert(all.end(), gold_records.begin(), gold_records.end());
    TrainCmd tc;
    tc.common = cmd.common;
    tc.arch = cmd.arch;
    tc.task = cmd.task;
    tc.hyper = cmd.hyper;
    BuiltModel built = build_model_for_train(tc, all, nullptr, {});

    Dataset auto_set = encode_records(auto_records, *built.model, built.eopts);
    Dataset gold_set = encode_records(gold_records, *built.model, built.eopts);
    Dataset dev = encode_records(dev_records, *built.model, built.eopts);

    RegimeSpec spec;
    spec.regime = regime_from_string(cmd.which);
    spec.epochs_phase1 = cmd.hyper.epochs;
    spec.epochs_phase2 = cmd.epochs_phase2;
    TrainOptions opts;
    opts.patience = cmd.hyper.patience;
    opts.batch_size =
        cmd.hyper.batch_size > 0 ? cmd.hyper.batch_size : built.model->default_batch_size();
    opts.lr = cmd.hyper.lr > 0 ? cmd.hyper.lr : built.model->default_lr();
    opts.seed = cmd.common.seed;

    RegimeResult res = run_regime(spec, *built.model, auto_set, gold_set, dev, opts);

    json phases = json::array();
    for (const RegimePhase& p : res.phases) {
        json pj = p.result.to_json();
        pj["phase"] = p.name;
        phases.push_back(pj);
    }
    json meta{{"seed", cmd.common.seed},
              {"command", "regime"},
              {"regime", cmd.which},
              {"phases", phases}};
    save_checkpoint(cmd.out, *built.model, meta);
    json summary{{"regime", cmd.which}, {"phases", phases}};
    json config{{"seed", cmd.common.seed},
                {"regime", cmd.which},
                {"arch", cmd.arch},
                {"task", cmd.task},
                {"epochs_phase1", cmd.hyper.epochs},
                {"epochs_phase2", cmd.epochs_phase2}};
    write_manifest("regime", config, inputs, {cmd.out}, secs_since(t0), summary);
    emit(cmd.common, summary,
         "regime " + cmd.which + " finished with " + std::to_string(res.phases.size()) +
             " phase(s)");
}

// ----------------------------------------------------------------- msa-filter

struct MsaFilterCmd {
    CommonOpts common;
    std::string classifier, input, out, removed_out;
};

void run_msa_filter(const MsaFilterCmd& cmd) {
    auto t0 = now();
    auto model = load_model(cmd.classifier);
    std::vector<TweetRecord> records = io::read_corpus_jsonl(cmd.input);
    EncodeOptions eopts;
    MsaFilterResult res = msa_filter(records, *model, eopts);
    io::write_corpus_jsonl(cmd.out, res.kept);
    std::vector<std::string> outputs{cmd.out};
    if (!cmd.removed_out.empty()) {
        io::write_corpus_jsonl(cmd.removed_out, res.removed);
        outputs.push_back(cmd.removed_out);
    }
    json summary{{"kept", static_cast<long>(res.kept.size())},
                 {"removed", static_cast<long>(res.removed.size())},
                 {"kept_per_class", res.kept_per_class},
                 {"removed_per_class", res.removed_per_class}};
    json config{{"seed", cmd.common.seed}};
    write_manifest("msa-filter", config, {cmd.classifier, cmd.input}, outputs, secs_since(t0),
                   summary);
    emit(cmd.common, summary,
         "kept " + std::to_string(res.kept.size()) + " dialectal records, removed " +
             std::to_string(res.removed.size()) + " MSA");
}

// ---------------------------------------------------------------------- eval

struct EvalCmd {
    CommonOpts common;
    std::string gold_path, ckpt, pred_path, level = "city";
    std::string gazetteer_path, out, confusion_out;
    bool user_level = false;
    double tau = 0.35;
};

void run_eval(const EvalCmd& cmd) {
    auto t0 = now();
    std::vector<TweetRecord> gold_records = io::read_corpus_jsonl(cmd.gold_path);
    std::vector<std::string> inputs{cmd.gold_path};
    Task task = parse_task(cmd.level);
    EncodeOptions eopts;

    struct Pred {
        std::string label;
        double confidence;
    };
    std::map<std::string, Pred> preds;
    std::vector<std::string> label_pool;

    if (!cmd.ckpt.empty()) {
        auto model = load_model(cmd.ckpt);
        inputs.push_back(cmd.ckpt);
        const LabelSet& ls = model->label_set(task);
        label_pool = ls.labels();
        auto rows = predict(*model, gold_records, eopts, false);
        for (auto& row : rows) {
            const std::vector<double>& p = row.probs.at(task);
            int argmax = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            preds[row.id] = {ls.label_of(argmax), p[argmax]};
        }
    } else if (!cmd.pred_path.empty()) {
        std::ifstream pf(cmd.pred_path);
        if (!pf) throw DataError(ErrCode::bad_file, "cannot open '" + cmd.pred_path + "'");
        inputs.push_back(cmd.pred_path);
        std::string line;
        while (std::getline(pf, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            preds[j.at("id").get<std::string>()] = {j.at("label").get<std::string>(),
                                                    j.value("confidence", 1.0)};
        }
    } else {
        throw UsageError("need --ckpt or --pred");
    }

    std::vector<std::string> gold, pred;
    std::map<std::string, std::vector<TweetPrediction>> by_user;
    std::map<std::string, std::map<std::string, long>> user_gold_votes;
    for (const TweetRecord& r : gold_records) {
        auto it = preds.find(r.id);
        if (it == preds.end()) continue;
        std::string g = task_label_of(r, task, eopts);
        if (g.empty())
            throw DataError(ErrCode::unknown_label,
                            "record " + r.id + " has no gold " + cmd.level + " label");
        gold.push_back(g);
        pred.push_back(it->second.label);
        by_user[r.user_id].push_back({it->second.label, it->second.confidence});
        user_gold_votes[r.user_id][g]++;
        label_pool.push_back(g);
        label_pool.push_back(it->second.label);
    }
    if (gold.empty()) throw DataError(ErrCode::empty_input, "no overlapping records to evaluate");

    if (cmd.user_level) {
        AggregationSpec aspec;
        aspec.tau = cmd.tau;
        std::vector<std::string> ugold, upred;
        for (auto& [user, tweets] : by_user) {
            upred.push_back(user_level_aggregate(tweets, aspec));
            const auto& votes = user_gold_votes.at(user);
            std::string best;
            long best_n = -1;
            for (auto& [l, n] : votes) {
                if (n > best_n) {
                    best = l;
                    best_n = n;
                }
            }
            ugold.push_back(best);
        }
        gold = std::move(ugold);
        pred = std::move(upred);
    }

    LabelSet pool_ls(label_pool);
    ClassificationReport rep = classification_metrics(gold, pred, pool_ls.labels());

    MetricsReport report;
    report.task = cmd.level + (cmd.user_level ? "/user" : "");
    report.accuracy = rep.accuracy;
    report.macro_f1 = rep.macro_f1;
    report.n = static_cast<long>(gold.size());
    report.seed = cmd.common.seed;

    if (!cmd.gazetteer_path.empty()) {
        if (task != Task::city)
            throw DataError(ErrCode::invalid_config, "--geo applies to --level city");
        Gazetteer gaz = io::read_gazetteer_tsv(cmd.gazetteer_path);
        inputs.push_back(cmd.gazetteer_path);
        GeoReport geo = geo_metrics(pred, gold, gaz);
        report.acc_at_80_5 = geo.acc_at_80_5;
        report.acc_at_161 = geo.acc_at_161;
        report.mean_km = geo.mean_km;
        report.median_km = geo.median_km;
    }

    std::string report_json = report.to_json();
    std::vector<std::string> outputs;
    if (!cmd.out.empty()) {
        std::ofstream of(cmd.out);
        of << report_json << '\n';
        outputs.push_back(cmd.out);
    }
    if (!cmd.confusion_out.empty()) {
        std::ofstream cf(cmd.confusion_out);
        cf << rep.confusion.to_csv();
        outputs.push_back(cmd.confusion_out);
    }
    json config{{"seed", cmd.common.seed},
                {"level", cmd.level},
                {"user_level", cmd.user_level},
                {"tau", cmd.tau}};
    write_manifest("eval", config, inputs, outputs, secs_since(t0), json::parse(report_json));
    if (cmd.common.json_out)
        std::cout << report_json << std::endl;
    else
        std::cout << "task " << report.task << ": accuracy " << report.accuracy << ", macro-F1 "
                  << report.macro_f1 << " over " << report.n << " items" << std::endl;
}

// --------------------------------------------------------------------- kappa

struct KappaCmd {
    CommonOpts common;
    std::string a_path, b_path;
};

void run_kappa(const KappaCmd& cmd) {
    std::vector<std::string> a = io::read_label_lines(cmd.a_path);
    std::vector<std::string> b = io::read_label_lines(cmd.b_path);
    double k = cohen_kappa(a, b);
    json payload{{"kappa", k}, {"n", static_cast<long>(a.size())}};
    emit(cmd.common, payload, "Cohen's kappa = " + std::to_string(k));
}

// ----------------------------------------------------------------- attn-dump

struct AttnDumpCmd {
    CommonOpts common;
    std::string ckpt, input, out;
    bool keep_diacritics = false;
};

void run_attn_dump(const AttnDumpCmd& cmd) {
    auto t0 = now();
    auto model = load_model(cmd.ckpt);
    std::vector<TweetRecord> records = io::read_corpus_jsonl(cmd.input);
    EncodeOptions eopts;
    eopts.strip_diacritics = !cmd.keep_diacritics;
    // Batch of one so every site (including per-head encoder rows) aligns.
    auto rows = predict(*model, records, eopts, true, 1);

    std::map<std::string, const TweetRecord*> by_id;
    for (const TweetRecord& r : records) by_id[r.id] = &r;
    std::ofstream of(cmd.out);
    if (!of) throw DataError(ErrCode::bad_file, "cannot write '" + cmd.out + "'");
    for (const PredictionRow& row : rows) {
        std::vector<std::string> toks = model_tokens(by_id.at(row.id)->text,
                                                     eopts.strip_diacritics,
                                                     model->max_seq_len());
        for (auto& [site, weights] : row.attention) {
            json j;
            j["id"] = row.id;
            j["site"] = site;
            j["tokens"] = toks;
            j["weights"] = weights;
            of << j.dump() << '\n';
        }
    }
    of.close();
    json summary{{"records", static_cast<long>(rows.size())}};
    json config{{"seed", cmd.common.seed}};
    write_manifest("attn-dump", config, {cmd.ckpt, cmd.input}, {cmd.out}, secs_since(t0),
                   summary);
    emit(cmd.common, summary,
         "dumped attention for " + std::to_string(rows.size()) + " records");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Micro-dialect identification pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value config file; flags override it");
    app.config_formatter(std::make_shared<FlatConfig>(&g_active_subcommand));

    PreprocessCmd pre;
    CLI::App* pre_sub = app.add_subcommand("preprocess", "Normalize and filter a corpus");
    add_common(pre_sub, pre.common);
    pre_sub->add_option("input", pre.input, "Corpus JSONL")->required();
    pre_sub->add_option("--out", pre.out, "Output corpus JSONL")->required();
    pre_sub->add_option("--min-arabic-words", pre.min_arabic_words)->capture_default_str();
    pre_sub->add_option("--stats", pre.stats_path, "Write corpus stats JSON here");
    pre_sub->add_option("--users", pre.users_path, "user_id<TAB>location table to propagate");
    pre_sub->add_option("--gazetteer", pre.gazetteer_path, "Gazetteer TSV");
    pre_sub->add_option("--aliases", pre.aliases_path, "Alias TSV");
    pre_sub->add_flag("--strict-users", pre.strict_users,
                      "Fail on unresolved locations or missing users");
    pre_sub->callback([&] { run_preprocess(pre); });

    LabelCmd label;
    CLI::App* label_sub = app.add_subcommand("label", "Proxy-label a corpus");
    add_common(label_sub, label.common);
    label_sub->add_option("task", label.which, "diagloss or codesw")
        ->required()
        ->check(CLI::IsMember({"diagloss", "codesw"}));
    label_sub->add_option("--input", label.input)->required();
    label_sub->add_option("--out", label.out)->required();
    label_sub->add_option("--cap", label.cap, "Per-class cap (diagloss)")->capture_default_str();
    label_sub->callback([&] { run_label(label); });

    SplitCmd split;
    CLI::App* split_sub = app.add_subcommand("split", "Create data splits");
    add_common(split_sub, split.common);
    split_sub->add_option("mode", split.mode, "random or disjoint")
        ->required()
        ->check(CLI::IsMember({"random", "disjoint"}));
    split_sub->add_option("--input", split.input)->required();
    split_sub->add_option("--out", split.out, "Manifest JSON path")->required();
    split_sub->add_option("--setting", split.setting)
        ->check(CLI::IsMember({"narrow", "medium", "wide"}))
        ->capture_default_str();
    split_sub->add_option("--run", split.run)->check(CLI::IsMember({"A", "B", "C"}))
        ->capture_default_str();
    split_sub->add_option("--ratios", split.ratios, "train dev test fractions")
        ->expected(3);
    split_sub->add_option("--cap", split.cap, "Per-class TRAIN cap")->capture_default_str();
    split_sub->add_option("--cap-level", split.cap_level)
        ->check(CLI::IsMember({"city", "state", "country"}))
        ->capture_default_str();
    split_sub->add_option("--emit-prefix", split.emit_prefix,
                          "Also write <prefix>.{train,dev,test}.jsonl");
    split_sub->callback([&] { run_split(split); });

    TrainCmd train;
    CLI::App* train_sub = app.add_subcommand("train", "Train a classifier");
    add_common(train_sub, train.common);
    train_sub->add_option("--arch", train.arch)
        ->check(CLI::IsMember(
            {"single", "mtl-common", "mtl-spec", "hamtl-city", "hamtl-country", "encoder"}))
        ->capture_default_str();
    train_sub->add_option("--train", train.train_path)->required();
    train_sub->add_option("--dev", train.dev_path);
    train_sub->add_option("--out", train.out)->required();
    train_sub->add_option("--task", train.task, "Main task")
        ->check(CLI::IsMember({"city", "state", "country", "diagloss", "codesw"}))
        ->capture_default_str();
    train_sub->add_option("--aux", train.aux, "Auxiliary tasks (e.g. diagloss,codesw)")
        ->delimiter(',')
        ->check(CLI::IsMember({"diagloss", "codesw"}));
    train_sub->add_option("--aux-diagloss", train.aux_diagloss_path, "DiaGloss corpus");
    train_sub->add_option("--aux-codesw", train.aux_codesw_path, "CodSw corpus");
    train_sub->add_option("--codesw-level", train.codesw_level)
        ->check(CLI::IsMember({"lang", "city", "country"}))
        ->capture_default_str();
    train_sub->add_option("--init", train.init_ckpt, "Warm-start checkpoint (e.g. MLM encoder)");
    add_hyper(train_sub, train.hyper);
    train_sub->callback([&] { run_train(train); });

    PretrainCmd pretrain;
    CLI::App* pt_sub = app.add_subcommand("pretrain-mlm", "Masked-LM pretraining");
    add_common(pt_sub, pretrain.common);
    pt_sub->add_option("--train", pretrain.train_path)->required();
    pt_sub->add_option("--out", pretrain.out)->required();
    pretrain.hyper.max_seq_len = 128;
    pretrain.hyper.epochs = 14;
    add_hyper(pt_sub, pretrain.hyper);
    pt_sub->callback([&] { run_pretrain(pretrain); });

    DistillCmd distill_cmd;
    CLI::App* di_sub = app.add_subcommand("distill", "Distill a teacher into an HA-MTL student");
    add_common(di_sub, distill_cmd.common);
    di_sub->add_option("--teacher", distill_cmd.teacher)->required();
    di_sub->add_option("--student", distill_cmd.student)
        ->check(CLI::IsMember({"hamtl-city", "hamtl-country"}))
        ->capture_default_str();
    di_sub->add_option("--pool", distill_cmd.pool_path)->required();
    di_sub->add_option("--out", distill_cmd.out)->required();
    distill_cmd.hyper.epochs = 20; // distillation budget
    add_hyper(di_sub, distill_cmd.hyper);
    di_sub->callback([&] { run_distill(distill_cmd); });

    SelftrainCmd selftrain;
    CLI::App* st_sub = app.add_subcommand("selftrain", "Select confident pseudo-labels");
    add_common(st_sub, selftrain.common);
    st_sub->add_option("--pool", selftrain.pool_path, "Prediction pool JSONL");
    st_sub->add_option("--ckpt", selftrain.ckpt, "Generate the pool with this model");
    st_sub->add_option("--input", selftrain.input, "Unlabeled corpus for --ckpt");
    st_sub->add_option("--out", selftrain.out)->required();
    st_sub->add_option("--mode", selftrain.mode)
        ->check(CLI::IsMember({"agnostic", "specific"}))
        ->capture_default_str();
    st_sub->add_option("--pct", selftrain.pct)->check(CLI::IsMember({5, 10, 25}))
        ->capture_default_str();
    st_sub->add_option("--tau", selftrain.tau,
                       "Threshold variant: select confidence >= tau instead of top-pct");
    st_sub->add_option("--task", selftrain.task)->capture_default_str();
    st_sub->add_option("--emit-corpus", selftrain.emit_corpus,
                       "Write selected records as a labeled corpus");
    st_sub->callback([&] { run_selftrain(selftrain); });

    RegimeCmd regime;
    CLI::App* re_sub = app.add_subcommand("regime", "Noisy-label training regimes");
    add_common(re_sub, regime.common);
    re_sub->add_option("mode", regime.which, "weak, weak+gold or weak-then-gold")
        ->required()
        ->check(CLI::IsMember({"weak", "weak+gold", "weak-then-gold"}));
    re_sub->add_option("--auto", regime.auto_path, "Auto-tagged corpus")->required();
    re_sub->add_option("--gold", regime.gold_path, "Gold corpus");
    re_sub->add_option("--dev", regime.dev_path);
    re_sub->add_option("--out", regime.out)->required();
    re_sub->add_option("--arch", regime.arch)
        ->check(CLI::IsMember(
            {"single", "mtl-common", "mtl-spec", "hamtl-city", "hamtl-country", "encoder"}))
        ->capture_default_str();
    re_sub->add_option("--task", regime.task)->capture_default_str();
    re_sub->add_option("--epochs-phase2", regime.epochs_phase2)->capture_default_str();
    add_hyper(re_sub, regime.hyper);
    re_sub->callback([&] { run_regime_cmd(regime); });

    MsaFilterCmd msa;
    CLI::App* msa_sub = app.add_subcommand("msa-filter", "Drop records predicted MSA");
    add_common(msa_sub, msa.common);
    msa_sub->add_option("--classifier", msa.classifier, "Binary MSA/DA checkpoint")->required();
    msa_sub->add_option("--input", msa.input)->required();
    msa_sub->add_option("--out", msa.out)->required();
    msa_sub->add_option("--removed", msa.removed_out, "Also write removed records here");
    msa_sub->callback([&] { run_msa_filter(msa); });

    EvalCmd eval;
    CLI::App* ev_sub = app.add_subcommand("eval", "Classification and geolocation metrics");
    add_common(ev_sub, eval.common);
    ev_sub->add_option("--gold", eval.gold_path, "Gold corpus JSONL")->required();
    ev_sub->add_option("--ckpt", eval.ckpt);
    ev_sub->add_option("--pred", eval.pred_path, "Predictions JSONL {id,label,confidence}");
    ev_sub->add_option("--level", eval.level)
        ->check(CLI::IsMember({"city", "state", "country", "diagloss", "codesw"}))
        ->capture_default_str();
    ev_sub->add_flag("--user-level", eval.user_level, "Aggregate tweets per user first");
    ev_sub->add_option("--tau", eval.tau, "Confidence threshold for aggregation")
        ->capture_default_str();
    ev_sub->add_option("--geo", eval.gazetteer_path, "Gazetteer TSV enables distance metrics");
    ev_sub->add_option("--out", eval.out, "Write the MetricsReport JSON here");
    ev_sub->add_option("--confusion", eval.confusion_out, "Write the confusion matrix CSV here");
    ev_sub->callback([&] { run_eval(eval); });

    KappaCmd kappa;
    CLI::App* ka_sub = app.add_subcommand("kappa", "Cohen's kappa between two label files");
    add_common(ka_sub, kappa.common);
    ka_sub->add_option("a", kappa.a_path)->required();
    ka_sub->add_option("b", kappa.b_path)->required();
    ka_sub->callback([&] { run_kappa(kappa); });

    AttnDumpCmd attn;
    CLI::App* at_sub = app.add_subcommand("attn-dump", "Export per-token attention weights");
    add_common(at_sub, attn.common);
    at_sub->add_option("--ckpt", attn.ckpt)->required();
    at_sub->add_option("--input", attn.input)->required();
    at_sub->add_option("--out", attn.out)->required();
    at_sub->add_flag("--keep-diacritics", attn.keep_diacritics);
    at_sub->callback([&] { run_attn_dump(attn); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << std::endl;
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}
