#include "mdi/models.hpp"

#include <algorithm>

namespace mdi {

using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using nn::Var;

std::string to_string(Task t) {
    switch (t) {
        case Task::city: return "city";
        case Task::state: return "state";
        case Task::country: return "country";
        case Task::diagloss: return "diagloss";
        case Task::codesw: return "codesw";
        default: return "mlm";
    }
}

Task task_from_string(const std::string& s) {
    if (s == "city") return Task::city;
    if (s == "state") return Task::state;
    if (s == "country") return Task::country;
    if (s == "diagloss") return Task::diagloss;
    if (s == "codesw") return Task::codesw;
    if (s == "mlm") return Task::mlm;
    throw DataError(ErrCode::invalid_config, "unknown task '" + s + "'");
}

long Model::param_count() {
    long n = 0;
    for (Parameter* p : parameters()) n += p->value.numel();
    return n;
}

bool Model::has_task(Task t) const {
    const auto& ts = tasks();
    return std::find(ts.begin(), ts.end(), t) != ts.end();
}

void BiGruConfig::validate() const {
    if (vocab_size < 3) throw DataError(ErrCode::invalid_config, "vocab_size too small");
    if (embed_dim < 1 || layers < 1 || max_seq_len < 1 || batch_size < 1)
        throw DataError(ErrCode::invalid_config, "non-positive BiGRU dimension");
    if (units < 2 || units % 2 != 0)
        throw DataError(ErrCode::invalid_config, "units must be even (split across directions)");
    if (dropout < 0.0 || dropout >= 1.0)
        throw DataError(ErrCode::invalid_config, "dropout must be in [0,1)");
    if (epochs < 1 || patience < 0)
        throw DataError(ErrCode::invalid_config, "bad epochs/patience");
}

std::string to_string(BiGruArch a) {
    switch (a) {
        case BiGruArch::single_task: return "single";
        case BiGruArch::mtl_common_attn: return "mtl_common";
        case BiGruArch::mtl_spec_attn: return "mtl_spec";
        default: return "hamtl";
    }
}

std::string to_string(HaMtlOrder o) {
    return o == HaMtlOrder::city_first ? "city_first" : "country_first";
}

BiGruModel::BiGruModel(BiGruArch arch, const BiGruConfig& config, Vocabulary vocab,
                       std::map<Task, LabelSet> label_sets, Task main_task, HaMtlOrder order,
                       std::uint64_t init_seed)
    : arch_(arch),
      config_(config),
      vocab_(std::move(vocab)),
      label_sets_(std::move(label_sets)),
      main_task_(main_task),
      order_(order),
      init_seed_(init_seed) {
    config_.vocab_size = vocab_.size();
    config_.validate();
    if (!label_sets_.count(main_task_))
        throw DataError(ErrCode::invalid_config, "main task has no label set");
    for (auto& [t, ls] : label_sets_) {
        if (ls.size() < 2)
            throw DataError(ErrCode::invalid_config,
                            "task " + to_string(t) + " needs at least 2 labels");
    }

    // Main task first, remaining tasks in enum order, for stable head layout.
    task_list_.push_back(main_task_);
    for (auto& [t, ls] : label_sets_) {
        if (t != main_task_) task_list_.push_back(t);
    }
    if (arch_ == BiGruArch::mtl_common_attn || arch_ == BiGruArch::mtl_spec_attn ||
        arch_ == BiGruArch::hamtl) {
        for (Task t : {Task::city, Task::state, Task::country}) {
            if (!label_sets_.count(t))
                throw DataError(ErrCode::invalid_config,
                                "MTL architectures supervise city, state and country; missing " +
                                    to_string(t));
        }
    }
    if (arch_ == BiGruArch::hamtl && config_.layers != 4)
        throw DataError(ErrCode::invalid_config, "HA-MTL uses 4 BiGRU layers");

    RngStream rng(init_seed_, "bigru_init");
    embedding_ = Parameter::normal("embedding", config_.vocab_size, config_.embed_dim, rng);

    int shared = config_.layers;
    if (arch_ == BiGruArch::mtl_spec_attn) shared = config_.layers - 1;
    int in_dim = config_.embed_dim;
    for (int l = 1; l <= shared; ++l) {
        shared_layers_.push_back(
            nn::BiGruLayer::init("layer" + std::to_string(l), in_dim, config_.units, rng));
        in_dim = config_.units;
    }

    auto make_head = [&](Task t) {
        Head h;
        h.W = Parameter::normal("head." + to_string(t) + ".W", config_.units,
                                label_sets_.at(t).size(), rng);
        h.b = Parameter::zeros("head." + to_string(t) + ".b", 1, label_sets_.at(t).size());
        heads_[t] = std::move(h);
    };

    switch (arch_) {
        case BiGruArch::single_task:
        case BiGruArch::mtl_common_attn: {
            std::string site = "layer" + std::to_string(config_.layers);
            queries_[site] =
                Parameter::normal("attn." + site + ".query", 1, config_.units, rng);
            for (Task t : task_list_) make_head(t);
            break;
        }
        case BiGruArch::mtl_spec_attn: {
            for (Task t : task_list_) {
                TaskBranch br;
                br.layer = nn::BiGruLayer::init("branch." + to_string(t) + ".layer" +
                                                    std::to_string(config_.layers),
                                                config_.units, config_.units, rng);
                br.query = Parameter::normal("branch." + to_string(t) + ".query", 1,
                                             config_.units, rng);
                branches_[t] = std::move(br);
                make_head(t);
            }
            break;
        }
        case BiGruArch::hamtl: {
            for (auto& [layer, t] : hamtl_head_map()) {
                std::string site = "layer" + std::to_string(layer) + "." + to_string(t);
                queries_[site] =
                    Parameter::normal("attn." + site + ".query", 1, config_.units, rng);
                make_head(t);
            }
            for (Task t : task_list_) {
                if (is_geo(t)) continue;
                std::string site = "layer" + std::to_string(config_.layers) + "." + to_string(t);
                queries_[site] =
                    Parameter::normal("attn." + site + ".query", 1, config_.units, rng);
                make_head(t);
            }
            break;
        }
    }
}

std::string BiGruModel::arch() const { return to_string(arch_); }

const LabelSet& BiGruModel::label_set(Task t) const {
    auto it = label_sets_.find(t);
    if (it == label_sets_.end())
        throw DataError(ErrCode::invalid_config, "model has no task " + to_string(t));
    return it->second;
}

std::map<int, Task> BiGruModel::hamtl_head_map() const {
    if (order_ == HaMtlOrder::city_first)
        return {{2, Task::city}, {3, Task::state}, {4, Task::country}};
    return {{2, Task::country}, {3, Task::state}, {4, Task::city}};
}

int BiGruModel::attention_site_count() const { return static_cast<int>(queries_.size()) +
                                                      static_cast<int>(branches_.size()); }

std::vector<Parameter*> BiGruModel::parameters() {
    std::vector<Parameter*> ps{&embedding_};
    for (nn::BiGruLayer& l : shared_layers_)
        for (Parameter* p : l.parameters()) ps.push_back(p);
    for (auto& [t, br] : branches_) {
        for (Parameter* p : br.layer.parameters()) ps.push_back(p);
        ps.push_back(&br.query);
    }
    for (auto& [site, q] : queries_) ps.push_back(&q);
    for (auto& [t, h] : heads_) {
        ps.push_back(&h.W);
        ps.push_back(&h.b);
    }
    return ps;
}

nlohmann::json BiGruModel::config_json() const {
    nlohmann::json j;
    j["arch"] = to_string(arch_);
    if (arch_ == BiGruArch::hamtl) j["order"] = to_string(order_);
    j["main_task"] = to_string(main_task_);
    j["init_seed"] = init_seed_;
    j["numeric_mode"] = "f64";
    nlohmann::json cfg;
    cfg["vocab_size"] = config_.vocab_size;
    cfg["embed_dim"] = config_.embed_dim;
    cfg["layers"] = config_.layers;
    cfg["units"] = config_.units;
    cfg["max_seq_len"] = config_.max_seq_len;
    cfg["batch_size"] = config_.batch_size;
    cfg["dropout"] = config_.dropout;
    cfg["lr"] = config_.lr;
    cfg["epochs"] = config_.epochs;
    cfg["patience"] = config_.patience;
    j["config"] = cfg;
    j["vocab"] = vocab_.tokens();
    nlohmann::json labels;
    for (auto& [t, ls] : label_sets_) labels[to_string(t)] = ls.labels();
    j["labels"] = labels;
    return j;
}

std::vector<Var> BiGruModel::embed(Graph& g, const std::vector<const Example*>& batch) {
    std::size_t len = batch[0]->tokens.size();
    std::vector<Var> seq;
    seq.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<int> ids;
        ids.reserve(batch.size());
        for (const Example* ex : batch) ids.push_back(ex->tokens[t]);
        seq.push_back(g.embedding_rows(g.param(embedding_), ids));
    }
    return seq;
}

std::vector<Var> BiGruModel::run_layer(Graph& g, nn::BiGruLayer& layer,
                                       const std::vector<Var>& seq, RngStream* dropout_rng) {
    std::vector<Var> out = layer.run(g, seq);
    if (g.training() && dropout_rng && config_.dropout > 0.0) {
        for (Var& v : out) v = g.dropout(v, config_.dropout, *dropout_rng);
    }
    return out;
}

Var BiGruModel::head_logits(Graph& g, Head& head, Var ctx) {
    return g.add_row_bias(g.matmul(ctx, g.param(head.W)), g.param(head.b));
}

std::map<Task, Var> BiGruModel::forward_logits(Graph& g,
                                               const std::vector<const Example*>& batch,
                                               RngStream* dropout_rng, AttnCapture* attn) {
    if (batch.empty()) throw DataError(ErrCode::empty_input, "empty batch");
    std::size_t len = batch[0]->tokens.size();
    if (len == 0) throw DataError(ErrCode::empty_input, "empty sequence in batch");
    for (const Example* ex : batch) {
        if (ex->tokens.size() != len)
            throw DataError(ErrCode::shape_mismatch, "batch not length-bucketed");
    }

    std::map<Task, Var> logits;
    std::vector<Var> seq = embed(g, batch);

    auto pool = [&](const std::vector<Var>& states, Parameter& query,
                    const std::string& site) -> Var {
        nn::AttentionOut out = nn::attention_pool(g, states, query);
        if (attn) attn->sites.push_back({site, out.weights});
        return out.context;
    };

    switch (arch_) {
        case BiGruArch::single_task:
        case BiGruArch::mtl_common_attn: {
            for (nn::BiGruLayer& l : shared_layers_) seq = run_layer(g, l, seq, dropout_rng);
            std::string site = "layer" + std::to_string(config_.layers);
            Var ctx = pool(seq, queries_.at(site), site);
            for (Task t : task_list_) logits[t] = head_logits(g, heads_.at(t), ctx);
            break;
        }
        case BiGruArch::mtl_spec_attn: {
            for (nn::BiGruLayer& l : shared_layers_) seq = run_layer(g, l, seq, dropout_rng);
            for (Task t : task_list_) {
                TaskBranch& br = branches_.at(t);
                std::vector<Var> bseq = run_layer(g, br.layer, seq, dropout_rng);
                std::string site =
                    "layer" + std::to_string(config_.layers) + "." + to_string(t);
                Var ctx = pool(bseq, br.query, site);
                logits[t] = head_logits(g, heads_.at(t), ctx);
            }
            break;
        }
        case BiGruArch::hamtl: {
            std::map<int, Task> head_map = hamtl_head_map();
            for (int l = 1; l <= config_.layers; ++l) {
                seq = run_layer(g, shared_layers_[l - 1], seq, dropout_rng);
                auto it = head_map.find(l);
                if (it != head_map.end()) {
                    std::string site = "layer" + std::to_string(l) + "." + to_string(it->second);
                    Var ctx = pool(seq, queries_.at(site), site);
                    logits[it->second] = head_logits(g, heads_.at(it->second), ctx);
                }
            }
            for (Task t : task_list_) {
                if (is_geo(t)) continue;
                std::string site = "layer" + std::to_string(config_.layers) + "." + to_string(t);
                Var ctx = pool(seq, queries_.at(site), site);
                logits[t] = head_logits(g, heads_.at(t), ctx);
            }
            break;
        }
    }
    return logits;
}

std::unique_ptr<BiGruModel> build_single_task_bigru(const BiGruConfig& config, Vocabulary vocab,
                                                    std::map<Task, LabelSet> label_sets,
                                                    Task main_task, std::uint64_t seed) {
    return std::make_unique<BiGruModel>(BiGruArch::single_task, config, std::move(vocab),
                                        std::move(label_sets), main_task,
                                        HaMtlOrder::city_first, seed);
}

std::unique_ptr<BiGruModel> build_mtl_flat(const BiGruConfig& config, bool task_specific_attention,
                                           Vocabulary vocab, std::map<Task, LabelSet> label_sets,
                                           Task main_task, std::uint64_t seed) {
    return std::make_unique<BiGruModel>(task_specific_attention ? BiGruArch::mtl_spec_attn
                                                                : BiGruArch::mtl_common_attn,
                                        config, std::move(vocab), std::move(label_sets),
                                        main_task, HaMtlOrder::city_first, seed);
}

std::unique_ptr<BiGruModel> build_ha_mtl(const BiGruConfig& config, HaMtlOrder order,
                                         Vocabulary vocab, std::map<Task, LabelSet> label_sets,
                                         Task main_task, std::uint64_t seed) {
    return std::make_unique<BiGruModel>(BiGruArch::hamtl, config, std::move(vocab),
                                        std::move(label_sets), main_task, order, seed);
}

std::string task_label_of(const TweetRecord& r, Task t, const EncodeOptions& opts) {
    switch (t) {
        case Task::city: return r.labels ? r.labels->city : "";
        case Task::state: return r.labels ? r.labels->state : "";
        case Task::country: return r.labels ? r.labels->country : "";
        case Task::diagloss: return r.diagloss.value_or("");
        case Task::codesw:
            if (opts.codesw_level == "lang") return r.codesw_lang.value_or("");
            if (opts.codesw_level == "city") return r.labels ? r.labels->city : "";
            return r.labels ? r.labels->country : "";
        default: return "";
    }
}

Dataset encode_records(const std::vector<TweetRecord>& records, const Model& model,
                       const EncodeOptions& opts) {
    Dataset ds;
    const Vocabulary& vocab = model.vocab();
    for (const TweetRecord& r : records) {
        std::vector<std::string> toks =
            model_tokens(r.text, opts.strip_diacritics, model.max_seq_len());
        if (toks.empty()) continue;
        Example ex;
        ex.id = r.id;
        ex.user_id = r.user_id;
        ex.tokens.reserve(toks.size());
        for (const std::string& t : toks) ex.tokens.push_back(vocab.id_of(t));
        bool complete = true;
        for (Task t : model.tasks()) {
            if (t == Task::mlm) continue;
            std::string label = task_label_of(r, t, opts);
            if (label.empty()) {
                complete = false;
                continue;
            }
            if (model.label_set(t).contains(label))
                ex.labels[t] = model.label_set(t).index_of(label);
            else if (opts.require_labels)
                throw DataError(ErrCode::unknown_label,
                                "record " + r.id + ": label '" + label + "' outside model head");
        }
        if (opts.require_labels && !complete)
            throw DataError(ErrCode::unknown_label, "record " + r.id + " is missing task labels");
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

std::map<Task, LabelSet> harvest_label_sets(const std::vector<TweetRecord>& records,
                                            const std::vector<Task>& tasks,
                                            const EncodeOptions& opts) {
    std::map<Task, std::vector<std::string>> values;
    for (const TweetRecord& r : records) {
        for (Task t : tasks) {
            std::string l = task_label_of(r, t, opts);
            if (!l.empty()) values[t].push_back(l);
        }
    }
    std::map<Task, LabelSet> out;
    for (Task t : tasks) {
        auto it = values.find(t);
        if (it == values.end() || it->second.empty())
            throw DataError(ErrCode::empty_input, "no labels found for task " + to_string(t));
        out[t] = LabelSet::from_values(it->second);
    }
    return out;
}

Vocabulary build_vocab_from_records(const std::vector<TweetRecord>& records, int min_freq,
                                    const EncodeOptions& opts, int max_seq_len) {
    std::vector<std::vector<std::string>> lists;
    lists.reserve(records.size());
    for (const TweetRecord& r : records)
        lists.push_back(model_tokens(r.text, opts.strip_diacritics, max_seq_len));
    return Vocabulary::build(lists, min_freq);
}

} // namespace mdi
