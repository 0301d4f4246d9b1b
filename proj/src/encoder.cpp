#include "mdi/encoder.hpp"

#include <algorithm>
#include <numeric>

namespace mdi {

using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
    if (vocab_size < 4) throw DataError(ErrCode::invalid_config, "vocab_size too small");
    if (layers < 1 || heads < 1 || model_dim < 1 || max_seq_len < 1)
        throw DataError(ErrCode::invalid_config, "non-positive encoder dimension");
    if (model_dim % heads != 0)
        throw DataError(ErrCode::invalid_config, "model_dim must be divisible by heads");
    if (mask_rate <= 0.0 || mask_rate >= 1.0)
        throw DataError(ErrCode::invalid_config, "mask_rate must be in (0,1)");
    if (mask_frac < 0 || random_frac < 0 || mask_frac + random_frac > 1.0)
        throw DataError(ErrCode::invalid_config, "bad corruption fractions");
}

MaskPlan make_mask_plan(const std::vector<int>& tokens, const EncoderConfig& cfg,
                        const Vocabulary& vocab, RngStream& rng) {
    MaskPlan plan;
    plan.input_ids = tokens;
    int len = static_cast<int>(tokens.size());
    int k = static_cast<int>(cfg.mask_rate * len); // floor
    if (k <= 0) return plan;

    // Partial Fisher-Yates draw of k distinct positions.
    std::vector<int> idx(len);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(len - i)));
        std::swap(idx[i], idx[j]);
    }
    plan.positions.assign(idx.begin(), idx.begin() + k);
    std::sort(plan.positions.begin(), plan.positions.end());

    int regular = vocab.size() - vocab.first_regular_id();
    for (int pos : plan.positions) {
        plan.targets.push_back(tokens[pos]);
        double u = rng.next_double();
        if (u < cfg.mask_frac) {
            plan.input_ids[pos] = Vocabulary::kMask;
        } else if (u < cfg.mask_frac + cfg.random_frac && regular > 0) {
            plan.input_ids[pos] =
                vocab.first_regular_id() +
                static_cast<int>(rng.next_below(static_cast<std::uint64_t>(regular)));
        } // else unchanged
    }
    return plan;
}

EncoderModel::EncoderModel(const EncoderConfig& config, Vocabulary vocab,
                           std::map<Task, LabelSet> label_sets, Task main_task,
                           std::uint64_t init_seed)
    : config_(config),
      vocab_(std::move(vocab)),
      label_sets_(std::move(label_sets)),
      main_task_(main_task),
      init_seed_(init_seed) {
    config_.vocab_size = vocab_.size();
    config_.validate();

    if (main_task_ != Task::mlm && !label_sets_.count(main_task_))
        throw DataError(ErrCode::invalid_config, "main task has no label set");
    task_list_.push_back(main_task_);
    for (auto& [t, ls] : label_sets_) {
        if (t != main_task_) task_list_.push_back(t);
    }
    if (main_task_ != Task::mlm &&
        std::find(task_list_.begin(), task_list_.end(), Task::mlm) == task_list_.end())
        task_list_.push_back(Task::mlm);

    RngStream rng(init_seed_, "encoder_init");
    tok_emb_ = Parameter::normal("tok_emb", config_.vocab_size, config_.model_dim, rng);
    pos_emb_ = Parameter::normal("pos_emb", config_.max_seq_len + 1, config_.model_dim, rng);
    for (int l = 0; l < config_.layers; ++l) {
        std::string p = "layer" + std::to_string(l);
        Layer layer{
            nn::MhaParams::init(p + ".mha", config_.model_dim, config_.heads, rng),
            Parameter{p + ".ln1.gain", Tensor::full(1, config_.model_dim, 1.0),
                      Tensor(1, config_.model_dim)},
            Parameter::zeros(p + ".ln1.bias", 1, config_.model_dim),
            Parameter::normal(p + ".ffn.W1", config_.model_dim, config_.ffn(), rng),
            Parameter::zeros(p + ".ffn.b1", 1, config_.ffn()),
            Parameter::normal(p + ".ffn.W2", config_.ffn(), config_.model_dim, rng),
            Parameter::zeros(p + ".ffn.b2", 1, config_.model_dim),
            Parameter{p + ".ln2.gain", Tensor::full(1, config_.model_dim, 1.0),
                      Tensor(1, config_.model_dim)},
            Parameter::zeros(p + ".ln2.bias", 1, config_.model_dim),
        };
        layers_.push_back(std::move(layer));
    }
    mlm_W_ = Parameter::normal("mlm.W", config_.model_dim, config_.vocab_size, rng);
    mlm_b_ = Parameter::zeros("mlm.b", 1, config_.vocab_size);
    for (auto& [t, ls] : label_sets_) {
        Head h;
        h.W = Parameter::normal("head." + to_string(t) + ".W", config_.model_dim, ls.size(), rng);
        h.b = Parameter::zeros("head." + to_string(t) + ".b", 1, ls.size());
        heads_[t] = std::move(h);
    }
}

const LabelSet& EncoderModel::label_set(Task t) const {
    auto it = label_sets_.find(t);
    if (it == label_sets_.end())
        throw DataError(ErrCode::invalid_config, "encoder has no task " + to_string(t));
    return it->second;
}

std::vector<Parameter*> EncoderModel::parameters() {
    std::vector<Parameter*> ps{&tok_emb_, &pos_emb_};
    for (Layer& l : layers_) {
        for (Parameter* p : l.mha.parameters()) ps.push_back(p);
        ps.push_back(&l.ln1_gain);
        ps.push_back(&l.ln1_bias);
        ps.push_back(&l.ffn_W1);
        ps.push_back(&l.ffn_b1);
        ps.push_back(&l.ffn_W2);
        ps.push_back(&l.ffn_b2);
        ps.push_back(&l.ln2_gain);
        ps.push_back(&l.ln2_bias);
    }
    ps.push_back(&mlm_W_);
    ps.push_back(&mlm_b_);
    for (auto& [t, h] : heads_) {
        ps.push_back(&h.W);
        ps.push_back(&h.b);
    }
    return ps;
}

nlohmann::json EncoderModel::config_json() const {
    nlohmann::json j;
    j["arch"] = "encoder";
    j["main_task"] = to_string(main_task_);
    j["init_seed"] = init_seed_;
    j["numeric_mode"] = "f64";
    nlohmann::json cfg;
    cfg["vocab_size"] = config_.vocab_size;
    cfg["layers"] = config_.layers;
    cfg["heads"] = config_.heads;
    cfg["model_dim"] = config_.model_dim;
    cfg["ffn_dim"] = config_.ffn();
    cfg["max_seq_len"] = config_.max_seq_len;
    cfg["mask_rate"] = config_.mask_rate;
    cfg["mask_frac"] = config_.mask_frac;
    cfg["random_frac"] = config_.random_frac;
    cfg["pretrain_batch"] = config_.pretrain_batch;
    cfg["finetune_batch"] = config_.finetune_batch;
    cfg["pretrain_lr"] = config_.pretrain_lr;
    cfg["finetune_lr"] = config_.finetune_lr;
    cfg["epochs"] = config_.epochs;
    cfg["patience"] = config_.patience;
    j["config"] = cfg;
    j["vocab"] = vocab_.tokens();
    nlohmann::json labels;
    for (auto& [t, ls] : label_sets_) labels[to_string(t)] = ls.labels();
    j["labels"] = labels;
    return j;
}

Var EncoderModel::encode(Graph& g, const std::vector<int>& ids, AttnCapture* attn) {
    if (ids.empty()) throw DataError(ErrCode::empty_input, "empty sequence");
    if (static_cast<int>(ids.size()) > config_.max_seq_len)
        throw DataError(ErrCode::out_of_range, "sequence longer than max_seq_len");
    std::vector<int> full{Vocabulary::kCls};
    full.insert(full.end(), ids.begin(), ids.end());
    std::vector<int> positions(full.size());
    std::iota(positions.begin(), positions.end(), 0);

    Var x = g.add(g.embedding_rows(g.param(tok_emb_), full),
                  g.embedding_rows(g.param(pos_emb_), positions));
    for (int l = 0; l < config_.layers; ++l) {
        Layer& layer = layers_[l];
        nn::MhaOut mha = nn::multi_head_attention(g, x, x, x, layer.mha);
        if (attn) {
            for (int h = 0; h < config_.heads; ++h) {
                // The <CLS> row is the per-token weight profile used downstream.
                Var cls_row = g.gather_rows(mha.head_weights[h], {0});
                attn->sites.push_back(
                    {"layer" + std::to_string(l) + ".head" + std::to_string(h), cls_row});
            }
        }
        x = g.layer_norm_rows(g.add(x, mha.output), g.param(layer.ln1_gain),
                              g.param(layer.ln1_bias));
        Var f = g.add_row_bias(
            g.matmul(g.relu(g.add_row_bias(g.matmul(x, g.param(layer.ffn_W1)),
                                           g.param(layer.ffn_b1))),
                     g.param(layer.ffn_W2)),
            g.param(layer.ffn_b2));
        x = g.layer_norm_rows(g.add(x, f), g.param(layer.ln2_gain), g.param(layer.ln2_bias));
    }
    return x;
}

std::map<Task, Var> EncoderModel::forward_logits(Graph& g,
                                                 const std::vector<const Example*>& batch,
                                                 RngStream* /*dropout_rng*/, AttnCapture* attn) {
    if (batch.empty()) throw DataError(ErrCode::empty_input, "empty batch");
    std::vector<Var> cls_rows;
    cls_rows.reserve(batch.size());
    for (const Example* ex : batch) {
        Var h = encode(g, ex->tokens, attn);
        cls_rows.push_back(g.gather_rows(h, {0}));
    }
    Var cls = cls_rows.size() == 1 ? cls_rows[0] : g.concat_rows(cls_rows);
    std::map<Task, Var> logits;
    for (auto& [t, head] : heads_)
        logits[t] = g.add_row_bias(g.matmul(cls, g.param(head.W)), g.param(head.b));
    return logits;
}

Var EncoderModel::mlm_loss(Graph& g, const std::vector<const MaskPlan*>& batch) {
    std::vector<Var> masked_rows;
    std::vector<int> targets;
    for (const MaskPlan* plan : batch) {
        if (plan->positions.empty()) continue;
        Var h = encode(g, plan->input_ids, nullptr);
        std::vector<int> rows;
        rows.reserve(plan->positions.size());
        for (int pos : plan->positions) rows.push_back(pos + 1); // shift past <CLS>
        masked_rows.push_back(g.gather_rows(h, rows));
        targets.insert(targets.end(), plan->targets.begin(), plan->targets.end());
    }
    if (masked_rows.empty()) return Var{};
    Var hidden = masked_rows.size() == 1 ? masked_rows[0] : g.concat_rows(masked_rows);
    Var logits = g.add_row_bias(g.matmul(hidden, g.param(mlm_W_)), g.param(mlm_b_));
    return g.cross_entropy_logits(logits, targets);
}

std::unique_ptr<EncoderModel> build_tiny_encoder(const EncoderConfig& config, Vocabulary vocab,
                                                 std::map<Task, LabelSet> label_sets,
                                                 Task main_task, std::uint64_t seed) {
    return std::make_unique<EncoderModel>(config, std::move(vocab), std::move(label_sets),
                                          main_task, seed);
}

} // namespace mdi
