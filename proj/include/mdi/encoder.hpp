#pragma once

#include "mdi/models.hpp"
#include "mdi/nn/attention.hpp"

namespace mdi {

struct EncoderConfig {
    int vocab_size = 0;
    int layers = 2;
    int heads = 2;
    int model_dim = 32;
    int ffn_dim = 0; // 4 * model_dim when 0
    int max_seq_len = 128;
    double mask_rate = 0.15;
    // Corruption split over selected positions; the remainder stays unchanged.
    double mask_frac = 0.8;
    double random_frac = 0.1;
    int pretrain_batch = 32; // desk-scale stand-in for the full-scale 256
    int finetune_batch = 32;
    double pretrain_lr = 1e-3;
    double finetune_lr = 2e-5;
    int epochs = 15;
    int patience = 5;

    void validate() const;
    int ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * model_dim; }
};

// Masking plan for one sequence: floor(mask_rate * len) distinct positions,
// each corrupted 80/10/10 (MASK / random token / unchanged).
struct MaskPlan {
    std::vector<int> input_ids; // corrupted copy
    std::vector<int> positions; // selected positions, ascending
    std::vector<int> targets;   // original ids at those positions
};

MaskPlan make_mask_plan(const std::vector<int>& tokens, const EncoderConfig& cfg,
                        const Vocabulary& vocab, RngStream& rng);

// Post-LN transformer encoder, no next-sentence head anywhere. Classification
// reads the hidden state of a prepended <CLS> token; the MLM head is a dense
// projection over the vocabulary applied at masked positions only.
class EncoderModel : public Model {
  public:
    EncoderModel(const EncoderConfig& config, Vocabulary vocab,
                 std::map<Task, LabelSet> label_sets, Task main_task, std::uint64_t init_seed);

    std::string arch() const override { return "encoder"; }
    std::vector<nn::Parameter*> parameters() override;
    const std::vector<Task>& tasks() const override { return task_list_; }
    const LabelSet& label_set(Task t) const override;
    const Vocabulary& vocab() const override { return vocab_; }
    Task main_task() const override { return main_task_; }
    int max_seq_len() const override { return config_.max_seq_len; }
    double default_lr() const override { return config_.finetune_lr; }
    int default_batch_size() const override { return config_.finetune_batch; }
    nlohmann::json config_json() const override;

    std::map<Task, nn::Var> forward_logits(nn::Graph& g,
                                           const std::vector<const Example*>& batch,
                                           RngStream* dropout_rng,
                                           AttnCapture* attn = nullptr) override;

    // Mean masked-token cross-entropy over the batch; plans with no selected
    // positions contribute nothing. Returns an invalid Var if nothing was
    // masked anywhere in the batch (loss contribution zero).
    nn::Var mlm_loss(nn::Graph& g, const std::vector<const MaskPlan*>& batch);

    const EncoderConfig& config() const { return config_; }

  private:
    struct Layer {
        nn::MhaParams mha;
        nn::Parameter ln1_gain, ln1_bias;
        nn::Parameter ffn_W1, ffn_b1, ffn_W2, ffn_b2;
        nn::Parameter ln2_gain, ln2_bias;
    };
    struct Head {
        nn::Parameter W, b;
    };

    // ids without <CLS>; returns hidden states for [CLS, ids...].
    nn::Var encode(nn::Graph& g, const std::vector<int>& ids, AttnCapture* attn);

    EncoderConfig config_;
    Vocabulary vocab_;
    std::map<Task, LabelSet> label_sets_;
    std::vector<Task> task_list_;
    Task main_task_;
    std::uint64_t init_seed_;

    nn::Parameter tok_emb_, pos_emb_;
    std::vector<Layer> layers_;
    nn::Parameter mlm_W_, mlm_b_;
    std::map<Task, Head> heads_;
};

std::unique_ptr<EncoderModel> build_tiny_encoder(const EncoderConfig& config, Vocabulary vocab,
                                                 std::map<Task, LabelSet> label_sets,
                                                 Task main_task, std::uint64_t seed);

} // namespace mdi
