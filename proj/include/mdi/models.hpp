#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdi/corpus.hpp"
#include "mdi/nn/attention.hpp"
#include "mdi/nn/graph.hpp"
#include "mdi/nn/gru.hpp"
#include "mdi/vocab.hpp"

namespace mdi {

enum class Task { city, state, country, diagloss, codesw, mlm };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct Example {
    std::string id;
    std::string user_id;
    std::vector<int> tokens;
    std::map<Task, int> labels;
};

struct Dataset {
    std::vector<Example> examples;
    bool empty() const { return examples.empty(); }
    std::size_t size() const { return examples.size(); }
};

// Attention weights recorded during a forward pass, one entry per site.
struct AttnCapture {
    std::vector<std::pair<std::string, nn::Var>> sites;
};

class Model {
  public:
    virtual ~Model() = default;

    virtual std::string arch() const = 0;
    virtual std::vector<nn::Parameter*> parameters() = 0;
    virtual const std::vector<Task>& tasks() const = 0;
    virtual const LabelSet& label_set(Task t) const = 0;
    virtual const Vocabulary& vocab() const = 0;
    virtual Task main_task() const = 0;
    virtual int max_seq_len() const = 0;
    virtual double default_lr() const = 0;
    virtual int default_batch_size() const = 0;

    // Architecture + hyperparameters + vocab + label sets; enough to rebuild.
    virtual nlohmann::json config_json() const = 0;

    // batch must be non-empty with equal token counts (length bucketing).
    virtual std::map<Task, nn::Var> forward_logits(nn::Graph& g,
                                                   const std::vector<const Example*>& batch,
                                                   RngStream* dropout_rng,
                                                   AttnCapture* attn = nullptr) = 0;

    long param_count();
    bool has_task(Task t) const;
};

struct BiGruConfig {
    int vocab_size = 0;
    int embed_dim = 300;
    int layers = 3;
    int units = 1000; // per layer, split across the two directions
    int max_seq_len = 50;
    int batch_size = 8;
    double dropout = 0.5;
    double lr = 1e-3;
    int epochs = 15;
    int patience = 5;

    void validate() const;
};

enum class BiGruArch { single_task, mtl_common_attn, mtl_spec_attn, hamtl };
enum class HaMtlOrder { city_first, country_first };

std::string to_string(BiGruArch a);
std::string to_string(HaMtlOrder o);

// All four recurrent architectures behind one class:
//  - single_task: 3 BiGRU layers, attention pooling on layer 3 only, one head;
//  - mtl_common_attn: 3 shared layers, one shared attention site, 3 heads;
//  - mtl_spec_attn: 2 shared layers, then a task-owned BiGRU+attention branch
//    per task;
//  - hamtl: 4 layers; layers 2..4 each pool into one task head (state always
//    at layer 3, city/country at 2/4 per order); the un-pooled sequence is
//    what flows upward.
// Auxiliary (non-geographic) tasks get heads on the shared context for
// single/common, and their own attention branch for spec/hamtl (query over
// the top layer for hamtl).
class BiGruModel : public Model {
  public:
    BiGruModel(BiGruArch arch, const BiGruConfig& config, Vocabulary vocab,
               std::map<Task, LabelSet> label_sets, Task main_task, HaMtlOrder order,
               std::uint64_t init_seed);

    std::string arch() const override;
    std::vector<nn::Parameter*> parameters() override;
    const std::vector<Task>& tasks() const override { return task_list_; }
    const LabelSet& label_set(Task t) const override;
    const Vocabulary& vocab() const override { return vocab_; }
    Task main_task() const override { return main_task_; }
    int max_seq_len() const override { return config_.max_seq_len; }
    double default_lr() const override { return config_.lr; }
    int default_batch_size() const override { return config_.batch_size; }
    nlohmann::json config_json() const override;

    std::map<Task, nn::Var> forward_logits(nn::Graph& g,
                                           const std::vector<const Example*>& batch,
                                           RngStream* dropout_rng,
                                           AttnCapture* attn = nullptr) override;

    const BiGruConfig& config() const { return config_; }
    HaMtlOrder order() const { return order_; }
    // Supervision depth for hamtl: layer index (2..4) -> task.
    std::map<int, Task> hamtl_head_map() const;
    int attention_site_count() const;

  private:
    struct Head {
        nn::Parameter W, b;
    };
    struct TaskBranch { // task-owned layer + query for mtl_spec_attn
        nn::BiGruLayer layer;
        nn::Parameter query;
    };

    std::vector<nn::Var> embed(nn::Graph& g, const std::vector<const Example*>& batch);
    std::vector<nn::Var> run_layer(nn::Graph& g, nn::BiGruLayer& layer,
                                   const std::vector<nn::Var>& seq, RngStream* dropout_rng);
    nn::Var head_logits(nn::Graph& g, Head& head, nn::Var ctx);
    bool is_geo(Task t) const { return t == Task::city || t == Task::state || t == Task::country; }

    BiGruArch arch_;
    BiGruConfig config_;
    Vocabulary vocab_;
    std::map<Task, LabelSet> label_sets_;
    std::vector<Task> task_list_;
    Task main_task_;
    HaMtlOrder order_;
    std::uint64_t init_seed_;

    nn::Parameter embedding_;
    std::vector<nn::BiGruLayer> shared_layers_;
    std::map<Task, TaskBranch> branches_;     // mtl_spec_attn; hamtl/single aux
    std::map<std::string, nn::Parameter> queries_; // site name -> query
    std::map<Task, Head> heads_;
};

std::unique_ptr<BiGruModel> build_single_task_bigru(const BiGruConfig& config, Vocabulary vocab,
                                                    std::map<Task, LabelSet> label_sets,
                                                    Task main_task, std::uint64_t seed);
std::unique_ptr<BiGruModel> build_mtl_flat(const BiGruConfig& config, bool task_specific_attention,
                                           Vocabulary vocab, std::map<Task, LabelSet> label_sets,
                                           Task main_task, std::uint64_t seed);
// HA-MTL defaults per the reference setup: 4 layers, dropout 0.7.
std::unique_ptr<BiGruModel> build_ha_mtl(const BiGruConfig& config, HaMtlOrder order,
                                         Vocabulary vocab, std::map<Task, LabelSet> label_sets,
                                         Task main_task, std::uint64_t seed);

struct EncodeOptions {
    bool strip_diacritics = true;
    // Label source for the codesw task: "lang" (script-tagger output),
    // "city", or "country" (geographic labels on the CodSw records).
    std::string codesw_level = "country";
    bool require_labels = false;
};

std::string task_label_of(const TweetRecord& r, Task t, const EncodeOptions& opts);

// Tokenizes with the model vocabulary and attaches indices for every model
// task that the record can supply. Records with no tokens are dropped.
Dataset encode_records(const std::vector<TweetRecord>& records, const Model& model,
                       const EncodeOptions& opts);

// Label sets harvested from training records for the given tasks.
std::map<Task, LabelSet> harvest_label_sets(const std::vector<TweetRecord>& records,
                                            const std::vector<Task>& tasks,
                                            const EncodeOptions& opts);

Vocabulary build_vocab_from_records(const std::vector<TweetRecord>& records, int min_freq,
                                    const EncodeOptions& opts, int max_seq_len);

} // namespace mdi
