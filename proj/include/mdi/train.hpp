#pragma once

#include "mdi/encoder.hpp"
#include "mdi/models.hpp"

namespace mdi {

struct TrainOptions {
    int epochs = 15;
    int patience = 5;
    int batch_size = 8;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool dropout_enabled = true;
    // Dev-selection metric is accuracy of this task (the model's main task
    // when unset); ties keep the earlier epoch.
    std::optional<Task> dev_metric_task;
};

struct EpochLog {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double dev_metric = 0.0;
};

struct TrainResult {
    int best_epoch = 0; // 0 when no dev set was used
    double best_dev = 0.0;
    std::vector<EpochLog> epochs;
    nlohmann::json to_json() const;
};

// Improvement = strictly better metric. Stops once `patience` consecutive
// epochs pass without improvement.
class EarlyStopper {
  public:
    explicit EarlyStopper(int patience) : patience_(patience) {}
    // Returns true when this epoch improved on the best so far.
    bool observe(double metric);
    bool should_stop() const { return patience_ > 0 && since_best_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_metric() const { return best_; }

  private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    double best_ = -1.0;
    int since_best_ = 0;
};

// Batches bucketed by exact sequence length, shuffled deterministically.
std::vector<std::vector<const Example*>> make_batches(const Dataset& ds, int batch_size,
                                                      RngStream& rng);

// Per-example class probabilities for every model task; dropout off.
std::vector<std::map<Task, std::vector<double>>> model_probs(Model& model, const Dataset& ds,
                                                             int batch_size);

double dataset_accuracy(Model& model, const Dataset& ds, Task task, int batch_size);

// Supervised training with early stopping on dev accuracy; returns the
// best-dev weights in the model (not the last). Loss per batch is the sum of
// cross-entropies over every model task the dataset labels.
TrainResult finetune(Model& model, const Dataset& train, const Dataset& dev,
                     const TrainOptions& opts);

struct AuxDataset {
    std::string name;
    Dataset train;
    std::vector<Task> tasks;
};

// Round-robin schedule proportional to dataset sizes; only the scheduled
// dataset's task heads receive loss on a step. Selection still follows the
// main-task dev metric.
TrainResult mtl_finetune(Model& model, const Dataset& main_train,
                         const std::vector<Task>& main_tasks, const std::vector<AuxDataset>& aux,
                         const Dataset& dev, const TrainOptions& opts);

// Proportional cycle pattern, e.g. sizes 2:1 -> {0,0,1}. Index order follows
// the input order (main first).
std::vector<int> proportional_cycle(const std::vector<std::size_t>& sizes);

struct MlmResult {
    std::vector<double> epoch_loss; // mean masked CE per epoch
    double final_loss = 0.0;
    long masked_positions = 0;
    long total_positions = 0;
};

MlmResult pretrain_mlm(EncoderModel& model, const std::vector<std::vector<int>>& sequences,
                       int epochs, const TrainOptions& opts);

struct DistillResult {
    double initial_mse = 0.0;
    double final_mse = 0.0;
    double agreement = 0.0; // argmax match with the teacher on the pool
    double param_ratio = 0.0; // teacher / student
    double throughput_ratio = 0.0; // student / teacher records per second
    std::vector<double> epoch_mse;
};

// Trains the student to match cached teacher logits per shared task under
// MSE (raw logits, no temperature). Default budget is 20 epochs.
DistillResult distill(Model& teacher, Model& student, const std::vector<TweetRecord>& pool,
                      const EncodeOptions& encode_opts, const TrainOptions& opts);

struct PredictionRow {
    std::string id;
    std::string user_id;
    std::map<Task, std::vector<double>> probs;
    // site name -> per-position weights
    std::vector<std::pair<std::string, std::vector<double>>> attention;
};

std::vector<PredictionRow> predict(Model& model, const std::vector<TweetRecord>& records,
                                   const EncodeOptions& opts, bool capture_attention,
                                   int batch_size = 0);

} // namespace mdi
