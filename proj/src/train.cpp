#include "mdi/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mdi/nn/adam.hpp"

namespace mdi {

using nn::Adam;
using nn::AdamConfig;
using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using nn::Var;

nlohmann::json TrainResult::to_json() const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["best_dev"] = best_dev;
    nlohmann::json log = nlohmann::json::array();
    for (const EpochLog& e : epochs)
        log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                       {"dev_metric", e.dev_metric}});
    j["epoch_log"] = log;
    return j;
}

bool EarlyStopper::observe(double metric) {
    ++epoch_;
    if (metric > best_) {
        best_ = metric;
        best_epoch_ = epoch_;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

std::vector<std::vector<const Example*>> make_batches(const Dataset& ds, int batch_size,
                                                      RngStream& rng) {
    std::map<std::size_t, std::vector<const Example*>> buckets;
    for (const Example& ex : ds.examples) buckets[ex.tokens.size()].push_back(&ex);
    std::vector<std::vector<const Example*>> batches;
    for (auto& [len, members] : buckets) {
        RngStream brng = rng.split("bucket" + std::to_string(len));
        brng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); i += batch_size) {
            std::vector<const Example*> batch(
                members.begin() + i,
                members.begin() + std::min(members.size(), i + batch_size));
            batches.push_back(std::move(batch));
        }
    }
    RngStream order = rng.split("batch_order");
    order.shuffle(batches);
    return batches;
}

namespace {

std::vector<Parameter*> snapshot_values(Model& model, std::vector<Tensor>& store) {
    std::vector<Parameter*> params = model.parameters();
    store.clear();
    store.reserve(params.size());
    for (Parameter* p : params) store.push_back(p->value);
    return params;
}

void restore_values(const std::vector<Parameter*>& params, const std::vector<Tensor>& store) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = store[i];
}

Var batch_loss(Model& model, Graph& g, const std::vector<const Example*>& batch,
               const std::vector<Task>& tasks, RngStream* dropout_rng) {
    std::map<Task, Var> logits = model.forward_logits(g, batch, dropout_rng);
    std::vector<Var> losses;
    for (Task t : tasks) {
        std::vector<int> targets;
        targets.reserve(batch.size());
        for (const Example* ex : batch) {
            auto it = ex->labels.find(t);
            if (it == ex->labels.end())
                throw DataError(ErrCode::unknown_label,
                                "example " + ex->id + " lacks a label for " + to_string(t));
            targets.push_back(it->second);
        }
        losses.push_back(g.cross_entropy_logits(logits.at(t), targets));
    }
    return losses.size() == 1 ? losses[0] : g.add_n(losses);
}

std::vector<Task> supervised_tasks(const Model& model, const Dataset& ds) {
    // Tasks the dataset can supervise: those with a label on the first example.
    std::vector<Task> tasks;
    if (ds.empty()) return tasks;
    for (Task t : model.tasks()) {
        if (t == Task::mlm) continue;
        if (ds.examples.front().labels.count(t)) tasks.push_back(t);
    }
    return tasks;
}

double run_epoch(Model& model, Adam& adam, const Dataset& train, const std::vector<Task>& tasks,
                 const TrainOptions& opts, int epoch) {
    RngStream rng(opts.seed, "epoch" + std::to_string(epoch));
    RngStream batch_rng = rng.split("batches");
    RngStream dropout_rng = rng.split("dropout");
    std::vector<std::vector<const Example*>> batches =
        make_batches(train, opts.batch_size, batch_rng);
    std::vector<Parameter*> params = model.parameters();
    double total = 0.0;
    long count = 0;
    for (const auto& batch : batches) {
        Graph g(opts.dropout_enabled, true);
        Var loss = batch_loss(model, g, batch, tasks, &dropout_rng);
        double lv = g.val(loss).v[0];
        if (!std::isfinite(lv)) throw NumericError("non-finite training loss");
        g.backward(loss);
        adam.step(params);
        total += lv;
        ++count;
    }
    return count > 0 ? total / count : 0.0;
}

} // namespace

std::vector<std::map<Task, std::vector<double>>> model_probs(Model& model, const Dataset& ds,
                                                             int batch_size) {
    std::vector<std::map<Task, std::vector<double>>> out(ds.size());
    std::map<std::size_t, std::vector<std::pair<std::size_t, const Example*>>> buckets;
    for (std::size_t i = 0; i < ds.size(); ++i)
        buckets[ds.examples[i].tokens.size()].push_back({i, &ds.examples[i]});
    for (auto& [len, members] : buckets) {
        for (std::size_t i = 0; i < members.size(); i += batch_size) {
            std::vector<const Example*> batch;
            std::vector<std::size_t> idx;
            for (std::size_t k = i; k < std::min(members.size(), i + batch_size); ++k) {
                idx.push_back(members[k].first);
                batch.push_back(members[k].second);
            }
            Graph g(false, false);
            std::map<Task, Var> logits = model.forward_logits(g, batch, nullptr);
            for (auto& [t, lv] : logits) {
                Var probs = g.softmax_rows(lv);
                const Tensor& tp = g.val(probs);
                for (std::size_t r = 0; r < batch.size(); ++r) {
                    std::vector<double> row(tp.cols);
                    for (int c = 0; c < tp.cols; ++c) row[c] = tp.at(static_cast<int>(r), c);
                    out[idx[r]][t] = std::move(row);
                }
            }
        }
    }
    return out;
}

double dataset_accuracy(Model& model, const Dataset& ds, Task task, int batch_size) {
    if (ds.empty()) return 0.0;
    std::vector<std::map<Task, std::vector<double>>> probs = model_probs(model, ds, batch_size);
    long correct = 0, total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto it = ds.examples[i].labels.find(task);
        if (it == ds.examples[i].labels.end()) continue;
        const std::vector<double>& p = probs[i].at(task);
        int argmax = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (argmax == it->second) ++correct;
        ++total;
    }
    return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

TrainResult finetune(Model& model, const Dataset& train, const Dataset& dev,
                     const TrainOptions& opts) {
    if (train.empty()) throw DataError(ErrCode::empty_input, "empty training set");
    std::vector<Task> tasks = supervised_tasks(model, train);
    if (tasks.empty()) throw DataError(ErrCode::unknown_label, "training set supervises no task");
    Task metric_task = opts.dev_metric_task.value_or(model.main_task());

    Adam adam(AdamConfig{opts.lr, 0.9, 0.999, 1e-8});
    EarlyStopper stopper(opts.patience);
    TrainResult result;
    std::vector<Tensor> best_store;
    std::vector<Parameter*> params = model.parameters();

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        double train_loss = run_epoch(model, adam, train, tasks, opts, epoch);
        double dev_metric = dev.empty() ? 0.0 : dataset_accuracy(model, dev, metric_task,
                                                                 opts.batch_size);
        result.epochs.push_back({epoch, train_loss, dev_metric});
        if (!dev.empty()) {
            if (stopper.observe(dev_metric)) snapshot_values(model, best_store);
            if (stopper.should_stop()) break;
        }
    }
    if (!dev.empty() && !best_store.empty()) {
        restore_values(params, best_store);
        result.best_epoch = stopper.best_epoch();
        result.best_dev = stopper.best_metric();
    } else {
        result.best_epoch = static_cast<int>(result.epochs.size());
        result.best_dev = result.epochs.empty() ? 0.0 : result.epochs.back().dev_metric;
    }
    return result;
}

std::vector<int> proportional_cycle(const std::vector<std::size_t>& sizes) {
    if (sizes.empty()) return {};
    std::size_t min_sz = SIZE_MAX;
    for (std::size_t s : sizes)
        if (s > 0) min_sz = std::min(min_sz, s);
    if (min_sz == SIZE_MAX) return {};
    std::vector<int> cycle;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] == 0) continue;
        // Round to nearest, at least one slot.
        std::size_t q = std::max<std::size_t>(1, (2 * sizes[i] + min_sz) / (2 * min_sz));
        for (std::size_t k = 0; k < q; ++k) cycle.push_back(static_cast<int>(i));
    }
    return cycle;
}

TrainResult mtl_finetune(Model& model, const Dataset& main_train,
                         const std::vector<Task>& main_tasks, const std::vector<AuxDataset>& aux,
                         const Dataset& dev, const TrainOptions& opts) {
    if (main_tasks.empty()) throw DataError(ErrCode::invalid_config, "no main task");
    if (aux.empty()) return finetune(model, main_train, dev, opts);
    if (main_train.empty()) throw DataError(ErrCode::empty_input, "empty main training set");

    Task metric_task = opts.dev_metric_task.value_or(model.main_task());
    Adam adam(AdamConfig{opts.lr, 0.9, 0.999, 1e-8});
    EarlyStopper stopper(opts.patience);
    TrainResult result;
    std::vector<Tensor> best_store;
    std::vector<Parameter*> params = model.parameters();

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        RngStream rng(opts.seed, "mtl_epoch" + std::to_string(epoch));
        RngStream dropout_rng = rng.split("dropout");

        // Per-dataset batch queues; the cycle pattern follows example counts.
        std::vector<std::vector<std::vector<const Example*>>> queues;
        std::vector<const std::vector<Task>*> queue_tasks;
        std::vector<std::size_t> sizes;
        {
            RngStream brng = rng.split("main_batches");
            queues.push_back(make_batches(main_train, opts.batch_size, brng));
            queue_tasks.push_back(&main_tasks);
            sizes.push_back(main_train.size());
        }
        for (const AuxDataset& a : aux) {
            RngStream brng = rng.split("aux_batches_" + a.name);
            queues.push_back(make_batches(a.train, opts.batch_size, brng));
            queue_tasks.push_back(&a.tasks);
            sizes.push_back(a.train.size());
        }
        std::vector<int> cycle = proportional_cycle(sizes);
        std::vector<std::size_t> cursor(queues.size(), 0);

        double total = 0.0;
        long count = 0;
        bool progressed = true;
        while (progressed) {
            progressed = false;
            for (int qi : cycle) {
                if (cursor[qi] >= queues[qi].size()) continue;
                const auto& batch = queues[qi][cursor[qi]++];
                progressed = true;
                Graph g(opts.dropout_enabled, true);
                Var loss = batch_loss(model, g, batch, *queue_tasks[qi], &dropout_rng);
                double lv = g.val(loss).v[0];
                if (!std::isfinite(lv)) throw NumericError("non-finite training loss");
                g.backward(loss);
                adam.step(params);
                total += lv;
                ++count;
            }
        }
        double train_loss = count > 0 ? total / count : 0.0;
        double dev_metric = dev.empty() ? 0.0 : dataset_accuracy(model, dev, metric_task,
                                                                 opts.batch_size);
        result.epochs.push_back({epoch, train_loss, dev_metric});
        if (!dev.empty()) {
            if (stopper.observe(dev_metric)) snapshot_values(model, best_store);
            if (stopper.should_stop()) break;
        }
    }
    if (!dev.empty() && !best_store.empty()) {
        restore_values(params, best_store);
        result.best_epoch = stopper.best_epoch();
        result.best_dev = stopper.best_metric();
    } else {
        result.best_epoch = static_cast<int>(result.epochs.size());
        result.best_dev = result.epochs.empty() ? 0.0 : result.epochs.back().dev_metric;
    }
    return result;
}

MlmResult pretrain_mlm(EncoderModel& model, const std::vector<std::vector<int>>& sequences,
                       int epochs, const TrainOptions& opts) {
    if (sequences.empty()) throw DataError(ErrCode::empty_input, "empty pretraining corpus");
    for (const auto& s : sequences) {
        if (static_cast<int>(s.size()) > model.config().max_seq_len)
            throw DataError(ErrCode::out_of_range, "pretraining sequence exceeds max_seq_len");
    }
    Adam adam(AdamConfig{opts.lr, 0.9, 0.999, 1e-8});
    std::vector<Parameter*> params = model.parameters();
    MlmResult result;
    int batch_size = std::max(1, opts.batch_size);

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        RngStream rng(opts.seed, "mlm_epoch" + std::to_string(epoch));
        RngStream mask_rng = rng.split("mask");
        std::vector<MaskPlan> plans;
        plans.reserve(sequences.size());
        for (const auto& seq : sequences) {
            plans.push_back(make_mask_plan(seq, model.config(), model.vocab(), mask_rng));
            if (epoch == 1) {
                result.masked_positions += static_cast<long>(plans.back().positions.size());
                result.total_positions += static_cast<long>(seq.size());
            }
        }
        std::vector<std::size_t> order(plans.size());
        std::iota(order.begin(), order.end(), 0);
        RngStream shuffle_rng = rng.split("order");
        shuffle_rng.shuffle(order);

        double total = 0.0;
        long masked = 0;
        for (std::size_t i = 0; i < order.size(); i += batch_size) {
            std::vector<const MaskPlan*> batch;
            long batch_masked = 0;
            for (std::size_t k = i; k < std::min(order.size(), i + batch_size); ++k) {
                batch.push_back(&plans[order[k]]);
                batch_masked += static_cast<long>(plans[order[k]].positions.size());
            }
            if (batch_masked == 0) continue; // nothing selected, zero loss contribution
            Graph g(false, true);
            Var loss = model.mlm_loss(g, batch);
            double lv = g.val(loss).v[0];
            if (!std::isfinite(lv)) throw NumericError("non-finite MLM loss");
            g.backward(loss);
            adam.step(params);
            total += lv * batch_masked;
            masked += batch_masked;
        }
        result.epoch_loss.push_back(masked > 0 ? total / masked : 0.0);
    }
    result.final_loss = result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back();
    return result;
}

namespace {

std::vector<std::map<Task, std::vector<double>>> raw_logits(Model& model, const Dataset& ds,
                                                            int batch_size,
                                                            const std::vector<Task>& tasks) {
    std::vector<std::map<Task, std::vector<double>>> out(ds.size());
    std::map<std::size_t, std::vector<std::pair<std::size_t, const Example*>>> buckets;
    for (std::size_t i = 0; i < ds.size(); ++i)
        buckets[ds.examples[i].tokens.size()].push_back({i, &ds.examples[i]});
    for (auto& [len, members] : buckets) {
        for (std::size_t i = 0; i < members.size(); i += batch_size) {
            std::vector<const Example*> batch;
            std::vector<std::size_t> idx;
            for (std::size_t k = i; k < std::min(members.size(), i + batch_size); ++k) {
                idx.push_back(members[k].first);
                batch.push_back(members[k].second);
            }
            Graph g(false, false);
            std::map<Task, Var> logits = model.forward_logits(g, batch, nullptr);
            for (Task t : tasks) {
                const Tensor& tl = g.val(logits.at(t));
                for (std::size_t r = 0; r < batch.size(); ++r) {
                    std::vector<double> row(tl.cols);
                    for (int c = 0; c < tl.cols; ++c) row[c] = tl.at(static_cast<int>(r), c);
                    out[idx[r]][t] = std::move(row);
                }
            }
        }
    }
    return out;
}

double mean_pool_mse(Model& student, const Dataset& ds,
                     const std::vector<std::map<Task, std::vector<double>>>& teacher_logits,
                     const std::vector<Task>& tasks, int batch_size) {
    std::vector<std::map<Task, std::vector<double>>> sp =
        raw_logits(student, ds, batch_size, tasks);
    double total = 0.0;
    long terms = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Task t : tasks) {
            const std::vector<double>& a = sp[i].at(t);
            const std::vector<double>& b = teacher_logits[i].at(t);
            for (std::size_t c = 0; c < a.size(); ++c) {
                double d = a[c] - b[c];
                total += d * d;
                ++terms;
            }
        }
    }
    return terms > 0 ? total / terms : 0.0;
}

} // namespace

DistillResult distill(Model& teacher, Model& student, const std::vector<TweetRecord>& pool,
                      const EncodeOptions& encode_opts, const TrainOptions& opts) {
    // Shared tasks with identical label sets.
    std::vector<Task> tasks;
    for (Task t : student.tasks()) {
        if (t == Task::mlm) continue;
        if (!teacher.has_task(t))
            throw DataError(ErrCode::label_set_mismatch,
                            "teacher lacks task " + to_string(t));
        if (!(teacher.label_set(t) == student.label_set(t)))
            throw DataError(ErrCode::label_set_mismatch,
                            "teacher/student label sets differ on " + to_string(t));
        tasks.push_back(t);
    }
    if (tasks.empty()) throw DataError(ErrCode::label_set_mismatch, "no shared tasks to distill");
    if (pool.empty()) throw DataError(ErrCode::empty_input, "empty distillation pool");

    Dataset teacher_ds = encode_records(pool, teacher, encode_opts);
    Dataset student_ds = encode_records(pool, student, encode_opts);
    if (teacher_ds.size() != student_ds.size())
        throw DataError(ErrCode::vocab_mismatch, "pool encodes differently for teacher/student");

    int tb = teacher.default_batch_size();
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::map<Task, std::vector<double>>> cached =
        raw_logits(teacher, teacher_ds, tb, tasks);
    auto t1 = std::chrono::steady_clock::now();
    double teacher_secs = std::chrono::duration<double>(t1 - t0).count();

    DistillResult result;
    result.param_ratio =
        static_cast<double>(teacher.param_count()) / static_cast<double>(student.param_count());
    result.initial_mse = mean_pool_mse(student, student_ds, cached, tasks, opts.batch_size);

    Adam adam(AdamConfig{opts.lr, 0.9, 0.999, 1e-8});
    std::vector<Parameter*> params = student.parameters();
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        RngStream rng(opts.seed, "distill_epoch" + std::to_string(epoch));
        RngStream batch_rng = rng.split("batches");
        RngStream dropout_rng = rng.split("dropout");

        // Index-aligned batches over the student encoding.
        std::map<std::size_t, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < student_ds.size(); ++i)
            buckets[student_ds.examples[i].tokens.size()].push_back(i);
        std::vector<std::vector<std::size_t>> batches;
        for (auto& [len, members] : buckets) {
            RngStream brng = batch_rng.split("bucket" + std::to_string(len));
            brng.shuffle(members);
            for (std::size_t i = 0; i < members.size(); i += opts.batch_size) {
                batches.emplace_back(members.begin() + i,
                                     members.begin() +
                                         std::min(members.size(), i + opts.batch_size));
            }
        }
        RngStream order_rng = batch_rng.split("batch_order");
        order_rng.shuffle(batches);

        double total = 0.0;
        long count = 0;
        for (const auto& idx : batches) {
            std::vector<const Example*> batch;
            batch.reserve(idx.size());
            for (std::size_t i : idx) batch.push_back(&student_ds.examples[i]);
            Graph g(opts.dropout_enabled, true);
            std::map<Task, Var> logits = student.forward_logits(g, batch, &dropout_rng);
            std::vector<Var> losses;
            for (Task t : tasks) {
                int cols = student.label_set(t).size();
                Tensor target(static_cast<int>(idx.size()), cols);
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    const std::vector<double>& row = cached[idx[r]].at(t);
                    for (int c = 0; c < cols; ++c) target.at(static_cast<int>(r), c) = row[c];
                }
                losses.push_back(g.mse_against(logits.at(t), target));
            }
            Var loss = losses.size() == 1 ? losses[0] : g.add_n(losses);
            double lv = g.val(loss).v[0];
            if (!std::isfinite(lv)) throw NumericError("non-finite distillation loss");
            g.backward(loss);
            adam.step(params);
            total += lv;
            ++count;
        }
        result.epoch_mse.push_back(count > 0 ? total / count : 0.0);
    }
    result.final_mse = mean_pool_mse(student, student_ds, cached, tasks, opts.batch_size);

    // Argmax agreement with the teacher on the pool.
    auto s0 = std::chrono::steady_clock::now();
    std::vector<std::map<Task, std::vector<double>>> student_logits =
        raw_logits(student, student_ds, opts.batch_size, tasks);
    auto s1 = std::chrono::steady_clock::now();
    double student_secs = std::chrono::duration<double>(s1 - s0).count();
    long agree = 0, total_preds = 0;
    for (std::size_t i = 0; i < student_ds.size(); ++i) {
        for (Task t : tasks) {
            const std::vector<double>& a = student_logits[i].at(t);
            const std::vector<double>& b = cached[i].at(t);
            int sa = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
            int tb2 = static_cast<int>(std::max_element(b.begin(), b.end()) - b.begin());
            if (sa == tb2) ++agree;
            ++total_preds;
        }
    }
    result.agreement = total_preds > 0 ? static_cast<double>(agree) / total_preds : 0.0;
    result.throughput_ratio =
        student_secs > 0.0 && teacher_secs > 0.0 ? teacher_secs / student_secs : 0.0;
    return result;
}

std::vector<PredictionRow> predict(Model& model, const std::vector<TweetRecord>& records,
                                   const EncodeOptions& opts, bool capture_attention,
                                   int batch_size) {
    Dataset ds = encode_records(records, model, opts);
    if (batch_size <= 0) batch_size = model.default_batch_size();
    std::vector<PredictionRow> rows(ds.size());

    std::map<std::size_t, std::vector<std::pair<std::size_t, const Example*>>> buckets;
    for (std::size_t i = 0; i < ds.size(); ++i)
        buckets[ds.examples[i].tokens.size()].push_back({i, &ds.examples[i]});
    for (auto& [len, members] : buckets) {
        for (std::size_t i = 0; i < members.size(); i += batch_size) {
            std::vector<const Example*> batch;
            std::vector<std::size_t> idx;
            for (std::size_t k = i; k < std::min(members.size(), i + batch_size); ++k) {
                idx.push_back(members[k].first);
                batch.push_back(members[k].second);
            }
            Graph g(false, false);
            AttnCapture capture;
            std::map<Task, Var> logits =
                model.forward_logits(g, batch, nullptr, capture_attention ? &capture : nullptr);
            for (auto& [t, lv] : logits) {
                Var probs = g.softmax_rows(lv);
                const Tensor& tp = g.val(probs);
                for (std::size_t r = 0; r < batch.size(); ++r) {
                    std::vector<double> row(tp.cols);
                    for (int c = 0; c < tp.cols; ++c) row[c] = tp.at(static_cast<int>(r), c);
                    rows[idx[r]].probs[t] = std::move(row);
                }
            }
            for (std::size_t r = 0; r < batch.size(); ++r) {
                rows[idx[r]].id = batch[r]->id;
                rows[idx[r]].user_id = batch[r]->user_id;
            }
            if (capture_attention) {
                for (auto& [site, wv] : capture.sites) {
                    const Tensor& w = g.val(wv);
                    if (w.rows == static_cast<int>(batch.size())) {
                        for (std::size_t r = 0; r < batch.size(); ++r) {
                            std::vector<double> weights(w.cols);
                            for (int c = 0; c < w.cols; ++c)
                                weights[c] = w.at(static_cast<int>(r), c);
                            rows[idx[r]].attention.push_back({site, std::move(weights)});
                        }
                    } else if (w.rows == 1 && batch.size() == 1) {
                        std::vector<double> weights(w.cols);
                        for (int c = 0; c < w.cols; ++c) weights[c] = w.at(0, c);
                        rows[idx[0]].attention.push_back({site, std::move(weights)});
                    }
                }
            }
        }
    }
    return rows;
}

} // namespace mdi
