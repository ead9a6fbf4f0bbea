// SPDX-License-Identifier: Apache-2.0
#include "amr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include "amr/errors.hpp"
#include "amr/rng.hpp"

namespace amr {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot open for writing: " + path);
  return os;
}

/// Packs frames[idx[first..last)] into a [B, 2, L] batch plus one-hot
/// labels.
void make_batch(const std::vector<Frame>& frames,
                const std::vector<std::size_t>& idx, std::size_t first,
                std::size_t last, std::size_t num_classes, Tensor& batch,
                Tensor& labels) {
  const std::size_t B = last - first;
  const std::size_t L = frames[idx[first]].iq.dim(1);
  batch = Tensor({B, 2, L});
  labels = Tensor({B, num_classes});
  for (std::size_t b = 0; b < B; ++b) {
    const Frame& f = frames[idx[first + b]];
    std::copy(f.iq.data.begin(), f.iq.data.end(),
              batch.data.begin() + b * 2 * L);
    labels.data[b * num_classes + std::size_t(f.class_id)] = 1.0f;
  }
}

unsigned eval_threads() {
  if (const char* env = std::getenv("AMR_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return unsigned(n);
  }
  return 1;
}

/// Argmax predictions for a frame list; parallel over contiguous chunks
/// when AMR_THREADS allows, with results written by frame index so the
/// outcome does not depend on scheduling.
std::vector<int> predict_classes(const Model& m,
                                 const std::vector<Frame>& frames,
                                 std::size_t batch_size = 256) {
  std::vector<int> pred(frames.size(), -1);
  std::vector<std::size_t> idx(frames.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t first = lo; first < hi; first += batch_size) {
      const std::size_t last = std::min(first + batch_size, hi);
      Tensor batch, labels;
      make_batch(frames, idx, first, last, m.spec.num_classes, batch, labels);
      const auto res = forward(m, batch);
      const std::size_t C = m.spec.num_classes;
      for (std::size_t b = 0; b < last - first; ++b) {
        const float* row = res.probs.ptr() + b * C;
        pred[first + b] =
            int(std::max_element(row, row + C) - row);
      }
    }
  };

  const unsigned workers =
      std::min<unsigned>(eval_threads(),
                         unsigned((frames.size() + batch_size - 1) / batch_size));
  if (workers <= 1) {
    run_range(0, frames.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (frames.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = std::min<std::size_t>(w * chunk, frames.size());
      const std::size_t hi = std::min(lo + chunk, frames.size());
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return pred;
}

struct LossAcc {
  double loss = 0.0;
  double acc = 0.0;
};

LossAcc evaluate_loss_acc(const Model& m, const std::vector<Frame>& frames,
                          std::size_t batch_size) {
  std::vector<std::size_t> idx(frames.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t first = 0; first < frames.size(); first += batch_size) {
    const std::size_t last = std::min(first + batch_size, frames.size());
    Tensor batch, labels;
    make_batch(frames, idx, first, last, m.spec.num_classes, batch, labels);
    ModelCache<float> cache;
    forward_cached(m, batch, cache);
    const auto res = softmax_cross_entropy(cache.logits, labels);
    loss_sum += double(res.loss) * double(last - first);
    const std::size_t C = m.spec.num_classes;
    for (std::size_t b = 0; b < last - first; ++b) {
      const float* row = cache.logits.ptr() + b * C;
      const std::size_t p = std::max_element(row, row + C) - row;
      if (int(p) == frames[idx[first + b]].class_id) ++correct;
    }
  }
  return {loss_sum / double(frames.size()),
          double(correct) / double(frames.size())};
}

std::vector<Tensor> snapshot(const ParamStore& params) {
  std::vector<Tensor> vals;
  for (const auto& e : params) vals.push_back(e.value);
  return vals;
}

void restore(ParamStore& params, const std::vector<Tensor>& vals) {
  for (std::size_t i = 0; i < params.size(); ++i)
    params.entry(i).value = vals[i];
}

}  // namespace

Split split_dataset(const Dataset& d, const SplitSpec& spec) {
  if (std::fabs(spec.train_ratio + spec.val_ratio + spec.test_ratio - 1.0) >
      1e-9)
    throw ConfigError("split ratios must sum to 1");

  // Bucket frame indices per (class, snr) cell.
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < d.frames.size(); ++i)
    cells[{d.frames[i].class_id, d.frames[i].snr_db}].push_back(i);

  Split out;
  for (auto& [key, idx] : cells) {
    const std::size_t n = idx.size();
    if (n < 5)
      throw ConfigError("cell (class " + std::to_string(key.first) + ", snr " +
                        std::to_string(key.second) + ") has only " +
                        std::to_string(n) + " frames; need >= 5");
    Rng rng(mix_seed(spec.seed, std::uint64_t(key.first),
                     std::uint64_t(std::int64_t(key.second))));
    rng.shuffle(idx.begin(), idx.end());

    std::size_t n_train = std::size_t(std::floor(spec.train_ratio * n));
    std::size_t n_val = std::size_t(std::floor(spec.val_ratio * n));
    std::size_t n_test = std::size_t(std::floor(spec.test_ratio * n));
    // Remainder goes train-first, then val, then test.
    std::size_t rem = n - n_train - n_val - n_test;
    for (std::size_t* bucket : {&n_train, &n_val, &n_test}) {
      if (!rem) break;
      ++*bucket;
      --rem;
    }

    std::size_t p = 0;
    for (std::size_t i = 0; i < n_train; ++i) out.train.push_back(d.frames[idx[p++]]);
    for (std::size_t i = 0; i < n_val; ++i) out.val.push_back(d.frames[idx[p++]]);
    for (std::size_t i = 0; i < n_test; ++i) out.test.push_back(d.frames[idx[p++]]);
  }
  return out;
}

MetricsRecord train(Model& m, const std::vector<Frame>& train_set,
                    const std::vector<Frame>& val_set, const TrainConfig& cfg,
                    AdamState* optimizer_out, const AdamState* optimizer_in) {
  if (train_set.empty() || val_set.empty())
    throw ConfigError("train/val splits must be nonempty");
  for (const auto& f : train_set)
    if (f.iq.dim(1) != m.spec.frame_len)
      throw DimensionError("dataset frame length does not match model");

  AdamState opt;
  if (optimizer_in) {
    opt = *optimizer_in;
  } else {
    opt.lr = cfg.learning_rate;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.epsilon = cfg.epsilon;
  }

  Rng shuffle_rng(mix_seed(cfg.seed, fnv1a64("shuffle")));
  std::vector<std::size_t> idx(train_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  MetricsRecord rec;
  rec.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params = snapshot(m.params);
  std::size_t plateau = 0, stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(idx.begin(), idx.end());
    double loss_sum = 0.0;
    std::size_t correct = 0, step = 0;
    for (std::size_t first = 0; first < idx.size();
         first += cfg.batch_size, ++step) {
      const std::size_t last = std::min(first + cfg.batch_size, idx.size());
      Tensor batch, labels, probs;
      make_batch(train_set, idx, first, last, m.spec.num_classes, batch,
                 labels);
      const float loss = backward(m, batch, labels, &probs);
      if (!std::isfinite(loss))
        throw TrainingError("loss diverged at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      adam_step(m.params, opt);
      loss_sum += double(loss) * double(last - first);
      const std::size_t C = m.spec.num_classes;
      for (std::size_t b = 0; b < last - first; ++b) {
        const float* row = probs.ptr() + b * C;
        const std::size_t p = std::max_element(row, row + C) - row;
        if (int(p) == train_set[idx[first + b]].class_id) ++correct;
      }
    }

    const auto val = evaluate_loss_acc(m, val_set, cfg.batch_size);
    rec.epochs.push_back({epoch, opt.lr, loss_sum / double(idx.size()),
                          double(correct) / double(idx.size()), val.loss,
                          val.acc});

    if (val.loss < rec.best_val_loss - cfg.min_delta) {
      rec.best_val_loss = val.loss;
      rec.best_epoch = epoch;
      best_params = snapshot(m.params);
      plateau = 0;
      stale = 0;
    } else {
      ++plateau;
      ++stale;
      if (plateau >= cfg.plateau_patience) {
        opt.lr = std::max(opt.lr * cfg.plateau_factor, cfg.min_lr);
        plateau = 0;
      }
      if (stale >= cfg.early_stop_patience) break;
    }
  }

  restore(m.params, best_params);
  if (optimizer_out) *optimizer_out = std::move(opt);
  return rec;
}

MetricsRecord evaluate_per_snr(const Model& m,
                               const std::vector<Frame>& test) {
  if (test.empty()) throw ConfigError("test split is empty");
  const auto pred = predict_classes(m, test);

  std::map<int, SnrAccuracy> buckets;
  const std::size_t C = m.spec.num_classes;
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto& b = buckets[test[i].snr_db];
    if (b.confusion.empty()) {
      b.snr_db = test[i].snr_db;
      b.confusion.assign(C, std::vector<std::size_t>(C, 0));
    }
    b.confusion[std::size_t(test[i].class_id)][std::size_t(pred[i])]++;
    b.count++;
  }

  MetricsRecord rec;
  double sum = 0.0;
  for (auto& [snr, b] : buckets) {
    std::size_t diag = 0;
    for (std::size_t c = 0; c < C; ++c) diag += b.confusion[c][c];
    b.accuracy = double(diag) / double(b.count);
    sum += b.accuracy;
    rec.highest_accuracy = std::max(rec.highest_accuracy, b.accuracy);
    rec.per_snr.push_back(b);
  }
  rec.average_accuracy = sum / double(buckets.size());
  return rec;
}

double high_snr_accuracy(const MetricsRecord& metrics, int snr_threshold_db) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : metrics.per_snr) {
    if (b.snr_db >= snr_threshold_db) {
      sum += b.accuracy;
      ++n;
    }
  }
  return n ? sum / double(n) : 0.0;
}

SparsitySchedule default_schedule(double target_sparsity,
                                  std::size_t train_frames,
                                  const TrainConfig& cfg, long frequency) {
  const long steps_per_epoch =
      long((train_frames + cfg.batch_size - 1) / cfg.batch_size);
  const long total = steps_per_epoch * long(cfg.max_epochs);
  SparsitySchedule sched;
  sched.initial_sparsity = 0.0;
  sched.final_sparsity = target_sparsity;
  sched.start_step = 0;
  sched.frequency = std::min(frequency, total);
  sched.increments = total / sched.frequency;
  if (sched.increments < 1)
    throw ConfigError("pruning schedule does not fit in the training run");
  return sched;
}

PruneReport prune_finetune(Model& m, const std::vector<Frame>& train_set,
                           const SparsitySchedule& sched,
                           const TrainConfig& cfg) {
  sched.validate();
  if (train_set.empty()) throw ConfigError("train split is empty");
  const long steps_per_epoch =
      long((train_set.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * long(cfg.max_epochs);
  if (sched.end_step() > total_steps)
    throw ConfigError("pruning schedule extends beyond " +
                      std::to_string(total_steps) + " fine-tuning steps");

  AdamState opt;
  opt.lr = cfg.learning_rate;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.epsilon = cfg.epsilon;

  Rng shuffle_rng(mix_seed(cfg.seed, fnv1a64("prune-shuffle")));
  std::vector<std::size_t> idx(train_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  PruneReport report;
  auto on_grid = [&](long t) {
    return t >= sched.start_step && t <= sched.end_step() &&
           (t - sched.start_step) % sched.frequency == 0;
  };
  auto update_masks = [&](long t) {
    const double s_model = sparsity_at(sched, t);
    const double s_kernel = kernel_sparsity_for_target(m.params, s_model);
    apply_magnitude_masks(m.params, report.masks, s_kernel);
  };

  long t = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(idx.begin(), idx.end());
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < idx.size();
         first += cfg.batch_size, ++t) {
      if (on_grid(t)) update_masks(t);
      const std::size_t last = std::min(first + cfg.batch_size, idx.size());
      Tensor batch, labels;
      make_batch(train_set, idx, first, last, m.spec.num_classes, batch,
                 labels);
      const float loss = backward(m, batch, labels);
      if (!std::isfinite(loss))
        throw TrainingError("fine-tuning diverged at step " +
                            std::to_string(t));
      mask_grads(m.params, report.masks);
      adam_step(m.params, opt);
      enforce_masks(m.params, report.masks);
      loss_sum += double(loss) * double(last - first);
    }
    report.finetune_loss.push_back(loss_sum / double(idx.size()));
  }
  // The grid's endpoint coincides with the step counter after the final
  // minibatch; land the final sparsity exactly.
  if (on_grid(t)) update_masks(t);
  const double s_kernel =
      kernel_sparsity_for_target(m.params, sched.final_sparsity);
  apply_magnitude_masks(m.params, report.masks, s_kernel);

  report.steps_run = t;
  report.nnz_total = count_nnz(m.params, report.masks);
  for (const auto& e : m.params) {
    auto it = report.masks.masks.find(e.name);
    if (e.prunable && it != report.masks.masks.end()) {
      std::size_t nnz = 0;
      for (std::uint8_t v : it->second) nnz += v;
      report.nnz_per_tensor[e.name] = nnz;
    } else {
      report.nnz_per_tensor[e.name] = e.value.numel();
    }
  }
  return report;
}

AblationReport run_ablation(const Dataset& d, const TrainConfig& cfg,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 3)
    throw ConfigError("ablation needs at least 3 seeds");

  ModelSpec spec;
  spec.frame_len = d.manifest.frame_len;
  spec.num_classes = d.manifest.schemes.size();

  AblationReport report;
  double full_sum = 0.0, part3_sum = 0.0;
  for (std::uint64_t seed : seeds) {
    SplitSpec split_spec;
    split_spec.seed = seed;
    const Split split = split_dataset(d, split_spec);

    for (Variant variant : {Variant::full, Variant::part3_only}) {
      ModelSpec vs = spec;
      vs.variant = variant;
      Model m = build<float>(vs, seed);
      TrainConfig tc = cfg;
      tc.seed = seed;
      train(m, split.train, split.val, tc);
      const auto metrics = evaluate_per_snr(m, split.test);
      for (const auto& b : metrics.per_snr)
        report.rows.push_back({variant_name(variant), seed, b.snr_db,
                               b.accuracy, b.count});
      const double high = high_snr_accuracy(metrics, 0);
      (variant == Variant::full ? full_sum : part3_sum) += high;
    }
  }
  report.full_high_snr_mean = full_sum / double(seeds.size());
  report.part3_high_snr_mean = part3_sum / double(seeds.size());
  report.high_snr_gap =
      report.full_high_snr_mean - report.part3_high_snr_mean;
  return report;
}

double cluster_tightness(const Tensor& frame, unsigned k, std::uint64_t seed,
                         unsigned restarts) {
  if (frame.rank() != 2 || frame.dim(0) != 2)
    throw DimensionError("cluster_tightness expects a [2, L] frame");
  const std::size_t n = frame.dim(1);
  k = std::min<unsigned>(k, unsigned(n));
  const float* xi = frame.ptr();
  const float* xq = frame.ptr() + n;

  double best = std::numeric_limits<double>::infinity();
  for (unsigned r = 0; r < restarts; ++r) {
    Rng rng(mix_seed(seed, r));
    // Initial centers: k distinct samples.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    std::vector<double> ci(k), cq(k);
    for (unsigned c = 0; c < k; ++c) {
      ci[c] = xi[order[c]];
      cq[c] = xq[order[c]];
    }

    std::vector<unsigned> assign(n, 0);
    for (int iter = 0; iter < 25; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        double bd = std::numeric_limits<double>::infinity();
        unsigned bc = 0;
        for (unsigned c = 0; c < k; ++c) {
          const double di = xi[i] - ci[c], dq = xq[i] - cq[c];
          const double dist = di * di + dq * dq;
          if (dist < bd) {
            bd = dist;
            bc = c;
          }
        }
        if (assign[i] != bc) {
          assign[i] = bc;
          changed = true;
        }
      }
      std::vector<double> si(k, 0), sq(k, 0);
      std::vector<std::size_t> cnt(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        si[assign[i]] += xi[i];
        sq[assign[i]] += xq[i];
        cnt[assign[i]]++;
      }
      for (unsigned c = 0; c < k; ++c) {
        if (cnt[c]) {
          ci[c] = si[c] / double(cnt[c]);
          cq[c] = sq[c] / double(cnt[c]);
        }
      }
      if (!changed && iter > 0) break;
    }

    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double di = xi[i] - ci[assign[i]], dq = xq[i] - cq[assign[i]];
      mse += di * di + dq * dq;
    }
    best = std::min(best, mse / double(n));
  }
  return best;
}

TightnessSummary export_constellation(const Model& m,
                                      const std::vector<Frame>& frames,
                                      const std::string& path,
                                      unsigned cluster_k) {
  if (m.spec.variant != Variant::full)
    throw ConfigError("constellation export requires the full variant");
  if (frames.empty()) throw ConfigError("no frames given");

  auto os = open_csv(path);
  os << "frame_id,sample_index,I_in,Q_in,I_out,Q_out,phi_hat\n";

  TightnessSummary summary;
  const std::size_t L = m.spec.frame_len;
  std::vector<std::size_t> idx(frames.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  const std::size_t batch_size = 256;
  for (std::size_t first = 0; first < frames.size(); first += batch_size) {
    const std::size_t last = std::min(first + batch_size, frames.size());
    Tensor batch, labels;
    make_batch(frames, idx, first, last, m.spec.num_classes, batch, labels);
    const auto res = forward(m, batch);
    for (std::size_t b = 0; b < last - first; ++b) {
      const std::size_t fid = first + b;
      Tensor out({2, L});
      std::copy(res.transformed.data.begin() + b * 2 * L,
                res.transformed.data.begin() + (b + 1) * 2 * L,
                out.data.begin());
      const Tensor& in = frames[fid].iq;
      for (std::size_t l = 0; l < L; ++l) {
        os << fid << ',' << l << ',' << fmt(in.data[l]) << ','
           << fmt(in.data[L + l]) << ',' << fmt(out.data[l]) << ','
           << fmt(out.data[L + l]) << ',' << fmt(double(res.phi[b])) << '\n';
      }
      summary.tightness_in.push_back(
          cluster_tightness(in, cluster_k, mix_seed(0x7469676874ull, fid)));
      summary.tightness_out.push_back(
          cluster_tightness(out, cluster_k, mix_seed(0x7469676874ull, fid)));
    }
  }

  for (double v : summary.tightness_in) summary.mean_in += v;
  for (double v : summary.tightness_out) summary.mean_out += v;
  summary.mean_in /= double(summary.tightness_in.size());
  summary.mean_out /= double(summary.tightness_out.size());
  return summary;
}

void write_epochs_csv(const MetricsRecord& m, const std::string& path) {
  auto os = open_csv(path);
  os << "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : m.epochs)
    os << e.epoch << ',' << fmt(e.lr) << ',' << fmt(e.train_loss) << ','
       << fmt(e.train_acc) << ',' << fmt(e.val_loss) << ',' << fmt(e.val_acc)
       << '\n';
}

void write_snr_accuracy_csv(const MetricsRecord& m, const std::string& path) {
  auto os = open_csv(path);
  os << "snr_db,accuracy,n\n";
  for (const auto& b : m.per_snr)
    os << b.snr_db << ',' << fmt(b.accuracy) << ',' << b.count << '\n';
}

void write_confusion_csvs(const MetricsRecord& m,
                          const std::string& dir_prefix) {
  for (const auto& b : m.per_snr) {
    auto os = open_csv(dir_prefix + "confusion_" + std::to_string(b.snr_db) +
                       ".csv");
    os << "true_class";
    for (std::size_t c = 0; c < b.confusion.size(); ++c) os << ",pred_" << c;
    os << '\n';
    for (std::size_t r = 0; r < b.confusion.size(); ++r) {
      os << r;
      for (std::size_t c = 0; c < b.confusion.size(); ++c)
        os << ',' << b.confusion[r][c];
      os << '\n';
    }
  }
}

void write_ablation_csv(const AblationReport& r, const std::string& path) {
  auto os = open_csv(path);
  os << "variant,seed,snr_db,accuracy,n\n";
  for (const auto& row : r.rows)
    os << row.variant << ',' << row.seed << ',' << row.snr_db << ','
       << fmt(row.accuracy) << ',' << row.count << '\n';
}

void write_nnz_report_csv(const PruneReport& r, const std::string& path) {
  auto os = open_csv(path);
  os << "tensor,nnz\n";
  for (const auto& [name, nnz] : r.nnz_per_tensor)
    os << name << ',' << nnz << '\n';
  os << "total," << r.nnz_total << '\n';
}

}  // namespace amr
