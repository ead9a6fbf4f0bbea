// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_PIPELINE_HPP
#define AMR_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "amr/adam.hpp"
#include "amr/datagen.hpp"
#include "amr/model.hpp"
#include "amr/pruning.hpp"

namespace amr {

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double plateau_factor = 0.5;        // LR multiplier on a plateau
  std::size_t plateau_patience = 5;   // epochs without val improvement
  std::size_t early_stop_patience = 50;
  double min_lr = 1e-6;
  double min_delta = 1e-6;  // strict val-loss improvement threshold
  std::uint64_t seed = 0;
};

struct SplitSpec {
  double train_ratio = 0.6;
  double val_ratio = 0.2;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<Frame> train, val, test;
};

/// Stratified per (class, snr) cell: floor-based allocation with the
/// remainder assigned train-first, selection shuffled by seed.
/// Requires at least 5 frames per cell.
Split split_dataset(const Dataset& d, const SplitSpec& spec);

struct EpochRecord {
  std::size_t epoch;
  double lr;
  double train_loss, train_acc;
  double val_loss, val_acc;
};

struct SnrAccuracy {
  int snr_db;
  double accuracy;
  std::size_t count;
  std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
};

struct MetricsRecord {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<SnrAccuracy> per_snr;
  double highest_accuracy = 0.0;  // max over SNR buckets
  double average_accuracy = 0.0;  // unweighted mean over buckets
};

/// Epoch loop with shuffled minibatches, plateau LR halving, early
/// stopping and best-checkpoint restore. The model is left at the
/// weights of the minimum-validation-loss epoch. `optimizer_out`, when
/// given, receives the final Adam state (for --resume);
/// `optimizer_in` restores a previous state before training.
MetricsRecord train(Model& m, const std::vector<Frame>& train_set,
                    const std::vector<Frame>& val_set, const TrainConfig& cfg,
                    AdamState* optimizer_out = nullptr,
                    const AdamState* optimizer_in = nullptr);

/// Accuracy and confusion per SNR bucket; empty buckets are skipped.
MetricsRecord evaluate_per_snr(const Model& m, const std::vector<Frame>& test);

/// Mean accuracy over buckets with snr >= threshold.
double high_snr_accuracy(const MetricsRecord& metrics, int snr_threshold_db);

/// Gradual magnitude pruning with fine-tuning: masks are recomputed on
/// the schedule grid and re-applied after every optimizer step.
/// `target_sparsity` counts against the total parameter count; biases
/// stay dense.
PruneReport prune_finetune(Model& m, const std::vector<Frame>& train_set,
                           const SparsitySchedule& sched,
                           const TrainConfig& cfg);

/// Convenience: schedule from a model-level target sparsity over
/// `epochs` of fine-tuning at the given mask update frequency.
SparsitySchedule default_schedule(double target_sparsity,
                                  std::size_t train_frames,
                                  const TrainConfig& cfg, long frequency);

// ---------------------------------------------------------------------------
// Ablation and constellation artifacts
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string variant;
  std::uint64_t seed;
  int snr_db;
  double accuracy;
  std::size_t count;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  double full_high_snr_mean = 0.0;   // mean accuracy, snr >= 0 dB
  double part3_high_snr_mean = 0.0;
  double high_snr_gap = 0.0;  // full - part3
};

/// Trains the full and part3_only variants on identical splits for each
/// seed and reports per-SNR accuracy for both. Needs >= 3 seeds.
AblationReport run_ablation(const Dataset& d, const TrainConfig& cfg,
                            const std::vector<std::uint64_t>& seeds);

struct TightnessSummary {
  std::vector<double> tightness_in;   // per frame
  std::vector<double> tightness_out;
  double mean_in = 0.0;
  double mean_out = 0.0;
};

/// Nearest-of-k-centers mean squared distance of a frame's I/Q samples;
/// k-means with the given restarts, deterministic per seed.
double cluster_tightness(const Tensor& frame, unsigned k,
                         std::uint64_t seed, unsigned restarts = 10);

/// Writes constellation.csv rows (frame_id, sample_index, I_in, Q_in,
/// I_out, Q_out, phi_hat) and returns per-frame tightness of the
/// transform inputs and outputs. Full variant only.
TightnessSummary export_constellation(const Model& m,
                                      const std::vector<Frame>& frames,
                                      const std::string& path,
                                      unsigned cluster_k = 4);

// CSV artifacts (UTF-8, header row first).
void write_epochs_csv(const MetricsRecord& m, const std::string& path);
void write_snr_accuracy_csv(const MetricsRecord& m, const std::string& path);
void write_confusion_csvs(const MetricsRecord& m,
                          const std::string& dir_prefix);
void write_ablation_csv(const AblationReport& r, const std::string& path);
void write_nnz_report_csv(const PruneReport& r, const std::string& path);

}  // namespace amr

#endif  // AMR_PIPELINE_HPP
