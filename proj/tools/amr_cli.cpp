// SPDX-License-Identifier: Apache-2.0
//
// amr: synth / train / prune / eval / ablate / constellation.
// Exit codes: 0 success, 2 usage or configuration, 3 data format,
// 4 numeric or training failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "amr/checkpoint.hpp"
#include "amr/dataset_io.hpp"
#include "amr/errors.hpp"
#include "amr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunManifest {
  std::string subcommand;
  json flags = json::object();
  std::vector<std::uint64_t> seeds;
  json paths = json::object();
  std::string version = kVersion;
  std::uint64_t dataset_manifest_hash = 0;

  void write(const std::string& path) const {
    json j;
    j["subcommand"] = subcommand;
    j["flags"] = flags;
    j["seeds"] = seeds;
    j["paths"] = paths;
    j["version"] = version;
    j["dataset_manifest_hash"] = dataset_manifest_hash;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw amr::InputError("cannot open for writing: " + path);
    os << j.dump(2) << '\n';
  }
};

amr::Dataset load_data(const std::string& path) {
  return amr::read_dataset(path);
}

amr::ModelSpec spec_for(const amr::Dataset& d, amr::Variant variant) {
  amr::ModelSpec spec;
  spec.frame_len = d.manifest.frame_len;
  spec.num_classes = d.manifest.schemes.size();
  spec.variant = variant;
  return spec;
}

void write_eval_artifacts(const amr::Model& m,
                          const std::vector<amr::Frame>& test,
                          const std::string& out_dir) {
  const auto metrics = amr::evaluate_per_snr(m, test);
  amr::write_snr_accuracy_csv(metrics, out_dir + "/snr_accuracy.csv");
  amr::write_confusion_csvs(metrics, out_dir + "/");
  std::cout << "highest accuracy " << metrics.highest_accuracy
            << ", average accuracy " << metrics.average_accuracy << '\n';
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::vector<std::string>& schemes,
              std::size_t frames_per_cell, int snr_min, int snr_max,
              int snr_step, std::size_t length, std::uint64_t seed,
              const std::string& out) {
  if (length != 128 && length != 1024)
    throw amr::ConfigError("--length must be 128 or 1024");
  if (snr_step <= 0 || snr_max < snr_min)
    throw amr::ConfigError("bad SNR range");

  amr::DatasetManifest mf;
  mf.schemes = schemes;
  mf.frame_len = length;
  for (int s = snr_min; s <= snr_max; s += snr_step) mf.snrs_db.push_back(s);
  mf.frames_per_cell = frames_per_cell;
  mf.seed = seed;

  const amr::Dataset d = amr::synth_dataset(mf);
  amr::write_dataset(d, out);

  RunManifest rm;
  rm.subcommand = "synth";
  rm.flags = {{"schemes", schemes},     {"frames_per_cell", frames_per_cell},
              {"snr_min", snr_min},     {"snr_max", snr_max},
              {"snr_step", snr_step},   {"length", length}};
  rm.seeds = {seed};
  rm.paths = {{"out", out}};
  rm.dataset_manifest_hash = amr::manifest_hash(mf);
  rm.write(out + ".run.json");

  std::cout << amr::manifest_to_json(mf) << '\n';
  return 0;
}

int cmd_train(const std::string& data, const std::string& variant_name_str,
              std::uint64_t seed, const std::string& out_dir,
              const std::string& resume, std::size_t epochs,
              std::size_t batch, double lr) {
  const amr::Dataset d = load_data(data);
  const amr::Variant variant = amr::variant_from_name(variant_name_str);
  const amr::ModelSpec spec = spec_for(d, variant);

  amr::SplitSpec split_spec;
  split_spec.seed = seed;
  const amr::Split split = amr::split_dataset(d, split_spec);

  amr::TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.batch_size = batch;
  cfg.learning_rate = lr;
  cfg.seed = seed;

  amr::Model m = amr::build<float>(spec, seed);
  amr::AdamState opt;
  const amr::AdamState* opt_in = nullptr;
  amr::AdamState resumed;
  if (!resume.empty()) {
    auto ck = amr::load_checkpoint(resume, spec);
    m = std::move(ck.model);
    if (ck.optimizer) {
      resumed = std::move(*ck.optimizer);
      opt_in = &resumed;
    }
  }

  fs::create_directories(out_dir);
  const auto metrics = amr::train(m, split.train, split.val, cfg, &opt, opt_in);
  amr::save_checkpoint(out_dir + "/best.pcgd", m, &opt);
  amr::write_epochs_csv(metrics, out_dir + "/epochs.csv");
  write_eval_artifacts(m, split.test, out_dir);

  RunManifest rm;
  rm.subcommand = "train";
  rm.flags = {{"variant", variant_name_str}, {"epochs", epochs},
              {"batch", batch},              {"lr", lr},
              {"resume", resume}};
  rm.seeds = {seed};
  rm.paths = {{"data", data}, {"out_dir", out_dir}};
  rm.dataset_manifest_hash = amr::manifest_hash(d.manifest);
  rm.write(out_dir + "/run_manifest.json");
  return 0;
}

int cmd_prune(const std::string& checkpoint, const std::string& data,
              double sparsity, std::size_t epochs, std::size_t batch,
              long prune_freq, std::uint64_t seed, const std::string& out_dir) {
  if (!(sparsity > 0.0 && sparsity < 1.0))
    throw amr::ConfigError("--sparsity must be in (0, 1)");
  const amr::Dataset d = load_data(data);
  auto ck = amr::load_checkpoint(checkpoint);
  amr::Model m = std::move(ck.model);
  if (m.spec.frame_len != d.manifest.frame_len ||
      m.spec.num_classes != d.manifest.schemes.size())
    throw amr::ConfigError("checkpoint does not match dataset dimensions");

  amr::SplitSpec split_spec;
  split_spec.seed = seed;
  const amr::Split split = amr::split_dataset(d, split_spec);

  amr::TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.batch_size = batch;
  cfg.seed = seed;

  const auto sched =
      amr::default_schedule(sparsity, split.train.size(), cfg, prune_freq);
  const auto report = amr::prune_finetune(m, split.train, sched, cfg);
  std::cout << "steps " << report.steps_run << ", total NNZ "
            << report.nnz_total << '\n';

  fs::create_directories(out_dir);
  amr::save_checkpoint(out_dir + "/pruned.pcgd", m, nullptr, &report.masks);
  amr::write_nnz_report_csv(report, out_dir + "/nnz_report.csv");
  write_eval_artifacts(m, split.test, out_dir);

  RunManifest rm;
  rm.subcommand = "prune";
  rm.flags = {{"sparsity", sparsity},   {"epochs", epochs},
              {"batch", batch},         {"prune_freq", prune_freq}};
  rm.seeds = {seed};
  rm.paths = {{"checkpoint", checkpoint}, {"data", data}, {"out_dir", out_dir}};
  rm.dataset_manifest_hash = amr::manifest_hash(d.manifest);
  rm.write(out_dir + "/run_manifest.json");
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data,
             std::uint64_t seed, const std::string& out_dir) {
  const amr::Dataset d = load_data(data);
  auto ck = amr::load_checkpoint(checkpoint);
  if (ck.model.spec.frame_len != d.manifest.frame_len ||
      ck.model.spec.num_classes != d.manifest.schemes.size())
    throw amr::ConfigError("checkpoint does not match dataset dimensions");

  amr::SplitSpec split_spec;
  split_spec.seed = seed;
  const amr::Split split = amr::split_dataset(d, split_spec);

  fs::create_directories(out_dir);
  write_eval_artifacts(ck.model, split.test, out_dir);

  RunManifest rm;
  rm.subcommand = "eval";
  rm.seeds = {seed};
  rm.paths = {{"checkpoint", checkpoint}, {"data", data}, {"out_dir", out_dir}};
  rm.dataset_manifest_hash = amr::manifest_hash(d.manifest);
  rm.write(out_dir + "/run_manifest.json");
  return 0;
}

int cmd_ablate(const std::string& data, std::size_t num_seeds,
               std::uint64_t seed, std::size_t epochs, std::size_t batch,
               const std::string& out_dir) {
  const amr::Dataset d = load_data(data);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(seed + i);

  amr::TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.batch_size = batch;

  const auto report = amr::run_ablation(d, cfg, seeds);
  fs::create_directories(out_dir);
  amr::write_ablation_csv(report, out_dir + "/ablation.csv");
  std::cout << "full high-SNR mean " << report.full_high_snr_mean
            << ", part3 high-SNR mean " << report.part3_high_snr_mean
            << ", gap " << report.high_snr_gap << '\n';

  RunManifest rm;
  rm.subcommand = "ablate";
  rm.flags = {{"seeds", num_seeds}, {"epochs", epochs}, {"batch", batch}};
  rm.seeds = seeds;
  rm.paths = {{"data", data}, {"out_dir", out_dir}};
  rm.dataset_manifest_hash = amr::manifest_hash(d.manifest);
  rm.write(out_dir + "/run_manifest.json");
  return 0;
}

int cmd_constellation(const std::string& checkpoint, const std::string& data,
                      const std::string& scheme, int snr, std::size_t limit,
                      const std::string& out_dir) {
  const amr::Dataset d = load_data(data);
  auto ck = amr::load_checkpoint(checkpoint);

  int class_id = -1;
  for (std::size_t i = 0; i < d.manifest.schemes.size(); ++i)
    if (d.manifest.schemes[i] == scheme) class_id = int(i);
  if (class_id < 0)
    throw amr::ConfigError("scheme " + scheme + " not present in dataset");

  std::vector<amr::Frame> frames;
  for (const auto& f : d.frames) {
    if (f.class_id == class_id && f.snr_db == snr) frames.push_back(f);
    if (limit && frames.size() >= limit) break;
  }
  if (frames.empty())
    throw amr::ConfigError("no frames for the requested scheme/SNR cell");

  const unsigned k = amr::scheme_by_name(scheme).order;
  fs::create_directories(out_dir);
  const auto summary = amr::export_constellation(
      ck.model, frames, out_dir + "/constellation.csv", k);
  std::cout << "mean tightness in " << summary.mean_in << ", out "
            << summary.mean_out << '\n';

  RunManifest rm;
  rm.subcommand = "constellation";
  rm.flags = {{"scheme", scheme}, {"snr", snr}, {"limit", limit}};
  rm.paths = {{"checkpoint", checkpoint}, {"data", data}, {"out_dir", out_dir}};
  rm.dataset_manifest_hash = amr::manifest_hash(d.manifest);
  rm.write(out_dir + "/run_manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PET-CGDNN style automatic modulation recognition toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::vector<std::string> schemes = amr::default_scheme_names();
  std::size_t frames_per_cell = 100, length = 128;
  int snr_min = -20, snr_max = 18, snr_step = 2;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--schemes", schemes, "Modulation schemes");
  synth->add_option("--frames-per-cell", frames_per_cell,
                    "Frames per (scheme, SNR) cell");
  synth->add_option("--snr-min", snr_min, "Lowest SNR in dB");
  synth->add_option("--snr-max", snr_max, "Highest SNR in dB");
  synth->add_option("--snr-step", snr_step, "SNR step in dB");
  synth->add_option("--length", length, "Frame length (128 or 1024)");
  synth->add_option("--seed", synth_seed, "Dataset seed");
  synth->add_option("--out", synth_out, "Output .amrd path")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_data, train_variant = "full", train_out, train_resume;
  std::uint64_t train_seed = 0;
  std::size_t train_epochs = 200, train_batch = 128;
  double train_lr = 1e-3;
  train->add_option("--data", train_data, "Dataset .amrd")->required();
  train->add_option("--variant", train_variant, "full or part3");
  train->add_option("--seed", train_seed, "Split/init/shuffle seed");
  train->add_option("--out-dir", train_out, "Output directory")->required();
  train->add_option("--resume", train_resume, "Checkpoint to resume from");
  train->add_option("--epochs", train_epochs, "Maximum epochs");
  train->add_option("--batch", train_batch, "Minibatch size");
  train->add_option("--lr", train_lr, "Initial learning rate");

  // prune
  auto* prune = app.add_subcommand("prune", "Prune and fine-tune a model");
  std::string prune_ck, prune_data, prune_out;
  double prune_sparsity = 0.8;
  std::size_t prune_epochs = 5, prune_batch = 128;
  long prune_freq = 100;
  std::uint64_t prune_seed = 0;
  prune->add_option("--checkpoint", prune_ck, "Input .pcgd")->required();
  prune->add_option("--data", prune_data, "Dataset .amrd")->required();
  prune->add_option("--sparsity", prune_sparsity, "Target model sparsity");
  prune->add_option("--epochs", prune_epochs, "Fine-tuning epochs");
  prune->add_option("--batch", prune_batch, "Minibatch size");
  prune->add_option("--prune-freq", prune_freq, "Steps between mask updates");
  prune->add_option("--seed", prune_seed, "Split/shuffle seed");
  prune->add_option("--out-dir", prune_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint per SNR");
  std::string eval_ck, eval_data, eval_out;
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ck, "Input .pcgd")->required();
  eval->add_option("--data", eval_data, "Dataset .amrd")->required();
  eval->add_option("--seed", eval_seed, "Split seed");
  eval->add_option("--out-dir", eval_out, "Output directory")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Full vs part3-only ablation");
  std::string ablate_data, ablate_out;
  std::size_t ablate_seeds = 3, ablate_epochs = 10, ablate_batch = 128;
  std::uint64_t ablate_seed = 0;
  ablate->add_option("--data", ablate_data, "Dataset .amrd")->required();
  ablate->add_option("--seeds", ablate_seeds, "Number of seeds (>= 3)");
  ablate->add_option("--seed", ablate_seed, "Base seed");
  ablate->add_option("--epochs", ablate_epochs, "Maximum epochs per run");
  ablate->add_option("--batch", ablate_batch, "Minibatch size");
  ablate->add_option("--out-dir", ablate_out, "Output directory")->required();

  // constellation
  auto* con = app.add_subcommand("constellation",
                                 "Export transform input/output samples");
  std::string con_ck, con_data, con_scheme = "QPSK", con_out;
  int con_snr = 10;
  std::size_t con_limit = 0;
  con->add_option("--checkpoint", con_ck, "Input .pcgd")->required();
  con->add_option("--data", con_data, "Dataset .amrd")->required();
  con->add_option("--scheme", con_scheme, "Modulation scheme to plot");
  con->add_option("--snr", con_snr, "SNR bucket in dB");
  con->add_option("--limit", con_limit, "Max frames (0 = all)");
  con->add_option("--out-dir", con_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
    if (*synth)
      return cmd_synth(schemes, frames_per_cell, snr_min, snr_max, snr_step,
                       length, synth_seed, synth_out);
    if (*train)
      return cmd_train(train_data, train_variant, train_seed, train_out,
                       train_resume, train_epochs, train_batch, train_lr);
    if (*prune)
      return cmd_prune(prune_ck, prune_data, prune_sparsity, prune_epochs,
                       prune_batch, prune_freq, prune_seed, prune_out);
    if (*eval) return cmd_eval(eval_ck, eval_data, eval_seed, eval_out);
    if (*ablate)
      return cmd_ablate(ablate_data, ablate_seeds, ablate_seed, ablate_epochs,
                        ablate_batch, ablate_out);
    if (*con)
      return cmd_constellation(con_ck, con_data, con_scheme, con_snr,
                               con_limit, con_out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const amr::FormatError& e) {
    std::cerr << "data format error at byte " << e.offset() << ": " << e.what()
              << '\n';
    return 3;
  } catch (const amr::TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return 4;
  } catch (const amr::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const amr::InputError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const amr::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}
