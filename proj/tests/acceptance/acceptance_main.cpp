// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Usage: acceptance <amr-cli-path> <workdir>
// Runs each criterion, prints one PASS/FAIL line per criterion and
// exits nonzero if any failed.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "amr/checkpoint.hpp"
#include "amr/dataset_io.hpp"
#include "amr/gradcheck.hpp"
#include "amr/model.hpp"
#include "amr/pet.hpp"
#include "amr/pipeline.hpp"
#include "amr/pruning.hpp"

namespace fs = std::filesystem;
using namespace amr;

namespace {

// Training budgets chosen so the full gate runs in tens of minutes on a
// single desktop core; criterion 7 allows up to 50 epochs.
constexpr int kTrainEpochs = 12;
constexpr int kAblateEpochs = 8;

std::string g_cli;
std::string g_work;
int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": "
            << detail << std::endl;
  if (!ok) ++g_failures;
}

int run(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >> " + g_work +
                          "/cli_log.txt 2>&1";
  return std::system(cmd.c_str());
}

bool same_bytes(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::string ca((std::istreambuf_iterator<char>(fa)),
                 std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)),
                 std::istreambuf_iterator<char>());
  return ca == cb;
}

/// Reads snr_accuracy.csv into (snr -> accuracy).
std::map<int, double> read_snr_csv(const std::string& path) {
  std::map<int, double> out;
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::string snr, acc;
    std::getline(ss, snr, ',');
    std::getline(ss, acc, ',');
    if (!snr.empty()) out[std::stoi(snr)] = std::stod(acc);
  }
  return out;
}

double mean_accuracy(const std::map<int, double>& per_snr, int min_snr) {
  double sum = 0;
  int n = 0;
  for (const auto& [snr, acc] : per_snr)
    if (snr >= min_snr) {
      sum += acc;
      ++n;
    }
  return n ? sum / n : 0.0;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const bool ok = count_params({128, 11, Variant::full}) == 71871 &&
                  count_params({128, 10, Variant::full}) == 71742 &&
                  count_params({1024, 24, Variant::full}) == 75340;
  report(1, ok, "parameter counts 71,871 / 71,742 / 75,340 (exact)");
}

void criterion_2() {
  SparsitySchedule s;
  s.initial_sparsity = 0.0;
  s.final_sparsity = 0.8;
  s.start_step = 0;
  s.frequency = 10;
  s.increments = 8;
  bool ok = sparsity_at(s, 0) == 0.0 && sparsity_at(s, 80) == 0.8 &&
            std::fabs(sparsity_at(s, 40) - 0.7) < 1e-12;
  double prev = -1;
  for (long t = 0; t <= 80; t += 10) {
    const double v = sparsity_at(s, t);
    ok = ok && v >= prev;
    prev = v;
  }
  report(2, ok, "sparsity schedule endpoints exact, midpoint 0.7, monotone");
}

void criterion_3() {
  // Model-level sparsity counts zeros against the total parameter count
  // with biases left dense; the published table shows (1-s) * 71,871
  // rounded to thousands (35,936 / 14,374 / 7,187 / 3,594).
  bool ok = true;
  std::string detail = "NNZ at sparsity 0.5/0.8/0.9/0.95:";
  for (double s : {0.5, 0.8, 0.9, 0.95}) {
    Model m = build<float>({128, 11, Variant::full}, 1);
    MaskSet masks;
    apply_magnitude_masks(m.params, masks,
                          kernel_sparsity_for_target(m.params, s));
    const double nnz = double(count_nnz(m.params, masks));
    const double target = (1.0 - s) * 71871.0;
    ok = ok && std::fabs(nnz - target) / target <= 0.02;
    detail += " " + std::to_string(std::size_t(nnz));
  }
  report(3, ok, detail + " vs 35,936/14,374/7,187/3,594 within 2%");
}

void criterion_4() {
  Rng rng(4);
  bool ok = true;
  for (std::size_t L : {std::size_t{8}, std::size_t{16}}) {
    Tensor y({2, L});
    for (auto& v : y.data) v = float(rng.normal());

    ok = ok && transform_phase(y, 0.0f).data == y.data;  // exact identity

    const float phi = float(rng.uniform(-3.0, 3.0));
    const auto out = transform_phase(y, phi);
    for (std::size_t l = 0; l < L; ++l) {
      const double pin =
          double(y.data[l]) * y.data[l] + double(y.data[L + l]) * y.data[L + l];
      const double pout = double(out.data[l]) * out.data[l] +
                          double(out.data[L + l]) * out.data[L + l];
      ok = ok && std::fabs(pout - pin) <= 1e-5 * std::max(pin, 1.0);
    }

    const auto comp = transform_phase(transform_phase(y, 0.3f), phi);
    const auto direct = transform_phase(y, 0.3f + phi);
    const auto inv = transform_phase(out, -phi);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      ok = ok && std::fabs(double(comp.data[i]) - direct.data[i]) < 1e-5;
      ok = ok && std::fabs(double(inv.data[i]) - y.data[i]) < 1e-5;
    }

    // analytic grad_phi vs central differences
    Tensor up({2, L});
    for (auto& v : up.data) v = float(rng.normal());
    const auto g = pet_backward(y, phi, up);
    auto dot = [&](float p) {
      const auto o = transform_phase(y, p);
      double sum = 0;
      for (std::size_t i = 0; i < o.numel(); ++i)
        sum += double(o.data[i]) * up.data[i];
      return sum;
    };
    const double h = 1e-3;
    const double num = (dot(phi + float(h)) - dot(phi - float(h))) / (2 * h);
    const double denom =
        std::max({std::fabs(num), std::fabs(double(g.grad_phi)), 1.0});
    ok = ok && std::fabs(double(g.grad_phi) - num) / denom < 1e-3;
  }
  report(4, ok, "PET identity/isometry/composition/inversion/gradient");
}

void criterion_5() {
  const ModelSpec spec{16, 3, Variant::full};
  Tensor batch({2, 2, 16});
  Rng rng(5);
  for (auto& v : batch.data) v = float(rng.normal());
  Tensor labels({2, 3});
  labels.data[0] = 1.0f;
  labels.data[5] = 1.0f;

  Model m = build<float>(spec, 6);
  backward(m, batch, labels);
  auto f32 = [&]() {
    ModelCache<float> cache;
    forward_cached(m, batch, cache);
    return double(softmax_cross_entropy(cache.logits, labels).loss);
  };
  const double err32 =
      finite_difference_gradcheck<float>(f32, m.params, 1e-3, 24, 7);

  ModelT<double> md = m.cast<double>();
  const TensorT<double> b64 = batch.cast<double>();
  const TensorT<double> l64 = labels.cast<double>();
  backward(md, b64, l64);
  auto f64 = [&]() {
    ModelCache<double> cache;
    forward_cached(md, b64, cache);
    return double(softmax_cross_entropy(cache.logits, l64).loss);
  };
  const double err64 =
      finite_difference_gradcheck<double>(f64, md.params, 1e-6, 24, 7);

  report(5, err32 < 1e-2 && err64 < 1e-4,
         "end-to-end gradcheck: " + std::to_string(err32) +
             " (32-bit, <1e-2), " + std::to_string(err64) + " (64-bit, <1e-4)");
}

void criterion_6() {
  std::vector<std::complex<float>> x;
  Rng rng(6);
  for (int i = 0; i < 64; ++i)
    x.emplace_back(float(rng.normal()), float(rng.normal()));

  bool ok = true;
  for (float phi : {0.4f, -1.3f, 2.2f}) {
    ChannelParams ch{1.0, 0.0, double(phi),
                     std::numeric_limits<double>::infinity()};
    const Tensor y = apply_channel(x, ch, 1);
    const Tensor recovered = transform_phase(y, phi);
    for (std::size_t l = 0; l < x.size(); ++l) {
      ok = ok && std::fabs(double(recovered.data[l]) - x[l].real()) < 1e-5;
      ok = ok &&
           std::fabs(double(recovered.data[x.size() + l]) - x[l].imag()) < 1e-5;
    }
  }
  report(6, ok, "noiseless channel phase inverted by transform_phase");
}

bool criterion_7() {
  const std::string data = g_work + "/desk.amrd";
  const std::string out = g_work + "/train_full";
  if (run("synth --frames-per-cell 200 --seed 42 --out " + data) != 0) {
    report(7, false, "synth failed");
    return false;
  }
  if (run("train --data " + data + " --variant full --seed 42 --epochs " +
          std::to_string(kTrainEpochs) + " --out-dir " + out) != 0) {
    report(7, false, "training failed");
    return false;
  }
  const auto per_snr = read_snr_csv(out + "/snr_accuracy.csv");
  const double high = mean_accuracy(per_snr, 10);
  report(7, high >= 0.60,
         "desk-scale accuracy at SNR >= +10 dB: " + std::to_string(high) +
             " (floor 0.60, chance 0.125, " + std::to_string(kTrainEpochs) +
             " epochs)");
  return true;
}

void criterion_8() {
  const std::string data = g_work + "/desk.amrd";
  const std::string out = g_work + "/ablate";
  if (run("ablate --data " + data + " --seeds 3 --seed 1 --epochs " +
          std::to_string(kAblateEpochs) + " --out-dir " + out) != 0) {
    report(8, false, "ablation run failed");
    return;
  }
  // ablation.csv: variant,seed,snr_db,accuracy,n
  std::ifstream is(out + "/ablation.csv");
  std::string line;
  std::getline(is, line);
  std::map<std::string, std::pair<double, int>> acc;  // sum, n over snr >= 0
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::string variant, seed, snr, a, n;
    std::getline(ss, variant, ',');
    std::getline(ss, seed, ',');
    std::getline(ss, snr, ',');
    std::getline(ss, a, ',');
    if (std::stoi(snr) >= 0) {
      acc[variant].first += std::stod(a);
      acc[variant].second += 1;
    }
  }
  const double full = acc["full"].first / acc["full"].second;
  const double part3 = acc["part3_only"].first / acc["part3_only"].second;
  report(8, full >= part3,
         "high-SNR mean over 3 seeds: full " + std::to_string(full) +
             " vs part3_only " + std::to_string(part3) + " (gap " +
             std::to_string(full - part3) + ")");
}

void criterion_9() {
  // QPSK / +10 dB frames from the desk-scale dataset, trained full model.
  try {
    const Dataset d = read_dataset(g_work + "/desk.amrd");
    auto ck = load_checkpoint(g_work + "/train_full/best.pcgd");
    int qpsk = -1;
    for (std::size_t i = 0; i < d.manifest.schemes.size(); ++i)
      if (d.manifest.schemes[i] == "QPSK") qpsk = int(i);
    std::vector<Frame> frames;
    for (const auto& f : d.frames)
      if (f.class_id == qpsk && f.snr_db == 10) frames.push_back(f);
    const auto summary = export_constellation(
        ck.model, frames, g_work + "/constellation.csv", 4);
    report(9,
           frames.size() >= 100 && summary.mean_out <= summary.mean_in + 1e-9,
           "mean cluster tightness over " + std::to_string(frames.size()) +
               " frames: out " + std::to_string(summary.mean_out) +
               " <= in " + std::to_string(summary.mean_in));
  } catch (const std::exception& e) {
    report(9, false, std::string("constellation check failed: ") + e.what());
  }
}

void criterion_10() {
  const std::string data = g_work + "/desk.amrd";
  const std::string out = g_work + "/prune";
  if (run("prune --checkpoint " + g_work +
          "/train_full/best.pcgd --data " + data +
          " --sparsity 0.8 --epochs 5 --batch 128 --seed 42 --out-dir " +
          out) != 0) {
    report(10, false, "prune run failed");
    return;
  }
  const double base =
      mean_accuracy(read_snr_csv(g_work + "/train_full/snr_accuracy.csv"), 0);
  const double pruned = mean_accuracy(read_snr_csv(out + "/snr_accuracy.csv"), 0);
  report(10, base - pruned <= 0.05,
         "high-SNR accuracy unpruned " + std::to_string(base) +
             " vs pruned@0.8+finetune " + std::to_string(pruned) +
             " (allowed drop 0.05)");
}

void criterion_11() {
  const std::string d1 = g_work + "/det1.amrd";
  const std::string d2 = g_work + "/det2.amrd";
  bool ok = run("synth --schemes BPSK QPSK 8PSK --frames-per-cell 20 "
                "--snr-min 0 --snr-max 10 --snr-step 5 --seed 7 --out " +
                d1) == 0 &&
            run("synth --schemes BPSK QPSK 8PSK --frames-per-cell 20 "
                "--snr-min 0 --snr-max 10 --snr-step 5 --seed 7 --out " +
                d2) == 0 &&
            same_bytes(d1, d2);
  // identical invocation both times (same out-dir) so the run manifests
  // must match byte-for-byte too; the first run is moved aside in between
  const std::string det_out = g_work + "/det_train";
  for (int i = 1; i <= 2 && ok; ++i) {
    ok = run("train --data " + d1 + " --seed 7 --epochs 3 --out-dir " +
             det_out) == 0;
    if (ok) {
      fs::remove_all(det_out + std::to_string(i));
      fs::rename(det_out, det_out + std::to_string(i));
    }
  }
  ok = ok &&
       same_bytes(g_work + "/det_train1/best.pcgd",
                  g_work + "/det_train2/best.pcgd") &&
       same_bytes(g_work + "/det_train1/epochs.csv",
                  g_work + "/det_train2/epochs.csv") &&
       same_bytes(g_work + "/det_train1/snr_accuracy.csv",
                  g_work + "/det_train2/snr_accuracy.csv") &&
       same_bytes(g_work + "/det_train1/run_manifest.json",
                  g_work + "/det_train2/run_manifest.json");
  report(11, ok, "repeated CLI runs give bit-identical datasets, "
                 "checkpoints and CSVs");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <amr-cli-path> <workdir>\n";
    return 2;
  }
  g_cli = argv[1];
  g_work = argv[2];
  fs::create_directories(g_work);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  const bool trained = criterion_7();
  criterion_8();
  if (trained) {
    criterion_9();
    criterion_10();
  } else {
    report(9, false, "skipped: criterion 7 training unavailable");
    report(10, false, "skipped: criterion 7 training unavailable");
  }
  criterion_11();

  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                : std::to_string(g_failures) +
                                      " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
