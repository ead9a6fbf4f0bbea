// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_DATAGEN_HPP
#define AMR_DATAGEN_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "amr/tensor.hpp"

namespace amr {

// Synthetic I/Q frame generator. The channel applies
//   y[l] = A * e^{j(w*l + phi)} * x[l] + n[l]
// with complex white Gaussian noise scaled to the requested SNR against
// the faded signal power E|A*x|^2.

enum class PulseShape { rectangular, root_raised_cosine };

struct ModulationScheme {
  std::string name;                 // BPSK, QPSK, 8PSK, PAM4, QAM16,
                                    // QAM64, GFSK, CPFSK
  unsigned order = 2;               // constellation / alphabet size
  unsigned samples_per_symbol = 8;
  bool is_fsk = false;
  PulseShape pulse = PulseShape::rectangular;

  /// Unit-average-power constellation; empty for FSK schemes.
  std::vector<std::complex<double>> constellation() const;
};

/// Scheme by name; throws ConfigError for unknown names.
ModulationScheme scheme_by_name(const std::string& name,
                                unsigned samples_per_symbol = 8,
                                PulseShape pulse = PulseShape::rectangular);

const std::vector<std::string>& default_scheme_names();

/// Baseband modulation of a symbol sequence. Output length is
/// symbols.size() * samples_per_symbol. Symbol values must be below the
/// scheme order.
std::vector<std::complex<float>> modulate(const ModulationScheme& scheme,
                                          const std::vector<unsigned>& symbols,
                                          std::uint64_t rng_seed = 0);

struct ChannelParams {
  double gain = 1.0;          // A, constant across the frame
  double freq_offset = 0.0;   // w, radians per sample
  double phase_offset = 0.0;  // phi, radians
  double snr_db = 0.0;        // +inf means noiseless
};

/// Applies the channel model and packs the result as a [2, L] frame
/// (I row then Q row).
Tensor apply_channel(const std::vector<std::complex<float>>& x,
                     const ChannelParams& ch, std::uint64_t rng_seed);

struct Frame {
  Tensor iq;  // [2, L]
  int class_id = 0;
  int snr_db = 0;
  ChannelParams channel;  // provenance; not serialized
};

struct DatasetManifest {
  std::vector<std::string> schemes;
  std::size_t frame_len = 128;
  std::vector<int> snrs_db;
  std::size_t frames_per_cell = 100;
  std::uint64_t seed = 0;
  double omega_max = 0.01;  // max |freq offset| rad/sample
  unsigned samples_per_symbol = 8;
  std::string pulse = "rectangular";

  std::size_t total_frames() const {
    return schemes.size() * snrs_db.size() * frames_per_cell;
  }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Frame> frames;
};

/// Generates the full (scheme x SNR) grid. Frame i is derived from a
/// counter-based per-frame seed, so the result is independent of
/// generation order and bit-reproducible for a given manifest seed.
Dataset synth_dataset(const DatasetManifest& config);

}  // namespace amr

#endif  // AMR_DATAGEN_HPP
