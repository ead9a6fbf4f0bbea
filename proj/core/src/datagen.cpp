// SPDX-License-Identifier: Apache-2.0
#include "amr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amr/errors.hpp"
#include "amr/rng.hpp"

namespace amr {

namespace {

unsigned gray_code(unsigned v) { return v ^ (v >> 1); }

/// Odd levels {-(m-1), ..., -1, +1, ..., +(m-1)} scaled to unit mean
/// square, Gray-indexed.
std::vector<double> pam_levels(unsigned m) {
  std::vector<double> raw(m);
  double power = 0;
  for (unsigned i = 0; i < m; ++i) {
    raw[i] = -double(m - 1) + 2.0 * i;
    power += raw[i] * raw[i];
  }
  const double norm = std::sqrt(power / m);
  std::vector<double> levels(m);
  for (unsigned i = 0; i < m; ++i) levels[gray_code(i)] = raw[i] / norm;
  return levels;
}

std::vector<std::complex<double>> square_qam(unsigned side) {
  // Per-axis Gray mapping; average power of the full grid normalized
  // to 1 (e.g. /sqrt(10) for 16-QAM, /sqrt(42) for 64-QAM).
  std::vector<double> axis(side);
  for (unsigned i = 0; i < side; ++i) axis[i] = -double(side - 1) + 2.0 * i;
  double power = 0;
  for (double a : axis)
    for (double b : axis) power += a * a + b * b;
  const double norm = std::sqrt(power / (side * side));

  std::vector<std::complex<double>> pts(side * side);
  const unsigned bits = [&] {
    unsigned b = 0, s = side;
    while (s > 1) {
      s >>= 1;
      ++b;
    }
    return b;
  }();
  for (unsigned s = 0; s < side * side; ++s) {
    const unsigned hi = s >> bits, lo = s & (side - 1);
    unsigned gi = 0, gq = 0;
    // Invert the Gray code to find the axis position of each bit group.
    for (unsigned i = 0; i < side; ++i) {
      if (gray_code(i) == hi) gi = i;
      if (gray_code(i) == lo) gq = i;
    }
    pts[s] = {axis[gi] / norm, axis[gq] / norm};
  }
  return pts;
}

// Gaussian frequency pulse for GFSK, BT = 0.35, truncated to three
// symbol periods, normalized so one symbol contributes a total phase of
// pi * h.
std::vector<double> gfsk_pulse(unsigned sps, double h) {
  const double bt = 0.35;
  const unsigned span = 3 * sps;
  std::vector<double> g(span);
  const double alpha = 2.0 * M_PI * bt / std::sqrt(std::log(2.0)) / sps;
  double sum = 0;
  for (unsigned n = 0; n < span; ++n) {
    const double t = double(n) - double(span - 1) / 2.0;
    const double a = alpha * (t + sps / 2.0) / std::sqrt(2.0);
    const double b = alpha * (t - sps / 2.0) / std::sqrt(2.0);
    g[n] = 0.5 * (std::erf(a) - std::erf(b));
    sum += g[n];
  }
  for (double& v : g) v *= M_PI * h / sum;
  return g;
}

std::vector<double> rrc_taps(unsigned sps, double beta, unsigned span_syms) {
  const int half = int(span_syms * sps) / 2;
  std::vector<double> taps(2 * half + 1);
  for (int i = -half; i <= half; ++i) {
    const double t = double(i) / sps;
    double v;
    if (i == 0) {
      v = 1.0 - beta + 4.0 * beta / M_PI;
    } else if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-9) {
      v = beta / std::sqrt(2.0) *
          ((1 + 2 / M_PI) * std::sin(M_PI / (4 * beta)) +
           (1 - 2 / M_PI) * std::cos(M_PI / (4 * beta)));
    } else {
      v = (std::sin(M_PI * t * (1 - beta)) +
           4 * beta * t * std::cos(M_PI * t * (1 + beta))) /
          (M_PI * t * (1 - 16 * beta * beta * t * t));
    }
    taps[i + half] = v;
  }
  return taps;
}

}  // namespace

std::vector<std::complex<double>> ModulationScheme::constellation() const {
  if (is_fsk) return {};
  if (name == "BPSK") return {{1, 0}, {-1, 0}};
  if (name == "QPSK") {
    const double s = 1.0 / std::sqrt(2.0);
    std::vector<std::complex<double>> pts(4);
    for (unsigned v = 0; v < 4; ++v)
      pts[v] = {s * (1.0 - 2.0 * ((v >> 1) & 1)), s * (1.0 - 2.0 * (v & 1))};
    return pts;
  }
  if (name == "8PSK") {
    std::vector<std::complex<double>> pts(8);
    for (unsigned v = 0; v < 8; ++v) {
      const double ang = 2.0 * M_PI * gray_code(v) / 8.0;
      pts[v] = {std::cos(ang), std::sin(ang)};
    }
    return pts;
  }
  if (name == "PAM4") {
    auto levels = pam_levels(4);
    std::vector<std::complex<double>> pts(4);
    for (unsigned v = 0; v < 4; ++v) pts[v] = {levels[v], 0.0};
    return pts;
  }
  if (name == "QAM16") return square_qam(4);
  if (name == "QAM64") return square_qam(8);
  throw ConfigError("no constellation for scheme " + name);
}

ModulationScheme scheme_by_name(const std::string& name,
                                unsigned samples_per_symbol,
                                PulseShape pulse) {
  ModulationScheme s;
  s.name = name;
  s.samples_per_symbol = samples_per_symbol;
  s.pulse = pulse;
  if (name == "BPSK") {
    s.order = 2;
  } else if (name == "QPSK" || name == "PAM4") {
    s.order = 4;
  } else if (name == "8PSK") {
    s.order = 8;
  } else if (name == "QAM16") {
    s.order = 16;
  } else if (name == "QAM64") {
    s.order = 64;
  } else if (name == "GFSK" || name == "CPFSK") {
    s.order = 2;
    s.is_fsk = true;
  } else {
    throw ConfigError("unknown modulation scheme: " + name);
  }
  return s;
}

const std::vector<std::string>& default_scheme_names() {
  static const std::vector<std::string> names = {"BPSK", "QPSK",  "8PSK",
                                                 "PAM4", "QAM16", "QAM64",
                                                 "GFSK", "CPFSK"};
  return names;
}

std::vector<std::complex<float>> modulate(const ModulationScheme& scheme,
                                          const std::vector<unsigned>& symbols,
                                          std::uint64_t /*rng_seed*/) {
  for (unsigned v : symbols) {
    if (v >= scheme.order)
      throw InputError("symbol value " + std::to_string(v) +
                       " exceeds scheme order " +
                       std::to_string(scheme.order));
  }
  const unsigned sps = scheme.samples_per_symbol;
  const std::size_t len = symbols.size() * sps;
  std::vector<std::complex<float>> x(len);

  if (scheme.is_fsk) {
    const double h = 0.5;
    std::vector<double> freq(len, 0.0);
    if (scheme.name == "GFSK") {
      const auto pulse = gfsk_pulse(sps, h);
      const int offset = int(pulse.size() - sps) / 2;
      for (std::size_t k = 0; k < symbols.size(); ++k) {
        const double a = symbols[k] ? 1.0 : -1.0;
        for (std::size_t n = 0; n < pulse.size(); ++n) {
          const long idx = long(k * sps + n) - offset;
          if (idx >= 0 && idx < long(len)) freq[idx] += a * pulse[n];
        }
      }
    } else {  // CPFSK: rectangular frequency pulse
      for (std::size_t k = 0; k < symbols.size(); ++k) {
        const double a = symbols[k] ? 1.0 : -1.0;
        for (unsigned n = 0; n < sps; ++n)
          freq[k * sps + n] = a * M_PI * h / sps;
      }
    }
    double theta = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      theta += freq[n];
      x[n] = {float(std::cos(theta)), float(std::sin(theta))};
    }
    return x;
  }

  const auto pts = scheme.constellation();
  if (scheme.pulse == PulseShape::rectangular) {
    for (std::size_t k = 0; k < symbols.size(); ++k) {
      const auto p = pts[symbols[k]];
      for (unsigned n = 0; n < sps; ++n)
        x[k * sps + n] = {float(p.real()), float(p.imag())};
    }
    return x;
  }

  // Root-raised-cosine shaping, roll-off 0.35, 8-symbol span, scaled
  // back to unit average power.
  const auto taps = rrc_taps(sps, 0.35, 8);
  double tap_energy = 0;
  for (double t : taps) tap_energy += t * t;
  const double scale = std::sqrt(double(sps) / tap_energy);
  const int half = int(taps.size()) / 2;
  for (std::size_t n = 0; n < len; ++n) {
    std::complex<double> acc{0, 0};
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const long m = long(n) - (long(t) - half);
      if (m < 0 || m % sps != 0) continue;
      const std::size_t k = std::size_t(m) / sps;
      if (k < symbols.size()) acc += taps[t] * pts[symbols[k]];
    }
    acc *= scale;
    x[n] = {float(acc.real()), float(acc.imag())};
  }
  return x;
}

Tensor apply_channel(const std::vector<std::complex<float>>& x,
                     const ChannelParams& ch, std::uint64_t rng_seed) {
  const std::size_t len = x.size();
  Tensor frame({2, len});
  std::vector<std::complex<double>> faded(len);
  double signal_power = 0;
  for (std::size_t l = 0; l < len; ++l) {
    // Eq. index starts at 1: y[l] = A e^{j(w l + phi)} x[l] + n[l].
    const double ang = ch.freq_offset * double(l + 1) + ch.phase_offset;
    const std::complex<double> rot{std::cos(ang), std::sin(ang)};
    faded[l] = ch.gain * rot * std::complex<double>(x[l]);
    signal_power += std::norm(faded[l]);
  }
  signal_power /= double(len);

  double sigma = 0;
  if (std::isfinite(ch.snr_db))
    sigma = std::sqrt(signal_power * std::pow(10.0, -ch.snr_db / 10.0) / 2.0);

  Rng rng(rng_seed);
  for (std::size_t l = 0; l < len; ++l) {
    double re = faded[l].real(), im = faded[l].imag();
    if (sigma > 0) {
      re += sigma * rng.normal();
      im += sigma * rng.normal();
    }
    frame.data[l] = float(re);
    frame.data[len + l] = float(im);
  }
  return frame;
}

Dataset synth_dataset(const DatasetManifest& config) {
  if (config.frames_per_cell == 0)
    throw ConfigError("zero frames per cell requested");
  if (config.schemes.empty()) throw ConfigError("no modulation schemes given");
  if (config.snrs_db.empty()) throw ConfigError("no SNR levels given");

  const PulseShape pulse = config.pulse == "rrc"
                               ? PulseShape::root_raised_cosine
                               : PulseShape::rectangular;
  std::vector<ModulationScheme> schemes;
  for (const auto& name : config.schemes)
    schemes.push_back(
        scheme_by_name(name, config.samples_per_symbol, pulse));

  Dataset d;
  d.manifest = config;
  d.frames.reserve(config.total_frames());

  const std::size_t L = config.frame_len;
  for (std::size_t ci = 0; ci < schemes.size(); ++ci) {
    const auto& scheme = schemes[ci];
    const std::size_t nsym =
        (L + scheme.samples_per_symbol - 1) / scheme.samples_per_symbol;
    for (std::size_t si = 0; si < config.snrs_db.size(); ++si) {
      for (std::size_t fi = 0; fi < config.frames_per_cell; ++fi) {
        const std::uint64_t fs = mix_seed(config.seed, ci, si, fi);
        Rng rng(fs);
        std::vector<unsigned> symbols(nsym);
        for (auto& s : symbols)
          s = unsigned(rng.uniform_index(scheme.order));
        auto x = modulate(scheme, symbols, fs);
        x.resize(L);

        Frame f;
        f.class_id = int(ci);
        f.snr_db = config.snrs_db[si];
        f.channel.gain = 1.0;
        f.channel.phase_offset = rng.uniform(-M_PI, M_PI);
        f.channel.freq_offset =
            rng.uniform(-config.omega_max, config.omega_max);
        f.channel.snr_db = double(f.snr_db);
        f.iq = apply_channel(x, f.channel, mix_seed(fs, 0x6e6f697365ull));
        d.frames.push_back(std::move(f));
      }
    }
  }
  return d;
}

}  // namespace amr
