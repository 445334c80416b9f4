#include "ademi/csi_synth.hpp"

#include <algorithm>
#include <cmath>

#include "ademi/errors.hpp"

namespace ademi {
namespace {

constexpr double kMaxDopplerHz = 60.0;

double triangle_wave(double phase) {
  // Period 1, range [-1, 1], starts at 0 rising.
  double p = phase - std::floor(phase);
  if (p < 0.25) return 4.0 * p;
  if (p < 0.75) return 2.0 - 4.0 * p;
  return 4.0 * p - 4.0;
}

}  // namespace

int SceneSpec::sample_count() const {
  double ratio = duration_s / sample_interval_s;
  double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * std::max(1.0, ratio))
    throw DomainError("scene: duration must be a positive integer multiple of the sample interval");
  return static_cast<int>(rounded);
}

void SceneSpec::validate() const {
  if (num_devices < 1) throw DomainError("scene: need at least one device");
  if (num_antennas < 2) throw DomainError("scene: need at least two antennas");
  if (num_subcarriers < 1) throw DomainError("scene: need at least one subcarrier");
  if (num_paths < 2) throw DomainError("scene: need a static and at least one dynamic path");
  if (sample_interval_s <= 0) throw DomainError("scene: sample interval must be positive");
  if (duration_s <= 0) throw DomainError("scene: duration must be positive");
  if (static_path_gain < 0 || dynamic_path_gain < 0)
    throw DomainError("scene: gains must be non-negative");
  if (phase_error_std_rad < 0) throw DomainError("scene: phase error std must be non-negative");
  if (noise_std < 0) throw DomainError("scene: noise std must be non-negative");
  (void)sample_count();
}

double template_freq(int class_id, double t, double duration_s) {
  const double T = duration_s;
  switch (class_id) {
    case 0:  // push-pull: sinusoid
      return 40.0 * std::sin(2.0 * M_PI * 1.0 * t);
    case 1:  // sweep: linear chirp
      return 10.0 + 40.0 * std::clamp(t / T, 0.0, 1.0);
    case 2: {  // clap: two opposite-sign bursts
      const double sigma = 0.05 * T;
      const double b1 = (t - 0.3 * T) / sigma;
      const double b2 = (t - 0.7 * T) / sigma;
      return 50.0 * std::exp(-0.5 * b1 * b1) - 50.0 * std::exp(-0.5 * b2 * b2);
    }
    case 3:  // slide: constant with a sign flip at T/2
      return t < 0.5 * T ? 25.0 : -25.0;
    case 4:  // zig-zag: triangle wave
      return 35.0 * triangle_wave(2.0 * t);
    case 5: {  // draw N: three linear strokes
      const double seg = T / 3.0;
      double local = std::clamp(t, 0.0, T);
      int k = std::min(2, static_cast<int>(local / seg));
      double u = (local - k * seg) / seg;
      if (k == 1) return 50.0 - 35.0 * u;
      return 15.0 + 35.0 * u;
    }
    default:
      throw DomainError("template_freq: class id must be in 0..5");
  }
}

double template_modulation_rate_hz(int class_id, double duration_s) {
  const double T = duration_s;
  switch (class_id) {
    case 0:
      return 1.0;        // sinusoid rate
    case 1:
      return 0.0;        // monotone sweep, no repetition
    case 2:
      return 2.0 / T;    // two bursts per track
    case 3:
      return 1.0 / T;    // one sign flip per track
    case 4:
      return 2.0;        // triangle rate
    case 5:
      return 1.5 / T;    // three strokes = 1.5 up-down cycles per track
    default:
      throw DomainError("template_modulation_rate_hz: class id must be in 0..5");
  }
}

double template_mean_abs_freq_hz(int class_id, double duration_s, double sample_interval_s) {
  int samples = static_cast<int>(std::round(duration_s / sample_interval_s));
  if (samples < 1) throw DomainError("template_mean_abs_freq_hz: empty grid");
  double acc = 0.0;
  for (int i = 0; i < samples; ++i)
    acc += std::abs(template_freq(class_id, i * sample_interval_s, duration_s));
  return acc / samples;
}

DopplerTrack gen_doppler_track(int class_id, double duration_s, double sample_interval_s,
                               Rng& rng) {
  if (class_id < 0 || class_id >= kNumClasses)
    throw DomainError("gen_doppler_track: class id must be in 0..5");
  if (duration_s <= 0 || sample_interval_s <= 0)
    throw DomainError("gen_doppler_track: duration and interval must be positive");
  double ratio = duration_s / sample_interval_s;
  double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * std::max(1.0, ratio))
    throw DomainError("gen_doppler_track: duration must be an integer number of samples");
  const int samples = static_cast<int>(rounded);

  // Amplitude and time-scale jitter, both within +/-10%. There is no additive
  // offset, so templates that start at zero stay exactly zero at t = 0.
  const double amp_scale = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
  const double time_scale = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);

  DopplerTrack track;
  track.class_id = class_id;
  track.sample_interval_s = sample_interval_s;
  track.samples_hz.resize(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    double warped = std::clamp(i * sample_interval_s * time_scale, 0.0, duration_s);
    double f = amp_scale * template_freq(class_id, warped, duration_s);
    track.samples_hz[static_cast<std::size_t>(i)] =
        std::clamp(f, -kMaxDopplerHz, kMaxDopplerHz);
  }
  return track;
}

CsiTensor synth_csi(const SceneSpec& scene, const DopplerTrack& track, int device_id, Rng& rng,
                    Tensor* phase_error_out) {
  const int S = scene.sample_count();
  if (static_cast<int>(track.samples_hz.size()) != S)
    throw DomainError("synth_csi: track length does not match the scene sample count");
  const int N = scene.num_antennas;
  const int M = scene.num_subcarriers;
  const int L = std::max(1, scene.num_paths);
  const double dt = scene.sample_interval_s;

  Rng path_rng = rng.fork(1);
  Rng eps_rng = rng.fork(2);
  Rng noise_rng = rng.fork(3);

  // Per-path quasi-static parameters: a delay phase for every path and a
  // gain draw for each dynamic path.
  std::vector<double> path_phase(static_cast<std::size_t>(L));
  std::vector<double> path_gain(static_cast<std::size_t>(L));
  path_gain[0] = scene.static_path_gain;
  for (int l = 0; l < L; ++l) {
    path_phase[static_cast<std::size_t>(l)] = path_rng.uniform(0.0, 2.0 * M_PI);
    if (l > 0)
      path_gain[static_cast<std::size_t>(l)] =
          path_rng.uniform(0.5, 1.0) * scene.dynamic_path_gain;
  }

  // Accumulated Doppler phase per dynamic path; path l >= 2 (1-based) carries
  // the track scaled by 1/(l-1). Summing all paths gives one time series that
  // every subcarrier rescales.
  std::vector<std::complex<double>> combined(static_cast<std::size_t>(S), {0.0, 0.0});
  for (int l = 0; l < L; ++l) {
    const double scale = l == 0 ? 0.0 : 1.0 / static_cast<double>(l);
    double phase = path_phase[static_cast<std::size_t>(l)];
    const double gain = path_gain[static_cast<std::size_t>(l)];
    for (int i = 0; i < S; ++i) {
      combined[static_cast<std::size_t>(i)] +=
          gain * std::complex<double>(std::cos(phase), std::sin(phase));
      phase += 2.0 * M_PI * scale * track.samples_hz[static_cast<std::size_t>(i)] * dt;
    }
  }

  CsiTensor out;
  out.device_id = device_id;
  out.label = track.class_id;
  out.data = CTensor({S, N, M});
  if (phase_error_out) *phase_error_out = Tensor({S, M});

  std::vector<double> subcarrier_scale(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m)
    subcarrier_scale[static_cast<std::size_t>(m)] =
        1.0 + 0.05 * static_cast<double>(m) / static_cast<double>(M);

  for (int i = 0; i < S; ++i) {
    for (int m = 0; m < M; ++m) {
      double eps = scene.phase_error_std_rad > 0 ? eps_rng.normal(0.0, scene.phase_error_std_rad)
                                                 : 0.0;
      if (phase_error_out) phase_error_out->at2(i, m) = eps;
      const std::complex<double> rot(std::cos(eps), std::sin(eps));
      const std::complex<double> base =
          combined[static_cast<std::size_t>(i)] * subcarrier_scale[static_cast<std::size_t>(m)] *
          rot;
      for (int a = 0; a < N; ++a) {
        std::complex<double> noise =
            scene.noise_std > 0 ? scene.noise_std * noise_rng.cnormal()
                                : std::complex<double>{0.0, 0.0};
        out.data.at3(i, a, m) = base + noise;
      }
    }
  }
  return out;
}

CsiEvent synth_event(const SceneSpec& scene, int event_index, std::uint64_t dataset_seed) {
  const int label = event_index % kNumClasses;
  Rng ev = Rng(dataset_seed).fork(1000003ULL * static_cast<std::uint64_t>(event_index) + 17ULL);
  Rng track_rng = ev.fork(0);
  DopplerTrack track =
      gen_doppler_track(label, scene.duration_s, scene.sample_interval_s, track_rng);
  CsiEvent event;
  event.label = label;
  event.views.reserve(static_cast<std::size_t>(scene.num_devices));
  for (int k = 0; k < scene.num_devices; ++k) {
    Rng dev_rng = ev.fork(100ULL + static_cast<std::uint64_t>(k));
    event.views.push_back(synth_csi(scene, track, k, dev_rng));
  }
  return event;
}

LabeledCsiSet make_dataset(const SceneSpec& scene, int n_events, std::uint64_t seed) {
  scene.validate();
  if (n_events < 1 || n_events % kNumClasses != 0)
    throw DomainError("make_dataset: event count must be a positive multiple of 6");

  LabeledCsiSet set;
  set.seed = seed;
  set.events.resize(static_cast<std::size_t>(n_events));
  for (int e = 0; e < n_events; ++e)
    set.events[static_cast<std::size_t>(e)] = synth_event(scene, e, seed);
  return set;
}

}  // namespace ademi
