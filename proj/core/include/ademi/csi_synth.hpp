#pragma once

#include <cstdint>
#include <vector>

#include "ademi/rng.hpp"
#include "ademi/tensor.hpp"

namespace ademi {

inline constexpr int kNumClasses = 6;

/// Multipath scene parameters for one synthetic capture setup.
/// Path 1 is static (zero Doppler); paths 2..num_paths carry the event's
/// Doppler track scaled by 1/(path-1).
struct SceneSpec {
  int num_devices = 3;
  int num_antennas = 3;
  int num_subcarriers = 30;
  int num_paths = 3;
  double sample_interval_s = 1e-3;
  double duration_s = 2.0;
  double carrier_freq_hz = 5.8e9;  // documentation only
  double static_path_gain = 1.0;
  double dynamic_path_gain = 1.0;
  double phase_error_std_rad = 0.5;  // std of the common timing phase error
  double noise_std = 0.05;           // complex noise with E[|n|^2] = noise_std^2

  int sample_count() const;
  double sample_rate_hz() const { return 1.0 / sample_interval_s; }
  void validate() const;
};

/// Instantaneous Doppler trajectory for one event, |f| <= 60 Hz.
struct DopplerTrack {
  int class_id = 0;
  double sample_interval_s = 0.0;
  std::vector<double> samples_hz;
};

/// Complex CSI for one device and one event, shape (time, antenna, subcarrier).
struct CsiTensor {
  CTensor data;
  int device_id = 0;
  int label = 0;
};

struct CsiEvent {
  std::vector<CsiTensor> views;  // one per device, indexed by device_id
  int label = 0;
};

struct LabeledCsiSet {
  std::vector<CsiEvent> events;
  std::uint64_t seed = 0;
};

/// Nominal (jitter-free) trajectory value of a class template at time t.
double template_freq(int class_id, double t, double duration_s);

/// Nominal modulation rate of a class template in Hz (repetitions of the
/// trajectory pattern per second; 0 for the monotone sweep).
double template_modulation_rate_hz(int class_id, double duration_s);

/// Sampled mean |f| of the nominal template, used by the separability check.
double template_mean_abs_freq_hz(int class_id, double duration_s, double sample_interval_s);

/// Class-parametric trajectory with amplitude and time-scale jitter <= 10%.
DopplerTrack gen_doppler_track(int class_id, double duration_s, double sample_interval_s,
                               Rng& rng);

/// Synthesizes one device view of an event. The timing phase error is drawn
/// once per (time, subcarrier) and applied identically to every antenna;
/// if phase_error_out is non-null it receives those draws (shape S x M).
CsiTensor synth_csi(const SceneSpec& scene, const DopplerTrack& track, int device_id, Rng& rng,
                    Tensor* phase_error_out = nullptr);

/// One event of the balanced dataset stream: label = event_index % 6, one
/// shared track, one view per device. make_dataset(seed) event e equals
/// synth_event(scene, e, seed).
CsiEvent synth_event(const SceneSpec& scene, int event_index, std::uint64_t dataset_seed);

/// Balanced labeled dataset: n_events events (divisible by 6), each with one
/// shared Doppler track realization and num_devices views.
LabeledCsiSet make_dataset(const SceneSpec& scene, int n_events, std::uint64_t seed);

}  // namespace ademi
