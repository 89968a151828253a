#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "handshake/interaction.hpp"

namespace handshake {

enum class TorqueMode {
  MeanAbs,  // sum_i mean_t |tau_i|
  AbsMean,  // sum_i |mean_t tau_i|
};

struct MetricOptions {
  double prominence_m = 0.0005;  // extremum detection floor
  int dtw_downsample = 10;       // 1 kHz -> 100 Hz
  double plv_edge_fraction = 0.1;
  int frequency_zero_pad = 8;
  TorqueMode torque_mode = TorqueMode::MeanAbs;

  bool valid() const;
};

/// Per-handshake evaluation. Errors and PLV are empty for passive handshakes,
/// where they are undefined; actual_amplitude_m is always reported.
struct MetricReport {
  std::optional<double> amplitude_error_pct;
  std::optional<double> frequency_error_pct;
  double actual_amplitude_m = 0.0;
  double dtw_m = 0.0;
  std::optional<double> plv;
  double mean_torque_nm = 0.0;
  double mean_power_w = 0.0;

  bool operator==(const MetricReport&) const = default;
};

/// Removes the least-squares line.
std::vector<double> detrend(std::span<const double> x);

/// Extrema alternating peak/trough, each differing from the previous one by
/// at least `prominence`. Endpoints never count as extrema.
std::vector<std::size_t> find_extrema(std::span<const double> x, double prominence);

/// Mean of |x[e_k+1] - x[e_k]| / 2 over consecutive extrema of the detrended
/// signal; 0 when fewer than two extrema exist.
double oscillation_amplitude(std::span<const double> x, double prominence);

/// Frequency of the largest magnitude of the Hann-windowed, zero-padded
/// DFT of the detrended signal, refined by parabolic interpolation.
double dominant_frequency(std::span<const double> x, double dt, int zero_pad = 8);

/// Classic DTW: |a - b| local cost, no window, summed along the best path.
double dtw(std::span<const double> x, std::span<const double> y);

/// Phase locking value of the analytic signals, after detrending and with
/// `edge_fraction` of the samples dropped at each end.
double plv(std::span<const double> x, std::span<const double> y, double dt,
           double edge_fraction = 0.1);

double pearson(std::span<const double> x, std::span<const double> y);

double amplitude_error(const HandshakeLog& log, const MetricOptions& options = {});
double frequency_error(const HandshakeLog& log, const MetricOptions& options = {});
double log_dtw(const HandshakeLog& log, const MetricOptions& options = {});
double log_plv(const HandshakeLog& log, const MetricOptions& options = {});
double mean_torque(const HandshakeLog& log, TorqueMode mode = TorqueMode::MeanAbs);
double mean_power(const HandshakeLog& log);

MetricReport evaluate(const HandshakeLog& log, const MetricOptions& options = {});

/// Symmetric Pearson matrix; entries are empty where a series has no variance.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> r;
};

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& series);

}  // namespace handshake
