#include "handshake/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "fft.hpp"
#include "handshake/errors.hpp"

namespace handshake {

bool MetricOptions::valid() const {
  return prominence_m >= 0.0 && dtw_downsample >= 1 && plv_edge_fraction >= 0.0 &&
         plv_edge_fraction < 0.5 && frequency_zero_pad >= 1;
}

std::vector<double> detrend(std::span<const double> x) {
  const auto n = x.size();
  std::vector<double> out(x.begin(), x.end());
  if (n < 2) {
    for (auto& v : out) v = 0.0;
    return out;
  }
  const double tm = 0.5 * static_cast<double>(n - 1);
  double xm = 0.0;
  for (double v : x) xm += v;
  xm /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - tm;
    sxy += t * (x[i] - xm);
    sxx += t * t;
  }
  const double slope = sxy / sxx;
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - xm - slope * (static_cast<double>(i) - tm);
  return out;
}

std::vector<std::size_t> find_extrema(std::span<const double> x, double prominence) {
  // Zig-zag: a running max (min) is confirmed as a peak (trough) once the
  // signal retreats from it by more than `prominence`.
  std::vector<std::size_t> out;
  if (x.size() < 3) return out;
  std::size_t hi = 0, lo = 0;
  int seeking = 0;  // +1 peak, -1 trough, 0 undecided
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] > x[hi]) hi = i;
    if (x[i] < x[lo]) lo = i;
    if (seeking >= 0 && x[i] < x[hi] - prominence) {
      if (hi != 0) out.push_back(hi);
      seeking = -1;
      lo = i;
    } else if (seeking <= 0 && x[i] > x[lo] + prominence) {
      if (lo != 0) out.push_back(lo);
      seeking = 1;
      hi = i;
    }
  }
  return out;
}

double oscillation_amplitude(std::span<const double> x, double prominence) {
  const auto d = detrend(x);
  const auto ext = find_extrema(d, prominence);
  if (ext.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 1; k < ext.size(); ++k) sum += std::abs(d[ext[k]] - d[ext[k - 1]]) / 2.0;
  return sum / static_cast<double>(ext.size() - 1);
}

double dominant_frequency(std::span<const double> x, double dt, int zero_pad) {
  const auto n = x.size();
  if (n < 4) throw InvalidArgument("signal too short for a frequency estimate");
  const auto d = detrend(x);
  const std::size_t m = n * static_cast<std::size_t>(std::max(zero_pad, 1));
  std::vector<std::complex<double>> buf(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    buf[i] = w * d[i];
  }
  const auto spec = detail::fft(std::move(buf));
  std::size_t best = 1;
  double best_mag = -1.0;
  for (std::size_t k = 1; k < m / 2; ++k) {
    const double mag = std::abs(spec[k]);
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  double offset = 0.0;
  if (best > 1 && best + 1 < m / 2) {
    const double a = std::abs(spec[best - 1]), b = best_mag, c = std::abs(spec[best + 1]);
    const double denom = a - 2.0 * b + c;
    if (denom != 0.0) offset = 0.5 * (a - c) / denom;
  }
  return (static_cast<double>(best) + offset) / (static_cast<double>(m) * dt);
}

double dtw(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw EmptySequence("dtw needs nonempty sequences");
  const auto m = y.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double cost = std::abs(x[i] - y[j]);
      double best;
      if (i == 0 && j == 0) best = 0.0;
      else if (i == 0) best = cur[j - 1];
      else if (j == 0) best = prev[j];
      else best = std::min({prev[j], prev[j - 1], cur[j - 1]});
      cur[j] = cost + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

namespace {

std::vector<double> instantaneous_phase(const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<std::complex<double>> buf(x.begin(), x.end());
  auto spec = detail::fft(std::move(buf));
  // Analytic signal: keep DC (and Nyquist), double positive, zero negative.
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k < (n + 1) / 2) spec[k] *= 2.0;
    else if (!(n % 2 == 0 && k == half)) spec[k] = 0.0;
  }
  const auto analytic = detail::fft(std::move(spec), true);
  std::vector<double> phase(n);
  for (std::size_t i = 0; i < n; ++i) phase[i] = std::arg(analytic[i]);
  return phase;
}

double variance(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double v = 0.0;
  for (double a : x) v += (a - mean) * (a - mean);
  return v / static_cast<double>(x.size());
}

}  // namespace

double plv(std::span<const double> x, std::span<const double> y, double /*dt*/,
           double edge_fraction) {
  if (x.size() != y.size()) throw InvalidArgument("plv needs equal-length signals");
  if (x.size() < 64) throw InvalidArgument("plv needs at least 64 samples");
  const auto dx = detrend(x);
  const auto dy = detrend(y);
  if (variance(dx) < 1e-12 || variance(dy) < 1e-12) {
    throw DegenerateSignal("plv input has near-zero variance");
  }
  const auto px = instantaneous_phase(dx);
  const auto py = instantaneous_phase(dy);
  const auto n = x.size();
  const auto edge = static_cast<std::size_t>(std::floor(edge_fraction * static_cast<double>(n)));
  std::complex<double> acc = 0.0;
  for (std::size_t i = edge; i < n - edge; ++i) acc += std::polar(1.0, px[i] - py[i]);
  return std::min(1.0, std::abs(acc) / static_cast<double>(n - 2 * edge));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("pearson needs two equal series of length >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 1e-300 || syy <= 1e-300) throw ZeroVariance("pearson input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// -- log metrics -------------------------------------------------------------------

namespace {

void require_samples(const HandshakeLog& log) {
  if (!log.consistent() || log.size() == 0) throw InvalidArgument("empty or inconsistent log");
}

}  // namespace

double amplitude_error(const HandshakeLog& log, const MetricOptions& options) {
  require_samples(log);
  if (log.params.amplitude_m == 0.0) throw PassiveUndefined("amplitude error of a passive handshake");
  const auto desired = world_vertical(log.desired_path, log.pitch_rad);
  const auto actual = world_vertical(log.actual_path, log.pitch_rad);
  const double a_desired = oscillation_amplitude(desired, options.prominence_m);
  if (a_desired == 0.0) throw InvalidArgument("log holds less than one period of the desired motion");
  const double a_actual = oscillation_amplitude(actual, options.prominence_m);
  return 100.0 * std::abs(a_actual - a_desired) / a_desired;
}

double frequency_error(const HandshakeLog& log, const MetricOptions& options) {
  require_samples(log);
  if (log.params.frequency_hz == 0.0) throw PassiveUndefined("frequency error of a passive handshake");
  const auto desired = world_vertical(log.desired_path, log.pitch_rad);
  const auto actual = world_vertical(log.actual_path, log.pitch_rad);
  const double f_desired = dominant_frequency(desired, log.dt, options.frequency_zero_pad);
  const double f_actual = dominant_frequency(actual, log.dt, options.frequency_zero_pad);
  return 100.0 * std::abs(f_actual - f_desired) / f_desired;
}

double log_dtw(const HandshakeLog& log, const MetricOptions& options) {
  require_samples(log);
  auto prepare = [&](const std::vector<Vec3>& path) {
    const auto z = world_vertical(path, log.pitch_rad);
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
    std::vector<double> out;
    for (std::size_t i = 0; i < z.size(); i += static_cast<std::size_t>(options.dtw_downsample)) {
      out.push_back(z[i] - mean);
    }
    return out;
  };
  return dtw(prepare(log.desired_path), prepare(log.actual_path));
}

double log_plv(const HandshakeLog& log, const MetricOptions& options) {
  require_samples(log);
  return plv(world_vertical(log.desired_path, log.pitch_rad),
             world_vertical(log.actual_path, log.pitch_rad), log.dt, options.plv_edge_fraction);
}

double mean_torque(const HandshakeLog& log, TorqueMode mode) {
  require_samples(log);
  const double n = static_cast<double>(log.size());
  Vec3 acc = Vec3::Zero();
  for (const auto& tau : log.torques) acc += mode == TorqueMode::MeanAbs ? Vec3(tau.cwiseAbs()) : tau;
  return (acc / n).cwiseAbs().sum();
}

double mean_power(const HandshakeLog& log) {
  require_samples(log);
  double acc = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    acc += log.torques[i].cwiseProduct(log.joint_vel[i]).cwiseAbs().sum();
  }
  return acc / static_cast<double>(log.size());
}

MetricReport evaluate(const HandshakeLog& log, const MetricOptions& options) {
  MetricReport r;
  const auto actual = world_vertical(log.actual_path, log.pitch_rad);
  r.actual_amplitude_m = oscillation_amplitude(actual, options.prominence_m);
  if (!log.params.is_passive()) {
    r.amplitude_error_pct = amplitude_error(log, options);
    r.frequency_error_pct = frequency_error(log, options);
    try {
      r.plv = log_plv(log, options);
    } catch (const DegenerateSignal&) {
    }
  }
  r.dtw_m = log_dtw(log, options);
  r.mean_torque_nm = mean_torque(log, options.torque_mode);
  r.mean_power_w = mean_power(log);
  return r;
}

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& series) {
  if (names.size() != series.size()) throw InvalidArgument("one name per series");
  CorrelationMatrix m{names, {}};
  const auto k = series.size();
  m.r.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      std::optional<double> r;
      try {
        r = i == j ? (pearson(series[i], series[i]), 1.0) : pearson(series[i], series[j]);
      } catch (const ZeroVariance&) {
      } catch (const InvalidArgument&) {
      }
      m.r[i][j] = m.r[j][i] = r;
    }
  }
  return m;
}

}  // namespace handshake
