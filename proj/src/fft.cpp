#include "fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace handshake::detail {

namespace {
// FFTW's planner is not re-entrant; execution is.
std::mutex planner_mutex;
}  // namespace

std::vector<std::complex<double>> fft(std::vector<std::complex<double>> data, bool inverse) {
  if (data.empty()) return data;
  std::vector<std::complex<double>> out(data.size());
  auto* in_ptr = reinterpret_cast<fftw_complex*>(data.data());
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(data.size()), in_ptr, out_ptr,
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace handshake::detail
