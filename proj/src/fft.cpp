#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace mpmrf::detail {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  auto* in = fftw_alloc_complex(n);
  auto* out = fftw_alloc_complex(n);
  in_ = in;
  out_ = out;
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  bwd_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft::~Fft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
  fftw_free(in_);
  fftw_free(out_);
}

cvec Fft::forward_real(const std::vector<double>& x) {
  auto* in = static_cast<fftw_complex*>(in_);
  std::memset(in, 0, sizeof(fftw_complex) * n_);
  for (std::size_t k = 0; k < x.size(); ++k) in[k % n_][0] += x[k];
  fftw_execute(static_cast<fftw_plan>(fwd_));
  const auto* out = static_cast<const std::complex<double>*>(out_);
  return cvec(out, out + n_);
}

cvec Fft::forward(const cvec& x) {
  auto* in = static_cast<std::complex<double>*>(in_);
  std::fill(in, in + n_, std::complex<double>(0.0, 0.0));
  for (std::size_t k = 0; k < x.size(); ++k) in[k % n_] += x[k];
  fftw_execute(static_cast<fftw_plan>(fwd_));
  const auto* out = static_cast<const std::complex<double>*>(out_);
  return cvec(out, out + n_);
}

cvec Fft::inverse(const cvec& X) {
  auto* in = static_cast<std::complex<double>*>(in_);
  std::copy(X.begin(), X.begin() + static_cast<std::ptrdiff_t>(std::min(X.size(), n_)), in);
  fftw_execute(static_cast<fftw_plan>(bwd_));
  const auto* out = static_cast<const std::complex<double>*>(out_);
  cvec result(out, out + n_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& z : result) z *= scale;
  return result;
}

}  // namespace mpmrf::detail
