#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace mpmrf::detail {

using cvec = std::vector<std::complex<double>>;

/// Complex DFT of fixed length. Plan creation is serialized; execution is
/// reentrant on distinct Fft objects.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }

  /// sum_k x_k e^{-2 pi i jk/n}; input shorter than n is zero-padded, longer
  /// input is folded modulo n.
  cvec forward_real(const std::vector<double>& x);
  cvec forward(const cvec& x);
  /// (1/n) sum_j X_j e^{2 pi i jk/n}.
  cvec inverse(const cvec& X);

 private:
  std::size_t n_;
  void* in_;
  void* out_;
  void* fwd_;
  void* bwd_;
};

}  // namespace mpmrf::detail
