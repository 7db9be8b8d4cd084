#include "kdvlab/grid.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

namespace kdvlab {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealGrid::Impl {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;  // r2c
  fftw_plan bwd = nullptr;  // c2r
  std::vector<double> scratch0, scratch1, scratch2;
};

RealGrid::RealGrid(int points) : m_(points), impl_(new Impl) {
  if (points < 4 || points % 2 != 0) throw std::invalid_argument("grid size must be even and >= 4");
  std::lock_guard<std::mutex> lock(planner_mutex());
  impl_->real = fftw_alloc_real(static_cast<size_t>(m_));
  impl_->spec = fftw_alloc_complex(static_cast<size_t>(m_ / 2 + 1));
  impl_->fwd = fftw_plan_dft_r2c_1d(m_, impl_->real, impl_->spec, FFTW_ESTIMATE);
  impl_->bwd = fftw_plan_dft_c2r_1d(m_, impl_->spec, impl_->real, FFTW_ESTIMATE);
  impl_->scratch0.resize(static_cast<size_t>(m_));
  impl_->scratch1.resize(static_cast<size_t>(m_));
  impl_->scratch2.resize(static_cast<size_t>(m_));
}

RealGrid::~RealGrid() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(impl_->fwd);
  fftw_destroy_plan(impl_->bwd);
  fftw_free(impl_->real);
  fftw_free(impl_->spec);
}

void RealGrid::to_grid_coeffs(std::span<const cplx> half, std::span<double> values) const {
  const int nh = m_ / 2 + 1;
  if (static_cast<int>(half.size()) > nh - 1)
    throw std::invalid_argument("spectrum does not fit on grid");
  for (int k = 0; k < nh; ++k) {
    const cplx v = k < static_cast<int>(half.size()) ? half[static_cast<size_t>(k)] : cplx{0, 0};
    impl_->spec[k][0] = v.real();
    impl_->spec[k][1] = v.imag();
  }
  fftw_execute(impl_->bwd);
  std::memcpy(values.data(), impl_->real, sizeof(double) * static_cast<size_t>(m_));
}

void RealGrid::to_grid(const FourierSeries& u, std::span<double> values) const {
  const int K = u.max_mode();
  std::vector<cplx> half(static_cast<size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) half[static_cast<size_t>(k)] = u.coeff(k);
  to_grid_coeffs(half, values);
}

void RealGrid::from_grid(std::span<const double> values, FourierSeries& out) const {
  if (static_cast<int>(values.size()) != m_) throw std::invalid_argument("grid size mismatch");
  std::memcpy(impl_->real, values.data(), sizeof(double) * static_cast<size_t>(m_));
  fftw_execute(impl_->fwd);
  const int K = out.max_mode();
  if (K > m_ / 2) throw std::invalid_argument("window larger than grid");
  const double inv = 1.0 / m_;
  for (int k = 0; k <= K; ++k) {
    cplx v{impl_->spec[k][0] * inv, impl_->spec[k][1] * inv};
    if (k == 0) {
      out.set_raw(0, out.mean_zero() ? cplx{0, 0} : cplx{v.real(), 0.0});
    } else {
      out.set_raw(k, v);
      out.set_raw(-k, std::conj(v));
    }
  }
}

void RealGrid::from_grid_half(std::span<const double> values, std::span<cplx> out) const {
  if (static_cast<int>(values.size()) != m_) throw std::invalid_argument("grid size mismatch");
  std::memcpy(impl_->real, values.data(), sizeof(double) * static_cast<size_t>(m_));
  fftw_execute(impl_->fwd);
  const int K = static_cast<int>(out.size()) - 1;
  if (K > m_ / 2) throw std::invalid_argument("window larger than grid");
  const double inv = 1.0 / m_;
  for (int k = 0; k <= K; ++k)
    out[static_cast<size_t>(k)] = cplx{impl_->spec[k][0] * inv, impl_->spec[k][1] * inv};
}

std::span<double> RealGrid::scratch(int which) const {
  switch (which) {
    case 0: return impl_->scratch0;
    case 1: return impl_->scratch1;
    default: return impl_->scratch2;
  }
}

int good_grid_size(int band, int minimum) {
  int need = std::max(2 * band + 2, std::max(minimum, 8));
  for (int n = need;; ++n) {
    if (n % 2 != 0) continue;
    int m = n;
    for (int p : {2, 3, 5})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

RealGrid& grid_for(int points) {
  thread_local std::map<int, std::unique_ptr<RealGrid>> cache;
  auto& slot = cache[points];
  if (!slot) slot = std::make_unique<RealGrid>(points);
  return *slot;
}

}  // namespace kdvlab
