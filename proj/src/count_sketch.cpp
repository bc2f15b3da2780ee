#include "specbnp/decomposition.hpp"

#include "specbnp/error.hpp"
#include "specbnp/parallel.hpp"
#include "random_streams.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

namespace specbnp {
namespace {

using Spectrum = std::vector<std::complex<double>>;

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Real FFTs of length b. Plans are created once under the planner lock and then
// executed on caller-owned buffers, which FFTW allows from any thread.
class Fft {
 public:
  explicit Fft(std::size_t b) : b_(b) {
    std::lock_guard lock(planner_mutex());
    std::vector<double> r(b);
    Spectrum c(b / 2 + 1);
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    const int n = static_cast<int>(b);
    forward_ = fftw_plan_dft_r2c_1d(n, r.data(), cp, FFTW_ESTIMATE | FFTW_UNALIGNED);
    backward_ = fftw_plan_dft_c2r_1d(n, cp, r.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!forward_ || !backward_) throw NumericalError("FFTW could not plan a transform of length " + std::to_string(b));
  }
  ~Fft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return b_; }

  Spectrum forward(std::vector<double> in) const {
    Spectrum out(b_ / 2 + 1);
    fftw_execute_dft_r2c(forward_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
  }
  /// Unnormalized inverse; the input is consumed.
  std::vector<double> backward(Spectrum in) const {
    std::vector<double> out(b_);
    fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    return out;
  }

 private:
  std::size_t b_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

// Count sketch of a symmetric cubic tensor: entry (i_1..i_r) lands in bucket
// Σ h_m(i_m) mod b with sign Π s_m(i_m). Only its spectrum is kept.
class TensorSketch {
 public:
  TensorSketch(const DenseTensor& t, SketchHashes hashes, const Fft& fft)
      : order_(t.order()), k_(t.dim(0)), hashes_(std::move(hashes)), fft_(&fft) {
    const std::size_t b = fft.size();
    std::vector<double> cs(b, 0.0);
    std::vector<std::size_t> idx(static_cast<std::size_t>(order_), 0);
    const auto data = t.data();
    for (std::size_t flat = 0; flat < data.size(); ++flat) {
      std::size_t rem = flat;
      for (int m = order_ - 1; m >= 0; --m) {
        idx[static_cast<std::size_t>(m)] = rem % k_;
        rem /= k_;
      }
      std::size_t bucket = 0;
      double sign = 1.0;
      for (int m = 0; m < order_; ++m) {
        bucket += hashes_.h[static_cast<std::size_t>(m)][idx[static_cast<std::size_t>(m)]];
        sign *= hashes_.s[static_cast<std::size_t>(m)][idx[static_cast<std::size_t>(m)]];
      }
      cs[bucket % b] += sign * data[flat];
    }
    spectrum_ = fft.forward(std::move(cs));
  }

  /// Estimate of T(S, 1, u, ..., u).
  Vector apply(const Vector& u) const {
    Spectrum p = product(u, 1);
    for (std::size_t f = 0; f < p.size(); ++f) p[f] = spectrum_[f] * std::conj(p[f]);
    const std::vector<double> corr = fft_->backward(std::move(p));
    const double scale = 1.0 / static_cast<double>(fft_->size());
    Vector out(static_cast<Eigen::Index>(k_));
    for (std::size_t i = 0; i < k_; ++i)
      out(static_cast<Eigen::Index>(i)) = hashes_.s[0][i] * corr[hashes_.h[0][i]] * scale;
    return out;
  }

  /// S ← S - λ v^{⊗r} in sketch space.
  void deflate(double lambda, const Vector& v) {
    const Spectrum p = product(v, 0);
    for (std::size_t f = 0; f < p.size(); ++f) spectrum_[f] -= lambda * p[f];
  }

 private:
  // Π_{m ≥ first} FFT(cs_m(u)).
  Spectrum product(const Vector& u, int first) const {
    Spectrum acc;
    for (int m = first; m < order_; ++m) {
      std::vector<double> cs(fft_->size(), 0.0);
      const auto& h = hashes_.h[static_cast<std::size_t>(m)];
      const auto& s = hashes_.s[static_cast<std::size_t>(m)];
      for (std::size_t i = 0; i < k_; ++i) cs[h[i]] += s[i] * u(static_cast<Eigen::Index>(i));
      Spectrum f = fft_->forward(std::move(cs));
      if (acc.empty()) {
        acc = std::move(f);
      } else {
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] *= f[j];
      }
    }
    return acc;
  }

  int order_;
  std::size_t k_;
  SketchHashes hashes_;
  const Fft* fft_;
  Spectrum spectrum_;
};

SketchHashes random_hashes(std::uint64_t seed, std::size_t sketch, int order, std::size_t k, std::size_t b) {
  auto rng = detail::stream(seed, 0xfc, sketch);
  std::uniform_int_distribution<std::size_t> bucket(0, b - 1);
  std::bernoulli_distribution coin(0.5);
  SketchHashes out;
  for (int m = 0; m < order; ++m) {
    std::vector<std::size_t> h(k);
    std::vector<double> s(k);
    for (std::size_t i = 0; i < k; ++i) {
      h[i] = bucket(rng);
      s[i] = coin(rng) ? 1.0 : -1.0;
    }
    out.h.push_back(std::move(h));
    out.s.push_back(std::move(s));
  }
  return out;
}

Vector median_apply(const std::vector<TensorSketch>& sketches, const Vector& u) {
  std::vector<Vector> est;
  est.reserve(sketches.size());
  for (const auto& sk : sketches) est.push_back(sk.apply(u));
  Vector out(u.size());
  std::vector<double> col(sketches.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    for (std::size_t b = 0; b < est.size(); ++b) col[b] = est[b](i);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out(i) = n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

}  // namespace

std::vector<EigenPair> fc_decompose(const DenseTensor& s, int k, const DecompositionConfig& config) {
  config.validate();
  if (config.sketch_len < 2) throw InputError("sketch length must be at least 2");
  if (s.order() < 1 || !s.is_cubic()) throw InputError("fc_decompose: expected a cubic tensor");
  std::vector<SketchHashes> hashes;
  for (int b = 0; b < config.sketch_repeats; ++b)
    hashes.push_back(random_hashes(config.seed, static_cast<std::size_t>(b), s.order(), s.dim(0),
                                   static_cast<std::size_t>(config.sketch_len)));
  return fc_decompose(s, k, config, hashes);
}

std::vector<EigenPair> fc_decompose(const DenseTensor& s, int k, const DecompositionConfig& config,
                                    const std::vector<SketchHashes>& hashes) {
  config.validate();
  if ((s.order() != 3 && s.order() != 4) || !s.is_cubic())
    throw InputError("fc_decompose: expected a cubic tensor of order 3 or 4");
  if (k < 1 || static_cast<std::size_t>(k) > s.dim(0)) throw InputError("fc_decompose: bad component count");
  if (config.sketch_len < 2) throw InputError("sketch length must be at least 2");
  if (hashes.empty()) throw InputError("fc_decompose: no sketches");
  const auto b = static_cast<std::size_t>(config.sketch_len);
  const int order = s.order();
  const auto dim = static_cast<Eigen::Index>(s.dim(0));
  for (const auto& h : hashes) {
    if (h.h.size() != static_cast<std::size_t>(order) || h.s.size() != static_cast<std::size_t>(order))
      throw InputError("fc_decompose: one hash per mode required");
    for (int m = 0; m < order; ++m) {
      const auto& hm = h.h[static_cast<std::size_t>(m)];
      if (hm.size() != s.dim(0) || h.s[static_cast<std::size_t>(m)].size() != s.dim(0))
        throw DimensionError("fc_decompose: hash length", m);
      for (std::size_t v : hm)
        if (v >= b) throw InputError("fc_decompose: hash value outside [0, b)");
    }
  }

  const Fft fft(b);
  std::vector<TensorSketch> sketches;
  sketches.reserve(hashes.size());
  for (const auto& h : hashes) sketches.emplace_back(s, h, fft);

  std::vector<EigenPair> out;
  for (int c = 0; c < k; ++c) {
    std::vector<Vector> theta(static_cast<std::size_t>(config.restarts));
    std::vector<double> rayleigh(theta.size(), 0.0);
    parallel_for(theta.size(), config.threads, [&](std::size_t r) {
      auto rng = detail::stream(config.seed, static_cast<std::uint64_t>(c), r);
      Vector t = detail::random_unit(rng, dim);
      for (int it = 0; it < config.iters_init; ++it) {
        Vector next = median_apply(sketches, t);
        const double n = next.norm();
        if (!(n > 0.0)) break;
        t = next / n;
      }
      rayleigh[r] = t.dot(median_apply(sketches, t));
      theta[r] = std::move(t);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < theta.size(); ++r)
      if (std::abs(rayleigh[r]) > std::abs(rayleigh[best])) best = r;

    EigenPair pair;
    pair.branch = order == 3 ? Branch::Order3 : Branch::Order4;
    pair.converged = false;
    Vector t = theta[best];
    for (int it = 0; it < config.iters_final; ++it) {
      Vector next = median_apply(sketches, t);
      const double n = next.norm();
      if (!(n > 0.0)) break;
      next /= n;
      const double diff = std::min((next - t).norm(), (next + t).norm());
      t = next;
      if (diff < config.tol) {
        pair.converged = true;
        break;
      }
    }
    pair.value = t.dot(median_apply(sketches, t));
    pair.vector = t;
    for (auto& sk : sketches) sk.deflate(pair.value, t);
    canonicalize_sign(pair, order);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace specbnp
