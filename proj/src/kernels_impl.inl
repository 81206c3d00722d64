#include "hyperlock/kernels.hpp"

#include <cstddef>

#include "hyperlock/errors.hpp"

// Compiled twice: once with HYPERLOCK_KERNEL_NS=serial and OpenMP pragmas ignored,
// once with HYPERLOCK_KERNEL_NS=parallel. See kernels_serial.cpp / kernels_parallel.cpp.

#ifndef HYPERLOCK_KERNEL_NS
#error "kernels_impl.inl is included by kernels_serial.cpp and kernels_parallel.cpp"
#endif

#ifdef HYPERLOCK_KERNEL_PARALLEL
#define HL_PRAGMA(x) _Pragma(#x)
#else
#define HL_PRAGMA(x)
#endif

namespace hyperlock::kernels::HYPERLOCK_KERNEL_NS {

namespace {

void check_batch(const Matrix& inputs, std::size_t in_dim) {
  if (inputs.rows() != 0 && inputs.cols() != in_dim) throw ShapeError("batch input width does not match encoder");
}

}  // namespace

void project(const hd::RandomProjection& w, std::span<const double> x, std::span<double> y) {
  if (x.size() != w.in_dim() || y.size() != w.out_dim()) throw ShapeError("projection operand shape mismatch");
  const auto rows = static_cast<std::ptrdiff_t>(w.out_dim());
  const std::size_t cols = w.in_dim();
  if (w.materialized()) {
    const Matrix& m = *w.dense();
    HL_PRAGMA(omp parallel for schedule(static))
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const auto row = m.row(static_cast<std::size_t>(r));
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
      y[static_cast<std::size_t>(r)] = acc;
    }
    return;
  }
  HL_PRAGMA(omp parallel for schedule(static))
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (x[c] != 0.0) acc += w.weight(static_cast<std::size_t>(r), c) * x[c];
    }
    y[static_cast<std::size_t>(r)] = acc;
  }
}

std::vector<hd::BinaryHypervector> encode_crossbar_batch(const hd::CrossbarEncoder& enc, const Matrix& inputs,
                                                         std::uint64_t base_seed) {
  check_batch(inputs, enc.input_dim());
  std::vector<hd::BinaryHypervector> out(inputs.rows());
  const auto n = static_cast<std::ptrdiff_t>(inputs.rows());
  HL_PRAGMA(omp parallel for schedule(dynamic, 16))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    RandomStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    out[static_cast<std::size_t>(i)] = enc.encode(inputs.row(static_cast<std::size_t>(i)), rng);
  }
  return out;
}

std::vector<hd::BinaryHypervector> encode_ideal_batch(const hd::IdealEncoder& enc, const Matrix& inputs,
                                                      std::uint64_t base_seed) {
  check_batch(inputs, enc.input_dim());
  std::vector<hd::BinaryHypervector> out(inputs.rows());
  const auto n = static_cast<std::ptrdiff_t>(inputs.rows());
  HL_PRAGMA(omp parallel for schedule(dynamic, 4))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    RandomStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    out[static_cast<std::size_t>(i)] = enc.encode(inputs.row(static_cast<std::size_t>(i)), rng);
  }
  return out;
}

Matrix noisy_project_batch(const hd::RandomProjection& w, double sigma, hd::NoiseSampling sampling,
                           const Matrix& inputs, std::uint64_t base_seed) {
  check_batch(inputs, w.in_dim());
  Matrix out(inputs.rows(), w.out_dim());
  const auto n = static_cast<std::ptrdiff_t>(inputs.rows());
  HL_PRAGMA(omp parallel for schedule(dynamic, 4))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    RandomStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(i)));
    w.apply_noisy(inputs.row(static_cast<std::size_t>(i)), sigma, rng, sampling, out.row(static_cast<std::size_t>(i)));
  }
  return out;
}

void linear_forward(const Matrix& w, std::span<const double> b, std::span<const SparseRow> batch, Matrix& out) {
  const std::size_t classes = w.rows();
  if (out.rows() != batch.size() || out.cols() != classes) out = Matrix(batch.size(), classes);
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  HL_PRAGMA(omp parallel for schedule(static))
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const SparseRow active = batch[static_cast<std::size_t>(s)];
    auto o = out.row(static_cast<std::size_t>(s));
    for (std::size_t c = 0; c < classes; ++c) {
      const double* wc = w.row(c).data();
      double acc = b[c];
      for (auto j : active) acc += wc[j];
      o[c] = acc;
    }
  }
}

void linear_forward(const Matrix& w, std::span<const double> b, std::span<const DenseRow> batch, Matrix& out) {
  const std::size_t classes = w.rows();
  const std::size_t dim = w.cols();
  if (out.rows() != batch.size() || out.cols() != classes) out = Matrix(batch.size(), classes);
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  HL_PRAGMA(omp parallel for schedule(static))
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const DenseRow x = batch[static_cast<std::size_t>(s)];
    auto o = out.row(static_cast<std::size_t>(s));
    for (std::size_t c = 0; c < classes; ++c) {
      const double* wc = w.row(c).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += wc[j] * x[j];
      o[c] = b[c] + acc;
    }
  }
}

void linear_update(Matrix& w, std::span<double> b, std::span<const SparseRow> batch, const Matrix& grads, double lr) {
  const auto classes = static_cast<std::ptrdiff_t>(w.rows());
  HL_PRAGMA(omp parallel for schedule(static))
  for (std::ptrdiff_t c = 0; c < classes; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    double* wc = w.row(cc).data();
    double db = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const double step = lr * grads(s, cc);
      db += step;
      if (step == 0.0) continue;
      for (auto j : batch[s]) wc[j] -= step;
    }
    b[cc] -= db;
  }
}

void linear_update(Matrix& w, std::span<double> b, std::span<const DenseRow> batch, const Matrix& grads, double lr) {
  const auto classes = static_cast<std::ptrdiff_t>(w.rows());
  const std::size_t dim = w.cols();
  HL_PRAGMA(omp parallel for schedule(static))
  for (std::ptrdiff_t c = 0; c < classes; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    double* wc = w.row(cc).data();
    double db = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const double step = lr * grads(s, cc);
      db += step;
      if (step == 0.0) continue;
      const double* x = batch[s].data();
      for (std::size_t j = 0; j < dim; ++j) wc[j] -= step * x[j];
    }
    b[cc] -= db;
  }
}

}  // namespace hyperlock::kernels::HYPERLOCK_KERNEL_NS

#undef HL_PRAGMA
