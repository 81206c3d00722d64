#pragma once

// Hot loops, each in two flavours with identical results:
//   kernels::serial    reference implementation, kept for testing
//   kernels::parallel  OpenMP version used by the library
//
// Every parallel kernel is bit-identical to its serial twin for any thread count:
// batch encoders give item i its own stream derive_seed(base_seed, i), and the
// decoder update gives each thread whole output rows while walking the batch in
// order.

#include <cstdint>
#include <span>
#include <vector>

#include "hyperlock/encoder.hpp"
#include "hyperlock/hypervector.hpp"
#include "hyperlock/matrix.hpp"

namespace hyperlock::kernels {

using SparseRow = std::span<const std::uint32_t>;
using DenseRow = std::span<const double>;

#define HYPERLOCK_KERNEL_DECLS                                                                                   \
  void project(const hd::RandomProjection& w, std::span<const double> x, std::span<double> y);                  \
  std::vector<hd::BinaryHypervector> encode_crossbar_batch(const hd::CrossbarEncoder& enc, const Matrix& inputs, \
                                                           std::uint64_t base_seed);                            \
  std::vector<hd::BinaryHypervector> encode_ideal_batch(const hd::IdealEncoder& enc, const Matrix& inputs,      \
                                                        std::uint64_t base_seed);                               \
  Matrix noisy_project_batch(const hd::RandomProjection& w, double sigma, hd::NoiseSampling sampling,            \
                             const Matrix& inputs, std::uint64_t base_seed);                                    \
  void linear_forward(const Matrix& w, std::span<const double> b, std::span<const SparseRow> batch,             \
                      Matrix& out);                                                                             \
  void linear_forward(const Matrix& w, std::span<const double> b, std::span<const DenseRow> batch, Matrix& out); \
  void linear_update(Matrix& w, std::span<double> b, std::span<const SparseRow> batch, const Matrix& grads,     \
                     double lr);                                                                                \
  void linear_update(Matrix& w, std::span<double> b, std::span<const DenseRow> batch, const Matrix& grads,      \
                     double lr);

namespace serial {
HYPERLOCK_KERNEL_DECLS
}  // namespace serial

namespace parallel {
HYPERLOCK_KERNEL_DECLS
}  // namespace parallel

#undef HYPERLOCK_KERNEL_DECLS

}  // namespace hyperlock::kernels
