#define HYPERLOCK_KERNEL_NS parallel
#define HYPERLOCK_KERNEL_PARALLEL
#include "kernels_impl.inl"
