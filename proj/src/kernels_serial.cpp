#define HYPERLOCK_KERNEL_NS serial
#include "kernels_impl.inl"
