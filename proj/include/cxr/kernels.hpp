#pragma once
// Dense arithmetic kernels used by the tensor ops.
//
// Every kernel exists as a portable scalar reference and, where the build
// and the CPU allow it, an AVX2/FMA variant. The active table is chosen once
// at startup from CPUID and may be pinned with CXR_KERNELS=scalar|avx2 or
// select_backend(). Variants agree to floating-point reassociation only;
// bit-exact reproducibility holds for a fixed backend.

#include <cstddef>
#include <string_view>
#include <vector>

namespace cxr::kernels {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  const char* name;
  Backend backend;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a + b, out = a * b
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*relu)(const double* x, double* y, std::size_t n);
  // gx += gy where x > 0
  void (*relu_backward)(const double* x, const double* gy, double* gx, std::size_t n);

  // Row-major GEMM, all accumulating into C.
  // nn: C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // nt: C[m,n] += A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // tn: C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active();

// Throws cxr::UsageError if the backend is unavailable.
void select_backend(Backend backend);
Backend parse_backend(std::string_view name);

}  // namespace cxr::kernels
