#include "dense_eigen.hpp"

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <algorithm>
#include <string>

namespace nct::detail {

std::vector<double> hermitian_eigenvalues(Eigen::MatrixXcd a) {
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<double> w(static_cast<std::size_t>(n));
  if (n == 0) return w;
  if (n == 1) {
    w[0] = a(0, 0).real();
    return w;
  }
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, a.data(), n, w.data());
  if (info != 0) throw Error("zheevd failed with info " + std::to_string(info));
  return w;
}

std::vector<double> hermitian_pencil_eigenvalues(Eigen::MatrixXcd a, Eigen::MatrixXcd b) {
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<double> w(static_cast<std::size_t>(n));
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zhegvd(LAPACK_COL_MAJOR, 1, 'N', 'L', n, a.data(), n, b.data(), n, w.data());
  if (info > n) throw Error("Gram matrix is not positive definite");
  if (info != 0) throw Error("zhegvd failed with info " + std::to_string(info));
  return w;
}

std::vector<double> singular_values(Eigen::MatrixXcd a) {
  const auto m = static_cast<lapack_int>(a.rows());
  const auto n = static_cast<lapack_int>(a.cols());
  std::vector<double> s(static_cast<std::size_t>(std::min(m, n)));
  if (s.empty()) return s;
  const lapack_int info =
      LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, a.data(), m, s.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw Error("zgesdd failed with info " + std::to_string(info));
  return s;
}

}  // namespace nct::detail
