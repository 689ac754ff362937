#include "nctorus/finite_section.hpp"

#include "dense_eigen.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

namespace nct {

namespace {

using Triplet = Eigen::Triplet<cplx>;

SparseMatrix from_triplets(std::size_t dim, const std::vector<Triplet>& t) {
  SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

// G[r,c] = t((U^r)^* U^c X): the coefficient at r of U^c X.
SparseMatrix weighted_gram(const NcElement& x, const BasisWindow& w) {
  std::vector<Triplet> t;
  const int bw = w.bandwidth();
  for (int m = -bw; m <= bw; ++m)
    for (int n = -bw; n <= bw; ++n)
      for (const auto& [md, c] : x.coeffs()) {
        const int r = m + md.m, s = n + md.n;
        if (!w.contains(r, s)) continue;
        const cplx v = c * rotation_phase(x.theta(), static_cast<long long>(n) * md.m);
        t.emplace_back(static_cast<Eigen::Index>(w.index(r, s)), static_cast<Eigen::Index>(w.index(m, n)), v);
      }
  return from_triplets(w.dimension(), t);
}

Eigen::MatrixXcd gather_block(const SparseMatrix& m, const std::vector<Eigen::Index>& idx,
                              const std::vector<Eigen::Index>& local) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (SparseMatrix::InnerIterator it(m, idx[static_cast<std::size_t>(j)]); it; ++it) {
      const Eigen::Index i = local[static_cast<std::size_t>(it.row())];
      if (i >= 0) block(i, j) += it.value();
    }
  return block;
}

std::vector<Eigen::Index> local_map(std::size_t dim, const std::vector<Eigen::Index>& idx) {
  std::vector<Eigen::Index> local(dim, -1);
  for (std::size_t i = 0; i < idx.size(); ++i) local[static_cast<std::size_t>(idx[i])] = static_cast<Eigen::Index>(i);
  return local;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("binary matrix: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("binary matrix: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

}  // namespace

BasisWindow::BasisWindow(int bandwidth) : bandwidth_(bandwidth) {
  if (bandwidth < 0) throw Error("basis window bandwidth must be non-negative");
}

std::size_t BasisWindow::index(int m, int n) const {
  if (!contains(m, n)) throw Error("mode outside basis window");
  return static_cast<std::size_t>(m + bandwidth_) * side() + static_cast<std::size_t>(n + bandwidth_);
}

Mode BasisWindow::mode(std::size_t index) const {
  if (index >= dimension()) throw Error("basis index out of range");
  const auto s = static_cast<std::size_t>(side());
  return {static_cast<int>(index / s) - bandwidth_, static_cast<int>(index % s) - bandwidth_};
}

FiniteSectionOperator::FiniteSectionOperator(BasisWindow window, SparseMatrix entries, bool selfadjoint)
    : window_(window), entries_(std::move(entries)), selfadjoint_(selfadjoint) {
  const auto dim = static_cast<Eigen::Index>(window_.dimension());
  if (entries_.rows() != dim || entries_.cols() != dim) throw Error("finite section size does not match window");
  entries_.makeCompressed();
  if (selfadjoint_) {
    const SparseMatrix adj = entries_.adjoint();
    const SparseMatrix diff = entries_ - adj;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    if (worst >= 1e-10) throw Error("finite section flagged selfadjoint but max |M - M^dagger| = " + std::to_string(worst));
  }
}

cplx FiniteSectionOperator::at(std::size_t row, std::size_t col) const {
  return entries_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

Eigen::MatrixXcd FiniteSectionOperator::dense() const { return Eigen::MatrixXcd(entries_); }

FiniteSectionOperator left_mult_matrix(const NcElement& a, const BasisWindow& w) {
  // (U^p V^q)(U^m V^n) = e^{2 pi i theta qm} U^{m+p} V^{n+q}
  std::vector<Triplet> t;
  const int bw = w.bandwidth();
  for (int m = -bw; m <= bw; ++m)
    for (int n = -bw; n <= bw; ++n)
      for (const auto& [md, c] : a.coeffs()) {
        const int r = m + md.m, s = n + md.n;
        if (!w.contains(r, s)) continue;
        const cplx v = c * rotation_phase(a.theta(), static_cast<long long>(md.n) * m);
        t.emplace_back(static_cast<Eigen::Index>(w.index(r, s)), static_cast<Eigen::Index>(w.index(m, n)), v);
      }
  return {w, from_triplets(w.dimension(), t), false};
}

FiniteSectionOperator flat_laplacian_matrix(const ModuliPoint& tau, const BasisWindow& w) {
  std::vector<Triplet> t;
  const int bw = w.bandwidth();
  for (int m = -bw; m <= bw; ++m)
    for (int n = -bw; n <= bw; ++n) {
      const auto i = static_cast<Eigen::Index>(w.index(m, n));
      t.emplace_back(i, i, cplx(tau.quadratic_form(m, n), 0.0));
    }
  return {w, from_triplets(w.dimension(), t), true};
}

std::vector<double> flat_spectrum(const ModuliPoint& tau, int bandwidth) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * bandwidth + 1) * (2 * bandwidth + 1));
  for (int m = -bandwidth; m <= bandwidth; ++m)
    for (int n = -bandwidth; n <= bandwidth; ++n) out.push_back(tau.quadratic_form(m, n));
  std::sort(out.begin(), out.end());
  return out;
}

PerturbedLaplacian perturbed_laplacian_matrix(const ConformalData& cd, const BasisWindow& w) {
  const SparseMatrix k = left_mult_matrix(cd.k(), w).entries();
  const SparseMatrix d = flat_laplacian_matrix(cd.tau(), w).entries();
  SparseMatrix m = k * d * k;
  const SparseMatrix adj = m.adjoint();
  const SparseMatrix diff = m - adj;
  double asym = 0.0;
  for (Eigen::Index j = 0; j < diff.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(diff, j); it; ++it) asym = std::max(asym, std::abs(it.value()));
  if (asym > 1e-8) throw Error("perturbed Laplacian asymmetry " + std::to_string(asym) + " signals an inconsistent k");
  SparseMatrix sym = 0.5 * (m + adj);
  sym.prune(cplx(0.0, 0.0), 0.0);
  return {FiniteSectionOperator(w, std::move(sym), true), asym};
}

LaplacianPencil gram_laplacian_matrix(const ConformalData& cd, const BasisWindow& w) {
  const DeformationAngle th = cd.theta();
  std::vector<Triplet> t;
  const int bw = w.bandwidth();
  for (int m = -bw; m <= bw; ++m)
    for (int n = -bw; n <= bw; ++n) {
      const auto i = static_cast<Eigen::Index>(w.index(m, n));
      t.emplace_back(i, i, cplx(m + cd.tau().re() * n, -cd.tau().im() * n));  // m + conj(tau) n
    }
  const SparseMatrix a = from_triplets(w.dimension(), t);
  const SparseMatrix g1 = weighted_gram(NcElement::scalar(th, 1.0), w);
  const SparseMatrix gphi = weighted_gram(cd.k_inv2(), w);
  SparseMatrix op = SparseMatrix(a.adjoint()) * g1 * a;
  const SparseMatrix gphi_adj = gphi.adjoint();
  SparseMatrix gram = 0.5 * (gphi + gphi_adj);
  const SparseMatrix op_adj = op.adjoint();
  op = 0.5 * (op + op_adj);
  return {FiniteSectionOperator(w, std::move(op), true), FiniteSectionOperator(w, std::move(gram), true)};
}

std::vector<std::vector<Eigen::Index>> sparsity_components(const std::vector<const SparseMatrix*>& mats) {
  if (mats.empty()) return {};
  const auto dim = static_cast<std::size_t>(mats.front()->rows());
  std::vector<std::size_t> parent(dim);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const SparseMatrix* m : mats)
    for (Eigen::Index j = 0; j < m->outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(*m, j); it; ++it) {
        if (it.value() == cplx(0.0, 0.0)) continue;
        const auto a = find(static_cast<std::size_t>(it.row())), b = find(static_cast<std::size_t>(j));
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<std::vector<Eigen::Index>> groups;
  std::vector<long> slot(dim, -1);
  for (std::size_t i = 0; i < dim; ++i) {
    const auto r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[r])].push_back(static_cast<Eigen::Index>(i));
  }
  return groups;
}

SpectrumResult hermitian_spectrum(const FiniteSectionOperator& m, bool positive) {
  if (!m.is_selfadjoint()) throw Error("hermitian_spectrum requires a selfadjoint finite section");
  SpectrumResult out;
  const auto groups = sparsity_components({&m.entries()});
  out.eigenvalues.reserve(m.dimension());
  for (const auto& g : groups) {
    const auto local = local_map(m.dimension(), g);
    const auto ev = detail::hermitian_eigenvalues(gather_block(m.entries(), g, local));
    out.eigenvalues.insert(out.eigenvalues.end(), ev.begin(), ev.end());
    out.largest_block = std::max(out.largest_block, g.size());
  }
  out.blocks = groups.size();
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  if (positive && !out.eigenvalues.empty() && out.eigenvalues.front() < -1e-8)
    throw Error("positive operator has eigenvalue " + std::to_string(out.eigenvalues.front()));
  return out;
}

SpectrumResult pencil_spectrum(const LaplacianPencil& pencil) {
  SpectrumResult out;
  const auto groups = sparsity_components({&pencil.op.entries(), &pencil.gram.entries()});
  const std::size_t dim = pencil.op.dimension();
  for (const auto& g : groups) {
    const auto local = local_map(dim, g);
    const auto ev = detail::hermitian_pencil_eigenvalues(gather_block(pencil.op.entries(), g, local),
                                                        gather_block(pencil.gram.entries(), g, local));
    out.eigenvalues.insert(out.eigenvalues.end(), ev.begin(), ev.end());
    out.largest_block = std::max(out.largest_block, g.size());
  }
  out.blocks = groups.size();
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

std::vector<double> singular_values(const FiniteSectionOperator& m) {
  std::vector<double> out;
  out.reserve(m.dimension());
  for (const auto& g : sparsity_components({&m.entries()})) {
    const auto local = local_map(m.dimension(), g);
    const auto sv = detail::singular_values(gather_block(m.entries(), g, local));
    out.insert(out.end(), sv.begin(), sv.end());
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

cplx vacuum_expectation(const FiniteSectionOperator& m) {
  const std::size_t v = m.window().vacuum();
  return m.at(v, v);
}

cplx inverse_vacuum_expectation(const FiniteSectionOperator& m) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(m.entries());
  if (lu.info() != Eigen::Success) throw Error("inverse_vacuum_expectation: factorization failed");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m.dimension()));
  const auto v = static_cast<Eigen::Index>(m.window().vacuum());
  rhs(v) = 1.0;
  const Eigen::VectorXcd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw Error("inverse_vacuum_expectation: solve failed");
  return x(v);
}

void write_binary(std::ostream& os, const FiniteSectionOperator& m) {
  os.write("NCT0", 4);
  put_u32(os, static_cast<std::uint32_t>(m.dimension()));
  put_u32(os, static_cast<std::uint32_t>(m.window().bandwidth()));
  put_u32(os, 0u);
  const Eigen::SparseMatrix<cplx, Eigen::RowMajor> rows(m.entries());
  const auto dim = static_cast<Eigen::Index>(m.dimension());
  for (Eigen::Index r = 0; r < dim; ++r) {
    Eigen::Index next = 0;
    for (Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it) {
      for (; next < it.col(); ++next) {
        put_f64(os, 0.0);
        put_f64(os, 0.0);
      }
      put_f64(os, it.value().real());
      put_f64(os, it.value().imag());
      next = it.col() + 1;
    }
    for (; next < dim; ++next) {
      put_f64(os, 0.0);
      put_f64(os, 0.0);
    }
  }
}

FiniteSectionOperator read_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "NCT0", 4) != 0) throw Error("binary matrix: bad magic");
  const std::uint32_t dim = get_u32(is);
  const std::uint32_t bw = get_u32(is);
  (void)get_u32(is);
  const BasisWindow w(static_cast<int>(bw));
  if (w.dimension() != dim) throw Error("binary matrix: dimension does not match bandwidth");
  std::vector<Triplet> t;
  for (std::uint32_t r = 0; r < dim; ++r)
    for (std::uint32_t c = 0; c < dim; ++c) {
      const double re = get_f64(is);
      const double im = get_f64(is);
      if (re != 0.0 || im != 0.0) t.emplace_back(r, c, cplx(re, im));
    }
  return {w, from_triplets(dim, t), false};
}

void write_eigenvalues_csv(std::ostream& os, const std::vector<double>& values) {
  os << "index,eigenvalue\r\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto res = std::to_chars(buf, buf + sizeof buf, values[i]);
    os << i << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << "\r\n";
  }
}

}  // namespace nct
