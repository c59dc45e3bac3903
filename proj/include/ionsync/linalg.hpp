#pragma once

// Thin LAPACK bindings for the dense complex problems the Liouvillian needs:
// general eigendecomposition (zgeev).

#include <complex>
#include <string>

#ifndef LAPACK_COMPLEX_CUSTOM
#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <Eigen/Dense>

#include "ionsync/error.hpp"

namespace ionsync::linalg {

struct EigenDecomposition {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd left;  // columns u_j with u_j^H A = λ_j u_j^H, unit 2-norm
    Eigen::MatrixXcd right; // columns v_j with A v_j = λ_j v_j, unit 2-norm
};

/// Eigenvalues (and optionally left/right eigenvectors) of a general complex matrix.
inline EigenDecomposition eig(Eigen::MatrixXcd a, bool want_vectors) {
    if (a.rows() != a.cols()) throw eigensolver_error("eig: matrix is not square");
    const lapack_int n = static_cast<lapack_int>(a.rows());
    EigenDecomposition out;
    out.values.resize(n);
    const char job = want_vectors ? 'V' : 'N';
    if (want_vectors) {
        out.left.resize(n, n);
        out.right.resize(n, n);
    }
    std::complex<double> dummy;
    const lapack_int info = LAPACKE_zgeev(
        LAPACK_COL_MAJOR, job, job, n, a.data(), n, out.values.data(),
        want_vectors ? out.left.data() : &dummy, n, want_vectors ? out.right.data() : &dummy, n);
    if (info != 0) throw eigensolver_error("zgeev failed, info = " + std::to_string(info));
    return out;
}

} // namespace ionsync::linalg
