#include "possmix/indicators.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace possmix {

namespace {

double norm1(const Matrix& m) {
    double best = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
        double col = 0.0;
        for (int i = 0; i < m.rows(); ++i) col += std::abs(m(i, j));
        best = std::max(best, col);
    }
    return best;
}

}  // namespace

TransitionBlocks decompose_transition(const Matrix& gamma_mat) {
    if (gamma_mat.rows() != gamma_mat.cols() || gamma_mat.rows() < 2)
        throw std::invalid_argument("decompose_transition: matrix must be (E+1)x(E+1)");
    const int E = gamma_mat.rows() - 1;
    TransitionBlocks b;
    b.a.resize(E);
    for (int e = 0; e < E; ++e) b.a[e] = gamma_mat(0, e);
    b.r = gamma_mat(0, E);
    b.Q = Matrix(E, E);
    b.R.resize(E);
    for (int i = 0; i < E; ++i) {
        for (int j = 0; j < E; ++j) b.Q(i, j) = gamma_mat(i + 1, j);
        b.R[i] = gamma_mat(i + 1, E);
    }
    return b;
}

Matrix fundamental_matrix(const Matrix& Q, bool* cond_warning) {
    const int E = Q.rows();
    if (Q.cols() != E) throw std::invalid_argument("fundamental_matrix: Q must be square");

    // A = I - Q, factored in place with partial pivoting.
    Matrix A(E, E);
    for (int i = 0; i < E; ++i)
        for (int j = 0; j < E; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - Q(i, j);
    const double a_norm = norm1(A);

    std::vector<int> piv(E);
    for (int col = 0; col < E; ++col) {
        int best = col;
        for (int i = col + 1; i < E; ++i)
            if (std::abs(A(i, col)) > std::abs(A(best, col))) best = i;
        piv[col] = best;
        if (best != col)
            for (int j = 0; j < E; ++j) std::swap(A(col, j), A(best, j));
        if (A(col, col) == 0.0) throw std::runtime_error("non-transient chain: I - Q is singular");
        for (int i = col + 1; i < E; ++i) {
            A(i, col) /= A(col, col);
            for (int j = col + 1; j < E; ++j) A(i, j) -= A(i, col) * A(col, j);
        }
    }

    Matrix F(E, E);
    std::vector<double> x(E);
    for (int rhs = 0; rhs < E; ++rhs) {
        for (int i = 0; i < E; ++i) x[i] = (i == rhs) ? 1.0 : 0.0;
        for (int col = 0; col < E; ++col)
            if (piv[col] != col) std::swap(x[col], x[piv[col]]);
        for (int i = 1; i < E; ++i)
            for (int j = 0; j < i; ++j) x[i] -= A(i, j) * x[j];
        for (int i = E - 1; i >= 0; --i) {
            for (int j = i + 1; j < E; ++j) x[i] -= A(i, j) * x[j];
            x[i] /= A(i, i);
        }
        for (int i = 0; i < E; ++i) F(i, rhs) = x[i];
    }

    if (cond_warning) *cond_warning = a_norm * norm1(F) > 1e12;
    return F;
}

ExpectedCounts expected_counts(const Matrix& gamma_mat) {
    TransitionBlocks b = decompose_transition(gamma_mat);
    const int E = static_cast<int>(b.a.size());
    Matrix F = fundamental_matrix(b.Q);
    ExpectedCounts out;
    out.kappa.assign(E, 0.0);
    for (int j = 0; j < E; ++j)
        for (int i = 0; i < E; ++i) out.kappa[j] += b.a[i] * F(i, j);
    double visits = 0.0;
    for (int j = 0; j < E; ++j) visits += out.kappa[j];
    out.lambda = 1.0 + visits;
    return out;
}

double expected_duration(const Matrix& gamma_mat,
                         const std::vector<std::array<double, 2>>& rho_k) {
    const int E = gamma_mat.rows() - 1;
    if (static_cast<int>(rho_k.size()) != E + 1)
        throw std::invalid_argument("expected_duration: rho must have E+1 entries");
    ExpectedCounts counts = expected_counts(gamma_mat);
    double zeta = rho_k[E][0] * rho_k[E][1];  // the absorbing event's dt
    for (int e = 0; e < E; ++e) zeta += counts.kappa[e] * rho_k[e][0] * rho_k[e][1];
    return zeta;
}

ClusterIndicators indicators_for(const MixtureParams& params) {
    ClusterIndicators out;
    out.K = params.K;
    out.E = params.E;
    out.lambda.resize(params.K);
    out.zeta.resize(params.K);
    out.kappa = Matrix(params.K, params.E);
    for (int k = 0; k < params.K; ++k) {
        ExpectedCounts counts = expected_counts(params.gamma[k]);
        out.lambda[k] = counts.lambda;
        for (int e = 0; e < params.E; ++e) out.kappa(k, e) = counts.kappa[e];
        out.zeta[k] = expected_duration(params.gamma[k], params.rho[k]);
    }
    return out;
}

}  // namespace possmix
