#include "tcast/nn/layers.hpp"

#include <cmath>
#include <limits>

namespace tcast::nn {

namespace {

double elu(double x) {
    return x > 0.0 ? x : std::expm1(x);
}

double elu_grad(double x) {
    return x > 0.0 ? 1.0 : std::exp(x);
}

} // namespace

Matrix gat_forward(const Matrix& features, const Matrix& adjacency, const GatLayerParams& params, GatCache* cache) {
    const auto n = features.rows();
    if (adjacency.rows() != n || adjacency.cols() != n) {
        throw DataError("adjacency shape does not match the node count");
    }
    if (features.cols() != params.in_dim()) {
        throw DataError("feature width does not match the GAT input width");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!((adjacency.row(i).array() > 0.0).any())) {
            throw DataError("node " + std::to_string(i) + " has no neighbors, not even itself");
        }
    }
    const auto heads = params.heads();
    const auto d = params.head_dim();
    Matrix out(n, params.out_dim());
    if (cache) {
        cache->z.assign(static_cast<std::size_t>(heads), Matrix());
        cache->u.assign(static_cast<std::size_t>(heads), Matrix());
        cache->alpha.assign(static_cast<std::size_t>(heads), Matrix());
        cache->m.assign(static_cast<std::size_t>(heads), Matrix());
    }
    for (int k = 0; k < heads; ++k) {
        const auto& a = params.a[static_cast<std::size_t>(k)];
        Matrix z = features * params.W[static_cast<std::size_t>(k)];
        const Vector self_score = z * a.head(d);
        const Vector neighbor_score = z * a.tail(d);
        Matrix u = Matrix::Zero(n, n);
        Matrix alpha = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double max_logit = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j) {
                const double w = adjacency(i, j);
                if (w > 0.0) {
                    const double uij = self_score(i) + neighbor_score(j);
                    u(i, j) = uij;
                    const double e = uij > 0.0 ? uij : params.leaky_slope * uij;
                    alpha(i, j) = e * w;
                    max_logit = std::max(max_logit, alpha(i, j));
                }
            }
            double total = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (adjacency(i, j) > 0.0) {
                    alpha(i, j) = std::exp(alpha(i, j) - max_logit);
                    total += alpha(i, j);
                }
            }
            alpha.row(i) /= total;
        }
        Matrix m = alpha * z;
        out.middleCols(k * d, d) = m.unaryExpr(&elu);
        if (cache) {
            const auto kk = static_cast<std::size_t>(k);
            cache->z[kk] = std::move(z);
            cache->u[kk] = std::move(u);
            cache->alpha[kk] = std::move(alpha);
            cache->m[kk] = std::move(m);
        }
    }
    return out;
}

Matrix gat_backward(const Matrix& features, const Matrix& adjacency, const GatLayerParams& params,
                    const GatCache& cache, const Matrix& d_output, GatLayerParams& grad) {
    const auto n = features.rows();
    const auto d = params.head_dim();
    Matrix d_features = Matrix::Zero(n, features.cols());
    for (int k = 0; k < params.heads(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const Matrix& z = cache.z[kk];
        const Matrix& u = cache.u[kk];
        const Matrix& alpha = cache.alpha[kk];
        const Matrix& m = cache.m[kk];
        const auto& a = params.a[kk];

        const Matrix d_m = d_output.middleCols(k * d, d).cwiseProduct(m.unaryExpr(&elu_grad));
        Matrix d_z = alpha.transpose() * d_m;
        const Matrix d_alpha = d_m * z.transpose();

        Vector d_self = Vector::Zero(n);
        Vector d_neighbor = Vector::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double dot = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                dot += alpha(i, j) * d_alpha(i, j);
            }
            for (Eigen::Index j = 0; j < n; ++j) {
                const double w = adjacency(i, j);
                if (!(w > 0.0)) {
                    continue;
                }
                const double d_logit = alpha(i, j) * (d_alpha(i, j) - dot);
                const double d_u = d_logit * w * (u(i, j) > 0.0 ? 1.0 : params.leaky_slope);
                d_self(i) += d_u;
                d_neighbor(j) += d_u;
            }
        }
        grad.a[kk].head(d) += z.transpose() * d_self;
        grad.a[kk].tail(d) += z.transpose() * d_neighbor;
        d_z.noalias() += d_self * a.head(d).transpose();
        d_z.noalias() += d_neighbor * a.tail(d).transpose();

        grad.W[kk].noalias() += features.transpose() * d_z;
        d_features.noalias() += d_z * params.W[kk].transpose();
    }
    return d_features;
}

} // namespace tcast::nn
