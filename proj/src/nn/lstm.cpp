#include "tcast/nn/layers.hpp"

#include <cmath>

namespace tcast::nn {

namespace {

Matrix sigmoid(const Matrix& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix gate_input(const Matrix& x, const Matrix& h_prev, const Matrix& W, const Matrix& U, const Vector& b) {
    Matrix pre = x * W.transpose();
    pre.noalias() += h_prev * U.transpose();
    pre.rowwise() += b.transpose();
    return pre;
}

} // namespace

std::vector<Matrix> lstm_forward(const std::vector<Matrix>& inputs, const LstmParams& p, LstmCache* cache,
                                 const std::optional<LstmState>& initial) {
    const auto hidden = p.hidden();
    const auto n = inputs.empty() ? 0 : inputs.front().rows();
    Matrix h = initial ? initial->h : Matrix::Zero(n, hidden);
    Matrix c = initial ? initial->c : Matrix::Zero(n, hidden);
    if (cache) {
        *cache = LstmCache{};
        cache->h0 = h;
        cache->c0 = c;
    }
    std::vector<Matrix> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) {
        if (x.cols() != p.input_dim()) {
            throw DataError("LSTM input width does not match its weights");
        }
        const Matrix f = sigmoid(gate_input(x, h, p.W_f, p.U_f, p.b_f));
        const Matrix i = sigmoid(gate_input(x, h, p.W_i, p.U_i, p.b_i));
        const Matrix o = sigmoid(gate_input(x, h, p.W_o, p.U_o, p.b_o));
        const Matrix g = gate_input(x, h, p.W_c, p.U_c, p.b_c).array().tanh().matrix();
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        h = o.cwiseProduct(c.array().tanh().matrix());
        if (cache) {
            cache->x.push_back(x);
            cache->f.push_back(f);
            cache->i.push_back(i);
            cache->o.push_back(o);
            cache->g.push_back(g);
            cache->c.push_back(c);
            cache->h.push_back(h);
        }
        out.push_back(h);
    }
    return out;
}

std::vector<Matrix> lstm_backward(const LstmParams& p, const LstmCache& cache, const std::vector<Matrix>& d_hidden,
                                  LstmParams& grad) {
    const auto steps = cache.h.size();
    std::vector<Matrix> d_inputs(steps);
    if (steps == 0) {
        return d_inputs;
    }
    Matrix dh_next = Matrix::Zero(cache.h0.rows(), cache.h0.cols());
    Matrix dc_next = dh_next;
    for (std::size_t s = steps; s-- > 0;) {
        const Matrix& f = cache.f[s];
        const Matrix& i = cache.i[s];
        const Matrix& o = cache.o[s];
        const Matrix& g = cache.g[s];
        const Matrix& c_prev = s == 0 ? cache.c0 : cache.c[s - 1];
        const Matrix& h_prev = s == 0 ? cache.h0 : cache.h[s - 1];
        const Matrix& x = cache.x[s];

        const Matrix dh = d_hidden[s] + dh_next;
        const Matrix tc = cache.c[s].array().tanh().matrix();
        const Matrix d_o = dh.cwiseProduct(tc);
        const Matrix dc = dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;

        const Matrix d_pre_f = dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
        const Matrix d_pre_i = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
        const Matrix d_pre_o = d_o.cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
        const Matrix d_pre_g = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
        dc_next = dc.cwiseProduct(f);

        grad.W_f.noalias() += d_pre_f.transpose() * x;
        grad.W_i.noalias() += d_pre_i.transpose() * x;
        grad.W_o.noalias() += d_pre_o.transpose() * x;
        grad.W_c.noalias() += d_pre_g.transpose() * x;
        grad.U_f.noalias() += d_pre_f.transpose() * h_prev;
        grad.U_i.noalias() += d_pre_i.transpose() * h_prev;
        grad.U_o.noalias() += d_pre_o.transpose() * h_prev;
        grad.U_c.noalias() += d_pre_g.transpose() * h_prev;
        grad.b_f += d_pre_f.colwise().sum().transpose();
        grad.b_i += d_pre_i.colwise().sum().transpose();
        grad.b_o += d_pre_o.colwise().sum().transpose();
        grad.b_c += d_pre_g.colwise().sum().transpose();

        Matrix dx = d_pre_f * p.W_f;
        dx.noalias() += d_pre_i * p.W_i;
        dx.noalias() += d_pre_o * p.W_o;
        dx.noalias() += d_pre_g * p.W_c;
        d_inputs[s] = std::move(dx);

        Matrix dhp = d_pre_f * p.U_f;
        dhp.noalias() += d_pre_i * p.U_i;
        dhp.noalias() += d_pre_o * p.U_o;
        dhp.noalias() += d_pre_g * p.U_c;
        dh_next = std::move(dhp);
    }
    return d_inputs;
}

} // namespace tcast::nn
