#include "primix/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace primix {

namespace {

inline Vec sigmoid(const Vec& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Mat uniform_matrix(Index rows, Index cols, double bound, Rng& rng) {
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

LstmParams LstmParams::init(int input, int hidden, int layers, int output, Rng& rng) {
    if (input < 1 || hidden < 1 || layers < 1 || output < 1)
        throw std::invalid_argument("lstm: sizes must be positive");
    LstmParams p;
    p.input_size = input;
    p.hidden_size = hidden;
    p.output_size = output;
    for (int l = 0; l < layers; ++l) {
        const int in = l == 0 ? input : hidden;
        const double bx = 1.0 / std::sqrt(static_cast<double>(in));
        const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
        p.cells.push_back({uniform_matrix(4 * hidden, in, bx, rng),
                           uniform_matrix(4 * hidden, hidden, bh, rng),
                           Vec::Zero(4 * hidden)});
    }
    p.w_out = uniform_matrix(output, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    p.b_out = Vec::Zero(output);
    return p;
}

LstmState LstmState::zeros(const LstmParams& params) {
    LstmState s;
    for (Index l = 0; l < params.layer_count(); ++l) {
        s.h.push_back(Vec::Zero(params.hidden_size));
        s.c.push_back(Vec::Zero(params.hidden_size));
    }
    return s;
}

Vec lstm_step(const LstmParams& params, LstmState& state, const Vec& x) {
    LstmStepCache cache;
    return lstm_step(params, state, x, cache);
}

Vec lstm_step(const LstmParams& params, LstmState& state, const Vec& x,
              LstmStepCache& cache) {
    if (x.size() != params.input_size)
        throw std::invalid_argument("lstm_step: input size mismatch");
    if (state.empty()) state = LstmState::zeros(params);

    const Index layers = params.layer_count();
    const int h = params.hidden_size;
    cache.x = x;
    cache.gate_i.resize(layers);
    cache.gate_f.resize(layers);
    cache.gate_g.resize(layers);
    cache.gate_o.resize(layers);
    cache.c_prev.resize(layers);
    cache.h_prev.resize(layers);
    cache.c.resize(layers);
    cache.c_tanh.resize(layers);
    cache.h.resize(layers);

    Vec in = x;
    for (Index l = 0; l < layers; ++l) {
        const auto& cell = params.cells[l];
        cache.c_prev[l] = state.c[l];
        cache.h_prev[l] = state.h[l];

        const Vec z = cell.w_x * in + cell.w_h * state.h[l] + cell.b;
        cache.gate_i[l] = sigmoid(z.segment(0, h));
        cache.gate_f[l] = sigmoid(z.segment(h, h));
        cache.gate_g[l] = z.segment(2 * h, h).array().tanh().matrix();
        cache.gate_o[l] = sigmoid(z.segment(3 * h, h));

        cache.c[l] = cache.gate_f[l].cwiseProduct(state.c[l]) +
                     cache.gate_i[l].cwiseProduct(cache.gate_g[l]);
        cache.c_tanh[l] = cache.c[l].array().tanh().matrix();
        cache.h[l] = cache.gate_o[l].cwiseProduct(cache.c_tanh[l]);

        state.c[l] = cache.c[l];
        state.h[l] = cache.h[l];
        in = cache.h[l];
    }
    return params.w_out * in + params.b_out;
}

LstmGrads LstmGrads::zeros_like(const LstmParams& params) {
    LstmGrads g;
    for (const auto& cell : params.cells) {
        g.w_x.push_back(Mat::Zero(cell.w_x.rows(), cell.w_x.cols()));
        g.w_h.push_back(Mat::Zero(cell.w_h.rows(), cell.w_h.cols()));
        g.b.push_back(Vec::Zero(cell.b.size()));
    }
    g.w_out = Mat::Zero(params.w_out.rows(), params.w_out.cols());
    g.b_out = Vec::Zero(params.b_out.size());
    return g;
}

void LstmGrads::set_zero() {
    for (auto& m : w_x) m.setZero();
    for (auto& m : w_h) m.setZero();
    for (auto& v : b) v.setZero();
    w_out.setZero();
    b_out.setZero();
}

void lstm_backward(const LstmParams& params, const std::vector<LstmStepCache>& caches,
                   const std::vector<Vec>& dys, LstmGrads* grads) {
    if (caches.size() != dys.size())
        throw std::invalid_argument("lstm_backward: cache/grad length mismatch");
    const Index layers = params.layer_count();
    const int h = params.hidden_size;
    const Index steps = static_cast<Index>(caches.size());

    std::vector<Vec> dh_next(layers, Vec::Zero(h));
    std::vector<Vec> dc_next(layers, Vec::Zero(h));

    for (Index t = steps; t-- > 0;) {
        const auto& cache = caches[t];

        // Head
        if (grads) {
            grads->w_out.noalias() += dys[t] * cache.h[layers - 1].transpose();
            grads->b_out += dys[t];
        }
        Vec d_from_above = params.w_out.transpose() * dys[t];

        for (Index l = layers; l-- > 0;) {
            Vec dh = dh_next[l] + d_from_above;
            Vec dc = dc_next[l] + dh.cwiseProduct(cache.gate_o[l])
                                      .cwiseProduct((1.0 - cache.c_tanh[l].array().square()).matrix());

            const Vec di = dc.cwiseProduct(cache.gate_g[l]);
            const Vec df = dc.cwiseProduct(cache.c_prev[l]);
            const Vec dg = dc.cwiseProduct(cache.gate_i[l]);
            const Vec do_ = dh.cwiseProduct(cache.c_tanh[l]);

            Vec dz(4 * h);
            dz.segment(0, h) =
                di.cwiseProduct(cache.gate_i[l].cwiseProduct((1.0 - cache.gate_i[l].array()).matrix()));
            dz.segment(h, h) =
                df.cwiseProduct(cache.gate_f[l].cwiseProduct((1.0 - cache.gate_f[l].array()).matrix()));
            dz.segment(2 * h, h) =
                dg.cwiseProduct((1.0 - cache.gate_g[l].array().square()).matrix());
            dz.segment(3 * h, h) =
                do_.cwiseProduct(cache.gate_o[l].cwiseProduct((1.0 - cache.gate_o[l].array()).matrix()));

            const Vec& layer_in = l == 0 ? cache.x : cache.h[l - 1];
            if (grads) {
                grads->w_x[l].noalias() += dz * layer_in.transpose();
                grads->w_h[l].noalias() += dz * cache.h_prev[l].transpose();
                grads->b[l] += dz;
            }

            dh_next[l] = params.cells[l].w_h.transpose() * dz;
            dc_next[l] = dc.cwiseProduct(cache.gate_f[l]);
            d_from_above = params.cells[l].w_x.transpose() * dz;  // flows to layer below
        }
    }
}

}  // namespace primix
