#pragma once

#include <vector>

#include "primix/rng.hpp"
#include "primix/types.hpp"

namespace primix {

/// Stacked LSTM with a linear output head. Gate rows are packed in the order
/// input, forget, candidate, output (4*hidden rows per cell matrix).
struct LstmParams {
    struct Cell {
        Mat w_x;  // 4H x in
        Mat w_h;  // 4H x H
        Vec b;    // 4H
    };
    std::vector<Cell> cells;
    Mat w_out;  // out x H
    Vec b_out;

    int input_size = 0;
    int hidden_size = 0;
    int output_size = 0;

    static LstmParams init(int input, int hidden, int layers, int output, Rng& rng);
    Index layer_count() const { return static_cast<Index>(cells.size()); }
};

/// Per-layer (hidden, cell) vectors; zeroed at sequence start.
struct LstmState {
    std::vector<Vec> h;
    std::vector<Vec> c;

    static LstmState zeros(const LstmParams& params);
    bool empty() const { return h.empty(); }
};

/// One recurrent step; advances state in place and returns the head output.
Vec lstm_step(const LstmParams& params, LstmState& state, const Vec& x);

/// Saved intermediates of one step, for backprop through time.
struct LstmStepCache {
    Vec x;
    std::vector<Vec> gate_i, gate_f, gate_g, gate_o;  // post-nonlinearity
    std::vector<Vec> c_prev, h_prev, c, c_tanh, h;
};

Vec lstm_step(const LstmParams& params, LstmState& state, const Vec& x,
              LstmStepCache& cache);

struct LstmGrads {
    std::vector<Mat> w_x, w_h;
    std::vector<Vec> b;
    Mat w_out;
    Vec b_out;

    static LstmGrads zeros_like(const LstmParams& params);
    void set_zero();
};

/// Backprop through time over a cached forward pass of a whole sequence.
/// dys[t] is dLoss/dOutput at step t; gradients accumulate into *grads.
void lstm_backward(const LstmParams& params, const std::vector<LstmStepCache>& caches,
                   const std::vector<Vec>& dys, LstmGrads* grads);

}  // namespace primix
