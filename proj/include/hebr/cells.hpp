#pragma once

#include <string>

#include "hebr/rng.hpp"
#include "hebr/types.hpp"

namespace hebr {

enum class CellKind {
  AveragePooling,
  LinearRecurrent,
  Gated,
  LongShortTermMemory,
};

const char* cell_kind_name(CellKind k);
CellKind cell_kind_from_name(const std::string& name);

/// Rows-per-hidden-unit of the stacked gate matrices (1 for the linear and
/// pooling cells, 3 for the gated cell, 4 for the LSTM).
int cell_gate_rows(CellKind k);

/// Weights of one recurrent cell. Gate blocks are stacked row-wise:
/// Gated = [update; reset; candidate], LSTM = [input; forget; candidate; output].
/// AveragePooling keeps only Wx (the learned projection).
struct CellParams {
  CellKind kind = CellKind::LongShortTermMemory;
  int input_dim = 0;
  int hidden_dim = 0;
  Mat Wx;  // (gate_rows*hidden) x input
  Mat Wh;  // (gate_rows*hidden) x hidden
  Vec b;   // gate_rows*hidden
};

CellParams make_cell(CellKind kind, int input_dim, int hidden_dim);

/// Running state for a block of sequences; one row per sequence. `aux` is the
/// LSTM memory or the pooling running sum, depending on kind.
struct CellState {
  Mat h;
  Mat aux;
  int t = 0;
};

CellState make_state(const CellParams& p, int batch = 1);

/// Advances `state` by one step for the whole block. x_t is (batch x input_dim).
void cell_step(const CellParams& p, const Mat& x_t, CellState& state);

/// Everything backprop needs, recorded per step during the cached forward.
struct CellCache {
  const MatSeq* x = nullptr;  // borrowed; must outlive the backward pass
  MatSeq h;                   // hidden after each step
  MatSeq acts;                // gate activations (Gated / LSTM)
  MatSeq aux;                 // LSTM memory, or Gated reset*h_prev products
  MatSeq aux2;                // LSTM tanh(memory)
};

/// Encodes a block of sequences from the all-zero state; no lookahead.
MatSeq cell_forward(const CellParams& p, const MatSeq& xs);
const MatSeq& cell_forward(const CellParams& p, const MatSeq& xs, CellCache& cache);

/// Reverse-mode pass; accumulates parameter gradients into `grads` (a
/// zero-initialized CellParams of the same shape) and returns gradients
/// w.r.t. the inputs.
MatSeq cell_backward(const CellParams& p, const CellCache& cache, const MatSeq& upstream,
                     CellParams& grads);

}  // namespace hebr
