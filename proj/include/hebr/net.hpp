#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hebr/cells.hpp"
#include "hebr/data.hpp"

namespace hebr {

/// Architecture switches. The hierarchical model encodes usage, NTL and
/// temperature separately, fuses NTL->usage and temperature->usage with
/// attention, fuses the two products, encodes once more and mean-pools into
/// the two-class output map. Dropping a source collapses the level above it;
/// `flat_concat` replaces the hierarchy with one encoder over the
/// channel-concatenated input.
struct HebrConfig {
  CellKind cell_kind = CellKind::LongShortTermMemory;
  int window_days = 180;  // T
  int d_e = 32, d_l = 8, d_c = 8;
  int d_ec = 32, d_el = 32, d_elc = 32;

  bool use_temperature = true;
  bool use_ntl = true;
  bool use_multistep_fusion = true;
  bool use_attention = true;
  bool flat_concat = false;

  static constexpr int kUsageDim = 3;
  static constexpr int kNtlDim = 1;
  static constexpr int kTempDim = 2;
  static constexpr int kFlatDim = kUsageDim + kNtlDim + kTempDim;

  /// Canonical variant names: full, no_temperature, no_ntl, usage_only,
  /// no_fusion, no_attention, no_fusion_no_attention, mrnn_flat.
  static HebrConfig variant(const std::string& name, HebrConfig base);
  std::string variant_name() const;

  bool hierarchical() const { return !flat_concat && (use_ntl || use_temperature); }
  bool two_branches() const { return !flat_concat && use_ntl && use_temperature; }
  int final_dim() const;
  void validate() const;
};

struct HebrParams {
  HebrConfig cfg;
  CellParams enc_e, enc_l, enc_c;  // level 1; enc_e doubles as the flat encoder
  Mat fuse_l_to_e, fuse_c_to_e;    // d_e x d_l, d_e x d_c
  Vec attn_el, attn_ec;            // 2*d_e
  CellParams enc_ec, enc_el;       // level 2, input 2*d_e
  Mat fuse_el_to_ec;               // d_ec x d_el
  Vec attn_elc;                    // 2*d_ec
  CellParams enc_elc;              // level 3, input 2*d_ec
  Mat out_W;                       // 2 x final_dim
  Vec out_b;                       // 2
};

/// Zero-initialized parameters shaped for the given config; only the tensors
/// the variant actually uses are allocated.
HebrParams make_params(const HebrConfig& cfg);

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor.
void init_params(HebrParams& p, Rng& rng);

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
};

/// Enumerates the live tensors in a fixed order; the optimizer, the
/// serializer and the finite-difference checker all walk this list.
std::vector<TensorRef> tensor_refs(HebrParams& p);

/// Per-sample attention score vectors (rows sum to 1); empty when the variant
/// has no corresponding fusion layer.
struct AttentionTraceBlock {
  Mat alpha_ec, alpha_el, alpha_elc;  // each B x T or empty
};

/// Model input for a block of samples: seq[t] is (B x channel_dim).
struct NetInput {
  MatSeq e, l, c;
  int steps() const { return static_cast<int>(e.size()); }
  int batch() const { return e.empty() ? 0 : static_cast<int>(e.front().rows()); }
};

NetInput build_input(const Dataset& d, const NormStats& norm, const HebrConfig& cfg,
                     std::span<const Sample> samples);

struct FuseAttnCache {
  const MatSeq* h = nullptr;
  const MatSeq* hp = nullptr;
  MatSeq u;           // W * hp_t
  MatSeq fused;       // pre-activation rows (B x 2d)
  MatSeq tanh_fused;
  Mat alpha;          // B x T
  MatSeq out;
};

struct NetCache {
  const NetInput* in = nullptr;
  CellCache enc_e, enc_l, enc_c, enc_ec, enc_el, enc_elc;
  FuseAttnCache fuse_el, fuse_ec, fuse_elc;
  Mat pooled;  // B x final_dim
  Mat logits;  // B x 2
  Vec prob;    // theft-class probability
};

/// Forward pass over a block; returns the theft-class probability per row.
/// The cache is required (it is cheap to reuse across blocks); traces are
/// filled when a non-null pointer is given.
Vec net_forward(const HebrParams& p, const NetInput& in, NetCache& cache,
                AttentionTraceBlock* traces = nullptr);

/// Reverse pass from dL/dprob; accumulates into `grads` (zeroed by caller).
void net_backward(const HebrParams& p, const NetCache& cache, const Vec& dprob,
                  HebrParams& grads);

/// Scores samples in fixed-size blocks (parallel over blocks, results placed
/// by index, so thread count never changes the output).
struct ScoreResult {
  Vec prob;        // n
  Mat alpha_elc;   // n x T when the variant produces it, else 0 x 0
};
ScoreResult score_samples(const HebrParams& p, const Dataset& d, const NormStats& norm,
                          const std::vector<Sample>& samples, int threads,
                          bool want_traces = false);

}  // namespace hebr
