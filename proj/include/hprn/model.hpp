#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hprn/checkpoint.hpp"
#include "hprn/image.hpp"
#include "hprn/nn.hpp"
#include "hprn/slic.hpp"

namespace hprn {

/// Which residual unit(s) of each MRB host a TCRM.
enum class TcrmPosition { none, first, second, third, multi };

std::string to_string(TcrmPosition p);
TcrmPosition parse_tcrm_position(const std::string& s);

struct HPRNConfig {
  std::size_t bands = 31;
  std::size_t channels = 200;
  std::size_t n_mrb = 10;
  std::size_t tcrm_r = 16;
  std::size_t tcrm_grid_h = 4;
  std::size_t tcrm_grid_w = 4;
  TcrmPosition tcrm_position = TcrmPosition::third;
  std::size_t attention_heads = 4;
  bool attention_scaling = true;
  bool use_ssrm = true;
  std::size_t ssrm_groups = 64;
  std::vector<std::size_t> ssrm_scales{8, 12, 16, 20};
  bool ssrm_shared_embedding = true;
  bool ssrm_residual = true;
  double sopc_tau = 2.0;
  double slic_compactness = 10.0;
  std::size_t slic_max_iters = 10;

  /// Throws ContractError on non-positive sizes or inconsistent heads.
  void validate() const;
  /// Width of the TCRM squeeze layer: max(1, floor(C / r)).
  std::size_t reduced_channels() const;
  SlicParams slic_params() const;
};

// ---------------------------------------------------------------------------
// TCRM: grid pooling -> self-attention over channels -> row mean -> gate.

template <typename T>
struct TCRM {
  std::size_t grid_h = 4;
  std::size_t grid_w = 4;
  MultiHeadAttention<T> attention;
  Conv2D<T> down;  // 1x1, C -> reduced
  PReLU<T> act;
  Conv2D<T> up;    // 1x1, reduced -> C
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

template <typename T>
TCRM<T> make_tcrm(std::size_t channels, const HPRNConfig& cfg, Rng& rng);

/// Rescales each channel of x [C x H x W] by its gate in (0,1). When `gate`
/// is non-null it receives the [C] gate vector.
template <typename T>
Tensor<T> tcrm_forward(const Tensor<T>& x, const TCRM<T>& tcrm, Tensor<T>* gate = nullptr);

// ---------------------------------------------------------------------------
// MRB: three residual units (conv3x3 -> PReLU -> conv3x3) plus a block skip.

template <typename T>
struct ResidualUnit {
  Conv2D<T> conv_a;
  PReLU<T> act;
  Conv2D<T> conv_b;
  std::optional<TCRM<T>> tcrm;
};

template <typename T>
struct MRB {
  std::array<ResidualUnit<T>, 3> units;
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

template <typename T>
MRB<T> make_mrb(const HPRNConfig& cfg, Rng& rng);

template <typename T>
Tensor<T> mrb_forward(const Tensor<T>& x, const MRB<T>& mrb);

// ---------------------------------------------------------------------------
// Semantic ordering used by SSRM.

/// Pixel order for one label map: pixels sorted by (category, raster index),
/// where categories are ranked by first raster appearance so the order does
/// not depend on label ids. The sorted sequence is cut into `groups` groups
/// of N = ceil(HW/groups) items; missing tail slots mirror the sequence end.
struct SemanticOrder {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t groups = 0;
  std::size_t group_size = 0;
  std::vector<std::size_t> slot_to_pixel;  // [groups * group_size]
  std::vector<std::size_t> pixel_to_slot;  // [HW], primary slot per pixel

  std::size_t pixels() const { return height * width; }
  std::size_t mirror_fill() const { return groups * group_size - pixels(); }
};

SemanticOrder make_semantic_order(const LabelMap& labels, std::size_t groups);

/// [B x H x W] -> [G x N x B] (items_first) or [G x B x N].
enum class GroupLayout { items_first, features_first };

template <typename T>
Tensor<T> unfold_order(const Tensor<T>& feat, const SemanticOrder& order,
                       GroupLayout layout = GroupLayout::items_first);

template <typename T>
std::pair<Tensor<T>, SemanticOrder> unfold_order(const Tensor<T>& feat, const LabelMap& labels,
                                                 std::size_t groups,
                                                 GroupLayout layout = GroupLayout::items_first);

/// Inverse of unfold_order for [G x N x B] input; mirror-filled slots are dropped.
template <typename T>
Tensor<T> fold_reorder(const Tensor<T>& grouped, const SemanticOrder& order);

// ---------------------------------------------------------------------------
// SSRM.

template <typename T>
struct SSRMScale {
  Conv2D<T> phi;                // 1x1 embedding D (and E when shared)
  std::optional<Conv2D<T>> psi; // separate embedding E when not shared
  Conv2D<T> chi;                // 1x1 value embedding Y
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct SSRM {
  std::size_t groups = 64;
  bool residual = true;
  std::vector<SSRMScale<T>> scales;
  Conv2D<T> fusion;  // 1x1, scales*B -> B
  void collect(ParameterList<T>& out, const std::string& prefix) const;
};

template <typename T>
SSRM<T> make_ssrm(const HPRNConfig& cfg, Rng& rng);

/// Z = softmax(D''·E'') per group, output = fold(Z·Y''). When `relation` is
/// non-null it receives Z [G x N x N].
template <typename T>
Tensor<T> ssrm_single_scale(const Tensor<T>& coarse, const SSRMScale<T>& module,
                            const SemanticOrder& order, Tensor<T>* relation = nullptr);

/// Concatenates per-scale outputs, fuses with a 1x1 conv, and adds the
/// coarse input when the residual is enabled.
template <typename T>
Tensor<T> ssrm_multiscale(const Tensor<T>& coarse, const SSRM<T>& ssrm,
                          const std::vector<SemanticOrder>& orders);

// ---------------------------------------------------------------------------

template <typename T>
struct HPRN {
  HPRNConfig config;
  Conv2D<T> head;         // 3 -> C, shallow features F0
  std::vector<MRB<T>> blocks;
  Conv2D<T> grs;          // C -> C, added to F0
  Conv2D<T> reconstruct;  // C -> B, coarse estimate
  std::optional<SSRM<T>> ssrm;

  ParameterList<T> parameters() const;

  /// rgb [3 x H x W] -> [B x H x W]. One label map per configured scale.
  Tensor<T> forward(const Tensor<T>& rgb, const std::vector<LabelMap>& labels) const;
  Tensor<T> forward(const Tensor<T>& rgb, const std::vector<SemanticOrder>& orders) const;
  /// Everything before SSRM.
  Tensor<T> coarse(const Tensor<T>& rgb) const;
  std::vector<SemanticOrder> orders_for(const std::vector<LabelMap>& labels) const;
};

template <typename T>
HPRN<T> make_hprn(const HPRNConfig& cfg, std::uint64_t seed);

/// Segments the image at the configured scales and reconstructs the cube.
template <typename T>
SpectralCube hprn_forward(const HPRN<T>& model, const RgbImage& rgb);

}  // namespace hprn
