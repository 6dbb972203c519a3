#include "hprn/model.hpp"

#include <algorithm>
#include <cmath>

#include "hprn/ops.hpp"

namespace hprn {

std::string to_string(TcrmPosition p) {
  switch (p) {
    case TcrmPosition::none: return "none";
    case TcrmPosition::first: return "1";
    case TcrmPosition::second: return "2";
    case TcrmPosition::third: return "3";
    case TcrmPosition::multi: return "multi";
  }
  return "?";
}

TcrmPosition parse_tcrm_position(const std::string& s) {
  if (s == "none") return TcrmPosition::none;
  if (s == "1") return TcrmPosition::first;
  if (s == "2") return TcrmPosition::second;
  if (s == "3") return TcrmPosition::third;
  if (s == "multi") return TcrmPosition::multi;
  throw ContractError("tcrm_position must be one of none|1|2|3|multi, got '" + s + "'");
}

void HPRNConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractError(std::string(name) + " must be positive");
  };
  positive(bands, "bands");
  positive(channels, "channels");
  positive(n_mrb, "n_mrb");
  positive(tcrm_r, "tcrm_r");
  positive(tcrm_grid_h, "tcrm_grid_h");
  positive(tcrm_grid_w, "tcrm_grid_w");
  positive(attention_heads, "attention_heads");
  positive(ssrm_groups, "ssrm_groups");
  positive(slic_max_iters, "slic_max_iters");
  if (use_ssrm && ssrm_scales.empty()) throw ContractError("ssrm_scales must not be empty");
  for (auto s : ssrm_scales) positive(s, "ssrm_scales entry");
  if ((tcrm_grid_h * tcrm_grid_w) % attention_heads != 0) {
    throw ContractError("TCRM token dim " + std::to_string(tcrm_grid_h * tcrm_grid_w) +
                        " not divisible by attention_heads " + std::to_string(attention_heads));
  }
  if (!(sopc_tau >= 0)) throw ContractError("sopc_tau must be >= 0");
  if (!(slic_compactness > 0)) throw ContractError("slic_compactness must be > 0");
}

std::size_t HPRNConfig::reduced_channels() const { return std::max<std::size_t>(1, channels / tcrm_r); }

SlicParams HPRNConfig::slic_params() const {
  SlicParams p;
  p.compactness = slic_compactness;
  p.max_iters = slic_max_iters;
  return p;
}

// ---------------------------------------------------------------------------

template <typename T>
void TCRM<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  attention.collect(out, prefix + ".attention");
  down.collect(out, prefix + ".down");
  act.collect(out, prefix + ".act");
  up.collect(out, prefix + ".up");
}

template <typename T>
TCRM<T> make_tcrm(std::size_t channels, const HPRNConfig& cfg, Rng& rng) {
  TCRM<T> t;
  t.grid_h = cfg.tcrm_grid_h;
  t.grid_w = cfg.tcrm_grid_w;
  t.attention = make_multi_head_attention<T>(t.grid_h * t.grid_w, cfg.attention_heads,
                                             cfg.attention_scaling, rng);
  const std::size_t reduced = std::max<std::size_t>(1, channels / cfg.tcrm_r);
  t.down = make_conv2d<T>(channels, reduced, 1, rng);
  t.act = make_prelu<T>(reduced);
  t.up = make_conv2d<T>(reduced, channels, 1, rng);
  return t;
}

template <typename T>
Tensor<T> tcrm_forward(const Tensor<T>& x, const TCRM<T>& tcrm, Tensor<T>* gate) {
  if (x.rank() != 3) throw DimensionError("tcrm: expected CxHxW, got " + x.shape().str());
  const std::size_t c = x.dim(0);
  auto pooled = local_avg_pool(x, tcrm.grid_h, tcrm.grid_w);
  auto tokens = reshape(pooled, Shape{c, tcrm.grid_h * tcrm.grid_w});
  auto related = multi_head_self_attention(tokens, tcrm.attention);
  auto squeezed = reshape(mean(related, {1}), Shape{c, 1, 1});
  auto hidden = prelu(conv2d(squeezed, tcrm.down), tcrm.act.slope);
  auto weights = sigmoid(conv2d(hidden, tcrm.up));
  if (gate) *gate = reshape(weights, Shape{c});
  return mul(x, weights);
}

// ---------------------------------------------------------------------------

template <typename T>
void MRB<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    const std::string p = prefix + ".unit" + std::to_string(i + 1);
    u.conv_a.collect(out, p + ".conv_a");
    u.act.collect(out, p + ".act");
    u.conv_b.collect(out, p + ".conv_b");
    if (u.tcrm) u.tcrm->collect(out, p + ".tcrm");
  }
}

template <typename T>
MRB<T> make_mrb(const HPRNConfig& cfg, Rng& rng) {
  MRB<T> block;
  for (std::size_t i = 0; i < block.units.size(); ++i) {
    auto& u = block.units[i];
    u.conv_a = make_conv2d<T>(cfg.channels, cfg.channels, 3, rng);
    u.act = make_prelu<T>(cfg.channels);
    u.conv_b = make_conv2d<T>(cfg.channels, cfg.channels, 3, rng);
    const bool host = cfg.tcrm_position == TcrmPosition::multi ||
                      (cfg.tcrm_position == TcrmPosition::first && i == 0) ||
                      (cfg.tcrm_position == TcrmPosition::second && i == 1) ||
                      (cfg.tcrm_position == TcrmPosition::third && i == 2);
    if (host) u.tcrm = make_tcrm<T>(cfg.channels, cfg, rng);
  }
  return block;
}

template <typename T>
Tensor<T> mrb_forward(const Tensor<T>& x, const MRB<T>& mrb) {
  if (x.rank() != 3 || x.dim(0) != mrb.units[0].conv_a.in_channels()) {
    throw DimensionError("mrb: input " + x.shape().str() + " for " +
                         std::to_string(mrb.units[0].conv_a.in_channels()) + " channels");
  }
  Tensor<T> h = x;
  for (const auto& u : mrb.units) {
    auto branch = conv2d(prelu(conv2d(h, u.conv_a), u.act.slope), u.conv_b);
    if (u.tcrm) branch = tcrm_forward(branch, *u.tcrm);
    h = add(h, branch);
  }
  return add(h, x);
}

// ---------------------------------------------------------------------------

SemanticOrder make_semantic_order(const LabelMap& labels, std::size_t groups) {
  labels.validate();
  const std::size_t n = labels.height * labels.width;
  if (groups == 0 || groups > n) {
    throw ContractError("semantic order: " + std::to_string(groups) + " groups for " +
                        std::to_string(n) + " pixels");
  }
  // Rank categories by first raster appearance.
  std::vector<std::size_t> rank(labels.n_labels, SIZE_MAX);
  std::size_t next = 0;
  for (auto l : labels.labels) {
    auto& r = rank[static_cast<std::size_t>(l)];
    if (r == SIZE_MAX) r = next++;
  }
  std::vector<std::vector<std::size_t>> buckets(next);
  for (std::size_t p = 0; p < n; ++p) buckets[rank[static_cast<std::size_t>(labels.labels[p])]].push_back(p);

  SemanticOrder order;
  order.height = labels.height;
  order.width = labels.width;
  order.groups = groups;
  order.group_size = (n + groups - 1) / groups;
  order.slot_to_pixel.reserve(groups * order.group_size);
  for (const auto& b : buckets) order.slot_to_pixel.insert(order.slot_to_pixel.end(), b.begin(), b.end());
  order.pixel_to_slot.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) order.pixel_to_slot[order.slot_to_pixel[i]] = i;
  // Mirror fill: slot n + j repeats sorted item n - 1 - j.
  const std::size_t fill = groups * order.group_size - n;
  for (std::size_t j = 0; j < fill; ++j) order.slot_to_pixel.push_back(order.slot_to_pixel[n - 1 - j]);
  return order;
}

template <typename T>
Tensor<T> unfold_order(const Tensor<T>& feat, const SemanticOrder& order, GroupLayout layout) {
  if (feat.rank() != 3 || feat.dim(1) != order.height || feat.dim(2) != order.width) {
    throw ContractError("unfold_order: feature " + feat.shape().str() + " does not match " +
                        std::to_string(order.height) + "x" + std::to_string(order.width) +
                        " ordering");
  }
  const std::size_t b = feat.dim(0);
  auto flat = reshape(feat, Shape{b, order.pixels()});
  auto grouped = reshape(index_select(flat, 1, order.slot_to_pixel),
                         Shape{b, order.groups, order.group_size});
  return layout == GroupLayout::items_first ? permute(grouped, {1, 2, 0}) : permute(grouped, {1, 0, 2});
}

template <typename T>
std::pair<Tensor<T>, SemanticOrder> unfold_order(const Tensor<T>& feat, const LabelMap& labels,
                                                 std::size_t groups, GroupLayout layout) {
  if (feat.rank() != 3 || feat.dim(1) != labels.height || feat.dim(2) != labels.width) {
    throw ContractError("unfold_order: labels " + std::to_string(labels.height) + "x" +
                        std::to_string(labels.width) + " for feature " + feat.shape().str());
  }
  auto order = make_semantic_order(labels, groups);
  auto grouped = unfold_order(feat, order, layout);
  return {grouped, std::move(order)};
}

template <typename T>
Tensor<T> fold_reorder(const Tensor<T>& grouped, const SemanticOrder& order) {
  if (grouped.rank() != 3 || grouped.dim(0) != order.groups || grouped.dim(1) != order.group_size ||
      order.pixel_to_slot.size() != order.pixels()) {
    throw ContractError("fold_reorder: grouped " + grouped.shape().str() + " does not match " +
                        std::to_string(order.groups) + " groups of " +
                        std::to_string(order.group_size));
  }
  const std::size_t b = grouped.dim(2);
  auto flat = reshape(permute(grouped, {2, 0, 1}), Shape{b, order.groups * order.group_size});
  return reshape(index_select(flat, 1, order.pixel_to_slot), Shape{b, order.height, order.width});
}

// ---------------------------------------------------------------------------

template <typename T>
void SSRMScale<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  phi.collect(out, prefix + ".phi");
  if (psi) psi->collect(out, prefix + ".psi");
  chi.collect(out, prefix + ".chi");
}

template <typename T>
void SSRM<T>::collect(ParameterList<T>& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < scales.size(); ++i) scales[i].collect(out, prefix + ".scale" + std::to_string(i));
  fusion.collect(out, prefix + ".fusion");
}

template <typename T>
SSRM<T> make_ssrm(const HPRNConfig& cfg, Rng& rng) {
  SSRM<T> s;
  s.groups = cfg.ssrm_groups;
  s.residual = cfg.ssrm_residual;
  for (std::size_t i = 0; i < cfg.ssrm_scales.size(); ++i) {
    SSRMScale<T> m;
    m.phi = make_conv2d<T>(cfg.bands, cfg.bands, 1, rng);
    if (!cfg.ssrm_shared_embedding) m.psi = make_conv2d<T>(cfg.bands, cfg.bands, 1, rng);
    m.chi = make_conv2d<T>(cfg.bands, cfg.bands, 1, rng);
    s.scales.push_back(std::move(m));
  }
  s.fusion = make_conv2d<T>(cfg.bands * cfg.ssrm_scales.size(), cfg.bands, 1, rng);
  return s;
}

template <typename T>
Tensor<T> ssrm_single_scale(const Tensor<T>& coarse, const SSRMScale<T>& module,
                            const SemanticOrder& order, Tensor<T>* relation) {
  auto d = conv2d(coarse, module.phi);
  auto e = module.psi ? conv2d(coarse, *module.psi) : d;
  auto y = conv2d(coarse, module.chi);
  auto d2 = unfold_order(d, order, GroupLayout::items_first);     // G x N x B
  auto e2 = unfold_order(e, order, GroupLayout::features_first);  // G x B x N
  auto y2 = unfold_order(y, order, GroupLayout::items_first);     // G x N x B
  auto z = softmax(batched_matmul(d2, e2), 2);                     // G x N x N
  if (relation) *relation = z;
  return fold_reorder(batched_matmul(z, y2), order);
}

template <typename T>
Tensor<T> ssrm_multiscale(const Tensor<T>& coarse, const SSRM<T>& ssrm,
                          const std::vector<SemanticOrder>& orders) {
  if (orders.empty() || orders.size() != ssrm.scales.size()) {
    throw ContractError("ssrm: " + std::to_string(orders.size()) + " label maps for " +
                        std::to_string(ssrm.scales.size()) + " scales");
  }
  std::vector<Tensor<T>> outs;
  outs.reserve(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    outs.push_back(ssrm_single_scale(coarse, ssrm.scales[i], orders[i]));
  }
  auto fused = conv2d(outs.size() == 1 ? outs.front() : concat(outs, 0), ssrm.fusion);
  return ssrm.residual ? add(fused, coarse) : fused;
}

// ---------------------------------------------------------------------------

template <typename T>
ParameterList<T> HPRN<T>::parameters() const {
  ParameterList<T> out;
  head.collect(out, "head");
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, "mrb" + std::to_string(i));
  grs.collect(out, "grs");
  reconstruct.collect(out, "reconstruct");
  if (ssrm) ssrm->collect(out, "ssrm");
  return out;
}

template <typename T>
Tensor<T> HPRN<T>::coarse(const Tensor<T>& rgb) const {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) {
    throw DimensionError("hprn: expected 3xHxW input, got " + rgb.shape().str());
  }
  auto f0 = conv2d(rgb, head);
  Tensor<T> deep = f0;
  for (const auto& block : blocks) deep = mrb_forward(deep, block);
  auto f_grs = add(conv2d(deep, grs), f0);
  return conv2d(f_grs, reconstruct);
}

template <typename T>
std::vector<SemanticOrder> HPRN<T>::orders_for(const std::vector<LabelMap>& labels) const {
  std::vector<SemanticOrder> orders;
  orders.reserve(labels.size());
  for (const auto& l : labels) orders.push_back(make_semantic_order(l, config.ssrm_groups));
  return orders;
}

template <typename T>
Tensor<T> HPRN<T>::forward(const Tensor<T>& rgb, const std::vector<LabelMap>& labels) const {
  for (const auto& l : labels) {
    if (rgb.rank() != 3 || l.height != rgb.dim(1) || l.width != rgb.dim(2)) {
      throw ContractError("hprn: label map " + std::to_string(l.height) + "x" +
                          std::to_string(l.width) + " does not match input " + rgb.shape().str());
    }
  }
  return forward(rgb, ssrm ? orders_for(labels) : std::vector<SemanticOrder>{});
}

template <typename T>
Tensor<T> HPRN<T>::forward(const Tensor<T>& rgb, const std::vector<SemanticOrder>& orders) const {
  auto c = coarse(rgb);
  if (!ssrm) return c;
  for (const auto& o : orders) {
    if (o.height != rgb.dim(1) || o.width != rgb.dim(2)) {
      throw ContractError("hprn: semantic order does not match input " + rgb.shape().str());
    }
  }
  return ssrm_multiscale(c, *ssrm, orders);
}

template <typename T>
HPRN<T> make_hprn(const HPRNConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  HPRN<T> m;
  m.config = cfg;
  m.head = make_conv2d<T>(3, cfg.channels, 3, rng);
  for (std::size_t i = 0; i < cfg.n_mrb; ++i) m.blocks.push_back(make_mrb<T>(cfg, rng));
  m.grs = make_conv2d<T>(cfg.channels, cfg.channels, 3, rng);
  m.reconstruct = make_conv2d<T>(cfg.channels, cfg.bands, 3, rng);
  if (cfg.use_ssrm) m.ssrm = make_ssrm<T>(cfg, rng);
  return m;
}

template <typename T>
SpectralCube hprn_forward(const HPRN<T>& model, const RgbImage& rgb) {
  NoGradGuard no_grad;
  std::vector<LabelMap> labels;
  if (model.config.use_ssrm) labels = multiscale_labels(rgb, model.config.ssrm_scales, model.config.slic_params());
  auto out = to_cube(model.forward(to_tensor<T>(rgb), labels));
  for (auto& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

#define HPRN_INSTANTIATE_MODEL(T)                                                               \
  template struct TCRM<T>;                                                                      \
  template struct MRB<T>;                                                                       \
  template struct SSRMScale<T>;                                                                 \
  template struct SSRM<T>;                                                                      \
  template struct HPRN<T>;                                                                      \
  template TCRM<T> make_tcrm(std::size_t, const HPRNConfig&, Rng&);                             \
  template Tensor<T> tcrm_forward(const Tensor<T>&, const TCRM<T>&, Tensor<T>*);                \
  template MRB<T> make_mrb(const HPRNConfig&, Rng&);                                            \
  template Tensor<T> mrb_forward(const Tensor<T>&, const MRB<T>&);                              \
  template Tensor<T> unfold_order(const Tensor<T>&, const SemanticOrder&, GroupLayout);         \
  template std::pair<Tensor<T>, SemanticOrder> unfold_order(const Tensor<T>&, const LabelMap&,  \
                                                            std::size_t, GroupLayout);          \
  template Tensor<T> fold_reorder(const Tensor<T>&, const SemanticOrder&);                      \
  template SSRM<T> make_ssrm(const HPRNConfig&, Rng&);                                          \
  template Tensor<T> ssrm_single_scale(const Tensor<T>&, const SSRMScale<T>&,                   \
                                       const SemanticOrder&, Tensor<T>*);                       \
  template Tensor<T> ssrm_multiscale(const Tensor<T>&, const SSRM<T>&,                          \
                                     const std::vector<SemanticOrder>&);                        \
  template HPRN<T> make_hprn(const HPRNConfig&, std::uint64_t);                                 \
  template SpectralCube hprn_forward(const HPRN<T>&, const RgbImage&);

HPRN_INSTANTIATE_MODEL(float)
HPRN_INSTANTIATE_MODEL(double)

}  // namespace hprn
