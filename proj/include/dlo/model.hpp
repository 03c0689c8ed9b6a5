#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dlo/autodiff.hpp"
#include "dlo/pathset.hpp"
#include "dlo/sim.hpp"
#include "dlo/util.hpp"

namespace dlo {

struct ModelArch {
  int embed_dim = 64;
  int num_heads = 4;
  int num_encoder_layers = 2;
  int num_decoder_layers = 2;
  int feedforward_dim = 128;

  void validate() const {
    if (embed_dim < 1 || num_heads < 1 || num_encoder_layers < 1 || num_decoder_layers < 1 ||
        feedforward_dim < 1)
      throw std::invalid_argument("model arch fields must be >= 1");
    if (embed_dim % num_heads != 0)
      throw std::invalid_argument("embed_dim must be divisible by num_heads");
  }
  bool operator==(const ModelArch&) const = default;
};

/// Per-channel affine normalization statistics.
struct FeatureStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  Eigen::RowVectorXd inv_scale() const { return scale.cwiseInverse(); }

  static FeatureStats from_data(const Eigen::MatrixXd& rows) {
    FeatureStats fs;
    fs.mean = rows.colwise().mean();
    Eigen::RowVectorXd var =
        (rows.rowwise() - fs.mean).array().square().colwise().mean();
    fs.scale = var.array().sqrt().max(1e-8);
    return fs;
  }
  static FeatureStats identity(int c) {
    FeatureStats fs;
    fs.mean = Eigen::RowVectorXd::Zero(c);
    fs.scale = Eigen::RowVectorXd::Ones(c);
    return fs;
  }
};

struct NormStats {
  FeatureStats dlo = FeatureStats::identity(4);
  FeatureStats eef = FeatureStats::identity(5);
  FeatureStats motion = FeatureStats::identity(3);
  FeatureStats output = FeatureStats::identity(2);
};

struct Transition {
  DLOShape s;
  RobotConfig y;
  Action a;
  Eigen::MatrixX2d ds;  // successor shape minus s
};

struct Dataset {
  int n = 0;  // keypoints per shape
  std::vector<Transition> items;

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write dataset: " + path);
    f.write("DLODATA1", 8);
    const std::uint64_t count = items.size();
    const std::uint32_t nk = static_cast<std::uint32_t>(n);
    f.write(reinterpret_cast<const char*>(&count), 8);
    f.write(reinterpret_cast<const char*>(&nk), 4);
    std::vector<double> buf;
    for (const auto& tr : items) {
      buf.clear();
      for (const auto& p : tr.s.keypoints) { buf.push_back(p.x); buf.push_back(p.y); }
      buf.insert(buf.end(), {tr.y.left.x, tr.y.left.y, tr.y.left.theta, tr.y.right.x,
                             tr.y.right.y, tr.y.right.theta});
      buf.insert(buf.end(), {tr.a.left.dx, tr.a.left.dy, tr.a.left.dtheta, tr.a.right.dx,
                             tr.a.right.dy, tr.a.right.dtheta});
      for (Eigen::Index i = 0; i < tr.ds.rows(); ++i) {
        buf.push_back(tr.ds(i, 0));
        buf.push_back(tr.ds(i, 1));
      }
      f.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
    }
  }

  static Dataset load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read dataset: " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::string(magic, 8) != "DLODATA1") throw std::runtime_error("bad dataset magic");
    std::uint64_t count = 0;
    std::uint32_t nk = 0;
    f.read(reinterpret_cast<char*>(&count), 8);
    f.read(reinterpret_cast<char*>(&nk), 4);
    Dataset ds;
    ds.n = static_cast<int>(nk);
    ds.items.resize(count);
    std::vector<double> buf(2 * nk + 12 + 2 * nk);
    for (auto& tr : ds.items) {
      f.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(double)));
      if (!f) throw std::runtime_error("truncated dataset");
      std::size_t o = 0;
      tr.s.keypoints.resize(nk);
      for (auto& p : tr.s.keypoints) { p.x = buf[o++]; p.y = buf[o++]; }
      tr.y.left = {buf[o], buf[o + 1], buf[o + 2]};
      tr.y.right = {buf[o + 3], buf[o + 4], buf[o + 5]};
      o += 6;
      tr.a.left = {buf[o], buf[o + 1], buf[o + 2]};
      tr.a.right = {buf[o + 3], buf[o + 4], buf[o + 5]};
      o += 6;
      tr.ds.resize(nk, 2);
      for (std::uint32_t i = 0; i < nk; ++i) {
        tr.ds(i, 0) = buf[o++];
        tr.ds(i, 1) = buf[o++];
      }
    }
    return ds;
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int batch_size = 256;
  int max_epochs = 40;
  int patience = 10;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double best_val = 0.0;
  int best_epoch = -1;
};

struct ParamSlice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool decoder_group = false;  // updated by decoder-only fine-tuning
};

/// Raw (un-normalized) feature builders shared by training and control paths.
namespace feat {

inline Eigen::MatrixXd dlo_tokens(const DLOShape& s) {
  const Eigen::Index n = static_cast<Eigen::Index>(s.n());
  const Point2 c = s.centroid();
  Eigen::MatrixXd f(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2& p = s.keypoints[static_cast<std::size_t>(i)];
    f(i, 0) = p.x - c.x;
    f(i, 1) = p.y - c.y;
    f(i, 2) = c.x;
    f(i, 3) = c.y;
  }
  return f;
}

inline Eigen::MatrixXd eef_tokens(const RobotConfig& y) {
  Eigen::MatrixXd f(2, 5);
  f.row(0) << y.left.x, y.left.y, std::cos(y.left.theta), std::sin(y.left.theta), 1.0;
  f.row(1) << y.right.x, y.right.y, std::cos(y.right.theta), std::sin(y.right.theta), -1.0;
  return f;
}

inline Eigen::MatrixXd motion_tokens(const Action& a) {
  Eigen::MatrixXd f(2, 3);
  f.row(0) << a.left.dx, a.left.dy, a.left.dtheta;
  f.row(1) << a.right.dx, a.right.dy, a.right.dtheta;
  return f;
}

}  // namespace feat

/// Encoder-decoder attention deformation model predicting per-keypoint
/// displacements from the DLO state, EEF poses, and EEF motions. Keypoint
/// tokens attend to each other in the DLO encoder; in the decoder the
/// keypoint tokens are queries, encoded EEF poses are keys, and embedded EEF
/// motions are values. All parameters live in one flat vector with named
/// slices.
class DeformationModel {
 public:
  DeformationModel() = default;
  DeformationModel(ModelArch arch, int n) : arch_(arch), n_(n) {
    arch_.validate();
    if (n_ < 3) throw std::invalid_argument("model needs n >= 3 keypoints");
    build_slices();
    params_ = Eigen::VectorXd::Zero(total_);
    pos_encoding_ = sinusoidal_encoding(n_, arch_.embed_dim);
  }

  const ModelArch& arch() const { return arch_; }
  int n() const { return n_; }
  const NormStats& stats() const { return stats_; }
  const std::vector<ParamSlice>& slices() const { return slices_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(Eigen::VectorXd p) {
    if (p.size() != total_) throw std::invalid_argument("parameter size mismatch");
    params_ = std::move(p);
  }
  bool stats_ready() const { return stats_ready_; }

  /// Deterministic parameter initialization.
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    for (const auto& sl : slices_) {
      auto seg = params_.segment(sl.offset, sl.rows * sl.cols);
      if (sl.name.find("_ln") != std::string::npos || sl.name.find("ln_") == 0) {
        // gains to one, biases to zero
        if (sl.name.back() == 'g') seg.setOnes(); else seg.setZero();
      } else if (sl.name.back() == 'b') {
        seg.setZero();
      } else {
        for (Eigen::Index i = 0; i < seg.size(); ++i) seg[i] = dist(rng);
      }
    }
  }

  /// One-step displacement prediction (value only).
  Eigen::MatrixX2d forward(const DLOShape& s, const RobotConfig& y, const Action& a) const {
    if (static_cast<int>(s.n()) != n_)
      throw std::invalid_argument("shape keypoint count does not match the trained model");
    ad::Tape tape;
    Bound bp;
    const ad::Var out = core(tape, tape.constant(feat::dlo_tokens(s)),
                             tape.constant(feat::eef_tokens(y)),
                             tape.constant(feat::motion_tokens(a)), 1, bp);
    return tape.val(out);
  }

  /// Mean squared one-step loss over a batch, exactly (1/B) sum |ds - f|^2.
  double loss(const std::vector<Transition>& batch) const {
    if (batch.empty()) throw std::invalid_argument("loss needs a non-empty batch");
    ad::Tape tape;
    Bound bp;
    const ad::Var l = loss_graph(tape, batch, bp);
    return tape.val(l)(0, 0);
  }

  /// Loss and flat parameter gradient for a batch.
  std::pair<double, Eigen::VectorXd> loss_grad(const std::vector<Transition>& batch) const {
    ad::Tape tape;
    Bound bp;
    const ad::Var l = loss_graph(tape, batch, bp);
    tape.backward(l);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(total_);
    collect_param_grads(tape, bp, g);
    return {tape.val(l)(0, 0), std::move(g)};
  }

  /// AdamW training with a seeded 90/10 split, per-epoch validation, early
  /// stopping, and best-validation parameter selection. Deterministic for a
  /// fixed seed. Normalization statistics are computed once from the training
  /// split and frozen afterwards.
  TrainReport train(const Dataset& data, const TrainConfig& cfg) {
    return train_impl(data, cfg, /*decoder_only=*/false);
  }

  /// Decoder-only adaptation: encoder slices stay bit-identical.
  TrainReport finetune_decoder(const Dataset& data, const TrainConfig& cfg) {
    if (!stats_ready_)
      throw std::logic_error("finetune_decoder requires a trained model");
    if (data.items.empty()) return {};
    return train_impl(data, cfg, /*decoder_only=*/true);
  }

  void set_stats(NormStats st) {
    stats_ = std::move(st);
    stats_ready_ = true;
  }

  // ---- control-path graph building (gradients w.r.t. inputs) ----

  struct Bound {
    std::vector<ad::Var> vars;  // one per slice, bound lazily
  };

  /// Builds the model forward graph from on-tape state/robot/action leaves so
  /// gradients flow back to the inputs. s: n x 2, y: 2 x 3, a: 2 x 3.
  ad::Var forward_on_tape(ad::Tape& t, ad::Var s, ad::Var y, ad::Var a, Bound& bp) const {
    // dlo features: [p - centroid, centroid]
    const ad::Var c = t.mean_rows(s);
    const ad::Var rel = t.sub_rowvec(s, c);
    const ad::Var crep = t.repeat_rows(c, n_);
    const ad::Var dlo_feat = t.concat_cols({rel, crep});
    // eef features: [x, y, cos, sin, flag]
    const ad::Var xy = t.slice_cols(y, 0, 2);
    const ad::Var th = t.slice_cols(y, 2, 1);
    Eigen::MatrixXd flag(2, 1);
    flag << 1.0, -1.0;
    const ad::Var eef_feat =
        t.concat_cols({xy, t.unary_cos(th), t.unary_sin(th), t.constant(flag)});
    return core(t, dlo_feat, eef_feat, a, 1, bp);
  }

  void collect_param_grads(ad::Tape& tape, const Bound& bp, Eigen::VectorXd& out) const {
    for (std::size_t i = 0; i < slices_.size(); ++i) {
      if (!bp.vars[i].valid()) continue;
      const Eigen::MatrixXd& g = tape.grad(bp.vars[i]);
      out.segment(slices_[i].offset, slices_[i].rows * slices_[i].cols) +=
          Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    }
  }

  // ---- checkpoint container ----

  void save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = 1;
    header["arch"] = {{"embed_dim", arch_.embed_dim},
                      {"num_heads", arch_.num_heads},
                      {"num_encoder_layers", arch_.num_encoder_layers},
                      {"num_decoder_layers", arch_.num_decoder_layers},
                      {"feedforward_dim", arch_.feedforward_dim}};
    header["n"] = n_;
    header["param_count"] = total_;
    const auto stats_json = [](const FeatureStats& fs) {
      return nlohmann::json{{"mean", std::vector<double>(fs.mean.begin(), fs.mean.end())},
                            {"scale", std::vector<double>(fs.scale.begin(), fs.scale.end())}};
    };
    header["stats"] = {{"dlo", stats_json(stats_.dlo)},
                       {"eef", stats_json(stats_.eef)},
                       {"motion", stats_json(stats_.motion)},
                       {"output", stats_json(stats_.output)}};
    nlohmann::json jslices = nlohmann::json::array();
    for (const auto& sl : slices_)
      jslices.push_back({{"name", sl.name}, {"offset", sl.offset}, {"rows", sl.rows},
                         {"cols", sl.cols}});
    header["slices"] = jslices;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    const std::string hs = header.dump();
    const std::uint64_t hlen = hs.size();
    f.write("DLOCKPT1", 8);
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    f.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  }

  static DeformationModel load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::string(magic, 8) != "DLOCKPT1") throw std::runtime_error("bad checkpoint magic");
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    const nlohmann::json header = nlohmann::json::parse(hs);

    ModelArch arch;
    arch.embed_dim = header["arch"]["embed_dim"];
    arch.num_heads = header["arch"]["num_heads"];
    arch.num_encoder_layers = header["arch"]["num_encoder_layers"];
    arch.num_decoder_layers = header["arch"]["num_decoder_layers"];
    arch.feedforward_dim = header["arch"]["feedforward_dim"];
    DeformationModel m(arch, header["n"].get<int>());

    if (header["param_count"].get<Eigen::Index>() != m.total_)
      throw std::runtime_error("checkpoint parameter count does not match arch");
    const auto& jslices = header["slices"];
    if (jslices.size() != m.slices_.size())
      throw std::runtime_error("checkpoint slice table does not match arch");
    for (std::size_t i = 0; i < m.slices_.size(); ++i) {
      const auto& js = jslices[i];
      const auto& sl = m.slices_[i];
      if (js["name"].get<std::string>() != sl.name ||
          js["offset"].get<Eigen::Index>() != sl.offset ||
          js["rows"].get<Eigen::Index>() != sl.rows ||
          js["cols"].get<Eigen::Index>() != sl.cols)
        throw std::runtime_error("checkpoint slice " + sl.name + " does not match arch");
    }
    const auto load_stats = [&](const char* key) {
      FeatureStats fs;
      const auto& j = header["stats"][key];
      const auto mean = j["mean"].get<std::vector<double>>();
      const auto scale = j["scale"].get<std::vector<double>>();
      fs.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(),
                                                     static_cast<Eigen::Index>(mean.size()));
      fs.scale = Eigen::Map<const Eigen::RowVectorXd>(scale.data(),
                                                      static_cast<Eigen::Index>(scale.size()));
      return fs;
    };
    m.stats_.dlo = load_stats("dlo");
    m.stats_.eef = load_stats("eef");
    m.stats_.motion = load_stats("motion");
    m.stats_.output = load_stats("output");
    m.stats_ready_ = true;

    f.read(reinterpret_cast<char*>(m.params_.data()),
           static_cast<std::streamsize>(m.params_.size() * sizeof(double)));
    if (!f) throw std::runtime_error("truncated checkpoint");
    return m;
  }

  /// Core forward graph over stacked token batches; shared by the training
  /// and control paths.
  ad::Var core(ad::Tape& t, ad::Var dlo_feat_raw, ad::Var eef_feat_raw, ad::Var motion_raw,
               int batch, Bound& bp) const {
    if (bp.vars.empty()) bp.vars.assign(slices_.size(), ad::Var{});
    const int d = arch_.embed_dim;
    const int heads = arch_.num_heads;

    const auto P = [&](const std::string& name) -> ad::Var {
      const int idx = slice_index(name);
      if (!bp.vars[idx].valid()) {
        const auto& sl = slices_[idx];
        bp.vars[idx] = t.leaf(Eigen::Map<const Eigen::MatrixXd>(
            params_.data() + sl.offset, sl.rows, sl.cols));
      }
      return bp.vars[idx];
    };
    const auto normalize = [&](ad::Var x, const FeatureStats& fs) {
      return t.scale_cols_const(t.shift_cols_const(x, -fs.mean), fs.inv_scale());
    };
    const auto linear = [&](ad::Var x, const std::string& prefix) {
      return t.add_rowvec(t.matmul(x, P(prefix + "_w")), P(prefix + "_b"));
    };
    const auto ffn = [&](ad::Var x, const std::string& prefix) {
      ad::Var h = t.gelu(linear(x, prefix + "_ff1"));
      return linear(h, prefix + "_ff2");
    };
    const auto self_attn_layer = [&](ad::Var x, const std::string& prefix, int tokens) {
      ad::Var h = t.layernorm(x, P(prefix + "_ln1_g"), P(prefix + "_ln1_b"));
      ad::Var q = linear(h, prefix + "_q");
      ad::Var k = linear(h, prefix + "_k");
      ad::Var v = linear(h, prefix + "_v");
      ad::Var a = t.attention(q, k, v, heads, tokens, tokens);
      x = t.add(x, linear(a, prefix + "_o"));
      ad::Var h2 = t.layernorm(x, P(prefix + "_ln2_g"), P(prefix + "_ln2_b"));
      return t.add(x, ffn(h2, prefix));
    };

    // DLO encoder
    ad::Var x = linear(normalize(dlo_feat_raw, stats_.dlo), "dlo_embed");
    x = t.add(x, t.constant(pos_encoding_.replicate(batch, 1)));
    for (int l = 0; l < arch_.num_encoder_layers; ++l)
      x = self_attn_layer(x, "enc" + std::to_string(l), n_);
    x = t.layernorm(x, P("enc_ln_g"), P("enc_ln_b"));

    // robot encoder over the two EEF tokens
    ad::Var r = linear(normalize(eef_feat_raw, stats_.eef), "eef_embed");
    for (int l = 0; l < arch_.num_encoder_layers; ++l)
      r = self_attn_layer(r, "rob" + std::to_string(l), 2);
    r = t.layernorm(r, P("rob_ln_g"), P("rob_ln_b"));

    // embedded EEF motions are the cross-attention values
    ad::Var m = linear(normalize(motion_raw, stats_.motion), "motion_embed");

    // DLO decoder: keypoints query the EEF poses, motion embeddings as values
    for (int l = 0; l < arch_.num_decoder_layers; ++l) {
      const std::string prefix = "dec" + std::to_string(l);
      ad::Var h = t.layernorm(x, P(prefix + "_ln1_g"), P(prefix + "_ln1_b"));
      ad::Var q = linear(h, prefix + "_q");
      ad::Var k = linear(r, prefix + "_k");
      ad::Var v = linear(m, prefix + "_v");
      ad::Var a = t.attention(q, k, v, heads, n_, 2);
      x = t.add(x, linear(a, prefix + "_o"));
      ad::Var h2 = t.layernorm(x, P(prefix + "_ln2_g"), P(prefix + "_ln2_b"));
      x = t.add(x, ffn(h2, prefix));
    }
    x = t.layernorm(x, P("dec_ln_g"), P("dec_ln_b"));
    ad::Var out = linear(x, "head");
    // denormalize to meters
    out = t.shift_cols_const(t.scale_cols_const(out, stats_.output.scale), stats_.output.mean);
    (void)d;
    return out;
  }

 private:
  ModelArch arch_;
  int n_ = 0;
  std::vector<ParamSlice> slices_;
  Eigen::Index total_ = 0;
  Eigen::VectorXd params_;
  NormStats stats_;
  bool stats_ready_ = false;
  Eigen::MatrixXd pos_encoding_;

  static Eigen::MatrixXd sinusoidal_encoding(int n, int d) {
    Eigen::MatrixXd pe(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        const double rate = std::pow(10000.0, -2.0 * (j / 2) / static_cast<double>(d));
        pe(i, j) = (j % 2 == 0) ? std::sin(i * rate) : std::cos(i * rate);
      }
    return pe;
  }

  void add_slice(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                 bool decoder_group) {
    slices_.push_back({name, total_, rows, cols, decoder_group});
    total_ += rows * cols;
  }

  void build_slices() {
    const int d = arch_.embed_dim;
    const int f = arch_.feedforward_dim;
    const auto add_linear = [&](const std::string& p, Eigen::Index in, Eigen::Index out,
                                bool dec) {
      add_slice(p + "_w", in, out, dec);
      add_slice(p + "_b", 1, out, dec);
    };
    const auto add_block = [&](const std::string& p, bool dec) {
      add_slice(p + "_ln1_g", 1, d, dec);
      add_slice(p + "_ln1_b", 1, d, dec);
      add_linear(p + "_q", d, d, dec);
      add_linear(p + "_k", d, d, dec);
      add_linear(p + "_v", d, d, dec);
      add_linear(p + "_o", d, d, dec);
      add_slice(p + "_ln2_g", 1, d, dec);
      add_slice(p + "_ln2_b", 1, d, dec);
      add_linear(p + "_ff1", d, f, dec);
      add_linear(p + "_ff2", f, d, dec);
    };
    add_linear("dlo_embed", 4, d, false);
    add_linear("eef_embed", 5, d, false);
    add_linear("motion_embed", 3, d, false);
    for (int l = 0; l < arch_.num_encoder_layers; ++l)
      add_block("enc" + std::to_string(l), false);
    add_slice("enc_ln_g", 1, d, false);
    add_slice("enc_ln_b", 1, d, false);
    for (int l = 0; l < arch_.num_encoder_layers; ++l)
      add_block("rob" + std::to_string(l), false);
    add_slice("rob_ln_g", 1, d, false);
    add_slice("rob_ln_b", 1, d, false);
    for (int l = 0; l < arch_.num_decoder_layers; ++l)
      add_block("dec" + std::to_string(l), true);
    add_slice("dec_ln_g", 1, d, true);
    add_slice("dec_ln_b", 1, d, true);
    add_linear("head", d, 2, true);

    name_index_.clear();
    for (std::size_t i = 0; i < slices_.size(); ++i) name_index_[slices_[i].name] = i;
  }

  int slice_index(const std::string& name) const {
    const auto it = name_index_.find(name);
    if (it == name_index_.end()) throw std::logic_error("unknown parameter slice: " + name);
    return static_cast<int>(it->second);
  }

  /// Stacked raw feature matrices for a batch.
  struct BatchFeatures {
    Eigen::MatrixXd dlo;     // (B*n) x 4
    Eigen::MatrixXd eef;     // (B*2) x 5
    Eigen::MatrixXd motion;  // (B*2) x 3
    Eigen::MatrixXd labels;  // (B*n) x 2
  };

  BatchFeatures batch_features(const std::vector<Transition>& batch) const {
    const int B = static_cast<int>(batch.size());
    BatchFeatures bf;
    bf.dlo.resize(static_cast<Eigen::Index>(B) * n_, 4);
    bf.eef.resize(static_cast<Eigen::Index>(B) * 2, 5);
    bf.motion.resize(static_cast<Eigen::Index>(B) * 2, 3);
    bf.labels.resize(static_cast<Eigen::Index>(B) * n_, 2);
    for (int b = 0; b < B; ++b) {
      const auto& tr = batch[static_cast<std::size_t>(b)];
      if (static_cast<int>(tr.s.n()) != n_)
        throw std::invalid_argument("transition keypoint count does not match model");
      bf.dlo.middleRows(static_cast<Eigen::Index>(b) * n_, n_) = feat::dlo_tokens(tr.s);
      bf.eef.middleRows(static_cast<Eigen::Index>(b) * 2, 2) = feat::eef_tokens(tr.y);
      bf.motion.middleRows(static_cast<Eigen::Index>(b) * 2, 2) = feat::motion_tokens(tr.a);
      bf.labels.middleRows(static_cast<Eigen::Index>(b) * n_, n_) = tr.ds;
    }
    return bf;
  }

  ad::Var loss_graph(ad::Tape& t, const std::vector<Transition>& batch, Bound& bp) const {
    const BatchFeatures bf = batch_features(batch);
    const ad::Var out = core(t, t.constant(bf.dlo), t.constant(bf.eef),
                             t.constant(bf.motion), static_cast<int>(batch.size()), bp);
    const ad::Var diff = t.sub(out, t.constant(bf.labels));
    const ad::Var sq = t.hadamard(diff, diff);
    return t.scale(t.sum_all(sq), 1.0 / static_cast<double>(batch.size()));
  }

  void compute_stats(const std::vector<Transition>& train_items) {
    const BatchFeatures bf = batch_features(train_items);
    stats_.dlo = FeatureStats::from_data(bf.dlo);
    stats_.eef = FeatureStats::from_data(bf.eef);
    stats_.motion = FeatureStats::from_data(bf.motion);
    stats_.output = FeatureStats::from_data(bf.labels);
    stats_ready_ = true;
  }

  TrainReport train_impl(const Dataset& data, const TrainConfig& cfg, bool decoder_only) {
    if (data.items.empty()) return {};
    if (data.n != n_) throw std::invalid_argument("dataset keypoint count does not match model");

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t val_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(order.size())));
    std::vector<Transition> val_items, train_items;
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < val_count ? val_items : train_items).push_back(data.items[order[i]]);
    }
    if (train_items.empty()) train_items = val_items;

    if (!stats_ready_) compute_stats(train_items);

    // trainable entries mask, by slice
    std::vector<bool> trainable(slices_.size(), true);
    if (decoder_only)
      for (std::size_t i = 0; i < slices_.size(); ++i) trainable[i] = slices_[i].decoder_group;

    Eigen::VectorXd m = Eigen::VectorXd::Zero(total_);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(total_);
    std::int64_t step = 0;

    const auto eval_loss = [&](const std::vector<Transition>& items) {
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t at = 0; at < items.size(); at += cfg.batch_size) {
        const std::size_t take = std::min<std::size_t>(cfg.batch_size, items.size() - at);
        std::vector<Transition> batch(items.begin() + at, items.begin() + at + take);
        total += loss(batch) * static_cast<double>(take);
        count += take;
      }
      return total / static_cast<double>(count);
    };

    TrainReport report;
    Eigen::VectorXd best_params = params_;
    double best_val = eval_loss(val_items);
    report.best_val = best_val;
    report.best_epoch = -1;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      std::shuffle(train_items.begin(), train_items.end(), rng);
      double epoch_loss = 0.0;
      std::size_t seen = 0;
      for (std::size_t at = 0; at < train_items.size(); at += cfg.batch_size) {
        const std::size_t take = std::min<std::size_t>(cfg.batch_size, train_items.size() - at);
        std::vector<Transition> batch(train_items.begin() + at,
                                      train_items.begin() + at + take);
        auto [l, g] = loss_grad(batch);
        if (!std::isfinite(l))
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch));
        epoch_loss += l * static_cast<double>(take);
        seen += take;
        ++step;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
        for (std::size_t si = 0; si < slices_.size(); ++si) {
          if (!trainable[si]) continue;
          const auto& sl = slices_[si];
          for (Eigen::Index i = sl.offset; i < sl.offset + sl.rows * sl.cols; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            params_[i] -= cfg.learning_rate * (mh / (std::sqrt(vh) + eps) +
                                               cfg.weight_decay * params_[i]);
          }
        }
      }
      const double train_l = epoch_loss / static_cast<double>(seen);
      const double val_l = eval_loss(val_items);
      if (!std::isfinite(val_l))
        throw std::runtime_error("training diverged: non-finite validation loss");
      report.train_loss.push_back(train_l);
      report.val_loss.push_back(val_l);
      if (val_l < best_val) {
        best_val = val_l;
        best_params = params_;
        report.best_val = best_val;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
    params_ = best_params;
    return report;
  }

  std::unordered_map<std::string, std::size_t> name_index_;
};

/// Random-walk transition collection in an obstacle-free workspace: EEFs move
/// toward random target poses with actions clipped to the bounds; transitions
/// that would overstretch the cable are discarded and resampled. Deterministic
/// for a fixed seed.
inline Dataset collect_dataset(const DloSim& sim, int num, std::uint64_t seed,
                               double ws_width = 0.7, double ws_height = 0.7,
                               const ActionBounds& bounds = ActionBounds::symmetric()) {
  Dataset out;
  out.n = sim.cable().num_keypoints;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double L = sim.cable().length;
  const double margin = 0.03;

  const auto in_bounds = [&](const Point2& p) {
    return p.x >= margin && p.x <= ws_width - margin && p.y >= margin &&
           p.y <= ws_height - margin;
  };

  while (static_cast<int>(out.items.size()) < num) {
    // episode start: random grasp placement along a random chord
    const Point2 left{margin + u01(rng) * (ws_width - 2 * margin),
                      margin + u01(rng) * (ws_height - 2 * margin)};
    const double chord_angle = (u01(rng) * 2.0 - 1.0) * M_PI;
    const double sep = (0.5 + 0.47 * u01(rng)) * L;
    const Point2 right = left + Point2{std::cos(chord_angle), std::sin(chord_angle)} * sep;
    if (!in_bounds(right)) continue;
    RobotConfig rc;
    rc.left = {left.x, left.y, chord_angle + (u01(rng) * 2.0 - 1.0) * 0.7};
    rc.right = {right.x, right.y, chord_angle + (u01(rng) * 2.0 - 1.0) * 0.7};
    auto st = sim.init(rc);
    if (!st || !st.value().converged) continue;
    SimState state = st.value();

    for (int k = 0; k < 40 && static_cast<int>(out.items.size()) < num; ++k) {
      Action a;
      bool found = false;
      for (int tries = 0; tries < 20 && !found; ++tries) {
        Eigen::Matrix<double, 6, 1> v;
        for (int i = 0; i < 6; ++i)
          v[i] = bounds.min[i] + u01(rng) * (bounds.max[i] - bounds.min[i]);
        a = Action::from_flat(v);
        const Point2 nl = state.robot.left.position() + Point2{a.left.dx, a.left.dy};
        const Point2 nr = state.robot.right.position() + Point2{a.right.dx, a.right.dy};
        found = in_bounds(nl) && in_bounds(nr) && distance(nl, nr) <= 0.97 * L;
      }
      if (!found) break;
      auto next = sim.step(state, a);
      if (!next || !next.value().converged) break;
      Transition tr;
      tr.s = state.shape;
      tr.y = state.robot;
      tr.a = a;
      tr.ds.resize(out.n, 2);
      for (int i = 0; i < out.n; ++i) {
        tr.ds(i, 0) = next.value().shape.keypoints[i].x - state.shape.keypoints[i].x;
        tr.ds(i, 1) = next.value().shape.keypoints[i].y - state.shape.keypoints[i].y;
      }
      out.items.push_back(std::move(tr));
      state = next.value();
    }
  }
  return out;
}

/// Rank-one Broyden secant update of a linear deformation Jacobian.
struct BroydenJacobian {
  Eigen::MatrixXd J;  // 2n x 6

  explicit BroydenJacobian(int n) : J(Eigen::MatrixXd::Zero(2 * n, 6)) {}

  /// J += (ds - J a) a^T / (a^T a); skipped for near-zero actions.
  void update(const Eigen::VectorXd& observed_ds, const Eigen::Matrix<double, 6, 1>& a,
              double eps = 1e-12) {
    const double a2 = a.squaredNorm();
    if (a2 <= eps * eps) return;
    J += (observed_ds - J * a) * a.transpose() / a2;
  }

  Eigen::VectorXd predict(const Eigen::Matrix<double, 6, 1>& a) const { return J * a; }
};

}  // namespace dlo
