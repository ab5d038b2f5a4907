#include "posesmooth/tpn.hpp"
#include "posesmooth/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace posesmooth
{
using nn::Matrix;
using nn::Mode;
using nn::Vector;

// ------------------------------------------------------------------ config
//
int TpnConfig::receptive_field() const noexcept
{
   return 1 + 2 * (1 + std::accumulate(dilations.begin(), dilations.end(), 0));
}

bool TpnConfig::supports_strided() const noexcept
{
   int d = 3;
   for(int x : dilations) {
      if(x != d) return false;
      d *= 3;
   }
   return true;
}

void TpnConfig::validate() const
{
   if(num_joints < 2) throw ValidationError("tpn: need at least 2 joints");
   if(root_index < 0 || root_index >= num_joints)
      throw ValidationError("tpn: root index out of range");
   if(channels < 1) throw ValidationError("tpn: channels must be >= 1");
   if(num_blocks < 1 || int(dilations.size()) != num_blocks)
      throw ValidationError("tpn: need one dilation per residual block");
   for(int d : dilations)
      if(d < 1) throw ValidationError("tpn: dilations must be >= 1");
   if(!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ValidationError("tpn: dropout rate must be in [0, 1)");
   if(half_window < 1) throw ValidationError("tpn: half window must be >= 1");
   if(receptive_field() != window_length()) {
      std::ostringstream ss;
      ss << "tpn: receptive field " << receptive_field()
         << " does not match window length " << window_length();
      throw ValidationError(ss.str());
   }
}

void TrainConfig::validate() const
{
   if(!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
   if(!(lr_decay > 0.0 && lr_decay <= 1.0))
      throw ValidationError("lr decay must be in (0, 1]");
   if(epochs < 1) throw ValidationError("epochs must be >= 1");
   if(batch_size < 2) throw ValidationError("batch size must be >= 2");
   if(!(aug_scale_min > 0.0 && aug_scale_max >= aug_scale_min))
      throw ValidationError("invalid augmentation scale range");
}

// ------------------------------------------------------------------ params
//
namespace
{
void push_view(std::vector<nn::ParamView>& out, Matrix& m)
{
   if(m.size() > 0) out.emplace_back(m.data(), m.size());
}
void push_view(std::vector<nn::ParamView>& out, Vector& v)
{
   if(v.size() > 0) out.emplace_back(v.data(), v.size());
}

template<typename F> void for_each_tensor(TpnParams& p, F&& f)
{
   f(p.input_conv.weight);
   f(p.input_conv.bias);
   f(p.input_bn.scale);
   f(p.input_bn.shift);
   for(auto& b : p.blocks) {
      f(b.conv_a.weight);
      f(b.conv_a.bias);
      f(b.bn_a.scale);
      f(b.bn_a.shift);
      f(b.conv_b.weight);
      f(b.conv_b.bias);
      f(b.bn_b.scale);
      f(b.bn_b.shift);
   }
   f(p.head.weight);
   f(p.head.bias);
}

nn::ConvParams init_conv(int out, int in, int k, bool bias, std::mt19937_64& rng)
{
   const double bound = 1.0 / std::sqrt(double(in * k));
   std::uniform_real_distribution<double> u(-bound, bound);
   nn::ConvParams c;
   c.weight = Matrix::NullaryExpr(out, in * k, [&] { return u(rng); });
   if(bias) c.bias = Vector::Zero(out);
   return c;
}

nn::BatchNormParams init_bn(int ch)
{
   return {Vector::Ones(ch), Vector::Zero(ch)};
}

nn::BatchNormStats init_stats(int ch)
{
   nn::BatchNormStats s;
   s.mean = Vector::Zero(ch);
   s.var  = Vector::Ones(ch);
   return s;
}

} // namespace

std::vector<nn::ParamView> TpnParams::views()
{
   std::vector<nn::ParamView> out;
   for_each_tensor(*this, [&](auto& t) { push_view(out, t); });
   return out;
}

TpnParams TpnParams::zeros_like() const
{
   TpnParams z = *this;
   for_each_tensor(z, [](auto& t) { t.setZero(); });
   return z;
}

TpnModel TpnModel::initialize(const TpnConfig& cfg, std::mt19937_64& rng)
{
   cfg.validate();
   const int C = cfg.channels;
   TpnModel m;
   m.config            = cfg;
   m.params.input_conv = init_conv(C, cfg.input_dim(), 3, false, rng);
   m.params.input_bn   = init_bn(C);
   m.bn_stats.push_back(init_stats(C));
   for(int b = 0; b < cfg.num_blocks; ++b) {
      TpnBlockParams bp;
      bp.conv_a = init_conv(C, C, 3, false, rng);
      bp.bn_a   = init_bn(C);
      bp.conv_b = init_conv(C, C, 1, false, rng);
      bp.bn_b   = init_bn(C);
      m.params.blocks.push_back(std::move(bp));
      m.bn_stats.push_back(init_stats(C));
      m.bn_stats.push_back(init_stats(C));
   }
   m.params.head = init_conv(cfg.output_dim(), C, 1, true, rng);

   m.norm.input_mean  = Vector::Zero(cfg.input_dim());
   m.norm.input_std   = Vector::Ones(cfg.input_dim());
   m.norm.output_mean = Vector::Zero(cfg.output_dim());
   m.norm.output_std  = Vector::Ones(cfg.output_dim());
   return m;
}

bool TpnModel::is_finite() const
{
   bool ok = true;
   auto p  = params;
   for_each_tensor(p, [&](auto& t) { ok = ok && t.allFinite(); });
   for(const auto& s : bn_stats)
      ok = ok && s.mean.allFinite() && s.var.allFinite()
           && (s.var.array() >= 0.0).all();
   return ok;
}

// ------------------------------------------------------------------ network
//
namespace
{
struct UnitGeometry
{
   nn::ConvGeometry conv;
   int crop_offset = 0; // residual crop, blocks only
   int crop_stride = 1;
};

UnitGeometry input_geometry(Layout layout)
{
   if(layout == Layout::strided) return {{3, 1, 3}, 0, 1};
   return {{3, 1, 1}, 0, 1};
}

UnitGeometry block_geometry(const TpnConfig& cfg, int b, Layout layout)
{
   if(layout == Layout::strided) return {{3, 1, 3}, 1, 3};
   const int d = cfg.dilations[b];
   return {{3, d, 1}, d, 1};
}

constexpr nn::ConvGeometry k_pointwise{1, 1, 1};

Matrix run_unit(const Matrix& in,
                int batch,
                const nn::ConvParams& conv,
                const nn::ConvGeometry& g,
                const nn::BatchNormParams& bn,
                nn::BatchNormStats& stats,
                double dropout_rate,
                const ForwardOptions& opt,
                size_t unit_index,
                TpnTape& tape)
{
   TpnTape::Unit u;
   u.input_length = int(in.cols() / batch);
   const Matrix c = nn::conv1d_forward(in, batch, conv, g, &u.columns);
   u.activated    = nn::batchnorm_forward(c, bn, stats, opt.mode, &u.bn);
   Matrix r       = u.activated.cwiseMax(0.0);
   if(opt.mode == Mode::train) {
      if(opt.masks) {
         if(unit_index >= opt.masks->units.size())
            throw ValidationError("tpn: dropout mask tape does not match network");
         u.mask = opt.masks->units[unit_index].mask;
      } else if(dropout_rate > 0.0) {
         if(!opt.rng) throw ValidationError("tpn: train mode dropout needs an rng");
         u.mask = nn::dropout_mask(r.rows(), r.cols(), dropout_rate, Mode::train,
                                   *opt.rng);
      }
      if(u.mask.size() > 0) {
         if(u.mask.rows() != r.rows() || u.mask.cols() != r.cols())
            throw ValidationError("tpn: dropout mask shape mismatch");
         r = r.cwiseProduct(u.mask);
      }
   }
   tape.units.push_back(std::move(u));
   return r;
}

Matrix unit_backward(const Matrix& d_r,
                     int batch,
                     const TpnTape::Unit& u,
                     const nn::ConvParams& conv,
                     const nn::ConvGeometry& g,
                     const nn::BatchNormParams& bn,
                     nn::ConvParams& g_conv,
                     nn::BatchNormParams& g_bn)
{
   Matrix d = d_r;
   if(u.mask.size() > 0) d = d.cwiseProduct(u.mask);
   d = (u.activated.array() > 0.0).select(d, 0.0);
   d = nn::batchnorm_backward(d, bn, u.bn, g_bn);
   return nn::conv1d_backward(d, u.columns, batch, u.input_length, conv, g,
                              g_conv);
}

Matrix forward_impl(const TpnModel& model,
                    std::vector<nn::BatchNormStats>& stats,
                    const Matrix& x,
                    int batch,
                    const ForwardOptions& opt,
                    TpnTape& tape)
{
   const auto& cfg = model.config;
   const auto& P   = model.params;
   if(x.rows() != cfg.input_dim())
      throw ValidationError("tpn: input has wrong number of channels");
   if(batch < 1 || x.cols() % batch != 0)
      throw ValidationError("tpn: input columns are not a multiple of batch");
   if(opt.layout == Layout::strided) {
      if(!cfg.supports_strided())
         throw ValidationError("tpn: dilations do not allow the strided layout");
      if(x.cols() / batch != cfg.window_length())
         throw ValidationError("tpn: strided layout needs exactly one window");
   }
   if(x.cols() / batch < cfg.receptive_field())
      throw ValidationError("tpn: window too short for receptive field");

   tape = TpnTape{};
   tape.batch  = batch;
   tape.mode   = opt.mode;
   tape.layout = opt.layout;

   size_t unit = 0;
   Matrix h    = run_unit(x, batch, P.input_conv, input_geometry(opt.layout).conv,
                          P.input_bn, stats[0], cfg.dropout_rate, opt, unit++, tape);
   for(int b = 0; b < cfg.num_blocks; ++b) {
      const auto& bp  = P.blocks[b];
      const auto geo  = block_geometry(cfg, b, opt.layout);
      const int t_in  = int(h.cols() / batch);
      tape.block_input_length.push_back(t_in);
      const Matrix a = run_unit(h, batch, bp.conv_a, geo.conv, bp.bn_a,
                                stats[1 + 2 * b], cfg.dropout_rate, opt, unit++,
                                tape);
      Matrix y = run_unit(a, batch, bp.conv_b, k_pointwise, bp.bn_b,
                          stats[2 + 2 * b], cfg.dropout_rate, opt, unit++, tape);
      const int t_out = int(y.cols() / batch);
      for(int n = 0; n < batch; ++n)
         for(int t = 0; t < t_out; ++t)
            y.col(Eigen::Index(n) * t_out + t)
                += h.col(Eigen::Index(n) * t_in + geo.crop_offset
                         + t * geo.crop_stride);
      h = std::move(y);
   }
   return nn::conv1d_forward(h, batch, P.head, k_pointwise, &tape.head_columns);
}

} // namespace

Matrix network_forward(TpnModel& model,
                       const Matrix& x,
                       int batch,
                       const ForwardOptions& opt,
                       TpnTape* tape)
{
   TpnTape local;
   return forward_impl(model, model.bn_stats, x, batch, opt,
                       tape ? *tape : local);
}

Matrix network_forward(const TpnModel& model,
                       const Matrix& x,
                       int batch,
                       Layout layout)
{
   auto stats = model.bn_stats;
   TpnTape tape;
   ForwardOptions opt;
   opt.mode   = Mode::eval;
   opt.layout = layout;
   return forward_impl(model, stats, x, batch, opt, tape);
}

Matrix network_backward(const TpnModel& model,
                        const TpnTape& tape,
                        const Matrix& d_out,
                        TpnParams& grads)
{
   const auto& cfg = model.config;
   const auto& P   = model.params;
   const int batch = tape.batch;
   if(tape.units.size() != size_t(1 + 2 * cfg.num_blocks))
      throw ValidationError("tpn: tape does not match the network");

   const int t_head = int(tape.head_columns.cols() / batch);
   Matrix d_h = nn::conv1d_backward(d_out, tape.head_columns, batch, t_head,
                                    P.head, k_pointwise, grads.head);
   for(int b = cfg.num_blocks - 1; b >= 0; --b) {
      const auto& bp = P.blocks[b];
      auto& gb       = grads.blocks[b];
      const auto geo = block_geometry(cfg, b, tape.layout);
      const int t_in  = tape.block_input_length[b];
      const int t_out = int(d_h.cols() / batch);

      Matrix d_x = Matrix::Zero(d_h.rows(), Eigen::Index(batch) * t_in);
      for(int n = 0; n < batch; ++n)
         for(int t = 0; t < t_out; ++t)
            d_x.col(Eigen::Index(n) * t_in + geo.crop_offset + t * geo.crop_stride)
                += d_h.col(Eigen::Index(n) * t_out + t);

      const Matrix d_a = unit_backward(d_h, batch, tape.units[2 + 2 * b],
                                       bp.conv_b, k_pointwise, bp.bn_b,
                                       gb.conv_b, gb.bn_b);
      d_x += unit_backward(d_a, batch, tape.units[1 + 2 * b], bp.conv_a,
                           geo.conv, bp.bn_a, gb.conv_a, gb.bn_a);
      d_h = std::move(d_x);
   }
   return unit_backward(d_h, batch, tape.units[0], P.input_conv,
                        input_geometry(tape.layout).conv, P.input_bn,
                        grads.input_conv, grads.input_bn);
}

// ------------------------------------------------------------------ windows
//
Matrix stack_windows(const std::vector<Eigen::MatrixXd>& windows,
                     const TpnConfig& cfg,
                     const NormStats& norm)
{
   const int L = cfg.window_length();
   Matrix x(cfg.input_dim(), Eigen::Index(windows.size()) * L);
   for(size_t n = 0; n < windows.size(); ++n) {
      const auto& w = windows[n];
      if(w.rows() != L || w.cols() != cfg.input_dim())
         throw ValidationError("tpn: window must be (2w+1) x 2J");
      if(!w.allFinite()) throw ValidationError("tpn: window has non-finite values");
      x.middleCols(Eigen::Index(n) * L, L)
          = ((w.rowwise() - norm.input_mean.transpose()).array().rowwise()
             / norm.input_std.transpose().array())
                .matrix()
                .transpose();
   }
   return x;
}

Eigen::VectorXd pose_to_output(const Pose3D& pose, int root_index)
{
   const int J = pose.num_joints();
   Eigen::VectorXd out(3 + 3 * (J - 1));
   out.head<3>() = pose.location;
   int c         = 3;
   for(int j = 0; j < J; ++j) {
      if(j == root_index) continue;
      out.segment<3>(c) = pose.relative.row(j).transpose();
      c += 3;
   }
   return out;
}

Pose3D output_to_pose(const Eigen::VectorXd& out, int num_joints, int root_index)
{
   if(out.size() != 3 + 3 * (num_joints - 1))
      throw ValidationError("tpn: output vector has wrong size");
   Pose3D p;
   p.location = out.head<3>();
   p.relative = Joints3::Zero(num_joints, 3);
   int c      = 3;
   for(int j = 0; j < num_joints; ++j) {
      if(j == root_index) continue;
      p.relative.row(j) = out.segment<3>(c).transpose();
      c += 3;
   }
   return p;
}

namespace
{
std::vector<Pose3D> decode_outputs(const TpnModel& model, const Matrix& out_std)
{
   const Matrix mm = model.norm.destandardize_outputs(out_std.transpose());
   std::vector<Pose3D> poses;
   poses.reserve(mm.rows());
   for(Eigen::Index n = 0; n < mm.rows(); ++n)
      poses.push_back(output_to_pose(mm.row(n).transpose(),
                                     model.config.num_joints,
                                     model.config.root_index));
   return poses;
}
} // namespace

std::vector<Pose3D> tpn_forward(const std::vector<Eigen::MatrixXd>& windows,
                                TpnModel& model,
                                Mode mode,
                                Layout layout,
                                std::mt19937_64* rng,
                                TpnTape* tape,
                                const TpnTape* masks)
{
   const Matrix x = stack_windows(windows, model.config, model.norm);
   ForwardOptions opt;
   opt.mode   = mode;
   opt.layout = layout;
   opt.rng    = rng;
   opt.masks  = masks;
   const Matrix out
       = network_forward(model, x, int(windows.size()), opt, tape);
   return decode_outputs(model, out);
}

Pose3D tpn_forward(const Eigen::MatrixXd& window, const TpnModel& model)
{
   const Matrix x = stack_windows({window}, model.config, model.norm);
   return decode_outputs(model, network_forward(model, x, 1)).front();
}

TpnGradients tpn_backward(const TpnModel& model,
                          const TpnTape& tape,
                          const Eigen::MatrixXd& upstream)
{
   const auto& cfg = model.config;
   if(upstream.rows() != cfg.output_dim() || upstream.cols() != tape.batch)
      throw ValidationError("tpn: upstream gradient has wrong shape");
   TpnGradients g;
   g.params = model.params.zeros_like();
   // de-standardisation scales each output by its std
   const Matrix d_out = upstream.array().colwise() * model.norm.output_std.array();
   const Matrix d_x   = network_backward(model, tape, d_out, g.params);

   const int L = int(d_x.cols() / tape.batch);
   for(int n = 0; n < tape.batch; ++n) {
      Eigen::MatrixXd gi = d_x.middleCols(Eigen::Index(n) * L, L).transpose();
      gi.array().rowwise() /= model.norm.input_std.transpose().array();
      g.input.push_back(std::move(gi));
   }
   return g;
}

// ------------------------------------------------------------------ training
//
double l1_loss(const Pose3D& pred, const Pose3D& target)
{
   if(pred.relative.rows() != target.relative.rows())
      throw ValidationError("l1_loss: joint counts differ");
   return (pred.location - target.location).cwiseAbs().sum()
          + (pred.relative - target.relative).cwiseAbs().sum();
}

std::pair<Eigen::MatrixXd, Pose3D>
augment_scale(const Eigen::MatrixXd& window, const Pose3D& target, double alpha)
{
   if(!(alpha > 0.0)) throw ValidationError("augment_scale: alpha must be > 0");
   Pose3D t = target;
   t.location.z() /= alpha;
   return {window * alpha, t};
}

Eigen::MatrixXd filled_inputs(const PersonTrack& track,
                              const CameraIntrinsics& cam)
{
   const int T = track.num_frames();
   int J       = 0;
   for(const auto& d : track.detections)
      if(d) {
         J = d->num_joints();
         break;
      }
   if(J == 0)
      for(const auto& g : track.gt)
         if(g) {
            J = g->num_joints();
            break;
         }
   Eigen::MatrixXd in = Eigen::MatrixXd::Zero(T, 2 * J);
   std::vector<int> known;
   for(int t = 0; t < T; ++t) {
      const auto& d = track.detections[t];
      if(!d) continue;
      const Pose2D n = d->units == Units::normalized ? *d : normalize_keypoints(*d, cam);
      for(int j = 0; j < J; ++j) {
         in(t, 2 * j)     = n.coords(j, 0);
         in(t, 2 * j + 1) = n.coords(j, 1);
      }
      known.push_back(t);
   }
   if(known.empty()) return in;
   for(int t = 0; t < known.front(); ++t) in.row(t) = in.row(known.front());
   for(int t = known.back() + 1; t < T; ++t) in.row(t) = in.row(known.back());
   for(size_t k = 0; k + 1 < known.size(); ++k) {
      const int a = known[k], b = known[k + 1];
      for(int t = a + 1; t < b; ++t) {
         const double s = double(t - a) / double(b - a);
         in.row(t)      = (1.0 - s) * in.row(a) + s * in.row(b);
      }
   }
   return in;
}

Eigen::MatrixXd extract_window(const Eigen::MatrixXd& inputs, int t, int half_window)
{
   const int T = int(inputs.rows());
   Eigen::MatrixXd w(2 * half_window + 1, inputs.cols());
   for(int i = -half_window; i <= half_window; ++i)
      w.row(i + half_window) = inputs.row(std::clamp(t + i, 0, T - 1));
   return w;
}

PoseTrajectory predict_track(const PersonTrack& track,
                             const CameraIntrinsics& cam,
                             const TpnModel& model)
{
   const auto& cfg = model.config;
   const int T     = track.num_frames();
   const int w     = cfg.half_window;
   PoseTrajectory out;
   if(T == 0) return out;

   const Eigen::MatrixXd in = filled_inputs(track, cam);
   if(in.cols() != cfg.input_dim())
      throw ValidationError("tpn: track joint count does not match the model");
   if(!in.allFinite()) throw ValidationError("tpn: non-finite 2D inputs");

   Eigen::MatrixXd padded(T + 2 * w, in.cols());
   for(int i = 0; i < T + 2 * w; ++i)
      padded.row(i) = in.row(std::clamp(i - w, 0, T - 1));
   const Matrix x = ((padded.rowwise() - model.norm.input_mean.transpose())
                         .array()
                         .rowwise()
                     / model.norm.input_std.transpose().array())
                        .matrix()
                        .transpose();

   out.poses = decode_outputs(model, network_forward(model, x, 1));
   out.had_detection.resize(T);
   for(int t = 0; t < T; ++t) out.had_detection[t] = track.detections[t].has_value();
   return out;
}

namespace
{
struct TrainingTrack
{
   Eigen::MatrixXd inputs;  // T x 2J normalised
   Eigen::MatrixXd targets; // T x output_dim, mm
   std::vector<int> gt_frames;
};

std::vector<TrainingTrack> prepare_tracks(const std::vector<Sequence>& seqs,
                                          const TpnConfig& cfg)
{
   std::vector<TrainingTrack> out;
   for(const auto& s : seqs) {
      if(s.skeleton.num_joints() != cfg.num_joints
         || s.skeleton.root_index != cfg.root_index)
         throw ValidationError("training sequence '" + s.seq_id
                               + "' does not match the model skeleton");
      for(const auto& tr : s.tracks) {
         TrainingTrack tt;
         tt.inputs  = filled_inputs(tr, s.camera);
         tt.targets = Eigen::MatrixXd::Zero(tr.num_frames(), cfg.output_dim());
         for(int t = 0; t < tr.num_frames(); ++t)
            if(tr.gt[t]) {
               tt.targets.row(t)
                   = pose_to_output(*tr.gt[t], cfg.root_index).transpose();
               tt.gt_frames.push_back(t);
            }
         if(!tt.gt_frames.empty()) out.push_back(std::move(tt));
      }
   }
   return out;
}

NormStats fit_norm(const std::vector<TrainingTrack>& tracks, const TpnConfig& cfg)
{
   Eigen::Index n_in = 0, n_out = 0;
   for(const auto& t : tracks) {
      n_in += t.inputs.rows();
      n_out += Eigen::Index(t.gt_frames.size());
   }
   Eigen::MatrixXd in(n_in, cfg.input_dim()), out(n_out, cfg.output_dim());
   Eigen::Index r_in = 0, r_out = 0;
   for(const auto& t : tracks) {
      in.middleRows(r_in, t.inputs.rows()) = t.inputs;
      r_in += t.inputs.rows();
      for(int f : t.gt_frames) out.row(r_out++) = t.targets.row(f);
   }
   NormStats ns;
   NormStats::fit(in, ns.input_mean, ns.input_std);
   NormStats::fit(out, ns.output_mean, ns.output_std);
   return ns;
}

} // namespace

double evaluate_loss(const TpnModel& model, const std::vector<Sequence>& seqs)
{
   double sum = 0.0;
   long count = 0;
   for(const auto& s : seqs)
      for(const auto& tr : s.tracks) {
         if(tr.num_frames() == 0) continue;
         const auto pred = predict_track(tr, s.camera, model);
         for(int t = 0; t < tr.num_frames(); ++t)
            if(tr.gt[t]) {
               sum += l1_loss(pred.poses[t], *tr.gt[t]);
               ++count;
            }
      }
   return count > 0 ? sum / double(count) : std::nan("");
}

TrainResult train_tpn(const std::vector<Sequence>& train,
                      const std::vector<Sequence>& val,
                      const TpnConfig& tpn_cfg,
                      const TrainConfig& train_cfg,
                      const EpochCallback& on_epoch)
{
   tpn_cfg.validate();
   train_cfg.validate();
   const auto tracks = prepare_tracks(train, tpn_cfg);
   std::vector<std::pair<int, int>> samples;
   for(size_t k = 0; k < tracks.size(); ++k)
      for(int t : tracks[k].gt_frames) samples.emplace_back(int(k), t);
   if(samples.empty())
      throw ValidationError("training corpus has no ground-truth frames");

   std::mt19937_64 rng(train_cfg.seed);
   TrainResult result;
   result.model      = TpnModel::initialize(tpn_cfg, rng);
   auto& model       = result.model;
   model.norm        = fit_norm(tracks, tpn_cfg);
   const auto& norm  = model.norm;
   const int L       = tpn_cfg.window_length();
   const int w       = tpn_cfg.half_window;
   const int D_in    = tpn_cfg.input_dim();
   const int D_out   = tpn_cfg.output_dim();
   const Layout layout
       = tpn_cfg.supports_strided() ? Layout::strided : Layout::dense;

   result.initial_train_loss = evaluate_loss(model, train);
   result.initial_val_loss   = val.empty() ? std::nan("") : evaluate_loss(model, val);

   TpnParams grads = model.params.zeros_like();
   auto param_views = model.params.views();
   auto grad_views  = grads.views();
   nn::AdamState adam;
   std::uniform_real_distribution<double> aug(train_cfg.aug_scale_min,
                                              train_cfg.aug_scale_max);
   const int B = train_cfg.batch_size;

   for(int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
      const double lr = train_cfg.learning_rate * std::pow(train_cfg.lr_decay, epoch);
      std::shuffle(samples.begin(), samples.end(), rng);
      double loss_sum = 0.0;
      int batches     = 0;
      for(size_t start = 0; start < samples.size(); start += B) {
         const int n_batch = int(std::min<size_t>(B, samples.size() - start));
         if(n_batch < 2) break;

         Matrix x(D_in, Eigen::Index(n_batch) * L);
         Eigen::MatrixXd target(n_batch, D_out);
         for(int n = 0; n < n_batch; ++n) {
            const auto [k, t]  = samples[start + n];
            const auto& tr     = tracks[k];
            const double alpha = aug(rng);
            const int T        = int(tr.inputs.rows());
            for(int i = 0; i < L; ++i) {
               const int f = std::clamp(t - w + i, 0, T - 1);
               x.col(Eigen::Index(n) * L + i)
                   = ((alpha * tr.inputs.row(f).transpose()) - norm.input_mean)
                         .cwiseQuotient(norm.input_std);
            }
            target.row(n) = tr.targets.row(t);
            target(n, 2) /= alpha;
         }

         TpnTape tape;
         ForwardOptions opt;
         opt.mode   = Mode::train;
         opt.layout = layout;
         opt.rng    = &rng;
         const Matrix out = network_forward(model, x, n_batch, opt, &tape);
         const Eigen::MatrixXd pred = norm.destandardize_outputs(out.transpose());
         const Eigen::MatrixXd diff = pred - target;
         const double loss          = diff.cwiseAbs().sum() / n_batch;
         if(!std::isfinite(loss)) {
            std::ostringstream ss;
            ss << "non-finite training loss at epoch " << epoch + 1 << ", batch "
               << batches + 1;
            throw RuntimeError(ss.str());
         }
         Matrix d_out = diff.transpose().unaryExpr([](double v) {
            return double((v > 0.0) - (v < 0.0));
         });
         d_out = (d_out.array().colwise() * norm.output_std.array()) / double(n_batch);

         for(auto& g : grad_views) g.setZero();
         network_backward(model, tape, d_out, grads);
         nn::adam_step(param_views, grad_views, adam, lr, train_cfg.adam);

         loss_sum += loss;
         ++batches;
      }
      if(!model.is_finite())
         throw RuntimeError("model parameters became non-finite at epoch "
                            + std::to_string(epoch + 1));

      EpochLog log;
      log.epoch         = epoch + 1;
      log.learning_rate = lr;
      log.train_loss    = batches > 0 ? loss_sum / batches : std::nan("");
      log.val_loss      = val.empty() ? std::nan("") : evaluate_loss(model, val);
      result.log.push_back(log);
      if(on_epoch) on_epoch(log);
   }
   result.final_train_loss = evaluate_loss(model, train);
   return result;
}

} // namespace posesmooth
