#pragma once

#include "posesmooth/geometry.hpp"
#include "posesmooth/nn.hpp"
#include "posesmooth/norm_stats.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace posesmooth
{
// Temporal PoseNet: a dilated 1D convolutional regressor from a window of
// 2w+1 frames of camera-normalised 2D joints to the root location and the
// root-relative pose at the centre frame.
//
//   input conv (k=3, d=1) -> BN -> ReLU -> Dropout
//   3 x residual block:
//      conv (k=3, d=dilations[b]) -> BN -> ReLU -> Dropout
//      conv (k=1)                 -> BN -> ReLU -> Dropout
//      + centre-cropped skip
//   head conv (k=1) to 3 + 3(J-1) outputs
struct TpnConfig
{
   int half_window     = 40;
   int channels        = 256;
   int num_blocks      = 3;
   double dropout_rate = 0.25;
   int num_joints      = 17;
   int root_index      = 0;
   std::vector<int> dilations = {3, 9, 27};

   int input_dim() const noexcept { return 2 * num_joints; }
   int output_dim() const noexcept { return 3 + 3 * (num_joints - 1); }
   int window_length() const noexcept { return 2 * half_window + 1; }
   int receptive_field() const noexcept;
   // True when every block dilation is 3x the previous (starting at 3), which
   // allows the strided training layout.
   bool supports_strided() const noexcept;
   void validate() const;
};

struct TpnBlockParams
{
   nn::ConvParams conv_a, conv_b;
   nn::BatchNormParams bn_a, bn_b;
};

struct TpnParams
{
   nn::ConvParams input_conv;
   nn::BatchNormParams input_bn;
   std::vector<TpnBlockParams> blocks;
   nn::ConvParams head;

   // Flat views over every trainable tensor, in a fixed order.
   std::vector<nn::ParamView> views();
   TpnParams zeros_like() const;
};

struct TpnModel
{
   TpnConfig config;
   TpnParams params;
   std::vector<nn::BatchNormStats> bn_stats; // input, then (a, b) per block
   NormStats norm;

   static TpnModel initialize(const TpnConfig& cfg, std::mt19937_64& rng);
   bool is_finite() const;
};

// dense: every conv is evaluated at every time step (inference over whole
// sequences). strided: only the time steps that reach a single output are
// evaluated, with stride-3 undilated convs. Both compute the same function
// in eval mode; in train mode batch statistics are taken over the evaluated
// steps.
enum class Layout { dense, strided };

struct TpnTape
{
   struct Unit
   {
      nn::Matrix columns;
      int input_length = 0;
      nn::BatchNormCache bn;
      nn::Matrix activated; // BN output, pre-ReLU
      nn::Matrix mask;      // empty => no dropout
   };
   int batch       = 0;
   nn::Mode mode   = nn::Mode::eval;
   Layout layout   = Layout::dense;
   std::vector<Unit> units; // input unit, then (a, b) per block
   std::vector<int> block_input_length;
   nn::Matrix head_columns;
};

struct ForwardOptions
{
   nn::Mode mode         = nn::Mode::eval;
   Layout layout         = Layout::dense;
   std::mt19937_64* rng  = nullptr; // draws dropout masks in train mode
   const TpnTape* masks  = nullptr; // reuse these dropout masks instead
};

// x is input_dim x (batch * frames), already standardised. Returns
// standardised outputs, output_dim x (batch * out_frames). Train mode
// updates the running BatchNorm statistics of `model`.
nn::Matrix network_forward(TpnModel& model,
                           const nn::Matrix& x,
                           int batch,
                           const ForwardOptions& opt,
                           TpnTape* tape = nullptr);

// Eval-mode forward on an immutable model.
nn::Matrix network_forward(const TpnModel& model,
                           const nn::Matrix& x,
                           int batch,
                           Layout layout = Layout::dense);

// Reverse pass of network_forward. Accumulates parameter gradients into
// `grads` and returns the gradient w.r.t. the standardised input.
nn::Matrix network_backward(const TpnModel& model,
                            const TpnTape& tape,
                            const nn::Matrix& d_out,
                            TpnParams& grads);

// ------------------------------------------------------------------ windows
//
// A window is (2w+1) x 2J normalised coordinates, row per frame, columns
// (u_0, v_0, u_1, v_1, ...).

// Stacks standardised windows into input_dim x (N * (2w+1)).
nn::Matrix stack_windows(const std::vector<Eigen::MatrixXd>& windows,
                         const TpnConfig& cfg,
                         const NormStats& norm);

Eigen::VectorXd pose_to_output(const Pose3D& pose, int root_index);
Pose3D output_to_pose(const Eigen::VectorXd& out, int num_joints, int root_index);

// Batched forward; train mode needs at least two windows (BatchNorm).
std::vector<Pose3D> tpn_forward(const std::vector<Eigen::MatrixXd>& windows,
                                TpnModel& model,
                                nn::Mode mode,
                                Layout layout        = Layout::dense,
                                std::mt19937_64* rng = nullptr,
                                TpnTape* tape        = nullptr,
                                const TpnTape* masks = nullptr);

// Eval mode, single window.
Pose3D tpn_forward(const Eigen::MatrixXd& window, const TpnModel& model);

struct TpnGradients
{
   TpnParams params;
   std::vector<Eigen::MatrixXd> input; // per window, w.r.t. normalised coords
};

// `upstream` is output_dim x N: d(loss)/d(output) in millimeters, ordered as
// pose_to_output, one column per window of the recorded forward pass.
TpnGradients tpn_backward(const TpnModel& model,
                          const TpnTape& tape,
                          const Eigen::MatrixXd& upstream);

// ------------------------------------------------------------------ training
//
// Sum of absolute location errors plus sum of absolute relative errors.
double l1_loss(const Pose3D& pred, const Pose3D& target);

// Zoom augmentation: 2D coords times alpha, target depth divided by alpha.
std::pair<Eigen::MatrixXd, Pose3D>
augment_scale(const Eigen::MatrixXd& window, const Pose3D& target, double alpha);

struct TrainConfig
{
   double learning_rate = 1e-3;
   double lr_decay      = 0.95; // per epoch
   int epochs           = 80;
   int batch_size       = 64;
   nn::AdamConfig adam;
   double aug_scale_min = 0.7;
   double aug_scale_max = 1.3;
   std::uint64_t seed   = 0;

   void validate() const;
};

struct EpochLog
{
   int epoch = 0;
   double learning_rate = 0.0;
   double train_loss    = 0.0; // mean of batch losses, train mode
   double val_loss      = 0.0; // eval mode; NaN without a validation set
};

struct TrainResult
{
   TpnModel model;
   std::vector<EpochLog> log;
   double initial_train_loss = 0.0;
   double final_train_loss   = 0.0;
   double initial_val_loss   = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train_tpn(const std::vector<Sequence>& train,
                      const std::vector<Sequence>& val,
                      const TpnConfig& tpn_cfg,
                      const TrainConfig& train_cfg,
                      const EpochCallback& on_epoch = {});

// Normalised 2D inputs of a track, T x 2J; undetected frames are linearly
// interpolated between the nearest detections (held at the ends).
Eigen::MatrixXd filled_inputs(const PersonTrack& track,
                              const CameraIntrinsics& cam);

// Edge-replicated window of `half_window` frames around frame t.
Eigen::MatrixXd extract_window(const Eigen::MatrixXd& inputs,
                               int t,
                               int half_window);

PoseTrajectory predict_track(const PersonTrack& track,
                             const CameraIntrinsics& cam,
                             const TpnModel& model);

// Mean per-frame l1 loss (mm) over every ground-truth frame, eval mode.
double evaluate_loss(const TpnModel& model, const std::vector<Sequence>& seqs);

} // namespace posesmooth
