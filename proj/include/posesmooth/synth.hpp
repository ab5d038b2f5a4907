#pragma once

#include "posesmooth/geometry.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace posesmooth
{
// Keypoint-level stand-in for a composited multi-person video corpus: every
// person is a kinematic skeleton, occlusion is decided geometrically by
// 2D capsules around the bones of nearer people, and the 2D detector is
// simulated directly.
struct SynthConfig
{
   int num_persons  = 4;
   int num_frames   = 2000;
   double fps       = 30.0;
   CameraIntrinsics camera;
   Skeleton skeleton = Skeleton::default17();
   std::uint64_t motion_seed = 0;

   double noise_px                 = 8.0;  // base 2D detection noise std
   double confidence_noise         = 0.05; // std of the confidence jitter
   double occlusion_miss_threshold = 0.9;  // mean occlusion above => missed

   std::vector<double> limb_lengths; // per skeleton edge, mm; empty = default
   double depth_min = 2500.0;        // root depth range, mm
   double depth_max = 7000.0;
   double person_scale_min = 0.95; // per-person uniform body scale
   double person_scale_max = 1.05;

   double capsule_radius_frac = 0.06; // of the occluder's 2D bbox height
   double joint_radius_frac   = 0.03; // of the occluded person's bbox height

   double lateral_sweep_frac = 0.55; // lateral motion amplitude vs half FOV
   double lateral_freq_min   = 0.02; // Hz
   double lateral_freq_max   = 0.12;
   double min_lateral_speed  = 100.0;  // mm/s, per-person cap on the summed
   double max_lateral_speed  = 1500.0; // wave speed, drawn from this range
   double depth_sweep_mm     = 700.0;
   double max_root_step_mm   = 120.0; // per-frame root displacement bound

   // Motions whose longest missed-detection run exceeds max_gap_frames are
   // resampled (0 = no bound); after max_motion_attempts the attempt with
   // the shortest longest run is kept.
   int max_gap_frames      = 0;
   int max_motion_attempts = 200;

   void validate() const;
   std::vector<double> effective_limb_lengths() const;
};

// Per frame, per person, per joint occlusion fraction in [0, 1].
struct OcclusionState
{
   std::vector<std::vector<Eigen::VectorXd>> fraction; // [frame][person]

   int num_frames() const noexcept { return int(fraction.size()); }
};

struct OcclusionGeometry
{
   double capsule_radius_frac = 0.06;
   double joint_radius_frac   = 0.03;
};

// Fraction of the disc (centre, radius) that lies inside the capsule around
// segment [a, b]. Evaluated on a fixed sunflower point set, so it is
// deterministic and monotone in both radii.
double disc_capsule_coverage(const Eigen::Vector2d& centre,
                             double disc_radius,
                             const Eigen::Vector2d& a,
                             const Eigen::Vector2d& b,
                             double capsule_radius);

// Occlusion of every joint of every person in one frame. Only people with a
// strictly smaller root depth occlude; self-occlusion is excluded.
std::vector<Eigen::VectorXd>
occlusion_for_frame(const std::vector<Joints3>& abs_poses,
                    const Skeleton& skeleton,
                    const CameraIntrinsics& cam,
                    const OcclusionGeometry& geo);

// gt[person][frame] must be fully populated.
OcclusionState compute_occlusion(const std::vector<std::vector<Pose3D>>& gt,
                                 const Skeleton& skeleton,
                                 const CameraIntrinsics& cam,
                                 const OcclusionGeometry& geo = {});

struct DetectorModel
{
   double noise_px                 = 8.0;
   double confidence_noise         = 0.05;
   double occlusion_miss_threshold = 0.9;
};

Pose2D simulate_detector(const Pose2D& gt2d,
                         const Eigen::VectorXd& occlusion,
                         const DetectorModel& model,
                         std::mt19937_64& rng);

// Ground-truth motion of cfg.num_persons people, gt[person][frame].
std::vector<std::vector<Pose3D>> sample_motion(const SynthConfig& cfg,
                                               std::mt19937_64& rng);

// Occlusion + detector simulation over given ground truth.
Sequence render_sequence(const SynthConfig& cfg,
                         const std::string& seq_id,
                         const std::vector<std::vector<Pose3D>>& gt,
                         std::mt19937_64& rng);
Sequence render_sequence(const SynthConfig& cfg,
                         const std::string& seq_id,
                         const std::vector<std::vector<Pose3D>>& gt,
                         const OcclusionState& occ,
                         std::mt19937_64& rng);

// Longest run of frames on which some person's mean occlusion exceeds
// `threshold`, i.e. the longest detection gap the miss rule will produce.
int longest_miss_run(const OcclusionState& occ, double threshold);

Sequence generate_sequence(const SynthConfig& cfg,
                           std::uint64_t seed,
                           const std::string& seq_id = "seq");

// Stream seed for one sequence of a corpus.
std::uint64_t derive_seed(std::uint64_t corpus_seed, const std::string& key);

// Lengths of maximal runs of missing detections.
std::vector<int> gap_lengths(const PersonTrack& track);

} // namespace posesmooth
