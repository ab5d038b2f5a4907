#pragma once

#include "posesmooth/geometry.hpp"
#include "posesmooth/refine.hpp"

#include <string>
#include <vector>

namespace posesmooth
{
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3>; // N x 3

// Mean Euclidean root error, mm.
double mrpe(const Points3& pred, const Points3& gt);

// Mean over poses of the mean over all J joints (root included).
double mpjpe(const std::vector<Joints3>& pred, const std::vector<Joints3>& gt);

// Percentage of joints with error strictly below `threshold` mm.
double pck3d(const std::vector<Joints3>& pred,
             const std::vector<Joints3>& gt,
             double threshold = 150.0);

// argmin_s sum |s p - g|^2 = sum <p, g> / sum <p, p>.
double optimal_scale(const Points3& pred, const Points3& gt);

// Mean Euclidean error of s * pred against gt with s = optimal_scale.
double n_mrpe(const Points3& pred, const Points3& gt);
// min_s (1/N) sum |s pred - gt|^2.
double n_mrpe_squared(const Points3& pred, const Points3& gt);

// s fit on the absolute joint clouds, then MPJPE of the scaled relative poses.
double n_mpjpe(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt);

enum class Subset { all, visible, occluded };

const char* to_string(Subset s);
Subset subset_from_string(const std::string& s);

// visible: v_t >= threshold; occluded: the complement; all: every frame.
std::vector<bool> subset_filter(const VisibilityTrace& v,
                                Subset mode,
                                double threshold = 0.1);

struct SequenceMetrics
{
   std::string seq_id;
   long count       = 0; // evaluated poses
   double mrpe      = 0.0;
   double mpjpe     = 0.0;
   double pck       = 0.0;
   double n_mrpe    = 0.0;
   double n_mrpe_sq = 0.0;
   double n_mpjpe   = 0.0;
};

struct MetricsReport
{
   Subset subset = Subset::all;
   std::vector<SequenceMetrics> sequences;
   SequenceMetrics mean; // seq_id "mean", count = total
};

// One person of one sequence, prepared for evaluation.
struct EvalTrack
{
   PoseTrajectory pred;
   std::vector<std::optional<Pose3D>> gt;
   VisibilityTrace visibility;
};

struct MetricOptions
{
   double visible_threshold = 0.1;
   double pck_threshold     = 150.0;
};

// Pools every selected frame with ground truth over all persons. Metrics of
// an empty selection are NaN with count 0.
SequenceMetrics evaluate_sequence(const std::string& seq_id,
                                  const std::vector<EvalTrack>& tracks,
                                  Subset subset,
                                  const MetricOptions& opt = {});

// Unweighted mean over sequences with a non-zero count.
MetricsReport aggregate(const std::vector<SequenceMetrics>& per_sequence,
                        Subset subset = Subset::all);

} // namespace posesmooth
