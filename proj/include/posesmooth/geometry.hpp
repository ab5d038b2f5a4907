#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace posesmooth
{
using Joints2 = Eigen::Matrix<double, Eigen::Dynamic, 2>; // J x 2
using Joints3 = Eigen::Matrix<double, Eigen::Dynamic, 3>; // J x 3, millimeters

// ------------------------------------------------------------------ skeleton
//
struct Skeleton
{
   std::vector<std::string> joint_names;
   int root_index = 0;
   std::vector<std::pair<int, int>> edges; // (parent, child), parents first

   int num_joints() const noexcept { return int(joint_names.size()); }
   void validate() const;

   // 17 joints, hip root. Edge order is a valid forward-kinematics order.
   static Skeleton default17();
};

bool operator==(const Skeleton& a, const Skeleton& b);

// ------------------------------------------------------------------ camera
//
struct CameraIntrinsics
{
   double fx = 1000.0;
   double fy = 1000.0;
   double cx = 960.0;
   double cy = 540.0;

   void validate() const;
};

// ------------------------------------------------------------------ poses
//
enum class Units { pixels, normalized };

struct Pose2D
{
   Joints2 coords;
   Eigen::VectorXd confidence; // in [0, 1]
   bool detected = true;
   Units units   = Units::pixels;

   int num_joints() const noexcept { return int(coords.rows()); }
   void validate() const;
};

// Absolute pose split into root location and root-relative offsets.
struct Pose3D
{
   Eigen::Vector3d location = Eigen::Vector3d::Zero();
   Joints3 relative; // root row is zero

   int num_joints() const noexcept { return int(relative.rows()); }
};

// Per-frame detections and ground truth of one person. A missing detection
// means the person was fully invisible on that frame.
struct PersonTrack
{
   std::string person_id;
   std::vector<std::optional<Pose2D>> detections;
   std::vector<std::optional<Pose3D>> gt;

   int num_frames() const noexcept { return int(detections.size()); }
   bool has_full_gt() const noexcept;
};

struct Sequence
{
   std::string seq_id;
   int num_frames = 0;
   double fps     = 30.0;
   CameraIntrinsics camera;
   Skeleton skeleton;
   std::vector<PersonTrack> tracks;

   void validate() const;
   const PersonTrack& track(const std::string& person_id) const;
};

// ------------------------------------------------------------------ operations
//
Pose2D normalize_keypoints(const Pose2D& pose, const CameraIntrinsics& cam);

// Pinhole projection to pixels; all depths must be positive.
Pose2D project(const Joints3& abs_joints, const CameraIntrinsics& cam);

Joints3 compose_absolute(const Eigen::Vector3d& location,
                         const Joints3& relative);
Pose3D split_absolute(const Joints3& abs_joints, int root_index);

inline Joints3 absolute(const Pose3D& p)
{
   return compose_absolute(p.location, p.relative);
}

// A pose trajectory of one person: one Pose3D per frame plus a flag telling
// whether a 2D detection existed on that frame.
struct PoseTrajectory
{
   std::vector<Pose3D> poses;
   std::vector<bool> had_detection;

   int num_frames() const noexcept { return int(poses.size()); }
};

// T x 3 matrix of locations.
Eigen::MatrixXd location_matrix(const std::vector<Pose3D>& poses);
// T x 3(J-1) matrix of non-root relative joints, ascending joint order.
Eigen::MatrixXd relative_matrix(const std::vector<Pose3D>& poses,
                                int root_index);
std::vector<Pose3D> poses_from_matrices(const Eigen::MatrixXd& loc,
                                        const Eigen::MatrixXd& rel,
                                        int num_joints,
                                        int root_index);

} // namespace posesmooth
