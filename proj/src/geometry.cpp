#include "posesmooth/geometry.hpp"
#include "posesmooth/error.hpp"

#include <cmath>
#include <set>

namespace posesmooth
{
// ------------------------------------------------------------------ skeleton
//
void Skeleton::validate() const
{
   const int J = num_joints();
   if(J < 2) throw ValidationError("skeleton needs at least 2 joints");
   if(root_index < 0 || root_index >= J)
      throw ValidationError("skeleton root index out of range");
   std::set<std::string> names(joint_names.begin(), joint_names.end());
   if(int(names.size()) != J)
      throw ValidationError("skeleton joint names must be unique");
   for(const auto& [a, b] : edges)
      if(a < 0 || a >= J || b < 0 || b >= J || a == b)
         throw ValidationError("skeleton edge references invalid joint");
}

Skeleton Skeleton::default17()
{
   Skeleton s;
   s.joint_names = {"hip",        "r_hip",      "r_knee",   "r_ankle",
                    "l_hip",      "l_knee",     "l_ankle",  "spine",
                    "thorax",     "neck",       "head",     "l_shoulder",
                    "l_elbow",    "l_wrist",    "r_shoulder", "r_elbow",
                    "r_wrist"};
   s.root_index = 0;
   s.edges      = {{0, 1},  {1, 2},   {2, 3},   {0, 4},   {4, 5},  {5, 6},
                   {0, 7},  {7, 8},   {8, 9},   {9, 10},  {8, 11}, {11, 12},
                   {12, 13}, {8, 14}, {14, 15}, {15, 16}};
   return s;
}

bool operator==(const Skeleton& a, const Skeleton& b)
{
   return a.joint_names == b.joint_names && a.root_index == b.root_index
          && a.edges == b.edges;
}

void CameraIntrinsics::validate() const
{
   if(!(fx > 0.0) || !(fy > 0.0))
      throw ValidationError("camera focal lengths must be positive");
   if(!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(fx)
      || !std::isfinite(fy))
      throw ValidationError("camera intrinsics must be finite");
}

void Pose2D::validate() const
{
   if(confidence.size() != coords.rows())
      throw ValidationError("pose confidence count does not match joints");
   for(int j = 0; j < confidence.size(); ++j) {
      const double c = confidence(j);
      if(!(c >= 0.0 && c <= 1.0))
         throw ValidationError("pose confidence outside [0,1]");
      if(!detected && c != 0.0)
         throw ValidationError("undetected pose must have zero confidences");
   }
}

bool PersonTrack::has_full_gt() const noexcept
{
   for(const auto& g : gt)
      if(!g) return false;
   return !gt.empty();
}

void Sequence::validate() const
{
   if(num_frames < 1) throw ValidationError("sequence needs at least 1 frame");
   if(!(fps > 0.0)) throw ValidationError("sequence fps must be positive");
   camera.validate();
   skeleton.validate();
   const int J = skeleton.num_joints();
   for(const auto& tr : tracks) {
      if(int(tr.detections.size()) != num_frames
         || int(tr.gt.size()) != num_frames)
         throw ValidationError("track '" + tr.person_id
                               + "' length differs from sequence length");
      for(const auto& d : tr.detections)
         if(d) {
            if(d->num_joints() != J)
               throw ValidationError("detection joint count mismatch");
            d->validate();
         }
      for(const auto& g : tr.gt)
         if(g && g->num_joints() != J)
            throw ValidationError("ground-truth joint count mismatch");
   }
}

const PersonTrack& Sequence::track(const std::string& person_id) const
{
   for(const auto& t : tracks)
      if(t.person_id == person_id) return t;
   throw ValidationError("sequence '" + seq_id + "' has no person '"
                         + person_id + "'");
}

// ------------------------------------------------------------------ operations
//
Pose2D normalize_keypoints(const Pose2D& pose, const CameraIntrinsics& cam)
{
   cam.validate();
   if(pose.units != Units::pixels)
      throw ValidationError("keypoints are already normalized");
   Pose2D out = pose;
   out.units  = Units::normalized;
   out.coords.col(0) = (pose.coords.col(0).array() - cam.cx) / cam.fx;
   out.coords.col(1) = (pose.coords.col(1).array() - cam.cy) / cam.fy;
   return out;
}

Pose2D project(const Joints3& abs_joints, const CameraIntrinsics& cam)
{
   cam.validate();
   const int J = int(abs_joints.rows());
   Pose2D out;
   out.coords.resize(J, 2);
   out.confidence = Eigen::VectorXd::Ones(J);
   out.detected   = true;
   out.units      = Units::pixels;
   for(int j = 0; j < J; ++j) {
      const double z = abs_joints(j, 2);
      if(!(z > 0.0))
         throw ValidationError("cannot project a point with non-positive depth");
      out.coords(j, 0) = cam.fx * abs_joints(j, 0) / z + cam.cx;
      out.coords(j, 1) = cam.fy * abs_joints(j, 1) / z + cam.cy;
   }
   return out;
}

Joints3 compose_absolute(const Eigen::Vector3d& location,
                         const Joints3& relative)
{
   Joints3 out = relative;
   out.rowwise() += location.transpose();
   return out;
}

Pose3D split_absolute(const Joints3& abs_joints, int root_index)
{
   if(root_index < 0 || root_index >= abs_joints.rows())
      throw ValidationError("root index out of range");
   Pose3D p;
   p.location = abs_joints.row(root_index).transpose();
   p.relative = abs_joints;
   p.relative.rowwise() -= p.location.transpose();
   p.relative.row(root_index).setZero();
   return p;
}

Eigen::MatrixXd location_matrix(const std::vector<Pose3D>& poses)
{
   Eigen::MatrixXd m(poses.size(), 3);
   for(size_t t = 0; t < poses.size(); ++t)
      m.row(Eigen::Index(t)) = poses[t].location.transpose();
   return m;
}

Eigen::MatrixXd relative_matrix(const std::vector<Pose3D>& poses,
                                int root_index)
{
   if(poses.empty()) return Eigen::MatrixXd(0, 0);
   const int J = poses.front().num_joints();
   Eigen::MatrixXd m(poses.size(), 3 * (J - 1));
   for(size_t t = 0; t < poses.size(); ++t) {
      int c = 0;
      for(int j = 0; j < J; ++j) {
         if(j == root_index) continue;
         m.block<1, 3>(Eigen::Index(t), c) = poses[t].relative.row(j);
         c += 3;
      }
   }
   return m;
}

std::vector<Pose3D> poses_from_matrices(const Eigen::MatrixXd& loc,
                                        const Eigen::MatrixXd& rel,
                                        int num_joints,
                                        int root_index)
{
   if(loc.rows() != rel.rows() || loc.cols() != 3
      || rel.cols() != 3 * (num_joints - 1))
      throw ValidationError("trajectory matrix shapes are inconsistent");
   std::vector<Pose3D> out(loc.rows());
   for(Eigen::Index t = 0; t < loc.rows(); ++t) {
      auto& p    = out[t];
      p.location = loc.row(t).transpose();
      p.relative = Joints3::Zero(num_joints, 3);
      int c      = 0;
      for(int j = 0; j < num_joints; ++j) {
         if(j == root_index) continue;
         p.relative.row(j) = rel.block<1, 3>(t, c);
         c += 3;
      }
   }
   return out;
}

} // namespace posesmooth
