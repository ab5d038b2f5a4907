#include "posesmooth/baselines.hpp"
#include "posesmooth/error.hpp"

#include <cmath>
#include <numbers>

namespace posesmooth
{
Eigen::MatrixXd linear_interpolate(const Eigen::MatrixXd& trajectory,
                                   const std::vector<bool>& detected)
{
   const Eigen::Index T = trajectory.rows();
   if(Eigen::Index(detected.size()) != T)
      throw ValidationError("linear_interpolate: flag count differs from frames");
   std::vector<Eigen::Index> known;
   for(Eigen::Index t = 0; t < T; ++t)
      if(detected[t]) known.push_back(t);
   if(known.empty())
      throw ValidationError("linear_interpolate: no detected frame to anchor on");

   Eigen::MatrixXd out = trajectory;
   for(Eigen::Index t = 0; t < known.front(); ++t)
      out.row(t) = trajectory.row(known.front());
   for(Eigen::Index t = known.back() + 1; t < T; ++t)
      out.row(t) = trajectory.row(known.back());
   for(size_t k = 0; k + 1 < known.size(); ++k) {
      const Eigen::Index a = known[k], b = known[k + 1];
      for(Eigen::Index t = a + 1; t < b; ++t) {
         const double s = double(t - a) / double(b - a);
         out.row(t)     = (1.0 - s) * trajectory.row(a) + s * trajectory.row(b);
      }
   }
   return out;
}

PoseTrajectory interpolate_track(const PoseTrajectory& predicted, int root_index)
{
   if(predicted.num_frames() == 0) return predicted;
   const int J = predicted.poses.front().num_joints();
   const auto loc = linear_interpolate(location_matrix(predicted.poses),
                                       predicted.had_detection);
   const auto rel = linear_interpolate(
       relative_matrix(predicted.poses, root_index), predicted.had_detection);
   PoseTrajectory out;
   out.poses         = poses_from_matrices(loc, rel, J, root_index);
   out.had_detection = predicted.had_detection;
   return out;
}

// ------------------------------------------------------------------ 1-Euro
//
double LowPassFilter::filter(double value, double alpha)
{
   if(initialized_) {
      filtered_ = alpha * value + (1.0 - alpha) * filtered_;
   } else {
      filtered_    = value;
      initialized_ = true;
   }
   raw_ = value;
   return filtered_;
}

OneEuroFilter::OneEuroFilter(double fps, const OneEuroConfig& cfg)
    : fps_(fps)
    , cfg_(cfg)
{
   if(!(fps > 0.0)) throw ValidationError("1-Euro filter: fps must be positive");
   if(!(cfg.min_cutoff > 0.0) || !(cfg.d_cutoff > 0.0))
      throw ValidationError("1-Euro filter: cutoffs must be positive");
}

double OneEuroFilter::alpha(double cutoff, double fps)
{
   const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff);
   return 1.0 / (1.0 + tau * fps);
}

double OneEuroFilter::filter(double value)
{
   const double dx  = x_.initialized() ? (value - x_.last_raw()) * fps_ : 0.0;
   const double edx = dx_.filter(dx, alpha(cfg_.d_cutoff, fps_));
   const double cutoff = cfg_.min_cutoff + cfg_.beta * std::abs(edx);
   return x_.filter(value, alpha(cutoff, fps_));
}

std::vector<double> one_euro_filter(std::span<const double> signal,
                                    double fps,
                                    const OneEuroConfig& cfg)
{
   OneEuroFilter f(fps, cfg);
   std::vector<double> out;
   out.reserve(signal.size());
   for(double x : signal) out.push_back(f.filter(x));
   return out;
}

Eigen::MatrixXd one_euro_filter(const Eigen::MatrixXd& trajectory,
                                double fps,
                                const OneEuroConfig& cfg)
{
   Eigen::MatrixXd out(trajectory.rows(), trajectory.cols());
   for(Eigen::Index c = 0; c < trajectory.cols(); ++c) {
      OneEuroFilter f(fps, cfg);
      for(Eigen::Index t = 0; t < trajectory.rows(); ++t)
         out(t, c) = f.filter(trajectory(t, c));
   }
   return out;
}

PoseTrajectory one_euro_track(const PoseTrajectory& predicted,
                              double fps,
                              int root_index,
                              const OneEuroConfig& cfg)
{
   const auto interp = interpolate_track(predicted, root_index);
   if(interp.num_frames() == 0) return interp;
   const int J = interp.poses.front().num_joints();
   const auto loc = one_euro_filter(location_matrix(interp.poses), fps, cfg);
   const auto rel
       = one_euro_filter(relative_matrix(interp.poses, root_index), fps, cfg);
   PoseTrajectory out;
   out.poses         = poses_from_matrices(loc, rel, J, root_index);
   out.had_detection = predicted.had_detection;
   return out;
}

} // namespace posesmooth
