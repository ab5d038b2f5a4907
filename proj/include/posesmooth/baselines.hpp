#pragma once

#include "posesmooth/geometry.hpp"

#include <span>
#include <vector>

namespace posesmooth
{
// Rows are frames. Undetected runs are replaced by per-column linear
// interpolation between the nearest detected rows; leading and trailing
// runs hold the nearest detected row. Throws if nothing was detected.
Eigen::MatrixXd linear_interpolate(const Eigen::MatrixXd& trajectory,
                                   const std::vector<bool>& detected);

PoseTrajectory interpolate_track(const PoseTrajectory& predicted, int root_index);

struct OneEuroConfig
{
   double min_cutoff = 1.0;   // Hz
   double beta       = 0.007;
   double d_cutoff   = 1.0;   // Hz
};

// First-order low-pass with a per-sample smoothing factor.
class LowPassFilter
{
 public:
   double filter(double value, double alpha);
   bool initialized() const noexcept { return initialized_; }
   double last_raw() const noexcept { return raw_; }

 private:
   double raw_      = 0.0;
   double filtered_ = 0.0;
   bool initialized_ = false;
};

class OneEuroFilter
{
 public:
   OneEuroFilter(double fps, const OneEuroConfig& cfg);

   double filter(double value);

   // alpha = 1 / (1 + tau * fps), tau = 1 / (2 pi cutoff)
   static double alpha(double cutoff, double fps);

 private:
   double fps_;
   OneEuroConfig cfg_;
   LowPassFilter x_, dx_;
};

std::vector<double> one_euro_filter(std::span<const double> signal,
                                    double fps,
                                    const OneEuroConfig& cfg = {});

// Filters every column independently.
Eigen::MatrixXd one_euro_filter(const Eigen::MatrixXd& trajectory,
                                double fps,
                                const OneEuroConfig& cfg = {});

// Interpolation followed by the 1-Euro filter on location and relative joints.
PoseTrajectory one_euro_track(const PoseTrajectory& predicted,
                              double fps,
                              int root_index,
                              const OneEuroConfig& cfg = {});

} // namespace posesmooth
