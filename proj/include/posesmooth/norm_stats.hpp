#pragma once

#include <Eigen/Core>

namespace posesmooth
{
// Per-dimension standardisation of network inputs and outputs. Output order
// is [location(3); non-root relative joints (3(J-1))] in millimeters.
struct NormStats
{
   static constexpr double k_min_std = 1e-6;

   Eigen::VectorXd input_mean, input_std;
   Eigen::VectorXd output_mean, output_std;

   // Mean and floored std over the rows of a samples x dims matrix.
   static void fit(const Eigen::MatrixXd& samples,
                   Eigen::VectorXd& mean,
                   Eigen::VectorXd& std);

   // Row-wise: each row of `rows` is one sample.
   Eigen::MatrixXd standardize_outputs(const Eigen::MatrixXd& rows) const;
   Eigen::MatrixXd destandardize_outputs(const Eigen::MatrixXd& rows) const;
};

} // namespace posesmooth
