#pragma once

#include "posesmooth/geometry.hpp"
#include "posesmooth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace testing
{
using namespace posesmooth;

inline double rel_err(double a, double b, double floor = 1e-8)
{
   return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double lo = -1.0, double hi = 1.0)
{
   std::uniform_real_distribution<double> u(lo, hi);
   Eigen::MatrixXd m(rows, cols);
   for(Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
   return m;
}

inline Pose3D random_pose(std::mt19937_64& rng, int J, int root = 0)
{
   Joints3 abs = random_matrix(rng, J, 3, -800.0, 800.0);
   abs.col(2).array() += 4000.0;
   return split_absolute(abs, root);
}

// Small desk-like setup that trains in a few seconds.
inline ExperimentConfig tiny_config()
{
   ExperimentConfig cfg;
   cfg.corpus            = {2, 1, 2};
   cfg.synth.num_frames  = 90;
   cfg.synth.num_persons = 3;
   cfg.tpn.channels      = 8;
   cfg.train.epochs      = 2;
   cfg.train.batch_size  = 32;
   cfg.refine.iterations = 50;
   return cfg;
}

} // namespace testing
