#pragma once

#include "posesmooth/geometry.hpp"
#include "posesmooth/norm_stats.hpp"

#include <span>
#include <string>
#include <vector>

namespace posesmooth
{
// Visibility-adaptive trajectory refinement. For one person, with P~ the
// refined and P^ the predicted trajectory (rows are frames) and v_t the
// per-frame visibility,
//
//   E_ref(P~) =   sum_t v_t min(|P~_t - P^_t|^2, m)
//             + l1 sum_{t >= tau1} o_t |P~_t - P~_{t-tau1}|^2
//             + l2 sum_{t >= tau2}           |P~_t - P~_{t-tau2}|^2
//
//   E_total = E_ref(location) + l_rel E_ref(relative pose)
//
// with o_t the occlusion weight of the pair (see PairWeighting),
// evaluated in output-standardised units and minimised with Adam.
// Occlusion weight of the tau1 pair (t - tau1, t): `later` uses 1 - v_t,
// `mean` uses 1 - (v_t + v_{t-tau1}) / 2.
enum class PairWeighting { later, mean };

struct RefineConfig
{
   int tau1              = 20;
   int tau2              = 1;
   double clip_m         = 1.0;
   double lambda1        = 0.1;
   double lambda2        = 1.0;
   double lambda_rel     = 0.1;
   double learning_rate  = 1e-2;
   int iterations        = 500;
   int median_window     = 5;
   double visible_threshold = 0.1;
   PairWeighting pair_weighting = PairWeighting::mean;

   void validate() const;
};

const char* to_string(PairWeighting w);
PairWeighting pair_weighting_from_string(const std::string& s);

using VisibilityTrace = std::vector<double>;

// Per-pair weights of the tau1 term, indexed by the later frame (entries
// before tau1 are unused).
std::vector<double> tau1_weights(std::span<const double> v, const RefineConfig& cfg);

// Median-filtered mean joint confidence; undetected frames are 0 before and
// after filtering. The window shrinks symmetrically at the sequence ends.
VisibilityTrace visibility_scores(const PersonTrack& track, int median_window);

double e_pred(const Eigen::MatrixXd& refined,
              const Eigen::MatrixXd& predicted,
              std::span<const double> v,
              double m);

// Unweighted zero-velocity term; 0 when T <= tau.
double e_smooth(const Eigen::MatrixXd& refined, int tau);

struct EnergyTerms
{
   double pred         = 0.0; // sum_t v_t * clipped distance
   double smooth_long  = 0.0; // lambda1 * occlusion-weighted tau1 pairs
   double smooth_short = 0.0; // lambda2 * tau2 pairs

   double total() const noexcept { return pred + smooth_long + smooth_short; }
};

EnergyTerms e_ref_terms(const Eigen::MatrixXd& refined,
                        const Eigen::MatrixXd& predicted,
                        std::span<const double> v,
                        const RefineConfig& cfg);

double e_ref(const Eigen::MatrixXd& refined,
             const Eigen::MatrixXd& predicted,
             std::span<const double> v,
             const RefineConfig& cfg);

double e_total(const Eigen::MatrixXd& refined_loc,
               const Eigen::MatrixXd& refined_rel,
               const Eigen::MatrixXd& predicted_loc,
               const Eigen::MatrixXd& predicted_rel,
               std::span<const double> v,
               const RefineConfig& cfg);

// Gradient of e_ref w.r.t. `refined`; the clipped term has zero gradient
// wherever the squared distance reaches m.
Eigen::MatrixXd grad_e_ref(const Eigen::MatrixXd& refined,
                           const Eigen::MatrixXd& predicted,
                           std::span<const double> v,
                           const RefineConfig& cfg);

struct EnergyGradient
{
   Eigen::MatrixXd loc, rel;
};

EnergyGradient grad_e_total(const Eigen::MatrixXd& refined_loc,
                            const Eigen::MatrixXd& refined_rel,
                            const Eigen::MatrixXd& predicted_loc,
                            const Eigen::MatrixXd& predicted_rel,
                            std::span<const double> v,
                            const RefineConfig& cfg);

struct RefineResult
{
   PoseTrajectory refined;
   double energy = 0.0;
   EnergyTerms loc_terms, rel_terms; // unscaled by lambda_rel
   int iterations = 0;
   std::vector<double> energy_history; // before each step, then final
};

// Gap frames (no detection) start from a linear interpolation between the
// nearest detected frames; everything else starts at the prediction.
RefineResult refine_track(const PoseTrajectory& predicted,
                          const VisibilityTrace& v,
                          const RefineConfig& cfg,
                          const NormStats& norm,
                          int root_index);

} // namespace posesmooth
