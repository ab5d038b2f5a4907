#include "posesmooth/refine.hpp"
#include "posesmooth/baselines.hpp"
#include "posesmooth/error.hpp"
#include "posesmooth/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace posesmooth
{
void RefineConfig::validate() const
{
   if(tau2 < 1 || !(tau1 > tau2))
      throw ValidationError("refine: need tau1 > tau2 >= 1");
   if(!(clip_m > 0.0)) throw ValidationError("refine: clip m must be > 0");
   if(!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda_rel >= 0.0))
      throw ValidationError("refine: weights must be non-negative");
   if(!(learning_rate > 0.0)) throw ValidationError("refine: learning rate must be > 0");
   if(iterations < 0) throw ValidationError("refine: iterations must be >= 0");
   if(median_window < 1 || median_window % 2 == 0)
      throw ValidationError("refine: median window must be odd and positive");
}

const char* to_string(PairWeighting w)
{
   return w == PairWeighting::mean ? "mean" : "later";
}

PairWeighting pair_weighting_from_string(const std::string& s)
{
   if(s == "later") return PairWeighting::later;
   if(s == "mean") return PairWeighting::mean;
   throw ValidationError("unknown pair weighting '" + s + "'");
}

std::vector<double> tau1_weights(std::span<const double> v, const RefineConfig& cfg)
{
   std::vector<double> w(v.size(), 0.0);
   for(size_t t = 0; t < v.size(); ++t) {
      if(cfg.pair_weighting == PairWeighting::later || t < size_t(cfg.tau1))
         w[t] = 1.0 - v[t];
      else
         w[t] = 1.0 - 0.5 * (v[t] + v[t - cfg.tau1]);
   }
   return w;
}

VisibilityTrace visibility_scores(const PersonTrack& track, int median_window)
{
   if(median_window < 1 || median_window % 2 == 0)
      throw ValidationError("visibility: median window must be odd and positive");
   const int T = track.num_frames();
   std::vector<double> raw(T, 0.0);
   for(int t = 0; t < T; ++t)
      if(const auto& d = track.detections[t]; d && d->detected)
         raw[t] = d->confidence.size() > 0 ? d->confidence.mean() : 0.0;

   const int half = median_window / 2;
   VisibilityTrace v(T, 0.0);
   std::vector<double> buf;
   for(int t = 0; t < T; ++t) {
      if(!track.detections[t] || !track.detections[t]->detected) continue;
      const int h = std::min({half, t, T - 1 - t});
      buf.assign(raw.begin() + (t - h), raw.begin() + (t + h + 1));
      std::nth_element(buf.begin(), buf.begin() + h, buf.end());
      v[t] = buf[h];
   }
   return v;
}

namespace
{
void check_shapes(const Eigen::MatrixXd& refined,
                  const Eigen::MatrixXd& predicted,
                  std::span<const double> v)
{
   if(refined.rows() != predicted.rows() || refined.cols() != predicted.cols()
      || Eigen::Index(v.size()) != refined.rows())
      throw ValidationError("refine: trajectory and visibility lengths differ");
}

double pair_sum(const Eigen::MatrixXd& x, int tau, const double* weights)
{
   double e = 0.0;
   for(Eigen::Index t = tau; t < x.rows(); ++t) {
      const double w = weights ? weights[t] : 1.0;
      if(w != 0.0) e += w * (x.row(t) - x.row(t - tau)).squaredNorm();
   }
   return e;
}

void add_pair_gradient(const Eigen::MatrixXd& x,
                       int tau,
                       double lambda,
                       const double* weights,
                       Eigen::MatrixXd& g)
{
   for(Eigen::Index t = tau; t < x.rows(); ++t) {
      const double w = lambda * (weights ? weights[t] : 1.0);
      if(w == 0.0) continue;
      const Eigen::RowVectorXd d = 2.0 * w * (x.row(t) - x.row(t - tau));
      g.row(t) += d;
      g.row(t - tau) -= d;
   }
}

} // namespace

double e_pred(const Eigen::MatrixXd& refined,
              const Eigen::MatrixXd& predicted,
              std::span<const double> v,
              double m)
{
   check_shapes(refined, predicted, v);
   double e = 0.0;
   for(Eigen::Index t = 0; t < refined.rows(); ++t)
      if(v[t] != 0.0)
         e += v[t] * std::min((refined.row(t) - predicted.row(t)).squaredNorm(), m);
   return e;
}

double e_smooth(const Eigen::MatrixXd& refined, int tau)
{
   if(tau < 1) throw ValidationError("e_smooth: tau must be >= 1");
   return pair_sum(refined, tau, nullptr);
}

EnergyTerms e_ref_terms(const Eigen::MatrixXd& refined,
                        const Eigen::MatrixXd& predicted,
                        std::span<const double> v,
                        const RefineConfig& cfg)
{
   check_shapes(refined, predicted, v);
   const auto occluded = tau1_weights(v, cfg);
   EnergyTerms e;
   e.pred         = e_pred(refined, predicted, v, cfg.clip_m);
   e.smooth_long  = cfg.lambda1 * pair_sum(refined, cfg.tau1, occluded.data());
   e.smooth_short = cfg.lambda2 * pair_sum(refined, cfg.tau2, nullptr);
   return e;
}

double e_ref(const Eigen::MatrixXd& refined,
             const Eigen::MatrixXd& predicted,
             std::span<const double> v,
             const RefineConfig& cfg)
{
   return e_ref_terms(refined, predicted, v, cfg).total();
}

double e_total(const Eigen::MatrixXd& refined_loc,
               const Eigen::MatrixXd& refined_rel,
               const Eigen::MatrixXd& predicted_loc,
               const Eigen::MatrixXd& predicted_rel,
               std::span<const double> v,
               const RefineConfig& cfg)
{
   return e_ref(refined_loc, predicted_loc, v, cfg)
          + cfg.lambda_rel * e_ref(refined_rel, predicted_rel, v, cfg);
}

Eigen::MatrixXd grad_e_ref(const Eigen::MatrixXd& refined,
                           const Eigen::MatrixXd& predicted,
                           std::span<const double> v,
                           const RefineConfig& cfg)
{
   check_shapes(refined, predicted, v);
   Eigen::MatrixXd g = Eigen::MatrixXd::Zero(refined.rows(), refined.cols());
   for(Eigen::Index t = 0; t < refined.rows(); ++t) {
      if(v[t] == 0.0) continue;
      const Eigen::RowVectorXd d = refined.row(t) - predicted.row(t);
      if(d.squaredNorm() < cfg.clip_m) g.row(t) += 2.0 * v[t] * d;
   }
   const auto occluded = tau1_weights(v, cfg);
   add_pair_gradient(refined, cfg.tau1, cfg.lambda1, occluded.data(), g);
   add_pair_gradient(refined, cfg.tau2, cfg.lambda2, nullptr, g);
   return g;
}

EnergyGradient grad_e_total(const Eigen::MatrixXd& refined_loc,
                            const Eigen::MatrixXd& refined_rel,
                            const Eigen::MatrixXd& predicted_loc,
                            const Eigen::MatrixXd& predicted_rel,
                            std::span<const double> v,
                            const RefineConfig& cfg)
{
   return {grad_e_ref(refined_loc, predicted_loc, v, cfg),
           cfg.lambda_rel * grad_e_ref(refined_rel, predicted_rel, v, cfg)};
}

RefineResult refine_track(const PoseTrajectory& predicted,
                          const VisibilityTrace& v,
                          const RefineConfig& cfg,
                          const NormStats& norm,
                          int root_index)
{
   cfg.validate();
   const int T = predicted.num_frames();
   if(int(v.size()) != T || int(predicted.had_detection.size()) != T)
      throw ValidationError("refine: visibility/detection length differs from track");
   RefineResult res;
   if(T == 0) {
      res.refined = predicted;
      return res;
   }
   const int J = predicted.poses.front().num_joints();
   if(norm.output_mean.size() != 3 + 3 * (J - 1))
      throw ValidationError("refine: normalisation does not match the joint count");

   const Eigen::RowVectorXd loc_mu = norm.output_mean.head(3).transpose();
   const Eigen::RowVectorXd loc_sd = norm.output_std.head(3).transpose();
   const Eigen::RowVectorXd rel_mu = norm.output_mean.tail(3 * (J - 1)).transpose();
   const Eigen::RowVectorXd rel_sd = norm.output_std.tail(3 * (J - 1)).transpose();

   auto standardize = [](const Eigen::MatrixXd& m, const Eigen::RowVectorXd& mu,
                         const Eigen::RowVectorXd& sd) -> Eigen::MatrixXd {
      return (m.rowwise() - mu).array().rowwise() / sd.array();
   };
   auto destandardize = [](const Eigen::MatrixXd& m, const Eigen::RowVectorXd& mu,
                           const Eigen::RowVectorXd& sd) -> Eigen::MatrixXd {
      return (m.array().rowwise() * sd.array()).matrix().rowwise() + mu;
   };

   const Eigen::MatrixXd p_loc
       = standardize(location_matrix(predicted.poses), loc_mu, loc_sd);
   const Eigen::MatrixXd p_rel
       = standardize(relative_matrix(predicted.poses, root_index), rel_mu, rel_sd);

   const bool any_detected = std::find(predicted.had_detection.begin(),
                                       predicted.had_detection.end(), true)
                             != predicted.had_detection.end();
   Eigen::MatrixXd r_loc = any_detected
                               ? linear_interpolate(p_loc, predicted.had_detection)
                               : p_loc;
   Eigen::MatrixXd r_rel = any_detected
                               ? linear_interpolate(p_rel, predicted.had_detection)
                               : p_rel;

   auto energy = [&] { return e_total(r_loc, r_rel, p_loc, p_rel, v, cfg); };
   auto check  = [&](double e, int it) {
      if(!std::isfinite(e)) {
         std::ostringstream ss;
         ss << "refine: non-finite energy at iteration " << it;
         throw RuntimeError(ss.str());
      }
   };

   std::vector<nn::ParamView> params{{r_loc.data(), r_loc.size()},
                                     {r_rel.data(), r_rel.size()}};
   nn::AdamState adam;
   res.energy_history.reserve(cfg.iterations + 1);
   for(int it = 0; it < cfg.iterations; ++it) {
      const double e = energy();
      check(e, it);
      res.energy_history.push_back(e);
      auto g = grad_e_total(r_loc, r_rel, p_loc, p_rel, v, cfg);
      std::vector<nn::ParamView> grads{{g.loc.data(), g.loc.size()},
                                       {g.rel.data(), g.rel.size()}};
      nn::adam_step(params, grads, adam, cfg.learning_rate);
   }
   res.energy = energy();
   check(res.energy, cfg.iterations);
   res.energy_history.push_back(res.energy);
   res.iterations = cfg.iterations;
   res.loc_terms  = e_ref_terms(r_loc, p_loc, v, cfg);
   res.rel_terms  = e_ref_terms(r_rel, p_rel, v, cfg);

   res.refined.poses = poses_from_matrices(destandardize(r_loc, loc_mu, loc_sd),
                                           destandardize(r_rel, rel_mu, rel_sd),
                                           J, root_index);
   res.refined.had_detection = predicted.had_detection;
   return res;
}

} // namespace posesmooth
