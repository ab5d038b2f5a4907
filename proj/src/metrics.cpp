#include "posesmooth/metrics.hpp"
#include "posesmooth/error.hpp"

#include <cmath>
#include <limits>

namespace posesmooth
{
namespace
{
void check_points(const Points3& pred, const Points3& gt, const char* what)
{
   if(pred.rows() != gt.rows())
      throw ValidationError(std::string(what) + ": prediction/ground-truth count differs");
   if(pred.rows() == 0)
      throw ValidationError(std::string(what) + ": empty evaluation set");
}

void check_poses(const std::vector<Joints3>& pred,
                 const std::vector<Joints3>& gt,
                 const char* what)
{
   if(pred.size() != gt.size())
      throw ValidationError(std::string(what) + ": prediction/ground-truth count differs");
   if(pred.empty()) throw ValidationError(std::string(what) + ": empty evaluation set");
   for(size_t i = 0; i < pred.size(); ++i)
      if(pred[i].rows() != gt[i].rows() || pred[i].rows() == 0)
         throw ValidationError(std::string(what) + ": joint count mismatch");
}

} // namespace

double mrpe(const Points3& pred, const Points3& gt)
{
   check_points(pred, gt, "mrpe");
   return (pred - gt).rowwise().norm().mean();
}

double mpjpe(const std::vector<Joints3>& pred, const std::vector<Joints3>& gt)
{
   check_poses(pred, gt, "mpjpe");
   double sum = 0.0;
   for(size_t i = 0; i < pred.size(); ++i)
      sum += (pred[i] - gt[i]).rowwise().norm().mean();
   return sum / double(pred.size());
}

double pck3d(const std::vector<Joints3>& pred,
             const std::vector<Joints3>& gt,
             double threshold)
{
   check_poses(pred, gt, "pck3d");
   long hit = 0, total = 0;
   for(size_t i = 0; i < pred.size(); ++i) {
      const Eigen::VectorXd err = (pred[i] - gt[i]).rowwise().norm();
      hit += (err.array() < threshold).count();
      total += err.size();
   }
   return 100.0 * double(hit) / double(total);
}

double optimal_scale(const Points3& pred, const Points3& gt)
{
   check_points(pred, gt, "optimal_scale");
   const double pp = pred.squaredNorm();
   if(!(pp > 0.0)) throw ValidationError("optimal_scale: all-zero predictions");
   return pred.cwiseProduct(gt).sum() / pp;
}

double n_mrpe(const Points3& pred, const Points3& gt)
{
   const double s = optimal_scale(pred, gt);
   return ((s * pred) - gt).rowwise().norm().mean();
}

double n_mrpe_squared(const Points3& pred, const Points3& gt)
{
   const double s = optimal_scale(pred, gt);
   return ((s * pred) - gt).rowwise().squaredNorm().mean();
}

double n_mpjpe(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt)
{
   if(pred.size() != gt.size())
      throw ValidationError("n_mpjpe: prediction/ground-truth count differs");
   if(pred.empty()) throw ValidationError("n_mpjpe: empty evaluation set");
   const Eigen::Index J = pred.front().num_joints();
   Points3 p(J * pred.size(), 3), g(J * gt.size(), 3);
   for(size_t i = 0; i < pred.size(); ++i) {
      if(pred[i].num_joints() != J || gt[i].num_joints() != J)
         throw ValidationError("n_mpjpe: joint count mismatch");
      p.middleRows(i * J, J) = absolute(pred[i]);
      g.middleRows(i * J, J) = absolute(gt[i]);
   }
   const double s = optimal_scale(p, g);
   std::vector<Joints3> sp, sg;
   sp.reserve(pred.size());
   sg.reserve(gt.size());
   for(size_t i = 0; i < pred.size(); ++i) {
      sp.push_back(s * pred[i].relative);
      sg.push_back(gt[i].relative);
   }
   return mpjpe(sp, sg);
}

const char* to_string(Subset s)
{
   switch(s) {
      case Subset::all: return "all";
      case Subset::visible: return "visible";
      case Subset::occluded: return "occluded";
   }
   return "all";
}

Subset subset_from_string(const std::string& s)
{
   if(s == "all") return Subset::all;
   if(s == "visible") return Subset::visible;
   if(s == "occluded") return Subset::occluded;
   throw ValidationError("unknown subset '" + s + "'");
}

std::vector<bool> subset_filter(const VisibilityTrace& v, Subset mode, double threshold)
{
   std::vector<bool> mask(v.size(), true);
   if(mode == Subset::all) return mask;
   for(size_t t = 0; t < v.size(); ++t) {
      const bool visible = v[t] >= threshold;
      mask[t]            = mode == Subset::visible ? visible : !visible;
   }
   return mask;
}

SequenceMetrics evaluate_sequence(const std::string& seq_id,
                                  const std::vector<EvalTrack>& tracks,
                                  Subset subset,
                                  const MetricOptions& opt)
{
   std::vector<Pose3D> pred, gt;
   for(const auto& tr : tracks) {
      const size_t T = tr.pred.poses.size();
      if(tr.gt.size() != T || tr.visibility.size() != T)
         throw ValidationError("evaluate: misaligned prediction for sequence " + seq_id);
      const auto mask = subset_filter(tr.visibility, subset, opt.visible_threshold);
      for(size_t t = 0; t < T; ++t) {
         if(!mask[t] || !tr.gt[t]) continue;
         pred.push_back(tr.pred.poses[t]);
         gt.push_back(*tr.gt[t]);
      }
   }

   SequenceMetrics m;
   m.seq_id = seq_id;
   m.count  = long(pred.size());
   if(pred.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      m.mrpe = m.mpjpe = m.pck = m.n_mrpe = m.n_mrpe_sq = m.n_mpjpe = nan;
      return m;
   }
   Points3 pr(pred.size(), 3), gr(gt.size(), 3);
   std::vector<Joints3> prel, grel;
   for(size_t i = 0; i < pred.size(); ++i) {
      pr.row(i) = pred[i].location.transpose();
      gr.row(i) = gt[i].location.transpose();
      prel.push_back(pred[i].relative);
      grel.push_back(gt[i].relative);
   }
   m.mrpe      = mrpe(pr, gr);
   m.mpjpe     = mpjpe(prel, grel);
   m.pck       = pck3d(prel, grel, opt.pck_threshold);
   m.n_mrpe    = n_mrpe(pr, gr);
   m.n_mrpe_sq = n_mrpe_squared(pr, gr);
   m.n_mpjpe   = n_mpjpe(pred, gt);
   return m;
}

MetricsReport aggregate(const std::vector<SequenceMetrics>& per_sequence, Subset subset)
{
   if(per_sequence.empty()) throw ValidationError("aggregate: no sequences");
   MetricsReport r;
   r.subset    = subset;
   r.sequences = per_sequence;
   auto& m     = r.mean;
   m.seq_id    = "mean";
   int n       = 0;
   for(const auto& s : per_sequence) {
      m.count += s.count;
      if(s.count == 0) continue;
      ++n;
      m.mrpe += s.mrpe;
      m.mpjpe += s.mpjpe;
      m.pck += s.pck;
      m.n_mrpe += s.n_mrpe;
      m.n_mrpe_sq += s.n_mrpe_sq;
      m.n_mpjpe += s.n_mpjpe;
   }
   if(n == 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      m.mrpe = m.mpjpe = m.pck = m.n_mrpe = m.n_mrpe_sq = m.n_mpjpe = nan;
      return r;
   }
   m.mrpe /= n;
   m.mpjpe /= n;
   m.pck /= n;
   m.n_mrpe /= n;
   m.n_mrpe_sq /= n;
   m.n_mpjpe /= n;
   return r;
}

} // namespace posesmooth
