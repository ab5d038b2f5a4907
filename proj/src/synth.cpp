#include "posesmooth/synth.hpp"
#include "posesmooth/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace posesmooth
{
namespace
{
constexpr double k_pi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x)
{
   x += 0x9e3779b97f4a7c15ull;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
   return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
   return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double std_normal(std::mt19937_64& rng)
{
   return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// ------------------------------------------------------------ sunflower disc
//
constexpr int k_disc_samples = 512;

const std::array<Eigen::Vector2d, k_disc_samples>& unit_disc_points()
{
   static const auto pts = [] {
      std::array<Eigen::Vector2d, k_disc_samples> p;
      const double golden = k_pi * (3.0 - std::sqrt(5.0));
      for(int i = 0; i < k_disc_samples; ++i) {
         const double r  = std::sqrt((i + 0.5) / k_disc_samples);
         const double th = i * golden;
         p[i]            = {r * std::cos(th), r * std::sin(th)};
      }
      return p;
   }();
   return pts;
}

double point_segment_distance(const Eigen::Vector2d& p,
                              const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b)
{
   const Eigen::Vector2d ab = b - a;
   const double len2        = ab.squaredNorm();
   double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
   s        = std::clamp(s, 0.0, 1.0);
   return (a + s * ab - p).norm();
}

// ------------------------------------------------------------ motion model
//
struct AxisPath
{
   double base  = 0.0;
   double drift = 0.0; // mm/s, centred on the middle of the sequence
   std::vector<std::array<double, 3>> waves; // amplitude, frequency Hz, phase

   double at(double sec, double mid_sec) const
   {
      double v = base + drift * (sec - mid_sec);
      for(const auto& w : waves)
         v += w[0] * std::sin(2.0 * k_pi * w[1] * sec + w[2]);
      return v;
   }
};

AxisPath random_axis(std::mt19937_64& rng,
                     double base,
                     double amplitude,
                     double f_lo,
                     double f_hi,
                     double drift)
{
   AxisPath p;
   p.base     = base;
   p.drift    = drift;
   const int K = std::uniform_int_distribution<int>(1, 5)(rng);
   std::vector<double> w(K);
   double sum = 0.0;
   for(auto& x : w) sum += (x = uniform(rng, 0.2, 1.0));
   for(int k = 0; k < K; ++k) {
      const double f = f_lo * std::pow(f_hi / f_lo, uniform(rng, 0.0, 1.0));
      p.waves.push_back({amplitude * w[k] / sum, f, uniform(rng, 0.0, 2 * k_pi)});
   }
   return p;
}

// Scales the waves so that |d/dt| <= max_speed everywhere.
void cap_speed(AxisPath& p, double max_speed)
{
   double bound = std::abs(p.drift);
   for(const auto& w : p.waves) bound += 2.0 * k_pi * w[1] * std::abs(w[0]);
   if(bound <= max_speed || p.waves.empty()) return;
   const double room = std::max(0.0, max_speed - std::abs(p.drift));
   const double f    = room / (bound - std::abs(p.drift));
   for(auto& w : p.waves) w[0] *= f;
}

struct PersonMotion
{
   double scale = 1.0;
   AxisPath x, y, z;
   double yaw0 = 0.0, yaw_amp = 0.0, yaw_freq = 0.0, yaw_phase = 0.0;
   double gait_freq = 1.0, gait_phase = 0.0;
   double leg_amp = 0.3, arm_amp = 0.3, knee_amp = 0.4, elbow_amp = 0.5;
   double lean = 0.0;
   // generic skeletons: per-edge rest direction and wobble
   std::vector<Eigen::Vector3d> rest_dirs;
   std::vector<std::array<double, 3>> wobble; // amplitude, frequency, phase
};

Eigen::Vector3d rotate_yaw(const Eigen::Vector3d& v, double yaw)
{
   const double c = std::cos(yaw), s = std::sin(yaw);
   return {c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z()};
}

// Unit bone directions in the body frame: x = left, y = down, z = forward.
std::vector<Eigen::Vector3d> gait_directions(const PersonMotion& m, double sec)
{
   const Eigen::Vector3d L(1, 0, 0), D(0, 1, 0), F(0, 0, 1);
   auto swing = [&](double a) -> Eigen::Vector3d {
      return D * std::cos(a) + F * std::sin(a);
   };
   const double ph     = 2.0 * k_pi * m.gait_freq * sec + m.gait_phase;
   const double s_r    = m.leg_amp * std::sin(ph);
   const double s_l    = -s_r;
   const double knee_r = m.knee_amp * 0.5 * (1.0 + std::sin(ph + 0.5));
   const double knee_l = m.knee_amp * 0.5 * (1.0 + std::sin(ph + 0.5 + k_pi));
   const double a_l    = m.arm_amp * std::sin(ph);
   const double a_r    = -a_l;
   const double elb_l  = m.elbow_amp * 0.5 * (1.0 + std::sin(ph + 1.0));
   const double elb_r  = m.elbow_amp * 0.5 * (1.0 + std::sin(ph + 1.0 + k_pi));
   const double lean   = m.lean + 0.05 * std::sin(ph * 0.5);
   const Eigen::Vector3d up = -D * std::cos(lean) + F * std::sin(lean);
   const Eigen::Vector3d head
       = -D * std::cos(lean + 0.15) + F * std::sin(lean + 0.15);

   return {-L,          swing(s_r), swing(s_r - knee_r), //
           L,           swing(s_l), swing(s_l - knee_l), //
           up,          up,         up,
           head,                                         //
           L,           swing(a_l), swing(a_l + elb_l),  //
           -L,          swing(a_r), swing(a_r + elb_r)};
}

std::vector<Eigen::Vector3d>
generic_directions(const PersonMotion& m, double sec)
{
   std::vector<Eigen::Vector3d> out(m.rest_dirs.size());
   for(size_t e = 0; e < out.size(); ++e) {
      const auto& w = m.wobble[e];
      const double a = w[0] * std::sin(2.0 * k_pi * w[1] * sec + w[2]);
      Eigen::Vector3d d = m.rest_dirs[e];
      d += a * Eigen::Vector3d(d.z(), 0.3, -d.x());
      out[e] = d.normalized();
   }
   return out;
}

double standing_hip_height(const Skeleton& sk, const std::vector<double>& limbs)
{
   if(sk == Skeleton::default17()) return limbs[1] + limbs[2];
   return 900.0;
}

} // namespace

// ------------------------------------------------------------------ config
//
void SynthConfig::validate() const
{
   skeleton.validate();
   camera.validate();
   if(num_persons < 1) throw ValidationError("num_persons must be >= 1");
   if(num_frames < 1) throw ValidationError("num_frames must be >= 1");
   if(!(fps > 0.0)) throw ValidationError("fps must be positive");
   if(!(noise_px >= 0.0)) throw ValidationError("noise_px must be >= 0");
   if(!(confidence_noise >= 0.0))
      throw ValidationError("confidence_noise must be >= 0");
   if(!(occlusion_miss_threshold >= 0.0 && occlusion_miss_threshold <= 1.0))
      throw ValidationError("occlusion_miss_threshold must be in [0,1]");
   if(!limb_lengths.empty()
      && limb_lengths.size() != skeleton.edges.size())
      throw ValidationError("limb_lengths must have one entry per edge");
   for(double l : limb_lengths)
      if(!(l > 0.0)) throw ValidationError("limb lengths must be positive");
   if(!(depth_max >= depth_min))
      throw ValidationError("depth_max must be >= depth_min");
   if(!(depth_min - depth_sweep_mm > 500.0))
      throw ValidationError(
          "depth range would place people behind or at the camera");
   if(!(person_scale_min > 0.0 && person_scale_max >= person_scale_min))
      throw ValidationError("invalid person scale range");
   if(!(min_lateral_speed > 0.0 && max_lateral_speed >= min_lateral_speed))
      throw ValidationError("invalid lateral speed range");
   if(!(lateral_freq_min > 0.0 && lateral_freq_max >= lateral_freq_min))
      throw ValidationError("invalid lateral frequency range");
   if(!(capsule_radius_frac >= 0.0 && joint_radius_frac > 0.0))
      throw ValidationError("invalid occlusion radii");
}

std::vector<double> SynthConfig::effective_limb_lengths() const
{
   if(!limb_lengths.empty()) return limb_lengths;
   if(skeleton == Skeleton::default17())
      return {130, 440, 430, 130, 440, 430, 230, 250,
              120, 110, 170, 290, 260, 170, 290, 260};
   return std::vector<double>(skeleton.edges.size(), 250.0);
}

// ------------------------------------------------------------------ occlusion
//
double disc_capsule_coverage(const Eigen::Vector2d& centre,
                             double disc_radius,
                             const Eigen::Vector2d& a,
                             const Eigen::Vector2d& b,
                             double capsule_radius)
{
   const double d = point_segment_distance(centre, a, b);
   if(d > capsule_radius + disc_radius) return 0.0;
   if(d + disc_radius <= capsule_radius) return 1.0;
   int inside = 0;
   for(const auto& u : unit_disc_points())
      if(point_segment_distance(centre + disc_radius * u, a, b)
         <= capsule_radius)
         ++inside;
   return double(inside) / k_disc_samples;
}

std::vector<Eigen::VectorXd>
occlusion_for_frame(const std::vector<Joints3>& abs_poses,
                    const Skeleton& skeleton,
                    const CameraIntrinsics& cam,
                    const OcclusionGeometry& geo)
{
   const int P = int(abs_poses.size());
   const int J = skeleton.num_joints();
   std::vector<Joints2> pix(P);
   std::vector<double> height(P), root_z(P);
   for(int p = 0; p < P; ++p) {
      pix[p]    = project(abs_poses[p], cam).coords;
      height[p] = pix[p].col(1).maxCoeff() - pix[p].col(1).minCoeff();
      root_z[p] = abs_poses[p](skeleton.root_index, 2);
   }

   std::vector<Eigen::VectorXd> occ(P, Eigen::VectorXd::Zero(J));
   for(int p = 0; p < P; ++p) {
      const double r_joint = geo.joint_radius_frac * height[p];
      for(int q = 0; q < P; ++q) {
         if(q == p || !(root_z[q] < root_z[p])) continue;
         const double r_caps = geo.capsule_radius_frac * height[q];
         for(int j = 0; j < J; ++j) {
            const Eigen::Vector2d c = pix[p].row(j).transpose();
            for(const auto& [ea, eb] : skeleton.edges) {
               if(occ[p](j) >= 1.0) break;
               const double f = disc_capsule_coverage(
                   c, r_joint, pix[q].row(ea).transpose(),
                   pix[q].row(eb).transpose(), r_caps);
               occ[p](j) = std::max(occ[p](j), f);
            }
         }
      }
      occ[p] = occ[p].cwiseMax(0.0).cwiseMin(1.0);
   }
   return occ;
}

OcclusionState compute_occlusion(const std::vector<std::vector<Pose3D>>& gt,
                                 const Skeleton& skeleton,
                                 const CameraIntrinsics& cam,
                                 const OcclusionGeometry& geo)
{
   OcclusionState st;
   if(gt.empty()) return st;
   const size_t T = gt.front().size();
   for(const auto& g : gt)
      if(g.size() != T)
         throw ValidationError("ground-truth tracks differ in length");
   st.fraction.resize(T);
   std::vector<Joints3> abs(gt.size());
   for(size_t t = 0; t < T; ++t) {
      for(size_t p = 0; p < gt.size(); ++p) abs[p] = absolute(gt[p][t]);
      st.fraction[t] = occlusion_for_frame(abs, skeleton, cam, geo);
   }
   return st;
}

// ------------------------------------------------------------------ detector
//
Pose2D simulate_detector(const Pose2D& gt2d,
                         const Eigen::VectorXd& occlusion,
                         const DetectorModel& model,
                         std::mt19937_64& rng)
{
   const int J = gt2d.num_joints();
   if(occlusion.size() != J)
      throw ValidationError("occlusion vector size does not match joints");
   Pose2D out     = gt2d;
   out.confidence = Eigen::VectorXd(J);
   for(int j = 0; j < J; ++j) {
      const double o     = std::clamp(occlusion(j), 0.0, 1.0);
      const double sigma = model.noise_px * (1.0 + 4.0 * o);
      out.coords(j, 0) += sigma * std_normal(rng);
      out.coords(j, 1) += sigma * std_normal(rng);
      out.confidence(j) = std::clamp(
          1.0 - o + model.confidence_noise * std_normal(rng), 0.0, 1.0);
   }
   out.detected = !(occlusion.mean() > model.occlusion_miss_threshold);
   if(!out.detected) out.confidence.setZero();
   return out;
}

// ------------------------------------------------------------------ motion
//
std::vector<std::vector<Pose3D>> sample_motion(const SynthConfig& cfg,
                                               std::mt19937_64& rng)
{
   cfg.validate();
   const auto& sk        = cfg.skeleton;
   const bool gait       = sk == Skeleton::default17();
   const auto limbs      = cfg.effective_limb_lengths();
   const double hip_h    = standing_hip_height(sk, limbs);
   const double ground_y = 1500.0; // camera 1.5 m above a level floor
   const double duration = cfg.num_frames / cfg.fps;
   const double mid      = 0.5 * duration;
   const double tan_x    = cfg.camera.cx / cfg.camera.fx;

   std::vector<PersonMotion> people(cfg.num_persons);
   for(auto& m : people) {
      m.scale = uniform(rng, cfg.person_scale_min, cfg.person_scale_max);
      const double z_lo = cfg.depth_min + 0.5 * cfg.depth_sweep_mm;
      const double z_hi = std::max(z_lo, cfg.depth_max - 0.5 * cfg.depth_sweep_mm);
      const double z0   = uniform(rng, z_lo, z_hi);
      const double lat  = z0 * tan_x * cfg.lateral_sweep_frac;
      const double x0   = uniform(rng, -0.3 * lat, 0.3 * lat);
      const double dx   = uniform(rng, -0.3, 0.3) * lat / std::max(duration, 1.0);
      m.x = random_axis(rng, x0, uniform(rng, 0.4, 0.7) * lat, cfg.lateral_freq_min,
                        cfg.lateral_freq_max, dx);
      const double speed = uniform(rng, cfg.min_lateral_speed, cfg.max_lateral_speed);
      cap_speed(m.x, speed);
      // slow walkers swing their limbs less
      const double activity = std::max(0.2, speed / cfg.max_lateral_speed);
      m.z = random_axis(rng, z0, 0.5 * cfg.depth_sweep_mm * uniform(rng, 0.5, 1.0),
                        0.02, 0.1, 0.0);
      m.y = random_axis(rng, ground_y - hip_h * m.scale, 25.0, 0.1, 0.5, 0.0);

      m.yaw0       = uniform(rng, -k_pi, k_pi);
      m.yaw_amp    = uniform(rng, 0.0, 0.6);
      m.yaw_freq   = uniform(rng, 0.02, 0.1);
      m.yaw_phase  = uniform(rng, 0.0, 2 * k_pi);
      m.gait_freq  = uniform(rng, 0.5, 1.1);
      m.gait_phase = uniform(rng, 0.0, 2 * k_pi);
      m.leg_amp    = activity * uniform(rng, 0.15, 0.5);
      m.arm_amp    = activity * uniform(rng, 0.1, 0.5);
      m.knee_amp   = activity * uniform(rng, 0.1, 0.7);
      m.elbow_amp  = activity * uniform(rng, 0.1, 0.9);
      m.lean       = uniform(rng, -0.05, 0.2);
      if(!gait) {
         for(size_t e = 0; e < sk.edges.size(); ++e) {
            Eigen::Vector3d d(std_normal(rng), std_normal(rng), std_normal(rng));
            m.rest_dirs.push_back(d.normalized());
            m.wobble.push_back({uniform(rng, 0.0, 0.4), uniform(rng, 0.2, 1.0),
                                uniform(rng, 0.0, 2 * k_pi)});
         }
      }
   }
   // ids follow mean depth, nearest first
   std::stable_sort(people.begin(), people.end(),
                    [](const auto& a, const auto& b) {
                       return a.z.base < b.z.base;
                    });

   const int J = sk.num_joints();
   std::vector<std::vector<Pose3D>> gt(cfg.num_persons);
   for(int p = 0; p < cfg.num_persons; ++p) {
      const auto& m = people[p];
      gt[p].reserve(cfg.num_frames);
      for(int t = 0; t < cfg.num_frames; ++t) {
         const double sec = t / cfg.fps;
         const Eigen::Vector3d root(m.x.at(sec, mid), m.y.at(sec, mid),
                                    m.z.at(sec, mid));
         const double yaw
             = m.yaw0
               + m.yaw_amp * std::sin(2 * k_pi * m.yaw_freq * sec + m.yaw_phase);
         const auto dirs = gait ? gait_directions(m, sec)
                                : generic_directions(m, sec);
         Joints3 abs(J, 3);
         abs.row(sk.root_index) = root.transpose();
         for(size_t e = 0; e < sk.edges.size(); ++e) {
            const auto [a, b] = sk.edges[e];
            abs.row(b) = abs.row(a)
                         + m.scale * limbs[e]
                               * rotate_yaw(dirs[e], yaw).transpose();
         }
         if(!(abs.col(2).minCoeff() > 0.0))
            throw ValidationError(
                "camera/depth configuration places a joint behind the camera");
         gt[p].push_back(split_absolute(abs, sk.root_index));
      }
   }
   return gt;
}

Sequence render_sequence(const SynthConfig& cfg,
                         const std::string& seq_id,
                         const std::vector<std::vector<Pose3D>>& gt,
                         std::mt19937_64& rng)
{
   const auto occ = compute_occlusion(
       gt, cfg.skeleton, cfg.camera,
       {cfg.capsule_radius_frac, cfg.joint_radius_frac});
   return render_sequence(cfg, seq_id, gt, occ, rng);
}

Sequence render_sequence(const SynthConfig& cfg,
                         const std::string& seq_id,
                         const std::vector<std::vector<Pose3D>>& gt,
                         const OcclusionState& occ,
                         std::mt19937_64& rng)
{
   cfg.validate();
   Sequence seq;
   seq.seq_id     = seq_id;
   seq.num_frames = cfg.num_frames;
   seq.fps        = cfg.fps;
   seq.camera     = cfg.camera;
   seq.skeleton   = cfg.skeleton;
   if(occ.num_frames() != cfg.num_frames)
      throw ValidationError("occlusion length differs from num_frames");
   for(const auto& g : gt)
      if(int(g.size()) != cfg.num_frames)
         throw ValidationError("ground truth length differs from num_frames");

   const DetectorModel det{cfg.noise_px, cfg.confidence_noise,
                           cfg.occlusion_miss_threshold};

   seq.tracks.resize(gt.size());
   for(size_t p = 0; p < gt.size(); ++p) {
      auto& tr     = seq.tracks[p];
      tr.person_id = "p" + std::to_string(p);
      tr.detections.resize(cfg.num_frames);
      tr.gt.assign(gt[p].begin(), gt[p].end());
   }
   for(int t = 0; t < cfg.num_frames; ++t) {
      for(size_t p = 0; p < gt.size(); ++p) {
         const auto gt2d = project(absolute(gt[p][t]), cfg.camera);
         auto d          = simulate_detector(gt2d, occ.fraction[t][p], det, rng);
         if(d.detected) seq.tracks[p].detections[t] = std::move(d);
      }
   }
   return seq;
}

Sequence generate_sequence(const SynthConfig& cfg,
                           std::uint64_t seed,
                           const std::string& seq_id)
{
   std::mt19937_64 motion_rng(splitmix64(seed ^ splitmix64(cfg.motion_seed)));
   std::mt19937_64 detector_rng(splitmix64(seed + 0x5bd1e995ull));
   const OcclusionGeometry geo{cfg.capsule_radius_frac, cfg.joint_radius_frac};

   std::vector<std::vector<Pose3D>> best_gt;
   OcclusionState best_occ;
   int best_run = -1;
   const int attempts = cfg.max_gap_frames > 0 ? std::max(1, cfg.max_motion_attempts) : 1;
   for(int a = 0; a < attempts; ++a) {
      auto gt = sample_motion(cfg, motion_rng);
      for(const auto& track : gt)
         for(size_t t = 1; t < track.size(); ++t)
            if((track[t].location - track[t - 1].location).norm()
               >= cfg.max_root_step_mm)
               throw ValidationError(
                   "motion exceeds max_root_step_mm; lower the sweep or raise fps");
      auto occ      = compute_occlusion(gt, cfg.skeleton, cfg.camera, geo);
      const int run = longest_miss_run(occ, cfg.occlusion_miss_threshold);
      if(best_run < 0 || run < best_run) {
         best_run = run;
         best_gt  = std::move(gt);
         best_occ = std::move(occ);
      }
      if(cfg.max_gap_frames <= 0 || best_run <= cfg.max_gap_frames) break;
   }
   return render_sequence(cfg, seq_id, best_gt, best_occ, detector_rng);
}

int longest_miss_run(const OcclusionState& occ, double threshold)
{
   int best = 0;
   if(occ.fraction.empty()) return 0;
   const size_t P = occ.fraction.front().size();
   for(size_t p = 0; p < P; ++p) {
      int run = 0;
      for(const auto& frame : occ.fraction) {
         run  = frame[p].mean() > threshold ? run + 1 : 0;
         best = std::max(best, run);
      }
   }
   return best;
}

std::uint64_t derive_seed(std::uint64_t corpus_seed, const std::string& key)
{
   std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
   for(unsigned char c : key) {
      h ^= c;
      h *= 0x100000001b3ull;
   }
   return splitmix64(corpus_seed ^ splitmix64(h));
}

std::vector<int> gap_lengths(const PersonTrack& track)
{
   std::vector<int> gaps;
   int run = 0;
   for(const auto& d : track.detections) {
      if(!d) {
         ++run;
      } else if(run > 0) {
         gaps.push_back(run);
         run = 0;
      }
   }
   if(run > 0) gaps.push_back(run);
   return gaps;
}

} // namespace posesmooth
