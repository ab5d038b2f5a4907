#include "posesmooth/pipeline.hpp"
#include "posesmooth/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace posesmooth
{
using json = nlohmann::ordered_json;

ExperimentConfig::ExperimentConfig()
{
   synth.num_frames     = 300;
   synth.max_gap_frames = 40;
   tpn.channels         = 64;
   train.epochs         = 8;
}

void ExperimentConfig::validate() const
{
   if(corpus.train < 1) throw ValidationError("config: corpus.train must be >= 1");
   if(corpus.val < 0 || corpus.test < 0)
      throw ValidationError("config: corpus counts must be >= 0");
   synth.validate();
   tpn.validate();
   train.validate();
   refine.validate();
   if(tpn.num_joints != synth.skeleton.num_joints()
      || tpn.root_index != synth.skeleton.root_index)
      throw ValidationError("config: tpn joints do not match the skeleton");
   if(!(one_euro.min_cutoff > 0.0) || !(one_euro.d_cutoff > 0.0) || one_euro.beta < 0.0)
      throw ValidationError("config: invalid 1-Euro parameters");
   if(!(pck_threshold > 0.0)) throw ValidationError("config: pck_threshold must be > 0");
}

// ------------------------------------------------------------------ config json
//
namespace
{
class Section
{
 public:
   Section(const json& j, std::string where)
       : j_(j)
       , where_(std::move(where))
   {
      if(!j_.is_object()) throw ValidationError("config: '" + where_ + "' must be an object");
   }

   template <class T> void operator()(const char* key, T& field)
   {
      seen_.insert(key);
      auto it = j_.find(key);
      if(it == j_.end()) return;
      try {
         field = it->template get<T>();
      } catch(const json::exception& e) {
         throw ValidationError("config: " + where_ + "." + key + ": " + e.what());
      }
   }

   const json* child(const char* key)
   {
      seen_.insert(key);
      auto it = j_.find(key);
      return it == j_.end() ? nullptr : &*it;
   }

   void finish() const
   {
      for(auto it = j_.begin(); it != j_.end(); ++it)
         if(!seen_.count(it.key()))
            throw ValidationError("config: unknown key '" + where_ + "." + it.key() + "'");
   }

 private:
   const json& j_;
   std::string where_;
   std::set<std::string> seen_;
};

template <class F> void section(Section& parent, const char* key, F&& body)
{
   if(const json* c = parent.child(key)) {
      Section s(*c, key);
      body(s);
      s.finish();
   }
}

template <class Visit> void visit_synth(SynthConfig& c, Visit& v)
{
   v("num_persons", c.num_persons);
   v("num_frames", c.num_frames);
   v("fps", c.fps);
   v("motion_seed", c.motion_seed);
   v("noise_px", c.noise_px);
   v("confidence_noise", c.confidence_noise);
   v("occlusion_miss_threshold", c.occlusion_miss_threshold);
   v("limb_lengths", c.limb_lengths);
   v("depth_min", c.depth_min);
   v("depth_max", c.depth_max);
   v("person_scale_min", c.person_scale_min);
   v("person_scale_max", c.person_scale_max);
   v("capsule_radius_frac", c.capsule_radius_frac);
   v("joint_radius_frac", c.joint_radius_frac);
   v("lateral_sweep_frac", c.lateral_sweep_frac);
   v("lateral_freq_min", c.lateral_freq_min);
   v("lateral_freq_max", c.lateral_freq_max);
   v("min_lateral_speed", c.min_lateral_speed);
   v("max_lateral_speed", c.max_lateral_speed);
   v("depth_sweep_mm", c.depth_sweep_mm);
   v("max_root_step_mm", c.max_root_step_mm);
   v("max_gap_frames", c.max_gap_frames);
   v("max_motion_attempts", c.max_motion_attempts);
}

template <class Visit> void visit_camera(CameraIntrinsics& c, Visit& v)
{
   v("fx", c.fx);
   v("fy", c.fy);
   v("cx", c.cx);
   v("cy", c.cy);
}

template <class Visit> void visit_skeleton(Skeleton& s, Visit& v)
{
   v("joints", s.joint_names);
   v("root_index", s.root_index);
   v("edges", s.edges);
}

template <class Visit> void visit_tpn(TpnConfig& c, Visit& v)
{
   v("half_window", c.half_window);
   v("channels", c.channels);
   v("num_blocks", c.num_blocks);
   v("dropout_rate", c.dropout_rate);
   v("dilations", c.dilations);
}

template <class Visit> void visit_train(TrainConfig& c, Visit& v)
{
   v("learning_rate", c.learning_rate);
   v("lr_decay", c.lr_decay);
   v("epochs", c.epochs);
   v("batch_size", c.batch_size);
   v("adam_beta1", c.adam.beta1);
   v("adam_beta2", c.adam.beta2);
   v("adam_eps", c.adam.eps);
   v("aug_scale_min", c.aug_scale_min);
   v("aug_scale_max", c.aug_scale_max);
   v("seed", c.seed);
}

template <class Visit> void visit_refine(RefineConfig& c, Visit& v)
{
   v("tau1", c.tau1);
   v("tau2", c.tau2);
   v("clip_m", c.clip_m);
   v("lambda1", c.lambda1);
   v("lambda2", c.lambda2);
   v("lambda_rel", c.lambda_rel);
   v("learning_rate", c.learning_rate);
   v("iterations", c.iterations);
   v("median_window", c.median_window);
   v("visible_threshold", c.visible_threshold);
   std::string w = to_string(c.pair_weighting);
   v("pair_weighting", w);
   c.pair_weighting = pair_weighting_from_string(w);
}

template <class Visit> void visit_one_euro(OneEuroConfig& c, Visit& v)
{
   v("min_cutoff", c.min_cutoff);
   v("beta", c.beta);
   v("d_cutoff", c.d_cutoff);
}

template <class Visit> void visit_paths(PathsConfig& c, Visit& v)
{
   v("corpus", c.corpus);
   v("model", c.model);
   v("predictions", c.predictions);
   v("reports", c.reports);
}

struct Writer
{
   json j = json::object();
   template <class T> void operator()(const char* key, const T& field) { j[key] = field; }
};

template <class T, class F> json to_obj(T& obj, F visit)
{
   Writer w;
   visit(obj, w);
   return w.j;
}

} // namespace

ExperimentConfig config_from_json(const std::string& text)
{
   json j;
   try {
      j = json::parse(text);
   } catch(const json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
   }
   ExperimentConfig cfg;
   Section root(j, "config");
   root("seed", cfg.seed);
   section(root, "corpus", [&](Section& s) {
      s("train", cfg.corpus.train);
      s("val", cfg.corpus.val);
      s("test", cfg.corpus.test);
   });
   section(root, "synth", [&](Section& s) {
      visit_synth(cfg.synth, s);
      section(s, "camera", [&](Section& c) { visit_camera(cfg.synth.camera, c); });
      section(s, "skeleton", [&](Section& c) { visit_skeleton(cfg.synth.skeleton, c); });
   });
   section(root, "tpn", [&](Section& s) { visit_tpn(cfg.tpn, s); });
   section(root, "train", [&](Section& s) { visit_train(cfg.train, s); });
   section(root, "refine", [&](Section& s) { visit_refine(cfg.refine, s); });
   section(root, "one_euro", [&](Section& s) { visit_one_euro(cfg.one_euro, s); });
   section(root, "metrics", [&](Section& s) { s("pck_threshold", cfg.pck_threshold); });
   section(root, "paths", [&](Section& s) { visit_paths(cfg.paths, s); });
   root.finish();

   cfg.tpn.num_joints = cfg.synth.skeleton.num_joints();
   cfg.tpn.root_index = cfg.synth.skeleton.root_index;
   cfg.validate();
   return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg_in)
{
   ExperimentConfig cfg = cfg_in;
   json j;
   j["seed"]   = cfg.seed;
   j["corpus"] = {{"train", cfg.corpus.train},
                  {"val", cfg.corpus.val},
                  {"test", cfg.corpus.test}};
   json synth  = to_obj(cfg.synth, [](auto& o, auto& w) { visit_synth(o, w); });
   synth["camera"]   = to_obj(cfg.synth.camera, [](auto& o, auto& w) { visit_camera(o, w); });
   synth["skeleton"] = to_obj(cfg.synth.skeleton, [](auto& o, auto& w) { visit_skeleton(o, w); });
   j["synth"]    = std::move(synth);
   j["tpn"]      = to_obj(cfg.tpn, [](auto& o, auto& w) { visit_tpn(o, w); });
   j["train"]    = to_obj(cfg.train, [](auto& o, auto& w) { visit_train(o, w); });
   j["refine"]   = to_obj(cfg.refine, [](auto& o, auto& w) { visit_refine(o, w); });
   j["one_euro"] = to_obj(cfg.one_euro, [](auto& o, auto& w) { visit_one_euro(o, w); });
   j["metrics"]  = {{"pck_threshold", cfg.pck_threshold}};
   j["paths"]    = to_obj(cfg.paths, [](auto& o, auto& w) { visit_paths(o, w); });
   return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg)
{
   std::uint64_t h = 0xcbf29ce484222325ull;
   for(unsigned char c : config_to_json(cfg)) {
      h ^= c;
      h *= 0x100000001b3ull;
   }
   char buf[17];
   std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
   return buf;
}

// ------------------------------------------------------------------ corpus
//
namespace
{
std::string seq_name(const std::string& split, int i)
{
   char buf[32];
   std::snprintf(buf, sizeof buf, "%s_%03d", split.c_str(), i);
   return buf;
}

const char* k_splits[] = {"train", "val", "test"};

std::vector<Sequence>& split_of(Corpus& c, int s)
{
   return s == 0 ? c.train : s == 1 ? c.val : c.test;
}

const std::vector<Sequence>& split_of(const Corpus& c, int s)
{
   return s == 0 ? c.train : s == 1 ? c.val : c.test;
}

int split_count(const CorpusCounts& c, int s)
{
   return s == 0 ? c.train : s == 1 ? c.val : c.test;
}

} // namespace

Corpus generate_corpus(const ExperimentConfig& cfg)
{
   cfg.validate();
   Corpus out;
   for(int s = 0; s < 3; ++s)
      for(int i = 0; i < split_count(cfg.corpus, s); ++i) {
         const auto id = seq_name(k_splits[s], i);
         split_of(out, s).push_back(
             generate_sequence(cfg.synth, derive_seed(cfg.seed, id), id));
      }
   return out;
}

void write_corpus(const std::filesystem::path& dir,
                  const Corpus& corpus,
                  const ExperimentConfig& cfg)
{
   json seqs = json::array();
   for(int s = 0; s < 3; ++s)
      for(const auto& seq : split_of(corpus, s)) {
         const auto rel = std::filesystem::path(k_splits[s]) / (seq.seq_id + ".jsonl");
         io::save_sequence(dir / rel, seq);
         seqs.push_back({{"split", k_splits[s]},
                         {"seq_id", seq.seq_id},
                         {"file", rel.generic_string()},
                         {"seed", derive_seed(cfg.seed, seq.seq_id)}});
      }
   json manifest;
   manifest["seed"]        = cfg.seed;
   manifest["config_hash"] = config_hash(cfg);
   manifest["sequences"]   = std::move(seqs);
   manifest["config"]      = json::parse(config_to_json(cfg));
   io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir)
{
   Corpus c;
   for(int s = 0; s < 3; ++s) {
      const auto sub = dir / k_splits[s];
      if(std::filesystem::is_directory(sub)) split_of(c, s) = io::load_corpus_dir(sub);
   }
   if(c.train.empty() && c.val.empty() && c.test.empty())
      throw ValidationError("no corpus found in " + dir.string());
   return c;
}

// ------------------------------------------------------------------ stages
//
TrainResult train_model(const Corpus& corpus,
                        const ExperimentConfig& cfg,
                        const EpochCallback& on_epoch)
{
   if(corpus.train.empty()) throw ValidationError("train: the corpus has no training sequences");
   TpnConfig tpn  = cfg.tpn;
   tpn.num_joints = corpus.train.front().skeleton.num_joints();
   tpn.root_index = corpus.train.front().skeleton.root_index;
   TrainConfig train = cfg.train;
   train.seed = derive_seed(cfg.seed, "train/" + std::to_string(cfg.train.seed));
   return train_tpn(corpus.train, corpus.val, tpn, train, on_epoch);
}

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log)
{
   os << "epoch,learning_rate,train_loss,val_loss\n";
   for(const auto& e : log)
      os << e.epoch << ',' << io::format_double(e.learning_rate) << ','
         << io::format_double(e.train_loss) << ',' << io::format_double(e.val_loss) << '\n';
}

std::vector<io::TrackPrediction> predict_sequences(const std::vector<Sequence>& seqs,
                                                   const TpnModel& model)
{
   std::vector<io::TrackPrediction> out;
   for(const auto& seq : seqs) {
      if(seq.skeleton.num_joints() != model.config.num_joints
         || seq.skeleton.root_index != model.config.root_index)
         throw ValidationError("predict: sequence " + seq.seq_id
                               + " does not match the model's joint set");
      for(const auto& tr : seq.tracks)
         out.push_back({seq.seq_id, tr.person_id, predict_track(tr, seq.camera, model)});
   }
   return out;
}

const char* to_string(Method m)
{
   switch(m) {
      case Method::tpn: return "tpn";
      case Method::interpolate: return "interpolate";
      case Method::one_euro: return "one-euro";
      case Method::refine: return "refine";
   }
   return "tpn";
}

Method method_from_string(const std::string& s)
{
   if(s == "tpn") return Method::tpn;
   if(s == "interpolate") return Method::interpolate;
   if(s == "one-euro") return Method::one_euro;
   if(s == "refine") return Method::refine;
   throw ValidationError("unknown method '" + s + "'");
}

namespace
{
const Sequence& find_sequence(const std::vector<Sequence>& seqs, const std::string& id)
{
   for(const auto& s : seqs)
      if(s.seq_id == id) return s;
   throw ValidationError("no sequence '" + id + "' in the corpus");
}

const PersonTrack& find_track(const Sequence& seq, const std::string& person)
{
   for(const auto& t : seq.tracks)
      if(t.person_id == person) return t;
   throw ValidationError("no person '" + person + "' in sequence " + seq.seq_id);
}

} // namespace

PostprocessResult postprocess(const std::vector<io::TrackPrediction>& raw,
                              const std::vector<Sequence>& seqs,
                              Method method,
                              const NormStats& norm,
                              const ExperimentConfig& cfg)
{
   cfg.refine.validate();
   PostprocessResult out;
   for(const auto& p : raw) {
      const auto& seq  = find_sequence(seqs, p.seq_id);
      const auto& tr   = find_track(seq, p.person_id);
      const int root   = seq.skeleton.root_index;
      const auto& traj = p.trajectory;
      if(traj.num_frames() != seq.num_frames)
         throw ValidationError("postprocess: frame count mismatch for " + p.seq_id + "/"
                               + p.person_id);
      const bool any = std::find(traj.had_detection.begin(), traj.had_detection.end(), true)
                       != traj.had_detection.end();
      io::TrackPrediction r{p.seq_id, p.person_id, traj};
      switch(method) {
         case Method::tpn: break;
         case Method::interpolate:
            if(any) r.trajectory = interpolate_track(traj, root);
            break;
         case Method::one_euro:
            if(any) r.trajectory = one_euro_track(traj, seq.fps, root, cfg.one_euro);
            break;
         case Method::refine: {
            const auto v   = visibility_scores(tr, cfg.refine.median_window);
            auto res       = refine_track(traj, v, cfg.refine, norm, root);
            r.trajectory   = res.refined;
            res.refined    = {};
            out.energy.push_back({p.seq_id, p.person_id, std::move(res)});
            break;
         }
      }
      out.predictions.push_back(std::move(r));
   }
   return out;
}

std::vector<MetricsReport> evaluate_predictions(const std::vector<io::TrackPrediction>& preds,
                                                const std::vector<Sequence>& seqs,
                                                const ExperimentConfig& cfg)
{
   if(seqs.empty()) throw ValidationError("evaluate: no sequences");
   std::map<std::pair<std::string, std::string>, const io::TrackPrediction*> index;
   for(const auto& p : preds) {
      if(!index.emplace(std::pair{p.seq_id, p.person_id}, &p).second)
         throw ValidationError("evaluate: duplicate prediction for " + p.seq_id + "/"
                               + p.person_id);
      find_track(find_sequence(seqs, p.seq_id), p.person_id);
   }

   std::vector<std::vector<EvalTrack>> per_seq;
   for(const auto& seq : seqs) {
      std::vector<EvalTrack> tracks;
      for(const auto& tr : seq.tracks) {
         auto it = index.find({seq.seq_id, tr.person_id});
         if(it == index.end())
            throw ValidationError("evaluate: missing prediction for " + seq.seq_id + "/"
                                  + tr.person_id);
         if(it->second->trajectory.num_frames() != seq.num_frames)
            throw ValidationError("evaluate: misaligned prediction for " + seq.seq_id + "/"
                                  + tr.person_id);
         tracks.push_back({it->second->trajectory, tr.gt,
                           visibility_scores(tr, cfg.refine.median_window)});
      }
      per_seq.push_back(std::move(tracks));
   }

   std::vector<MetricsReport> out;
   for(Subset s : {Subset::all, Subset::visible, Subset::occluded}) {
      std::vector<SequenceMetrics> ms;
      for(size_t i = 0; i < seqs.size(); ++i)
         ms.push_back(evaluate_sequence(seqs[i].seq_id, per_seq[i], s, cfg.metric_options()));
      out.push_back(aggregate(ms, s));
   }
   return out;
}

// ------------------------------------------------------------------ plot
//
namespace
{
struct Panel
{
   double x0, y0, w, h;
   double vmin, vmax;
   int frames;

   double px(int t) const { return x0 + w * (frames > 1 ? double(t) / (frames - 1) : 0.5); }
   double py(double v) const { return y0 + h * (1.0 - (v - vmin) / (vmax - vmin)); }
};

std::string fmt(double x)
{
   char buf[32];
   std::snprintf(buf, sizeof buf, "%.2f", x);
   return buf;
}

std::string path_d(const Panel& p, const std::vector<double>& v)
{
   std::string d;
   for(size_t t = 0; t < v.size(); ++t)
      d += (t ? " L" : "M") + fmt(p.px(int(t))) + "," + fmt(p.py(v[t]));
   return d;
}

const char* k_colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};

} // namespace

std::string plot_svg(const Sequence& seq,
                     const std::string& person_id,
                     const std::string& joint,
                     const std::vector<PlotSeries>& series,
                     const ExperimentConfig& cfg)
{
   const auto& tr  = find_track(seq, person_id);
   const auto& names = seq.skeleton.joint_names;
   auto jt           = std::find(names.begin(), names.end(), joint);
   if(jt == names.end()) throw ValidationError("unknown joint '" + joint + "'");
   const int j = int(jt - names.begin());
   const int T = seq.num_frames;

   auto coord = [&](const Pose3D& p, int axis) {
      return p.location[axis] + p.relative(j, axis);
   };

   struct Line
   {
      std::string label;
      std::vector<double> y, z;
      const char* color;
   };
   std::vector<Line> lines;
   {
      Line g{"ground truth", {}, {}, "#000000"};
      for(int t = 0; t < T; ++t) {
         if(!tr.gt[t]) throw ValidationError("plot: ground truth missing on frame "
                                             + std::to_string(t));
         g.y.push_back(coord(*tr.gt[t], 1));
         g.z.push_back(coord(*tr.gt[t], 2));
      }
      lines.push_back(std::move(g));
   }
   for(size_t i = 0; i < series.size(); ++i) {
      const auto* p = series[i].prediction;
      if(!p || p->seq_id != seq.seq_id || p->person_id != person_id
         || p->trajectory.num_frames() != T)
         throw ValidationError("plot: prediction does not match " + seq.seq_id + "/"
                               + person_id);
      Line l{series[i].label, {}, {}, k_colors[i % 5]};
      for(int t = 0; t < T; ++t) {
         l.y.push_back(coord(p->trajectory.poses[t], 1));
         l.z.push_back(coord(p->trajectory.poses[t], 2));
      }
      lines.push_back(std::move(l));
   }

   const auto v = visibility_scores(tr, cfg.refine.median_window);
   const auto occluded = subset_filter(v, Subset::occluded, cfg.refine.visible_threshold);

   const double W = 900, PH = 260, M = 60;
   std::ostringstream os;
   os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << 2 * PH + 2 * M + 40 << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
   os << "<text x=\"" << M << "\" y=\"20\">" << seq.seq_id << " / " << person_id << " / "
      << joint << "</text>\n";

   const char* axis_names[] = {"y (mm)", "z (mm)"};
   for(int a = 0; a < 2; ++a) {
      double lo = 1e300, hi = -1e300;
      for(const auto& l : lines)
         for(double x : (a == 0 ? l.y : l.z)) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
         }
      if(!(hi > lo)) {
         lo -= 1.0;
         hi += 1.0;
      }
      const double pad = 0.05 * (hi - lo);
      Panel p{M, M + a * (PH + M), W - 2 * M, PH, lo - pad, hi + pad, T};

      os << "<g class=\"panel\" id=\"panel-" << (a == 0 ? "y" : "z") << "\">\n";
      for(int t = 0; t < T;) {
         if(!occluded[t]) {
            ++t;
            continue;
         }
         int e = t;
         while(e + 1 < T && occluded[e + 1]) ++e;
         const double half = T > 1 ? 0.5 * p.w / (T - 1) : 0.5 * p.w;
         const double x0 = std::max(p.x0, p.px(t) - half);
         const double x1 = std::min(p.x0 + p.w, p.px(e) + half);
         os << "<rect class=\"occluded\" x=\"" << fmt(x0) << "\" y=\"" << fmt(p.y0)
            << "\" width=\"" << fmt(x1 - x0) << "\" height=\"" << fmt(p.h)
            << "\" fill=\"#cccccc\" fill-opacity=\"0.6\"/>\n";
         t = e + 1;
      }
      os << "<rect x=\"" << fmt(p.x0) << "\" y=\"" << fmt(p.y0) << "\" width=\"" << fmt(p.w)
         << "\" height=\"" << fmt(p.h) << "\" fill=\"none\" stroke=\"#444444\"/>\n";
      os << "<text x=\"" << fmt(p.x0 - 50) << "\" y=\"" << fmt(p.y0 + p.h / 2) << "\">"
         << axis_names[a] << "</text>\n";
      os << "<text x=\"" << fmt(p.x0) << "\" y=\"" << fmt(p.y0 + p.h + 15) << "\">0</text>\n";
      os << "<text x=\"" << fmt(p.x0 + p.w - 20) << "\" y=\"" << fmt(p.y0 + p.h + 15) << "\">"
         << T - 1 << "</text>\n";
      for(const auto& l : lines)
         os << "<path d=\"" << path_d(p, a == 0 ? l.y : l.z) << "\" fill=\"none\" stroke=\""
            << l.color << "\" stroke-width=\"1.2\"><title>" << l.label << "</title></path>\n";
      os << "</g>\n";
   }
   double lx = M;
   const double ly = 2 * PH + 2 * M + 25;
   for(const auto& l : lines) {
      os << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(ly - 9) << "\" width=\"10\" height=\"10\""
         << " fill=\"" << l.color << "\"/>\n";
      os << "<text x=\"" << fmt(lx + 14) << "\" y=\"" << fmt(ly) << "\">" << l.label
         << "</text>\n";
      lx += 20 + 7.0 * double(l.label.size()) + 20;
   }
   os << "</svg>\n";
   return os.str();
}

} // namespace posesmooth
