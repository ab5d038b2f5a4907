#include "posesmooth/io.hpp"
#include "posesmooth/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace posesmooth::io
{
using json = nlohmann::ordered_json;

std::string format_double(double x)
{
   if(std::isnan(x)) return "nan";
   if(std::isinf(x)) return x > 0 ? "inf" : "-inf";
   char buf[64];
   auto res = std::to_chars(buf, buf + sizeof buf, x);
   return std::string(buf, res.ptr);
}

namespace
{
[[noreturn]] void fail(const std::string& origin, const std::string& msg)
{
   throw ValidationError(origin + ": " + msg);
}

json parse_line(const std::string& line, const std::string& origin, long lineno)
{
   try {
      return json::parse(line);
   } catch(const json::exception& e) {
      fail(origin, "line " + std::to_string(lineno) + ": " + e.what());
   }
}

template <class T> T get(const json& j, const char* key, const std::string& origin)
{
   auto it = j.find(key);
   if(it == j.end()) fail(origin, std::string("missing field '") + key + "'");
   try {
      return it->get<T>();
   } catch(const json::exception& e) {
      fail(origin, std::string("field '") + key + "': " + e.what());
   }
}

json vec_json(const Eigen::VectorXd& v)
{
   json a = json::array();
   for(Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
   return a;
}

Eigen::VectorXd vec_from(const json& j, const std::string& origin)
{
   if(!j.is_array()) fail(origin, "expected a number array");
   Eigen::VectorXd v(j.size());
   for(size_t i = 0; i < j.size(); ++i) {
      if(!j[i].is_number()) fail(origin, "expected a number");
      v[i] = j[i].get<double>();
   }
   return v;
}

json rows_json(const Eigen::MatrixXd& m)
{
   json a = json::array();
   for(Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for(Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      a.push_back(std::move(row));
   }
   return a;
}

Eigen::MatrixXd rows_from(const json& j, Eigen::Index cols, const std::string& origin)
{
   if(!j.is_array()) fail(origin, "expected an array of rows");
   Eigen::MatrixXd m(j.size(), cols);
   for(size_t r = 0; r < j.size(); ++r) {
      const auto row = vec_from(j[r], origin);
      if(row.size() != cols) fail(origin, "row has the wrong length");
      m.row(r) = row.transpose();
   }
   return m;
}

json tensor_json(const Eigen::MatrixXd& m)
{
   json t;
   t["shape"] = {m.rows(), m.cols()};
   t["data"]  = rows_json(m);
   return t;
}

Eigen::MatrixXd tensor_from(const json& j, const std::string& origin)
{
   const auto shape = get<std::vector<long>>(j, "shape", origin);
   if(shape.size() != 2 || shape[0] < 0 || shape[1] < 0) fail(origin, "bad tensor shape");
   auto m = rows_from(get<json>(j, "data", origin), shape[1], origin);
   if(m.rows() != shape[0]) fail(origin, "tensor data does not match its shape");
   return m;
}

std::ofstream open_out(const fs::path& path)
{
   if(path.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(path.parent_path(), ec);
   }
   std::ofstream os(path, std::ios::binary);
   if(!os) throw RuntimeError("cannot write " + path.string());
   return os;
}

std::ifstream open_in(const fs::path& path)
{
   std::ifstream is(path, std::ios::binary);
   if(!is) throw ValidationError("cannot read " + path.string());
   return is;
}

void finish(std::ofstream& os, const fs::path& path)
{
   os.flush();
   if(!os) throw RuntimeError("write failed: " + path.string());
}

} // namespace

// ------------------------------------------------------------------ sequences
//
void write_sequence(std::ostream& os, const Sequence& seq)
{
   seq.validate();
   const int J = seq.skeleton.num_joints();
   json meta;
   meta["type"]       = "sequence_meta";
   meta["seq_id"]     = seq.seq_id;
   meta["fps"]        = seq.fps;
   meta["num_frames"] = seq.num_frames;
   meta["camera"]     = {{"fx", seq.camera.fx},
                         {"fy", seq.camera.fy},
                         {"cx", seq.camera.cx},
                         {"cy", seq.camera.cy}};
   meta["joints"]     = seq.skeleton.joint_names;
   meta["root_index"] = seq.skeleton.root_index;
   json edges         = json::array();
   for(auto [a, b] : seq.skeleton.edges) edges.push_back({a, b});
   meta["edges"] = std::move(edges);
   os << meta.dump() << '\n';

   for(int t = 0; t < seq.num_frames; ++t) {
      json frame;
      frame["t"]   = t;
      json persons = json::array();
      for(const auto& tr : seq.tracks) {
         json p;
         p["id"]        = tr.person_id;
         const auto& d  = tr.detections[t];
         const bool det = d && d->detected;
         p["detected"]  = det;
         if(det) {
            if(d->units != Units::pixels)
               throw ValidationError("write_sequence: detections must be in pixels");
            const Pose2D& px = *d;
            json kp          = json::array();
            for(int j = 0; j < J; ++j)
               kp.push_back({px.coords(j, 0), px.coords(j, 1), px.confidence[j]});
            p["kp2d"] = std::move(kp);
         }
         if(const auto& g = tr.gt[t]) {
            p["gt_loc"] = {g->location.x(), g->location.y(), g->location.z()};
            p["gt_rel"] = rows_json(g->relative);
         }
         persons.push_back(std::move(p));
      }
      frame["persons"] = std::move(persons);
      os << frame.dump() << '\n';
   }
}

Sequence read_sequence(std::istream& is, const std::string& origin)
{
   std::string line;
   long lineno = 0;
   if(!std::getline(is, line)) fail(origin, "empty sequence file");
   ++lineno;
   const json meta = parse_line(line, origin, lineno);
   if(!meta.is_object() || meta.value("type", "") != "sequence_meta")
      fail(origin, "first line is not a sequence_meta record");

   Sequence seq;
   seq.seq_id     = get<std::string>(meta, "seq_id", origin);
   seq.fps        = get<double>(meta, "fps", origin);
   seq.num_frames = get<int>(meta, "num_frames", origin);
   const json cam = get<json>(meta, "camera", origin);
   seq.camera.fx  = get<double>(cam, "fx", origin);
   seq.camera.fy  = get<double>(cam, "fy", origin);
   seq.camera.cx  = get<double>(cam, "cx", origin);
   seq.camera.cy  = get<double>(cam, "cy", origin);
   seq.skeleton.joint_names = get<std::vector<std::string>>(meta, "joints", origin);
   seq.skeleton.root_index  = meta.value("root_index", 0);
   if(meta.contains("edges"))
      for(const auto& e : meta["edges"]) {
         if(!e.is_array() || e.size() != 2) fail(origin, "bad edge");
         seq.skeleton.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
      }
   try {
      seq.skeleton.validate();
      seq.camera.validate();
   } catch(const ValidationError& e) {
      fail(origin, e.what());
   }
   if(seq.num_frames < 1) fail(origin, "num_frames must be >= 1");
   const int J = seq.skeleton.num_joints();

   std::map<std::string, size_t> index;
   for(int t = 0; t < seq.num_frames; ++t) {
      if(!std::getline(is, line))
         fail(origin, "expected " + std::to_string(seq.num_frames) + " frames, got "
                          + std::to_string(t));
      ++lineno;
      const json frame = parse_line(line, origin, lineno);
      if(get<int>(frame, "t", origin) != t)
         fail(origin, "line " + std::to_string(lineno) + ": frames out of order");
      const json persons = get<json>(frame, "persons", origin);
      if(!persons.is_array()) fail(origin, "persons must be an array");
      if(t == 0) {
         for(const auto& p : persons) {
            const auto id = get<std::string>(p, "id", origin);
            if(index.count(id)) fail(origin, "duplicate person id " + id);
            index[id] = seq.tracks.size();
            PersonTrack tr;
            tr.person_id = id;
            tr.detections.resize(seq.num_frames);
            tr.gt.resize(seq.num_frames);
            seq.tracks.push_back(std::move(tr));
         }
      }
      if(persons.size() != seq.tracks.size())
         fail(origin, "line " + std::to_string(lineno) + ": person count changed");
      for(const auto& p : persons) {
         const auto id = get<std::string>(p, "id", origin);
         auto it       = index.find(id);
         if(it == index.end()) fail(origin, "unknown person id " + id);
         auto& tr = seq.tracks[it->second];
         if(get<bool>(p, "detected", origin)) {
            const auto kp = rows_from(get<json>(p, "kp2d", origin), 3, origin);
            if(kp.rows() != J) fail(origin, "kp2d has the wrong joint count");
            Pose2D d;
            d.coords     = kp.leftCols(2);
            d.confidence = kp.col(2);
            d.detected   = true;
            d.units      = Units::pixels;
            try {
               d.validate();
            } catch(const ValidationError& e) {
               fail(origin, e.what());
            }
            tr.detections[t] = std::move(d);
         }
         if(p.contains("gt_loc")) {
            Pose3D g;
            const auto loc = vec_from(p["gt_loc"], origin);
            if(loc.size() != 3) fail(origin, "gt_loc must have 3 values");
            g.location = loc;
            g.relative = rows_from(get<json>(p, "gt_rel", origin), 3, origin);
            if(g.relative.rows() != J) fail(origin, "gt_rel has the wrong joint count");
            tr.gt[t] = std::move(g);
         }
      }
   }
   while(std::getline(is, line))
      if(!line.empty()) fail(origin, "trailing data after the last frame");
   return seq;
}

void save_sequence(const fs::path& path, const Sequence& seq)
{
   std::ostringstream ss;
   write_sequence(ss, seq);
   write_text(path, ss.str());
}

Sequence load_sequence(const fs::path& path)
{
   auto is = open_in(path);
   return read_sequence(is, path.string());
}

std::vector<Sequence> load_corpus_dir(const fs::path& dir)
{
   if(!fs::is_directory(dir)) throw ValidationError("not a corpus directory: " + dir.string());
   std::vector<fs::path> files;
   for(const auto& e : fs::directory_iterator(dir))
      if(e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
   std::sort(files.begin(), files.end());
   if(files.empty()) throw ValidationError("no sequence files in " + dir.string());
   std::vector<Sequence> out;
   for(const auto& f : files) out.push_back(load_sequence(f));
   return out;
}

// ------------------------------------------------------------------ model
//
namespace
{
json conv_json(const nn::ConvParams& p)
{
   json j;
   j["weight"] = tensor_json(p.weight);
   j["bias"]   = vec_json(p.bias);
   return j;
}

nn::ConvParams conv_from(const json& j, const std::string& origin)
{
   nn::ConvParams p;
   p.weight = tensor_from(get<json>(j, "weight", origin), origin);
   p.bias   = vec_from(get<json>(j, "bias", origin), origin);
   return p;
}

json bn_json(const nn::BatchNormParams& p)
{
   return {{"scale", vec_json(p.scale)}, {"shift", vec_json(p.shift)}};
}

nn::BatchNormParams bn_from(const json& j, const std::string& origin)
{
   return {vec_from(get<json>(j, "scale", origin), origin),
           vec_from(get<json>(j, "shift", origin), origin)};
}

} // namespace

void write_model(std::ostream& os, const TpnModel& model)
{
   const auto& c = model.config;
   json j;
   j["version"] = "tpn-v1";
   j["config"]  = {{"half_window", c.half_window},
                   {"channels", c.channels},
                   {"num_blocks", c.num_blocks},
                   {"dropout_rate", c.dropout_rate},
                   {"num_joints", c.num_joints},
                   {"root_index", c.root_index},
                   {"dilations", c.dilations}};
   json params;
   params["input_conv"] = conv_json(model.params.input_conv);
   params["input_bn"]   = bn_json(model.params.input_bn);
   json blocks          = json::array();
   for(const auto& b : model.params.blocks)
      blocks.push_back({{"conv_a", conv_json(b.conv_a)},
                        {"bn_a", bn_json(b.bn_a)},
                        {"conv_b", conv_json(b.conv_b)},
                        {"bn_b", bn_json(b.bn_b)}});
   params["blocks"] = std::move(blocks);
   params["head"]   = conv_json(model.params.head);
   j["params"]      = std::move(params);
   json stats       = json::array();
   for(const auto& s : model.bn_stats)
      stats.push_back({{"mean", vec_json(s.mean)},
                       {"var", vec_json(s.var)},
                       {"momentum", s.momentum},
                       {"eps", s.eps}});
   j["bn_stats"] = std::move(stats);
   j["norm"]     = {{"input_mean", vec_json(model.norm.input_mean)},
                    {"input_std", vec_json(model.norm.input_std)},
                    {"output_mean", vec_json(model.norm.output_mean)},
                    {"output_std", vec_json(model.norm.output_std)}};
   os << j.dump() << '\n';
}

TpnModel read_model(std::istream& is, const std::string& origin)
{
   json j;
   try {
      j = json::parse(is);
   } catch(const json::exception& e) {
      fail(origin, e.what());
   }
   if(j.value("version", "") != "tpn-v1") fail(origin, "unsupported model version");
   TpnModel m;
   const json c           = get<json>(j, "config", origin);
   m.config.half_window   = get<int>(c, "half_window", origin);
   m.config.channels      = get<int>(c, "channels", origin);
   m.config.num_blocks    = get<int>(c, "num_blocks", origin);
   m.config.dropout_rate  = get<double>(c, "dropout_rate", origin);
   m.config.num_joints    = get<int>(c, "num_joints", origin);
   m.config.root_index    = get<int>(c, "root_index", origin);
   m.config.dilations     = get<std::vector<int>>(c, "dilations", origin);
   try {
      m.config.validate();
   } catch(const ValidationError& e) {
      fail(origin, e.what());
   }

   const json p          = get<json>(j, "params", origin);
   m.params.input_conv   = conv_from(get<json>(p, "input_conv", origin), origin);
   m.params.input_bn     = bn_from(get<json>(p, "input_bn", origin), origin);
   for(const auto& b : get<json>(p, "blocks", origin)) {
      TpnBlockParams bp;
      bp.conv_a = conv_from(get<json>(b, "conv_a", origin), origin);
      bp.bn_a   = bn_from(get<json>(b, "bn_a", origin), origin);
      bp.conv_b = conv_from(get<json>(b, "conv_b", origin), origin);
      bp.bn_b   = bn_from(get<json>(b, "bn_b", origin), origin);
      m.params.blocks.push_back(std::move(bp));
   }
   m.params.head = conv_from(get<json>(p, "head", origin), origin);
   for(const auto& s : get<json>(j, "bn_stats", origin)) {
      nn::BatchNormStats st;
      st.mean     = vec_from(get<json>(s, "mean", origin), origin);
      st.var      = vec_from(get<json>(s, "var", origin), origin);
      st.momentum = get<double>(s, "momentum", origin);
      st.eps      = get<double>(s, "eps", origin);
      m.bn_stats.push_back(std::move(st));
   }
   const json n         = get<json>(j, "norm", origin);
   m.norm.input_mean    = vec_from(get<json>(n, "input_mean", origin), origin);
   m.norm.input_std     = vec_from(get<json>(n, "input_std", origin), origin);
   m.norm.output_mean   = vec_from(get<json>(n, "output_mean", origin), origin);
   m.norm.output_std    = vec_from(get<json>(n, "output_std", origin), origin);

   const auto& cfg = m.config;
   const long C = cfg.channels;
   auto expect = [&](bool ok, const char* what) {
      if(!ok) fail(origin, std::string("model tensor shape mismatch: ") + what);
   };
   expect(long(m.params.blocks.size()) == cfg.num_blocks, "block count");
   expect(long(m.bn_stats.size()) == 1 + 2 * cfg.num_blocks, "bn_stats count");
   expect(m.params.input_conv.weight.rows() == C
              && m.params.input_conv.weight.cols() == 3 * cfg.input_dim(),
          "input_conv");
   for(const auto& b : m.params.blocks) {
      expect(b.conv_a.weight.rows() == C && b.conv_a.weight.cols() == 3 * C, "conv_a");
      expect(b.conv_b.weight.rows() == C && b.conv_b.weight.cols() == C, "conv_b");
   }
   expect(m.params.head.weight.rows() == cfg.output_dim()
              && m.params.head.weight.cols() == C,
          "head");
   expect(m.norm.input_mean.size() == cfg.input_dim()
              && m.norm.input_std.size() == cfg.input_dim(),
          "input norm");
   expect(m.norm.output_mean.size() == cfg.output_dim()
              && m.norm.output_std.size() == cfg.output_dim(),
          "output norm");
   for(const auto& s : m.bn_stats)
      expect(s.mean.size() == C && s.var.size() == C, "bn_stats");
   if(!m.is_finite()) fail(origin, "model contains non-finite values");
   return m;
}

void save_model(const fs::path& path, const TpnModel& model)
{
   std::ostringstream ss;
   write_model(ss, model);
   write_text(path, ss.str());
}

TpnModel load_model(const fs::path& path)
{
   auto is = open_in(path);
   return read_model(is, path.string());
}

// ------------------------------------------------------------------ predictions
//
void write_predictions(std::ostream& os, const std::vector<TrackPrediction>& preds)
{
   for(const auto& p : preds) {
      const auto& tr = p.trajectory;
      for(int t = 0; t < tr.num_frames(); ++t) {
         const auto& pose = tr.poses[t];
         json j;
         j["seq"]           = p.seq_id;
         j["person"]        = p.person_id;
         j["t"]             = t;
         j["had_detection"] = bool(tr.had_detection[t]);
         j["loc"] = {pose.location.x(), pose.location.y(), pose.location.z()};
         j["rel"] = rows_json(pose.relative);
         os << j.dump() << '\n';
      }
   }
}

std::vector<TrackPrediction> read_predictions(std::istream& is, const std::string& origin)
{
   std::vector<TrackPrediction> out;
   std::string line;
   long lineno = 0;
   while(std::getline(is, line)) {
      ++lineno;
      if(line.empty()) continue;
      const json j      = parse_line(line, origin, lineno);
      const auto seq    = get<std::string>(j, "seq", origin);
      const auto person = get<std::string>(j, "person", origin);
      const int t       = get<int>(j, "t", origin);
      if(out.empty() || out.back().seq_id != seq || out.back().person_id != person) {
         if(t != 0) fail(origin, "line " + std::to_string(lineno) + ": track must start at t=0");
         out.push_back({seq, person, {}});
      }
      auto& tr = out.back().trajectory;
      if(t != tr.num_frames())
         fail(origin, "line " + std::to_string(lineno) + ": frames out of order");
      Pose3D pose;
      const auto loc = vec_from(get<json>(j, "loc", origin), origin);
      if(loc.size() != 3) fail(origin, "loc must have 3 values");
      pose.location = loc;
      pose.relative = rows_from(get<json>(j, "rel", origin), 3, origin);
      if(tr.num_frames() > 0 && pose.num_joints() != tr.poses.front().num_joints())
         fail(origin, "joint count changed within a track");
      tr.poses.push_back(std::move(pose));
      tr.had_detection.push_back(get<bool>(j, "had_detection", origin));
   }
   return out;
}

void save_predictions(const fs::path& path, const std::vector<TrackPrediction>& preds)
{
   std::ostringstream ss;
   write_predictions(ss, preds);
   write_text(path, ss.str());
}

std::vector<TrackPrediction> load_predictions(const fs::path& path)
{
   auto is = open_in(path);
   return read_predictions(is, path.string());
}

// ------------------------------------------------------------------ reports
//
namespace
{
std::vector<std::pair<const char*, double>> metric_rows(const SequenceMetrics& m)
{
   return {{"count", double(m.count)},
           {"mrpe", m.mrpe},
           {"mpjpe", m.mpjpe},
           {"pck", m.pck},
           {"n_mrpe", m.n_mrpe},
           {"n_mrpe_sq", m.n_mrpe_sq},
           {"n_mpjpe", m.n_mpjpe}};
}

json metrics_json(const SequenceMetrics& m)
{
   json j;
   j["sequence"] = m.seq_id;
   for(auto [k, v] : metric_rows(m)) {
      if(std::string(k) == "count")
         j[k] = m.count;
      else if(std::isfinite(v))
         j[k] = v;
      else
         j[k] = nullptr;
   }
   return j;
}

SequenceMetrics metrics_from(const json& j, const std::string& origin)
{
   auto num = [&](const char* k) {
      const json& v = get<json>(j, k, origin);
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
   };
   SequenceMetrics m;
   m.seq_id    = get<std::string>(j, "sequence", origin);
   m.count     = get<long>(j, "count", origin);
   m.mrpe      = num("mrpe");
   m.mpjpe     = num("mpjpe");
   m.pck       = num("pck");
   m.n_mrpe    = num("n_mrpe");
   m.n_mrpe_sq = num("n_mrpe_sq");
   m.n_mpjpe   = num("n_mpjpe");
   return m;
}

} // namespace

void write_report_csv(std::ostream& os, const std::vector<MetricsReport>& reports)
{
   os << "sequence,subset,metric,value\n";
   for(const auto& r : reports) {
      auto emit = [&](const SequenceMetrics& m) {
         for(auto [k, v] : metric_rows(m))
            os << m.seq_id << ',' << to_string(r.subset) << ',' << k << ','
               << format_double(v) << '\n';
      };
      for(const auto& s : r.sequences) emit(s);
      emit(r.mean);
   }
}

std::string report_json(const std::vector<MetricsReport>& reports)
{
   json j = json::array();
   for(const auto& r : reports) {
      json seqs = json::array();
      for(const auto& s : r.sequences) seqs.push_back(metrics_json(s));
      j.push_back({{"subset", to_string(r.subset)},
                   {"sequences", std::move(seqs)},
                   {"mean", metrics_json(r.mean)}});
   }
   return j.dump(2) + "\n";
}

std::vector<MetricsReport> parse_report_json(const std::string& text)
{
   const std::string origin = "report";
   json j;
   try {
      j = json::parse(text);
   } catch(const json::exception& e) {
      fail(origin, e.what());
   }
   if(!j.is_array()) fail(origin, "expected an array of subset reports");
   std::vector<MetricsReport> out;
   for(const auto& r : j) {
      MetricsReport m;
      m.subset = subset_from_string(get<std::string>(r, "subset", origin));
      for(const auto& s : get<json>(r, "sequences", origin))
         m.sequences.push_back(metrics_from(s, origin));
      m.mean = metrics_from(get<json>(r, "mean", origin), origin);
      out.push_back(std::move(m));
   }
   return out;
}

void write_comparison_csv(std::ostream& os, const std::vector<MethodReport>& methods)
{
   os << "method,subset,metric,value\n";
   for(const auto& m : methods)
      for(const auto& r : m.reports)
         for(auto [k, v] : metric_rows(r.mean))
            os << m.method << ',' << to_string(r.subset) << ',' << k << ','
               << format_double(v) << '\n';
}

void write_energy_csv(std::ostream& os, const std::vector<EnergyRecord>& records)
{
   os << "sequence,person,iterations,initial_energy,final_energy,"
         "loc_pred,loc_smooth_long,loc_smooth_short,"
         "rel_pred,rel_smooth_long,rel_smooth_short\n";
   for(const auto& r : records) {
      const auto& e = r.result;
      const double initial = e.energy_history.empty() ? e.energy : e.energy_history.front();
      os << r.seq_id << ',' << r.person_id << ',' << e.iterations << ','
         << format_double(initial) << ',' << format_double(e.energy) << ','
         << format_double(e.loc_terms.pred) << ',' << format_double(e.loc_terms.smooth_long)
         << ',' << format_double(e.loc_terms.smooth_short) << ','
         << format_double(e.rel_terms.pred) << ',' << format_double(e.rel_terms.smooth_long)
         << ',' << format_double(e.rel_terms.smooth_short) << '\n';
   }
}

void write_text(const fs::path& path, const std::string& text)
{
   auto os = open_out(path);
   os << text;
   finish(os, path);
}

std::string read_text(const fs::path& path)
{
   auto is = open_in(path);
   std::ostringstream ss;
   ss << is.rdbuf();
   return ss.str();
}

} // namespace posesmooth::io
