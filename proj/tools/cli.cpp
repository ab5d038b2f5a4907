#include "cli.hpp"

#include "posesmooth/error.hpp"
#include "posesmooth/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace posesmooth::cli
{
namespace
{
namespace fs = std::filesystem;
using json   = nlohmann::ordered_json;

struct Common
{
   std::string config;
   std::optional<std::uint64_t> seed;
   std::string out;
};

void add_common(CLI::App* cmd, Common& c)
{
   cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
   cmd->add_option("--seed", c.seed, "override the config seed");
   cmd->add_option("--out", c.out, "output directory");
}

ExperimentConfig load_config(const Common& c)
{
   ExperimentConfig cfg;
   if(!c.config.empty()) cfg = config_from_json(io::read_text(c.config));
   if(c.seed) cfg.seed = *c.seed;
   cfg.validate();
   return cfg;
}

fs::path out_dir(const Common& c, const std::string& fallback)
{
   return c.out.empty() ? fs::path(fallback) : fs::path(c.out);
}

const std::vector<Sequence>& split(const Corpus& corpus, const std::string& name)
{
   if(name == "train") return corpus.train;
   if(name == "val") return corpus.val;
   if(name == "test") return corpus.test;
   throw ValidationError("unknown split '" + name + "'");
}

template<class F>
void write_file(const fs::path& path, F&& body)
{
   std::ostringstream ss;
   body(ss);
   io::write_text(path, ss.str());
}

void print_summary(std::ostream& out, const std::string& label,
                   const std::vector<MetricsReport>& reports)
{
   char line[256];
   for(const auto& r : reports) {
      std::snprintf(line, sizeof line,
                    "%-12s %-9s n=%-6ld MRPE %8.2f  MPJPE %7.2f  PCK %6.2f  "
                    "N-MRPE %8.2f  N-MPJPE %7.2f\n",
                    label.c_str(), to_string(r.subset), long(r.mean.count), r.mean.mrpe,
                    r.mean.mpjpe, r.mean.pck, r.mean.n_mrpe, r.mean.n_mpjpe);
      out << line;
   }
}

void write_reports(const fs::path& dir, const std::string& stem,
                   const std::vector<MetricsReport>& reports)
{
   write_file(dir / (stem + "_report.csv"),
              [&](std::ostream& os) { io::write_report_csv(os, reports); });
   io::write_text(dir / (stem + "_report.json"), io::report_json(reports));
}

void write_comparison(const fs::path& dir, const std::vector<io::MethodReport>& methods)
{
   write_file(dir / "comparison.csv",
              [&](std::ostream& os) { io::write_comparison_csv(os, methods); });
   json j = json::object();
   for(const auto& m : methods) j[m.method] = json::parse(io::report_json(m.reports));
   io::write_text(dir / "comparison.json", j.dump(2) + "\n");
}

// ------------------------------------------------------------------ commands
//
void cmd_generate(const Common& c, std::ostream& out)
{
   const auto cfg = load_config(c);
   const auto dir = out_dir(c, cfg.paths.corpus);
   const auto corpus = generate_corpus(cfg);
   write_corpus(dir, corpus, cfg);
   out << "wrote " << corpus.train.size() << " train, " << corpus.val.size() << " val, "
       << corpus.test.size() << " test sequences to " << dir.string() << "\n";
}

TpnModel train_into(const ExperimentConfig& cfg, const Corpus& corpus, const fs::path& dir,
                    std::ostream& out)
{
   auto res = train_model(corpus, cfg, [&](const EpochLog& e) {
      char line[128];
      std::snprintf(line, sizeof line, "epoch %3d  lr %.3g  train %.5f  val %.5f\n", e.epoch,
                    e.learning_rate, e.train_loss, e.val_loss);
      out << line << std::flush;
   });
   io::save_model(dir / "model.json", res.model);
   write_file(dir / "train_log.csv", [&](std::ostream& os) { write_train_log(os, res.log); });
   return std::move(res.model);
}

void cmd_train(const Common& c, const std::string& corpus_dir, bool resume, std::ostream& out)
{
   if(resume)
      throw ValidationError("train: --resume is not supported, training always starts from "
                            "freshly initialised weights");
   const auto cfg = load_config(c);
   auto dir       = out_dir(c, fs::path(cfg.paths.model).parent_path().string());
   if(dir.empty()) dir = ".";
   const auto corpus = load_corpus(corpus_dir.empty() ? cfg.paths.corpus : corpus_dir);
   train_into(cfg, corpus, dir, out);
   out << "wrote " << (dir / "model.json").string() << "\n";
}

struct Inputs
{
   std::string corpus, model, split = "test";
   std::vector<std::string> predictions;
};

void cmd_predict(const Common& c, const Inputs& in, std::ostream& out)
{
   const auto cfg    = load_config(c);
   const auto model  = io::load_model(in.model.empty() ? cfg.paths.model : in.model);
   const auto corpus = load_corpus(in.corpus.empty() ? cfg.paths.corpus : in.corpus);
   const auto dir    = out_dir(c, cfg.paths.predictions);
   const auto preds  = predict_sequences(split(corpus, in.split), model);
   io::save_predictions(dir / "tpn.jsonl", preds);
   out << "wrote " << preds.size() << " tracks to " << (dir / "tpn.jsonl").string() << "\n";
}

void cmd_refine(const Common& c, const Inputs& in, const std::string& method_name,
                std::ostream& out)
{
   const auto cfg    = load_config(c);
   const auto method = method_from_string(method_name);
   if(in.predictions.size() != 1)
      throw ValidationError("refine: expects exactly one --predictions file");
   const auto corpus = load_corpus(in.corpus.empty() ? cfg.paths.corpus : in.corpus);
   const auto raw    = io::load_predictions(in.predictions.front());
   NormStats norm;
   if(method == Method::refine)
      norm = io::load_model(in.model.empty() ? cfg.paths.model : in.model).norm;
   const auto dir = out_dir(c, cfg.paths.predictions);
   auto res       = postprocess(raw, split(corpus, in.split), method, norm, cfg);
   const auto path = dir / (std::string(to_string(method)) + ".jsonl");
   io::save_predictions(path, res.predictions);
   if(method == Method::refine)
      write_file(dir / "refine_energy.csv",
                 [&](std::ostream& os) { io::write_energy_csv(os, res.energy); });
   out << "wrote " << res.predictions.size() << " tracks to " << path.string() << "\n";
}

std::vector<io::MethodReport> evaluate_files(const ExperimentConfig& cfg, const Inputs& in)
{
   if(in.predictions.empty()) throw ValidationError("no --predictions given");
   const auto corpus = load_corpus(in.corpus.empty() ? cfg.paths.corpus : in.corpus);
   const auto& seqs  = split(corpus, in.split);
   std::vector<io::MethodReport> methods;
   for(const auto& p : in.predictions)
      methods.push_back({fs::path(p).stem().string(),
                         evaluate_predictions(io::load_predictions(p), seqs, cfg)});
   return methods;
}

void cmd_evaluate(const Common& c, const Inputs& in, std::ostream& out)
{
   const auto cfg     = load_config(c);
   const auto dir     = out_dir(c, cfg.paths.reports);
   const auto methods = evaluate_files(cfg, in);
   for(const auto& m : methods) {
      write_reports(dir, m.method, m.reports);
      print_summary(out, m.method, m.reports);
   }
   if(methods.size() > 1) write_comparison(dir, methods);
}

void cmd_compare(const Common& c, const Inputs& in, std::ostream& out)
{
   const auto cfg     = load_config(c);
   const auto dir     = out_dir(c, cfg.paths.reports);
   const auto methods = evaluate_files(cfg, in);
   write_comparison(dir, methods);
   for(const auto& m : methods) print_summary(out, m.method, m.reports);
}

void cmd_plot(const Common& c, const Inputs& in, const std::string& seq_id,
              const std::string& person, std::string joint, std::ostream& out)
{
   const auto cfg = load_config(c);
   if(in.predictions.empty()) throw ValidationError("plot: no --predictions given");
   const auto corpus = load_corpus(in.corpus.empty() ? cfg.paths.corpus : in.corpus);
   const Sequence* seq = nullptr;
   for(const auto& s : split(corpus, in.split))
      if(s.seq_id == seq_id) seq = &s;
   if(!seq) throw ValidationError("plot: no sequence '" + seq_id + "' in split " + in.split);
   if(joint.empty()) joint = seq->skeleton.joint_names[seq->skeleton.root_index];

   std::vector<std::vector<io::TrackPrediction>> loaded;
   for(const auto& p : in.predictions) loaded.push_back(io::load_predictions(p));
   std::vector<PlotSeries> series;
   for(size_t i = 0; i < loaded.size(); ++i) {
      const io::TrackPrediction* hit = nullptr;
      for(const auto& tp : loaded[i])
         if(tp.seq_id == seq_id && tp.person_id == person) hit = &tp;
      if(!hit)
         throw ValidationError("plot: " + in.predictions[i] + " has no track " + seq_id + "/"
                               + person);
      series.push_back({fs::path(in.predictions[i]).stem().string(), hit});
   }
   const auto dir  = out_dir(c, cfg.paths.reports);
   const auto path = dir / (seq_id + "_" + person + "_" + joint + ".svg");
   io::write_text(path, plot_svg(*seq, person, joint, series, cfg));
   out << "wrote " << path.string() << "\n";
}

void cmd_run(const Common& c, std::ostream& out)
{
   const auto cfg  = load_config(c);
   const auto root = out_dir(c, "run");
   const auto corpus_dir = root / "corpus";
   const auto pred_dir   = root / "predictions";
   const auto rep_dir    = root / "reports";

   write_corpus(corpus_dir, generate_corpus(cfg), cfg);
   const auto corpus = load_corpus(corpus_dir);
   out << "corpus: " << corpus.train.size() << "/" << corpus.val.size() << "/"
       << corpus.test.size() << " sequences\n";
   const auto model = train_into(cfg, corpus, root, out);

   const auto raw = predict_sequences(corpus.test, model);
   io::save_predictions(pred_dir / "tpn.jsonl", raw);
   std::vector<io::MethodReport> methods;
   methods.push_back({"tpn", evaluate_predictions(raw, corpus.test, cfg)});
   for(Method m : {Method::interpolate, Method::one_euro, Method::refine}) {
      auto res = postprocess(raw, corpus.test, m, model.norm, cfg);
      io::save_predictions(pred_dir / (std::string(to_string(m)) + ".jsonl"), res.predictions);
      if(m == Method::refine)
         write_file(pred_dir / "refine_energy.csv",
                    [&](std::ostream& os) { io::write_energy_csv(os, res.energy); });
      methods.push_back({to_string(m), evaluate_predictions(res.predictions, corpus.test, cfg)});
   }
   for(const auto& m : methods) {
      write_reports(rep_dir, m.method, m.reports);
      print_summary(out, m.method, m.reports);
   }
   write_comparison(rep_dir, methods);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
   CLI::App app{"Temporal 3D pose estimation with occlusion-aware trajectory refinement"};
   app.name("posesmooth");
   app.require_subcommand(1);

   Common common;
   Inputs in;
   std::string corpus_dir, method = "refine", seq_id, person, joint;
   bool resume = false;

   auto* gen = app.add_subcommand("generate", "generate a synthetic corpus");
   add_common(gen, common);

   auto* train = app.add_subcommand("train", "train the temporal network");
   add_common(train, common);
   train->add_option("--corpus", in.corpus, "corpus directory");
   train->add_flag("--resume", resume, "not supported");

   auto add_inputs = [&](CLI::App* cmd, bool model) {
      add_common(cmd, common);
      cmd->add_option("--corpus", in.corpus, "corpus directory");
      cmd->add_option("--split", in.split, "train, val or test")
          ->check(CLI::IsMember({"train", "val", "test"}));
      if(model) cmd->add_option("--model", in.model, "model file");
   };

   auto* pred = app.add_subcommand("predict", "run the network over a corpus split");
   add_inputs(pred, true);

   auto* ref = app.add_subcommand("refine", "post-process raw predictions");
   add_inputs(ref, true);
   ref->add_option("--predictions", in.predictions, "raw predictions file")->required();
   ref->add_option("--method", method, "refine, interpolate or one-euro")
       ->check(CLI::IsMember({"refine", "interpolate", "one-euro"}));

   auto* eval = app.add_subcommand("evaluate", "score prediction files");
   add_inputs(eval, false);
   eval->add_option("--predictions", in.predictions, "prediction files")->required();

   auto* cmp = app.add_subcommand("compare", "side-by-side table of prediction files");
   add_inputs(cmp, false);
   cmp->add_option("--predictions", in.predictions, "prediction files")->required();

   auto* plot = app.add_subcommand("plot", "SVG trajectory plot of one joint");
   add_inputs(plot, false);
   plot->add_option("--predictions", in.predictions, "prediction files")->required();
   plot->add_option("--seq", seq_id, "sequence id")->required();
   plot->add_option("--person", person, "person id")->required();
   plot->add_option("--joint", joint, "joint name (default: root)");

   auto* runall = app.add_subcommand("run", "generate, train, predict, post-process, evaluate");
   add_common(runall, common);

   std::vector<const char*> argv{"posesmooth"};
   for(const auto& a : args) argv.push_back(a.c_str());
   try {
      app.parse(int(argv.size()), argv.data());
   } catch(const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
   }

   try {
      if(gen->parsed()) cmd_generate(common, out);
      else if(train->parsed()) cmd_train(common, in.corpus, resume, out);
      else if(pred->parsed()) cmd_predict(common, in, out);
      else if(ref->parsed()) cmd_refine(common, in, method, out);
      else if(eval->parsed()) cmd_evaluate(common, in, out);
      else if(cmp->parsed()) cmd_compare(common, in, out);
      else if(plot->parsed()) cmd_plot(common, in, seq_id, person, joint, out);
      else if(runall->parsed()) cmd_run(common, out);
      return 0;
   } catch(const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
   } catch(const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 1;
   }
}

} // namespace posesmooth::cli
