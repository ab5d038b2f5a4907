#pragma once

#include "posesmooth/baselines.hpp"
#include "posesmooth/io.hpp"
#include "posesmooth/metrics.hpp"
#include "posesmooth/refine.hpp"
#include "posesmooth/synth.hpp"
#include "posesmooth/tpn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace posesmooth
{
struct CorpusCounts
{
   int train = 20;
   int val   = 5;
   int test  = 10;
};

struct PathsConfig
{
   std::string corpus      = "corpus";
   std::string model       = "model.json";
   std::string predictions = "predictions";
   std::string reports     = "reports";
};

// Everything an end-to-end run needs. Defaults are the desk-scale setup.
struct ExperimentConfig
{
   std::uint64_t seed = 0;
   CorpusCounts corpus;
   SynthConfig synth;
   TpnConfig tpn;
   TrainConfig train;
   RefineConfig refine;
   OneEuroConfig one_euro;
   double pck_threshold = 150.0;
   PathsConfig paths;

   ExperimentConfig();
   void validate() const;
   MetricOptions metric_options() const
   {
      return {refine.visible_threshold, pck_threshold};
   }
};

// Fields missing from the document keep their defaults; unknown keys are
// rejected.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
// FNV-1a of the canonical JSON form, hex.
std::string config_hash(const ExperimentConfig& cfg);

// ------------------------------------------------------------------ corpus
//
struct Corpus
{
   std::vector<Sequence> train, val, test;
};

Corpus generate_corpus(const ExperimentConfig& cfg);

// <dir>/{train,val,test}/<seq_id>.jsonl plus <dir>/manifest.json.
void write_corpus(const std::filesystem::path& dir,
                  const Corpus& corpus,
                  const ExperimentConfig& cfg);
Corpus load_corpus(const std::filesystem::path& dir);

// ------------------------------------------------------------------ stages
//
TrainResult train_model(const Corpus& corpus,
                        const ExperimentConfig& cfg,
                        const EpochCallback& on_epoch = {});

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log);

std::vector<io::TrackPrediction> predict_sequences(const std::vector<Sequence>& seqs,
                                                   const TpnModel& model);

enum class Method { tpn, interpolate, one_euro, refine };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct PostprocessResult
{
   std::vector<io::TrackPrediction> predictions;
   std::vector<io::EnergyRecord> energy; // refine only
};

// Applies a post-processing method to raw TPN predictions. Visibility
// comes from the detections of the matching sequence.
PostprocessResult postprocess(const std::vector<io::TrackPrediction>& raw,
                              const std::vector<Sequence>& seqs,
                              Method method,
                              const NormStats& norm,
                              const ExperimentConfig& cfg);

// Reports for the all, visible and occluded subsets.
std::vector<MetricsReport> evaluate_predictions(const std::vector<io::TrackPrediction>& preds,
                                                const std::vector<Sequence>& seqs,
                                                const ExperimentConfig& cfg);

// Two panels (vertical coordinate and depth over time) of one joint of one
// person: ground truth against each prediction, frames with visibility below
// the threshold shaded.
struct PlotSeries
{
   std::string label;
   const io::TrackPrediction* prediction = nullptr;
};

std::string plot_svg(const Sequence& seq,
                     const std::string& person_id,
                     const std::string& joint,
                     const std::vector<PlotSeries>& series,
                     const ExperimentConfig& cfg);

} // namespace posesmooth
