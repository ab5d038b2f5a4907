#pragma once

#include "posesmooth/geometry.hpp"
#include "posesmooth/metrics.hpp"
#include "posesmooth/refine.hpp"
#include "posesmooth/tpn.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace posesmooth::io
{
namespace fs = std::filesystem;

// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

// ------------------------------------------------------------------ sequences
//
// JSON lines. Line 1:
//   {"type":"sequence_meta","seq_id","fps","num_frames",
//    "camera":{"fx","fy","cx","cy"},"joints":[...],"root_index","edges"}
// then one line per frame:
//   {"t","persons":[{"id","detected","kp2d":[[u,v,conf],...],
//                    "gt_loc":[X,Y,Z],"gt_rel":[[x,y,z],...]}]}
// kp2d is omitted when undetected, gt_* when there is no ground truth.
void write_sequence(std::ostream& os, const Sequence& seq);
Sequence read_sequence(std::istream& is, const std::string& origin = "<stream>");

void save_sequence(const fs::path& path, const Sequence& seq);
Sequence load_sequence(const fs::path& path);

// Every *.jsonl file of a directory, sorted by file name.
std::vector<Sequence> load_corpus_dir(const fs::path& dir);

// ------------------------------------------------------------------ model
//
// Single JSON document, "version": "tpn-v1". Tensors are stored as
// {"shape":[rows, cols],"data":[[...],...]} in row-major order.
void write_model(std::ostream& os, const TpnModel& model);
TpnModel read_model(std::istream& is, const std::string& origin = "<stream>");

void save_model(const fs::path& path, const TpnModel& model);
TpnModel load_model(const fs::path& path);

// ------------------------------------------------------------------ predictions
//
struct TrackPrediction
{
   std::string seq_id;
   std::string person_id;
   PoseTrajectory trajectory;
};

// One line per (sequence, person, frame):
//   {"seq","person","t","had_detection","loc":[X,Y,Z],"rel":[[x,y,z],...]}
void write_predictions(std::ostream& os, const std::vector<TrackPrediction>& preds);
std::vector<TrackPrediction> read_predictions(std::istream& is,
                                              const std::string& origin = "<stream>");

void save_predictions(const fs::path& path, const std::vector<TrackPrediction>& preds);
std::vector<TrackPrediction> load_predictions(const fs::path& path);

// ------------------------------------------------------------------ reports
//
// Columns: sequence,subset,metric,value. Rows for every sequence followed by
// the "mean" row block; count is reported as a metric.
void write_report_csv(std::ostream& os, const std::vector<MetricsReport>& reports);
std::string report_json(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> parse_report_json(const std::string& text);

struct MethodReport
{
   std::string method;
   std::vector<MetricsReport> reports;
};

// Columns: method,subset,metric,value with the cross-sequence means.
void write_comparison_csv(std::ostream& os, const std::vector<MethodReport>& methods);

// Per-track energy breakdown of a refinement run.
struct EnergyRecord
{
   std::string seq_id, person_id;
   RefineResult result;
};
void write_energy_csv(std::ostream& os, const std::vector<EnergyRecord>& records);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

} // namespace posesmooth::io
