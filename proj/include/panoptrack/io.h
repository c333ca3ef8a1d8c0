#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "panoptrack/fusion.h"
#include "panoptrack/learn.h"
#include "panoptrack/metrics.h"
#include "panoptrack/result.h"
#include "panoptrack/sim.h"

namespace panoptrack {

// JSON Lines files, one record per line. Readers skip blank lines and throw
// InputError carrying the 1-based line number on anything malformed.
//
//   detections {frame, camera_id, category, box:[x,y,z,theta,l,w,h], score,
//               embedding?, box2d?:[x_min,y_min,x_max,y_max]}   (camera frame)
//   poses      {frame, camera_id, rotation:[w,x,y,z], translation:[x,y,z]}
//   gt         {frame, object_id, category, box}
//   results    {frame, track_id, category, box, score}

struct PoseRecord {
  int64_t frame = 0;
  int camera_id = 0;
  RigidTransform pose;
};

std::vector<DetectionRecord> read_detections(std::istream& in);
std::vector<PoseRecord> read_poses(std::istream& in);
GroundTruth read_ground_truth(std::istream& in);
TrackingResult read_result(std::istream& in);

void write_detections(const std::vector<FrameBundle>& frames, std::ostream& out);
void write_poses(const std::vector<FrameBundle>& frames, std::ostream& out);
void write_ground_truth(const GroundTruth& gt, std::ostream& out);
void write_result(const TrackingResult& result, std::ostream& out);

// Groups camera-frame detections and poses into per-frame bundles, ascending.
// Throws InputError when a detection has no pose for its frame and camera.
std::vector<FrameBundle> assemble_frames(const std::vector<DetectionRecord>& detections,
                                         const std::vector<PoseRecord>& poses);

// World-frame detections per frame (NMS-merged), as used for motion training.
DetectionsByFrame merged_world_detections(const std::vector<FrameBundle>& frames,
                                          const NmsOptions& nms);

std::string report_json(const MetricReport& report);
// target_recall,reachable,threshold,recall,mota_r,motp_r,tp,fp,fn,ids
std::string curves_csv(const MetricReport& report);
std::string report_table(const MetricReport& report);

// File helpers that name the path on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace panoptrack
