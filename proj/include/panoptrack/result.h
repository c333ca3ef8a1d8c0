#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "panoptrack/geom.h"

namespace panoptrack {

struct TrackedObject {
  int64_t track_id = 0;
  Box3D box;
  double confidence = 1.0;
  std::string category;
};

struct GroundTruthObject {
  int64_t object_id = 0;
  Box3D box;
  std::string category;
};

// Frame index -> objects. A frame key may map to an empty list.
struct TrackingResult {
  std::map<int64_t, std::vector<TrackedObject>> frames;
};

struct GroundTruth {
  std::map<int64_t, std::vector<GroundTruthObject>> frames;
};

}  // namespace panoptrack
