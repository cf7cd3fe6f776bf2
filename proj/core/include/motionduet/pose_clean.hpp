#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace motionduet::pose {

using Vec3 = std::array<double, 3>;

enum class Joint : std::size_t {
  Nose,
  LShoulder,
  RShoulder,
  LHip,
  RHip,
  LKnee,
  RKnee,
  LAnkle,
  RAnkle,
  LFoot,
  RFoot,
};
inline constexpr std::size_t kJointCount = 11;

std::string_view jointName(Joint j);

/// One frame of named 3D landmarks; +y is the global up axis.
struct LandmarkFrame {
  int index = 0;
  std::array<Vec3, kJointCount> joints{};

  const Vec3& operator[](Joint j) const { return joints[static_cast<std::size_t>(j)]; }
  Vec3& operator[](Joint j) { return joints[static_cast<std::size_t>(j)]; }
};

struct CleanConfig {
  double backFaceMaxDeg = 20.0;
  double headTiltMaxDeg = 30.0;
  double footKneeLowDeg = 75.0;
  double footKneeHighDeg = 180.0;
  double minValidRatio = 0.7;
  std::size_t sampledFrames = 12;

  void validate() const;
  static CleanConfig fromJson(const nlohmann::json& j);
  nlohmann::json toJson() const;
};

class DegeneratePoseError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Angle between v_body = ½((RShoulder−LShoulder) + (RHip−LHip)) and
/// v_face = Nose − MidShoulder, in degrees.
double backFaceAngle(const LandmarkFrame& frame);
/// Angle between Nose − MidShoulder and +y, in degrees.
double headTiltAngle(const LandmarkFrame& frame);

struct FootKnee {
  double left = 0.0;
  double right = 0.0;
};
/// Per side, angle between (Hip − Knee) and (Foot − Ankle), in degrees.
FootKnee footKneeAngles(const LandmarkFrame& frame);

struct FrameVerdict {
  int frame = 0;
  bool backFace = false;
  bool head = false;
  bool footKnee = false;
  bool valid = false;
  bool degenerate = false;
};

/// Never throws on geometry: degenerate vectors yield valid=false.
FrameVerdict frameVerdict(const LandmarkFrame& frame, const CleanConfig& cfg);

/// idx_i = ⌊i·(T−1)/(N−1)⌋ for i < N; all T frames when T < N.
std::vector<std::size_t> sampleIndices(std::size_t frameCount, std::size_t sampled);

struct VideoReport {
  std::string path;
  double score = 0.0;
  bool accepted = false;
  std::vector<FrameVerdict> perFrame;  // sampled frames only
};

VideoReport videoValidity(const std::vector<LandmarkFrame>& frames, const CleanConfig& cfg);

/// JSON Lines: {"frame": int, "joints": {"Nose": [x,y,z], ...}} per line.
std::vector<LandmarkFrame> readLandmarksJsonl(const std::filesystem::path& path);
void writeLandmarksJsonl(const std::filesystem::path& path, const std::vector<LandmarkFrame>& frames);

nlohmann::json toJson(const FrameVerdict& v);
nlohmann::json toJson(const VideoReport& r);

}  // namespace motionduet::pose
