#include "motionduet/pose_clean.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "motionduet/errors.hpp"

namespace motionduet::pose {
namespace {

// Inclusive threshold comparisons absorb round-off from constructed boundary
// geometries (e.g. an exact 30° vector evaluating to 30.000000000000004°).
constexpr double kBoundaryTolDeg = 1e-9;

constexpr std::array<std::string_view, kJointCount> kNames = {
    "Nose", "LShoulder", "RShoulder", "LHip", "RHip", "LKnee", "RKnee", "LAnkle", "RAnkle", "LFoot", "RFoot"};

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 midpoint(const Vec3& a, const Vec3& b) {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// arccos of the normalized dot product, evaluated as atan2(|a×b|, a·b) for
// accuracy near 0° and 180°.
double angleDeg(const Vec3& a, const Vec3& b, const char* what) {
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0) || !std::isfinite(na) || !std::isfinite(nb)) {
    throw DegeneratePoseError(std::string("degenerate pose: zero-length vector in ") + what);
  }
  return std::atan2(norm(cross(a, b)), dot(a, b)) * 180.0 / std::numbers::pi;
}

Vec3 faceVector(const LandmarkFrame& f) {
  return sub(f[Joint::Nose], midpoint(f[Joint::LShoulder], f[Joint::RShoulder]));
}

}  // namespace

std::string_view jointName(Joint j) { return kNames[static_cast<std::size_t>(j)]; }

void CleanConfig::validate() const {
  auto bad = [](const std::string& m) { throw UsageError("clean config: " + m); };
  if (!(backFaceMaxDeg > 0.0 && backFaceMaxDeg < 180.0)) bad("backface_max_deg must lie in (0, 180)");
  if (!(headTiltMaxDeg > 0.0 && headTiltMaxDeg < 180.0)) bad("head_tilt_max_deg must lie in (0, 180)");
  if (!(footKneeLowDeg >= 0.0 && footKneeLowDeg < footKneeHighDeg && footKneeHighDeg <= 180.0)) {
    bad("foot_knee range must satisfy 0 <= low < high <= 180");
  }
  if (!(minValidRatio > 0.0 && minValidRatio <= 1.0)) bad("min_valid_ratio must lie in (0, 1]");
  if (sampledFrames < 1) bad("sampled_frames must be >= 1");
}

CleanConfig CleanConfig::fromJson(const nlohmann::json& j) {
  CleanConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "backface_max_deg") c.backFaceMaxDeg = value.get<double>();
    else if (key == "head_tilt_max_deg") c.headTiltMaxDeg = value.get<double>();
    else if (key == "foot_knee_range") {
      if (!value.is_array() || value.size() != 2) throw UsageError("clean config: foot_knee_range must be [low, high]");
      c.footKneeLowDeg = value[0].get<double>();
      c.footKneeHighDeg = value[1].get<double>();
    } else if (key == "min_valid_ratio") c.minValidRatio = value.get<double>();
    else if (key == "sampled_frames") c.sampledFrames = value.get<std::size_t>();
    else throw UsageError("clean config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::json CleanConfig::toJson() const {
  return {{"backface_max_deg", backFaceMaxDeg},
          {"head_tilt_max_deg", headTiltMaxDeg},
          {"foot_knee_range", {footKneeLowDeg, footKneeHighDeg}},
          {"min_valid_ratio", minValidRatio},
          {"sampled_frames", sampledFrames}};
}

double backFaceAngle(const LandmarkFrame& f) {
  const Vec3 back = sub(f[Joint::RShoulder], f[Joint::LShoulder]);
  const Vec3 hip = sub(f[Joint::RHip], f[Joint::LHip]);
  const Vec3 body = {0.5 * (back[0] + hip[0]), 0.5 * (back[1] + hip[1]), 0.5 * (back[2] + hip[2])};
  return angleDeg(body, faceVector(f), "back-face");
}

double headTiltAngle(const LandmarkFrame& f) { return angleDeg(faceVector(f), {0.0, 1.0, 0.0}, "head tilt"); }

FootKnee footKneeAngles(const LandmarkFrame& f) {
  const double left = angleDeg(sub(f[Joint::LHip], f[Joint::LKnee]), sub(f[Joint::LFoot], f[Joint::LAnkle]), "left leg");
  const double right = angleDeg(sub(f[Joint::RHip], f[Joint::RKnee]), sub(f[Joint::RFoot], f[Joint::RAnkle]), "right leg");
  return {left, right};
}

FrameVerdict frameVerdict(const LandmarkFrame& frame, const CleanConfig& cfg) {
  FrameVerdict v;
  v.frame = frame.index;
  try {
    v.backFace = backFaceAngle(frame) <= cfg.backFaceMaxDeg + kBoundaryTolDeg;
    v.head = headTiltAngle(frame) <= cfg.headTiltMaxDeg + kBoundaryTolDeg;
    const FootKnee fk = footKneeAngles(frame);
    auto inRange = [&cfg](double a) {
      return a >= cfg.footKneeLowDeg - kBoundaryTolDeg && a <= cfg.footKneeHighDeg + kBoundaryTolDeg;
    };
    v.footKnee = inRange(fk.left) && inRange(fk.right);
  } catch (const DegeneratePoseError&) {
    v = FrameVerdict{frame.index, false, false, false, false, true};
  }
  v.valid = v.backFace && v.head && v.footKnee;
  return v;
}

std::vector<std::size_t> sampleIndices(std::size_t frameCount, std::size_t sampled) {
  if (frameCount == 0) throw std::invalid_argument("sampleIndices: empty sequence");
  if (sampled == 0) throw std::invalid_argument("sampleIndices: zero samples requested");
  std::vector<std::size_t> idx;
  if (frameCount < sampled) {
    for (std::size_t i = 0; i < frameCount; ++i) idx.push_back(i);
    return idx;
  }
  if (sampled == 1) return {0};
  for (std::size_t i = 0; i < sampled; ++i) idx.push_back(i * (frameCount - 1) / (sampled - 1));
  return idx;
}

VideoReport videoValidity(const std::vector<LandmarkFrame>& frames, const CleanConfig& cfg) {
  if (frames.empty()) throw std::invalid_argument("videoValidity: empty landmark sequence");
  VideoReport report;
  std::size_t valid = 0;
  for (std::size_t i : sampleIndices(frames.size(), cfg.sampledFrames)) {
    report.perFrame.push_back(frameVerdict(frames[i], cfg));
    valid += report.perFrame.back().valid ? 1 : 0;
  }
  report.score = static_cast<double>(valid) / static_cast<double>(report.perFrame.size());
  report.accepted = report.score >= cfg.minValidRatio;
  return report;
}

std::vector<LandmarkFrame> readLandmarksJsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<LandmarkFrame> frames;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ": line " + std::to_string(lineNo);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": malformed JSON: " + e.what());
    }
    try {
      LandmarkFrame f;
      f.index = j.at("frame").get<int>();
      const auto& joints = j.at("joints");
      for (std::size_t k = 0; k < kJointCount; ++k) {
        const auto& p = joints.at(std::string(kNames[k]));
        if (!p.is_array() || p.size() != 3) throw FormatError(where + ": joint " + std::string(kNames[k]) + " is not [x,y,z]");
        for (std::size_t c = 0; c < 3; ++c) f.joints[k][c] = p[c].get<double>();
      }
      frames.push_back(f);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return frames;
}

void writeLandmarksJsonl(const std::filesystem::path& path, const std::vector<LandmarkFrame>& frames) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  for (const auto& f : frames) {
    nlohmann::json joints = nlohmann::json::object();
    for (std::size_t k = 0; k < kJointCount; ++k) joints[std::string(kNames[k])] = f.joints[k];
    out << nlohmann::json{{"frame", f.index}, {"joints", joints}}.dump() << '\n';
  }
}

nlohmann::json toJson(const FrameVerdict& v) {
  return {{"frame", v.frame},     {"backFace", v.backFace}, {"head", v.head},
          {"footKnee", v.footKnee}, {"valid", v.valid},       {"degenerate", v.degenerate}};
}

nlohmann::json toJson(const VideoReport& r) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& v : r.perFrame) frames.push_back(toJson(v));
  return {{"path", r.path}, {"score", r.score}, {"accepted", r.accepted}, {"perFrame", frames}};
}

}  // namespace motionduet::pose
